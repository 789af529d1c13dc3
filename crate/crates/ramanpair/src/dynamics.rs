//! Effective single-excitation Hamiltonian and time propagation.
//!
//! The basis is {psi_0, psi_k} (pump photon present vs. Stokes photon in mode
//! k), optionally extended with the antisymmetric dark states {phi_1, phi_k}
//! which carry zero coupling to everything. Two independent propagators are
//! provided: an exact one via a single Hermitian eigendecomposition, and a
//! fixed-step classical RK4 integrator of dC/dt = -i H C.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ModeGrid, SystemParams};

pub type C64 = Complex<f64>;

/// Hard cap on Hamiltonian dimension.
pub const MAX_DIM: usize = 20_000;

/// RK4 stability guard: dt * (Gershgorin bound on |eigenvalue|) must stay
/// below this.
pub const RK4_STABILITY_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Lab,
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Expm,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    /// Both atoms in the ground state, pump photon present.
    Psi0,
    /// Symmetric one-atom-excited state (full model only).
    Psi1,
    /// Symmetric entangled state with a Stokes photon in mode k.
    PsiK(usize),
    /// Antisymmetric (dark) partner of Psi1.
    Phi1,
    /// Antisymmetric (dark) partner of PsiK(k).
    PhiK(usize),
}

/// Index layout of the amplitude vector: psi_0, (psi_1,) psi_k...,
/// (phi_1, phi_k...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisLayout {
    pub n_modes: usize,
    /// Full (three-level) model keeps the intermediate symmetric state psi_1.
    pub has_intermediate: bool,
    /// Effective model optionally carries the dark-state block.
    pub has_dark: bool,
}

impl BasisLayout {
    pub fn effective(n_modes: usize) -> Self {
        BasisLayout { n_modes, has_intermediate: false, has_dark: false }
    }

    pub fn effective_with_dark(n_modes: usize) -> Self {
        BasisLayout { n_modes, has_intermediate: false, has_dark: true }
    }

    pub fn full(n_modes: usize) -> Self {
        BasisLayout { n_modes, has_intermediate: true, has_dark: false }
    }

    pub fn dim(&self) -> usize {
        1 + usize::from(self.has_intermediate)
            + self.n_modes
            + if self.has_dark { self.n_modes + 1 } else { 0 }
    }

    pub fn idx_psi0(&self) -> usize {
        0
    }

    pub fn idx_psi1(&self) -> Option<usize> {
        self.has_intermediate.then_some(1)
    }

    pub fn idx_mode(&self, k: usize) -> usize {
        debug_assert!(k < self.n_modes);
        1 + usize::from(self.has_intermediate) + k
    }

    /// First index of the dark block (phi_1), when present.
    pub fn idx_dark_start(&self) -> Option<usize> {
        self.has_dark.then(|| 1 + self.n_modes)
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        let mut labels = Vec::with_capacity(self.dim());
        labels.push(BasisLabel::Psi0);
        if self.has_intermediate {
            labels.push(BasisLabel::Psi1);
        }
        labels.extend((0..self.n_modes).map(BasisLabel::PsiK));
        if self.has_dark {
            labels.push(BasisLabel::Phi1);
            labels.extend((0..self.n_modes).map(BasisLabel::PhiK));
        }
        labels
    }
}

/// Real symmetric Hamiltonian stored as diagonal plus sparse off-diagonal
/// couplings (the coupling topology is a star, or a two-hub chain for the
/// full model).
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    layout: BasisLayout,
    diag: Vec<f64>,
    /// (i, j, value) with i < j; H[i][j] = H[j][i] = value.
    offdiag: Vec<(usize, usize, f64)>,
    fingerprint: u64,
}

impl Hamiltonian {
    pub fn new(layout: BasisLayout, diag: Vec<f64>, offdiag: Vec<(usize, usize, f64)>) -> Result<Self> {
        let dim = layout.dim();
        if dim > MAX_DIM {
            return Err(Error::TooLarge(format!("dimension {dim} exceeds maximum {MAX_DIM}")));
        }
        if diag.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "diagonal length {} != layout dimension {dim}",
                diag.len()
            )));
        }
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::Numerical("non-finite diagonal entry".into()));
        }
        for &(i, j, v) in &offdiag {
            if i >= j || j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "off-diagonal index ({i}, {j}) out of order or out of range"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numerical("non-finite coupling entry".into()));
            }
        }
        let fingerprint = {
            let mut h = DefaultHasher::new();
            layout.hash(&mut h);
            for d in &diag {
                d.to_bits().hash(&mut h);
            }
            for &(i, j, v) in &offdiag {
                (i, j, v.to_bits()).hash(&mut h);
            }
            h.finish()
        };
        Ok(Hamiltonian { layout, diag, offdiag, fingerprint })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> BasisLayout {
        self.layout
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[(usize, usize, f64)] {
        &self.offdiag
    }

    pub fn basis_labels(&self) -> Vec<BasisLabel> {
        self.layout.labels()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Dense symmetric matrix; exact by construction (H - H^T = 0).
    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in self.diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        for &(i, j, v) in &self.offdiag {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// H * c exploiting the sparse coupling structure.
    pub fn matvec(&self, c: &DVector<C64>) -> DVector<C64> {
        let mut out = DVector::from_fn(self.dim(), |i, _| c[i] * self.diag[i]);
        for &(i, j, v) in &self.offdiag {
            out[i] += c[j] * v;
            out[j] += c[i] * v;
        }
        out
    }

    /// Upper bound on |eigenvalue| after shifting the diagonal by `shift`:
    /// the smaller of the Gershgorin bound and the diagonal spread plus the
    /// Frobenius norm of the off-diagonal part. Gershgorin is very loose on
    /// star-shaped couplings (the hub row sums every |lambda_k|) where the
    /// Frobenius route stays tight.
    pub fn gershgorin_bound(&self, shift: f64) -> f64 {
        let mut radius = vec![0.0f64; self.dim()];
        let mut frob_sq = 0.0;
        for &(i, j, v) in &self.offdiag {
            radius[i] += v.abs();
            radius[j] += v.abs();
            frob_sq += 2.0 * v * v;
        }
        let gershgorin = self
            .diag
            .iter()
            .zip(&radius)
            .map(|(d, r)| (d - shift).abs() + r)
            .fold(0.0, f64::max);
        let spread = self.diag.iter().map(|d| (d - shift).abs()).fold(0.0, f64::max);
        gershgorin.min(spread + frob_sq.sqrt())
    }

    fn mean_diag(&self) -> f64 {
        self.diag.iter().sum::<f64>() / self.dim() as f64
    }

    /// Indices that participate in at least one off-diagonal coupling, and
    /// those that are purely diagonal (dark block, decoupled modes).
    fn coupled_partition(&self) -> (Vec<usize>, Vec<usize>) {
        let mut coupled = vec![false; self.dim()];
        for &(i, j, _) in &self.offdiag {
            coupled[i] = true;
            coupled[j] = true;
        }
        let mut on = Vec::new();
        let mut off = Vec::new();
        for (i, &c) in coupled.iter().enumerate() {
            if c {
                on.push(i);
            } else {
                off.push(i);
            }
        }
        (on, off)
    }
}

/// Assemble the effective Hamiltonian over {psi_0, psi_k}: H[0][0] = omega_P,
/// H[k][k] = omega_Sk + omega_31, H[0][k] = sqrt(n_atoms) * lambda_k. With
/// `include_dark`, a fully decoupled {phi_1, phi_k} block is appended.
pub fn assemble_hamiltonian(
    params: &SystemParams,
    grid: &ModeGrid,
    include_dark: bool,
) -> Result<Hamiltonian> {
    if !grid.contains(params.omega_res()) {
        return Err(Error::InvalidArgument(format!(
            "grid [{}, {}] does not contain omega_res = {}",
            grid.min_frequency(),
            grid.max_frequency(),
            params.omega_res()
        )));
    }
    let n = grid.n_modes();
    let layout = if include_dark {
        BasisLayout::effective_with_dark(n)
    } else {
        BasisLayout::effective(n)
    };
    let dicke = (params.n_atoms as f64).sqrt();
    let mut diag = vec![0.0; layout.dim()];
    diag[layout.idx_psi0()] = params.omega_p;
    for (k, &w) in grid.frequencies().iter().enumerate() {
        diag[layout.idx_mode(k)] = w + params.omega_31;
    }
    if let Some(d0) = layout.idx_dark_start() {
        diag[d0] = params.omega_p;
        for (k, &w) in grid.frequencies().iter().enumerate() {
            diag[d0 + 1 + k] = w + params.omega_31;
        }
    }
    let offdiag = grid
        .couplings()
        .iter()
        .enumerate()
        .filter(|&(_, &l)| l != 0.0)
        .map(|(k, &l)| (layout.idx_psi0(), layout.idx_mode(k), dicke * l))
        .collect();
    Hamiltonian::new(layout, diag, offdiag)
}

/// Complex amplitude vector at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeState {
    pub time: f64,
    pub frame: Frame,
    layout: BasisLayout,
    amps: DVector<C64>,
}

impl AmplitudeState {
    pub fn new(time: f64, frame: Frame, layout: BasisLayout, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::InvalidArgument(format!(
                "amplitude length {} != layout dimension {}",
                amps.len(),
                layout.dim()
            )));
        }
        Ok(AmplitudeState { time, frame, layout, amps })
    }

    /// Initial condition C_0(0) = 1, everything else 0, lab frame.
    pub fn initial(layout: BasisLayout) -> Self {
        let mut amps = DVector::from_element(layout.dim(), C64::new(0.0, 0.0));
        amps[layout.idx_psi0()] = C64::new(1.0, 0.0);
        AmplitudeState { time: 0.0, frame: Frame::Lab, layout, amps }
    }

    pub fn layout(&self) -> BasisLayout {
        self.layout
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    /// Amplitude of psi_0.
    pub fn c0(&self) -> C64 {
        self.amps[self.layout.idx_psi0()]
    }

    /// Amplitude of psi_1 (full model only).
    pub fn b1(&self) -> Option<C64> {
        self.layout.idx_psi1().map(|i| self.amps[i])
    }

    /// Amplitudes of psi_k.
    pub fn ck(&self) -> &[C64] {
        let start = self.layout.idx_mode(0);
        &self.amps.as_slice()[start..start + self.layout.n_modes]
    }

    /// Amplitudes of the dark block {phi_1, phi_k}; empty when not extended.
    pub fn dark(&self) -> &[C64] {
        match self.layout.idx_dark_start() {
            Some(d0) => &self.amps.as_slice()[d0..],
            None => &[],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Ordered sequence of amplitude samples from one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<AmplitudeState>,
    pub method: Method,
    /// Fingerprint of the Hamiltonian (hence of SystemParams + ModeGrid).
    pub params_digest: u64,
}

impl Trajectory {
    pub fn layout(&self) -> BasisLayout {
        self.samples[0].layout
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }
}

/// Right-hand side of the Schroedinger equation: -i H C. Lab frame only.
pub fn derivative(h: &Hamiltonian, state: &AmplitudeState) -> Result<DVector<C64>> {
    if state.frame != Frame::Lab {
        return Err(Error::InvalidFrame("derivative requires a lab-frame state".into()));
    }
    if state.layout != h.layout() {
        return Err(Error::InvalidArgument("state layout does not match Hamiltonian".into()));
    }
    Ok(h.matvec(&state.amps) * C64::new(0.0, -1.0))
}

/// Exact propagator built from one Hermitian eigendecomposition of the
/// coupled block; purely diagonal indices (dark states, decoupled modes)
/// evolve by exact phase factors and never mix.
pub struct ExpmPropagator {
    layout: BasisLayout,
    coupled: Vec<usize>,
    isolated: Vec<usize>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    iso_diag: Vec<f64>,
    digest: u64,
}

impl ExpmPropagator {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let (coupled, isolated) = h.coupled_partition();
        let m = coupled.len();
        let mut sub = DMatrix::zeros(m, m);
        let mut pos = vec![usize::MAX; h.dim()];
        for (a, &i) in coupled.iter().enumerate() {
            pos[i] = a;
            sub[(a, a)] = h.diag()[i];
        }
        for &(i, j, v) in h.offdiag() {
            let (a, b) = (pos[i], pos[j]);
            sub[(a, b)] = v;
            sub[(b, a)] = v;
        }
        // faer's blocked solver is much faster than nalgebra's on the
        // 1600-mode grids the library is meant for; a fully diagonal
        // Hamiltonian has no coupled block, and phases handle the rest.
        let (eigenvalues, eigenvectors) = if m == 0 {
            (DVector::zeros(0), DMatrix::zeros(0, 0))
        } else {
            let dense = faer::Mat::<f64>::from_fn(m, m, |a, b| sub[(a, b)]);
            let eig = dense
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
            let s = eig.S().column_vector();
            (
                DVector::from_fn(m, |a, _| s[a]),
                DMatrix::from_fn(m, m, |a, b| eig.U()[(a, b)]),
            )
        };
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite values".into()));
        }
        let iso_diag = isolated.iter().map(|&i| h.diag()[i]).collect();
        Ok(ExpmPropagator {
            layout: h.layout(),
            coupled,
            isolated,
            eigenvalues,
            eigenvectors,
            iso_diag,
            digest: h.fingerprint(),
        })
    }

    pub fn params_digest(&self) -> u64 {
        self.digest
    }

    /// C(t) = exp(-i H (t - t0)) C(t0).
    pub fn advance(&self, initial: &AmplitudeState, t: f64) -> Result<AmplitudeState> {
        if initial.frame != Frame::Lab {
            return Err(Error::InvalidFrame("expm propagation requires a lab-frame state".into()));
        }
        if initial.layout != self.layout {
            return Err(Error::InvalidArgument("state layout does not match propagator".into()));
        }
        let dt = t - initial.time;
        let m = self.coupled.len();
        let mut out = DVector::from_element(self.layout.dim(), C64::new(0.0, 0.0));

        // coupled block: V exp(-i Lambda dt) V^T x
        let mut proj = DVector::from_element(m, C64::new(0.0, 0.0));
        for a in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for (b, &i) in self.coupled.iter().enumerate() {
                acc += initial.amps[i] * self.eigenvectors[(b, a)];
            }
            proj[a] = acc * C64::new(0.0, -self.eigenvalues[a] * dt).exp();
        }
        for (b, &i) in self.coupled.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..m {
                acc += proj[a] * self.eigenvectors[(b, a)];
            }
            out[i] = acc;
        }

        for (&i, &d) in self.isolated.iter().zip(&self.iso_diag) {
            out[i] = initial.amps[i] * C64::new(0.0, -d * dt).exp();
        }
        AmplitudeState::new(t, Frame::Lab, self.layout, out)
    }
}

/// Propagate by exact matrix exponential (one eigendecomposition, reused for
/// every requested time).
pub fn propagate_expm(h: &Hamiltonian, initial: &AmplitudeState, times: &[f64]) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("times must be non-empty".into()));
    }
    if times[0] < initial.time {
        return Err(Error::InvalidArgument(format!(
            "times[0] = {} precedes initial time {}",
            times[0], initial.time
        )));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let prop = ExpmPropagator::new(h)?;
    let samples = times
        .iter()
        .map(|&t| prop.advance(initial, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { samples, method: Method::Expm, params_digest: h.fingerprint() })
}

/// Classical fixed-step RK4 integration of dC/dt = -i H C, recording every
/// `record_every`-th step (plus the first and last).
///
/// Integration runs in the frame shifted by the mean diagonal (an exact
/// identity, undone analytically on output) so that step error is governed
/// by the spectral spread rather than the absolute optical frequencies.
pub fn propagate_rk4(
    h: &Hamiltonian,
    initial: &AmplitudeState,
    dt: f64,
    t_max: f64,
    record_every: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    if !(t_max > initial.time) {
        return Err(Error::InvalidArgument(format!(
            "t_max = {t_max} must exceed initial time {}",
            initial.time
        )));
    }
    if initial.frame != Frame::Lab {
        return Err(Error::InvalidFrame("rk4 propagation requires a lab-frame state".into()));
    }
    if initial.layout != h.layout() {
        return Err(Error::InvalidArgument("state layout does not match Hamiltonian".into()));
    }
    let shift = h.mean_diag();
    let bound = h.gershgorin_bound(shift);
    if dt * bound >= RK4_STABILITY_LIMIT {
        return Err(Error::StepTooLarge(format!(
            "dt * Gershgorin bound = {} exceeds stability limit {RK4_STABILITY_LIMIT}",
            dt * bound
        )));
    }

    let t0 = initial.time;
    let n_steps = ((t_max - t0) / dt).ceil() as usize;
    let deriv = |y: &DVector<C64>| -> DVector<C64> {
        let mut hy = h.matvec(y);
        hy.zip_apply(y, |o, yi| *o = (*o - yi * shift) * C64::new(0.0, -1.0));
        hy
    };
    let record = |samples: &mut Vec<AmplitudeState>, y: &DVector<C64>, step: usize| {
        let t = t0 + step as f64 * dt;
        let phase = C64::new(0.0, -shift * (t - t0)).exp();
        let amps = y.map(|a| a * phase);
        samples.push(AmplitudeState { time: t, frame: Frame::Lab, layout: h.layout(), amps });
    };

    let mut y = initial.amps.clone();
    let mut samples = Vec::with_capacity(n_steps / record_every + 2);
    record(&mut samples, &y, 0);
    for step in 1..=n_steps {
        let k1 = deriv(&y);
        let k2 = deriv(&(&y + &k1 * C64::new(dt / 2.0, 0.0)));
        let k3 = deriv(&(&y + &k2 * C64::new(dt / 2.0, 0.0)));
        let k4 = deriv(&(&y + &k3 * C64::new(dt, 0.0)));
        y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        if step % record_every == 0 || step == n_steps {
            record(&mut samples, &y, step);
        }
    }
    Ok(Trajectory { samples, method: Method::Rk4, params_digest: h.fingerprint() })
}

/// Remove the free diagonal phases: C~_i(t) = C_i(t) exp(+i d_i t) with d_i
/// the Hamiltonian diagonal. Moduli are unchanged.
pub fn to_rotating_frame(traj: &Trajectory, h: &Hamiltonian) -> Result<Trajectory> {
    apply_frame_phases(traj, h, Frame::Lab, Frame::Rotating, 1.0)
}

/// Inverse of [`to_rotating_frame`].
pub fn to_lab_frame(traj: &Trajectory, h: &Hamiltonian) -> Result<Trajectory> {
    apply_frame_phases(traj, h, Frame::Rotating, Frame::Lab, -1.0)
}

fn apply_frame_phases(
    traj: &Trajectory,
    h: &Hamiltonian,
    expect: Frame,
    target: Frame,
    sign: f64,
) -> Result<Trajectory> {
    if traj.layout() != h.layout() {
        return Err(Error::InvalidArgument("trajectory layout does not match Hamiltonian".into()));
    }
    let samples = traj
        .samples
        .iter()
        .map(|s| {
            if s.frame != expect {
                return Err(Error::InvalidFrame(format!(
                    "sample at t = {} is not in the {expect:?} frame",
                    s.time
                )));
            }
            let amps = DVector::from_fn(s.amps.len(), |i, _| {
                s.amps[i] * C64::new(0.0, sign * h.diag()[i] * s.time).exp()
            });
            Ok(AmplitudeState { time: s.time, frame: target, layout: s.layout, amps })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { samples, method: traj.method, params_digest: traj.params_digest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_mode_grid, CouplingProfile, FrequencyUnit, ModeGrid, SystemParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn toy_params(lambda0: f64, n_atoms: usize) -> SystemParams {
        SystemParams::new(
            10.0,
            3.0,
            n_atoms,
            CouplingProfile::Flat { lambda0 },
            FrequencyUnit::dimensionless(),
        )
        .unwrap()
    }

    /// Single resonant mode at omega_res = 7, so omega_Sk + omega_31 = 10.
    fn single_mode_grid(lambda0: f64) -> ModeGrid {
        ModeGrid::from_parts(vec![7.0], vec![lambda0], 1.0).unwrap()
    }

    #[test]
    fn two_by_two_matrix_elements() {
        let p = toy_params(0.1, 2);
        let g = single_mode_grid(0.1);
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let m = h.dense();
        assert_eq!(m[(0, 0)], 10.0);
        assert_eq!(m[(1, 1)], 10.0);
        assert_relative_eq!(m[(0, 1)], 0.1 * 2f64.sqrt(), max_relative = 1e-15);
        assert_eq!(m[(0, 1)], m[(1, 0)]);
    }

    #[test]
    fn dicke_factor_three_atoms() {
        let p = toy_params(0.1, 3);
        let g = single_mode_grid(0.1);
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        assert_relative_eq!(h.dense()[(0, 1)], 0.1 * 3f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn dicke_factor_matches_symmetric_subspace_oracle() {
        // Brute force: N atoms, basis {|all ground, pump>} + {atom f excited,
        // stokes photon}. The coupling of psi_0 to the normalized symmetric
        // combination is the norm of H|psi_0> in the excited sector.
        for n_atoms in [2usize, 3, 4] {
            let lambda = 0.1;
            // H|psi_0> = lambda * sum_f |f>, norm = lambda * sqrt(N)
            let hpsi0: Vec<f64> = vec![lambda; n_atoms];
            let norm = hpsi0.iter().map(|x| x * x).sum::<f64>().sqrt();
            let p = toy_params(lambda, n_atoms);
            let h = assemble_hamiltonian(&p, &single_mode_grid(lambda), false).unwrap();
            assert_relative_eq!(h.dense()[(0, 1)], norm, max_relative = 1e-15);
        }
    }

    #[test]
    fn star_topology_and_hermiticity() {
        let p = toy_params(0.02, 2);
        let g = build_mode_grid(&p, 2.0, 11).unwrap();
        let h = assemble_hamiltonian(&p, &g, true).unwrap();
        let m = h.dense();
        assert_eq!(m.clone() - m.transpose(), DMatrix::zeros(h.dim(), h.dim()));
        // only row 0 couples; dark block fully decoupled
        for &(i, _, _) in h.offdiag() {
            assert_eq!(i, 0);
        }
        let d0 = h.layout().idx_dark_start().unwrap();
        for &(i, j, _) in h.offdiag() {
            assert!(i < d0 && j < d0);
        }
        assert_eq!(h.dim(), 1 + 11 + 12);
    }

    #[test]
    fn dimension_guard() {
        let layout = BasisLayout::effective(MAX_DIM);
        assert!(matches!(
            Hamiltonian::new(layout, vec![], vec![]),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn derivative_matches_hand_computation() {
        let p = toy_params(0.1, 2);
        let g = single_mode_grid(0.1);
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let s = AmplitudeState::initial(h.layout());
        let d = derivative(&h, &s).unwrap();
        assert_abs_diff_eq!(d[0].re, 0.0);
        assert_abs_diff_eq!(d[0].im, -10.0);
        assert_abs_diff_eq!(d[1].re, 0.0);
        assert_relative_eq!(d[1].im, -0.1 * 2f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn derivative_agrees_with_dense_product() {
        let p = toy_params(0.03, 2);
        let g = build_mode_grid(&p, 1.0, 9).unwrap();
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let amps = DVector::from_fn(h.dim(), |i, _| C64::new(0.3 * i as f64, 0.1 - 0.05 * i as f64));
        let s = AmplitudeState::new(0.0, Frame::Lab, h.layout(), amps.clone()).unwrap();
        let fast = derivative(&h, &s).unwrap();
        let dense = h.dense().map(|v| C64::new(v, 0.0)) * amps * C64::new(0.0, -1.0);
        for i in 0..h.dim() {
            assert_abs_diff_eq!((fast[i] - dense[i]).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_rejects_rotating_frame() {
        let p = toy_params(0.1, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.1), false).unwrap();
        let mut s = AmplitudeState::initial(h.layout());
        s.frame = Frame::Rotating;
        assert!(matches!(derivative(&h, &s), Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn expm_diagonal_phase_evolution() {
        let p = toy_params(0.0, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.0), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let traj = propagate_expm(&h, &init, &[1.0, 2.5]).unwrap();
        for s in &traj.samples {
            let expected = C64::new(0.0, -10.0 * s.time).exp();
            assert_abs_diff_eq!((s.c0() - expected).norm(), 0.0, epsilon = 1e-12);
            assert_eq!(s.ck()[0], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn expm_rabi_flopping() {
        let p = toy_params(0.1, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.1), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let times: Vec<f64> = (1..50).map(|i| 0.3 * i as f64).collect();
        let traj = propagate_expm(&h, &init, &times).unwrap();
        let omega = 0.1 * 2f64.sqrt();
        for s in &traj.samples {
            assert_relative_eq!(
                s.c0().norm_sqr(),
                (omega * s.time).cos().powi(2),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn expm_norm_conservation_on_grid() {
        let p = toy_params(0.01, 2);
        let g = build_mode_grid(&p, 4.0, 201).unwrap();
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let times: Vec<f64> = (1..=40).map(|i| 0.5 * i as f64).collect();
        let traj = propagate_expm(&h, &init, &times).unwrap();
        for s in &traj.samples {
            assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn expm_rejects_bad_times() {
        let p = toy_params(0.1, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.1), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        assert!(propagate_expm(&h, &init, &[]).is_err());
        assert!(propagate_expm(&h, &init, &[1.0, 1.0]).is_err());
        assert!(propagate_expm(&h, &init, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn rk4_matches_expm_phases_for_zero_coupling() {
        let p = toy_params(0.0, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.0), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let traj = propagate_rk4(&h, &init, 1e-3, 10.0, 1000).unwrap();
        let last = traj.samples.last().unwrap();
        let exact = C64::new(0.0, -10.0 * last.time).exp();
        assert!((last.c0() - exact).norm() < 1e-10);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let p = toy_params(0.1, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.1), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let t_end = 10.0;
        let exact = propagate_expm(&h, &init, &[t_end]).unwrap().samples[0].c0();
        let err = |dt: f64| {
            let traj = propagate_rk4(&h, &init, dt, t_end, usize::MAX).unwrap();
            (traj.samples.last().unwrap().c0() - exact).norm()
        };
        let e1 = err(0.05);
        let e2 = err(0.025);
        let ratio = e1 / e2;
        assert!(
            (8.0..32.0).contains(&ratio),
            "halving dt should shrink error ~16x, got {ratio} ({e1} -> {e2})"
        );
    }

    #[test]
    fn rk4_gershgorin_guard() {
        let p = toy_params(0.1, 2);
        let g = build_mode_grid(&p, 4.0, 21).unwrap();
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        // spread after mean shift ~ 2; dt = 1 violates the guard
        assert!(matches!(
            propagate_rk4(&h, &init, 1.0, 10.0, 1),
            Err(Error::StepTooLarge(_))
        ));
    }

    #[test]
    fn dark_block_stays_exactly_zero() {
        let p = toy_params(0.05, 2);
        let g = build_mode_grid(&p, 2.0, 9).unwrap();
        let h = assemble_hamiltonian(&p, &g, true).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let expm = propagate_expm(&h, &init, &[1.0, 5.0, 20.0]).unwrap();
        for s in &expm.samples {
            assert!(s.dark().iter().all(|a| a.norm() == 0.0));
        }
        let rk4 = propagate_rk4(&h, &init, 1e-2, 5.0, 100).unwrap();
        for s in &rk4.samples {
            assert!(s.dark().iter().all(|a| a.norm() < 1e-12));
        }
    }

    #[test]
    fn rotating_frame_round_trip_and_moduli() {
        let p = toy_params(0.05, 2);
        let g = build_mode_grid(&p, 2.0, 9).unwrap();
        let h = assemble_hamiltonian(&p, &g, false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let times: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let traj = propagate_expm(&h, &init, &times).unwrap();
        let rot = to_rotating_frame(&traj, &h).unwrap();
        for (a, b) in traj.samples.iter().zip(&rot.samples) {
            for i in 0..a.amps.len() {
                assert_abs_diff_eq!(a.amps[i].norm(), b.amps[i].norm(), epsilon = 1e-15);
            }
        }
        assert!(matches!(to_rotating_frame(&rot, &h), Err(Error::InvalidFrame(_))));
        let back = to_lab_frame(&rot, &h).unwrap();
        for (a, b) in traj.samples.iter().zip(&back.samples) {
            for i in 0..a.amps.len() {
                assert!((a.amps[i] - b.amps[i]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rotating_frame_zero_coupling_is_constant() {
        let p = toy_params(0.0, 2);
        let h = assemble_hamiltonian(&p, &single_mode_grid(0.0), false).unwrap();
        let init = AmplitudeState::initial(h.layout());
        let traj = propagate_expm(&h, &init, &[2.0, 7.0]).unwrap();
        let rot = to_rotating_frame(&traj, &h).unwrap();
        for s in &rot.samples {
            assert!((s.c0() - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }
}
