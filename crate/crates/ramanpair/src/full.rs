//! Un-eliminated three-level dynamics in the symmetric single-excitation
//! sector: {psi_0, psi_1, psi_k} with the pump transition 1<->2 and the
//! Stokes transition 2<->3 kept explicit. Used to validate the adiabatic
//! removal of the intermediate level behind the effective model.

use crate::dynamics::{assemble_hamiltonian, BasisLayout, Hamiltonian, Trajectory};
use crate::error::{Error, Result};
use crate::model::{coupling_at, CouplingProfile, FrequencyUnit, ModeGrid, SystemParams};
use crate::observables::populations;

/// Parameters of the full three-level model.
#[derive(Debug, Clone, PartialEq)]
pub struct FullParams {
    /// Single-photon coupling on 1<->2 (pump).
    pub g_p: f64,
    /// Single-photon couplings g_Sk on 2<->3 (Stokes emission).
    pub g_s_profile: CouplingProfile,
    /// Detuning delta_2 = E2 - E1 - omega_P of the intermediate level.
    pub detuning2: f64,
    pub omega_p: f64,
    pub omega_31: f64,
    pub n_atoms: usize,
}

impl FullParams {
    /// max(g_p, max_k g_Sk) / |delta_2|; the adiabatic regime needs this
    /// small (<= 0.1).
    pub fn coupling_ratio(&self, grid: &ModeGrid) -> Result<f64> {
        let max_gs = grid
            .frequencies()
            .iter()
            .map(|&w| coupling_at(&self.g_s_profile, w))
            .try_fold(0.0f64, |m, g| g.map(|g| m.max(g)))?;
        Ok(self.g_p.max(max_gs) / self.detuning2.abs())
    }

    /// Equivalent effective-model parameters: flat system constants with the
    /// eliminated two-photon coupling profile over the grid.
    pub fn effective_system(&self, grid: &ModeGrid) -> Result<SystemParams> {
        SystemParams::new(
            self.omega_p,
            self.omega_31,
            self.n_atoms,
            self.effective_profile(grid)?,
            FrequencyUnit::dimensionless(),
        )
    }

    fn effective_profile(&self, grid: &ModeGrid) -> Result<CouplingProfile> {
        if let CouplingProfile::Flat { lambda0: _ } = self.g_s_profile {
            return Ok(CouplingProfile::Flat {
                lambda0: effective_coupling(self, grid.frequencies()[0])?,
            });
        }
        let points = grid
            .frequencies()
            .iter()
            .map(|&w| effective_coupling(self, w).map(|l| (w, l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CouplingProfile::UserTable { points })
    }
}

/// Assemble the (2 + n_modes)-dimensional symmetric-sector Hamiltonian:
/// diagonal {omega_P, omega_P + delta_2, omega_Sk + omega_31}, couplings
/// <psi_1|H|psi_0> = sqrt(N) g_p (collective absorption) and
/// <psi_k|H|psi_1> = g_Sk (single-atom emission from the shared excitation).
pub fn assemble_full_hamiltonian(fp: &FullParams, grid: &ModeGrid) -> Result<Hamiltonian> {
    if fp.n_atoms < 2 {
        return Err(Error::InvalidArgument(format!("n_atoms must be >= 2, got {}", fp.n_atoms)));
    }
    let n = grid.n_modes();
    let layout = BasisLayout::full(n);
    let mut diag = vec![0.0; layout.dim()];
    diag[layout.idx_psi0()] = fp.omega_p;
    diag[layout.idx_psi1().expect("full layout")] = fp.omega_p + fp.detuning2;
    for (k, &w) in grid.frequencies().iter().enumerate() {
        diag[layout.idx_mode(k)] = w + fp.omega_31;
    }
    let i1 = layout.idx_psi1().expect("full layout");
    let mut offdiag = Vec::with_capacity(n + 1);
    if fp.g_p != 0.0 {
        offdiag.push((layout.idx_psi0(), i1, (fp.n_atoms as f64).sqrt() * fp.g_p));
    }
    for (k, &w) in grid.frequencies().iter().enumerate() {
        let g = coupling_at(&fp.g_s_profile, w)?;
        if g != 0.0 {
            offdiag.push((i1, layout.idx_mode(k), g));
        }
    }
    Hamiltonian::new(layout, diag, offdiag)
}

/// Standard large-detuning reduction of the two-photon coupling:
/// lambda(omega) = g_p * g_S(omega) / delta_2. Refused at delta_2 = 0, where
/// the elimination is invalid.
pub fn effective_coupling(fp: &FullParams, omega_k: f64) -> Result<f64> {
    if fp.detuning2 == 0.0 {
        return Err(Error::InvalidArgument(
            "adiabatic elimination is invalid at detuning2 = 0".into(),
        ));
    }
    Ok(fp.g_p * coupling_at(&fp.g_s_profile, omega_k)? / fp.detuning2)
}

/// Effective Hamiltonian used for fair full-vs-effective comparison: the
/// eliminated coupling lambda_k = g_p g_Sk / delta_2 plus the second-order
/// AC-Stark corrections on the diagonal (-N g_p^2/delta_2 on psi_0,
/// -g_Sk^2/delta_2 on psi_k). The plain equation-of-motion model stays untouched;
/// the shifts live only here.
pub fn stark_shifted_effective(fp: &FullParams, grid: &ModeGrid) -> Result<Hamiltonian> {
    let sys = fp.effective_system(grid)?;
    let mut h = assemble_hamiltonian(&sys, grid, false)?;
    let layout = h.layout();
    let mut diag = h.diag().to_vec();
    diag[layout.idx_psi0()] -= fp.n_atoms as f64 * fp.g_p * fp.g_p / fp.detuning2;
    for (k, &w) in grid.frequencies().iter().enumerate() {
        let g = coupling_at(&fp.g_s_profile, w)?;
        diag[layout.idx_mode(k)] -= g * g / fp.detuning2;
    }
    h = Hamiltonian::new(layout, diag, h.offdiag().to_vec())?;
    Ok(h)
}

/// Outcome of comparing a full-model trajectory against the eliminated
/// effective model on common time samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdiabaticityReport {
    /// max over t of |b_1(t)|^2.
    pub max_b1_sq: f64,
    /// max over t and components of |populations_full - populations_eff|.
    pub max_population_discrepancy: f64,
    /// max(g)/|delta_2|.
    pub coupling_ratio: f64,
    /// max_b1_sq <= 4 (sqrt(N) g_p / delta_2)^2: the intermediate state is
    /// driven by the collective pump coupling, and a sudden switch-on rings
    /// at up to twice the adiabatic-following amplitude.
    pub pass_intermediate: bool,
    /// discrepancy <= 10 * ratio.
    pub pass_population: bool,
    pub pass: bool,
}

/// Quantify how well the intermediate level can be omitted. Both
/// trajectories must be sampled at the same times; the effective trajectory
/// is expected to come from [`stark_shifted_effective`].
pub fn adiabaticity_report(
    full_traj: &Trajectory,
    eff_traj: &Trajectory,
    fp: &FullParams,
    grid: &ModeGrid,
) -> Result<AdiabaticityReport> {
    if !full_traj.layout().has_intermediate {
        return Err(Error::InvalidArgument("first trajectory must be a full-model run".into()));
    }
    if eff_traj.layout().has_intermediate {
        return Err(Error::InvalidArgument("second trajectory must be an effective-model run".into()));
    }
    if full_traj.samples.len() != eff_traj.samples.len() {
        return Err(Error::InvalidArgument(format!(
            "sample counts differ: {} vs {}",
            full_traj.samples.len(),
            eff_traj.samples.len()
        )));
    }
    let t_scale = full_traj
        .samples
        .iter()
        .fold(1.0f64, |m, s| m.max(s.time.abs()));
    for (a, b) in full_traj.samples.iter().zip(&eff_traj.samples) {
        if (a.time - b.time).abs() > 1e-9 * t_scale {
            return Err(Error::InvalidArgument(format!(
                "time grids differ at t = {} vs {}",
                a.time, b.time
            )));
        }
    }
    let ratio = fp.coupling_ratio(grid)?;
    let pf = populations(full_traj);
    let pe = populations(eff_traj);
    let mut max_b1_sq = 0.0f64;
    let mut max_disc = 0.0f64;
    for (a, b) in pf.iter().zip(&pe) {
        max_b1_sq = max_b1_sq.max(a.p1.unwrap_or(0.0));
        max_disc = max_disc.max((a.p0 - b.p0).abs()).max((a.p_stokes - b.p_stokes).abs());
    }
    let pump_ratio = (fp.n_atoms as f64).sqrt() * fp.g_p / fp.detuning2.abs();
    let pass_intermediate = max_b1_sq <= 4.0 * pump_ratio * pump_ratio;
    let pass_population = max_disc <= 10.0 * ratio;
    Ok(AdiabaticityReport {
        max_b1_sq,
        max_population_discrepancy: max_disc,
        coupling_ratio: ratio,
        pass_intermediate,
        pass_population,
        pass: pass_intermediate && pass_population,
    })
}
