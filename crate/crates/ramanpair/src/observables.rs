//! Physical outputs: populations, reduced two-atom density matrix, Wootters
//! concurrence, emitted-photon spectrum, and exponential/Lorentzian fits.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{AmplitudeState, Trajectory, C64};
use crate::error::{Error, Result};
use crate::model::ModeGrid;

/// Population record at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSample {
    pub time: f64,
    /// |C_0|^2: pump photon still present.
    pub p0: f64,
    /// sum_k |C_k|^2: Stokes photon emitted.
    pub p_stokes: f64,
    /// |b_1|^2 (full model only).
    pub p1: Option<f64>,
    /// Dark-block weight (extended basis only; identically 0 in practice).
    pub p_dark: f64,
    pub norm_sqr: f64,
}

/// Per-sample populations along a trajectory.
pub fn populations(traj: &Trajectory) -> Vec<PopulationSample> {
    traj.samples
        .iter()
        .map(|s| {
            let p0 = s.c0().norm_sqr();
            let p_stokes = s.ck().iter().map(|c| c.norm_sqr()).sum();
            let p1 = s.b1().map(|b| b.norm_sqr());
            let p_dark = s.dark().iter().map(|c| c.norm_sqr()).sum();
            PopulationSample {
                time: s.time,
                p0,
                p_stokes,
                p1,
                p_dark,
                norm_sqr: p0 + p_stokes + p1.unwrap_or(0.0) + p_dark,
            }
        })
        .collect()
}

/// Hermitian, positive-semidefinite, unit-trace matrix over the effective
/// two-atom qubit space {|1>, |3>} x {|1>, |3>}, basis order
/// {|11>, |13>, |31>, |33>}.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub const DIM: usize = 4;

    /// Validates Hermiticity (1e-12), unit trace (1e-12), and positivity
    /// (eigenvalues >= -1e-12).
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != Self::DIM || m.ncols() != Self::DIM {
            return Err(Error::InvalidDensity(format!(
                "expected 4x4 matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut herm_dev = 0.0f64;
        for i in 0..Self::DIM {
            for j in 0..Self::DIM {
                herm_dev = herm_dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if herm_dev > 1e-12 {
            return Err(Error::InvalidDensity(format!("not Hermitian: deviation {herm_dev}")));
        }
        let trace: C64 = (0..Self::DIM).map(|i| m[(i, i)]).sum();
        if (trace - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidDensity(format!("trace = {trace} != 1")));
        }
        let eig = m.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|e| *e < -1e-12) {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {}",
                eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(DensityMatrix { m })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }
}

const IDX_11: usize = 0;
const IDX_13: usize = 1;
const IDX_31: usize = 2;

fn bell_mixture(p_ground: f64, p_sym: f64, p_antisym: f64) -> DMatrix<C64> {
    // p_ground |11><11| + p_sym |psi+><psi+| + p_antisym |psi-><psi-| with
    // |psi+-> = (|13> +- |31>)/sqrt(2)
    let mut m = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
    m[(IDX_11, IDX_11)] = C64::new(p_ground, 0.0);
    let half_sum = (p_sym + p_antisym) / 2.0;
    let half_diff = (p_sym - p_antisym) / 2.0;
    m[(IDX_13, IDX_13)] = C64::new(half_sum, 0.0);
    m[(IDX_31, IDX_31)] = C64::new(half_sum, 0.0);
    m[(IDX_13, IDX_31)] = C64::new(half_diff, 0.0);
    m[(IDX_31, IDX_13)] = C64::new(half_diff, 0.0);
    m
}

/// Trace the field out of an effective-model state: the pump branch and each
/// Stokes branch are mutually orthogonal in the field, so
/// rho = |C_0|^2 |11><11| + (sum_k |C_k|^2) |psi+><psi+|
/// (plus a |psi-> term if dark amplitudes are ever populated).
pub fn reduced_atomic_density(state: &AmplitudeState) -> Result<DensityMatrix> {
    if state.layout().has_intermediate {
        return Err(Error::InvalidArgument(
            "full-model states carry level-2 weight; use reduced_atomic_density_projected".into(),
        ));
    }
    let n2 = state.norm_sqr();
    if !(0.999_999..=1.000_001).contains(&n2) {
        return Err(Error::NotNormalized(format!("norm^2 = {n2} outside [1 - 1e-6, 1 + 1e-6]")));
    }
    let p0 = state.c0().norm_sqr() / n2;
    let p_sym: f64 = state.ck().iter().map(|c| c.norm_sqr()).sum::<f64>() / n2;
    // phi_1 carries level-2 weight and is excluded from the qubit space; it
    // is identically zero for any evolution from psi_0.
    let p_antisym: f64 = match state.dark() {
        [] => 0.0,
        [_phi1, rest @ ..] => rest.iter().map(|c| c.norm_sqr()).sum::<f64>() / n2,
    };
    let total = p0 + p_sym + p_antisym;
    DensityMatrix::from_matrix(bell_mixture(p0 / total, p_sym / total, p_antisym / total))
}

/// Reduced atomic density of a full-model state, projected onto the {1,3}
/// qubit space. Returns the density matrix together with the projected-out
/// level-2 weight |b_1|^2.
pub fn reduced_atomic_density_projected(state: &AmplitudeState) -> Result<(DensityMatrix, f64)> {
    let b1 = state
        .b1()
        .ok_or_else(|| Error::InvalidArgument("state has no intermediate level".into()))?;
    let n2 = state.norm_sqr();
    if !(0.999_999..=1.000_001).contains(&n2) {
        return Err(Error::NotNormalized(format!("norm^2 = {n2} outside [1 - 1e-6, 1 + 1e-6]")));
    }
    let leak = b1.norm_sqr() / n2;
    let p0 = state.c0().norm_sqr() / n2;
    let p_sym: f64 = state.ck().iter().map(|c| c.norm_sqr()).sum::<f64>() / n2;
    let total = p0 + p_sym;
    if total < 1e-12 {
        return Err(Error::NotNormalized("no weight in the {1,3} qubit space".into()));
    }
    let rho = DensityMatrix::from_matrix(bell_mixture(p0 / total, p_sym / total, 0.0))?;
    Ok((rho, leak))
}

/// Atomic state conditioned on "Stokes photon present": drop C_0 (and b_1),
/// renormalize over the photon-emitted branches. Errors when the Stokes
/// weight is below 1e-9.
pub fn conditional_atomic_density(state: &AmplitudeState) -> Result<DensityMatrix> {
    let p_sym: f64 = state.ck().iter().map(|c| c.norm_sqr()).sum();
    let p_antisym: f64 = match state.dark() {
        [] => 0.0,
        [_phi1, rest @ ..] => rest.iter().map(|c| c.norm_sqr()).sum(),
    };
    let total = p_sym + p_antisym;
    if total <= 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Stokes weight {total} too small to condition on"
        )));
    }
    DensityMatrix::from_matrix(bell_mixture(0.0, p_sym / total, p_antisym / total))
}

/// Wootters concurrence C = max(0, l1 - l2 - l3 - l4) with l_i the
/// descending square roots of the eigenvalues of rho rho~, computed via the
/// Hermitian form sqrt(rho) rho~ sqrt(rho).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let m = rho.matrix();
    // spin-flipped state rho~ = (Y x Y) rho* (Y x Y)
    let mut yy = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
    yy[(0, 3)] = C64::new(-1.0, 0.0);
    yy[(3, 0)] = C64::new(-1.0, 0.0);
    yy[(1, 2)] = C64::new(1.0, 0.0);
    yy[(2, 1)] = C64::new(1.0, 0.0);
    let rho_tilde = &yy * m.map(|c| c.conj()) * &yy;

    let eig = m.clone().symmetric_eigen();
    let sqrt_vals: Vec<f64> = eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect();
    let mut sqrt_rho = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
    for a in 0..4 {
        for i in 0..4 {
            for j in 0..4 {
                sqrt_rho[(i, j)] +=
                    eig.eigenvectors[(i, a)] * eig.eigenvectors[(j, a)].conj() * sqrt_vals[a];
            }
        }
    }
    let hermitian_product = &sqrt_rho * rho_tilde * &sqrt_rho;
    let vals = hermitian_product.symmetric_eigen().eigenvalues;
    let mut lambdas: Vec<f64> = vals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numerical("non-finite concurrence eigenvalues".into()));
    }
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}

/// Emitted-photon spectrum: (omega_Sk, |C_k|^2) over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub omegas: Vec<f64>,
    pub weights: Vec<f64>,
    /// sum of weights = P_S of the state (same numbers, two views).
    pub total_weight: f64,
}

/// Snapshot the Stokes mode weights of a state. Meaningful as a spectrum
/// once gamma*t >= 10 or so; the caller decides when.
pub fn stokes_spectrum(state: &AmplitudeState, grid: &ModeGrid) -> Result<SpectrumSeries> {
    if grid.n_modes() != state.layout().n_modes {
        return Err(Error::InvalidArgument(format!(
            "grid has {} modes but state has {}",
            grid.n_modes(),
            state.layout().n_modes
        )));
    }
    let weights: Vec<f64> = state.ck().iter().map(|c| c.norm_sqr()).collect();
    let total_weight = weights.iter().sum();
    Ok(SpectrumSeries { omegas: grid.frequencies().to_vec(), weights, total_weight })
}

/// Result of a log-linear exponential fit P0(t) ~ amplitude * exp(-rate t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub amplitude: f64,
    /// RMS residual of ln P0 against the fitted line.
    pub rms_residual: f64,
}

/// Least-squares line fit on (t, ln P0); rate = -slope.
pub fn fit_exponential(times: &[f64], p0: &[f64]) -> Result<ExponentialFit> {
    if times.len() != p0.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} times vs {} values",
            times.len(),
            p0.len()
        )));
    }
    if times.len() < 10 {
        return Err(Error::InvalidSeries(format!("need >= 10 samples, got {}", times.len())));
    }
    if p0.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::InvalidSeries("all P0 values must be > 0".into()));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = p0.iter().map(|p| p.ln()).collect();
    let mean_t = times.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &l) in times.iter().zip(&logs) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (l - mean_l);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidSeries("degenerate time axis".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_l - slope * mean_t;
    let rms = (times
        .iter()
        .zip(&logs)
        .map(|(&t, &l)| (l - slope * t - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentialFit { rate: -slope, amplitude: intercept.exp(), rms_residual: rms })
}

/// Result of a Lorentzian fit A / ((gamma_f/2)^2 + (omega - center)^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    pub fwhm: f64,
    pub peak: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

const LORENTZ_MAX_ITER: usize = 200;
const LORENTZ_STEP_TOL: f64 = 1e-10;

/// Nonlinear least squares of peak * h^2 / (h^2 + (omega - c)^2) with h the
/// half width. Deterministic moment-based initialization (peak location,
/// half-max crossings), Levenberg-Marquardt damping, iteration cap 200,
/// convergence when the relative parameter step drops below 1e-10.
pub fn fit_lorentzian(series: &SpectrumSeries) -> Result<LorentzianFit> {
    let x = &series.omegas;
    let y = &series.weights;
    if x.len() != y.len() || x.len() < 20 {
        return Err(Error::InvalidSeries(format!("need >= 20 points, got {}", x.len())));
    }
    // moment initialization
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite weights"))
        .expect("non-empty");
    if !(ymax > 0.0) {
        return Err(Error::InvalidSeries("spectrum has no positive weight".into()));
    }
    let mut center = x[imax];
    let half = ymax / 2.0;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev: Option<usize> = None;
        for i in range {
            if let Some(p) = prev {
                if (y[p] >= half) != (y[i] >= half) {
                    let f = (half - y[p]) / (y[i] - y[p]);
                    return Some(x[p] + f * (x[i] - x[p]));
                }
            }
            prev = Some(i);
        }
        None
    };
    let left = crossing(&mut (0..=imax).rev());
    let right = crossing(&mut (imax..x.len()));
    let span = x[x.len() - 1] - x[0];
    let mut hw = match (left, right) {
        (Some(l), Some(r)) => ((r - l) / 2.0).abs(),
        (Some(l), None) => (center - l).abs(),
        (None, Some(r)) => (r - center).abs(),
        (None, None) => span / 4.0,
    };
    if !(hw > 0.0) {
        hw = span / 4.0;
    }
    if span < 5.0 * 2.0 * hw {
        return Err(Error::InvalidSeries(format!(
            "series spans {span} but needs >= 5 estimated widths ({})",
            5.0 * 2.0 * hw
        )));
    }
    let mut peak = ymax;

    let sse = |p: f64, h: f64, c: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let d = xi - c;
                let m = p * h * h / (h * h + d * d);
                (yi - m) * (yi - m)
            })
            .sum()
    };
    let mut damping = 1e-3;
    let mut current_sse = sse(peak, hw, center);
    let mut iterations = 0;
    while iterations < LORENTZ_MAX_ITER {
        iterations += 1;
        // normal equations for parameters (peak, hw, center)
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (&xi, &yi) in x.iter().zip(y) {
            let d = xi - center;
            let denom = hw * hw + d * d;
            let model = peak * hw * hw / denom;
            let r = yi - model;
            let jp = hw * hw / denom;
            let jh = 2.0 * peak * hw * d * d / (denom * denom);
            let jc = 2.0 * peak * hw * hw * d / (denom * denom);
            let j = [jp, jh, jc];
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut a = DMatrix::from_fn(3, 3, |i, j| jtj[i][j]);
        for i in 0..3 {
            a[(i, i)] *= 1.0 + damping;
        }
        let rhs = DVector::from_row_slice(&jtr);
        let step = match a.lu().solve(&rhs) {
            Some(s) => s,
            None => {
                return Err(Error::FitFailed(format!(
                    "singular normal equations at iteration {iterations} (peak={peak}, hw={hw}, center={center})"
                )))
            }
        };
        let trial = (peak + step[0], (hw + step[1]).abs(), center + step[2]);
        let trial_sse = sse(trial.0, trial.1, trial.2);
        if trial_sse <= current_sse {
            let rel_step = (step[0] / peak.abs().max(1e-300))
                .abs()
                .max((step[1] / hw.abs().max(1e-300)).abs())
                .max((step[2] / span).abs());
            peak = trial.0;
            hw = trial.1;
            center = trial.2;
            current_sse = trial_sse;
            damping = (damping / 10.0).max(1e-12);
            if rel_step < LORENTZ_STEP_TOL {
                return Ok(LorentzianFit {
                    center,
                    fwhm: 2.0 * hw,
                    peak,
                    rms_residual: (current_sse / x.len() as f64).sqrt(),
                    iterations,
                });
            }
        } else {
            damping *= 10.0;
            if damping > 1e12 {
                return Err(Error::FitFailed(format!(
                    "damping exploded at iteration {iterations} (sse={current_sse})"
                )));
            }
        }
    }
    Err(Error::FitFailed(format!(
        "no convergence in {LORENTZ_MAX_ITER} iterations (peak={peak}, hw={hw}, center={center}, sse={current_sse})"
    )))
}
