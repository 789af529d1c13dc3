//! Closed-form Wigner-Weisskopf solution: decay rate gamma, pole shift
//! Delta, steady-state mode amplitudes J_k, and the full time-dependent
//! amplitudes. Serves as an independent oracle for the numerical
//! propagators.

use nalgebra::DVector;

use crate::dynamics::{AmplitudeState, BasisLayout, Frame, C64};
use crate::error::{Error, Result};
use crate::model::{build_mode_grid, coupling_at, ModeGrid, SystemParams};

/// Parameters of the exponential solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WWParams {
    /// Exponential rate gamma (of |C_0|^2).
    pub gamma: f64,
    /// Pole shift Delta.
    pub delta: f64,
    pub omega_p: f64,
    pub omega_31: f64,
    pub n_atoms: usize,
}

impl WWParams {
    /// Evaluate gamma and Delta for a concrete parameter set and grid.
    pub fn from_model(params: &SystemParams, grid: &ModeGrid) -> Result<Self> {
        Ok(WWParams {
            gamma: decay_rate(params, grid)?,
            delta: frequency_shift(params, grid)?.value,
            omega_p: params.omega_p,
            omega_31: params.omega_31,
            n_atoms: params.n_atoms,
        })
    }
}

/// gamma = 2*pi * p * (sqrt(n_atoms) * lambda(omega_res))^2, with p the grid
/// density of states. The collective sqrt(N) factor is folded into the
/// coupling so that this rate matches the equations of motion as integrated.
pub fn decay_rate(params: &SystemParams, grid: &ModeGrid) -> Result<f64> {
    let omega_res = params.omega_res();
    if !grid.contains(omega_res) {
        return Err(Error::OutOfSupport(format!(
            "omega_res = {omega_res} outside grid [{}, {}]",
            grid.min_frequency(),
            grid.max_frequency()
        )));
    }
    let lambda = coupling_at(&params.coupling_profile, omega_res)?;
    let collective = params.n_atoms as f64 * lambda * lambda;
    Ok(2.0 * std::f64::consts::PI * grid.density() * collective)
}

/// Principal-value pole shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyShift {
    pub value: f64,
    /// True when the grid was symmetric about omega_res and the singular
    /// point cancelled exactly by pairing; false means the naive lower-
    /// accuracy sum was used.
    pub paired: bool,
}

/// Delta = -PV integral p(omega) lambda^2(omega) / (omega + omega_31 -
/// omega_P) domega, evaluated on the grid. On grids symmetric about
/// omega_res the sum is taken over mode pairs equidistant from the
/// resonance, which cancels the singular point exactly (an on-node term has
/// zero principal-value weight and is dropped).
pub fn frequency_shift(params: &SystemParams, grid: &ModeGrid) -> Result<FrequencyShift> {
    let omega_res = params.omega_res();
    let n = grid.n_modes();
    let freqs = grid.frequencies();
    let lam = grid.couplings();
    let collective = params.n_atoms as f64;
    // delta_omega * p = 1, so the discrete integral is a plain sum of
    // lambda_k^2 / (omega_k - omega_res).
    let tol = grid.spacing() * 1e-9;
    let symmetric = (freqs[0] + freqs[n - 1] - 2.0 * omega_res).abs() <= tol;
    if symmetric {
        let mut sum = 0.0;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let xi = freqs[i] - omega_res;
            let xj = freqs[j] - omega_res;
            sum += collective * lam[i] * lam[i] / xi + collective * lam[j] * lam[j] / xj;
        }
        // middle node (odd n) sits on the singularity: PV weight zero.
        Ok(FrequencyShift { value: -sum, paired: true })
    } else {
        let mut sum = 0.0;
        for k in 0..n {
            let x = freqs[k] - omega_res;
            if x.abs() < grid.spacing() / 2.0 {
                continue;
            }
            sum += collective * lam[k] * lam[k] / x;
        }
        Ok(FrequencyShift { value: -sum, paired: false })
    }
}

/// Long-time amplitude of mode k:
/// J_k = -i lambda_k sqrt(N) / (gamma/2 - i (omega_k + omega_31 - omega_P - Delta)).
pub fn steady_amplitude(omega_k: f64, ww: &WWParams, lambda_k: f64) -> Result<C64> {
    if !(ww.gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "steady amplitude requires gamma > 0 (undamped pole), got {}",
            ww.gamma
        )));
    }
    let detuning = omega_k + ww.omega_31 - ww.omega_p - ww.delta;
    let numerator = C64::new(0.0, -lambda_k * (ww.n_atoms as f64).sqrt());
    Ok(numerator / C64::new(ww.gamma / 2.0, -detuning))
}

/// Analytic amplitudes at time t:
/// C_0(t) = exp(-gamma t / 2) exp(-i (omega_P - Delta) t),
/// C_k(t) = J_k-prefactor * (exp(-i (omega_k + omega_31) t) - C_0(t)).
/// Returns exactly (1, 0, ...) at t = 0.
pub fn closed_form_state(
    t: f64,
    params: &SystemParams,
    grid: &ModeGrid,
    ww: &WWParams,
) -> Result<AmplitudeState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t must be >= 0, got {t}")));
    }
    let layout = BasisLayout::effective(grid.n_modes());
    let sqrt_n = (params.n_atoms as f64).sqrt();
    let c0 = (-ww.gamma * t / 2.0).exp() * C64::new(0.0, -(ww.omega_p - ww.delta) * t).exp();
    let mut amps = DVector::from_element(layout.dim(), C64::new(0.0, 0.0));
    amps[layout.idx_psi0()] = c0;
    for (k, (&w, &l)) in grid.frequencies().iter().zip(grid.couplings()).enumerate() {
        if l == 0.0 {
            // decoupled mode; skip rather than risk 0/0 at gamma = 0
            continue;
        }
        let detuning = w + params.omega_31 - ww.omega_p - ww.delta;
        let prefactor = C64::new(0.0, -l * sqrt_n) / C64::new(ww.gamma / 2.0, -detuning);
        let mode_phase = C64::new(0.0, -(w + params.omega_31) * t).exp();
        amps[layout.idx_mode(k)] = prefactor * (mode_phase - c0);
    }
    AmplitudeState::new(t, Frame::Lab, layout, amps)
}

/// Build a grid sized in units of its own decay rate: bandwidth =
/// `bandwidth_in_gamma * gamma` and spacing chosen so the self-consistent
/// gamma = lambda(omega_res) * sqrt(2 pi N (n_modes - 1) / bandwidth_in_gamma)
/// comes out of the gamma formula on the same grid.
pub fn scaled_grid(
    params: &SystemParams,
    bandwidth_in_gamma: f64,
    n_modes: usize,
) -> Result<(ModeGrid, WWParams)> {
    if !(bandwidth_in_gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth_in_gamma must be > 0, got {bandwidth_in_gamma}"
        )));
    }
    if n_modes < 3 {
        return Err(Error::InvalidArgument(format!("n_modes must be >= 3, got {n_modes}")));
    }
    let lambda_res = coupling_at(&params.coupling_profile, params.omega_res())?;
    if !(lambda_res > 0.0) {
        return Err(Error::InvalidArgument(
            "cannot size a grid in gamma units with zero coupling at resonance".into(),
        ));
    }
    let n = params.n_atoms as f64;
    let gamma = lambda_res
        * (2.0 * std::f64::consts::PI * n * (n_modes - 1) as f64 / bandwidth_in_gamma).sqrt();
    let grid = build_mode_grid(params, bandwidth_in_gamma * gamma, n_modes)?;
    let ww = WWParams::from_model(params, &grid)?;
    Ok((grid, ww))
}
