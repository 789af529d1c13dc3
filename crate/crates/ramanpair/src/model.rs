//! Physical parameters, coupling profiles, and the discretized Stokes
//! continuum.
//!
//! The continuum of Stokes modes is replaced by a uniform grid of `n_modes`
//! frequencies centered on the two-photon resonance `omega_res = omega_p -
//! omega_31`, with density of states `p = 1/delta_omega`. Discrete sums over
//! modes then correspond to continuum integrals via `sum_k f(omega_k) <->
//! integral p(omega) f(omega) domega`.

use crate::error::{Error, Result};

/// Conversion from dimensionless frequency units to physical rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyUnit {
    /// rad/s per dimensionless unit; must be positive.
    pub scale: f64,
    pub label: String,
}

impl FrequencyUnit {
    pub fn dimensionless() -> Self {
        FrequencyUnit { scale: 1.0, label: "dimensionless".into() }
    }
}

/// Shape of the effective two-photon coupling lambda(omega).
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingProfile {
    /// lambda(omega) = lambda0 everywhere.
    Flat { lambda0: f64 },
    /// Lorentzian window peaking at `center` with HWHM `width/2`:
    /// lambda(omega) = lambda0 * (w/2)^2 / ((w/2)^2 + (omega-center)^2).
    LorentzianWindow { lambda0: f64, center: f64, width: f64 },
    /// Linear interpolation through tabulated (omega, lambda) pairs,
    /// sorted by omega; evaluation outside the table is an error.
    UserTable { points: Vec<(f64, f64)> },
}

impl CouplingProfile {
    /// Coupling amplitude at the two-photon resonance (used for grid sizing
    /// and the gamma formula).
    pub fn value_at(&self, omega: f64) -> Result<f64> {
        coupling_at(self, omega)
    }

    fn validate(&self) -> Result<()> {
        match self {
            CouplingProfile::Flat { lambda0 } => {
                if *lambda0 < 0.0 || !lambda0.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "flat coupling lambda0 must be finite and >= 0, got {lambda0}"
                    )));
                }
            }
            CouplingProfile::LorentzianWindow { lambda0, width, .. } => {
                if *lambda0 < 0.0 || !lambda0.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "lorentzian-window lambda0 must be finite and >= 0, got {lambda0}"
                    )));
                }
                if *width <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "lorentzian-window width must be > 0, got {width}"
                    )));
                }
            }
            CouplingProfile::UserTable { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "user-table profile needs at least 2 points".into(),
                    ));
                }
                for w in points.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err(Error::InvalidArgument(
                            "user-table frequencies must be strictly increasing".into(),
                        ));
                    }
                }
                if points.iter().any(|&(_, l)| l < 0.0 || !l.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "user-table couplings must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Evaluate a coupling profile at `omega`. Pure and deterministic.
pub fn coupling_at(profile: &CouplingProfile, omega: f64) -> Result<f64> {
    match profile {
        CouplingProfile::Flat { lambda0 } => Ok(*lambda0),
        CouplingProfile::LorentzianWindow { lambda0, center, width } => {
            let hw2 = (width / 2.0) * (width / 2.0);
            let d = omega - center;
            Ok(lambda0 * hw2 / (hw2 + d * d))
        }
        CouplingProfile::UserTable { points } => {
            let (lo, hi) = (points[0].0, points[points.len() - 1].0);
            if omega < lo || omega > hi {
                return Err(Error::OutOfSupport(format!(
                    "omega = {omega} outside user-table range [{lo}, {hi}]"
                )));
            }
            let idx = points.partition_point(|&(w, _)| w <= omega);
            if idx == points.len() {
                return Ok(points[points.len() - 1].1);
            }
            let (w0, l0) = points[idx - 1];
            let (w1, l1) = points[idx];
            Ok(l0 + (l1 - l0) * (omega - w0) / (w1 - w0))
        }
    }
}

/// Physical constants of the model (dimensionless units, hbar = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Pump/cavity mode frequency omega_P.
    pub omega_p: f64,
    /// Level splitting omega_31 = E3 - E1.
    pub omega_31: f64,
    /// Number of identical atoms (>= 2).
    pub n_atoms: usize,
    pub coupling_profile: CouplingProfile,
    pub frequency_unit: FrequencyUnit,
}

impl SystemParams {
    pub fn new(
        omega_p: f64,
        omega_31: f64,
        n_atoms: usize,
        coupling_profile: CouplingProfile,
        frequency_unit: FrequencyUnit,
    ) -> Result<Self> {
        if !(omega_p > 0.0) {
            return Err(Error::InvalidArgument(format!("omega_p must be > 0, got {omega_p}")));
        }
        if !(omega_31 >= 0.0) {
            return Err(Error::InvalidArgument(format!("omega_31 must be >= 0, got {omega_31}")));
        }
        if n_atoms < 2 {
            return Err(Error::InvalidArgument(format!("n_atoms must be >= 2, got {n_atoms}")));
        }
        if !(omega_p - omega_31 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "two-photon resonance omega_p - omega_31 = {} must be > 0",
                omega_p - omega_31
            )));
        }
        if !(frequency_unit.scale > 0.0) {
            return Err(Error::InvalidArgument("frequency unit scale must be > 0".into()));
        }
        coupling_profile.validate()?;
        Ok(SystemParams { omega_p, omega_31, n_atoms, coupling_profile, frequency_unit })
    }

    /// Two-photon resonance frequency omega_res = omega_P - omega_31.
    pub fn omega_res(&self) -> f64 {
        self.omega_p - self.omega_31
    }
}

/// Uniform discretization of the Stokes continuum.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    frequencies: Vec<f64>,
    couplings: Vec<f64>,
    spacing: f64,
    density: f64,
}

impl ModeGrid {
    /// Low-level constructor. `frequencies` must be strictly increasing with
    /// constant spacing (1e-12 relative); single-mode grids are allowed with
    /// a nominal positive `spacing`.
    pub fn from_parts(frequencies: Vec<f64>, couplings: Vec<f64>, spacing: f64) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidArgument("mode grid must have at least one mode".into()));
        }
        if couplings.len() != frequencies.len() {
            return Err(Error::InvalidArgument(format!(
                "couplings length {} != frequencies length {}",
                couplings.len(),
                frequencies.len()
            )));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidArgument(format!("grid spacing must be > 0, got {spacing}")));
        }
        let scale = frequencies.iter().fold(spacing, |m, &w| m.max(w.abs()));
        for w in frequencies.windows(2) {
            let d = w[1] - w[0];
            if d <= 0.0 {
                return Err(Error::InvalidArgument(
                    "grid frequencies must be strictly increasing".into(),
                ));
            }
            if (d - spacing).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "grid spacing not uniform: step {d} vs declared {spacing}"
                )));
            }
        }
        if couplings.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::InvalidArgument("grid couplings must be finite and >= 0".into()));
        }
        let density = 1.0 / spacing;
        Ok(ModeGrid { frequencies, couplings, spacing, density })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Grid spacing delta_omega.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Density of states p = 1/delta_omega.
    pub fn density(&self) -> f64 {
        self.density
    }

    /// Time 2*pi/delta_omega after which the discretized continuum spuriously
    /// refeeds the system; simulations must end well before it.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spacing
    }

    /// Frequency span (n_modes - 1) * delta_omega.
    pub fn bandwidth(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1] - self.frequencies[0]
    }

    pub fn min_frequency(&self) -> f64 {
        self.frequencies[0]
    }

    pub fn max_frequency(&self) -> f64 {
        self.frequencies[self.frequencies.len() - 1]
    }

    pub fn contains(&self, omega: f64) -> bool {
        omega >= self.min_frequency() && omega <= self.max_frequency()
    }
}

/// Build a uniform grid of `n_modes` Stokes frequencies spanning `bandwidth`
/// around the two-photon resonance, with per-mode couplings taken from the
/// profile.
pub fn build_mode_grid(params: &SystemParams, bandwidth: f64, n_modes: usize) -> Result<ModeGrid> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {bandwidth}")));
    }
    if n_modes < 3 {
        return Err(Error::InvalidArgument(format!("n_modes must be >= 3, got {n_modes}")));
    }
    let omega_res = params.omega_res();
    if omega_res - bandwidth / 2.0 <= 0.0 {
        return Err(Error::UnphysicalGrid(format!(
            "grid lower edge {} is not positive (omega_res = {omega_res}, bandwidth = {bandwidth})",
            omega_res - bandwidth / 2.0
        )));
    }
    let spacing = bandwidth / (n_modes - 1) as f64;
    let half = spacing / 2.0;
    // Offsets are exact integer multiples of spacing/2, antisymmetric about
    // omega_res, so mode pairs cancel exactly in principal-value sums.
    let frequencies: Vec<f64> = (0..n_modes)
        .map(|i| omega_res + (2 * i as i64 - (n_modes as i64 - 1)) as f64 * half)
        .collect();
    let couplings = frequencies
        .iter()
        .map(|&w| coupling_at(&params.coupling_profile, w))
        .collect::<Result<Vec<_>>>()?;
    ModeGrid::from_parts(frequencies, couplings, spacing)
}

/// Result of checking a grid against the continuum-limit requirements.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDiagnostics {
    pub recurrence_time: f64,
    pub bandwidth: f64,
    pub gamma_estimate: f64,
    pub t_max: f64,
    pub bandwidth_in_gamma: f64,
    /// 2*pi/delta_omega > 2*t_max.
    pub recurrence_ok: bool,
    /// bandwidth >= 20 * gamma_estimate.
    pub bandwidth_ok: bool,
    pub pass: bool,
}

/// Check that a simulation of duration `t_max` on this grid stays in the
/// regime where the Markovian (exponential) result applies: the recurrence
/// time must exceed 2*t_max and the bandwidth must cover at least 20 gamma.
/// Always returns diagnostics, never errors.
pub fn validate_grid(grid: &ModeGrid, t_max: f64, gamma_estimate: f64) -> GridDiagnostics {
    let recurrence_time = grid.recurrence_time();
    let bandwidth = grid.bandwidth();
    let recurrence_ok = recurrence_time > 2.0 * t_max;
    let bandwidth_ok = bandwidth >= 20.0 * gamma_estimate;
    GridDiagnostics {
        recurrence_time,
        bandwidth,
        gamma_estimate,
        t_max,
        bandwidth_in_gamma: if gamma_estimate > 0.0 { bandwidth / gamma_estimate } else { f64::INFINITY },
        recurrence_ok,
        bandwidth_ok,
        pass: recurrence_ok && bandwidth_ok,
    }
}

/// Preset parameter sets.
pub mod presets {
    use super::*;

    /// Metadata carried by a preset that has no effect on the dynamics.
    #[derive(Debug, Clone, PartialEq)]
    pub struct PresetMetadata {
        pub name: String,
        pub stokes_wavelength_nm: Option<f64>,
        pub note: String,
    }

    /// Rb-85 numbers: the ground and intermediate states are 5S_1/2 hyperfine
    /// levels split by 3 GHz; the Stokes field sits at 780 nm. Frequencies in
    /// units of 2*pi GHz.
    pub fn rb85() -> (SystemParams, PresetMetadata) {
        let scale = 2.0 * std::f64::consts::PI * 1e9;
        let omega_res = 299_792_458.0 / 780e-9 / 1e9; // c/780nm in GHz
        let omega_31 = 3.0;
        let params = SystemParams::new(
            omega_res + omega_31,
            omega_31,
            2,
            CouplingProfile::Flat { lambda0: 1e-3 },
            FrequencyUnit { scale, label: "2*pi GHz".into() },
        )
        .expect("rb85 preset parameters are valid");
        let meta = PresetMetadata {
            name: "rb85".into(),
            stokes_wavelength_nm: Some(780.0),
            note: "level-3 lifetime at least ten times longer than level 2".into(),
        };
        (params, meta)
    }
}
