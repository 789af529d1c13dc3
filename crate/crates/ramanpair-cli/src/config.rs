//! Scenario configuration: TOML schema, presets, and resolution into core
//! model types. Unknown keys are hard errors — a config that parses is a
//! config that means what it says.

use serde::{Deserialize, Serialize};

use ramanpair::model::{
    build_mode_grid, presets, CouplingProfile, FrequencyUnit, ModeGrid, SystemParams,
};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Start from a named preset; sections given below replace the preset's.
    pub preset: Option<String>,
    pub model: Option<ModelKind>,
    pub system: Option<SystemSection>,
    pub coupling: Option<CouplingSection>,
    pub full: Option<FullSection>,
    pub grid: Option<GridSection>,
    pub time: Option<TimeSection>,
    pub output: Option<OutputSection>,
    pub sweep: Option<SweepSection>,
    pub adiabatic: Option<AdiabaticSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Effective,
    Full,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub omega_p: f64,
    pub omega_31: f64,
    pub n_atoms: usize,
    pub unit_scale: Option<f64>,
    pub unit_label: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub kind: CouplingKind,
    pub lambda0: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    pub points: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    Flat,
    Lorentzian,
    Table,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullSection {
    pub g_p: f64,
    /// Flat Stokes coupling g_S.
    pub g_s: f64,
    pub detuning2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_modes: usize,
    /// Total window width in units of gamma (exclusive with `bandwidth`).
    pub bandwidth_in_gamma: Option<f64>,
    /// Total window width in frequency units.
    pub bandwidth: Option<f64>,
    /// 1- or 2-mode grids skip the continuum diagnostics; allows toy cases.
    #[serde(default)]
    pub single_mode: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_max_in_gamma: Option<f64>,
    pub t_max: Option<f64>,
    pub samples: Option<usize>,
    pub dt_in_gamma: Option<f64>,
    pub dt: Option<f64>,
    /// Integrator for `simulate`/`sweep`: "expm" (default) or "rk4".
    pub method: Option<Method>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Expm,
    Rk4,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticSection {
    /// Coupling ratios g/delta_2 of the ladder, largest first.
    pub ratios: Vec<f64>,
    /// delta_2 = stark_margin * gamma / ratio^2 unless given explicitly.
    pub stark_margin_in_gamma: Option<f64>,
    pub delta2_values: Option<Vec<f64>>,
    pub g_p_values: Option<Vec<f64>>,
}

/// Everything a command needs, validated and with preset defaults applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: ModelKind,
    pub params: SystemParams,
    pub full: Option<FullSection>,
    pub grid: GridSection,
    pub time: TimeSection,
    pub output_dir: Option<String>,
    pub sweep: Option<SweepSection>,
    pub adiabatic: Option<AdiabaticSection>,
    pub preset_note: Option<String>,
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{e}")))
}

fn preset_config(name: &str) -> Result<ScenarioConfig, CliError> {
    let toml_text = match name {
        "default-effective" => {
            r#"
            model = "effective"
            [system]
            omega_p = 10.0
            omega_31 = 3.0
            n_atoms = 2
            [coupling]
            kind = "flat"
            lambda0 = 0.01
            [grid]
            n_modes = 1601
            bandwidth_in_gamma = 40.0
            [time]
            t_max_in_gamma = 3.0
            samples = 121
            "#
        }
        "rb85" => {
            // numbers injected below; the skeleton carries the rest
            r#"
            model = "effective"
            [coupling]
            kind = "flat"
            lambda0 = 1e-3
            [grid]
            n_modes = 801
            bandwidth_in_gamma = 40.0
            [time]
            t_max_in_gamma = 3.0
            samples = 121
            "#
        }
        "toy2x2" => {
            // single resonant mode: pure Rabi flopping between |11>|1_P>
            // and |psi+>|1_k>, concurrence swinging 0 -> 1 -> 0
            r#"
            model = "effective"
            [system]
            omega_p = 1.0
            omega_31 = 0.5
            n_atoms = 2
            [coupling]
            kind = "flat"
            lambda0 = 0.05
            [grid]
            n_modes = 1
            single_mode = true
            [time]
            t_max = 100.0
            samples = 201
            "#
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (available: default-effective, rb85, toy2x2)"
            )))
        }
    };
    parse(toml_text)
}

pub fn resolve(cfg: &ScenarioConfig) -> Result<Resolved, CliError> {
    let mut merged = cfg.clone();
    let mut preset_note = None;
    if let Some(name) = &cfg.preset {
        let base = preset_config(name)?;
        preset_note = Some(name.clone());
        merged.model = cfg.model.or(base.model);
        merged.system = cfg.system.clone().or(base.system);
        merged.coupling = cfg.coupling.clone().or(base.coupling);
        merged.full = cfg.full.clone().or(base.full);
        merged.grid = cfg.grid.clone().or(base.grid);
        merged.time = cfg.time.clone().or(base.time);
    }

    let model = merged.model.unwrap_or(ModelKind::Effective);
    let coupling = merged
        .coupling
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [coupling] section".into()))?;
    let profile = build_profile(coupling)?;

    let params = if merged.preset.as_deref() == Some("rb85") && merged.system.is_none() {
        let (base_params, meta) = presets::rb85();
        preset_note = Some(format!("{} ({})", meta.name, meta.note));
        SystemParams::new(
            base_params.omega_p,
            base_params.omega_31,
            base_params.n_atoms,
            profile,
            base_params.frequency_unit,
        )
        .map_err(|e| CliError::Config(e.to_string()))?
    } else {
        let system = merged
            .system
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [system] section".into()))?;
        let unit = match (&system.unit_scale, &system.unit_label) {
            (None, None) => FrequencyUnit::dimensionless(),
            (Some(s), label) => FrequencyUnit {
                scale: *s,
                label: label.clone().unwrap_or_else(|| "custom".into()),
            },
            (None, Some(_)) => {
                return Err(CliError::Config("unit_label given without unit_scale".into()))
            }
        };
        SystemParams::new(system.omega_p, system.omega_31, system.n_atoms, profile, unit)
            .map_err(|e| CliError::Config(e.to_string()))?
    };

    let grid = merged
        .grid
        .clone()
        .ok_or_else(|| CliError::Config("missing [grid] section".into()))?;
    match (grid.bandwidth_in_gamma, grid.bandwidth, grid.single_mode) {
        (Some(_), Some(_), _) => {
            return Err(CliError::Config(
                "give either bandwidth_in_gamma or bandwidth, not both".into(),
            ))
        }
        (None, None, false) => {
            return Err(CliError::Config(
                "missing grid bandwidth (bandwidth_in_gamma or bandwidth)".into(),
            ))
        }
        (_, _, true) if grid.n_modes > 2 => {
            return Err(CliError::Config("single_mode grids allow at most 2 modes".into()))
        }
        _ => {}
    }

    let time = merged
        .time
        .clone()
        .ok_or_else(|| CliError::Config("missing [time] section".into()))?;
    if time.t_max_in_gamma.is_none() && time.t_max.is_none() {
        return Err(CliError::Config("missing time horizon (t_max_in_gamma or t_max)".into()));
    }
    if time.t_max_in_gamma.is_some() && time.t_max.is_some() {
        return Err(CliError::Config("give either t_max_in_gamma or t_max, not both".into()));
    }
    if time.dt_in_gamma.is_some() && time.dt.is_some() {
        return Err(CliError::Config("give either dt_in_gamma or dt, not both".into()));
    }
    if time.samples.map(|s| s < 2).unwrap_or(false) {
        return Err(CliError::Config("time.samples must be at least 2".into()));
    }

    if matches!(model, ModelKind::Full | ModelKind::Both) && merged.full.is_none() {
        return Err(CliError::Config("model = full/both requires the [full] section".into()));
    }
    if let Some(sweep) = &merged.sweep {
        const AXES: [&str; 5] = ["lambda0", "n_atoms", "bandwidth", "n_modes", "detuning2"];
        if !AXES.contains(&sweep.axis.as_str()) {
            return Err(CliError::Config(format!(
                "unknown sweep axis '{}' (one of {AXES:?})",
                sweep.axis
            )));
        }
        if sweep.values.is_empty() || sweep.values.len() > 10_000 {
            return Err(CliError::Config(format!(
                "sweep needs 1..=10000 values, got {}",
                sweep.values.len()
            )));
        }
        if sweep.axis == "detuning2" && merged.full.is_none() {
            return Err(CliError::Config("detuning2 sweep requires the [full] section".into()));
        }
    }
    if let Some(ad) = &merged.adiabatic {
        if ad.ratios.is_empty() {
            return Err(CliError::Config("adiabatic.ratios must not be empty".into()));
        }
        if ad.ratios.iter().any(|&r| !(r > 0.0)) {
            return Err(CliError::Config("adiabatic.ratios must all be > 0".into()));
        }
        for values in [&ad.delta2_values, &ad.g_p_values].into_iter().flatten() {
            if values.len() != ad.ratios.len() {
                return Err(CliError::Config(
                    "adiabatic value lists must match ratios in length".into(),
                ));
            }
        }
        if let Some(d2) = &ad.delta2_values {
            if d2.iter().any(|&d| d == 0.0) {
                return Err(CliError::Config("adiabatic delta2 of 0 is resonant".into()));
            }
        }
    }

    Ok(Resolved {
        model,
        params,
        full: merged.full.clone(),
        grid,
        time,
        output_dir: merged.output.as_ref().and_then(|o| o.dir.clone()),
        sweep: merged.sweep.clone(),
        adiabatic: merged.adiabatic.clone(),
        preset_note,
    })
}

fn build_profile(c: &CouplingSection) -> Result<CouplingProfile, CliError> {
    let profile = match c.kind {
        CouplingKind::Flat => CouplingProfile::Flat {
            lambda0: c
                .lambda0
                .ok_or_else(|| CliError::Config("flat coupling needs lambda0".into()))?,
        },
        CouplingKind::Lorentzian => CouplingProfile::LorentzianWindow {
            lambda0: c
                .lambda0
                .ok_or_else(|| CliError::Config("lorentzian coupling needs lambda0".into()))?,
            center: c
                .center
                .ok_or_else(|| CliError::Config("lorentzian coupling needs center".into()))?,
            width: c
                .width
                .ok_or_else(|| CliError::Config("lorentzian coupling needs width".into()))?,
        },
        CouplingKind::Table => CouplingProfile::UserTable {
            points: c
                .points
                .clone()
                .ok_or_else(|| CliError::Config("table coupling needs points".into()))?,
        },
    };
    Ok(profile)
}

impl Resolved {
    /// Build the mode grid plus the decay rate it implies. Grids sized in
    /// gamma units solve the self-consistency in `scaled_grid`; absolute
    /// grids just evaluate the rate formula afterwards.
    pub fn build_grid(&self) -> Result<(ModeGrid, f64), CliError> {
        if self.grid.single_mode {
            let omega_res = self.params.omega_res();
            let lambda = self
                .params
                .coupling_profile
                .value_at(omega_res)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let frequencies: Vec<f64> = (0..self.grid.n_modes)
                .map(|k| omega_res + k as f64)
                .collect();
            let couplings = vec![lambda; self.grid.n_modes];
            let grid = ModeGrid::from_parts(frequencies, couplings, 1.0)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let gamma = ramanpair::analytic::decay_rate(&self.params, &grid)
                .map_err(|e| CliError::Config(e.to_string()))?;
            return Ok((grid, gamma));
        }
        if let Some(bw_gamma) = self.grid.bandwidth_in_gamma {
            let (grid, ww) =
                ramanpair::analytic::scaled_grid(&self.params, bw_gamma, self.grid.n_modes)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            return Ok((grid, ww.gamma));
        }
        let bw = self.grid.bandwidth.expect("validated in resolve");
        let grid = build_mode_grid(&self.params, bw, self.grid.n_modes)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let gamma = ramanpair::analytic::decay_rate(&self.params, &grid)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok((grid, gamma))
    }

    /// Time horizon in absolute units; gamma-relative settings need a
    /// positive rate.
    pub fn t_max(&self, gamma: f64) -> Result<f64, CliError> {
        match (self.time.t_max, self.time.t_max_in_gamma) {
            (Some(t), _) => Ok(t),
            (None, Some(g)) if gamma > 0.0 => Ok(g / gamma),
            _ => Err(CliError::Config(
                "t_max_in_gamma needs a nonzero decay rate; give t_max instead".into(),
            )),
        }
    }

    pub fn dt(&self, gamma: f64) -> Result<f64, CliError> {
        match (self.time.dt, self.time.dt_in_gamma) {
            (Some(t), _) => Ok(t),
            (None, Some(g)) if gamma > 0.0 => Ok(g / gamma),
            (None, None) if gamma > 0.0 => Ok(1e-3 / gamma),
            _ => Err(CliError::Config(
                "dt_in_gamma needs a nonzero decay rate; give dt instead".into(),
            )),
        }
    }

    pub fn samples(&self) -> usize {
        self.time.samples.unwrap_or(121)
    }

    pub fn method(&self) -> Method {
        self.time.method.unwrap_or(Method::Expm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sections_are_replaced_wholesale() {
        let cfg = parse(
            "preset = \"default-effective\"\n[grid]\nn_modes = 201\nbandwidth_in_gamma = 30.0\n",
        )
        .unwrap();
        let resolved = resolve(&cfg).unwrap();
        // explicit [grid] wins over the preset's, field by field is not a thing
        assert_eq!(resolved.grid.n_modes, 201);
        assert_eq!(resolved.grid.bandwidth_in_gamma, Some(30.0));
        // untouched sections still come from the preset
        assert_eq!(resolved.params.n_atoms, 2);
        assert_eq!(resolved.samples(), 121);
    }

    #[test]
    fn bandwidth_settings_are_exclusive() {
        let cfg = parse(
            "preset = \"default-effective\"\n[grid]\nn_modes = 201\nbandwidth_in_gamma = 30.0\nbandwidth = 5.0\n",
        )
        .unwrap();
        let err = resolve(&cfg).unwrap_err();
        assert!(format!("{err:?}").contains("not both"));
    }

    #[test]
    fn rb85_preset_supplies_physical_numbers() {
        let cfg = parse("preset = \"rb85\"\n").unwrap();
        let resolved = resolve(&cfg).unwrap();
        assert!(resolved.preset_note.as_deref().unwrap().contains("rb85"));
        assert_eq!(resolved.params.frequency_unit.label, "2*pi GHz");
        // omega_res = c / 780 nm in GHz sits far above the Raman shift
        assert!(resolved.params.omega_res() > 3e5);
    }

    #[test]
    fn adiabatic_overrides_must_match_ratio_count() {
        let text = "\n[adiabatic]\nratios = [0.1, 0.03]\ndelta2_values = [100.0]\n";
        let cfg = parse(&format!("preset = \"default-effective\"\n{text}")).unwrap();
        let err = resolve(&cfg).unwrap_err();
        assert!(format!("{err:?}").contains("match ratios"));
    }
}
