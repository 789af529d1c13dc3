use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use ramanpair::analytic::{closed_form_state, frequency_shift, WWParams};
use ramanpair::dynamics::{
    assemble_hamiltonian, propagate_expm, propagate_rk4, AmplitudeState, Hamiltonian, Trajectory,
};
use ramanpair::full::{
    adiabaticity_report, assemble_full_hamiltonian, stark_shifted_effective, FullParams,
};
use ramanpair::model::{validate_grid, CouplingProfile, GridDiagnostics, ModeGrid, SystemParams};
use ramanpair::observables::{
    concurrence, fit_exponential, reduced_atomic_density, reduced_atomic_density_projected,
    stokes_spectrum,
};

use crate::config::{self, ModelKind, Resolved};
use crate::output::{self, num, CsvWriter};
use crate::{CliError, RunArgs};

pub fn run(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", args.config.display())))?;
    if text.trim().is_empty() {
        return Err(CliError::Config(format!(
            "{}:1: empty config; expected [system], [coupling], [grid], and [time] sections",
            args.config.display()
        )));
    }
    let cfg = config::parse(&text)?;
    let resolved = config::resolve(&cfg)?;
    let dir = output::output_dir(&args.out, &resolved.output_dir);
    fs::create_dir_all(&dir)?;
    let digest = output::config_digest(&text);

    let started = Instant::now();
    let point_runtimes = match name {
        "simulate" => cmd_simulate(&resolved, &dir, &digest, args).map(|_| None)?,
        "compare" => cmd_compare(&resolved, &dir, &digest, args).map(|_| None)?,
        "validate-adiabatic" => cmd_validate_adiabatic(&resolved, &dir, args).map(|_| None)?,
        "sweep" => Some(cmd_sweep(&resolved, &dir, &digest, args)?),
        other => return Err(CliError::Config(format!("unknown command {other}"))),
    };
    output::write_metadata(
        &dir,
        name,
        started.elapsed().as_secs_f64(),
        &digest,
        args.seed_meta.then_some(text.as_str()),
        point_runtimes,
    )
}

/// Grid gate shared by all commands: continuum grids must pass the
/// recurrence/bandwidth diagnostics unless --force; toy single-mode grids
/// have no continuum to diagnose.
fn gate_grid(
    resolved: &Resolved,
    grid: &ModeGrid,
    gamma: f64,
    t_max: f64,
    force: bool,
) -> Result<Option<GridDiagnostics>, CliError> {
    if resolved.grid.single_mode {
        return Ok(None);
    }
    let diag = validate_grid(grid, t_max, gamma);
    if !diag.pass && !force {
        return Err(CliError::GridValidation(format!(
            "recurrence time {} vs horizon {t_max} (need > 2x), bandwidth {} = {} gamma (need >= 20); rerun with --force to override",
            diag.recurrence_time, diag.bandwidth, diag.bandwidth_in_gamma
        )));
    }
    Ok(Some(diag))
}

fn full_params(resolved: &Resolved) -> Result<FullParams, CliError> {
    let section = resolved
        .full
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [full] section".into()))?;
    Ok(FullParams {
        g_p: section.g_p,
        g_s_profile: CouplingProfile::Flat { lambda0: section.g_s },
        detuning2: section.detuning2,
        omega_p: resolved.params.omega_p,
        omega_31: resolved.params.omega_31,
        n_atoms: resolved.params.n_atoms,
    })
}

fn linspace(t_max: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|j| t_max * j as f64 / (samples - 1) as f64).collect()
}

fn propagate(
    resolved: &Resolved,
    h: &Hamiltonian,
    gamma: f64,
    t_max: f64,
) -> Result<Trajectory, CliError> {
    let initial = AmplitudeState::initial(h.layout());
    match resolved.method() {
        config::Method::Expm => {
            Ok(propagate_expm(h, &initial, &linspace(t_max, resolved.samples()))?)
        }
        config::Method::Rk4 => {
            let dt = resolved.dt(gamma)?;
            let stride = ((t_max / dt) / (resolved.samples() - 1) as f64).round().max(1.0);
            Ok(propagate_rk4(h, &initial, dt, t_max, stride as usize)?)
        }
    }
}

fn sample_concurrence(s: &AmplitudeState) -> Result<f64, CliError> {
    let rho = if s.layout().has_intermediate {
        reduced_atomic_density_projected(s)?.0
    } else {
        reduced_atomic_density(s)?
    };
    Ok(concurrence(&rho)?)
}

fn fit_decay_rate(traj: &Trajectory, gamma: f64) -> Option<f64> {
    if gamma <= 0.0 {
        return None;
    }
    let (times, p0): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.time >= 0.5 / gamma)
        .map(|s| (s.time, s.c0().norm_sqr()))
        .unzip();
    fit_exponential(&times, &p0).ok().map(|f| f.rate)
}

fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut csv = CsvWriter::new(&[
        "t",
        "re_c0",
        "im_c0",
        "p0",
        "p_stokes",
        "concurrence",
        "norm_sqr",
    ]);
    for s in &traj.samples {
        let c0 = s.c0();
        let p_stokes: f64 = s.ck().iter().map(|c| c.norm_sqr()).sum();
        csv.row(&[
            num(s.time),
            num(c0.re),
            num(c0.im),
            num(c0.norm_sqr()),
            num(p_stokes),
            num(sample_concurrence(s)?),
            num(s.norm_sqr()),
        ]);
    }
    csv.write(path)
}

#[derive(Serialize)]
struct GridSummary {
    n_modes: usize,
    spacing: f64,
    bandwidth: f64,
    recurrence_time: f64,
    bandwidth_in_gamma: f64,
    recurrence_ok: bool,
    bandwidth_ok: bool,
    pass: bool,
}

impl GridSummary {
    fn from_diag(grid: &ModeGrid, d: &GridDiagnostics) -> Self {
        GridSummary {
            n_modes: grid.n_modes(),
            spacing: grid.spacing(),
            bandwidth: d.bandwidth,
            recurrence_time: d.recurrence_time,
            bandwidth_in_gamma: d.bandwidth_in_gamma,
            recurrence_ok: d.recurrence_ok,
            bandwidth_ok: d.bandwidth_ok,
            pass: d.pass,
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    command: String,
    config_digest: String,
    model: ModelKind,
    preset: Option<String>,
    frequency_unit: String,
    gamma_formula: f64,
    delta: f64,
    gamma_fitted: Option<f64>,
    fitted_over_formula: Option<f64>,
    final_concurrence: f64,
    final_p_stokes: f64,
    grid: Option<GridSummary>,
}

fn cmd_simulate(
    resolved: &Resolved,
    dir: &Path,
    digest: &str,
    args: &RunArgs,
) -> Result<(), CliError> {
    let (grid, gamma) = resolved.build_grid()?;
    let t_max = resolved.t_max(gamma)?;
    let diag = gate_grid(resolved, &grid, gamma, t_max, args.force)?;

    let h = match resolved.model {
        ModelKind::Full => assemble_full_hamiltonian(&full_params(resolved)?, &grid)?,
        ModelKind::Effective | ModelKind::Both => {
            assemble_hamiltonian(&resolved.params, &grid, false)?
        }
    };
    let traj = propagate(resolved, &h, gamma, t_max)?;
    write_trajectory(&dir.join("trajectory.csv"), &traj)?;

    let last = traj.samples.last().expect("at least two samples");
    let spectrum = stokes_spectrum(last, &grid)?;
    let mut csv = CsvWriter::new(&["omega", "weight"]);
    for (w, v) in spectrum.omegas.iter().zip(&spectrum.weights) {
        csv.row(&[num(*w), num(*v)]);
    }
    csv.write(&dir.join("spectrum.csv"))?;

    let delta = frequency_shift(&resolved.params, &grid)?.value;
    // a single-mode grid Rabi-flops instead of decaying; a fit there is noise
    let gamma_fitted = if diag.is_some() { fit_decay_rate(&traj, gamma) } else { None };
    let summary = SimulateSummary {
        command: "simulate".into(),
        config_digest: digest.into(),
        model: resolved.model,
        preset: resolved.preset_note.clone(),
        frequency_unit: resolved.params.frequency_unit.label.clone(),
        gamma_formula: gamma,
        delta,
        gamma_fitted,
        fitted_over_formula: gamma_fitted.filter(|_| gamma > 0.0).map(|f| f / gamma),
        final_concurrence: sample_concurrence(last)?,
        final_p_stokes: spectrum.total_weight,
        grid: diag.map(|d| GridSummary::from_diag(&grid, &d)),
    };
    output::write_json(&dir.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct CompareSummary {
    command: String,
    config_digest: String,
    gamma_formula: f64,
    sup_c0_rk4_vs_expm: f64,
    sup_p0_expm_vs_analytic: f64,
    sup_p0_rk4_vs_analytic: f64,
    rk4_agrees: bool,
    analytic_agrees: bool,
}

fn cmd_compare(
    resolved: &Resolved,
    dir: &Path,
    digest: &str,
    args: &RunArgs,
) -> Result<(), CliError> {
    if resolved.model == ModelKind::Full {
        return Err(CliError::Config("compare needs the effective model".into()));
    }
    let (grid, gamma) = resolved.build_grid()?;
    let t_max = resolved.t_max(gamma)?;
    gate_grid(resolved, &grid, gamma, t_max, args.force)?;

    let h = assemble_hamiltonian(&resolved.params, &grid, false)?;
    let initial = AmplitudeState::initial(h.layout());
    let dt = resolved.dt(gamma)?;
    let stride = ((t_max / dt) / (resolved.samples() - 1) as f64).round().max(1.0);
    let rk4 = propagate_rk4(&h, &initial, dt, t_max, stride as usize)?;
    let times = rk4.times();
    let expm = propagate_expm(&h, &initial, &times)?;
    let ww = WWParams::from_model(&resolved.params, &grid)?;

    let mut csv = CsvWriter::new(&["t", "p0_expm", "p0_rk4", "p0_analytic"]);
    let mut sup_c0 = 0.0f64;
    let mut sup_expm_analytic = 0.0f64;
    let mut sup_rk4_analytic = 0.0f64;
    for (a, b) in expm.samples.iter().zip(&rk4.samples) {
        let analytic = closed_form_state(a.time, &resolved.params, &grid, &ww)?;
        let (pe, pr, pa) = (a.c0().norm_sqr(), b.c0().norm_sqr(), analytic.c0().norm_sqr());
        sup_c0 = sup_c0.max((a.c0() - b.c0()).norm());
        sup_expm_analytic = sup_expm_analytic.max((pe - pa).abs());
        sup_rk4_analytic = sup_rk4_analytic.max((pr - pa).abs());
        csv.row(&[num(a.time), num(pe), num(pr), num(pa)]);
    }
    csv.write(&dir.join("compare.csv"))?;

    let summary = CompareSummary {
        command: "compare".into(),
        config_digest: digest.into(),
        gamma_formula: gamma,
        sup_c0_rk4_vs_expm: sup_c0,
        sup_p0_expm_vs_analytic: sup_expm_analytic,
        sup_p0_rk4_vs_analytic: sup_rk4_analytic,
        rk4_agrees: sup_c0 < 1e-6,
        analytic_agrees: sup_expm_analytic < 0.05,
    };
    println!(
        "compare: rk4 vs expm sup |C0| dev {} ({}), numeric vs analytic sup |C0|^2 dev {} ({})",
        num(sup_c0),
        if summary.rk4_agrees { "ok, < 1e-6" } else { "EXCEEDS 1e-6" },
        num(sup_expm_analytic),
        if summary.analytic_agrees { "ok, < 0.05" } else { "EXCEEDS 0.05" },
    );
    output::write_json(&dir.join("summary.json"), &summary)
}

fn cmd_validate_adiabatic(resolved: &Resolved, dir: &Path, args: &RunArgs) -> Result<(), CliError> {
    let section = resolved
        .adiabatic
        .clone()
        .ok_or_else(|| CliError::Config("validate-adiabatic needs the [adiabatic] section".into()))?;
    let (grid, gamma) = resolved.build_grid()?;
    let t_max = resolved.t_max(gamma)?;
    gate_grid(resolved, &grid, gamma, t_max, args.force)?;
    let lambda_eff = resolved
        .params
        .coupling_profile
        .value_at(resolved.params.omega_res())
        .map_err(|e| CliError::Config(e.to_string()))?;

    let times = linspace(t_max, resolved.samples());
    let margin = section.stark_margin_in_gamma.unwrap_or(5.0);
    let mut csv = CsvWriter::new(&[
        "ratio",
        "delta2",
        "g_p",
        "g_s",
        "max_b1_sq",
        "max_population_discrepancy",
        "pass",
    ]);
    let mut discrepancies = Vec::new();
    let mut all_pass = true;
    for (i, &ratio) in section.ratios.iter().enumerate() {
        let delta2 = match &section.delta2_values {
            Some(values) => values[i],
            None => {
                if gamma <= 0.0 {
                    return Err(CliError::Config(
                        "zero decay rate: give adiabatic.delta2_values explicitly".into(),
                    ));
                }
                margin * gamma / (ratio * ratio)
            }
        };
        // the intermediate state's own Stokes resonance must stay off-grid,
        // otherwise the ladder point probes real single-photon decay
        let psi1_resonance = resolved.params.omega_p + delta2 - resolved.params.omega_31;
        if grid.contains(psi1_resonance) {
            return Err(CliError::Config(format!(
                "ladder point {i} (delta2 = {delta2}) is resonant: omega_p + delta2 - omega_31 = {psi1_resonance} falls inside the grid"
            )));
        }
        let g_p = match &section.g_p_values {
            Some(values) => values[i],
            None => ratio * delta2,
        };
        let fp = FullParams {
            g_p,
            g_s_profile: CouplingProfile::Flat { lambda0: lambda_eff / ratio },
            detuning2: delta2,
            omega_p: resolved.params.omega_p,
            omega_31: resolved.params.omega_31,
            n_atoms: resolved.params.n_atoms,
        };
        let hf = assemble_full_hamiltonian(&fp, &grid)?;
        let he = stark_shifted_effective(&fp, &grid)?;
        let tf = propagate_expm(&hf, &AmplitudeState::initial(hf.layout()), &times)?;
        let te = propagate_expm(&he, &AmplitudeState::initial(he.layout()), &times)?;
        let report = adiabaticity_report(&tf, &te, &fp, &grid)?;
        discrepancies.push(report.max_population_discrepancy);
        all_pass &= report.pass;
        csv.row(&[
            num(ratio),
            num(delta2),
            num(fp.g_p),
            num(lambda_eff / ratio),
            num(report.max_b1_sq),
            num(report.max_population_discrepancy),
            report.pass.to_string(),
        ]);
    }
    csv.write(&dir.join("adiabatic.csv"))?;

    let monotone = discrepancies.windows(2).all(|w| w[1] <= w[0]);
    println!(
        "validate-adiabatic: {} ladder points, discrepancies {} ({}), all reports {}",
        section.ratios.len(),
        discrepancies.iter().map(|d| num(*d)).collect::<Vec<_>>().join(" -> "),
        if monotone { "monotone" } else { "NOT MONOTONE" },
        if all_pass { "pass" } else { "FAIL" },
    );
    Ok(())
}

struct SweepRow {
    value: f64,
    gamma_formula: f64,
    gamma_fitted: Option<f64>,
    final_concurrence: f64,
    runtime_seconds: f64,
}

fn sweep_point(resolved: &Resolved, axis: &str, value: f64) -> Result<SweepRow, CliError> {
    let started = Instant::now();
    let mut point = resolved.clone();
    match axis {
        "lambda0" => match &mut point.params.coupling_profile {
            CouplingProfile::Flat { lambda0 } => *lambda0 = value,
            _ => {
                return Err(CliError::Config(
                    "lambda0 sweep needs a flat coupling profile".into(),
                ))
            }
        },
        "n_atoms" => {
            let n = value as usize;
            if n as f64 != value || n < 2 {
                return Err(CliError::Config(format!(
                    "n_atoms sweep values must be integers >= 2, got {value}"
                )));
            }
            point.params = SystemParams::new(
                point.params.omega_p,
                point.params.omega_31,
                n,
                point.params.coupling_profile.clone(),
                point.params.frequency_unit.clone(),
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
        }
        "bandwidth" => {
            if point.grid.bandwidth.is_some() {
                point.grid.bandwidth = Some(value);
            } else {
                point.grid.bandwidth_in_gamma = Some(value);
            }
        }
        "n_modes" => {
            let n = value as usize;
            if n as f64 != value || n < 3 {
                return Err(CliError::Config(format!(
                    "n_modes sweep values must be integers >= 3, got {value}"
                )));
            }
            point.grid.n_modes = n;
        }
        "detuning2" => {
            point.full.as_mut().expect("checked in resolve").detuning2 = value;
            point.model = ModelKind::Full;
        }
        other => return Err(CliError::Config(format!("unknown sweep axis {other}"))),
    }

    let (grid, gamma) = point.build_grid()?;
    let t_max = point.t_max(gamma)?;
    gate_grid(&point, &grid, gamma, t_max, false)?;
    let h = match point.model {
        ModelKind::Full => assemble_full_hamiltonian(&full_params(&point)?, &grid)?,
        _ => assemble_hamiltonian(&point.params, &grid, false)?,
    };
    let traj = propagate(&point, &h, gamma, t_max)?;
    Ok(SweepRow {
        value,
        gamma_formula: gamma,
        gamma_fitted: fit_decay_rate(&traj, gamma),
        final_concurrence: sample_concurrence(traj.samples.last().expect("samples >= 2"))?,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

fn cmd_sweep(
    resolved: &Resolved,
    dir: &Path,
    _digest: &str,
    args: &RunArgs,
) -> Result<Vec<f64>, CliError> {
    use rayon::prelude::*;

    let sweep = resolved
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs the [sweep] section".into()))?;

    let worker = |value: &f64| sweep_point(resolved, &sweep.axis, *value);
    let results: Vec<Result<SweepRow, CliError>> = match args.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CliError::Numerical(e.to_string()))?
            .install(|| sweep.values.par_iter().map(worker).collect()),
        None => sweep.values.par_iter().map(worker).collect(),
    };

    // rows come back in input order regardless of scheduling
    let mut csv = CsvWriter::new(&[
        "index",
        &sweep.axis,
        "gamma_formula",
        "gamma_fitted",
        "final_concurrence",
    ]);
    let mut runtimes = Vec::with_capacity(results.len());
    for (i, result) in results.into_iter().enumerate() {
        let row = result?;
        csv.row(&[
            i.to_string(),
            num(row.value),
            num(row.gamma_formula),
            row.gamma_fitted.map(num).unwrap_or_else(|| "nan".into()),
            num(row.final_concurrence),
        ]);
        runtimes.push(row.runtime_seconds);
    }
    csv.write(&dir.join("sweep.csv"))?;
    Ok(runtimes)
}
