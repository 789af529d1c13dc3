use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ramanpair");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RAMANPAIR_OUT")
        .output()
        .expect("spawn ramanpair")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Parse a CSV produced by the CLI: skip the version comment and header,
/// return rows of f64 columns (non-numeric cells become NaN).
fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|line| {
            line.split(',')
                .map(|cell| cell.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

const FAST_EFFECTIVE: &str = r#"
model = "effective"
[system]
omega_p = 10.0
omega_31 = 3.0
n_atoms = 2
[coupling]
kind = "flat"
lambda0 = 0.01
[grid]
n_modes = 201
bandwidth_in_gamma = 40.0
[time]
t_max_in_gamma = 3.0
samples = 61
"#;

#[test]
fn toy_preset_rabi_flops_and_entangles() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "preset = \"toy2x2\"\n");
    let out_dir = tmp.path().join("out");
    let out = run(&["simulate", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for file in ["trajectory.csv", "spectrum.csv", "summary.json", "metadata.json"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let rows = read_csv(&out_dir.join("trajectory.csv"));
    assert_eq!(rows.len(), 201);
    // single resonant mode: population flops out of |11>|1_P> and the
    // concurrence follows the Stokes weight of the pure symmetric state
    let min_p0 = rows.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    let max_conc = rows.iter().map(|r| r[5]).fold(0.0, f64::max);
    assert!(min_p0 < 0.6, "expected a Rabi dip, min p0 = {min_p0}");
    assert!(max_conc > 0.4, "expected entanglement, max concurrence = {max_conc}");
    for r in &rows {
        assert!((r[5] - r[4]).abs() < 1e-6, "concurrence should track p_stokes");
        assert!((r[6] - 1.0).abs() < 1e-9, "norm drift");
    }
}

#[test]
fn empty_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "");
    let out = run(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("config error"), "stderr: {stderr}");
}

#[test]
fn unknown_key_is_a_config_error_with_location() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "preset = \"default-effective\"\n[time]\nt_max_in_gamma = 3.0\nsampels = 121\n",
    );
    let out = run(&["simulate", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sampels"), "stderr: {stderr}");
    assert!(stderr.contains("line 4"), "stderr: {stderr}");
}

#[test]
fn narrow_grid_fails_validation_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &FAST_EFFECTIVE.replace("bandwidth_in_gamma = 40.0", "bandwidth_in_gamma = 4.0"),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["simulate", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--force"), "stderr: {stderr}");

    let out = run(&["simulate", &cfg, "--out", out_dir.to_str().unwrap(), "--force"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join("trajectory.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), FAST_EFFECTIVE);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&["simulate", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["simulate", &cfg, "--out", b.to_str().unwrap()]).status.success());
    for file in ["trajectory.csv", "spectrum.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "preset = \"toy2x2\"\n");
    let out_dir = tmp.path().join("via-env");
    let out = Command::new(BIN)
        .args(["simulate", &cfg])
        .env("RAMANPAIR_OUT", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out_dir.join("trajectory.csv").exists());
}

#[test]
fn sweep_scales_gamma_with_atom_number() {
    let tmp = TempDir::new().unwrap();
    // absolute bandwidth keeps one shared grid across points, so the
    // collective rate comes out proportional to N
    let cfg = write_config(
        tmp.path(),
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
n_modes = 401
bandwidth = 9.0
[time]
t_max = 25.0
samples = 61
[sweep]
axis = "n_atoms"
values = [2, 3, 4]
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["sweep", &cfg, "--out", out_dir.to_str().unwrap(), "--jobs", "2"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&out_dir.join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    for (i, expected_n) in [2.0, 3.0, 4.0].iter().enumerate() {
        assert_eq!(rows[i][0] as usize, i, "rows must keep input order");
        assert_eq!(rows[i][1], *expected_n);
    }
    let gamma2 = rows[0][2];
    for r in &rows {
        let ratio = r[2] / gamma2;
        assert!(
            (ratio - r[1] / 2.0).abs() < 0.02,
            "gamma should scale like N: N = {}, gamma ratio = {ratio}",
            r[1]
        );
        assert!((r[3] / r[2] - 1.0).abs() < 0.1, "fitted rate should track the formula");
    }
}

#[test]
fn unknown_sweep_axis_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{FAST_EFFECTIVE}\n[sweep]\naxis = \"temperature\"\nvalues = [1.0]\n"),
    );
    let out = run(&["sweep", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("temperature"));
}

#[test]
fn compare_with_zero_coupling_is_exact() {
    let tmp = TempDir::new().unwrap();
    // lambda = 0 leaves only free phase evolution, which all three
    // propagators represent without error
    let cfg = write_config(
        tmp.path(),
        r#"
model = "effective"
[system]
omega_p = 10.0
omega_31 = 3.0
n_atoms = 2
[coupling]
kind = "flat"
lambda0 = 0.0
[grid]
n_modes = 101
bandwidth = 10.0
[time]
t_max = 5.0
samples = 21
dt = 0.01
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["compare", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["sup_c0_rk4_vs_expm"].as_f64().unwrap() < 1e-10);
    assert!(summary["sup_p0_expm_vs_analytic"].as_f64().unwrap() < 1e-10);
    assert!(summary["sup_p0_rk4_vs_analytic"].as_f64().unwrap() < 1e-10);
}

#[test]
fn compare_verdict_on_default_grid() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), FAST_EFFECTIVE);
    let out_dir = tmp.path().join("out");
    let out = run(&["compare", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("ok, < 1e-6"), "stdout: {stdout}");
    assert!(stdout.contains("ok, < 0.05"), "stdout: {stdout}");
    let rows = read_csv(&out_dir.join("compare.csv"));
    assert_eq!(rows.len(), 61);
}

#[test]
fn adiabatic_ladder_discrepancy_shrinks() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
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
n_modes = 129
bandwidth_in_gamma = 40.0
[time]
t_max_in_gamma = 3.0
samples = 61
[adiabatic]
ratios = [0.1, 0.03]
"#,
    );
    let out_dir = tmp.path().join("out");
    let out = run(&["validate-adiabatic", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("monotone"), "stdout: {stdout}");
    let rows = read_csv(&out_dir.join("adiabatic.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[1][5] < rows[0][5], "discrepancy should shrink down the ladder");
    assert!(rows[0][5] < 0.1 && rows[1][5] < 0.02);
}

#[test]
fn seed_meta_embeds_the_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "preset = \"toy2x2\"\n");
    let out_dir = tmp.path().join("out");
    let out = run(&["simulate", &cfg, "--out", out_dir.to_str().unwrap(), "--seed-meta"]);
    assert!(out.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert!(meta["config_text"].as_str().unwrap().contains("toy2x2"));
}
