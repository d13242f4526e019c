//! End-to-end tests of the conekit binary: exit codes, report schema,
//! determinism across runs and worker counts, and the CSV dumps.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn conekit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conekit"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    conekit().args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn read_report(dir: &Path, out: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(out).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// report.json with the volatile timing subtree removed.
fn stripped_report(dir: &Path, out: &str) -> Value {
    let mut v = read_report(dir, out);
    v.as_object_mut().unwrap().remove("timing").expect("timing key present");
    v
}

const PSH_CONFIG: &str = r#"
experiment = "unit-ball-psh"
seed = 7

[potential]
kind = "euclidean"
dimension = 2

[samples]
count = 120
radius = 2.0

[psh]
margin = 0.5
"#;

#[test]
fn psh_check_passes_and_is_deterministic_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", PSH_CONFIG);
    let first = run(&["psh-check", "--config", "cfg.toml", "--out", "a", "--workers", "1"], tmp.path());
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let second = run(&["psh-check", "--config", "cfg.toml", "--out", "b", "--workers", "3"], tmp.path());
    assert!(second.status.success());

    assert_eq!(stripped_report(tmp.path(), "a"), stripped_report(tmp.path(), "b"));

    // Byte-identical after dropping the timing lines themselves.
    let strip_lines = |out: &str| -> String {
        let text = std::fs::read_to_string(tmp.path().join(out).join("report.json")).unwrap();
        text.lines()
            .filter(|l| !l.contains("elapsed_seconds") && !l.contains("unix_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_lines("a"), strip_lines("b"));

    let report = read_report(tmp.path(), "a");
    assert_eq!(report["experiment"], "unit-ball-psh");
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], 7);
    let certs = report["certificates"].as_array().unwrap();
    assert_eq!(certs.len(), 2);
    assert_eq!(certs[0]["name"], "levi_min_eigenvalue");
    assert_eq!(certs[0]["sample_count"], 120);
}

#[test]
fn report_keys_are_sorted_and_certificates_carry_exactly_six_fields() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", PSH_CONFIG);
    let out = run(&["psh-check", "--config", "cfg.toml", "--out", "r"], tmp.path());
    assert!(out.status.success());

    // Top-level keys sit at two-space indentation in the pretty output;
    // they must appear in sorted order.
    let text = std::fs::read_to_string(tmp.path().join("r/report.json")).unwrap();
    let top_keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \""))
        .map(|l| l.trim_start_matches("  \"").split('"').next().unwrap())
        .collect();
    assert_eq!(
        top_keys,
        ["certificates", "config", "details", "experiment", "pass", "seed", "timing"]
    );

    let report = read_report(tmp.path(), "r");
    for cert in report["certificates"].as_array().unwrap() {
        let obj = cert.as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(|s| s.as_str()).collect();
        assert_eq!(
            keys,
            ["name", "pass", "sample_count", "tolerance", "worst_point", "worst_value"],
        );
    }
}

#[test]
fn negated_potential_fails_the_psh_check_with_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "cfg.toml",
        r#"
seed = 5

[potential]
kind = "euclidean"
dimension = 2
scale = -1.0

[samples]
count = 40
radius = 2.0

[psh]
margin = 0.0
"#,
    );
    let out = run(&["psh-check", "--config", "cfg.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let report = read_report(tmp.path(), "r");
    assert_eq!(report["pass"], false);
    let certs = report["certificates"].as_array().unwrap();
    assert_eq!(certs[0]["name"], "levi_min_eigenvalue");
    assert_eq!(certs[0]["pass"], false);
    assert!(certs[0]["worst_value"].as_f64().unwrap() < -0.99);
}

#[test]
fn missing_config_file_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["levi", "--config", "no_such_file.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_file.toml"));
}

#[test]
fn config_errors_name_the_offending_key() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown field: the TOML layer names it.
    write_config(tmp.path(), "typo.toml", "seed = 1\n[potential]\nkind = \"euclidean\"\ndimensoin = 2\n");
    let out = run(&["levi", "--config", "typo.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimensoin"));

    // Bad value: the semantic layer names the key path.
    write_config(
        tmp.path(),
        "kind.toml",
        "seed = 1\n[potential]\nkind = \"spherical\"\ndimension = 2\n[samples]\ncount = 5\nradius = 1.0\n",
    );
    let out = run(&["levi", "--config", "kind.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("potential.kind"));

    // Sampling without a seed anywhere.
    write_config(
        tmp.path(),
        "noseed.toml",
        "[potential]\nkind = \"euclidean\"\ndimension = 2\n[samples]\ncount = 5\nradius = 1.0\n",
    );
    let out = run(&["levi", "--config", "noseed.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    // The --seed flag satisfies the requirement.
    let out = run(&["levi", "--config", "noseed.toml", "--out", "r", "--seed", "9"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_report(tmp.path(), "r")["seed"], 9);
}

const GLUE_CONFIG: &str = r#"
seed = 11

[potential]
kind = "euclidean"
dimension = 2

[glue]
region_radius = 2.0
generators = [[[0.0, 0.0], [1.0, 0.0]]]
epsilon = 0.25
delta = 0.5
c1 = 1.0
neighborhood_radius = 0.5
sample_density = 13
max_sweep_points = 6000

[glue.target]
kind = "damped_wave"
amplitude = 0.3
"#;

#[test]
fn glue_scenario_emits_three_passing_certificates() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", GLUE_CONFIG);
    let out = run(&["glue", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = read_report(tmp.path(), "r");
    let names: Vec<&str> = report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["restriction", "positivity", "near_z_exactness"]);
    assert!(report["certificates"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    for key in ["offset_a", "compensation_c", "near_z_radius", "ambient_min_eig"] {
        assert!(report["details"][key].is_number(), "missing detail {key}");
    }

    let csv = std::fs::read_to_string(tmp.path().join("r/glue.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "z0_re,z0_im,z1_re,z1_im,variety_distance,psi,min_eigenvalue,branch"
    );
    assert!(lines.clone().count() > 100);
    assert!(lines.all(|l| l.ends_with(",pole") || l.ends_with(",target") || l.ends_with(",band")));
}

#[test]
fn glue_with_a_sabotaged_offset_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    // Force an offset far below the sampled choice; the pole branch then
    // loses outright where it should win, and exactness catches it.
    let sabotaged = GLUE_CONFIG.replace(
        "max_sweep_points = 6000",
        "max_sweep_points = 6000\na_override = -5.0",
    );
    write_config(tmp.path(), "cfg.toml", &sabotaged);
    let out = run(&["glue", "--config", "cfg.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let report = read_report(tmp.path(), "r");
    let exactness = report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "near_z_exactness")
        .unwrap();
    assert_eq!(exactness["pass"], false);
}

#[test]
fn regmax_probe_certifies_band_bounds_and_convexity() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", "[regmax]\ndelta = 0.5\ngrid = 60\nhalf_width = 2.0\n");
    let out = run(&["regmax-probe", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    let names: Vec<&str> = report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["band_exactness", "majorization", "band_ceiling", "convexity_min_eigenvalue", "monotonicity_slope"]
    );
    assert_eq!(report["pass"], true);
    assert_eq!(report["seed"], Value::Null);

    let csv = std::fs::read_to_string(tmp.path().join("r/regmax.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y,value");
    assert_eq!(csv.lines().count(), 1 + 60 * 60);
}

const CONE_CONFIG: &str = r#"
seed = 42

[potential]
kind = "weighted_cone"
weights = [1.0, 2.0]

[samples]
count = 40
radius = 1.8
inner_radius = 0.4

[flow]
times = [-0.9, -0.3, 0.4, 1.1]
tolerance = 1e-8

[project]
level = 1.0
t_range = [-4.0, 4.0]
grid = 1201
"#;

#[test]
fn flow_verifies_scaling_and_contraction_on_the_weighted_cone() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", CONE_CONFIG);
    let out = run(&["flow", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    let names: Vec<&str> = report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "scaling_law_residual",
            "euler_identity_residual",
            "evaluation_errors",
            "spectral_floor",
            "contracted_norm_ratio",
            "contraction_evaluation_errors",
        ]
    );
    let csv = std::fs::read_to_string(tmp.path().join("r/flow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 40 * 4);
}

#[test]
fn project_certifies_unique_crossings_and_roundtrip_residuals() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "cfg.toml", CONE_CONFIG);
    let out = run(&["project", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    let certs = report["certificates"].as_array().unwrap();
    let crossing = certs.iter().find(|c| c["name"] == "crossing_count").unwrap();
    assert_eq!(crossing["worst_value"].as_f64().unwrap(), 1.0);
    let residual = certs.iter().find(|c| c["name"] == "projection_residual").unwrap();
    assert_eq!(residual["pass"], true);
    assert_eq!(residual["sample_count"], 40);
    let csv = std::fs::read_to_string(tmp.path().join("r/project.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "ray,crossing_t,residual");
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn sasaki_check_passes_on_the_round_sphere() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "cfg.toml",
        "seed = 2026\n[potential]\nkind = \"euclidean\"\ndimension = 2\n[sasaki]\ntriples = 8\ntolerance = 1e-3\n",
    );
    let out = run(&["sasaki-check", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    assert_eq!(report["experiment"], "round_curvature_identity");
    assert_eq!(report["certificates"].as_array().unwrap().len(), 6);
    let csv = std::fs::read_to_string(tmp.path().join("r/sasaki.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);

    // A weighted potential is rejected as a config error, not a bad report.
    write_config(
        tmp.path(),
        "weighted.toml",
        "seed = 1\n[potential]\nkind = \"weighted_cone\"\nweights = [1.0, 2.0]\n[sasaki]\ntriples = 4\ntolerance = 1e-3\n",
    );
    let out = run(&["sasaki-check", "--config", "weighted.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("potential.kind"));
}

#[test]
fn reeb_deform_reports_the_nearest_rational_direction() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "cfg.toml",
        "[reeb]\nweights = [1.0, 1.4142135623730951]\nq_max = 5\n",
    );
    let out = run(&["reeb-deform", "--config", "cfg.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    assert_eq!(report["details"]["numerators"], serde_json::json!([5, 7]));
    assert_eq!(report["details"]["denominator"], 5);
    let dev = report["details"]["deviation"].as_f64().unwrap();
    assert!((dev - (std::f64::consts::SQRT_2 - 1.4).abs()).abs() < 1e-15);
    assert_eq!(report["seed"], Value::Null);
    let csv = std::fs::read_to_string(tmp.path().join("r/reeb_deform.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn orbit_check_distinguishes_rational_from_irrational_directions() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "rational.toml",
        "seed = 3\n[orbit]\nweights = [1.0, 2.0]\nirrational = false\nq_max = 10\n",
    );
    let out = run(&["orbit-check", "--config", "rational.toml", "--out", "r", "--csv"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    let names: Vec<&str> = report["certificates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["period_return_distance", "period_positive", "stays_on_level"]);

    write_config(
        tmp.path(),
        "irrational.toml",
        "seed = 3\n[orbit]\nweights = [1.0, 1.4142135623730951]\nirrational = true\nwindow = 120.0\nsweep_samples = 6000\n",
    );
    let out = run(&["orbit-check", "--config", "irrational.toml", "--out", "ri"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "ri");
    let cert = &report["certificates"].as_array().unwrap()[0];
    assert_eq!(cert["name"], "no_return_separation");
    assert_eq!(cert["pass"], true);

    // Irrational weights declared rational are a config error.
    write_config(
        tmp.path(),
        "lie.toml",
        "seed = 3\n[orbit]\nweights = [1.0, 1.4142135623730951]\nirrational = false\n",
    );
    let out = run(&["orbit-check", "--config", "lie.toml", "--out", "rl"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("orbit.weights"));
}

#[test]
fn levi_probe_reports_eigenvalue_ranges_for_a_log_pole_potential() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(
        tmp.path(),
        "cfg.toml",
        "seed = 3\n[potential]\nkind = \"log_pole\"\ngenerators = [[[1.0, 0.0], [0.0, 0.0]]]\n[samples]\ncount = 30\nradius = 1.5\n",
    );
    let out = run(&["levi", "--config", "cfg.toml", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(tmp.path(), "r");
    // log |z_0|^2 is pluriharmonic away from its pole: both eigenvalue
    // bounds sit at numerical zero.
    assert!(report["details"]["min_eigenvalue_high"].as_f64().unwrap().abs() < 1e-6);
    assert!(report["details"]["min_eigenvalue_low"].as_f64().unwrap().abs() < 1e-6);
}
