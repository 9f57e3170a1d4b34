use std::path::Path;
use std::process::Command;

use serde_json::Value;

use drbounds::simlab::{generate, DgpSpec, LinearGaussian};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_drbounds"));
    c.env_remove("DRBOUNDS_JOBS");
    c
}

fn write_data(dir: &Path) -> std::path::PathBuf {
    let spec = DgpSpec::LinearGaussian(LinearGaussian {
        tau: 1.0,
        outcome_coefs: vec![1.0, 0.5, 0.0],
        treatment_coefs: vec![0.5, 0.0, 0.3],
        outcome_intercept: 0.0,
        treatment_intercept: 0.0,
        noise_sd: 1.0,
        noise_columns: 0,
    });
    let (ds, _) = generate(&spec, 300, 1).unwrap();
    let path = dir.join("data.csv");
    ds.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn estimate_writes_a_full_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("est.json");
    let stdout = run_ok(bin().args(["estimate", "--method", "dr", "--outcome", "y", "--treatment", "t"]).arg(&data).arg("-o").arg(&out));
    assert!(stdout.contains("dr estimate"));
    let r = read(&out);
    assert_eq!(r["schema_version"], "1");
    assert_eq!(r["config"]["command"], "estimate");
    assert_eq!(r["config"]["estimator"]["folds"], 5);
    assert_eq!(r["config"]["estimator"]["clip_epsilon"], 0.01);
    assert_eq!(r["config"]["estimator"]["outcome_learner"], "kernel(bw=AUTO)");
    assert_eq!(r["config"]["estimator"]["bootstrap_replicates"], 200);
    assert!(r["result"]["estimate"]["point"].is_f64());
    assert!(r["runtime"]["timestamp_unix"].is_u64());

    // sensitivity from the stored estimate
    let sens = dir.path().join("sens.json");
    run_ok(bin().args(["sensitivity", "--delta", "0.3", "--tipping-grid", "0:2:0.01", "--estimate"]).arg(&out).arg("-o").arg(&sens));
    let s = read(&sens);
    let point = r["result"]["estimate"]["point"].as_f64().unwrap();
    assert!((s["result"]["interval"]["lower"].as_f64().unwrap() - (point - 0.3)).abs() < 1e-12);
    assert!(s["result"]["tipping_point"]["grid"].is_array());

    // negative per-arm ranges parse as values
    let arm = dir.path().join("arm.json");
    run_ok(bin().args(["sensitivity", "--gamma0", "-0.2,0", "--gamma1", "-0.1,0.1", "--p1", "0.4", "--estimate"]).arg(&out).arg("-o").arg(&arm));
    let a = read(&arm);
    assert!((a["result"]["interval"]["lower"].as_f64().unwrap() - (point - 0.06)).abs() < 1e-12);
    assert!((a["result"]["interval"]["upper"].as_f64().unwrap() - (point + 0.14)).abs() < 1e-12);
}

#[test]
fn bounds_on_three_covariates_has_four_entries() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("b.json");
    run_ok(bin().args(["bounds", "--max-colliders", "1", "--outcome-learner", "linear"]).arg(&data).arg("-o").arg(&out));
    assert_eq!(read(&out)["result"]["entries"].as_array().unwrap().len(), 4);
    let out2 = dir.path().join("b2.json");
    run_ok(bin().args(["bounds", "--max-colliders", "1", "--known-non-colliders", "x1,x3", "--outcome-learner", "linear"]).arg(&data).arg("-o").arg(&out2));
    assert_eq!(read(&out2)["result"]["entries"].as_array().unwrap().len(), 2);
}

#[test]
fn rates_reports_the_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    run_ok(bin().args(["rates", "--alpha", "1", "--zeta", "1", "--d", "4", "-o"]).arg(&out));
    let r = read(&out);
    assert!((r["result"]["xi"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r["result"]["xi_exact"], "1/3");
    assert_eq!(r["result"]["in_root_n_regime"], false);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let code = |cmd: &mut Command| cmd.current_dir(dir.path()).status().unwrap().code().unwrap();
    assert_eq!(code(bin().args(["rates", "--alpha", "1", "--zeta", "1", "--d", "4", "--frobnicate"])), 1);
    assert_eq!(code(bin().args(["estimate", "--clip", "0.7"]).arg(&data)), 1);
    assert_eq!(code(bin().args(["estimate", "--outcome", "nope"]).arg(&data)), 1);
    assert_eq!(code(bin().args(["estimate", "missing.csv"])), 2);
    assert_eq!(code(bin().args(["--jobs", "0", "rates", "--alpha", "1", "--zeta", "1", "--d", "4"])), 1);
    assert_eq!(code(bin().args(["bounds", "--max-colliders", "3", "--max-subsets", "5"]).arg(&data)), 1);
    assert_eq!(code(bin().env("DRBOUNDS_JOBS", "x").args(["rates", "--alpha", "1", "--zeta", "1", "--d", "4"])), 1);
}

#[test]
fn simulate_writes_tables_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(
        &cfg,
        r#"{
            "dgp": {"variant": "linear_gaussian", "tau": 1, "outcome_coefs": [1], "treatment_coefs": [0.5], "noise_columns": 1},
            "methods": [
                {"name": "dr", "estimator": {"outcome_learner": "linear"}},
                {"name": "plugin", "estimator": {"method": "plugin", "outcome_learner": "linear", "bootstrap_replicates": 5, "bootstrap_mode": "no-refit"}}
            ],
            "n_grid": [100, 200, 400], "replications": 3, "seed": 4,
            "screening": {"eval_points": 200}
        }"#,
    )
    .unwrap();
    let out = dir.path().join("sim-report.json");
    run_ok(bin().args(["simulate", "--emit-plot-spec"]).arg(&cfg).arg("-o").arg(&out));
    assert!(dir.path().join("sim-report.cells.csv").exists());
    assert!(dir.path().join("sim-report.screening.csv").exists());
    assert!(read(&dir.path().join("sim-report.plot.json"))["vconcat"].is_array());
    let r = read(&out);
    assert_eq!(r["result"]["monte_carlo"]["cells"].as_array().unwrap().len(), 6);
    let again = dir.path().join("again.json");
    let stdout = run_ok(bin().args(["--jobs", "2", "replay"]).arg(&out).arg("-o").arg(&again));
    assert!(stdout.contains("identical"));
}

#[test]
fn bad_simulation_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(&cfg, r#"{"dgp": {"variant": "nope"}, "n_grid": [10], "replications": 2}"#).unwrap();
    let status = bin().arg("simulate").arg(&cfg).current_dir(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));
}
