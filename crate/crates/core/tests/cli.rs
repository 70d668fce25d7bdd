use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn config_text(name: &str) -> String {
    fs::read_to_string(config(name)).unwrap()
}

/// Writes `text` next to a scratch output directory and returns its path.
fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn hylomorph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hylomorph"))
        .args(args)
        .output()
        .unwrap()
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    hylomorph(&args)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn solve_nse_cubic_lands_on_the_sech_family() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("solve", &config("nse1d-cubic.cfg"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let omega = r["minimize"]["omega"].as_f64().unwrap();
    assert!((omega - 0.5).abs() < 1e-3, "omega = {omega}");
    assert_eq!(r["hylomorphy"]["verdict"], true);
    let cross = &r["cross_check"];
    assert!(cross["profile_difference"].as_f64().unwrap() < 1e-3);
    assert!(out.join("trace.csv").exists());
    assert!(out.join("fields/minimizer.snap").exists());
    assert!(out.join("fields/minimizer.snap.json").exists());
}

#[test]
fn exponent_outside_w2_range_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config_text("nse1d-cubic.cfg").replace("exponent = 4.0", "exponent = 8.0");
    let cfg = write_config(tmp.path(), &text);
    let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert!(err["message"].as_str().unwrap().contains("W2"), "{err}");
    assert_eq!(err["exit_code"], 1);
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config_text("nse1d-cubic.cfg").replace("[minimize]", "[minimize]\nstep-size = 3");
    let cfg = write_config(tmp.path(), &text);
    let o = run("solve", &cfg, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "config");
}

#[test]
fn iteration_cap_gives_exit_2_and_a_partial_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("solve", &config("nse1d-cubic.cfg"), &out, &["--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["status"], "not-converged");
    assert_eq!(r["minimize"]["converged"], false);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run("solve", &config("nkg1d-stabilized.cfg"), out, &["--deterministic"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["report.json", "trace.csv", "fields/minimizer.snap"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn snapshot_reference_evolves_as_a_standing_wave() {
    let tmp = tempfile::tempdir().unwrap();
    let solved = tmp.path().join("solved");
    let o = run("solve", &config("nse1d-cubic.cfg"), &solved, &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = config_text("nse1d-cubic.cfg")
        .replace("t-final = 10.0", "t-final = 1.0")
        .replace(
            "perturbation = 0.01",
            "perturbation = 0.0\nreference = \"solved/fields/minimizer.snap\"",
        );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("evolved");
    let o = run("evolve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert!(r["max_phase_deviation"].as_f64().unwrap() < 1e-3, "{r}");
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(lines.next().unwrap(), "t,E,C,V,orbital_distance");
    for l in lines {
        assert_eq!(l.split(',').filter(|v| v.parse::<f64>().is_ok()).count(), 5, "{l}");
    }
}

#[test]
fn perturbed_evolution_reports_small_orbital_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config_text("nse1d-cubic.cfg").replace("t-final = 10.0", "t-final = 2.0");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("evolve", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["status"], "completed");
    assert_eq!(r["reference"], "solve");
    assert!(r["max_phase_deviation"].is_null());
}

#[test]
fn verify_passes_on_the_nkg_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config_text("nkg1d-stabilized.cfg");
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let o = run("verify", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["all_passed"], true);
    let props = r["properties"].as_array().unwrap();
    assert!(props.iter().any(|p| p["name"] == "nkg-small-amplitude-bound"));
    assert!(props.iter().all(|p| p["passed"] == true));
}

#[test]
fn testfn_vortex_sweep_is_decreasing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run("testfn", &config("vortex-sweep.cfg"), &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]), "{rows:?}");
    assert_eq!(report(&out)["hylomorphy"]["verdict"], true);
}

#[test]
fn missing_config_is_an_io_error() {
    let o = hylomorph(&["solve", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["exit_code"], 1);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = hylomorph(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn help_exits_zero() {
    let o = hylomorph(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["solve", "evolve", "verify", "testfn"] {
        assert!(text.contains(sub));
    }
}
