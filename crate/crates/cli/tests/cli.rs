use std::fs;
use std::path::Path;

use einflow_cli::report::{sha256_hex, Report};
use einflow_cli::run_with;
use serde_json::Value;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn einflow(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("einflow").chain(args.iter().copied());
    let r = run_with(argv, &mut out, &mut err);
    Run { code: r.exit_code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn report(dir: &Path) -> Report {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flat_torus_expander_entropy() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("mu");
    let r = einflow(&["--out", arg(&out), "mu-plus", "--torus", "3", "--L", "6.2831853"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.starts_with("mu_plus = -5.5136"), "{}", r.stdout);
    let rep = report(&out);
    assert_eq!(rep.schema_version, 1);
    assert_eq!(rep.manifest.command, "mu-plus");
    assert_eq!(rep.manifest.config["L"], "6.2831853");
    assert_eq!(rep.manifest.config["el-tol"], "1e-9");
    let value = rep.result["mu_plus"].as_f64().unwrap();
    assert!((value + 3.0 * 6.2831853f64.ln()).abs() < 1e-8, "{value}");
    assert!(rep.result["closed_form_gap"].as_f64().unwrap() < 1e-8);
    for a in &rep.artifacts {
        assert_eq!(sha256_hex(&fs::read(out.join(&a.path)).unwrap()), a.sha256);
    }
    let manifest: Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, serde_json::to_value(&rep.manifest).unwrap());
}

#[test]
fn product_einstein_is_unstable() {
    let tmp = tempfile::tempdir().unwrap();
    let r = einflow(&["--out", arg(tmp.path()), "classify", "--model", "product-einstein"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(tmp.path());
    assert_eq!(rep.result["verdict"], "DynamicallyUnstable");
    let reasons: Vec<&str> = rep.result["reasons"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(reasons.contains(&"not a Yamabe local maximizer"), "{reasons:?}");
}

#[test]
fn certificate_reruns_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    let r = einflow(&["--out", arg(&first), "cpn-certificate", "--n", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&first);
    assert_eq!(rep.result["value"], "8/5");
    assert_eq!(rep.result["verdict"], "BorderlineResolvedUnstable");
    assert_eq!(rep.manifest.reproducibility, "exact");

    let second = tmp.path().join("b");
    let r = einflow(&["--out", arg(&second), "rerun", arg(&first.join("manifest.json"))]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(second.join("report.json")).unwrap());
    let third = tmp.path().join("c");
    assert_eq!(einflow(&["--out", arg(&third), "rerun", arg(&first.join("report.json"))]).code, 0);
    assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(third.join("report.json")).unwrap());
}

#[test]
fn numeric_runs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let args = ["mu-plus", "--torus", "2", "--N", "12", "--metric", "random", "--amplitude", "0.1", "--seed", "3"];
    let mut first = vec!["--out", arg(&a)];
    first.extend(args);
    assert_eq!(einflow(&first).code, 0);
    assert_eq!(einflow(&["--out", arg(&b), "rerun", arg(&a.join("manifest.json"))]).code, 0);
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("minimizer_w.efld")).unwrap(), fs::read(b.join("minimizer_w.efld")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# grid\ntorus = 2\nN = 8\nL = 3.0\n").unwrap();
    let out = tmp.path().join("o");
    let r = einflow(&["--config", arg(&cfg), "--out", arg(&out), "lambda", "--N", "10"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&out);
    assert_eq!(rep.manifest.config["torus"], "2");
    assert_eq!(rep.manifest.config["N"], "10");
    assert_eq!(rep.manifest.config["L"], "3.0");
    assert!(rep.result["lambda"].as_f64().unwrap().abs() < 1e-10);
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "N = 8\n\nwidth = 2\n").unwrap();
    let r = einflow(&["--config", arg(&cfg), "--out", arg(tmp.path()), "mu-plus"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("`width` at line 3"), "{}", r.stderr);

    fs::write(&cfg, "N = eight\n").unwrap();
    let r = einflow(&["--config", arg(&cfg), "--out", arg(tmp.path()), "mu-plus"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("`N` at line 1"), "{}", r.stderr);

    let r = einflow(&["--out", arg(tmp.path()), "transmogrify"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("unknown command \"transmogrify\""), "{}", r.stderr);

    assert_eq!(einflow(&["--out", arg(tmp.path()), "mu-plus", "--bogus", "1"]).code, 1);
    assert_eq!(einflow(&["--out", arg(tmp.path()), "classify"]).code, 1);
    assert_eq!(einflow(&["--out", arg(tmp.path()), "classify", "--model", "round-sphere-4"]).code, 1);
    assert_eq!(einflow(&["--out", arg(tmp.path()), "mu-plus", "--N", "4"]).code, 1);
    assert_eq!(einflow(&["--out", arg(tmp.path()), "nu-csc"]).code, 1);
    assert_eq!(einflow(&["--help"]).code, 0);
}

#[test]
fn flow_trace_feeds_the_exponent_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let flow_dir = tmp.path().join("flow");
    let r = einflow(&[
        "--out", arg(&flow_dir), "flow", "--torus", "2", "--N", "12", "--mode", "2", "--gauge", "deturck",
        "--T", "5", "--monitor-every", "5", "--monitor-lambda", "true", "--monitor-mu-plus", "false",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&flow_dir);
    assert_eq!(rep.result["monotonicity"]["violations"], 0);
    assert!(rep.result["final"]["ricci_l2"].as_f64().unwrap() < 1e-4);
    let trace = flow_dir.join("diagnostics.csv");
    let header = fs::read_to_string(&trace).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header,
        "step,time,dt,mu_plus,mu_plus_gradient_norm,mu_plus_rate,lambda,lambda_gradient_norm,ricci_l2,c0_deviation,l2_deviation,min_eigenvalue"
    );

    let fit_dir = tmp.path().join("fit");
    let fit_args = ["lojasiewicz-fit", "--trace", arg(&trace), "--reference", "0", "--gap-floor", "1e-12", "--window-start", "0.5"];
    let mut argv = vec!["--out", arg(&fit_dir)];
    argv.extend(fit_args);
    let r = einflow(&argv);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&fit_dir);
    let sigma = rep.result["fit"]["sigma_estimate"].as_f64().unwrap();
    assert!((0.5..0.55).contains(&sigma), "{sigma}");
    assert_eq!(rep.manifest.input_hashes["trace"], sha256_hex(&fs::read(&trace).unwrap()));

    // A changed input is refused on rerun.
    let mut text = fs::read_to_string(&trace).unwrap();
    text.push_str(&text.lines().last().unwrap().to_string());
    text.push('\n');
    fs::write(&trace, text).unwrap();
    let r = einflow(&["--out", arg(&tmp.path().join("again")), "rerun", arg(&fit_dir.join("manifest.json"))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("differs from the manifest"), "{}", r.stderr);

    // Too few samples to fit is a numerical failure with a report.
    let short = tmp.path().join("short");
    let r = einflow(&["--out", arg(&short), "lojasiewicz-fit", "--trace", arg(&trace), "--window-end", "0.2"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(serde_json::to_value(report(&short).status).unwrap(), "numerical_failure");
}

#[test]
fn homothety_and_initial_metric_containers() {
    let tmp = tempfile::tempdir().unwrap();
    let flow_dir = tmp.path().join("flow");
    let r = einflow(&["--out", arg(&flow_dir), "flow", "--torus", "2", "--N", "8", "--T", "0.05", "--amplitude", "0.1"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let start = flow_dir.join("final_metric.efld");
    let h = tmp.path().join("h");
    let r = einflow(&["--out", arg(&h), "homothety-check", "--init-metric", arg(&start), "--T", "0.1", "--dt", "0.01", "--stride", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = report(&h);
    assert!(rep.result["max_c0_discrepancy"].as_f64().unwrap() < 1e-5);
    assert_eq!(rep.manifest.input_hashes["init-metric"], sha256_hex(&fs::read(&start).unwrap()));
    let csv = fs::read_to_string(h.join("homothety.csv")).unwrap();
    assert!(csv.starts_with("time,c0_discrepancy\n"));
}
