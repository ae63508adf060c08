use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn crlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CRLAB_OUT")
        .env_remove("CRLAB_THREADS")
        .output()
        .expect("crlab runs")
}

fn summary(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).expect("summary written");
    serde_json::from_str(&text).expect("summary is JSON")
}

fn num(v: &Value, path: &str) -> f64 {
    v.pointer(path).and_then(Value::as_f64).unwrap_or_else(|| panic!("{path} missing in {v}"))
}

#[test]
fn invariants_of_rototranslation_torus() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["invariants", "--geometry", "t3-roto:n=1", "--res", "32"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "invariants");
    assert_eq!(s["schema"], 1);
    assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(num(&s, "/tolerances/structure"), 1e-8);
    for (key, want) in [("w", 0.5), ("abs_a11", 0.5), ("abs_q11", 0.375)] {
        for stat in ["min", "max"] {
            let v = num(&s, &format!("/result/{key}/{stat}"));
            assert!((v - want).abs() < 1e-6 * want, "{key} {stat} = {v}");
        }
    }
    assert_eq!(s["result"]["within_tolerance"], true);
    // stdout carries the same summary
    let echoed: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echoed, s);
}

#[test]
fn invariants_on_embedded_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["invariants", "--geometry", "sphere", "--samples", "16"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "invariants");
    assert!(num(&s, "/result/abs_torsion/max") < 1e-10);
}

#[test]
fn fill_recovers_the_static_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["fill", "--geometry", "t3-roto:n=1", "--flow", "torsion", "--slices", "9", "--res", "16", "--snapshots"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "fill");
    assert!((num(&s, "/result/margin") - 1.0).abs() < 1e-6);
    assert!(num(&s, "/result/r1") <= 1e-6);
    assert!(num(&s, "/result/r2") <= 1e-6);
    assert_eq!(s["result"]["per_slice"].as_array().unwrap().len(), 9);
    assert!(dir.path().join("certificates/u_008.bin").exists());
}

#[test]
fn flow_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["flow", "--geometry", "t3-roto:n=1@16", "--flow", "coupled-torsion", "--dt", "1e-3", "--t-end", "5e-3", "--snapshot-every", "2"];
    for d in [&a, &b] {
        let o = crlab(&args, d.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["flow.csv", "flow.json", "snapshots/beta_000004.bin", "snapshots/manifest.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let csv = std::fs::read_to_string(a.path().join("flow.csv")).unwrap();
    let mut lines = csv.lines();
    let hash = summary(a.path(), "flow")["config_hash"].as_str().unwrap().to_string();
    assert!(lines.next().unwrap().contains(&hash));
    assert_eq!(lines.next().unwrap(), "t,normA,normQ,energy,res21,res24,extra");
    assert_eq!(lines.count(), 6);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "flow", "geometry": "t3-roto:n=2@16", "t_end": 0.5, "seed": 7, "tolerances": {"abort_residual": 1e-4}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = crlab(&["flow", "--config", cfg.to_str().unwrap(), "--t-end", "0.01"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out, "flow");
    assert_eq!(s["config"]["geometry"], "t3-roto:n=2@16");
    assert_eq!(num(&s, "/config/t_end"), 0.01);
    assert_eq!(s["seed"], 7);
    assert_eq!(num(&s, "/tolerances/abort_residual"), 1e-4);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_crlab"))
        .args(["invariants", "--geometry", "t3-roto:n=1@8"])
        .env("CRLAB_OUT", dir.path())
        .env("CRLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("invariants.json").exists());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 7] = [
        &["invariants", "--no-such-flag"],
        &["invariants", "--res", "24"],
        &["invariants", "--geometry", "klein-bottle"],
        &["flow", "--dt", "10"],
        &["embed", "--check", "lemma99"],
        &["fill", "--rhs", "coupled-torsion"],
        &["selftest", "--criteria", "13"],
    ];
    for args in cases {
        let o = crlab(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"geometri": "t3-roto"}"#).unwrap();
    let o = crlab(&["invariants", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_documents_grammar_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("name[:key=value,...][@dims]"));
    assert!(text.contains("3 aborted flow"));
}

#[test]
fn blown_up_flow_exits_three_with_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // T³(1) torsion blows up at t = 1
    let o = crlab(&["flow", "--geometry", "t3-roto:n=1@16", "--t-end", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "flow");
    assert_eq!(s["result"]["termination"]["status"], "aborted");
    assert!(num(&s, "/result/last/t") < 1.0);
}

#[test]
fn embed_checks_report_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["embed", "--gamma", "sphere", "--check", "lemma62", "--samples", "40"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), "embed");
    assert!(num(&s, "/result/residual/max") <= 1e-5);
    assert_eq!(s["result"]["differentiation"], "Exact");
    assert_eq!(s["config"]["function"], "random-quadratic:seed=0");

    let o = crlab(&["embed", "--gamma", "ellipsoid:a1=1,a2=2", "--check", "tangency", "--samples", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path(), "embed");
    assert!(num(&s, "/result/route_agreement/max") <= 1e-5);
    assert!(num(&s, "/result/order/min") >= 1.8);

    let o = crlab(&["embed", "--check", "chi", "--function", "z1z2bar", "--samples", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(num(&summary(dir.path(), "embed"), "/result/defect/max") < 1e-12);

    let o = crlab(&["embed", "--check", "chi", "--eps", "10", "--samples", "5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn selftest_exit_status_follows_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = crlab(&["selftest", "--criteria", "4,8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(dir.path(), "selftest");
    assert_eq!(s["result"]["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(s["result"]["passed"], true);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[PASS]  8"));

    // the S³ kernel-witness clause of criterion 9 cannot hold (z̄₁ is in the kernel there)
    let o = crlab(&["selftest", "--criteria", "9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let s = summary(dir.path(), "selftest");
    assert_eq!(s["result"]["passed"], false);
}
