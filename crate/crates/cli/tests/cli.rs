use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kgs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgs"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn claims(doc: &Value) -> Vec<(String, bool)> {
    doc["claims"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| {
            (
                c["claim"].as_str().unwrap().to_owned(),
                c["passed"].as_bool().unwrap(),
            )
        })
        .collect()
}

fn strip_volatile(mut v: Value) -> Value {
    if let Some(o) = v.as_object_mut() {
        o.remove("wall_time_s");
        if let Some(cfg) = o.get_mut("config").and_then(Value::as_object_mut) {
            cfg.remove("output_dir");
        }
    }
    v
}

#[test]
fn wave_cnoidal_files_and_residual() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(dir.path(), &["wave", "--n", "256"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("wave.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,phi,phi_prime,residual_local");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 256);
    assert!(rows.iter().all(|r| r[3].abs() <= 1e-8));
    let doc = json(&dir.path().join("wave.json"));
    let p = &doc["results"]["params"];
    for key in ["k", "beta1", "beta2", "beta3", "B"] {
        assert!(p[key].is_f64(), "{key}");
    }
    assert!(doc["results"]["ode_residual"].as_f64().unwrap() <= 1e-8);
    assert!(claims(&doc).iter().all(|c| c.1));
}

#[test]
fn wave_below_threshold_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(dir.path(), &["wave", "--c", "0.45"]);
    assert_eq!(code(&o), 2);
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(
        msg.contains("admissible interval is c > 2 pi^2 / L^2 = 0.5"),
        "{msg}"
    );
    let o = kgs(dir.path(), &["wave", "--family", "dnoidal", "--c", "0.2"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("pi^2 / L^2 = 0.25"));
    assert!(!dir.path().join("wave.json").exists());
}

#[test]
fn wave_dnoidal_reports_eta_and_k() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&kgs(
            dir.path(),
            &["wave", "--family", "dnoidal", "--c", "0.4"]
        )),
        0
    );
    let doc = json(&dir.path().join("wave.json"));
    let p = &doc["results"]["params"];
    assert!(p["eta"].is_f64() && p["k"].is_f64());
    assert_eq!(doc["config"]["system"], "cubic");
}

#[test]
fn floats_carry_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kgs(dir.path(), &["wave", "--n", "32"])), 0);
    let text = std::fs::read_to_string(dir.path().join("wave.json")).unwrap();
    assert!(text.contains("\"c\": 5.9999999999999998e-1"), "{text}");
}

#[test]
fn spectrum_counts_on_both_domains() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(dir.path(), &["spectrum", "--n", "64"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("spectrum.json"));
    assert!(doc["all_passed"].as_bool().unwrap());
    assert_eq!(doc["results"]["operators"].as_array().unwrap().len(), 5);

    let o = kgs(dir.path(), &["spectrum", "--n", "64", "--double-domain"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("spectrum.json"));
    let l1 = &doc["results"]["operators"][0];
    assert_eq!(l1["operator"], "L1cn");
    assert_eq!(l1["n_negative"], 3);
    assert!(claims(&doc)
        .iter()
        .any(|(c, p)| c.contains("exactly three negative") && *p));
}

#[test]
fn spectrum_free_mode_matches_symbols() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&kgs(dir.path(), &["spectrum", "--free", "--n", "32"])),
        0
    );
    let doc = json(&dir.path().join("spectrum.json"));
    let r = &doc["results"];
    assert!(r["max_rel_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(r["eigenvalues"].as_array().unwrap().len(), 32);
}

#[test]
fn stability_cnoidal_doubled_domain_index_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(dir.path(), &["stability", "--n", "64", "--double-domain"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("stability.json"));
    assert_eq!(doc["results"]["index"]["index"], 2);
    assert!(doc["results"]["linearized"]["sigma_max"].as_f64().unwrap() > 0.2);
    assert!(doc["results"]["d_second"]["numeric"].as_f64().unwrap() > 0.0);
}

#[test]
fn stability_dnoidal_single_period_flags_the_unstable_pair() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(
        dir.path(),
        &["stability", "--family", "dnoidal", "--n", "64"],
    );
    assert_eq!(code(&o), 4);
    let doc = json(&dir.path().join("stability.json"));
    let cl = claims(&doc);
    assert!(cl
        .iter()
        .filter(|(c, _)| c.contains("closed-form"))
        .all(|(_, p)| *p));
    assert!(cl
        .iter()
        .filter(|(c, _)| c.contains("d''(c) > 0"))
        .all(|(_, p)| *p));
    assert!(cl
        .iter()
        .any(|(c, p)| c.contains("no eigenvalue with positive real part") && !*p));
    assert!(doc["results"]["d_second"]["rel_diff"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn evolve_stable_run_writes_series_and_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(
        dir.path(),
        &["evolve", "--n", "64", "--T", "2", "--observe-every", "50"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,E,F,dist");
    assert_eq!(csv.lines().count(), 1 + 1 + 2000 / 50);
    let gp = std::fs::read_to_string(dir.path().join("series.gp")).unwrap();
    assert!(gp.contains("exists(\"datafile\")") && gp.contains("logscale y"));
    assert!(!dir.path().join("growth.json").exists());
    let doc = json(&dir.path().join("evolve.json"));
    assert!(doc["all_passed"].as_bool().unwrap());
}

#[test]
fn evolve_unstable_mode_growth_matches_sigma() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(
        dir.path(),
        &["evolve", "--n", "64", "--double-domain", "--T", "60"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let g = json(&dir.path().join("growth.json"));
    assert!(g["rel_error"].as_f64().unwrap() < 0.1);
    assert!(g["fit"]["grew"].as_bool().unwrap());
}

#[test]
fn evolve_mode_without_instability_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = kgs(
        dir.path(),
        &["evolve", "--n", "64", "--perturb", "mode", "--T", "1"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no unstable mode"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"family": "dnoidal", "c": 0.5, "n": 32, "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = kgs(
        &out,
        &["wave", "--config", cfg.to_str().unwrap(), "--c", "0.35"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out.join("wave.json"));
    assert_eq!(doc["config"]["c"].as_f64().unwrap(), 0.35);
    assert_eq!(doc["config"]["n"], 32);
    assert_eq!(doc["config"]["seed"], 3);

    std::fs::write(&cfg, r#"{"family": "dnoidal", "speed": 0.5}"#).unwrap();
    assert_eq!(
        code(&kgs(&out, &["wave", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn runs_are_reproducible_and_manifest_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        assert_eq!(code(&kgs(d, &["wave", "--n", "32"])), 0);
        assert_eq!(
            code(&kgs(
                d,
                &["evolve", "--n", "32", "--T", "1", "--seed", "11"]
            )),
            0
        );
    }
    for f in ["wave.csv", "series.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    for f in ["wave.json", "evolve.json"] {
        assert_eq!(
            strip_volatile(json(&a.path().join(f))),
            strip_volatile(json(&b.path().join(f))),
            "{f}"
        );
    }

    assert_eq!(code(&kgs(a.path(), &["report"])), 0);
    let first = std::fs::read(a.path().join("manifest.json")).unwrap();
    assert_eq!(code(&kgs(a.path(), &["report"])), 0);
    assert_eq!(
        first,
        std::fs::read(a.path().join("manifest.json")).unwrap()
    );
    let m = json(&a.path().join("manifest.json"));
    let from_reports: usize = ["wave.json", "evolve.json"]
        .iter()
        .map(|f| json(&a.path().join(f))["claims"].as_array().unwrap().len())
        .sum();
    assert_eq!(m["claims_total"].as_u64().unwrap() as usize, from_reports);
    assert_eq!(m["verdicts"].as_array().unwrap().len(), from_reports);
}

#[test]
fn report_without_inputs_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&kgs(dir.path(), &["report"])), 2);
    assert_eq!(code(&kgs(&dir.path().join("missing"), &["report"])), 2);
}
