use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use casemix_core::metrics::{RocCurve, RocPoint};
use serde_json::Value;

fn casemix(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casemix"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("CASEMIX_SEED")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = casemix(out, args);
    assert!(
        o.status.success(),
        "casemix {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_rows(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
        .collect()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        ok(d.path(), &["--seed", "7", "simulate", "--task", "prognosis", "--env", "screening", "--n", "1000"]);
    }
    let fa = std::fs::read(a.path().join("prognosis_screening.csv")).unwrap();
    let fb = std::fs::read(b.path().join("prognosis_screening.csv")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(fa.iter().filter(|&&c| c == b'\n').count(), 1001);
}

#[test]
fn seed_falls_back_to_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(a.path(), &["--seed", "11", "simulate", "--n", "50"]);
    let o = Command::new(env!("CARGO_BIN_EXE_casemix"))
        .arg("--out")
        .arg(b.path())
        .args(["simulate", "--n", "50"])
        .env("CASEMIX_SEED", "11")
        .output()
        .unwrap();
    assert!(o.status.success());
    let name = "prognosis_screening.csv";
    assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
}

#[test]
fn simulate_reports_prevalence() {
    let d = tempfile::tempdir().unwrap();
    let text = ok(d.path(), &["simulate", "--task", "diagnosis", "--env", "hospital", "--n", "100000"]);
    let prevalence: f64 = text.split("prevalence=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!((prevalence - 0.5).abs() < 0.005, "{text}");
}

#[test]
fn configuration_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let o = casemix(d.path(), &["simulate", "--env", "icu"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("icu"));

    let cfg = d.path().join("bad.json");
    std::fs::write(&cfg, r#"{"n_train": 1}"#).unwrap();
    let o = casemix(d.path(), &["--config", cfg.to_str().unwrap(), "densities"]);
    assert_eq!(o.status.code(), Some(2));

    assert_eq!(casemix(d.path(), &["--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn config_file_overrides_environments() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"direction": "anti-causal", "train_env": "icu", "n_eval": 20000,
            "environments": {"diagnosis": [{"label": "icu", "prevalence": 0.9}]}}"#,
    )
    .unwrap();
    let text = ok(d.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(text.starts_with("diagnosis icu: n=20000"), "{text}");
}

#[test]
fn missing_input_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = casemix(d.path(), &["empirical", "--csv", "/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here.csv"));
}

#[test]
fn empirical_equal_groups_and_format_errors() {
    let d = tempfile::tempdir().unwrap();
    let csv = d.path().join("v.csv");
    let mut body = String::from("model_id,model_type,auc_original,auc_validation\n");
    let drops = [0.70, 0.74, 0.76, 0.71, 0.79, 0.73];
    for (i, v) in drops.iter().enumerate() {
        body.push_str(&format!("p{i},prognostic,0.8,{v}\n"));
        body.push_str(&format!("d{i},Diagnostic,0.8,{v}\n"));
    }
    body.push_str("z,prognostic,0.5,0.6\n");
    std::fs::write(&csv, &body).unwrap();
    ok(d.path(), &["empirical", "--csv", csv.to_str().unwrap()]);
    let j = read_json(d.path().join("empirical.json"));
    assert!((j["ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(j["excluded_rows"], 1);
    assert_eq!(j["deltas"].as_array().unwrap().len(), 13);

    std::fs::write(&csv, format!("{body}q,prognostic,oops,0.7\n")).unwrap();
    let o = casemix(d.path(), &["empirical", "--strict", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 15"), "{}", String::from_utf8_lossy(&o.stderr));
    ok(d.path(), &["empirical", "--csv", csv.to_str().unwrap()]);
    let j = read_json(d.path().join("empirical.json"));
    assert_eq!(j["rejected_rows"][0]["line"], 15);
}

#[test]
fn theorems_pass_and_negative_controls_fail() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["theorems", "--n-cases", "500"]);
    let j = read_json(d.path().join("theorems.json"));
    assert_eq!(j["all_pass"], true);
    for key in ["calibration", "discrimination"] {
        assert_eq!(j[key]["n_pass"], 500);
        assert!(j[key]["max_abs_diff"].as_f64().unwrap() <= 1e-12);
    }
    assert!(j["smoke"].as_array().unwrap().iter().all(|c| c["pass"] == true));

    for which in ["x", "y"] {
        let o = casemix(d.path(), &["theorems", "--n-cases", "50", "--corrupt-shift", which]);
        assert_eq!(o.status.code(), Some(1), "corrupt {which}");
        assert_eq!(read_json(d.path().join("theorems.json"))["all_pass"], false);
    }
}

#[test]
fn densities_match_closed_forms() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["densities"]);
    let beta = read_rows(&d.path().join("density_beta.csv"));
    assert_eq!(beta.len(), 10_001);
    for col in 1..=3 {
        let integral: f64 = beta.windows(2).map(|w| 0.5 * (w[1][0] - w[0][0]) * (w[0][col] + w[1][col])).sum();
        assert!((integral - 1.0).abs() < 1e-6, "column {col}: {integral}");
    }

    let class = read_rows(&d.path().join("density_x_given_y.csv"));
    let peak = class.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!((peak[0] - 1.0).abs() < 1e-9);

    let posterior = read_rows(&d.path().join("risk_given_x.csv"));
    let at_half = posterior.iter().find(|r| (r[0] - 0.5).abs() < 1e-9).unwrap();
    // columns: x, prognosis, diagnosis screening/gp/hospital, fork ...
    assert!((at_half[4] - 0.5).abs() < 1e-12);

    let prevalence = std::fs::read_to_string(d.path().join("prevalence.csv")).unwrap();
    assert!(prevalence.contains("diagnosis,hospital,0.5\n"));
}

fn roc_from_csv(path: &Path) -> RocCurve {
    RocCurve {
        points: read_rows(path)
            .into_iter()
            .map(|r| RocPoint { fpr: r[0], tpr: r[1], threshold: r[2] })
            .collect(),
    }
}

/// (mean_predicted, observed_rate, count) rows.
fn calibration_from_csv(path: &Path) -> Vec<(f64, f64, f64)> {
    read_rows(path).into_iter().map(|r| (r[0], r[1], r[2])).collect()
}

fn interpolate(curve: &[(f64, f64, f64)], p: f64) -> Option<(f64, f64)> {
    let i = curve.windows(2).position(|w| w[0].0 <= p && p <= w[1].0)?;
    let (a, b) = (curve[i], curve[i + 1]);
    let t = (p - a.0) / (b.0 - a.0);
    let se = |c: (f64, f64, f64)| (c.1 * (1.0 - c.1) / c.2).sqrt();
    Some((a.1 + t * (b.1 - a.1), se(a).max(se(b))))
}

fn default_grid() -> (tempfile::TempDir, Vec<Value>) {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["grid"]);
    let rows = read_json(d.path().join("grid.json"))["rows"].as_array().unwrap().clone();
    (d, rows)
}

fn spread_by_train_env(rows: &[Value], task: &str, field: &str) -> Vec<(String, f64)> {
    ["screening", "gp", "hospital"]
        .iter()
        .map(|train| {
            let v: Vec<f64> = rows
                .iter()
                .filter(|r| r["task"] == task && r["train_env"] == *train)
                .map(|r| r[field].as_f64().unwrap())
                .collect();
            assert_eq!(v.len(), 3);
            let hi = v.iter().cloned().fold(f64::MIN, f64::max);
            let lo = v.iter().cloned().fold(f64::MAX, f64::min);
            (train.to_string(), hi - lo)
        })
        .collect()
}

#[test]
fn grid_has_eighteen_rows_and_is_reproducible() {
    let (d, rows) = default_grid();
    assert_eq!(rows.len(), 18);
    let csv_rows = std::fs::read_to_string(d.path().join("grid.csv")).unwrap().lines().count();
    assert_eq!(csv_rows, 19);
    let e = tempfile::tempdir().unwrap();
    ok(e.path(), &["grid"]);
    assert_eq!(
        std::fs::read(d.path().join("grid.json")).unwrap(),
        std::fs::read(e.path().join("grid.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(d.path().join("grid.csv")).unwrap(),
        std::fs::read(e.path().join("grid.csv")).unwrap()
    );
}

#[test]
fn grid_diagnosis_auc_is_flat_across_eval_envs() {
    let (_d, rows) = default_grid();
    for (train, spread) in spread_by_train_env(&rows, "diagnosis", "auc") {
        assert!(spread <= 0.01, "diagnosis AUC spread {spread} for {train}");
    }
}

#[test]
fn grid_prognosis_ici_is_flat_across_eval_envs() {
    let (_d, rows) = default_grid();
    for (train, spread) in spread_by_train_env(&rows, "prognosis", "ici") {
        assert!(spread <= 0.01, "prognosis ICI spread {spread} for {train}");
    }
}

#[test]
fn curves_overlay_where_the_theory_says() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["curves"]);
    let curves = d.path().join("curves");
    assert_eq!(std::fs::read_dir(&curves).unwrap().count(), 36);
    let envs = ["screening", "gp", "hospital"];
    for train in envs {
        let rocs: Vec<RocCurve> = envs
            .iter()
            .map(|e| roc_from_csv(&curves.join(format!("roc_diagnosis_{train}_{e}.csv"))))
            .collect();
        for roc in &rocs {
            assert!(roc.points.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr));
        }
        let sup = (0..=200)
            .map(|k| {
                let f = k as f64 / 200.0;
                let v: Vec<f64> = rocs.iter().map(|r| r.tpr_at(f)).collect();
                v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        assert!(sup <= 0.02, "diagnosis ROC sup-norm gap {sup} for {train}");

        let cals: Vec<Vec<(f64, f64, f64)>> = envs
            .iter()
            .map(|e| calibration_from_csv(&curves.join(format!("calibration_prognosis_{train}_{e}.csv"))))
            .collect();
        for cal in &cals {
            assert_eq!(cal.iter().map(|b| b.2).sum::<f64>(), 200_000.0);
        }
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                for bin in &cals[b] {
                    if let Some((rate, se_a)) = interpolate(&cals[a], bin.0) {
                        let se_b = (bin.1 * (1.0 - bin.1) / bin.2).sqrt();
                        let z = (rate - bin.1).abs() / (se_a * se_a + se_b * se_b).sqrt();
                        assert!(z <= 3.0, "prognosis calibration gap {z} SE ({train}: {} vs {})", envs[a], envs[b]);
                    }
                }
            }
        }
    }
}
