use std::collections::HashMap;
use std::fs;

use nail::config::{DataSource, SyntheticConfig};
use nail::harness::run_experiment_on;
use nail::report::{results_csv, summary_csv, summary_json};
use nail::{emit_report, run_experiment, ExperimentConfig, RunStatus, VariantName};
use nail_core::Variant;

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data = DataSource::Synthetic(SyntheticConfig {
        n: 24,
        n_labels: 3,
        k_true: 2,
        view_dims: vec![4, 5],
        noise_std: vec![0.05],
        positive_rate: 0.4,
        ..SyntheticConfig::default()
    });
    cfg.mask.r = 0.25;
    cfg.variants = vec![VariantName(Variant::NailL), VariantName(Variant::Nail3)];
    cfg.lambda_grid = vec![1.0];
    cfg.mu_grid = vec![0.1];
    cfg.rk_grid = vec![0.5];
    cfg.repeats = 1;
    cfg.solver.max_outer = 3;
    cfg.solver.warm_start = 2;
    cfg.solver.embed_steps = 5;
    cfg.workers = 2;
    cfg
}

#[test]
fn single_cell_gives_one_row_per_variant() {
    let report = run_experiment(&tiny()).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.summary.len(), 2);
    assert_eq!(report.best.len(), 2);
    assert_eq!(results_csv(&report).lines().count(), 3);
}

#[test]
fn full_grid_gives_588_rows() {
    let mut cfg = tiny();
    cfg.lambda_grid = nail::config::default_grid();
    cfg.mu_grid = nail::config::default_grid();
    cfg.rk_grid = vec![0.2, 0.5, 0.8];
    cfg.repeats = 2;
    cfg.solver.max_outer = 1;
    cfg.solver.warm_start = 0;
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.runs.len(), 588);
    assert_eq!(report.summary.len(), 2 * 147);
    assert!(report.summary.iter().all(|s| s.runs == 2));
    assert_eq!(results_csv(&report).lines().count(), 589);
    assert_eq!(summary_csv(&report).lines().count(), 295);
}

#[test]
fn reports_are_byte_identical_across_runs_and_worker_counts() {
    let mut cfg = tiny();
    cfg.mu_grid = vec![0.1, 1.0];
    cfg.repeats = 3;
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip([1, 3]) {
        cfg.workers = workers;
        let report = run_experiment(&cfg).unwrap();
        emit_report(&report, dir.path()).unwrap();
    }
    for file in ["results.csv", "summary.csv", "curves.csv"] {
        let a = fs::read(dirs[0].path().join(file)).unwrap();
        let b = fs::read(dirs[1].path().join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let strip_workers = |v: serde_json::Value| {
        let mut v = v;
        v["config"]["workers"] = serde_json::Value::Null;
        v
    };
    let json = |d: &tempfile::TempDir| strip_workers(serde_json::from_slice(&fs::read(d.path().join("summary.json")).unwrap()).unwrap());
    assert_eq!(json(&dirs[0]), json(&dirs[1]));
    assert!(dirs[0].path().join("timings.csv").exists());
}

#[test]
fn dropping_a_variant_leaves_other_rows_unchanged() {
    let mut cfg = tiny();
    cfg.repeats = 2;
    let both = results_csv(&run_experiment(&cfg).unwrap());
    cfg.variants = vec![VariantName(Variant::Nail3)];
    let one = results_csv(&run_experiment(&cfg).unwrap());
    let nail3: Vec<&str> = both.lines().filter(|l| l.starts_with("NAIL-3,")).collect();
    let only: Vec<&str> = one.lines().skip(1).collect();
    assert_eq!(nail3, only);
}

#[test]
fn summary_matches_aggregates_of_results() {
    let mut cfg = tiny();
    cfg.mu_grid = vec![0.1, 10.0];
    cfg.repeats = 4;
    let report = run_experiment(&cfg).unwrap();
    let results = results_csv(&report);
    let mut header = results.lines().next().unwrap().split(',');
    let col = |name: &str| header.clone().position(|h| h == name).unwrap();
    let (hs, ap, val) = (col("hs"), col("ap"), col("val_ap"));
    let _ = header.next();
    let mut groups: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    for line in results.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[6], "ok");
        let key = f[..4].join(",");
        groups.entry(key).or_default().push([hs, ap, val].iter().map(|&c| f[c].parse().unwrap()).collect());
    }
    let summary = summary_csv(&report);
    assert_eq!(summary.lines().count() - 1, groups.len());
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let rows = &groups[&f[..4].join(",")];
        assert_eq!(f[4].parse::<usize>().unwrap(), rows.len());
        for metric in 0..3 {
            let xs: Vec<f64> = rows.iter().map(|r| r[metric]).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let got_mean: f64 = f[6 + 2 * metric].parse().unwrap();
            let got_std: f64 = f[7 + 2 * metric].parse().unwrap();
            assert!((got_mean - mean).abs() <= 1e-12, "{line}");
            assert!((got_std - std).abs() <= 1e-12, "{line}");
            assert!(got_std >= 0.0);
        }
    }
}

#[test]
fn summary_json_round_trips() {
    let report = run_experiment(&tiny()).unwrap();
    let text = summary_json(&report);
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(value, again);
    let config: ExperimentConfig = serde_json::from_value(value["config"].clone()).unwrap();
    assert_eq!(config, report.config);
    assert_eq!(value["best"].as_array().unwrap().len(), 2);
}

#[test]
fn divergence_is_recorded_per_run() {
    let mut cfg = tiny();
    cfg.variants = vec![VariantName(Variant::Nail2)];
    cfg.lambda_grid = vec![1.0, 1e308];
    let ds = nail::harness::load_data(&cfg).unwrap();
    let report = run_experiment_on(&ds, &cfg).unwrap();
    assert_eq!(report.runs.len(), 2);
    assert_eq!(report.runs[0].status, RunStatus::Ok);
    assert_eq!(report.runs[1].status, RunStatus::Diverged);
    assert_eq!(report.summary[1].ok, 0);
    assert_eq!(report.best, vec![0]);
}
