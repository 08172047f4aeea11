use std::fs;
use std::process::Command;

fn nail(args: &[&str], dir: &std::path::Path) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nail")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn synth_fit_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("spec.json"), r#"{"n": 40, "n_labels": 3, "k_true": 2, "view_dims": [4, 5], "noise_std": [0.05]}"#).unwrap();
    assert_eq!(nail(&["synth", "--synthetic", "spec.json", "--out", "data"], p).0, 0);
    let (code, out) = nail(
        &["fit", "--manifest", "data/manifest.json", "--variant", "NAIL-L", "--mask-r", "0.25", "--max-outer", "20", "--out", "fit"],
        p,
    );
    assert_eq!(code, 0);
    assert!(out.contains("hs="), "{out}");
    for f in ["scores.csv", "predictions.csv", "truth.csv", "embedding.csv", "trace.csv"] {
        assert!(p.join("fit").join(f).exists(), "{f}");
    }
    let (code, out) = nail(&["eval", "--truth", "fit/truth.csv", "--scores", "fit/scores.csv", "--predictions", "fit/predictions.csv"], p);
    assert_eq!(code, 0);
    let hs_fit = out.split("hs=").nth(1).unwrap().split_whitespace().next().unwrap().parse::<f64>().unwrap();
    assert!((0.0..=1.0).contains(&hs_fit));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(nail(&["fit", "--no-such-flag"], p).0, 1);
    assert_eq!(nail(&["sweep", "--repeats", "0"], p).0, 1);
    assert_eq!(nail(&["fit", "--lambda", "-1"], p).0, 1);
    assert_eq!(nail(&["fit", "--variant", "NAIL-7"], p).0, 1);
    assert_eq!(nail(&["fit", "--manifest", "missing.json"], p).0, 2);
    fs::write(p.join("truth.csv"), "1\nNaN\n0\n").unwrap();
    fs::write(p.join("s.csv"), "0.7\n0.1\n0.2\n").unwrap();
    let (code, out) = nail(&["eval", "--truth", "truth.csv", "--scores", "s.csv"], p);
    assert_eq!((code, out.trim()), (0, "hs=1 ap=1"));
    fs::write(p.join("bad.csv"), "0.5\n1\n0\n").unwrap();
    assert_eq!(nail(&["eval", "--truth", "bad.csv", "--scores", "s.csv"], p).0, 2);
    fs::write(p.join("wide.csv"), "0.5,0.1\n").unwrap();
    assert_eq!(nail(&["eval", "--truth", "truth.csv", "--scores", "wide.csv"], p).0, 2);
    let (code, _) = nail(&["fit", "--variant", "NAIL-2", "--lambda", "1e308", "--mask-r", "0.25", "--max-outer", "5", "--out", "o"], p);
    assert_eq!(code, 3);
    assert_eq!(nail(&["--help"], p).0, 0);
}

#[test]
fn sweep_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = r#"{
        "data": {"synthetic": {"n": 30, "n_labels": 3, "k_true": 2, "view_dims": [4, 5]}},
        "mask": {"r": 0.25, "s": 0.5},
        "variants": ["NAIL-L", "NAIL-3"],
        "lambda_grid": [1.0], "mu_grid": [0.1], "rk_grid": [0.5],
        "repeats": 3,
        "solver": {"max_outer": 5, "warm_start": 2}
    }"#;
    fs::write(p.join("cfg.json"), cfg).unwrap();
    let args = ["sweep", "--config", "cfg.json", "--repeats", "2", "--mu", "0.1,1", "--variant", "NAIL-3", "--workers", "1"];
    let (code, _) = nail(&[&args[..], &["--out", "a"]].concat(), p);
    assert_eq!(code, 0);
    let results = fs::read_to_string(p.join("a/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2);
    assert!(results.lines().skip(1).all(|l| l.starts_with("NAIL-3,")));
    assert_eq!(nail(&[&args[..], &["--out", "b"]].concat(), p).0, 0);
    assert_eq!(results, fs::read_to_string(p.join("b/results.csv")).unwrap());
}
