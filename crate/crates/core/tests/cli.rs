use std::path::Path;
use std::process::{Command, Output};

fn dynlfm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynlfm"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DYNLFM_OUTPUT_ROOT")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(dynlfm(&["generate", "--preset", "cambridge-bars", "--seed", "7", "-o", "a"], d));
    ok(dynlfm(&["generate", "--preset", "cambridge-bars", "--seed", "7", "-o", "b"], d));
    ok(dynlfm(&["generate", "--seed", "8", "-o", "c"], d));
    for f in ["data.csv", "truth.csv", "features.csv", "lifetimes.csv", "test_rows.csv", "manifest.json"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
    assert_ne!(read(d.join("a/data.csv")), read(d.join("c/data.csv")));
    let data = dynlfm::io::load_csv(d.join("a/data.csv")).unwrap();
    assert_eq!((data.n_rows(), data.n_dims()), (500, 36));
    assert_eq!(data.masked_cells().len(), 50 * 30);
}

#[test]
fn fit_impute_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(dynlfm(&["generate", "--seed", "1", "--n-obs", "60", "-o", "gen"], d));
    ok(dynlfm(
        &[
            "fit", "--model", "dynamic-weighted", "--regime", "full-nonparametric", "--iters", "40",
            "--burn-in", "20", "--seed", "2", "gen/data.csv", "-o", "fit",
        ],
        d,
    ));
    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("fit/manifest.json"))).unwrap();
    assert_eq!(manifest["n_kept"], 20);
    assert_eq!(manifest["model"], "dynamic-weighted");
    for f in manifest["files"].as_array().unwrap() {
        assert!(d.join("fit").join(f.as_str().unwrap()).exists());
    }

    ok(dynlfm(&["impute", "--trace", "fit", "-o", "completed.csv"], d));
    let completed = dynlfm::io::load_csv(d.join("completed.csv")).unwrap();
    let original = dynlfm::io::load_csv(d.join("gen/data.csv")).unwrap();
    assert_eq!(completed.n_observed(), 60 * 36);
    for i in 0..60 {
        for j in 0..36 {
            if let Some(v) = original.value(i, j) {
                assert_eq!(completed.value(i, j), Some(v));
            }
        }
    }

    let out = ok(dynlfm(&["evaluate", "--trace", "fit", "--truth", "gen/truth.csv", "-o", "eval"], d));
    assert!(String::from_utf8_lossy(&out.stdout).contains("MSE"));
    let report: serde_json::Value = serde_json::from_str(&read(d.join("eval/report.json"))).unwrap();
    assert!(report["mse_mean"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["n_trials"], 1);
    for f in ["feature_images.csv", "feature_usage.csv", "instance_heatmap.csv", "summary.json"] {
        assert!(d.join("eval").join(f).exists(), "{f}");
    }
    let heat = read(d.join("eval/instance_heatmap.csv"));
    assert_eq!(heat.lines().count(), 61);
}

#[test]
fn multiple_chains_and_preprocessing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(dynlfm(&["generate", "--seed", "3", "--n-obs", "40", "-o", "gen"], d));
    ok(dynlfm(
        &[
            "fit", "--chains", "2", "--iters", "20", "--burn-in", "5", "--k-max", "6",
            "--preprocess", "standardize,subtract-min", "gen/data.csv", "-o", "fit",
        ],
        d,
    ));
    let a = read(d.join("fit/chain-0/log_joint.csv"));
    let b = read(d.join("fit/chain-1/log_joint.csv"));
    assert_ne!(a, b);
    ok(dynlfm(&["evaluate", "--trace", "fit", "--truth", "gen/truth.csv", "-o", "eval"], d));
    let report: serde_json::Value = serde_json::from_str(&read(d.join("eval/report.json"))).unwrap();
    assert_eq!(report["n_trials"], 2);
}

#[test]
fn config_file_and_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(dynlfm(&["generate", "--seed", "4", "--n-obs", "30", "-o", "gen"], d));
    std::fs::write(
        d.join("run.conf"),
        "[model]\nkind = static\n[sampler]\niters = 12\nburn_in = 2\nk_max = 5\n[data]\ninput = gen/data.csv\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dynlfm"))
        .args(["fit", "--config", "run.conf", "--iters", "15", "-o", "fit"])
        .current_dir(d)
        .env("DYNLFM_OUTPUT_ROOT", d.join("root"))
        .output()
        .unwrap();
    ok(out);
    let manifest: serde_json::Value = serde_json::from_str(&read(d.join("root/fit/manifest.json"))).unwrap();
    assert_eq!(manifest["model"], "static");
    assert_eq!(manifest["n_kept"], 13);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(!dynlfm(&["fit", "--bogus"], d).status.success());
    assert!(!dynlfm(&["fit", "missing.csv"], d).status.success());
    assert!(!dynlfm(&["fit", "--config", "missing.conf"], d).status.success());
    assert!(!dynlfm(&["frobnicate"], d).status.success());
    std::fs::write(d.join("bad.csv"), "1,2\n3,oops\n").unwrap();
    let out = dynlfm(&["fit", "bad.csv"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 2"));
}
