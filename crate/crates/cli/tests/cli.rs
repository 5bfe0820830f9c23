use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn crossing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossing"))
        .args(args)
        .env_remove("CROSSING_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = crossing(args);
    assert!(
        out.status.success(),
        "crossing {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Runs `synth` into a fresh directory and returns it with the manifest path.
fn synth(args: &[&str]) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut all = vec!["synth", "--out", p(dir.path())];
    all.extend_from_slice(args);
    ok(&all);
    let manifest = dir.path().join("manifest.toml");
    (dir, manifest)
}

fn labels_in(dir: &Path, stem: &str) -> Vec<String> {
    fs::read_to_string(dir.join(format!("{stem}.labels.csv")))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("start_s"))
        .map(|l| l.rsplit(',').next().unwrap().to_string())
        .collect()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn synth_clear_road_is_all_safe() {
    let (dir, manifest) = synth(&["clear_road"]);
    let text = fs::read_to_string(&manifest).unwrap();
    assert_eq!(text.matches("[[entry]]").count(), 1);
    let labels = labels_in(dir.path(), "clear_road");
    assert_eq!(labels, ["1", "1"]);
}

#[test]
fn synth_fast_approach_has_an_unsafe_window() {
    let (dir, _) = synth(&["fast_approach"]);
    assert!(labels_in(dir.path(), "fast_approach").contains(&"0".to_string()));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = crossing(&["synth", "nosuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch"));
}

#[test]
fn synthetic_logs_are_deterministic() {
    let (a, _) = synth(&["all", "--seed", "4"]);
    let (b, _) = synth(&["all", "--seed", "4"]);
    let (c, _) = synth(&["all", "--seed", "5"]);
    let read = |d: &TempDir| fs::read(d.path().join("two_lane_mixed.tracks.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        fs::read(a.path().join("manifest.toml")).unwrap(),
        fs::read(b.path().join("manifest.toml")).unwrap()
    );
}

#[test]
fn forest_model_reloads_to_identical_predictions() {
    let (dir, manifest) = synth(&["two_lane_mixed"]);
    let model = dir.path().join("model.txt");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "forest",
        "--set",
        "min_samples=2",
        "--out",
        p(&model),
    ]);
    let pred = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "predict",
            "--manifest",
            p(&manifest),
            "--model",
            p(&model),
            "--out",
            p(&out),
        ]);
        fs::read_to_string(out).unwrap()
    };
    let first = pred("a.csv");
    assert_eq!(first, pred("b.csv"));
    let rows: Vec<&str> = first.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "index,site,start_s,end_s,truth,pred");
    assert_eq!(rows.len(), 1 + 6);
    // fitted on every window with tiny leaves: it reproduces the labels
    for r in &rows[1..] {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[4], f[5], "{r}");
    }
}

#[test]
fn same_seed_same_model_file() {
    let (dir, manifest) = synth(&["all"]);
    let train = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&[
            "train",
            "--manifest",
            p(&manifest),
            "--seed",
            seed,
            "--out",
            p(&out),
        ]);
        fs::read(out).unwrap()
    };
    let a = train("a.txt", "1");
    assert_eq!(a, train("b.txt", "1"));
    assert_ne!(a, train("c.txt", "2"));
    assert!(a.starts_with(b"CROSSING-MODEL\nversion=1\nkind=forest\n"));
}

#[test]
fn svm_summary_reports_convergence() {
    let (dir, manifest) = synth(&["all"]);
    let out = ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "svm",
        "--out",
        p(&dir.path().join("svm.txt")),
    ]);
    assert!(
        out.contains("converged  : yes") || out.contains("converged  : no"),
        "{out}"
    );
    let model = fs::read_to_string(dir.path().join("svm.txt")).unwrap();
    assert!(model.contains("meta.train.converged="));
}

#[test]
fn baseline_is_exact_on_constant_scenarios() {
    let (dir, manifest) = synth(&["fast_approach", "slow_far"]);
    let model = dir.path().join("ttc.txt");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "baseline",
        "--out",
        p(&model),
    ]);
    let eval = dir.path().join("eval");
    let table = ok(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--out",
        p(&eval),
    ]);
    assert_eq!(report(&eval)["accuracy"], 1.0, "{table}");
    let confusion = fs::read_to_string(eval.join("confusion.csv")).unwrap();
    assert!(confusion.contains("unsafe,1,0\nsafe,0,2\n"), "{confusion}");
}

#[test]
fn empty_test_part_fails() {
    let (dir, manifest) = synth(&["fast_approach"]);
    let model = dir.path().join("m.txt");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "baseline",
        "--out",
        p(&model),
    ]);
    let out = crossing(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--split",
        "sites:synthetic:elsewhere",
        "--out",
        p(dir.path()),
    ]);
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn bad_override_and_shape_mismatch_exit_codes() {
    let (dir, manifest) = synth(&["fast_approach"]);
    let out = crossing(&["train", "--manifest", p(&manifest), "--set", "n_trees=-1"]);
    assert_eq!(out.status.code(), Some(2));
    let model = dir.path().join("m.txt");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "knn",
        "--set",
        "k=1",
        "--out",
        p(&model),
    ]);
    let out = crossing(&[
        "predict",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--m",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

/// Builds one manifest over a random mixed training site plus the
/// `decelerating_yield` scenario as the held-out site.
fn yield_dataset() -> (TempDir, PathBuf) {
    let (dir, _) = synth(&[
        "--random", "300", "--sites", "train", "--mix", "mixed", "--seed", "3",
    ]);
    ok(&[
        "synth",
        "decelerating_yield",
        "--out",
        p(&dir.path().join("held")),
    ]);
    let manifest = dir.path().join("combined.toml");
    fs::write(
        &manifest,
        "[[entry]]\ntracks = \"train.tracks.csv\"\nannotations = \"train.labels.csv\"\nsite = \"train\"\n\n\
         [[entry]]\ntracks = \"held/decelerating_yield.tracks.csv\"\nannotations = \"held/decelerating_yield.labels.csv\"\nsite = \"synthetic\"\n",
    )
    .unwrap();
    (dir, manifest)
}

#[test]
fn forest_recalls_yields_the_baseline_misses() {
    let (dir, manifest) = yield_dataset();
    let split = "sites:train:synthetic";
    let mut recall = Vec::new();
    for c in ["forest", "baseline"] {
        let model = dir.path().join(format!("{c}.txt"));
        ok(&[
            "train",
            "--manifest",
            p(&manifest),
            "--classifier",
            c,
            "--split",
            split,
            "--seed",
            "3",
            "--out",
            p(&model),
        ]);
        let out = dir.path().join(c);
        ok(&[
            "evaluate",
            "--manifest",
            p(&manifest),
            "--model",
            p(&model),
            "--split",
            split,
            "--out",
            p(&out),
        ]);
        recall.push(report(&out)["recall"].as_f64().unwrap_or(0.0));
    }
    assert!(
        recall[0] > recall[1],
        "forest {} vs baseline {}",
        recall[0],
        recall[1]
    );
}

#[test]
fn site_leak_is_refused() {
    let (dir, manifest) = yield_dataset();
    let model = dir.path().join("m.txt");
    let out = crossing(&[
        "train",
        "--manifest",
        p(&manifest),
        "--split",
        "sites:train,synthetic:train",
    ]);
    assert_eq!(out.status.code(), Some(2));
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--classifier",
        "baseline",
        "--split",
        "sites:synthetic:train",
        "--out",
        p(&model),
    ]);
    // scoring on the site the model was trained on
    let out = crossing(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--split",
        "sites:train:synthetic",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("synthetic"));
}

fn cv(dir: &Path, manifest: &Path, grid: &str, out: &str) -> String {
    // the grid path is part of the provenance header, so keep it fixed
    let g = dir.join("grid.toml");
    fs::write(&g, grid).unwrap();
    let o = dir.join(out);
    ok(&[
        "cv",
        "--manifest",
        p(manifest),
        "--grid",
        p(&g),
        "--seed",
        "2",
        "--folds",
        "3",
        "--out",
        p(&o),
    ]);
    fs::read_to_string(o.join("cv_table.csv")).unwrap()
}

#[test]
fn single_config_grid_is_one_stable_row() {
    let (dir, manifest) = synth(&["--random", "60", "--mix", "constant"]);
    let grid = "[knn]\nk = [3]\n";
    let a = cv(dir.path(), &manifest, grid, "a");
    assert_eq!(a, cv(dir.path(), &manifest, grid, "b"));
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2, "{a}");
    assert!(rows[1].starts_with("1,0,"));
}

#[test]
fn ttc_grid_selects_ten_seconds() {
    let (dir, manifest) = synth(&["--random", "80", "--mix", "constant"]);
    let table = cv(
        dir.path(),
        &manifest,
        "[baseline]\nttc_threshold = [1.0, 10.0]\n",
        "ttc",
    );
    let best = fs::read_to_string(dir.path().join("ttc").join("best_config.toml")).unwrap();
    assert!(best.contains("ttc_threshold = 10.0"), "{table}\n{best}");
    // the selected config feeds straight back into train
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--config",
        p(&dir.path().join("ttc").join("best_config.toml")),
        "--out",
        p(&dir.path().join("best.txt")),
    ]);
    let model = fs::read_to_string(dir.path().join("best.txt")).unwrap();
    assert!(model.contains("kind=baseline"));
}

#[test]
fn dataset_info_summarizes_sites() {
    let (_dir, manifest) = synth(&["--random", "20", "--sites", "a,b"]);
    let out = ok(&["dataset-info", "--manifest", p(&manifest)]);
    assert!(out.contains("samples  : 40"), "{out}");
    assert!(out.contains("unsafe:safe"));
}

#[test]
fn full_pipeline_under_two_minutes() {
    let t0 = Instant::now();
    let (dir, manifest) = synth(&["--random", "200", "--sites", "n,e,s", "--mix", "mixed"]);
    let d = dir.path();
    ok(&[
        "featurize",
        "--manifest",
        p(&manifest),
        "--out",
        p(&d.join("features.csv")),
    ]);
    let model = d.join("model.txt");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--split",
        "sites:e,n:s",
        "--out",
        p(&model),
    ]);
    ok(&[
        "predict",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--out",
        p(&d.join("pred.csv")),
    ]);
    ok(&[
        "evaluate",
        "--manifest",
        p(&manifest),
        "--model",
        p(&model),
        "--split",
        "sites:e,n:s",
        "--out",
        p(&d.join("eval")),
    ]);
    cv(
        d,
        &manifest,
        "[forest]\nn_trees = [20, 50]\n[knn]\nk = [8]\n",
        "cv",
    );
    let r = report(&d.join("eval"));
    assert!(r["accuracy"].as_f64().unwrap() > 0.8, "{r}");
    assert!(t0.elapsed().as_secs() < 120, "{:?}", t0.elapsed());
}

#[test]
fn out_dir_env_is_the_default_destination() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_crossing"))
        .args(["synth", "clear_road"])
        .env("CROSSING_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("manifest.toml").is_file());
}
