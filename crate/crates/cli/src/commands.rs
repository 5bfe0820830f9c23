use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crossing_core::classifiers::{ModelError, TrainedModel};
use crossing_core::domain::{FeatureShape, Label};
use crossing_core::eval::{evaluate as score, grid_search, Corpus, EvalError, GridFile};
use crossing_core::features::write_feature_csv;
use crossing_core::ingest::{write_annotations, write_tracks, DatasetManifest, ManifestEntry};
use crossing_core::synth::{
    concat_runs, library_scenario, random_corpus, scenario_library, simulate, simulate_all,
    CorpusConfig, Scenario, SensorModel, SimulationRun, TrafficMix,
};

use crate::config::{self, out_dir, ConfigFile, RunConfig, SplitSpec};
use crate::error::{data, usage, CliResult, Failure};
use crate::{
    CvArgs, DataArgs, EvaluateArgs, FeaturizeArgs, InfoArgs, PredictArgs, SynthArgs, TrainArgs,
};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::from(e).context(format!("creating {}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| Failure::from(e).context(format!("writing {}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::from(e).context(format!("creating {}", path.display())))
}

fn load_corpus(manifest: &Path, shape: FeatureShape) -> CliResult<Corpus> {
    let m = DatasetManifest::load(manifest)
        .map_err(|e| Failure::from(e).context(format!("manifest {}", manifest.display())))?;
    Ok(Corpus::new(m.load_samples()?, shape))
}

/// The model fixes the shape; explicit `--m/--k` must agree with it.
fn model_shape(d: &DataArgs, model: &TrainedModel) -> CliResult<FeatureShape> {
    let expected = model.shape;
    let found = FeatureShape::new(
        d.m.unwrap_or(expected.max_objects()),
        d.k.unwrap_or(expected.timesteps()),
    )?;
    if found != expected {
        return Err(ModelError::ShapeMismatch { expected, found }.into());
    }
    Ok(expected)
}

fn load_model(path: &Path) -> CliResult<TrainedModel> {
    TrainedModel::load(path)
        .map_err(|e| Failure::from(e).context(format!("model {}", path.display())))
}

fn label_counts(labels: &[Label]) -> (usize, usize) {
    let safe = labels.iter().filter(|l| l.is_safe()).count();
    (labels.len() - safe, safe)
}

fn label_string(labels: &[Label]) -> String {
    labels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_run_files(
    dir: &Path,
    stem: &str,
    run: &SimulationRun,
    header: &RunConfig,
    date: &str,
) -> CliResult<ManifestEntry> {
    let tracks = PathBuf::from(format!("{stem}.tracks.csv"));
    let labels = PathBuf::from(format!("{stem}.labels.csv"));
    let mut h = header.clone();
    h.set("scenario", &run.scenario);
    write_tracks(create(&dir.join(&tracks))?, &run.records, &h.lines())?;
    write_annotations(create(&dir.join(&labels))?, &run.annotations, &h.lines())?;
    Ok(ManifestEntry {
        tracks,
        annotations: labels,
        site: run.site_id.clone(),
        date: date.to_string(),
    })
}

fn resolve_scenario(name: &str, seed: u64) -> CliResult<Scenario> {
    let path = Path::new(name);
    if name.ends_with(".toml") || path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::from(e).context(format!("scenario file {name}")))?;
        return Scenario::from_toml_str(&text)
            .map_err(|e| Failure::from(e).context(format!("scenario file {name}")));
    }
    Ok(library_scenario(name)?.with_seed(seed))
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    if a.list {
        for s in scenario_library() {
            println!(
                "{:<20} {:>5} s  {} vehicle(s)",
                s.name,
                s.episode_length,
                s.vehicles.len()
            );
        }
        return Ok(());
    }
    let dir = out_dir(a.out.as_deref());
    let sensor = if a.noise_free {
        SensorModel::noise_free()
    } else {
        SensorModel::default()
    };
    let mut header = RunConfig::new("synth");
    header.set("seed", a.seed).set("noise_free", a.noise_free);
    let mut manifest = DatasetManifest::default();

    if let Some(n) = a.random {
        if !a.scenarios.is_empty() {
            return Err(usage("give either scenario names or --random, not both"));
        }
        let mix = match a.mix.as_str() {
            "constant" => TrafficMix::constant_only(),
            "mixed" => TrafficMix::mixed(),
            other => return Err(usage(format!("unknown mix `{other}` (constant, mixed)"))),
        };
        let sites: Vec<&String> = a.sites.iter().filter(|s| !s.is_empty()).collect();
        if n == 0 || sites.is_empty() {
            return Err(usage(
                "--random needs a positive count and at least one site",
            ));
        }
        header
            .set("random", n)
            .set("mix", &a.mix)
            .set("sites", a.sites.join(","));
        for (i, site) in sites.iter().enumerate() {
            let cfg = CorpusConfig {
                windows: n,
                seed: a.seed.wrapping_add((i as u64) << 32),
                site_id: site.to_string(),
                mix: mix.clone(),
                sensor: sensor.clone(),
                ..Default::default()
            };
            let scenarios = random_corpus(&cfg);
            let runs = simulate_all(&scenarios)?;
            let lengths: Vec<f64> = scenarios.iter().map(|s| s.episode_length).collect();
            let joined = concat_runs(site, site, &runs, &lengths, 1000)?;
            let (u, s) = label_counts(&joined.labels());
            println!("{site}: {n} windows, {u} unsafe / {s} safe");
            manifest
                .entries
                .push(write_run_files(&dir, site, &joined, &header, "synthetic")?);
        }
    } else {
        if a.scenarios.is_empty() {
            return Err(usage(
                "no scenarios given; name some, use `all`, or pass --random N",
            ));
        }
        let mut names = Vec::new();
        for s in &a.scenarios {
            if s == "all" {
                names.extend(scenario_library().into_iter().map(|s| s.name));
            } else {
                names.push(s.clone());
            }
        }
        let mut seen = BTreeSet::new();
        let mut scenarios = Vec::new();
        for name in &names {
            let mut sc = resolve_scenario(name, a.seed)?;
            if a.noise_free {
                sc.sensor = sensor.clone();
            }
            if !seen.insert(sc.name.clone()) {
                return Err(usage(format!("scenario `{}` given twice", sc.name)));
            }
            scenarios.push(sc);
        }
        header.set("scenarios", names.join(","));
        for sc in &scenarios {
            let run = simulate(sc)?;
            println!("{:<20} labels: {}", sc.name, label_string(&run.labels()));
            manifest
                .entries
                .push(write_run_files(&dir, &sc.name, &run, &header, "synthetic")?);
        }
    }
    let path = dir.join("manifest.toml");
    write_text(&path, &manifest.to_toml_string(&header.lines()))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn featurize(a: FeaturizeArgs) -> CliResult<()> {
    let shape = config::shape(a.data.m, a.data.k, &ConfigFile::default())?;
    let corpus = load_corpus(&a.data.manifest, shape)?;
    let mut header = RunConfig::new("featurize");
    header
        .set("manifest", a.data.manifest.display())
        .set("shape", shape);
    let path = a
        .out
        .unwrap_or_else(|| config::default_out_dir().join("features.csv"));
    write_feature_csv(create(&path)?, corpus.features(), shape, &header.lines())?;
    println!(
        "{} vectors of length {} -> {}",
        corpus.len(),
        shape.len(),
        path.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.run.config.as_deref())?;
    let shape = config::shape(a.data.m, a.data.k, &cfg)?;
    let split = config::split(a.run.split.as_ref(), &cfg)?;
    let seed = a.run.seed.or(cfg.seed).unwrap_or(0);
    let spec = config::classifier(a.classifier.as_deref(), &a.overrides, &cfg)?.with_seed(seed);

    let corpus = load_corpus(&a.data.manifest, shape)?;
    let (train_idx, _) = split.apply(&corpus, seed)?;
    if train_idx.is_empty() {
        return Err(data(format!("training part of split `{split}` is empty")));
    }
    let mut model = spec.train(shape, &corpus.observations(&train_idx))?;
    let (n_unsafe, n_safe) = label_counts(&corpus.labels_at(&train_idx)?);

    let mut header = RunConfig::new("train");
    header
        .set("manifest", a.data.manifest.display())
        .set("shape", shape)
        .set("split", &split)
        .set("seed", seed)
        .set("classifier", spec.describe());
    for (k, v) in header.entries() {
        model.metadata.insert(format!("run.{k}"), v.clone());
    }
    model.metadata.insert("classifier".into(), spec.describe());
    model
        .metadata
        .insert("train.samples".into(), train_idx.len().to_string());
    model
        .metadata
        .insert("train.unsafe".into(), n_unsafe.to_string());
    model
        .metadata
        .insert("train.safe".into(), n_safe.to_string());
    if let Some(c) = model.converged() {
        model
            .metadata
            .insert("train.converged".into(), c.to_string());
    }

    let path = a
        .out
        .unwrap_or_else(|| config::default_out_dir().join("model.txt"));
    write_text(&path, &model.to_file_string())?;

    let ratio = if n_safe > 0 {
        format!("{:.2}", n_unsafe as f64 / n_safe as f64)
    } else {
        "inf".to_string()
    };
    println!("classifier : {}", spec.describe());
    println!("split      : {split} (seed {seed})");
    println!(
        "samples    : {} ({n_unsafe} unsafe / {n_safe} safe, unsafe:safe = {ratio})",
        train_idx.len()
    );
    match model.converged() {
        Some(true) => println!("converged  : yes"),
        Some(false) => println!("converged  : no (iteration cap reached)"),
        None => println!("converged  : n/a"),
    }
    println!("model      : {}", path.display());
    Ok(())
}

pub fn predict(a: PredictArgs) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let shape = model_shape(&a.data, &model)?;
    let corpus = load_corpus(&a.data.manifest, shape)?;
    let preds = model.predict_all(&corpus.observations(&corpus.all_indices()))?;

    let mut header = RunConfig::new("predict");
    header
        .set("manifest", a.data.manifest.display())
        .set("model", a.model.display())
        .set("shape", shape);
    let mut out = header.comment_block("# ");
    out.push_str("index,site,start_s,end_s,truth,pred\n");
    for (i, (s, p)) in corpus.samples().iter().zip(&preds).enumerate() {
        let truth = s.label().map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{i},{},{},{},{truth},{p}",
            s.site_id(),
            s.start(),
            s.end()
        );
    }
    let path = a
        .out
        .unwrap_or_else(|| config::default_out_dir().join("predictions.csv"));
    write_text(&path, &out)?;
    let (u, s) = label_counts(&preds);
    println!(
        "{} intervals: {u} predicted unsafe, {s} safe -> {}",
        preds.len(),
        path.display()
    );
    Ok(())
}

/// If the model was trained on a site split, refuse to test it on one of its training sites.
fn check_site_leak(model: &TrainedModel, split: &SplitSpec) -> CliResult<()> {
    let SplitSpec::Sites { test, .. } = split else {
        return Ok(());
    };
    let trained: Option<SplitSpec> = model.metadata.get("run.split").and_then(|s| s.parse().ok());
    match trained {
        Some(SplitSpec::Sites { train, .. }) if train.contains(test) => {
            Err(EvalError::SiteOverlap(test.clone()).into())
        }
        Some(SplitSpec::All) | Some(SplitSpec::Ratio(_)) => Err(usage(format!(
            "model was trained with split `{}`, which includes every site",
            model.metadata["run.split"]
        ))),
        _ => Ok(()),
    }
}

pub fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.run.config.as_deref())?;
    let split = config::split(a.run.split.as_ref(), &cfg)?;
    let seed = a.run.seed.or(cfg.seed).unwrap_or(0);
    let model = load_model(&a.model)?;
    let shape = model_shape(&a.data, &model)?;
    check_site_leak(&model, &split)?;

    let corpus = load_corpus(&a.data.manifest, shape)?;
    let (_, test) = split.apply(&corpus, seed)?;
    if test.is_empty() {
        return Err(
            Failure::from(EvalError::Empty).context(format!("test part of split `{split}`"))
        );
    }
    let mut report = score(
        &model,
        &corpus.observations(&test),
        &split.to_string(),
        seed,
    )?;
    let mut header = RunConfig::new("evaluate");
    header
        .set("manifest", a.data.manifest.display())
        .set("model", a.model.display())
        .set("shape", shape)
        .set("split", &split)
        .set("seed", seed)
        .set("classifier", &report.classifier);
    report.run = header.entries().clone();

    let dir = out_dir(a.out.as_deref());
    let table = report.to_table();
    write_text(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write_text(
        &dir.join("report.txt"),
        &(header.comment_block("# ") + &table),
    )?;
    write_text(
        &dir.join("confusion.csv"),
        &(header.comment_block("# ") + &report.confusion.to_csv()),
    )?;
    print!("{table}");
    Ok(())
}

pub fn cv(a: CvArgs) -> CliResult<()> {
    let cfg = ConfigFile::load(a.run.config.as_deref())?;
    let shape = config::shape(a.data.m, a.data.k, &cfg)?;
    let split = config::split(a.run.split.as_ref(), &cfg)?;
    let seed = a.run.seed.or(cfg.seed).unwrap_or(0);
    let text = fs::read_to_string(&a.grid)
        .map_err(|e| Failure::from(e).context(format!("grid {}", a.grid.display())))?;
    let mut grid_file = GridFile::from_toml_str(&text)?;
    if a.folds.is_some() {
        grid_file.folds = a.folds;
    }
    let grid = grid_file.expand()?;

    let corpus = load_corpus(&a.data.manifest, shape)?;
    let (train_idx, _) = split.apply(&corpus, seed)?;
    let result = grid_search(&grid, &corpus, &train_idx, seed)?;

    let mut header = RunConfig::new("cv");
    header
        .set("manifest", a.data.manifest.display())
        .set("grid", a.grid.display())
        .set("shape", shape)
        .set("split", &split)
        .set("seed", seed)
        .set("folds", grid.folds)
        .set("metric", format!("{:?}", grid.metric).to_lowercase());
    let dir = out_dir(a.out.as_deref());
    let table = result.to_csv(&header.lines());
    write_text(&dir.join("cv_table.csv"), &table)?;
    let best = ConfigFile {
        seed: Some(seed),
        m: Some(shape.max_objects()),
        k: Some(shape.timesteps()),
        split: Some(split.to_string()),
        classifier: Some(result.best_config().clone()),
    };
    let best_text = best.to_toml_string(&header);
    write_text(&dir.join("best_config.toml"), &best_text)?;
    print!("{}", result.to_csv(&[]));
    println!();
    println!("best: {}", result.best_config().describe());
    println!("wrote {}", dir.join("best_config.toml").display());
    Ok(())
}

pub fn dataset_info(a: InfoArgs) -> CliResult<()> {
    let m = DatasetManifest::load(&a.manifest)
        .map_err(|e| Failure::from(e).context(format!("manifest {}", a.manifest.display())))?;
    let samples = m.load_samples()?;
    println!("manifest : {}", a.manifest.display());
    println!("entries  : {}", m.entries.len());
    for e in &m.entries {
        println!("  {} [{}] {}", e.site, e.date, e.tracks.display());
    }
    // site -> (samples, unsafe, safe, unlabeled, records)
    let mut per_site: BTreeMap<&str, [usize; 5]> = BTreeMap::new();
    for s in &samples {
        let row = per_site.entry(s.site_id()).or_default();
        row[0] += 1;
        match s.label() {
            Some(Label::Unsafe) => row[1] += 1,
            Some(Label::Safe) => row[2] += 1,
            None => row[3] += 1,
        }
        row[4] += s.records().len();
    }
    println!("samples  : {}", samples.len());
    println!(
        "  {:<16} {:>8} {:>8} {:>8} {:>10} {:>9}",
        "site", "samples", "unsafe", "safe", "unlabeled", "records"
    );
    for (site, r) in &per_site {
        println!(
            "  {site:<16} {:>8} {:>8} {:>8} {:>10} {:>9}",
            r[0], r[1], r[2], r[3], r[4]
        );
    }
    let (u, s): (usize, usize) = per_site
        .values()
        .fold((0, 0), |acc, r| (acc.0 + r[1], acc.1 + r[2]));
    if s > 0 {
        println!("unsafe:safe = {u}:{s} ({:.2})", u as f64 / s as f64);
    }
    if let (Some(lo), Some(hi)) = (
        samples.iter().map(|s| s.duration()).min_by(f64::total_cmp),
        samples.iter().map(|s| s.duration()).max_by(f64::total_cmp),
    ) {
        println!("duration : {lo} s .. {hi} s");
    }
    Ok(())
}
