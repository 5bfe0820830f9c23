//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run with `cargo test -p crossing-core --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use crossing_core::classifiers::{
    baseline_classify, train_knn, train_svm, BaselineParams, ClassifierSpec, ForestParams, Kernel,
    KnnParams, SvmParams,
};
use crossing_core::domain::FeatureShape;
use crossing_core::eval::{
    confusion, generalization_eval, grid_search, stratified_split_labels, Corpus, EvalReport,
    GridSpec, SplitRatio,
};
use crossing_core::features::{featurize, slot_assignment, Normalizer};
use crossing_core::ingest::{window_dataset, write_annotations, write_tracks};
use crossing_core::synth::{
    concat_runs, random_corpus, scenario_library, simulate, simulate_all, CorpusConfig, Scenario,
    SensorModel, SimulationRun, TrafficMix, VehicleScript,
};
use crossing_core::{FeatureVector, IntervalSample, Label, Sensor, TrackRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit_s: f64, elapsed: Duration) -> bool {
    elapsed.as_secs_f64() < limit_s
}

/// Simulates every scenario and glues them into one labeled corpus.
fn corpus_of(scenarios: &[Scenario], site: &str) -> Corpus {
    let runs = simulate_all(scenarios).expect("valid scenarios");
    let lens: Vec<f64> = scenarios.iter().map(|s| s.episode_length).collect();
    let joined = concat_runs(site, site, &runs, &lens, 1000).expect("concat");
    Corpus::new(
        window_dataset(&joined.records, &joined.annotations, site),
        FeatureShape::default(),
    )
}

fn random_windows(windows: usize, seed: u64, mix: TrafficMix, site: &str) -> Vec<Scenario> {
    random_corpus(&CorpusConfig {
        windows,
        seed,
        site_id: site.to_string(),
        mix,
        ..Default::default()
    })
}

fn rf(seed: u64) -> ClassifierSpec {
    ClassifierSpec::Forest(ForestParams {
        seed,
        ..Default::default()
    })
}

fn baseline() -> ClassifierSpec {
    ClassifierSpec::Baseline(BaselineParams::default())
}

/// Trains on the 3:2 train part and returns the report on the test part.
fn holdout(corpus: &Corpus, spec: &ClassifierSpec, seed: u64) -> EvalReport {
    let labels = corpus.labels().expect("labeled");
    let split = stratified_split_labels(&labels, SplitRatio::default(), seed).expect("split");
    let model = spec
        .clone()
        .with_seed(seed)
        .train(corpus.shape(), &corpus.observations(&split.train))
        .expect("train");
    crossing_core::eval::evaluate(&model, &corpus.observations(&split.test), "ratio:3:2", seed)
        .expect("evaluate")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{x:.3}"))
}

fn random_record(rng: &mut ChaCha8Rng, t: f64, id: u64) -> TrackRecord {
    let sensor = match rng.random_range(0..3) {
        0 => Sensor::RadarLeft,
        1 => Sensor::RadarRight,
        _ => Sensor::Laser,
    };
    let (r, v) = match rng.random_range(0..10) {
        // exact boundary: r / v == 10
        0 => {
            let v = f64::from(rng.random_range(1u32..20));
            (10.0 * v, v)
        }
        1 => (rng.random_range(0.0..200.0), 0.0),
        2 => (0.0, rng.random_range(-5.0..5.0)),
        _ => (rng.random_range(0.0..200.0), rng.random_range(-20.0..20.0)),
    };
    TrackRecord::new(t, sensor, id, r, v, rng.random_range(-60.0..60.0)).expect("finite")
}

fn random_sample(rng: &mut ChaCha8Rng, max_records: usize) -> IntervalSample {
    let start = f64::from(rng.random_range(0u32..100)) * 5.0;
    let n = rng.random_range(0..=max_records);
    let records = (0..n)
        .map(|_| {
            let t = start + rng.random_range(0.0..5.0);
            let id = rng.random_range(0..12);
            random_record(rng, t, id)
        })
        .collect();
    IntervalSample::new(start, 5.0, records, None, "s").expect("records in window")
}

// ── 1 ──────────────────────────────────────────────────────────────────

fn ttc_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let p = BaselineParams {
        ttc_threshold: 10.0,
    };
    let mut disagree = 0;
    let mut unsafe_n = 0;
    for _ in 0..1000 {
        let s = random_sample(&mut rng, 40);
        // brute force: the smallest time to collision over every record
        let mut min_ttc = f64::INFINITY;
        for r in s.records() {
            let ttc = if r.radial_velocity() > 0.0 {
                r.range() / r.radial_velocity()
            } else {
                f64::INFINITY
            };
            if ttc < min_ttc {
                min_ttc = ttc;
            }
        }
        let expected = if min_ttc < 10.0 {
            Label::Unsafe
        } else {
            Label::Safe
        };
        unsafe_n += usize::from(expected == Label::Unsafe);
        if baseline_classify(&s, &p) != expected {
            disagree += 1;
        }
    }
    let dt = t0.elapsed();
    outcome(
        disagree == 0 && within(5.0, dt),
        format!("1000 intervals ({unsafe_n} unsafe), {disagree} disagreements, {dt:.2?}"),
    )
}

// ── 2 ──────────────────────────────────────────────────────────────────

/// Slot sort key: first seen, range at first sight, id, sensor.
type SlotKey = (f64, f64, u64, Sensor);

/// Straightforward re-derivation of the feature vector.
fn reference_features(s: &IntervalSample, m: usize, k: usize) -> Vec<f64> {
    let mut objects: BTreeMap<(Sensor, u64), Vec<&TrackRecord>> = BTreeMap::new();
    for r in s.records() {
        objects.entry(r.object_key()).or_default().push(r);
    }
    let mut tracks: Vec<(SlotKey, Vec<&TrackRecord>)> = objects
        .into_iter()
        .map(|(key, mut recs)| {
            recs.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()));
            ((recs[0].timestamp(), recs[0].range(), key.1, key.0), recs)
        })
        .collect();
    tracks.sort_by(|a, b| {
        let (x, y) = (a.0, b.0);
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut out = vec![0.0; m * 3 * k];
    for (slot, (_, recs)) in tracks.iter().take(m).enumerate() {
        for bin in 0..k {
            let in_bin: Vec<&&TrackRecord> = recs
                .iter()
                .filter(|r| {
                    let b =
                        ((r.timestamp() - s.start()) / s.duration() * k as f64).floor() as usize;
                    b.min(k - 1) == bin
                })
                .collect();
            if in_bin.is_empty() {
                continue;
            }
            let n = in_bin.len() as f64;
            let base = (slot * k + bin) * 3;
            out[base] = in_bin.iter().map(|r| r.range()).sum::<f64>() / n;
            out[base + 1] = in_bin.iter().map(|r| r.radial_velocity()).sum::<f64>() / n;
            out[base + 2] = in_bin.iter().map(|r| r.angle()).sum::<f64>() / n;
        }
    }
    out
}

fn feature_layout() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut failures = BTreeMap::<&str, usize>::new();
    let mut fail = |what| *failures.entry(what).or_default() += 1;
    for i in 0..500 {
        let m = rng.random_range(1..=12);
        let k = rng.random_range(1..=12);
        let shape = FeatureShape::new(m, k).expect("valid shape");
        // unique timestamps per object keep first-sight ties out of the picture
        let s = if i % 50 == 0 {
            IntervalSample::new(0.0, 5.0, vec![], None, "s").unwrap()
        } else {
            random_sample(&mut rng, 60)
        };
        let v = featurize(&s, shape);
        if v.len() != m * 3 * k {
            fail("length");
        }
        if s.records().is_empty() && v.values().iter().any(|&x| x != 0.0) {
            fail("empty not zero");
        }
        let layout_ok = {
            let mut layout_ok = true;
            let reference = reference_features(&s, m, k);
            for (a, b) in reference.iter().zip(v.values()) {
                if (a - b).abs() > 1e-9 * a.abs().max(1.0) {
                    layout_ok = false;
                }
            }
            layout_ok
        };
        if !layout_ok {
            fail("values");
        }
        let mut shuffled = s.records().to_vec();
        shuffled.shuffle(&mut rng);
        let s2 = s.with_records(shuffled).unwrap();
        if featurize(&s2, shape) != v {
            fail("shuffle");
        }
        // slot order: first seen, then nearest at first sight, then id
        let order = slot_assignment(&s);
        let key = |k: &(Sensor, u64)| {
            let first = s
                .records()
                .iter()
                .filter(|r| r.object_key() == *k)
                .min_by(|a, b| a.timestamp().total_cmp(&b.timestamp()))
                .unwrap();
            (first.timestamp(), first.range(), k.1)
        };
        for w in order.windows(2) {
            let (a, b) = (key(&w[0]), key(&w[1]));
            let ok = a.0 < b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 <= b.2)));
            if !ok {
                fail("slot order");
            }
        }
    }
    let dt = t0.elapsed();
    let pass = failures.is_empty() && within(5.0, dt);
    let detail = if failures.is_empty() {
        format!("500 samples: length, zero padding, per-bin averages, shuffle invariance and slot order hold, {dt:.2?}")
    } else {
        format!("failures {failures:?}, {dt:.2?}")
    };
    outcome(pass, detail)
}

// ── 3 ──────────────────────────────────────────────────────────────────

fn rf_learnability(reports: &mut Vec<EvalReport>) -> Outcome {
    let t0 = Instant::now();
    let corpus = corpus_of(
        &random_windows(400, SEED, TrafficMix::constant_only(), "c"),
        "c",
    );
    let rep = holdout(&corpus, &rf(SEED), SEED);
    let dt = t0.elapsed();
    let labels = corpus.labels().unwrap();
    let safe = labels.iter().filter(|l| l.is_safe()).count();
    let pass = rep.precision.is_some_and(|p| p >= 0.95)
        && rep.recall.is_some_and(|r| r >= 0.90)
        && within(60.0, dt);
    let detail = format!(
        "400 windows ({} unsafe / {safe} safe), test {}: precision {} recall {}, {dt:.2?}",
        labels.len() - safe,
        rep.confusion.total(),
        fmt_opt(rep.precision),
        fmt_opt(rep.recall)
    );
    reports.push(rep);
    outcome(pass, detail)
}

/// Not a criterion: how often the learnability bar holds across seeds.
fn rf_learnability_sweep() -> String {
    let seeds = 0..10u64;
    let n = seeds.clone().count();
    let pass = seeds
        .filter(|&s| {
            let c = corpus_of(
                &random_windows(400, s, TrafficMix::constant_only(), "c"),
                "c",
            );
            let rep = holdout(&c, &rf(s), s);
            rep.precision.is_some_and(|p| p >= 0.95) && rep.recall.is_some_and(|r| r >= 0.90)
        })
        .count();
    format!("learnability bar held on {pass}/{n} seeds")
}

// ── 4 ──────────────────────────────────────────────────────────────────

fn rf_beats_baseline(reports: &mut Vec<EvalReport>) -> Outcome {
    let t0 = Instant::now();
    let scenarios = random_windows(600, SEED + 4, TrafficMix::mixed(), "m");
    let kinds: BTreeSet<&str> = scenarios
        .iter()
        .flat_map(|s| s.vehicles.iter())
        .map(|v| match v.profile {
            crossing_core::synth::SpeedProfile::Constant { .. } => "constant",
            crossing_core::synth::SpeedProfile::Decelerating { .. } => "decelerating_yield",
            crossing_core::synth::SpeedProfile::DecelerateThenAccelerate { .. } => {
                "slow_then_speed"
            }
        })
        .collect();
    let corpus = corpus_of(&scenarios, "m");
    let forest = holdout(&corpus, &rf(SEED), SEED);
    let base = holdout(&corpus, &baseline(), SEED);
    let dt = t0.elapsed();
    let diff = (forest.accuracy - base.accuracy) * 100.0;
    let pass = kinds.len() == 3 && diff >= 5.0 && within(120.0, dt);
    let detail = format!(
        "600 windows: forest accuracy {:.3}, baseline {:.3}, difference {diff:+.1} pp, {dt:.2?}",
        forest.accuracy, base.accuracy
    );
    reports.push(forest);
    reports.push(base);
    outcome(pass, detail)
}

// ── 5 ──────────────────────────────────────────────────────────────────

fn generalization(reports: &mut Vec<EvalReport>) -> Outcome {
    let t0 = Instant::now();
    let sites = ["north", "east", "south"];
    let mut samples = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        let c = corpus_of(
            &random_windows(150, 50 + i as u64, TrafficMix::mixed(), site),
            site,
        );
        samples.extend_from_slice(c.samples());
    }
    let corpus = Corpus::new(samples, FeatureShape::default());
    let train: BTreeSet<String> = ["north", "east"].iter().map(|s| s.to_string()).collect();
    let out =
        generalization_eval(&corpus, &train, "south", &rf(SEED), SEED).expect("generalization");
    let dt = t0.elapsed();

    let audit = out.audit(&corpus, "south").is_ok();
    let train_sites: BTreeSet<&str> = out
        .train
        .iter()
        .map(|&i| corpus.samples()[i].site_id())
        .collect();
    let test_sites: BTreeSet<&str> = out
        .test
        .iter()
        .map(|&i| corpus.samples()[i].site_id())
        .collect();
    let disjoint = out.train.iter().all(|i| !out.test.contains(i));
    let r = &out.report;
    let complete = r.confusion.total() == out.test.len()
        && r.precision.is_some()
        && r.recall.is_some()
        && r.is_consistent()
        && EvalReport::from_json(&r.to_json()).ok().as_ref() == Some(r);
    let overlap_rejected = generalization_eval(
        &corpus,
        &["north", "south"].iter().map(|s| s.to_string()).collect(),
        "south",
        &rf(SEED),
        SEED,
    )
    .is_err();
    let pass = audit
        && disjoint
        && overlap_rejected
        && complete
        && train_sites == BTreeSet::from(["east", "north"])
        && test_sites == BTreeSet::from(["south"]);
    let detail = format!(
        "train {} samples from {train_sites:?}, test {} from {test_sites:?}; audit {}, report complete {}, accuracy {:.3}, {dt:.2?}",
        out.train.len(),
        out.test.len(),
        if audit { "clean" } else { "LEAK" },
        complete,
        r.accuracy
    );
    reports.push(out.report);
    outcome(pass, detail)
}

// ── 6 ──────────────────────────────────────────────────────────────────

fn metric_identities(reports: &[EvalReport]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut all: Vec<EvalReport> = reports.to_vec();
    for _ in 0..1000 {
        let n = rng.random_range(1..60);
        let truth: Vec<Label> = (0..n)
            .map(|_| Label::from_bool_safe(rng.random_bool(0.5)))
            .collect();
        let pred: Vec<Label> = (0..n)
            .map(|_| Label::from_bool_safe(rng.random_bool(0.3)))
            .collect();
        all.push(EvalReport::from_predictions(&pred, &truth, "random", "all", 0).unwrap());
    }
    let mut mismatches = 0;
    for r in &all {
        let c = &r.confusion;
        let p = (c.tp + c.fp > 0).then(|| c.tp as f64 / (c.tp + c.fp) as f64);
        let rec = (c.tp + c.fn_ > 0).then(|| c.tp as f64 / (c.tp + c.fn_) as f64);
        let acc = (c.tp + c.tn) as f64 / c.total() as f64;
        let same = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
            (None, None) => true,
            _ => false,
        };
        let flagged = r.flags.iter().any(|f| f == "precision_undefined") == p.is_none();
        if !(same(r.precision, p)
            && same(r.recall, rec)
            && acc.to_bits() == r.accuracy.to_bits()
            && flagged)
        {
            mismatches += 1;
        }
    }
    // nothing predicted safe: precision undefined, flagged, no panic
    let truth = [Label::Safe, Label::Unsafe, Label::Safe];
    let pred = [Label::Unsafe; 3];
    let degenerate = EvalReport::from_predictions(&pred, &truth, "x", "all", 0)
        .map(|r| {
            r.precision.is_none()
                && r.flags.contains(&"precision_undefined".to_string())
                && r.accuracy == 1.0 / 3.0
        })
        .unwrap_or(false);
    let cm = confusion(&pred, &truth).unwrap();
    let degenerate = degenerate && cm.precision().is_none() && cm.recall() == Some(0.0);
    outcome(
        mismatches == 0 && degenerate,
        format!(
            "{} reports, {mismatches} mismatches; degenerate case flagged: {degenerate}",
            all.len()
        ),
    )
}

// ── 7 ──────────────────────────────────────────────────────────────────

fn log_bytes(run: &SimulationRun) -> (Vec<u8>, Vec<u8>) {
    let mut t = Vec::new();
    let mut a = Vec::new();
    write_tracks(&mut t, &run.records, &[]).unwrap();
    write_annotations(&mut a, &run.annotations, &[]).unwrap();
    (t, a)
}

fn determinism() -> Outcome {
    let t0 = Instant::now();
    let mut checks = Vec::new();

    let synth = || {
        let mut scs = random_windows(120, 77, TrafficMix::mixed(), "d");
        scs.extend(scenario_library().into_iter().map(|s| s.with_seed(5)));
        scs.iter()
            .map(|s| log_bytes(&simulate(s).unwrap()))
            .collect::<Vec<_>>()
    };
    checks.push(("synthetic logs", synth() == synth()));

    let corpus = corpus_of(&random_windows(120, 77, TrafficMix::mixed(), "d"), "d");
    let labels = corpus.labels().unwrap();
    let split = |seed| stratified_split_labels(&labels, SplitRatio::default(), seed).unwrap();
    checks.push((
        "split assignment",
        split(3) == split(3) && split(3) != split(4),
    ));

    let model = |spec: &ClassifierSpec| {
        let s = split(3);
        spec.train(corpus.shape(), &corpus.observations(&s.train))
            .unwrap()
            .to_file_string()
    };
    for spec in [
        rf(9),
        ClassifierSpec::Svm(SvmParams::default()),
        ClassifierSpec::Knn(KnnParams::default()),
        baseline(),
    ] {
        checks.push((spec.kind(), model(&spec) == model(&spec)));
    }
    checks.push(("forest seed matters", model(&rf(9)) != model(&rf(10))));

    let grid = GridSpec::new(
        vec![
            rf(0),
            ClassifierSpec::Knn(KnnParams { k: 1 }),
            ClassifierSpec::Knn(KnnParams { k: 8 }),
            baseline(),
        ],
        3,
    );
    let table = || {
        grid_search(&grid, &corpus, &split(3).train, 3)
            .unwrap()
            .to_csv(&["seed=3".to_string()])
    };
    checks.push(("cv table", table() == table()));

    #[cfg(feature = "parallel")]
    {
        // the thread count must not leak into the results
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let (m1, t1) = one.install(|| (model(&rf(9)), table()));
        checks.push(("1 thread vs pool", m1 == model(&rf(9)) && t1 == table()));
    }

    let dt = t0.elapsed();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} checks identical across runs, {dt:.2?}", checks.len())
        } else {
            format!("differs: {failed:?}")
        },
    )
}

// ── 8 ──────────────────────────────────────────────────────────────────

fn vector(shape: FeatureShape, values: Vec<f64>, label: Label) -> FeatureVector {
    FeatureVector::new(shape, values, Some(label)).unwrap()
}

fn knn_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let shape = FeatureShape::new(2, 2).unwrap();
    let data: Vec<FeatureVector> = (0..200)
        .map(|_| {
            let v = (0..shape.len())
                .map(|_| rng.random_range(-50.0..50.0))
                .collect();
            vector(shape, v, Label::from_bool_safe(rng.random_bool(0.5)))
        })
        .collect();
    let norm = Normalizer::identity(shape);
    let m1 = train_knn(&data, &KnnParams { k: 1 }, norm.clone()).unwrap();
    let correct = data
        .iter()
        .filter(|v| crossing_core::classifiers::knn_predict(&m1, v).unwrap() == v.label().unwrap())
        .count();

    // four safe and four unsafe points around the query at equal distance
    let tiny = FeatureShape::new(1, 1).unwrap();
    let mut pts = Vec::new();
    for (i, d) in [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
    .into_iter()
    .enumerate()
    {
        pts.push(vector(tiny, d.to_vec(), Label::from_bool_safe(i % 2 == 0)));
        let neg = d.iter().map(|x| x * 2.0).collect();
        pts.push(vector(tiny, neg, Label::from_bool_safe(i % 2 == 1)));
    }
    let m8 = train_knn(&pts, &KnnParams { k: 8 }, Normalizer::identity(tiny)).unwrap();
    let q = vector(tiny, vec![0.0, 0.0, 0.0], Label::Safe);
    let votes = pts
        .iter()
        .filter(|p| p.label() == Some(Label::Safe))
        .count();
    let tie = crossing_core::classifiers::knn_predict(&m8, &q).unwrap();
    outcome(
        correct == data.len() && votes == 4 && tie == Label::Unsafe,
        format!(
            "k=1 training accuracy {correct}/{}; k=8 vote {votes}-{} returns {tie:?}",
            data.len(),
            pts.len() - votes
        ),
    )
}

// ── 9 ──────────────────────────────────────────────────────────────────

fn blobs(rng: &mut ChaCha8Rng, n: usize, shape: FeatureShape) -> Vec<FeatureVector> {
    (0..n)
        .map(|i| {
            let safe = i % 2 == 0;
            let c = if safe { 3.0 } else { -3.0 };
            let v = (0..shape.len())
                .map(|_| c + rng.random_range(-1.0..1.0))
                .collect();
            vector(shape, v, Label::from_bool_safe(safe))
        })
        .collect()
}

fn svm_feasibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let shape = FeatureShape::new(1, 2).unwrap();
    let train = blobs(&mut rng, 120, shape);
    let test = blobs(&mut rng, 80, shape);
    let mut lines = Vec::new();
    let mut pass = true;
    for kernel in [Kernel::Linear, Kernel::Rbf] {
        let p = SvmParams {
            kernel,
            ..Default::default()
        };
        let m = train_svm(&train, &p, Normalizer::identity(shape)).unwrap();
        let sum: f64 = m.support_vectors().iter().map(|s| s.alpha * s.y).sum();
        let boxed = m
            .support_vectors()
            .iter()
            .all(|s| (0.0..=p.c).contains(&s.alpha));
        let correct = test
            .iter()
            .filter(|v| {
                crossing_core::classifiers::svm_predict(&m, v).unwrap() == v.label().unwrap()
            })
            .count();
        pass &= sum.abs() <= 1e-6 && boxed && correct == test.len() && m.converged();
        lines.push(format!(
            "{kernel:?}: |sum alpha*y| {:.1e}, alpha in [0, {}] {boxed}, test {correct}/{}",
            sum.abs(),
            p.c,
            test.len()
        ));
    }

    // sigmoid on overlapping noise with a tiny cap: must stop and say so
    let shape = FeatureShape::new(4, 3).unwrap();
    let noisy: Vec<FeatureVector> = (0..400)
        .map(|_| {
            let v = (0..shape.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            vector(shape, v, Label::from_bool_safe(rng.random_bool(0.5)))
        })
        .collect();
    let p = SvmParams {
        kernel: Kernel::Sigmoid,
        kkt_tolerance: 1e-9,
        max_passes: 1,
        ..Default::default()
    };
    let t0 = Instant::now();
    let m = train_svm(&noisy, &p, Normalizer::identity(shape)).unwrap();
    let dt = t0.elapsed();
    let capped = !m.converged() && m.iterations() <= p.max_passes * noisy.len();
    pass &= capped && within(5.0, dt);
    lines.push(format!(
        "sigmoid: converged={} after {} iterations (cap {}), {dt:.2?}",
        m.converged(),
        m.iterations(),
        p.max_passes * noisy.len()
    ));
    outcome(pass, lines.join("; "))
}

// ── 10 ─────────────────────────────────────────────────────────────────

fn in_coverage(r: f64, a: f64) -> bool {
    (r <= 174.0 && a.abs() <= 10.0) || (r <= 60.0 && a.abs() <= 45.0)
}

fn sensor_geometry() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let (mut outside, mut missed, mut states, mut detections) = (0usize, 0usize, 0usize, 0usize);
    for batch in 0..100 {
        let vehicles: Vec<VehicleScript> = (0..100)
            .map(|i| match i {
                // exact corners of both regions
                0 => VehicleScript::constant(0.0, 174.0, 10.0, 0.0),
                1 => VehicleScript::constant(0.0, 60.0, -45.0, 0.0),
                2 => VehicleScript::constant(0.0, 174.0, 10.001, 0.0),
                3 => VehicleScript::constant(0.0, 60.001, 45.0, 0.0),
                _ => VehicleScript::constant(
                    0.0,
                    rng.random_range(0.0..260.0),
                    rng.random_range(-90.0..90.0),
                    rng.random_range(-20.0..20.0),
                ),
            })
            .collect();
        states += vehicles.len();
        let mut sc = Scenario::new("geometry", 5.0, vehicles).with_seed(batch);
        sc.sensor = SensorModel::noise_free();
        let run = simulate(&sc).unwrap();
        for r in &run.records {
            detections += 1;
            let veh = &sc.vehicles[r.object_id() as usize];
            let (true_r, _) = veh.true_state(r.timestamp()).unwrap();
            if !in_coverage(r.range(), r.angle()) || !in_coverage(true_r, veh.angle) {
                outside += 1;
            }
        }
        // every covered state at a tick produces a record
        for (id, veh) in sc.vehicles.iter().enumerate() {
            for tick in 0..50 {
                let t = f64::from(tick) / 10.0;
                let Some((r, _)) = veh.true_state(t) else {
                    continue;
                };
                if veh.tracked_at(t) && in_coverage(r, veh.angle) {
                    let seen = run
                        .records
                        .iter()
                        .any(|x| x.object_id() == id as u64 && x.timestamp() == t);
                    missed += usize::from(!seen);
                }
            }
        }
    }
    let dt = t0.elapsed();
    outcome(
        outside == 0 && missed == 0,
        format!("{states} vehicle states, {detections} detections, {outside} outside coverage, {missed} missed, {dt:.2?}"),
    )
}

// ── 11 ─────────────────────────────────────────────────────────────────

fn split_arithmetic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11);
    let labels: Vec<Label> = (0..1270)
        .map(|_| Label::from_bool_safe(rng.random_bool(0.43)))
        .collect();
    let s = stratified_split_labels(&labels, SplitRatio { train: 3, test: 2 }, SEED).unwrap();
    let count = |idx: &[usize], l: Label| idx.iter().filter(|&&i| labels[i] == l).count();
    let mut worst = 0.0f64;
    for l in [Label::Unsafe, Label::Safe] {
        let total = count(&(0..labels.len()).collect::<Vec<_>>(), l) as f64;
        worst = worst.max((count(&s.train, l) as f64 - total * 0.6).abs());
    }
    let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
    all.sort_unstable();
    let partition = all == (0..labels.len()).collect::<Vec<_>>();
    outcome(
        s.train.len() == 762 && s.test.len() == 508 && worst <= 1.0 && partition,
        format!(
            "1270 -> {}/{}, largest per-class deviation {worst:.2} samples, partition {partition}",
            s.train.len(),
            s.test.len()
        ),
    )
}

fn main() {
    let mut reports = Vec::new();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 ttc oracle equivalence", ttc_oracle()),
        ("2 feature layout", feature_layout()),
        ("3 rf learnability", rf_learnability(&mut reports)),
        ("4 rf beats baseline", rf_beats_baseline(&mut reports)),
        ("5 generalization harness", generalization(&mut reports)),
        ("6 metric identities", metric_identities(&reports)),
        ("7 determinism", determinism()),
        ("8 knn sanity", knn_sanity()),
        ("9 svm feasibility", svm_feasibility()),
        ("10 sensor geometry", sensor_geometry()),
        ("11 split arithmetic", split_arithmetic()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("{tag} {name}: {}", o.detail);
    }
    println!("INFO {}", rf_learnability_sweep());
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
