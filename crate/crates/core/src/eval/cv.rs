use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::classifiers::{
    BaselineParams, ClassifierSpec, ForestParams, Kernel, KnnParams, SvmParams,
};
use crate::domain::Label;
use crate::exec;

use super::report::{confusion, evaluate, ConfusionMatrix, EvalReport};
use super::split::fold_assignment;
use super::{Corpus, EvalError};

/// How a config's mean precision and recall collapse into one ranking score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    /// `(precision + recall) / 2`
    #[default]
    Mean,
    F1,
}

impl SelectionMetric {
    pub fn score(self, precision: Option<f64>, recall: Option<f64>) -> Option<f64> {
        let (p, r) = (precision?, recall?);
        Some(match self {
            SelectionMetric::Mean => (p + r) / 2.0,
            SelectionMetric::F1 if p + r > 0.0 => 2.0 * p * r / (p + r),
            SelectionMetric::F1 => 0.0,
        })
    }
}

impl ClassifierSpec {
    /// Forest seeds follow the run seed; other classifiers are deterministic anyway.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let ClassifierSpec::Forest(p) = &mut self {
            p.seed = seed;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub eval_size: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    /// Fold id per entry of the training index list that was passed in.
    pub assignment: Vec<usize>,
    pub folds: Vec<FoldResult>,
    /// `None` if any fold had undefined precision.
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        sum += v?;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Stratified k-fold cross-validation over `train` (indices into `corpus`).
/// Each fold's model is trained from scratch on the other folds, so SVM and
/// kNN normalizers only ever see that fold's training part.
pub fn cross_validate(
    spec: &ClassifierSpec,
    corpus: &Corpus,
    train: &[usize],
    folds: usize,
    seed: u64,
) -> Result<CvOutcome, EvalError> {
    let labels = corpus.labels_at(train)?;
    let assignment = fold_assignment(&labels, folds, seed)?;
    for f in 0..folds {
        let mut has = [false; 2];
        for (pos, &a) in assignment.iter().enumerate() {
            if a != f {
                has[labels[pos].as_u8() as usize] = true;
            }
        }
        if !(has[0] && has[1]) {
            return Err(EvalError::FoldTooSmall(format!(
                "training part of fold {f} lacks a class"
            )));
        }
    }
    let spec = spec.clone().with_seed(seed);
    let results = exec::map_range(folds, |f| -> Result<FoldResult, EvalError> {
        let (mut tr, mut ev) = (Vec::new(), Vec::new());
        for (pos, &a) in assignment.iter().enumerate() {
            if a == f {
                ev.push(train[pos]);
            } else {
                tr.push(train[pos]);
            }
        }
        let model = spec.train(corpus.shape(), &corpus.observations(&tr))?;
        let eval_obs = corpus.observations(&ev);
        let pred = model.predict_all(&eval_obs)?;
        let truth: Vec<Label> = corpus.labels_at(&ev)?;
        Ok(FoldResult {
            fold: f,
            train_size: tr.len(),
            eval_size: ev.len(),
            confusion: confusion(&pred, &truth)?,
        })
    });
    let folds_out: Vec<FoldResult> = results.into_iter().collect::<Result<_, _>>()?;
    Ok(CvOutcome {
        assignment,
        mean_precision: mean_defined(folds_out.iter().map(|f| f.confusion.precision())),
        mean_recall: mean_defined(folds_out.iter().map(|f| f.confusion.recall())),
        folds: folds_out,
    })
}

/// Candidate configurations in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub configs: Vec<ClassifierSpec>,
    pub folds: usize,
    pub metric: SelectionMetric,
}

impl GridSpec {
    pub fn new(configs: Vec<ClassifierSpec>, folds: usize) -> Self {
        GridSpec {
            configs,
            folds,
            metric: SelectionMetric::Mean,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.configs.is_empty() {
            return Err(EvalError::InvalidGrid("no configurations".into()));
        }
        if self.folds < 2 {
            return Err(EvalError::InvalidGrid(format!("{} folds", self.folds)));
        }
        for c in &self.configs {
            c.validate()?;
        }
        Ok(())
    }
}

fn one<T: Clone>(v: T) -> Vec<T> {
    vec![v]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples: Vec<usize>,
    pub active_vars: Vec<usize>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        let d = ForestParams::default();
        ForestGrid {
            n_trees: one(d.n_trees),
            max_depth: one(d.max_depth),
            min_samples: one(d.min_samples),
            active_vars: one(d.active_vars),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmGrid {
    pub kernel: Vec<Kernel>,
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub coef0: Vec<f64>,
}

impl Default for SvmGrid {
    fn default() -> Self {
        let d = SvmParams::default();
        SvmGrid {
            kernel: one(d.kernel),
            c: one(d.c),
            gamma: one(d.gamma),
            coef0: one(d.coef0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnGrid {
    pub k: Vec<usize>,
}

impl Default for KnnGrid {
    fn default() -> Self {
        KnnGrid {
            k: one(KnnParams::default().k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineGrid {
    pub ttc_threshold: Vec<f64>,
}

impl Default for BaselineGrid {
    fn default() -> Self {
        BaselineGrid {
            ttc_threshold: one(BaselineParams::default().ttc_threshold),
        }
    }
}

/// On-disk (TOML) grid: one optional table of value lists per classifier.
/// Omitted fields fall back to the single default value.
///
/// ```toml
/// folds = 5
/// metric = "mean"
/// [forest]
/// n_trees = [50, 100]
/// [baseline]
/// ttc_threshold = [1.0, 10.0]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    #[serde(default)]
    pub folds: Option<usize>,
    #[serde(default)]
    pub metric: Option<SelectionMetric>,
    pub forest: Option<ForestGrid>,
    pub svm: Option<SvmGrid>,
    pub knn: Option<KnnGrid>,
    pub baseline: Option<BaselineGrid>,
}

impl GridFile {
    pub fn from_toml_str(s: &str) -> Result<Self, EvalError> {
        toml::from_str(s).map_err(|e| EvalError::InvalidGrid(e.to_string().trim_end().to_string()))
    }

    /// Cartesian product per table, tables in the order forest, svm, knn,
    /// baseline, earlier fields varying slowest.
    pub fn expand(&self) -> Result<GridSpec, EvalError> {
        let mut configs = Vec::new();
        if let Some(g) = &self.forest {
            for &n_trees in &g.n_trees {
                for &max_depth in &g.max_depth {
                    for &min_samples in &g.min_samples {
                        for &active_vars in &g.active_vars {
                            configs.push(ClassifierSpec::Forest(ForestParams {
                                n_trees,
                                max_depth,
                                min_samples,
                                active_vars,
                                ..Default::default()
                            }));
                        }
                    }
                }
            }
        }
        if let Some(g) = &self.svm {
            for &kernel in &g.kernel {
                for &c in &g.c {
                    for &gamma in &g.gamma {
                        for &coef0 in &g.coef0 {
                            configs.push(ClassifierSpec::Svm(SvmParams {
                                kernel,
                                c,
                                gamma,
                                coef0,
                                ..Default::default()
                            }));
                        }
                    }
                }
            }
        }
        if let Some(g) = &self.knn {
            for &k in &g.k {
                configs.push(ClassifierSpec::Knn(KnnParams { k }));
            }
        }
        if let Some(g) = &self.baseline {
            for &ttc_threshold in &g.ttc_threshold {
                configs.push(ClassifierSpec::Baseline(BaselineParams { ttc_threshold }));
            }
        }
        let grid = GridSpec {
            configs,
            folds: self.folds.unwrap_or(5),
            metric: self.metric.unwrap_or_default(),
        };
        grid.validate()?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// Position in the grid.
    pub index: usize,
    /// 1-based rank; the selected config has rank 1.
    pub rank: usize,
    pub config: ClassifierSpec,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// In grid order.
    pub rows: Vec<GridRow>,
    pub best: usize,
    pub metric: SelectionMetric,
    pub folds: usize,
    pub seed: u64,
}

impl GridResult {
    pub fn best_config(&self) -> &ClassifierSpec {
        &self.rows[self.best].config
    }

    /// Rows by rank.
    pub fn ranked(&self) -> Vec<&GridRow> {
        let mut rows: Vec<&GridRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.rank);
        rows
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| x.to_string());
        let mut s = String::new();
        for c in comments {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str("rank,index,mean_precision,mean_recall,score,config\n");
        for r in self.ranked() {
            s.push_str(&format!(
                "{},{},{},{},{},\"{}\"\n",
                r.rank,
                r.index,
                fmt(r.mean_precision),
                fmt(r.mean_recall),
                fmt(r.score),
                r.config.describe()
            ));
        }
        s
    }
}

/// Orders scores: defined beats undefined, larger beats smaller, and on a
/// tie the lower grid index wins.
fn rank_order(a: (Option<f64>, usize), b: (Option<f64>, usize)) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a.0, b.0) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.1.cmp(&b.1)),
        (Some(_), None) => Less,
        (None, Some(_)) => Greater,
        (None, None) => a.1.cmp(&b.1),
    }
}

/// Cross-validates every configuration (in parallel when enabled) and
/// selects the best by `grid.metric`.
pub fn grid_search(
    grid: &GridSpec,
    corpus: &Corpus,
    train: &[usize],
    seed: u64,
) -> Result<GridResult, EvalError> {
    grid.validate()?;
    let outcomes = exec::map(&grid.configs, |spec| {
        cross_validate(spec, corpus, train, grid.folds, seed)
    });
    let mut rows = Vec::with_capacity(outcomes.len());
    for (index, (config, out)) in grid.configs.iter().zip(outcomes).enumerate() {
        let out = out?;
        rows.push(GridRow {
            index,
            rank: 0,
            config: config.clone().with_seed(seed),
            mean_precision: out.mean_precision,
            mean_recall: out.mean_recall,
            score: grid.metric.score(out.mean_precision, out.mean_recall),
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rank_order((rows[a].score, a), (rows[b].score, b)));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(GridResult {
        best: order[0],
        rows,
        metric: grid.metric,
        folds: grid.folds,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizationOutcome {
    pub report: EvalReport,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl GeneralizationOutcome {
    /// Re-checks that no training sample comes from the test site.
    pub fn audit(&self, corpus: &Corpus, test_site: &str) -> Result<(), EvalError> {
        match self
            .train
            .iter()
            .find(|&&i| corpus.samples()[i].site_id() == test_site)
        {
            Some(&i) => Err(EvalError::SiteLeak(i)),
            None => Ok(()),
        }
    }
}

/// Trains on every sample from `train_sites` and tests on `test_site`.
pub fn generalization_eval(
    corpus: &Corpus,
    train_sites: &BTreeSet<String>,
    test_site: &str,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<GeneralizationOutcome, EvalError> {
    if train_sites.contains(test_site) {
        return Err(EvalError::SiteOverlap(test_site.to_string()));
    }
    let train = corpus.indices_for_sites(train_sites.iter().map(String::as_str));
    let test = corpus.indices_for_sites([test_site]);
    if train.is_empty() {
        let names: Vec<&str> = train_sites.iter().map(String::as_str).collect();
        return Err(EvalError::EmptySite(names.join(",")));
    }
    if test.is_empty() {
        return Err(EvalError::EmptySite(test_site.to_string()));
    }
    let model = spec
        .clone()
        .with_seed(seed)
        .train(corpus.shape(), &corpus.observations(&train))?;
    let split = format!(
        "sites train={{{}}} test={test_site}",
        train_sites.iter().cloned().collect::<Vec<_>>().join(",")
    );
    let mut report = evaluate(&model, &corpus.observations(&test), &split, seed)?;
    report.classifier = spec.clone().with_seed(seed).describe();
    let out = GeneralizationOutcome {
        report,
        train,
        test,
    };
    out.audit(corpus, test_site)?;
    Ok(out)
}
