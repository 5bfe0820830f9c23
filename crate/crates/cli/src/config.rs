//! Run configuration: config file, flag merging, split specs and the
//! provenance header written into every output.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crossing_core::classifiers::ClassifierSpec;
use crossing_core::domain::FeatureShape;
use crossing_core::eval::{stratified_split_labels, Corpus, EvalError, SplitRatio};
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult, Failure};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CROSSING_OUT_DIR";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf).unwrap_or_else(default_out_dir)
}

/// How samples are divided into a training and a test part.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum SplitSpec {
    /// Every sample is in both parts.
    #[default]
    All,
    /// Stratified `train:test` split.
    Ratio(SplitRatio),
    /// Train on the listed sites and test on a held-out one.
    Sites {
        train: BTreeSet<String>,
        test: String,
    },
}

impl FromStr for SplitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad split `{s}`; expected all, ratio:A:B or sites:X,Y:Z");
        if s == "all" {
            return Ok(SplitSpec::All);
        }
        if let Some(rest) = s.strip_prefix("ratio:") {
            let (a, b) = rest.split_once(':').ok_or_else(bad)?;
            let train: u32 = a.parse().map_err(|_| bad())?;
            let test: u32 = b.parse().map_err(|_| bad())?;
            if train == 0 || test == 0 {
                return Err(bad());
            }
            return Ok(SplitSpec::Ratio(SplitRatio { train, test }));
        }
        if let Some(rest) = s.strip_prefix("sites:") {
            let (a, b) = rest.rsplit_once(':').ok_or_else(bad)?;
            let train: BTreeSet<String> = a
                .split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(String::from)
                .collect();
            let test = b.trim().to_string();
            if train.is_empty() || test.is_empty() {
                return Err(bad());
            }
            return Ok(SplitSpec::Sites { train, test });
        }
        Err(bad())
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSpec::All => f.write_str("all"),
            SplitSpec::Ratio(r) => write!(f, "ratio:{r}"),
            SplitSpec::Sites { train, test } => {
                let t: Vec<&str> = train.iter().map(String::as_str).collect();
                write!(f, "sites:{}:{test}", t.join(","))
            }
        }
    }
}

impl SplitSpec {
    /// (train, test) sample indices.
    pub fn apply(&self, corpus: &Corpus, seed: u64) -> CliResult<(Vec<usize>, Vec<usize>)> {
        Ok(match self {
            SplitSpec::All => (corpus.all_indices(), corpus.all_indices()),
            SplitSpec::Ratio(r) => {
                let labels = corpus.labels()?;
                let s = stratified_split_labels(&labels, *r, seed)?;
                (s.train, s.test)
            }
            SplitSpec::Sites { train, test } => {
                if train.contains(test) {
                    return Err(EvalError::SiteOverlap(test.clone()).into());
                }
                (
                    corpus.indices_for_sites(train.iter().map(String::as_str)),
                    corpus.indices_for_sites([test.as_str()]),
                )
            }
        })
    }
}

/// Optional TOML config file. Every field can be overridden by a flag.
///
/// ```toml
/// seed = 7
/// m = 10
/// k = 10
/// split = "ratio:3:2"
///
/// [classifier]
/// classifier = "forest"
/// n_trees = 100
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSpec>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::from(e).context(format!("reading {}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| usage(e.to_string().trim_end()))
    }

    pub fn to_toml_string(&self, header: &RunConfig) -> String {
        let mut out = header.comment_block("# ");
        out.push_str(&toml::to_string(self).expect("config serializes"));
        out
    }
}

pub fn shape(m: Option<usize>, k: Option<usize>, cfg: &ConfigFile) -> CliResult<FeatureShape> {
    let d = FeatureShape::default();
    let m = m.or(cfg.m).unwrap_or(d.max_objects());
    let k = k.or(cfg.k).unwrap_or(d.timesteps());
    Ok(FeatureShape::new(m, k)?)
}

pub fn split(flag: Option<&SplitSpec>, cfg: &ConfigFile) -> CliResult<SplitSpec> {
    match (flag, &cfg.split) {
        (Some(s), _) => Ok(s.clone()),
        (None, Some(s)) => s.parse().map_err(usage),
        (None, None) => Ok(SplitSpec::All),
    }
}

/// Classifier from `--classifier`, the config file and `--set` overrides,
/// in increasing precedence. The config's parameters are kept when the flag
/// names the same classifier.
pub fn classifier(
    flag: Option<&str>,
    overrides: &[String],
    cfg: &ConfigFile,
) -> CliResult<ClassifierSpec> {
    let base = match (flag, &cfg.classifier) {
        (Some(name), Some(c))
            if ClassifierSpec::default_for(name).map(|d| d.kind()) == Some(c.kind()) =>
        {
            c.clone()
        }
        (Some(name), _) => ClassifierSpec::default_for(name).ok_or_else(|| {
            usage(format!(
                "unknown classifier `{name}` (forest, svm, knn, baseline)"
            ))
        })?,
        (None, Some(c)) => c.clone(),
        (None, None) => ClassifierSpec::default_for("forest").expect("forest exists"),
    };
    let spec = apply_overrides(&base, overrides)?;
    spec.validate()?;
    Ok(spec)
}

/// Applies `key=value` overrides; values are parsed as TOML, falling back to
/// a bare string (so `kernel=rbf` works).
pub fn apply_overrides(spec: &ClassifierSpec, overrides: &[String]) -> CliResult<ClassifierSpec> {
    if overrides.is_empty() {
        return Ok(spec.clone());
    }
    let mut table = toml::Table::try_from(spec).expect("spec serializes to a table");
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got `{o}`")))?;
        let key = key.trim();
        if key == "classifier" {
            return Err(usage("use --classifier to change the classifier kind"));
        }
        let value = format!("v = {}", raw.trim())
            .parse::<toml::Table>()
            .ok()
            .and_then(|t| t.get("v").cloned())
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        table.insert(key.to_string(), value);
    }
    table.try_into().map_err(|e: toml::de::Error| {
        usage(format!(
            "bad --set for {}: {}",
            spec.kind(),
            e.to_string().trim_end()
        ))
    })
}

/// Provenance of one invocation. Output locations are left out so that
/// reruns into different directories produce identical files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(subcommand: &str) -> Self {
        let mut r = RunConfig::default();
        r.set("tool", format!("crossing {}", env!("CARGO_PKG_VERSION")));
        r.set("subcommand", subcommand);
        r
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// `run.key=value` lines.
    pub fn lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(k, v)| format!("run.{k}={}", v.replace('\n', " ")))
            .collect()
    }

    pub fn comment_block(&self, prefix: &str) -> String {
        self.lines()
            .into_iter()
            .map(|l| format!("{prefix}{l}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_specs_roundtrip() {
        for s in ["all", "ratio:3:2", "sites:a,b:c"] {
            let spec: SplitSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("ratio:3".parse::<SplitSpec>().is_err());
        assert!("ratio:0:2".parse::<SplitSpec>().is_err());
        assert!("sites::c".parse::<SplitSpec>().is_err());
        assert!("bogus".parse::<SplitSpec>().is_err());
    }

    #[test]
    fn overrides_parse_typed_values() {
        let base = ClassifierSpec::default_for("svm").unwrap();
        let s = apply_overrides(&base, &["c=1.5".into(), "kernel=rbf".into()]).unwrap();
        assert!(s.describe().contains("c=1.5"));
        assert!(s.describe().contains("kernel=rbf"));
        assert!(apply_overrides(&base, &["nonsense=1".into()]).is_err());
        assert!(apply_overrides(&base, &["c".into()]).is_err());
    }

    #[test]
    fn flags_win_over_config() {
        let cfg = ConfigFile::from_toml_str(
            "seed = 3\nm = 4\n[classifier]\nclassifier = \"knn\"\nk = 3\n",
        )
        .unwrap();
        assert_eq!(classifier(None, &[], &cfg).unwrap().describe(), "knn(k=3)");
        assert_eq!(
            classifier(Some("knn"), &[], &cfg).unwrap().describe(),
            "knn(k=3)"
        );
        assert_eq!(
            classifier(Some("knn"), &["k=5".into()], &cfg)
                .unwrap()
                .describe(),
            "knn(k=5)"
        );
        assert_eq!(
            classifier(Some("baseline"), &[], &cfg).unwrap().kind(),
            "baseline"
        );
        assert_eq!(shape(None, Some(7), &cfg).unwrap().to_string(), "4x3x7");
        assert!(classifier(Some("tree"), &[], &cfg).is_err());
    }

    #[test]
    fn config_file_roundtrip() {
        let cfg = ConfigFile {
            seed: Some(1),
            m: None,
            k: Some(5),
            split: Some("ratio:3:2".into()),
            classifier: ClassifierSpec::default_for("baseline"),
        };
        let mut run = RunConfig::new("cv");
        run.set("seed", 1);
        let text = cfg.to_toml_string(&run);
        assert!(text.starts_with("# run.seed=1\n"));
        assert_eq!(ConfigFile::from_toml_str(&text).unwrap(), cfg);
    }
}
