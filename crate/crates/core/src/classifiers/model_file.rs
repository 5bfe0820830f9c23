//! Versioned model file.
//!
//! ```text
//! CROSSING-MODEL                         magic, line 1
//! version=1                              format version, line 2
//! kind=forest                            forest | svm | knn | baseline
//! shape=10x3x10                          m x n x k
//! params=forest(n_trees=100, ...)        human-readable, ignored on read
//! meta.<key>=<value>                     zero or more, sorted by key
//!                                        one empty line
//! {"kind":"forest",...}                  JSON payload, one line
//! ```
//!
//! All lines end in `\n`. Metadata values have `\`, newline and carriage
//! return escaped as `\\`, `\n`, `\r`. Floats in the payload use shortest
//! round-trip formatting, so a reloaded model predicts bit-identically.
//! Files with a version above [`FORMAT_VERSION`] are rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::domain::FeatureShape;

use super::{ModelBody, ModelError, TrainedModel};

pub const MAGIC: &str = "CROSSING-MODEL";
pub const FORMAT_VERSION: u32 = 1;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn params_line(body: &ModelBody) -> String {
    use super::ClassifierSpec as S;
    let spec = match body {
        ModelBody::Forest(m) => S::Forest(m.params().clone()),
        ModelBody::Svm(m) => S::Svm(m.params().clone()),
        ModelBody::Knn(m) => S::Knn(m.params().clone()),
        ModelBody::Baseline(m) => S::Baseline(m.params.clone()),
    };
    spec.describe()
}

fn parse_shape(s: &str) -> Result<FeatureShape, ModelError> {
    let parts: Vec<&str> = s.split('x').collect();
    let bad = || ModelError::Format(format!("bad shape `{s}`"));
    if parts.len() != 3 || parts[1] != "3" {
        return Err(bad());
    }
    let m = parts[0].parse().map_err(|_| bad())?;
    let k = parts[2].parse().map_err(|_| bad())?;
    FeatureShape::new(m, k).map_err(|_| bad())
}

impl TrainedModel {
    pub fn to_file_string(&self) -> String {
        let mut out = format!(
            "{MAGIC}\nversion={FORMAT_VERSION}\nkind={}\nshape={}\nparams={}\n",
            self.kind(),
            self.shape,
            params_line(&self.body)
        );
        for (k, v) in &self.metadata {
            out.push_str(&format!("meta.{}={}\n", escape(k), escape(v)));
        }
        out.push('\n');
        out.push_str(&serde_json::to_string(&self.body).expect("model body serializes"));
        out.push('\n');
        out
    }

    pub fn from_file_str(text: &str) -> Result<Self, ModelError> {
        let fmt_err = |m: &str| ModelError::Format(m.to_string());
        let mut lines = text.split('\n');
        if lines.next() != Some(MAGIC) {
            return Err(fmt_err("missing magic line"));
        }
        let version: u32 = lines
            .next()
            .and_then(|l| l.strip_prefix("version="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fmt_err("missing version line"))?;
        if version > FORMAT_VERSION || version == 0 {
            return Err(ModelError::VersionMismatch {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let mut kind = None;
        let mut shape = None;
        let mut metadata = BTreeMap::new();
        for line in lines.by_ref() {
            if line.is_empty() {
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fmt_err(&format!("bad header line `{line}`")))?;
            match key {
                "kind" => kind = Some(value.to_string()),
                "shape" => shape = Some(parse_shape(value)?),
                "params" => {}
                k if k.starts_with("meta.") => {
                    metadata.insert(unescape(&k["meta.".len()..]), unescape(value));
                }
                other => return Err(fmt_err(&format!("unknown header key `{other}`"))),
            }
        }
        let kind = kind.ok_or_else(|| fmt_err("missing kind"))?;
        let shape = shape.ok_or_else(|| fmt_err("missing shape"))?;
        let payload = lines.next().ok_or_else(|| fmt_err("missing payload"))?;
        let body: ModelBody =
            serde_json::from_str(payload).map_err(|e| fmt_err(&format!("payload: {e}")))?;
        let model = TrainedModel {
            shape,
            metadata,
            body,
        };
        if model.kind() != kind {
            return Err(fmt_err("kind header does not match payload"));
        }
        let body_shape = match &model.body {
            ModelBody::Forest(m) => Some(m.shape()),
            ModelBody::Svm(m) => Some(m.shape()),
            ModelBody::Knn(m) => Some(m.shape()),
            ModelBody::Baseline(_) => None,
        };
        if body_shape.is_some_and(|s| s != shape) {
            return Err(fmt_err("shape header does not match payload"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_file_string())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ModelError::Format(format!("{}: {e}", path.display())))?;
        TrainedModel::from_file_str(&text)
    }
}
