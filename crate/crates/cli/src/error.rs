//! Failure classification and process exit codes.

use std::fmt;

use crossing_core::classifiers::ModelError;
use crossing_core::domain::DomainError;
use crossing_core::eval::EvalError;
use crossing_core::features::FeatureError;
use crossing_core::ingest::IngestError;
use crossing_core::synth::SynthError;

/// | code | meaning                                                  |
/// |------|----------------------------------------------------------|
/// | 0    | success                                                  |
/// | 2    | usage: bad flags, unknown scenario/classifier, bad grid   |
/// | 3    | data: unreadable or malformed files, empty or bad splits  |
/// | 4    | numeric: non-finite values reaching features or models    |
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Data = 3,
    Numeric = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: ExitKind, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            kind,
            error: error.into(),
        }
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Failure {
            kind: self.kind,
            error: self.error.context(msg),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::new(ExitKind::Usage, anyhow::anyhow!(msg.into()))
}

pub fn data(msg: impl Into<String>) -> Failure {
    Failure::new(ExitKind::Data, anyhow::anyhow!(msg.into()))
}

fn domain_kind(e: &DomainError) -> ExitKind {
    match e {
        DomainError::NonFiniteField(_) => ExitKind::Numeric,
        _ => ExitKind::Data,
    }
}

fn feature_kind(e: &FeatureError) -> ExitKind {
    match e {
        FeatureError::Domain(d) => domain_kind(d),
        _ => ExitKind::Data,
    }
}

fn model_kind(e: &ModelError) -> ExitKind {
    match e {
        ModelError::InvalidParams(_) => ExitKind::Usage,
        ModelError::Feature(f) => feature_kind(f),
        _ => ExitKind::Data,
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(model_kind(&e), e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let kind = match &e {
            EvalError::InvalidGrid(_) | EvalError::SiteOverlap(_) => ExitKind::Usage,
            EvalError::Model(m) => model_kind(m),
            _ => ExitKind::Data,
        };
        Failure::new(kind, e)
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::new(ExitKind::Data, e)
    }
}

impl From<FeatureError> for Failure {
    fn from(e: FeatureError) -> Self {
        Failure::new(feature_kind(&e), e)
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        let kind = match &e {
            SynthError::UnknownScenario(_) => ExitKind::Usage,
            SynthError::InvalidScript(_) => ExitKind::Data,
            SynthError::Domain(d) => domain_kind(d),
        };
        Failure::new(kind, e)
    }
}

impl From<DomainError> for Failure {
    fn from(e: DomainError) -> Self {
        let kind = match &e {
            DomainError::InvalidShape(_) => ExitKind::Usage,
            other => domain_kind(other),
        };
        Failure::new(kind, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(ExitKind::Data, e)
    }
}
