use thiserror::Error;

/// Errors raised by the scoring backend.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("vector norm {norm:e} is at or below the floor {eps:e}")]
    NormUnderflow { norm: f64, eps: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty set where at least one member is required")]
    EmptySet,
    #[error("average of member vectors has norm {norm:e}")]
    DegenerateAverage { norm: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("k = {k} is outside 1..={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("cosine {cosine} is within 1e-6 of +-1; angular-margin gradient is singular")]
    GradSingularity { cosine: f64 },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("speaker {speaker} has no utterances")]
    InventoryGap { speaker: usize },
    #[error("out-of-domain pool has {available} speakers, need {needed}")]
    DomainTooSmall { needed: usize, available: usize },
    #[error("class {class} has {count} members, need at least {needed}")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },
    #[error("covariance is not positive definite after ridge")]
    CovarianceSingular,
    #[error("interpolation weight {0} outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("cohort scores have zero variance")]
    DegenerateCohort,
    #[error("no embedding for utterance or model '{0}'")]
    MissingEmbedding(String),
    #[error("no language decision for utterance '{0}'")]
    MissingLidDecision(String),
    #[error("labels must contain both target and nontarget trials")]
    DegenerateLabels,
    #[error("optimizer did not converge; final gradient norm {grad_norm:e}")]
    NonConvergence { grad_norm: f64 },
    #[error("trial key sets differ: {0}")]
    KeyMismatch(String),
    #[error("fusion weight {0} is not a positive finite number")]
    WeightInvalid(f64),
    #[error("invalid parameter: {0}")]
    ParamInvalid(String),
    #[error("invalid corpus spec: {0}")]
    SpecInvalid(String),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("unsupported format '{name}' version {version}")]
    VersionUnsupported { name: String, version: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Coarse error class used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NormUnderflow { .. }
            | Error::DegenerateAverage { .. }
            | Error::NonFinite(_)
            | Error::GradSingularity { .. }
            | Error::CovarianceSingular
            | Error::DegenerateCohort
            | Error::NonConvergence { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    /// Variant name, stable across releases; used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NormUnderflow { .. } => "NormUnderflow",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptySet => "EmptySet",
            Error::DegenerateAverage { .. } => "DegenerateAverage",
            Error::NonFinite(_) => "NonFinite",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::GradSingularity { .. } => "GradSingularity",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::InventoryGap { .. } => "InventoryGap",
            Error::DomainTooSmall { .. } => "DomainTooSmall",
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::CovarianceSingular => "CovarianceSingular",
            Error::WeightOutOfRange(_) => "WeightOutOfRange",
            Error::DegenerateCohort => "DegenerateCohort",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::MissingLidDecision(_) => "MissingLidDecision",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::KeyMismatch(_) => "KeyMismatch",
            Error::WeightInvalid(_) => "WeightInvalid",
            Error::ParamInvalid(_) => "ParamInvalid",
            Error::SpecInvalid(_) => "SpecInvalid",
            Error::DuplicateId(_) => "DuplicateId",
            Error::Parse { .. } => "Parse",
            Error::VersionUnsupported { .. } => "VersionUnsupported",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
