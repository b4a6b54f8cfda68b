use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("class priors ({0}, {1}) must lie in [0,1] and sum to 1")]
    InvalidPriors(f64, f64),

    #[error("probability {value} for feature `{feature}` is outside [0,1]")]
    ProbabilityOutOfRange { feature: String, value: f64 },

    #[error("feature name must be non-empty (row {0})")]
    EmptyFeatureName(usize),

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),

    #[error("table has no features")]
    EmptyTable,

    #[error("multi-class table needs at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("feature index {0} appears more than once in the subset")]
    DuplicateIndex(usize),

    #[error("feature index {index} out of range for a table of {len} features")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("capacity exceeded: {required} exceeds the width cap of depth {max_depth}")]
    Capacity { max_depth: u32, required: String },

    #[error("exhaustive search needs {required} subset evaluations, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("no cell carries mass in both classes; the error is already zero and the no-improvement region is undefined")]
    RegionUndefined,

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("{measure} is inconsistent: prior {prior} but error component {component}")]
    InconsistentMeasure {
        measure: &'static str,
        prior: f64,
        component: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        known: String,
    },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("rank tables cover different feature sets")]
    MismatchedFeatures,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the width cap or a search budget.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. } | Error::BudgetExceeded { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
