use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("scenario {requested} is not supported by the data: {reason}")]
    ScenarioMismatch { requested: u8, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("weighted Gram matrix is singular")]
    Singular,

    #[error("no target-population unit in the subset; kappa is undefined")]
    DegenerateKappa,

    #[error("fitting stratum for {nuisance} is empty")]
    StratumEmpty { nuisance: &'static str },

    #[error("positivity violation in {nuisance}: {clamped} of {total} predictions below the trim threshold")]
    Positivity { nuisance: &'static str, clamped: usize, total: usize },

    #[error("nuisance specification error: {0}")]
    Spec(String),

    #[error("fold assignment infeasible: stratum (s={s}, a={a}) has {size} units for {k} folds")]
    FoldInfeasible { s: u8, a: u8, size: usize, k: usize },

    #[error("fold {fold}: {source}")]
    InFold {
        fold: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("inconsistent input: {0}")]
    InconsistentInput(String),

    #[error("root not found: {0}")]
    RootNotFound(String),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "SCHEMA",
            Error::Parse(_) => "PARSE",
            Error::Structural(_) => "STRUCTURAL",
            Error::ScenarioMismatch { .. } => "SCENARIO_MISMATCH",
            Error::Dimension { .. } => "DIMENSION",
            Error::Singular => "NUMERICAL_SINGULARITY",
            Error::DegenerateKappa => "DEGENERATE_KAPPA",
            Error::StratumEmpty { .. } => "STRATUM_EMPTY",
            Error::Positivity { .. } => "POSITIVITY_VIOLATION",
            Error::Spec(_) => "SPEC",
            Error::FoldInfeasible { .. } => "FOLD_INFEASIBLE",
            Error::InFold { source, .. } => source.code(),
            Error::Parameter(_) => "PARAMETER",
            Error::InconsistentInput(_) => "INCONSISTENT_INPUT",
            Error::RootNotFound(_) => "ROOT_NOT_FOUND",
        }
    }

    /// Name of the module the error originates from.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Schema(_) | Error::Parse(_) | Error::Structural(_) | Error::ScenarioMismatch { .. } => "data",
            Error::Dimension { .. }
            | Error::Singular
            | Error::DegenerateKappa
            | Error::StratumEmpty { .. }
            | Error::Positivity { .. }
            | Error::Spec(_) => "nuisance",
            Error::FoldInfeasible { .. } => "crossfit",
            Error::InFold { source, .. } => source.module(),
            Error::Parameter(_) | Error::RootNotFound(_) => "simulate",
            Error::InconsistentInput(_) => "inference",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Schema(_) | Error::Spec(_) | Error::Parameter(_) => ErrorClass::Config,
            Error::Singular | Error::RootNotFound(_) | Error::InconsistentInput(_) => ErrorClass::Numerical,
            Error::InFold { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    /// Failures caused by an unlucky sample (a near-separated or singular
    /// fit) rather than by the configuration or the data layout.
    pub fn is_sample_failure(&self) -> bool {
        match self {
            Error::Positivity { .. } | Error::Singular => true,
            Error::InFold { source, .. } => source.is_sample_failure(),
            _ => false,
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::InFold { fold, source: alloc::boxed::Box::new(self) }
    }
}
