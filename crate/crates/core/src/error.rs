use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing required section [{0}]")]
    MissingSection(&'static str),

    #[error("link '{link}' references unknown node '{node}'")]
    UnknownNodeReference { link: String, node: String },

    #[error("pump '{pump}' references unknown curve '{curve}'")]
    UnknownCurve { pump: String, curve: String },

    #[error("duplicate {kind} name '{name}'")]
    DuplicateName { kind: &'static str, name: String },

    #[error("network graph is disconnected ({components} components)")]
    DisconnectedGraph { components: usize },

    #[error("{element} '{name}': {attribute} must be positive, got {value}")]
    NonPositiveAttribute {
        element: &'static str,
        name: String,
        attribute: &'static str,
        value: f64,
    },

    #[error("invalid element '{name}': {reason}")]
    InvalidElement { name: String, reason: String },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("node {0} has zero degree")]
    IsolatedNode(usize),

    #[error("eigenvalue computation failed: {0}")]
    EigenFailure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("hydraulic solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular hydraulic system: {0}")]
    SingularSystem(String),

    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),

    #[error("invalid range for {name}: [{lower}, {upper}]")]
    InvalidRange { name: String, lower: f64, upper: f64 },

    #[error("too few scenes: {0}")]
    TooFewScenes(String),

    #[error("scaler has not been fitted")]
    UnfittedScaler,

    #[error("degenerate scaler statistics: {0}")]
    DegenerateScaler(String),

    #[error("invalid observation ratio {0}")]
    InvalidRatio(f64),

    #[error("observation mask has no observed node")]
    EmptyMask,

    #[error("empty input for {0}")]
    EmptyInput(&'static str),

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("loss diverged at epoch {epoch}: train {train_loss}, val {val_loss}")]
    DivergedLoss {
        epoch: usize,
        train_loss: f64,
        val_loss: f64,
    },

    #[error("unknown network '{0}', an explicit topology is required")]
    UnknownNetwork(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Process exit code for the CLI: 2 for bad data, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::IsolatedNode(_)
            | Error::EigenFailure(_)
            | Error::NonConvergence { .. }
            | Error::SingularSystem(_)
            | Error::DivergedLoss { .. }
            | Error::ZeroVariance(_) => 3,
            Error::Config(_) | Error::UnknownNetwork(_) | Error::InvalidRatio(_) => 1,
            _ => 2,
        }
    }
}
