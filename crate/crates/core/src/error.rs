use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("construction failed at {point:?}: {message}")]
    Construction { message: String, point: Vec<f64> },
    #[error("undefined input: {0}")]
    Undefined(String),
    #[error("window overflow: {message}; required window {required:?}")]
    WindowOverflow { message: String, required: Vec<(i64, i64)> },
    #[error("unavailable: {0}")]
    Unavailable(String),
    #[error("rejected form: c = {c:e} at point {point:?} along {vector:?}")]
    RejectedForm { c: f64, point: Vec<f64>, vector: Vec<f64> },
    #[error("empty sample set: {0}")]
    EmptySample(String),
    #[error("null direction search failed for seed {seed:?}")]
    RootFinding { seed: Vec<f64> },
    #[error("vector field not future timelike at {point:?}")]
    NotTimelike { point: Vec<f64> },
}
