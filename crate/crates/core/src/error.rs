use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension mismatch in layer {layer}: {detail}")]
    LayerMismatch { layer: usize, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown activation tag `{0}`")]
    UnknownActivation(String),
    #[error("unsupported activation `{0}`")]
    UnsupportedActivation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("polytope is unbounded and no bounding box was given")]
    Unbounded,
    #[error("degenerate simplex (|det| = {0:e})")]
    DegenerateSimplex(f64),
    #[error("budget exceeded: {what} would exceed {limit}")]
    Budget { what: String, limit: usize },
    #[error("unsupported density: {0}")]
    UnsupportedDensity(String),
    #[error("linear program failed: {0}")]
    Lp(String),
}
