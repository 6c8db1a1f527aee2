use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the admissible domain: {0}")]
    Domain(String),

    #[error("grid with m^d = {points:e} points exceeds the cap of {cap}")]
    GridCap { points: f64, cap: u64 },

    #[error("ill-posed local fit at {location}: lambda_min(B) = {lambda_min:e}, condition = {condition:e}")]
    IllPosedFit {
        location: String,
        lambda_min: f64,
        condition: f64,
    },

    #[error("no value supplied for active grid point {0}")]
    MissingValue(usize),

    #[error("column {0} has a degenerate (constant or non-finite) range")]
    DegenerateRange(usize),

    #[error("factorial overflow: {0}")]
    Overflow(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
