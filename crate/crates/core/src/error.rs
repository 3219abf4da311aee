use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("value {value} outside the domain [0, 1]")]
    OutOfDomain { value: f64 },

    #[error("grid specs differ")]
    GridMismatch,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "diffraction orders overlap: grating period {period} px leaves a first-order window of {radius:.2} frequency bins"
    )]
    OrdersOverlap { period: f64, radius: f64 },

    #[error("projector set is rank deficient (rank {rank}, need {needed})")]
    RankDeficient { rank: usize, needed: usize },

    #[error("all counts are zero")]
    ZeroCounts,

    #[error("similarity undefined for an all-zero matrix")]
    ZeroMatrix,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("missing projector row `{0}`")]
    MissingProjector(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}
