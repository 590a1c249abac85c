use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing view file for angular position ({s}, {t}) in {dir}")]
    MissingView { dir: PathBuf, s: usize, t: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("{count} view files is not a perfect square grid (need at least 2x2)")]
    NotSquareGrid { count: usize },
    #[error("view pattern {pattern} is infeasible on a {n}x{n} grid: {reason}")]
    InfeasiblePattern { pattern: String, n: usize, reason: String },
    #[error("bad train count {train} for {total} scenes (need 0 < train < total)")]
    BadCount { train: usize, total: usize },
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("aperture block does not fit inside the pupil: {0}")]
    OutOfPupil(String),
    #[error("value out of range: {0}")]
    BadRange(String),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("slope {slope} px/view shifts views out of a {height}x{width} image")]
    SlopeTooLarge { slope: f64, height: usize, width: usize },
    #[error("operator {op} does not accept complex input")]
    DomainError { op: &'static str },
    #[error("loss must be a real scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("bad aperture mode: {0}")]
    BadMode(String),
    #[error("beta must be non-negative, got {0}")]
    NonNegativeBetaRequired(f64),
    #[error("image {height}x{width} is smaller than the required {window}x{window} window")]
    ImageTooSmall { height: usize, width: usize, window: usize },
    #[error("non-finite loss at epoch {epoch}: {diagnostic}")]
    NonFiniteLoss { epoch: usize, diagnostic: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("image codec error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. })
    }

    /// True for errors caused by the contents of input files or directories.
    pub fn is_data(&self) -> bool {
        matches!(
            self,
            Error::MissingView { .. }
                | Error::NotSquareGrid { .. }
                | Error::Image { .. }
                | Error::Io(_)
                | Error::Checkpoint(_)
        )
    }
}
