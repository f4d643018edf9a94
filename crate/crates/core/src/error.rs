//! Crate-wide error type.

/// Convenience alias used by every fallible operation in the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by graph extraction, simulation, feature encoding,
/// evaluation, analysis, and synthetic generation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A mask or pixel set that must be non-empty was empty.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A centerline pixel lies outside the vessel mask or on background.
    #[error("invalid centerline: {0}")]
    InvalidCenterline(String),

    /// Pruning removed every component, or no rooted component survived.
    #[error("no arterial tree: {0}")]
    NoArterialTree(String),

    /// Provided roots do not match the skeleton components.
    #[error("root mismatch: {0}")]
    RootMismatch(String),

    /// A mask with no background pixel has no defined vessel radii.
    #[error("mask has no background pixels; radii are undefined")]
    NoBackground,

    /// Non-positive or non-finite radius handed to a hemodynamic routine.
    #[error("invalid radius: {0}")]
    InvalidRadius(String),

    /// A tree (or an outlet list) without any outlet cannot be solved.
    #[error("no outlets: {0}")]
    NoOutlets(String),

    /// The flow system could not be assembled or solved.
    #[error("solve failure: {0}")]
    SolveFailure(String),

    /// A hemodynamic solution does not cover the graph it is paired with.
    #[error("incomplete solution: {0}")]
    IncompleteSolution(String),

    /// Not enough data to build a codebook or run an evaluation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Regularization strength must be positive and finite.
    #[error("invalid regularization: {0}")]
    InvalidRegularization(String),

    /// A cross-validation fold could not be formed (e.g. single-class data).
    #[error("fold error: {0}")]
    FoldError(String),

    /// Correlation is undefined (fewer than two points, or zero variance).
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// A cohort group that must be non-empty was empty.
    #[error("empty group: {0}")]
    EmptyGroup(String),

    /// Synthetic tree depth would shrink radii below one pixel.
    #[error("depth too large: {0}")]
    DepthTooLarge(String),

    /// Unknown field name or malformed configuration value.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// Requested raster would be unreasonably large.
    #[error("raster too large: {0} x {1} pixels")]
    RasterTooLarge(usize, usize),

    /// Malformed input file.
    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Image decode/encode failure.
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Helper for file-format errors.
    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
