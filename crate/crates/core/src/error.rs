use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("degenerate simplex: vertices are affinely dependent within tolerance")]
    DegenerateSimplex,
    #[error("landmarks are not in general position: {0}")]
    NotGeneralPosition(String),
    #[error("triangulation is not unique: {count} cospherical (d+2)-subsets, first {first:?}")]
    NonUniqueTriangulation { count: usize, first: Vec<usize> },
    #[error("point lies outside the convex hull of the landmarks")]
    OutsideHull,
    #[error("no feasible support found for the query point")]
    Infeasible,
    #[error("m = {m} exceeds the enumeration budget of {budget}")]
    EnumerationBudgetExceeded { m: usize, budget: usize },
    #[error("non-finite iterate at step {step}; step size likely too large")]
    NonFiniteIterate { step: usize },
    #[error("trajectory shapes disagree with the dictionary: {0}")]
    TrajectoryMismatch(String),
    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("failed to sample a general-position landmark set after {attempts} attempts")]
    GeneralPositionFailure { attempts: usize },
    #[error("bad IDX magic: expected {expected:#010x}, got {got:#010x}")]
    BadMagic { expected: u32, got: u32 },
    #[error("truncated IDX file: {0}")]
    TruncatedFile(String),
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Jacobi eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("label vectors have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("similarity graph is degenerate: {components} connected components for k = {k}")]
    DegenerateGraph { components: usize, k: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
