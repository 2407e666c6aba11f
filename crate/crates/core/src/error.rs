use thiserror::Error;

/// Errors raised by the scheme toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trivial modulus: reduction needs a modulus of degree >= 1")]
    TrivialModulus,
    #[error("root extraction failed: {0}")]
    RootExtraction(String),
    #[error("confluent nodes: interpolation nodes {0} and {1} coincide")]
    ConfluentNodes(usize, usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("not in overlap: {0}")]
    NotInOverlap(String),
    #[error("chart {chart} does not belong to surface {kind}")]
    WrongChart { kind: String, chart: String },
    #[error("confluent point: use coefficient chart (minimum root separation {0:e})")]
    ConfluentPoint(f64),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("tangent-space dimension failure: expected {expected}, computed {computed}")]
    TangentDimension { expected: usize, computed: usize },
    #[error("eigensolver failure")]
    Eigensolver,
    #[error("no closed form implemented; sample away from discriminant")]
    NoClosedForm,
    #[error("singular symplectic matrix (sigma_min/sigma_max = {0:e})")]
    SingularForm(f64),
    #[error("flow crossed discriminant: {0}")]
    FlowCrossedDiscriminant(String),
    #[error("mu inconsistent with spectrum (residual {0:e})")]
    MuInconsistent(f64),
    #[error("distribution rank: expected {expected}, computed {computed}")]
    DistributionRank { expected: usize, computed: usize },
    #[error("lift failure: eigenvector lift lies in ker(d mu)")]
    LiftFailure,
    #[error("eigenvalue continuation failed: {0}")]
    Continuation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
