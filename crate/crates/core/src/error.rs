use thiserror::Error;

/// Errors produced anywhere in the realization pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("numerical routine failed to converge: {0}")]
    NumericalFailure(String),

    #[error("POVM element {0} is not Hermitian")]
    ElementNotHermitian(usize),

    #[error(
        "POVM element {index} is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})"
    )]
    ElementNotPsd { index: usize, min_eigenvalue: f64 },

    #[error("POVM elements do not sum to identity (residual {0:.3e})")]
    SumNotIdentity(f64),

    #[error("POVM has no elements")]
    EmptyPovm,

    #[error("not a valid quantum state: {0}")]
    NotAState(String),

    #[error("not a projector: {0}")]
    NotAProjector(String),

    #[error("projector does not commute with POVM element {0}")]
    NotCommuting(usize),

    #[error("POVM is not realizable with the given projector: {0}")]
    NotRealizable(String),

    #[error(
        "rank-one step precondition violated: M^dag M - lambda |phi><phi| has eigenvalue {0:.3e}"
    )]
    PreconditionViolated(f64),

    #[error("phi lies outside range(M^dag) (distance {0:.3e})")]
    PhiOutsideRange(f64),

    #[error("no kernel vector available for M^dag at step ({outcome}, {branch}, {index})")]
    EmptyKernel {
        outcome: usize,
        branch: u8,
        index: usize,
    },

    #[error("drew a branch of negligible probability {0:.3e} twice")]
    DegenerateState(f64),

    #[error("state has weight {0:.3e} outside the subspace the tree accepts")]
    OutsideSupport(f64),

    #[error("tree was compiled from a different POVM (digest mismatch)")]
    DigestMismatch,

    #[error("tree nodes are missing accumulated operators")]
    MissingOperators,

    #[error("tree item ordering does not match the compilation order: {0}")]
    OrderingMismatch(String),

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("invalid JSON input: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
