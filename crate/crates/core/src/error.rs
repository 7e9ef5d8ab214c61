use thiserror::Error;

/// Errors raised by the grid, segmentation and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid case: {0}")]
    InvalidGrid(String),

    #[error("invalid fleet: {0}")]
    InvalidFleet(String),

    #[error("reduced bus susceptance matrix is singular (network is not connected)")]
    SingularNetwork,

    #[error("injections do not balance: net {net:.3e} p.u.")]
    UnbalancedInjections { net: f64 },

    #[error("no feasible economic dispatch: {0}")]
    InfeasibleDispatch(String),

    #[error("all generator dispatches are zero, frequency response undefined")]
    ZeroFcr,

    #[error("solver backend `{0}` is not available")]
    BackendUnavailable(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("solution replay failed: {0}")]
    ReplayMismatch(String),

    #[error("big-M constant {big_m} binds on branch {branch} (|f| = {flow:.4} p.u.)")]
    BigMBinding { big_m: f64, branch: String, flow: f64 },

    #[error("malformed attack column: {0}")]
    MalformedColumn(String),

    #[error("segmentation does not match fleet: {0}")]
    SegmentationMismatch(String),

    #[error("discretization D = {denominator} is too coarse for {parts} uniform parts")]
    GridTooCoarse { denominator: u32, parts: usize },

    #[error("operator {operator} needs {needed} segments but only {available} are available")]
    SegmentLimit {
        operator: String,
        needed: usize,
        available: usize,
    },

    #[error("enumeration too large: {size} exceeds cap {cap}")]
    TooLarge { size: u128, cap: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
