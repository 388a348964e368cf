use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation level {got} below the minimum {min} for {family}")]
    TruncationTooSmall {
        family: &'static str,
        min: usize,
        got: usize,
    },

    #[error("model has no Lyapunov data field `{0}`")]
    MissingLyapunov(&'static str),

    #[error("discount rate must be positive, got {0}")]
    NonPositiveDiscount(f64),

    #[error(
        "value iteration hit {iterations} iterations without reaching tolerance \
         (kappa = {kappa}, last residual = {residual})"
    )]
    MaxIterations {
        iterations: usize,
        kappa: f64,
        residual: f64,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("explosion suspected: {jumps} jumps by time {time} (last state {state})")]
    ExplosionSuspected {
        jumps: u64,
        time: f64,
        state: String,
    },

    #[error("unknown builtin model `{0}`")]
    UnknownBuiltin(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
