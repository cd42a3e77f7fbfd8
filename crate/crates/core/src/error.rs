use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("trajectory escaped the ball of radius {radius} at t = {t}")]
    Escaped { t: f64, radius: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("fractional integration needs {requested} steps, cap is {cap}")]
    MemoryLimit { requested: usize, cap: usize },

    #[error("Lyapunov run escaped at t = {t}; partial estimate {partial_mle} over {elapsed} time units")]
    MleEscaped {
        t: f64,
        partial_mle: f64,
        elapsed: f64,
    },

    #[error("eigenvalue argument undefined for a zero eigenvalue")]
    ZeroEigenvalue,

    #[error("signature matches several registry entries: {0:?}")]
    AmbiguousMatch(Vec<String>),

    #[error("no neighborhood scan for equilibrium {0}")]
    MissingScan(String),

    #[error("{0}")]
    Parse(String),
}
