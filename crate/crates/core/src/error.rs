use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hurwitz (max eigenvalue real part {max_real:e})")]
    NotHurwitz { max_real: f64 },
    #[error("vectorized Lyapunov system is numerically singular")]
    SingularSystem,
    #[error("state matrix A is singular to working precision")]
    SingularA,
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("optimal input not solvable: {0}")]
    NotSolvable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("switching rate {0} outside [0, 1]")]
    InvalidRate(f64),
    #[error("time {t} outside signal horizon [0, {horizon}]")]
    OutOfHorizon { t: f64, horizon: f64 },
    #[error("timer u3 = {u3} outside [{lo}, {hi}]")]
    TimerOutOfRange { u3: f64, lo: f64, hi: f64 },
    #[error("controller jump not enabled: u3 = {u3} < Delta = {big_delta}")]
    JumpNotEnabled { u3: f64, big_delta: f64 },
    #[error("admissible varrho window ({lo}, {hi}) is empty")]
    EmptyVarrhoWindow { lo: f64, hi: f64 },
    #[error("restart condition violated: Delta^2 - delta^2 = {lhs} <= 2 rho/(kappa mu) = {rhs}")]
    RestartConditionViolated { lhs: f64, rhs: f64 },
    #[error("step {step} exceeds stiffness budget min(eps)/10 = {limit}")]
    StiffnessBudgetExceeded { step: f64, limit: f64 },
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
