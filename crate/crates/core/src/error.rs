use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("half-power bandwidth undefined: 2*kappa_int^2 >= kappa_tot^2 (kappa_int/kappa_tot = {ratio:.6})")]
    UndercoupledDegenerate { ratio: f64 },

    #[error("quadrature did not reach tolerance: estimate {estimate:e}, error {error:e} after {intervals} intervals")]
    QuadratureNonConvergence {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("ODE integration failed: {0}")]
    Integration(String),

    #[error("steady-state decay fit did not converge: relative residual {residual:e}")]
    DecayFitNonConvergence { residual: f64 },

    #[error("temperature {temperature} K is outside [0, T_c = {t_c} K)")]
    TemperatureOutOfRange { temperature: f64, t_c: f64 },

    #[error("value {value} outside domain: {reason}")]
    Domain { value: f64, reason: String },

    #[error("region `{0}` is empty")]
    EmptyRegion(&'static str),

    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("no resonance dip found: minimum sits at the edge of the trace")]
    NoDipFound,

    #[error("Jacobian is rank deficient at the optimum (rank {rank} of {params})")]
    SingularJacobian { rank: usize, params: usize },

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
