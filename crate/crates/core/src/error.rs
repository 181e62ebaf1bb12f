use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("unknown catalog id `{0}`")]
    UnknownId(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate Jacobian: JF = {value:e} at or below floor {floor:e}")]
    DegenerateJacobian { value: f64, floor: f64 },

    #[error("point is off the zero set: |F(x)| = {residual:e} > {tol:e}")]
    OffZeroSet { residual: f64, tol: f64 },

    #[error("H1 violated at zero {point:?}: JF = {jf:e}")]
    H1Violation { point: Vec<f64>, jf: f64 },

    #[error("singular Hessian at minimizer {point}: second derivative {value:e}")]
    SingularHessian { point: f64, value: f64 },

    #[error("chain diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures caused by user input or configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::UnknownId(_) | Error::InvalidParameter(_) | Error::Config(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what}: {xs:?}")))
    }
}
