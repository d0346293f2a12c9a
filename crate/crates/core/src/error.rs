use thiserror::Error;

/// Errors raised by the battery library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BatteryError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("matrix is not Hermitian: max |A - A†| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary: max |UU† - I| = {deviation:.3e}")]
    NotUnitary { deviation: f64 },

    #[error("trace is not one: Tr = {trace}")]
    TraceNotOne { trace: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("amplitudes are not normalized: sum |c_i|^2 = {norm_sq}")]
    NotNormalized { norm_sq: f64 },

    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("coefficients do not describe a locally passive state")]
    NotLocallyPassive,

    #[error("no restart reached entanglement residual <= {tol:.1e} at E = {target} (best residual {best_residual:.3e})")]
    Infeasible {
        target: f64,
        tol: f64,
        best_residual: f64,
    },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, BatteryError>;
