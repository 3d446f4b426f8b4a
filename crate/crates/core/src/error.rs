use thiserror::Error;

/// Failures raised by the numerical pipeline.
///
/// Structural failures (`Interlacing`, `MultipleCriticalPoints`,
/// `EdgeMislocation`) signal that a computed spectrum is internally
/// inconsistent and must not be used downstream.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("coefficient {which}[{index}] is not finite")]
    NonFiniteCoefficient { which: &'static str, index: usize },

    #[error("cosine and sine coefficient lists differ in length ({cos} vs {sin})")]
    LengthMismatch { cos: usize, sin: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator step size underflow at lambda = {lambda}")]
    IntegratorFailure { lambda: f64 },

    #[error("Hill matrix eigensolve failed: {0}")]
    EigenFailure(String),

    #[error("root not bracketed on [{lo}, {hi}] ({context})")]
    RootNotBracketed { lo: f64, hi: f64, context: String },

    #[error("interlacing violated between edge indices {first} and {second}")]
    Interlacing { first: usize, second: usize },

    #[error("gap {n} is closed")]
    GapClosed { n: usize },

    #[error("gap index {n} outside computed range 1..={max}")]
    GapOutOfRange { n: usize, max: usize },

    #[error("derivative of the discriminant changes sign more than once in gap {n}")]
    MultipleCriticalPoints { n: usize },

    #[error("edge mislocation in gap {n}: (-1)^n Delta - 1 = {excess:e} < 0 at z = {z}")]
    EdgeMislocation { n: usize, z: f64, excess: f64 },

    #[error("point {z} is outside gap {n}")]
    OutsideGap { n: usize, z: f64 },

    #[error("sinh v underflow in gap {n} at interior z = {z}")]
    SinhUnderflow { n: usize, z: f64 },

    #[error("Jacobian of (a, b) -> (I1, I2) is ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },
}

pub type Result<T> = std::result::Result<T, SpectralError>;
