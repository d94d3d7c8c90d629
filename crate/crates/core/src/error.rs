use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("adaptive quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("finite-difference step underflow (h = {0:e})")]
    StepUnderflow(f64),
    #[error("state blew up at parameter {param} (norm {norm:e})")]
    Blowup { param: num_complex::Complex64, norm: f64, state: Vec<num_complex::Complex64> },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("singular curve: {0}")]
    SingularCurve(String),
    #[error("argument is on the period lattice")]
    LatticePoint,
    #[error("point is off the curve (residual {0:e})")]
    OffCurve(f64),
    #[error("pole hit: {0}")]
    PoleHit(String),
    #[error("gauge transform singular: A12 vanishes")]
    GaugeSingular,
    #[error("sheet singular (p = 0): {0}")]
    SheetSingular(String),
    #[error("pole fit rejected (residual {0:e})")]
    FitRejected(f64),
    #[error("Newton iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("denominator vanishes: {0}")]
    DenominatorZero(String),
    #[error("Jacobian singular")]
    JacobianSingular,
    #[error("family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("point is off the r = 0 Lagrangian")]
    OffLagrangian,
    #[error("no pole in span")]
    NoPoleInSpan,
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
