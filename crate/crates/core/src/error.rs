use thiserror::Error;

/// Errors raised by kernel construction, the CGF solver, the mod-φ
/// machinery and the deviation expansions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel is not summable: {0}")]
    NonSummableKernel(String),

    #[error("power moment of order {order} diverges")]
    DivergentMoment { order: u32 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fixed-point solver did not converge after {iterations} iterations (z = {z})")]
    NoConvergence { iterations: usize, z: String },

    #[error("near-critical evaluation: ‖α‖₁·x(θ) = {load} at θ = {theta}")]
    NearCritical { theta: f64, load: f64 },

    #[error("f-recursion overflowed at index {index}")]
    Overflow { index: usize },

    #[error("no certified truncation available: {0}")]
    NoCertificate(String),

    #[error("saddle point θ* = {theta_star} is within 1e-6 of θ_c = {theta_c}")]
    Saturation { theta_star: f64, theta_c: f64 },

    #[error("sequence mass {mass} is not subcritical (must be < 1)")]
    NotSubcritical { mass: f64 },

    #[error("malformed descriptor: {0}")]
    Descriptor(String),
}

pub type Result<T> = std::result::Result<T, Error>;
