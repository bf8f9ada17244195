use thiserror::Error;

/// Errors raised by the profile integrator, the parabolic solver and the
/// reference-solution evaluators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integration failed at rho = {rho:e}: {reason}")]
    IntegrationFailure { rho: f64, reason: String },

    #[error("monotonicity violated at rho = {rho:e}: wbar_rho = {wbar_rho:e}")]
    MonotonicityViolation { rho: f64, wbar_rho: f64 },

    #[error("radius {r:e} outside the valid range [{lo:e}, {hi:e}]")]
    OutOfRange { r: f64, lo: f64, hi: f64 },

    #[error("profile reaches r = {reached:e} but r = {requested:e} was requested")]
    InsufficientRange { requested: f64, reached: f64 },

    #[error("stencil leaves the domain: {0}")]
    Stencil(String),

    #[error("Newton iteration diverged at t = {t:e} (dt = {dt:e})")]
    NewtonDivergence { t: f64, dt: f64 },

    #[error("positivity lost at t = {t:e}, node {node}")]
    PositivityLoss { t: f64, node: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
