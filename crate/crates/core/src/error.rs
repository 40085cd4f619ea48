use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("grid too coarse: {quantity} changed by {change:.3e} (relative) when dx was halved")]
    UnderResolved { quantity: &'static str, change: f64 },
    #[error("profile step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("heat-kernel quadrature did not converge at x = {x}, t = {t} (last relative change {change:.3e})")]
    QuadratureNotConverged { x: f64, t: f64, change: f64 },
    #[error("profile time step underflow at t = {t} (dt = {dt:.3e})")]
    BlowUp { t: f64, dt: f64 },
    #[error("heat-kernel oracle requires t > 0, got {0}")]
    NonPositiveTime(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),
    #[error("flow step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("flow blew up at t = {t}: dt fell to {dt:.3e}")]
    BlowUp { t: f64, dt: f64 },
    #[error("time mismatch: state at t = {state}, profile at t = {profile}")]
    TimeMismatch { state: f64, profile: f64 },
    #[error("step budget of {0} steps exhausted")]
    BudgetExhausted(usize),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("entropy function evaluated outside its domain: z = {0}")]
    Domain(f64),
    #[error("power-law fit needs at least {needed} samples in the window, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("power-law fit needs positive values, found {value} at t = {t}")]
    NonpositiveValue { t: f64, value: f64 },
    #[error("decay series must have strictly increasing times and finite nonnegative values (sample {0})")]
    InvalidSeries(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
