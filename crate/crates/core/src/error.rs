use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("phase integrand 1 - beta_E(xi) is non-positive at xi = {xi} (E = {energy})")]
    PhaseUndefined { energy: f64, xi: f64 },

    #[error("phase search exhausted its budget of {samples} samples")]
    BudgetExhausted { samples: usize },

    #[error("ODE step failure near xi = {at}: {reason}")]
    StepFailure { at: f64, reason: String },

    #[error("Levinson iteration not contracting: {0}")]
    NotContracting(String),

    #[error("fit window too short: {0}")]
    WindowTooShort(String),

    #[error("boundary matching found no crossing over kappa in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("incomplete inputs: {0}")]
    IncompleteInputs(String),
}

pub type Result<T> = std::result::Result<T, Error>;
