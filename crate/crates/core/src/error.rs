use thiserror::Error;

/// Errors raised by the model, simulation and market layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unbounded support: {0}")]
    UnboundedSupport(String),

    #[error("invalid demand statistics: {0}")]
    InvalidStats(String),

    #[error("invalid cost rates: {0}")]
    InvalidRates(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate costs: energy, CO2e and violation prices are all zero")]
    DegenerateCosts,

    #[error("closed form requires satisfaction = 0 (got {0}); use the numeric solver")]
    NonzeroSatisfaction(f64),

    #[error("no balance root in [{lower}, {upper}]: residual at upper end is {residual_at_upper}")]
    NoRootInRange {
        lower: f64,
        upper: f64,
        residual_at_upper: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("policy cannot be resolved: {0}")]
    PolicyUnresolvable(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl ModelError {
    /// True for failures of the balance solver or policy resolution, as opposed
    /// to malformed input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            ModelError::DegenerateCosts
                | ModelError::NonzeroSatisfaction(_)
                | ModelError::NoRootInRange { .. }
                | ModelError::PolicyUnresolvable(_)
        )
    }
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
