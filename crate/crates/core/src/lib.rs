//! Wastage-penalty balance model for cloud resource provisioning.
//!
//! - [`demand`]: stochastic demand profiles and their statistics
//! - [`balance`]: wastage and penalty costs and the level where they balance
//! - [`sim`]: Monte Carlo simulation of provisioning policies
//! - [`market`]: CER positions and settlement at a fixed emission price
//! - [`config`], [`report`], [`cli`]: scenario files, report formats and the
//!   command-line front end

pub mod balance;
pub mod cli;
pub mod config;
pub mod demand;
pub mod error;
pub mod market;
pub mod report;
pub mod sim;

pub use balance::{BalanceResult, CostRates, DemandStats};
pub use demand::{DemandKind, DemandProfile, MaxMethod};
pub use error::ModelError;
pub use market::{DataCenterAccount, MarketSettlement};
pub use sim::{Policy, Scenario, SimulationReport};
