//! CER accounting against a fixed emission-market price.
//!
//! Each data center holds a cap for the accounting period. Emitting less than
//! the cap leaves a positive CER position that can be sold; emitting more
//! leaves a negative position that must be covered by buying CERs. The market
//! is external: positions need not net to zero.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::sim::SimulationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCenterAccount {
    pub name: String,
    /// kgCO2e allowed in the period.
    pub cap_kg: f64,
    /// kgCO2e emitted in the period.
    pub emissions_kg: f64,
}

impl DataCenterAccount {
    pub fn new(name: impl Into<String>, cap_kg: f64, emissions_kg: f64) -> Result<Self> {
        let account = Self {
            name: name.into(),
            cap_kg,
            emissions_kg,
        };
        account.validate()?;
        Ok(account)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cap_kg.is_finite() && self.cap_kg >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "account {}: cap_kg must be >= 0, got {}",
                self.name, self.cap_kg
            )));
        }
        if !(self.emissions_kg.is_finite() && self.emissions_kg >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "account {}: emissions_kg must be >= 0, got {}",
                self.name, self.emissions_kg
            )));
        }
        Ok(())
    }
}

/// Net CERs in kg: positive means surplus allowance, negative means deficit.
pub fn cer_position(account: &DataCenterAccount) -> f64 {
    account.cap_kg - account.emissions_kg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettlementRow {
    pub name: String,
    pub cap_kg: f64,
    pub emissions_kg: f64,
    pub position_kg: f64,
    /// Negative when the account pays, positive when it earns.
    pub cash_flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSettlement {
    pub price_per_kg: f64,
    pub rows: Vec<SettlementRow>,
    pub total_position_kg: f64,
    /// Sum of all account cash flows; the market absorbs the opposite side.
    pub net_cash_flow: f64,
}

impl MarketSettlement {
    pub fn cash_flows(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.cash_flow).collect()
    }
}

pub fn settle(accounts: &[DataCenterAccount], price_per_kg: f64) -> Result<MarketSettlement> {
    if !(price_per_kg.is_finite() && price_per_kg >= 0.0) {
        return Err(ModelError::InvalidParameter(format!(
            "CER price must be >= 0, got {price_per_kg}"
        )));
    }
    let mut rows = Vec::with_capacity(accounts.len());
    for account in accounts {
        account.validate()?;
        let position_kg = cer_position(account);
        rows.push(SettlementRow {
            name: account.name.clone(),
            cap_kg: account.cap_kg,
            emissions_kg: account.emissions_kg,
            position_kg,
            cash_flow: position_kg * price_per_kg,
        });
    }
    Ok(MarketSettlement {
        price_per_kg,
        total_position_kg: rows.iter().map(|r| r.position_kg).sum(),
        net_cash_flow: rows.iter().map(|r| r.cash_flow).sum(),
        rows,
    })
}

/// Recomputes a run's emissions from its energy total.
pub fn emissions_from_report(report: &SimulationReport) -> f64 {
    report.aggregate.total_energy_kwh * report.scenario.carbon_intensity
}

/// CO2e price per step of provisioning the full agreed amount.
pub fn derive_co2_rate(energy_full_kwh: f64, carbon_intensity: f64, price_per_kg: f64) -> Result<f64> {
    for (name, v) in [
        ("energy_full_kwh", energy_full_kwh),
        ("carbon_intensity", carbon_intensity),
        ("price_per_kg", price_per_kg),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(ModelError::InvalidParameter(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(energy_full_kwh * carbon_intensity * price_per_kg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acct(cap: f64, em: f64) -> DataCenterAccount {
        DataCenterAccount::new("dc", cap, em).unwrap()
    }

    #[test]
    fn positions() {
        assert_eq!(cer_position(&acct(100_000.0, 120_000.0)), -20_000.0);
        assert_eq!(cer_position(&acct(5.0, 5.0)), 0.0);
        assert_eq!(cer_position(&acct(100_000.0, 70_000.0)), 30_000.0);
        assert!(DataCenterAccount::new("x", -1.0, 0.0).is_err());
        assert!(DataCenterAccount::new("x", 0.0, -1.0).is_err());
    }

    #[test]
    fn settlement_examples() {
        let s = settle(&[acct(100_000.0, 120_000.0)], 0.01).unwrap();
        assert!((s.rows[0].cash_flow + 200.0).abs() < 1e-9);

        let free = settle(&[acct(1.0, 9.0), acct(9.0, 1.0)], 0.0).unwrap();
        assert!(free.cash_flows().iter().all(|&c| c == 0.0));

        let p = 0.37;
        let sym = settle(&[acct(1_000.0, 500.0), acct(500.0, 1_000.0)], p).unwrap();
        assert_eq!(sym.cash_flows(), vec![500.0 * p, -500.0 * p]);
        assert_eq!(sym.net_cash_flow, 0.0);
        assert_eq!(sym.total_position_kg, 0.0);

        assert!(settle(&[], -1.0).is_err());
        assert_eq!(settle(&[], 1.0).unwrap().net_cash_flow, 0.0);
    }

    #[test]
    fn co2_rate() {
        assert_eq!(derive_co2_rate(0.0, 0.5, 0.01).unwrap(), 0.0);
        assert_eq!(derive_co2_rate(2.0, 0.0, 0.01).unwrap(), 0.0);
        assert!((derive_co2_rate(2.0, 0.5, 0.01).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(
            derive_co2_rate(2.0, 0.5, 0.02).unwrap(),
            2.0 * derive_co2_rate(2.0, 0.5, 0.01).unwrap()
        );
        assert!(derive_co2_rate(-2.0, 0.5, 0.01).is_err());
    }
}
