//! Scenario configuration documents.
//!
//! A configuration is a TOML document with up to six top-level sections:
//! `demand`, `stats`, `rates`, `policy`, `simulation` and `market`. Parsing is
//! strict: unknown keys are rejected and reported with their key path.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::balance::{CostRates, DemandStats};
use crate::demand::{DemandKind, DemandProfile, MaxMethod};
use crate::error::ModelError;
use crate::market::DataCenterAccount;
use crate::sim::{Policy, Scenario};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("config error at `{0}`: section is missing")]
    MissingSection(&'static str),

    #[error("config error at `{path}`: {source}")]
    Invalid {
        path: &'static str,
        #[source]
        source: ModelError,
    },
}

impl ConfigError {
    /// Key path the error refers to.
    pub fn key_path(&self) -> &str {
        match self {
            ConfigError::Io { path, .. } | ConfigError::Parse { path, .. } => path,
            ConfigError::MissingSection(p) => p,
            ConfigError::Invalid { path, .. } => path,
        }
    }
}

/// A 64-bit seed. TOML integers are signed, so seeds above `i64::MAX` are
/// written as decimal strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(self.0) {
            Ok(v) => serializer.serialize_i64(v),
            Err(_) => serializer.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SeedVisitor;

        impl serde::de::Visitor<'_> for SeedVisitor {
            type Value = Seed;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an unsigned 64-bit integer or its decimal string")
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Seed, E> {
                u64::try_from(v)
                    .map(Seed)
                    .map_err(|_| E::custom(format!("seed must be >= 0, got {v}")))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Seed, E> {
                Ok(Seed(v))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Seed, E> {
                v.parse::<u64>()
                    .map(Seed)
                    .map_err(|_| E::custom(format!("invalid seed {v:?}")))
            }
        }

        deserializer.deserialize_any(SeedVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    pub kind: DemandKind,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub resource_unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    pub r_agreed: f64,
    /// Derived from `demand` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_demand: Option<f64>,
    /// Derived from `demand` with `max_method` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_demand: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_method: Option<MaxMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub steps: u64,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<Seed>,
    pub energy_full_kwh: f64,
    pub carbon_intensity: f64,
    #[serde(default)]
    pub clamp_demand_to_agreed: bool,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub price_per_kg: f64,
    #[serde(default)]
    pub accounts: Vec<DataCenterAccount>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<DemandSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<StatsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<CostRates>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSection>,
}

/// Raw demand statistics before validation; sweeps vary these freely.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawStats {
    pub mean_demand: f64,
    pub max_demand: f64,
    pub r_agreed: f64,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().trim().to_string();
            let path = match unknown_field(&message) {
                Some(key) if path == "." => key.to_string(),
                Some(key) if !path.ends_with(key) => format!("{path}.{key}"),
                _ => path,
            };
            ConfigError::Parse { path, message }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config documents always serialize")
    }

    pub fn profile(&self) -> Result<Option<DemandProfile>, ConfigError> {
        self.demand
            .as_ref()
            .map(|d| {
                DemandProfile::new(d.kind, &d.params)
                    .map(|p| p.with_unit(d.resource_unit.clone()))
                    .map_err(|source| ConfigError::Invalid {
                        path: "demand",
                        source,
                    })
            })
            .transpose()
    }

    fn clamp_to_agreed(&self) -> bool {
        self.simulation.as_ref().is_some_and(|s| s.clamp_demand_to_agreed)
    }

    /// Mean, max and agreed amounts, derived from `demand` where `stats`
    /// leaves them out. No ordering checks.
    pub fn raw_stats(&self) -> Result<RawStats, ConfigError> {
        let stats = self.stats.as_ref().ok_or(ConfigError::MissingSection("stats"))?;
        let invalid = |source| ConfigError::Invalid {
            path: "stats",
            source,
        };
        let (mean, max) = match (stats.mean_demand, stats.max_demand) {
            (Some(mean), Some(max)) => (mean, max),
            (mean, max) => {
                let profile = self.profile()?.ok_or(ConfigError::MissingSection("demand"))?;
                let method = stats.max_method.unwrap_or_else(|| profile.default_max_method());
                let derived =
                    DemandStats::from_profile(&profile, method, stats.r_agreed, self.clamp_to_agreed());
                match derived {
                    Ok(d) => (mean.unwrap_or(d.mean_demand()), max.unwrap_or(d.max_demand())),
                    Err(ModelError::InvalidStats(_)) => {
                        // keep the unvalidated values; validation reports the real problem
                        let raw_max = profile.max_estimate(method).map_err(invalid)?;
                        (mean.unwrap_or(profile.mean()), max.unwrap_or(raw_max))
                    }
                    Err(e) => return Err(invalid(e)),
                }
            }
        };
        Ok(RawStats {
            mean_demand: mean,
            max_demand: max,
            r_agreed: stats.r_agreed,
        })
    }

    pub fn demand_stats(&self) -> Result<DemandStats, ConfigError> {
        let raw = self.raw_stats()?;
        DemandStats::new(raw.mean_demand, raw.max_demand, raw.r_agreed).map_err(|source| {
            ConfigError::Invalid {
                path: "stats",
                source,
            }
        })
    }

    pub fn cost_rates(&self) -> Result<CostRates, ConfigError> {
        let rates = self.rates.ok_or(ConfigError::MissingSection("rates"))?;
        rates.validate().map_err(|source| ConfigError::Invalid {
            path: "rates",
            source,
        })?;
        Ok(rates)
    }

    /// Applies CLI overrides. Seed precedence: override, then config, else error.
    pub fn with_overrides(
        &self,
        seed: Option<u64>,
        steps: Option<u64>,
    ) -> Result<ConfigDocument, ConfigError> {
        let mut doc = self.clone();
        let sim = doc
            .simulation
            .as_mut()
            .ok_or(ConfigError::MissingSection("simulation"))?;
        if let Some(seed) = seed {
            sim.seed = Some(Seed(seed));
        }
        if let Some(steps) = steps {
            sim.steps = steps;
        }
        if sim.seed.is_none() {
            return Err(ConfigError::Parse {
                path: "simulation.seed".into(),
                message: "no seed given in config or on the command line".into(),
            });
        }
        Ok(doc)
    }

    /// The same document with derived demand statistics written out.
    pub fn effective(&self) -> Result<ConfigDocument, ConfigError> {
        let mut doc = self.clone();
        let raw = self.raw_stats()?;
        if let Some(stats) = doc.stats.as_mut() {
            stats.mean_demand = Some(raw.mean_demand);
            stats.max_demand = Some(raw.max_demand);
        }
        Ok(doc)
    }

    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let profile = self.profile()?.ok_or(ConfigError::MissingSection("demand"))?;
        let stats = self.demand_stats()?;
        let rates = self.cost_rates()?;
        let policy = self.policy.ok_or(ConfigError::MissingSection("policy"))?;
        let sim = self
            .simulation
            .as_ref()
            .ok_or(ConfigError::MissingSection("simulation"))?;
        let seed = sim.seed.ok_or_else(|| ConfigError::Parse {
            path: "simulation.seed".into(),
            message: "no seed given in config or on the command line".into(),
        })?;
        let scenario = Scenario {
            profile,
            stats,
            rates,
            policy,
            steps: sim.steps,
            replications: sim.replications,
            seed: seed.0,
            energy_full_kwh: sim.energy_full_kwh,
            carbon_intensity: sim.carbon_intensity,
            clamp_demand_to_agreed: sim.clamp_demand_to_agreed,
        };
        scenario.validate().map_err(|source| ConfigError::Invalid {
            path: "simulation",
            source,
        })?;
        Ok(scenario)
    }

    pub fn market(&self) -> Result<&MarketSection, ConfigError> {
        let market = self.market.as_ref().ok_or(ConfigError::MissingSection("market"))?;
        for account in &market.accounts {
            account.validate().map_err(|source| ConfigError::Invalid {
                path: "market.accounts",
                source,
            })?;
        }
        Ok(market)
    }
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[demand]
kind = "uniform"
params = [0.0, 80.0]
resource_unit = "GB"

[stats]
r_agreed = 100.0

[rates]
c_en = 1.5
c_co2 = 0.5
c_viol = 1.0

[policy]
kind = "balance_band"
x_percent = 0.1

[simulation]
steps = 1000
replications = 2
seed = 42
energy_full_kwh = 2.0
carbon_intensity = 0.5

[market]
price_per_kg = 0.01

[[market.accounts]]
name = "dc-a"
cap_kg = 100000.0
emissions_kg = 120000.0
"#;

    #[test]
    fn parses_full_document() {
        let doc = ConfigDocument::parse(FULL).unwrap();
        let s = doc.scenario().unwrap();
        assert_eq!(s.stats.mean_demand(), 40.0);
        assert_eq!(s.stats.max_demand(), 80.0);
        assert_eq!(s.policy, Policy::BalanceBand { x_percent: 0.1 });
        assert_eq!(s.seed, 42);
        assert_eq!(s.replications, 2);
        assert_eq!(s.profile.resource_unit(), "GB");
        assert_eq!(doc.market().unwrap().accounts.len(), 1);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let text = FULL.replace("c_viol = 1.0", "c_viol = 1.0\nc_vio = 2.0");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert_eq!(err.key_path(), "rates.c_vio", "{err}");

        let text = FULL.replace("[market]", "[markets]");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert_eq!(err.key_path(), "markets", "{err}");

        let text = FULL.replace("x_percent = 0.1", "x_percent = 0.1\nwidth = 3");
        let err = ConfigDocument::parse(&text).unwrap_err();
        assert!(err.key_path().starts_with("policy"), "{err}");
        assert!(err.to_string().contains("width"), "{err}");
    }

    #[test]
    fn type_errors_report_their_path() {
        let err = ConfigDocument::parse(&FULL.replace("steps = 1000", "steps = \"many\"")).unwrap_err();
        assert_eq!(err.key_path(), "simulation.steps", "{err}");
        let err = ConfigDocument::parse(&FULL.replace("seed = 42", "seed = -3")).unwrap_err();
        assert_eq!(err.key_path(), "simulation.seed", "{err}");
    }

    #[test]
    fn missing_sections() {
        let doc = ConfigDocument::parse("[stats]\nr_agreed = 100.0\nmean_demand = 1.0\nmax_demand = 2.0\n").unwrap();
        assert_eq!(doc.cost_rates().unwrap_err().key_path(), "rates");
        assert_eq!(doc.scenario().unwrap_err().key_path(), "demand");
        assert_eq!(ConfigDocument::default().raw_stats().unwrap_err().key_path(), "stats");
    }

    #[test]
    fn seed_handling() {
        let doc = ConfigDocument::parse(&FULL.replace("seed = 42\n", "")).unwrap();
        assert_eq!(doc.scenario().unwrap_err().key_path(), "simulation.seed");
        assert!(doc.with_overrides(None, None).is_err());
        let s = doc.with_overrides(Some(7), Some(10)).unwrap().scenario().unwrap();
        assert_eq!((s.seed, s.steps), (7, 10));

        let big = FULL.replace("seed = 42", "seed = \"18446744073709551615\"");
        let doc = ConfigDocument::parse(&big).unwrap();
        assert_eq!(doc.scenario().unwrap().seed, u64::MAX);
        let again = ConfigDocument::parse(&doc.to_toml()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn effective_document_round_trips() {
        let doc = ConfigDocument::parse(FULL).unwrap().effective().unwrap();
        let text = doc.to_toml();
        let reparsed = ConfigDocument::parse(&text).unwrap();
        assert_eq!(reparsed, doc);
        assert_eq!(
            reparsed.scenario().unwrap(),
            ConfigDocument::parse(FULL).unwrap().scenario().unwrap()
        );
    }

    #[test]
    fn max_method_variants_parse() {
        let q = FULL.replace("r_agreed = 100.0", "r_agreed = 100.0\nmax_method = { quantile = 0.95 }");
        let s = ConfigDocument::parse(&q).unwrap().demand_stats().unwrap();
        assert!((s.max_demand() - 76.0).abs() < 1e-12);
        let p = FULL.replace("r_agreed = 100.0", "r_agreed = 1000.0\nmax_method = \"mean_plus_variance\"");
        let s = ConfigDocument::parse(&p).unwrap().demand_stats().unwrap();
        assert!((s.max_demand() - (40.0 + 6400.0 / 12.0)).abs() < 1e-9);
    }

    #[test]
    fn stats_violations_are_config_errors() {
        let text = FULL.replace("r_agreed = 100.0", "r_agreed = 50.0");
        let err = ConfigDocument::parse(&text).unwrap().demand_stats().unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { path: "stats", .. }), "{err}");
        let clamped = text.replace("carbon_intensity = 0.5", "carbon_intensity = 0.5\nclamp_demand_to_agreed = true");
        let s = ConfigDocument::parse(&clamped).unwrap().demand_stats().unwrap();
        assert_eq!(s.max_demand(), 50.0);
    }
}
