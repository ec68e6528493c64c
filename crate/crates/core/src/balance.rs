//! Wastage-penalty cost model and its equilibrium.
//!
//! Wastage is the energy and CO2e spent on resources provisioned above mean
//! demand; the penalty is the expected cost of SLA violations. Both are linear
//! in the provisioned level, and the balance is the level where they are
//! equal (plus an optional customer-satisfaction term).

use serde::{Deserialize, Serialize};

use crate::demand::{DemandProfile, MaxMethod};
use crate::error::{ModelError, Result};

/// Relative bracket width at which the bisection solver stops.
pub const DEFAULT_RELATIVE_XTOL: f64 = 1e-12;
/// Iteration cap for the bisection solver.
pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Market prices feeding the cost model.
///
/// `c_en` and `c_co2` are the per-time-unit prices of provisioning the whole
/// agreed amount; `c_viol` is the cost of one violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostRates {
    pub c_en: f64,
    pub c_co2: f64,
    pub c_viol: f64,
    #[serde(default)]
    pub satisfaction: f64,
}

impl CostRates {
    pub fn new(c_en: f64, c_co2: f64, c_viol: f64) -> Result<Self> {
        Self::with_satisfaction(c_en, c_co2, c_viol, 0.0)
    }

    pub fn with_satisfaction(c_en: f64, c_co2: f64, c_viol: f64, satisfaction: f64) -> Result<Self> {
        let rates = Self {
            c_en,
            c_co2,
            c_viol,
            satisfaction,
        };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_en", self.c_en),
            ("c_co2", self.c_co2),
            ("c_viol", self.c_viol),
            ("satisfaction", self.satisfaction),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidRates(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `c_en + c_co2`, the full-provisioning price per time unit.
    pub fn provisioning_price(&self) -> f64 {
        self.c_en + self.c_co2
    }
}

/// Demand statistics against an SLA-agreed amount.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    mean_demand: f64,
    max_demand: f64,
    r_agreed: f64,
}

impl DemandStats {
    /// Requires `0 <= mean <= max <= r_agreed` and `max > 0`.
    pub fn new(mean_demand: f64, max_demand: f64, r_agreed: f64) -> Result<Self> {
        let err = |m: String| Err(ModelError::InvalidStats(m));
        if ![mean_demand, max_demand, r_agreed].iter().all(|v| v.is_finite()) {
            return err("demand statistics must be finite".into());
        }
        if r_agreed <= 0.0 {
            return err(format!("r_agreed must be > 0, got {r_agreed}"));
        }
        if mean_demand < 0.0 {
            return err(format!("mean_demand must be >= 0, got {mean_demand}"));
        }
        if max_demand <= 0.0 {
            return err(format!("max_demand must be > 0, got {max_demand}"));
        }
        if mean_demand > max_demand {
            return err(format!(
                "mean_demand {mean_demand} exceeds max_demand {max_demand}"
            ));
        }
        if max_demand > r_agreed {
            return err(format!(
                "max_demand {max_demand} exceeds r_agreed {r_agreed}; enable clamp_demand_to_agreed to truncate demand"
            ));
        }
        Ok(Self {
            mean_demand,
            max_demand,
            r_agreed,
        })
    }

    /// Derives mean and max from a profile.
    ///
    /// With `clamp_to_agreed`, demand is treated as `min(R, r_agreed)`: the
    /// max estimate is capped at `r_agreed` and the mean is that of the capped
    /// variable.
    pub fn from_profile(
        profile: &DemandProfile,
        method: MaxMethod,
        r_agreed: f64,
        clamp_to_agreed: bool,
    ) -> Result<Self> {
        let max = profile.max_estimate(method)?;
        if clamp_to_agreed && r_agreed > 0.0 {
            let max = max.min(r_agreed);
            let mean = profile.capped_mean(r_agreed).min(max);
            Self::new(mean, max, r_agreed)
        } else {
            Self::new(profile.mean(), max, r_agreed)
        }
    }

    pub fn mean_demand(&self) -> f64 {
        self.mean_demand
    }

    pub fn max_demand(&self) -> f64 {
        self.max_demand
    }

    pub fn r_agreed(&self) -> f64 {
        self.r_agreed
    }
}

/// Equilibrium provisioning level with its component costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceResult {
    pub r_provisioned: f64,
    pub w: f64,
    pub c_wastage: f64,
    pub p_viol: f64,
    pub expected_penalty: f64,
}

/// Closed interval of resource levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl Band {
    pub fn contains(&self, r: f64) -> bool {
        self.lower <= r && r <= self.upper
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.lower, self.upper)
    }
}

/// `(r - mean) / r_agreed`. Negative below the mean.
pub fn wastage_fraction(r_provisioned: f64, stats: &DemandStats) -> f64 {
    (r_provisioned - stats.mean_demand) / stats.r_agreed
}

pub fn wastage_cost(r_provisioned: f64, stats: &DemandStats, rates: &CostRates) -> f64 {
    wastage_fraction(r_provisioned, stats) * rates.provisioning_price()
}

/// Linear violation probability `1 - r / max_demand` on `[0, max_demand]`.
pub fn violation_probability_linear(r_provisioned: f64, stats: &DemandStats) -> Result<f64> {
    if r_provisioned < 0.0 || r_provisioned > stats.max_demand || r_provisioned.is_nan() {
        return Err(ModelError::Domain(format!(
            "provisioned level {r_provisioned} outside [0, max_demand = {}]",
            stats.max_demand
        )));
    }
    Ok(1.0 - r_provisioned / stats.max_demand)
}

pub fn expected_penalty(p_viol: f64, rates: &CostRates) -> f64 {
    p_viol * rates.c_viol
}

fn result_at(r: f64, stats: &DemandStats, rates: &CostRates) -> Result<BalanceResult> {
    let w = wastage_fraction(r, stats);
    let p_viol = violation_probability_linear(r, stats)?;
    Ok(BalanceResult {
        r_provisioned: r,
        w,
        c_wastage: w * rates.provisioning_price(),
        p_viol,
        expected_penalty: expected_penalty(p_viol, rates),
    })
}

/// Closed-form balance for `satisfaction = 0`:
///
/// `r = max · (mean · c + r_agreed · c_viol) / (max · c + r_agreed · c_viol)`
/// with `c = c_en + c_co2`.
pub fn balance_closed_form(stats: &DemandStats, rates: &CostRates) -> Result<BalanceResult> {
    rates.validate()?;
    if rates.satisfaction != 0.0 {
        return Err(ModelError::NonzeroSatisfaction(rates.satisfaction));
    }
    let c = rates.provisioning_price();
    let (mean, max, agreed) = (stats.mean_demand, stats.max_demand, stats.r_agreed);
    let wastage_weight = max * c;
    let penalty_weight = agreed * rates.c_viol;
    let denom = wastage_weight + penalty_weight;
    if denom == 0.0 {
        return Err(ModelError::DegenerateCosts);
    }
    let r = if penalty_weight == 0.0 {
        mean
    } else if wastage_weight == 0.0 {
        max
    } else {
        // a convex combination of mean and max; clamp away rounding
        (max * (mean * c + agreed * rates.c_viol) / denom).clamp(mean, max)
    };
    result_at(r, stats, rates)
}

/// Balance residual `c_wastage(r) - E(C_penal)(r) - satisfaction`.
/// Nondecreasing in `r` on `[mean, max]`.
pub fn balance_residual(r: f64, stats: &DemandStats, rates: &CostRates) -> f64 {
    let p = (1.0 - r / stats.max_demand).clamp(0.0, 1.0);
    wastage_cost(r, stats, rates) - expected_penalty(p, rates) - rates.satisfaction
}

/// Bisection on [`balance_residual`] over `[mean_demand, max_demand]`.
///
/// Stops once `|residual| <= tolerance` and the bracket is narrower than
/// `1e-12 · max_demand`, or after 200 halvings.
pub fn balance_numeric(
    stats: &DemandStats,
    rates: &CostRates,
    tolerance: f64,
) -> Result<BalanceResult> {
    rates.validate()?;
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    if rates.provisioning_price() == 0.0 && rates.c_viol == 0.0 {
        return Err(ModelError::DegenerateCosts);
    }
    let f = |r: f64| balance_residual(r, stats, rates);
    let (mut lo, mut hi) = (stats.mean_demand, stats.max_demand);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo.abs() <= tolerance && (f_hi.abs() > tolerance || f_lo.abs() <= f_hi.abs()) {
        return result_at(lo, stats, rates);
    }
    if f_hi.abs() <= tolerance {
        return result_at(hi, stats, rates);
    }
    if f_hi < 0.0 {
        return Err(ModelError::NoRootInRange {
            lower: lo,
            upper: hi,
            residual_at_upper: f_hi,
        });
    }
    // f_lo = -(1 - mean/max)·c_viol - satisfaction <= 0 here, so the bracket holds
    let xtol = DEFAULT_RELATIVE_XTOL * stats.max_demand;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        // stop on an exact root, on convergence, or once the bracket is two adjacent floats
        if fm == 0.0 || (fm.abs() <= tolerance && hi - lo <= xtol) || mid == lo || mid == hi {
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    result_at(mid.clamp(stats.mean_demand, stats.max_demand), stats, rates)
}

/// Closed form when `satisfaction == 0`, bisection otherwise.
pub fn balance(stats: &DemandStats, rates: &CostRates) -> Result<BalanceResult> {
    if rates.satisfaction == 0.0 {
        balance_closed_form(stats, rates)
    } else {
        let tol = DEFAULT_RELATIVE_XTOL * stats.max_demand * rates.provisioning_price().max(rates.c_viol).max(1.0);
        balance_numeric(stats, rates, tol)
    }
}

/// `[r·(1 - x), r·(1 + x)] ∩ [0, r_agreed]` around a balance point.
pub fn heuristic_band(balance: &BalanceResult, x_percent: f64, stats: &DemandStats) -> Result<Band> {
    if !(0.0..1.0).contains(&x_percent) {
        return Err(ModelError::InvalidParameter(format!(
            "band half-width must lie in [0, 1), got {x_percent}"
        )));
    }
    let r = balance.r_provisioned;
    Ok(Band {
        lower: (r * (1.0 - x_percent)).clamp(0.0, stats.r_agreed),
        upper: (r * (1.0 + x_percent)).clamp(0.0, stats.r_agreed),
    })
}

/// One cell of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub stats: DemandStats,
    pub rates: CostRates,
    pub outcome: Result<BalanceResult>,
}

/// Closed-form balance over the Cartesian product `stats_grid × rates_grid`,
/// stats-major. Failing cells keep their error; the sweep carries on.
pub fn sensitivity_sweep(stats_grid: &[DemandStats], rates_grid: &[CostRates]) -> Vec<SweepCell> {
    stats_grid
        .iter()
        .flat_map(|s| {
            rates_grid.iter().map(move |r| SweepCell {
                stats: *s,
                rates: *r,
                outcome: balance_closed_form(s, r),
            })
        })
        .collect()
}
