//! Monte Carlo provisioning simulation.
//!
//! Each replication draws one demand value per time step and provisions a
//! static level chosen by a [`Policy`]. Steps where demand exceeds the
//! provisioned level are violations and cost `c_viol` each; capacity above
//! demand is wasted and costs its share of `c_en + c_co2`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{self, CostRates, DemandStats};
use crate::demand::DemandProfile;
use crate::error::{ModelError, Result};

/// Per-step traces are capped at this many records.
pub const TRACE_STEP_LIMIT: u64 = 100_000;

/// Rule mapping scenario statistics to a provisioned level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Policy {
    /// Always provision `r_agreed`.
    FixedAgreed,
    /// Provision the mean demand.
    MeanFollow,
    /// Provision the wastage-penalty balance point.
    Balance,
    /// Provision the upper edge of the `±x` band around the balance point.
    BalanceBand { x_percent: f64 },
    /// Provision a fixed level in `[0, r_agreed]`.
    FixedLevel { level: f64 },
}

impl Policy {
    /// The level this policy provisions at every step.
    pub fn resolve(&self, stats: &DemandStats, rates: &CostRates) -> Result<f64> {
        let unresolvable = |e: ModelError| ModelError::PolicyUnresolvable(e.to_string());
        let level = match *self {
            Policy::FixedAgreed => stats.r_agreed(),
            Policy::MeanFollow => stats.mean_demand(),
            Policy::Balance => balance::balance(stats, rates).map_err(unresolvable)?.r_provisioned,
            Policy::BalanceBand { x_percent } => {
                let b = balance::balance(stats, rates).map_err(unresolvable)?;
                balance::heuristic_band(&b, x_percent, stats)?.upper
            }
            Policy::FixedLevel { level } => {
                if !(0.0..=stats.r_agreed()).contains(&level) {
                    return Err(ModelError::InvalidParameter(format!(
                        "fixed level {level} outside [0, r_agreed = {}]",
                        stats.r_agreed()
                    )));
                }
                level
            }
        };
        Ok(level)
    }

    pub fn label(&self) -> String {
        match self {
            Policy::FixedAgreed => "fixed_agreed".into(),
            Policy::MeanFollow => "mean_follow".into(),
            Policy::Balance => "balance".into(),
            Policy::BalanceBand { x_percent } => format!("balance_band({x_percent})"),
            Policy::FixedLevel { level } => format!("fixed_level({level})"),
        }
    }
}

/// A complete simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub profile: DemandProfile,
    pub stats: DemandStats,
    pub rates: CostRates,
    pub policy: Policy,
    pub steps: u64,
    pub replications: u64,
    pub seed: u64,
    /// kWh per step when provisioning all of `r_agreed`.
    pub energy_full_kwh: f64,
    /// kgCO2e per kWh.
    pub carbon_intensity: f64,
    /// Truncate sampled demand at `r_agreed`.
    pub clamp_demand_to_agreed: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidScenario(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if !(self.energy_full_kwh >= 0.0 && self.energy_full_kwh.is_finite()) {
            return bad(format!("energy_full_kwh must be >= 0, got {}", self.energy_full_kwh));
        }
        if !(self.carbon_intensity >= 0.0 && self.carbon_intensity.is_finite()) {
            return bad(format!("carbon_intensity must be >= 0, got {}", self.carbon_intensity));
        }
        self.rates.validate()
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimOptions {
    pub trace: bool,
}

/// One simulated time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub replication: u64,
    pub step: u64,
    pub demand: f64,
    pub provisioned: f64,
    pub violation: bool,
    pub wasted: f64,
    pub wastage_cost: f64,
    pub penalty_cost: f64,
    pub energy_kwh: f64,
}

/// Aggregate outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub policy: String,
    pub provisioned_level: f64,
    pub seed: u64,
    pub steps: u64,
    pub replications: u64,
    pub violation_count: u64,
    pub violation_frequency: f64,
    /// Linear-model violation probability at the provisioned level.
    pub model_violation_probability: f64,
    /// Exact `P(demand > level)` under the demand profile.
    pub exact_violation_probability: f64,
    pub total_wastage_cost: f64,
    pub total_penalty_cost: f64,
    pub total_cost: f64,
    pub mean_step_wastage_cost: f64,
    /// Linear-model wastage plus expected penalty, summed over all steps.
    pub total_expected_model_cost: f64,
    pub total_energy_kwh: f64,
    pub total_emissions_kg: f64,
    pub carbon_intensity: f64,
    pub total_energy_cost: f64,
    pub total_co2_cost: f64,
    pub trace_truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub aggregate: AggregateReport,
    pub trace: Option<Vec<StepRecord>>,
}

#[derive(Default)]
struct ReplicationTotals {
    violations: u64,
    wastage_cost: f64,
    penalty_cost: f64,
    energy_kwh: f64,
    energy_cost: f64,
    co2_cost: f64,
    trace: Vec<StepRecord>,
}

/// Independent generator for one replication: the seed picks the key, the
/// replication index picks the ChaCha stream.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

pub fn run_simulation(scenario: &Scenario) -> Result<SimulationReport> {
    run_simulation_with(scenario, SimOptions::default())
}

pub fn run_simulation_with(scenario: &Scenario, options: SimOptions) -> Result<SimulationReport> {
    scenario.validate()?;
    let stats = &scenario.stats;
    let rates = &scenario.rates;
    let level = scenario.policy.resolve(stats, rates)?;
    let agreed = stats.r_agreed();
    let price = rates.provisioning_price();
    let use_share = level / agreed;
    let step_energy = use_share * scenario.energy_full_kwh;
    let step_energy_cost = use_share * rates.c_en;
    let step_co2_cost = use_share * rates.c_co2;
    let total_steps = scenario.steps * scenario.replications;
    let trace_truncated = options.trace && total_steps > TRACE_STEP_LIMIT;

    let run_replication = |rep: u64| {
        let mut rng = replication_rng(scenario.seed, rep);
        let mut acc = ReplicationTotals::default();
        let trace_budget = if options.trace {
            TRACE_STEP_LIMIT.saturating_sub(rep * scenario.steps).min(scenario.steps)
        } else {
            0
        };
        for step in 0..scenario.steps {
            let mut demand = scenario.profile.sample(&mut rng);
            if scenario.clamp_demand_to_agreed {
                demand = demand.min(agreed);
            }
            let violation = demand > level;
            let wasted = (level - demand).max(0.0);
            let wastage_cost = wasted / agreed * price;
            let penalty_cost = if violation { rates.c_viol } else { 0.0 };
            acc.violations += u64::from(violation);
            acc.wastage_cost += wastage_cost;
            acc.penalty_cost += penalty_cost;
            acc.energy_kwh += step_energy;
            acc.energy_cost += step_energy_cost;
            acc.co2_cost += step_co2_cost;
            if step < trace_budget {
                acc.trace.push(StepRecord {
                    replication: rep,
                    step,
                    demand,
                    provisioned: level,
                    violation,
                    wasted,
                    wastage_cost,
                    penalty_cost,
                    energy_kwh: step_energy,
                });
            }
        }
        acc
    };

    // indexed collect keeps replication order, so the reduction below is
    // identical however rayon schedules the work
    let per_rep: Vec<ReplicationTotals> = (0..scenario.replications)
        .into_par_iter()
        .map(run_replication)
        .collect();

    let mut total = ReplicationTotals::default();
    let mut trace = Vec::new();
    for rep in per_rep {
        total.violations += rep.violations;
        total.wastage_cost += rep.wastage_cost;
        total.penalty_cost += rep.penalty_cost;
        total.energy_kwh += rep.energy_kwh;
        total.energy_cost += rep.energy_cost;
        total.co2_cost += rep.co2_cost;
        trace.extend(rep.trace);
    }

    let n = total_steps as f64;
    let model_p = (1.0 - level / stats.max_demand()).clamp(0.0, 1.0);
    let model_step_cost = balance::wastage_cost(level, stats, rates).max(0.0)
        + balance::expected_penalty(model_p, rates);
    let exact_p = if scenario.clamp_demand_to_agreed && level >= agreed {
        0.0
    } else {
        scenario.profile.tail_probability(level)
    };

    let aggregate = AggregateReport {
        policy: scenario.policy.label(),
        provisioned_level: level,
        seed: scenario.seed,
        steps: scenario.steps,
        replications: scenario.replications,
        violation_count: total.violations,
        violation_frequency: total.violations as f64 / n,
        model_violation_probability: model_p,
        exact_violation_probability: exact_p,
        total_wastage_cost: total.wastage_cost,
        total_penalty_cost: total.penalty_cost,
        total_cost: total.wastage_cost + total.penalty_cost,
        mean_step_wastage_cost: total.wastage_cost / n,
        total_expected_model_cost: model_step_cost * n,
        total_energy_kwh: total.energy_kwh,
        total_emissions_kg: total.energy_kwh * scenario.carbon_intensity,
        carbon_intensity: scenario.carbon_intensity,
        total_energy_cost: total.energy_cost,
        total_co2_cost: total.co2_cost,
        trace_truncated,
    };
    Ok(SimulationReport {
        scenario: scenario.clone(),
        aggregate,
        trace: options.trace.then_some(trace),
    })
}

/// Grid search over fixed levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalOptimum {
    pub r_star: f64,
    pub cost_at_r_star: f64,
    /// `(level, total realized cost)` for every grid point, in grid order.
    pub costs: Vec<(f64, f64)>,
    /// `|r_star - r_balance|` when the balance is solvable.
    pub balance_gap: Option<f64>,
}

/// Simulates `FixedLevel(g)` for each grid level under the scenario's seed
/// and returns the level with the lowest realized wastage plus penalty
/// cost. Ties go to the earliest grid entry.
pub fn empirical_optimum(scenario: &Scenario, grid: &[f64]) -> Result<EmpiricalOptimum> {
    if grid.is_empty() {
        return Err(ModelError::InvalidParameter("optimum grid is empty".into()));
    }
    let mut costs = Vec::with_capacity(grid.len());
    for &g in grid {
        let report = run_simulation(&scenario.with_policy(Policy::FixedLevel { level: g }))?;
        costs.push((g, report.aggregate.total_cost));
    }
    let (r_star, cost_at_r_star) = costs
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (g, c)| match best {
            Some((_, bc)) if bc <= c => best,
            _ => Some((g, c)),
        })
        .expect("grid is nonempty");
    let balance_gap = balance::balance(&scenario.stats, &scenario.rates)
        .ok()
        .map(|b| (r_star - b.r_provisioned).abs());
    Ok(EmpiricalOptimum {
        r_star,
        cost_at_r_star,
        costs,
        balance_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub policy: Policy,
    pub result: Result<SimulationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    pub outcomes: Vec<PolicyOutcome>,
    /// Indices into `outcomes` of successful runs, cheapest total cost first.
    pub ranking: Vec<usize>,
}

/// Runs every policy on the same demand paths (shared seed).
pub fn compare_policies(base: &Scenario, policies: &[Policy]) -> PolicyComparison {
    let outcomes: Vec<PolicyOutcome> = policies
        .iter()
        .map(|&policy| PolicyOutcome {
            policy,
            result: run_simulation(&base.with_policy(policy)),
        })
        .collect();
    let mut ranking: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.result.is_ok())
        .map(|(i, _)| i)
        .collect();
    let cost = |i: usize| outcomes[i].result.as_ref().map_or(f64::INFINITY, |r| r.aggregate.total_cost);
    ranking.sort_by(|&a, &b| cost(a).total_cmp(&cost(b)));
    PolicyComparison { outcomes, ranking }
}
