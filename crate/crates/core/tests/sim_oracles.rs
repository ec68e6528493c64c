//! Simulator output against closed-form expectations for uniform demand,
//! and against exact tail probabilities for other families.

use wastage_balance::balance::{CostRates, DemandStats};
use wastage_balance::demand::DemandProfile;
use wastage_balance::sim::{compare_policies, empirical_optimum, run_simulation, Policy, Scenario};

fn uniform_scenario(policy: Policy, steps: u64, seed: u64) -> Scenario {
    Scenario {
        profile: DemandProfile::uniform(0.0, 80.0).unwrap(),
        stats: DemandStats::new(40.0, 80.0, 100.0).unwrap(),
        rates: CostRates::new(1.5, 0.5, 1.0).unwrap(),
        policy,
        steps,
        replications: 1,
        seed,
        energy_full_kwh: 2.0,
        carbon_intensity: 0.5,
        clamp_demand_to_agreed: false,
    }
}

#[test]
fn wastage_at_support_max_matches_linear_model() {
    let n = 1_000_000;
    let a = run_simulation(&uniform_scenario(Policy::FixedLevel { level: 80.0 }, n, 11))
        .unwrap()
        .aggregate;
    // step cost is (80 - D)/100 * 2 with D ~ U[0, 80]: variance 4e-4 * 6400/12
    let sigma = (4e-4 * 6400.0 / 12.0 / n as f64).sqrt();
    assert!((a.mean_step_wastage_cost - 0.8).abs() <= 3.0 * sigma, "{}", a.mean_step_wastage_cost);
    assert_eq!(a.violation_count, 0);
}

#[test]
fn violation_frequency_at_half_support() {
    let n = 1_000_000;
    let a = run_simulation(&uniform_scenario(Policy::FixedLevel { level: 40.0 }, n, 12))
        .unwrap()
        .aggregate;
    let sigma = (0.25 / n as f64).sqrt();
    assert!((a.violation_frequency - 0.5).abs() <= 3.0 * sigma);
    assert_eq!(a.model_violation_probability, 0.5);
    assert_eq!(a.exact_violation_probability, 0.5);
}

#[test]
fn non_uniform_frequency_tracks_tail_not_linear_model() {
    let mut s = uniform_scenario(Policy::FixedLevel { level: 60.0 }, 1_000_000, 13);
    s.profile = DemandProfile::truncated_normal(50.0, 12.0, 0.0, 100.0).unwrap();
    s.stats = DemandStats::new(s.profile.mean(), 100.0, 100.0).unwrap();
    let a = run_simulation(&s).unwrap().aggregate;
    let p = s.profile.tail_probability(60.0);
    let sigma = (p * (1.0 - p) / 1e6).sqrt();
    assert_eq!(a.exact_violation_probability, p);
    assert!((a.violation_frequency - p).abs() <= 3.0 * sigma);
    // the linear model says 0.4 here; the truncated normal tail is ~0.2
    assert!((a.model_violation_probability - 0.4).abs() < 1e-12);
    assert!((a.violation_frequency - a.model_violation_probability).abs() > 0.1);
}

/// Expected step cost for U[0, 80] demand at level g with c = 2, c_viol = 1,
/// r_agreed = 100: 2 · E[(g - D)+] / 100 + P(D > g), with E[(g - D)+] = g²/160.
fn uniform_step_cost(g: f64) -> f64 {
    2.0 * (g * g / 160.0) / 100.0 + (1.0 - g / 80.0)
}

#[test]
fn empirical_optimum_matches_analytic_curve() {
    let grid: Vec<f64> = (0..=8).map(|i| 10.0 * i as f64).collect();
    let analytic_best = grid
        .iter()
        .copied()
        .min_by(|a, b| uniform_step_cost(*a).total_cmp(&uniform_step_cost(*b)))
        .unwrap();
    assert_eq!(analytic_best, 50.0);

    let steps = 200_000;
    let s = uniform_scenario(Policy::Balance, steps, 21);
    let o = empirical_optimum(&s, &grid).unwrap();
    assert_eq!(o.r_star, analytic_best);
    for &(g, cost) in &o.costs {
        let per_step = cost / steps as f64;
        assert!((per_step - uniform_step_cost(g)).abs() < 0.01, "g={g}: {per_step}");
    }
    let gap = o.balance_gap.unwrap();
    assert!((gap - (50.0 - 14400.0 / 260.0f64).abs()).abs() < 1e-9);
}

#[test]
fn full_provisioning_has_no_violations_and_most_wastage() {
    let mut s = uniform_scenario(Policy::Balance, 50_000, 3);
    s.stats = DemandStats::new(40.0, 80.0, 80.0).unwrap();
    let policies = [
        Policy::FixedAgreed,
        Policy::MeanFollow,
        Policy::Balance,
        Policy::BalanceBand { x_percent: 0.1 },
    ];
    let cmp = compare_policies(&s, &policies);
    let reports: Vec<_> = cmp
        .outcomes
        .iter()
        .map(|o| o.result.as_ref().unwrap().aggregate.clone())
        .collect();
    assert_eq!(reports[0].violation_count, 0);
    assert!(reports[1..]
        .iter()
        .all(|r| r.total_wastage_cost < reports[0].total_wastage_cost));
    assert!(reports[1].total_wastage_cost < reports[2].total_wastage_cost);
    assert!(reports[2].violation_count < reports[1].violation_count);
    assert_eq!(cmp.ranking.len(), 4);
}
