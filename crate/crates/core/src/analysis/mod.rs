//! Verifier suites: each check runs scenarios or payoff models and returns a
//! [`VerdictReport`] stating what was observed against which bound.

mod regret;
mod responsiveness;
mod truthfulness;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::sim::{run_scenario, ScenarioConfig, Trajectory};

pub use regret::{
    avg_regret_trend_check, chosen_probability_check, linear_regret_contrast, linear_regret_witness,
    regret_bound_check, regret_slope_check, witness_config, ChosenProbabilityRule,
};
pub use responsiveness::{best_response_shift_check, responsiveness_check, responsiveness_reference, robustness_sweep};
pub use truthfulness::{
    em_lie_gain_check, hedge_sign_check, reference_model, truthfulness_suite, untruthfulness_witness,
    TRUTHFUL_GRID_STEP,
};

/// Replications per statistical check.
pub const DEFAULT_SEEDS: usize = 30;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictReport {
    pub check_name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound_or_expected: f64,
    pub tolerance: f64,
    pub seeds_used: usize,
    pub notes: String,
}

impl VerdictReport {
    /// Passes when `observed ≤ bound + tolerance`.
    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64, tolerance: f64, seeds: usize) -> Self {
        Self {
            check_name: name.into(),
            passed: observed <= bound + tolerance,
            observed,
            bound_or_expected: bound,
            tolerance,
            seeds_used: seeds,
            notes: String::new(),
        }
    }

    /// Passes when `observed ≥ bound − tolerance`.
    pub fn at_least(name: impl Into<String>, observed: f64, bound: f64, tolerance: f64, seeds: usize) -> Self {
        Self { passed: observed >= bound - tolerance, ..Self::at_most(name, observed, bound, tolerance, seeds) }
    }

    /// Passes when `|observed − expected| ≤ tolerance`.
    pub fn near(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64, seeds: usize) -> Self {
        Self {
            passed: (observed - expected).abs() <= tolerance,
            ..Self::at_most(name, observed, expected, tolerance, seeds)
        }
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = notes.into();
        self
    }

    /// Marks a statistical check that ran on too few seeds.
    fn inconclusive_if_short(mut self, seeds: usize) -> Self {
        if seeds < DEFAULT_SEEDS {
            self.passed = false;
            self.notes = format!("inconclusive: {seeds} seeds, need {DEFAULT_SEEDS}; {}", self.notes);
        }
        self
    }
}

/// Seeds `1..=count`.
pub fn seed_list(count: usize) -> Vec<u64> {
    (1..=count as u64).collect()
}

/// Runs `base` once per seed, in parallel, in seed order.
pub fn run_seeds(base: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<Trajectory>> {
    seeds.par_iter().map(|s| run_scenario(&ScenarioConfig { seed: *s, ..base.clone() })).collect()
}

/// Arithmetic mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// One output row per (slot, worker).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub slot: usize,
    /// 1-based worker id.
    pub worker: usize,
    pub weight: Option<f64>,
    pub theta: f64,
    pub slot_loss: Option<f64>,
    pub selected: bool,
    pub platform_slot_loss: f64,
    pub cum_regret: f64,
    pub avg_regret: f64,
}

/// Flattens a trajectory slot-major, worker-minor.
pub fn trajectory_metrics(trajectory: &Trajectory) -> Vec<TrajectoryRow> {
    trajectory
        .records
        .iter()
        .flat_map(|r| {
            (0..r.weights.len()).map(move |i| TrajectoryRow {
                slot: r.slot,
                worker: i + 1,
                weight: r.weights[i],
                theta: r.theta[i],
                slot_loss: r.worker_losses[i],
                selected: r.selected == Some(i),
                platform_slot_loss: r.platform_loss,
                cum_regret: r.cum_regret,
                avg_regret: r.avg_regret,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::MechanismKind;

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 2.0).collect();
        assert!((least_squares_slope(&xs, &ys) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn metrics_shape_and_start() {
        let traj = run_scenario(&ScenarioConfig::preset(MechanismKind::Owa, 5, 40, 20, 1)).unwrap();
        let rows = trajectory_metrics(&traj);
        assert_eq!(rows.len(), 40 * 5);
        assert!(rows[..5].iter().all(|r| r.theta == 0.2 && r.slot == 1));
        assert_eq!(rows[7].worker, 3);
    }

    #[test]
    fn verdict_relations() {
        assert!(VerdictReport::at_most("x", 1.0, 1.0, 0.0, 1).passed);
        assert!(!VerdictReport::at_least("x", 0.5, 1.0, 0.1, 1).passed);
        assert!(VerdictReport::near("x", 0.95, 1.0, 0.1, 1).passed);
        assert!(!VerdictReport::at_most("x", 0.0, 1.0, 0.0, 3).inconclusive_if_short(3).passed);
    }
}
