//! One-step payoff models and best-response search.
//!
//! A worker holding belief `q` for a single prompt picks a report `r`; its
//! payoff is the expected weight after the next update, with the label drawn
//! from `Bernoulli(q)` and, for limited mechanisms, the selection drawn too.

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mechanisms::{EmParams, MechanismKind, MechanismState};
use crate::model::{ReportVector, SlotBatch, WorkerBelief};

use super::check_grid_step;

/// `w·(1 − α·[(r − q)² + q(1 − q)])`.
pub fn expected_next_weight_owa(weight: f64, alpha: f64, report: f64, belief: f64) -> f64 {
    weight * (1.0 - alpha * ((report - belief).powi(2) + belief * (1.0 - belief)))
}

/// `(1 − β)·γ·(1 − α(1 − α/θ)·[(r − q)² + q(1 − q)]) + β`, the expectation
/// over both the label and the selection draw.
pub fn expected_next_weight_oms(
    gamma: f64,
    alpha: f64,
    beta: f64,
    theta: f64,
    report: f64,
    belief: f64,
) -> Result<f64> {
    if alpha >= theta {
        return Err(Error::PreconditionViolated(format!("α = {alpha} is not below θ = {theta}")));
    }
    let spread = (report - belief).powi(2) + belief * (1.0 - belief);
    Ok((1.0 - beta) * gamma * (1.0 - alpha * (1.0 - alpha / theta) * spread) + beta)
}

/// Belief about the verified label when verification flips with rate `ε`.
pub fn flipped_belief(belief: f64, epsilon: f64) -> f64 {
    (1.0 - 2.0 * epsilon) * belief + epsilon
}

/// A worker's next-slot weight as a function of its report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ResponseModel {
    Owa {
        weight: f64,
        alpha: f64,
    },
    /// `theta` is the worker's current selection probability.
    Oms {
        gamma: f64,
        alpha: f64,
        beta: f64,
        theta: f64,
    },
    Hedge {
        weight: f64,
        eta: f64,
    },
    /// `pick` is the worker's probability under the mixed selection rule.
    Exp3 {
        weight: f64,
        eta: f64,
        pick: f64,
    },
    /// The report is read as the probability of voting 1. `agree_high` is
    /// the posterior on label 1 when the worker votes 1, `agree_low` the
    /// posterior on label 0 when it votes 0.
    Em {
        prior_a: f64,
        prior_b: f64,
        agree_high: f64,
        agree_low: f64,
    },
}

impl ResponseModel {
    /// EM environment where every other worker votes 1 and all reliabilities
    /// equal the initial value.
    pub fn em_unanimous(params: EmParams, workers: usize) -> Result<Self> {
        let em = crate::mechanisms::Em::new(workers, params)?;
        Ok(Self::em_against_ones(&em, 0))
    }

    fn em_against_ones(em: &crate::mechanisms::Em, worker: usize) -> Self {
        let n = em.reliability.len();
        let mut votes: Vec<(usize, bool)> = (0..n).map(|i| (i, true)).collect();
        let high = em.posterior(&votes);
        votes[worker].1 = false;
        let low = 1.0 - em.posterior(&votes);
        Self::Em { prior_a: em.params.prior_a, prior_b: em.params.prior_b, agree_high: high, agree_low: low }
    }

    /// Snapshot of `worker`'s payoff under a running mechanism. `None` for the
    /// median, whose weights never move.
    pub fn from_state(state: &MechanismState, worker: usize, active: &[bool]) -> Option<Self> {
        let w = *state.weights().get(worker)?;
        let p = state.params;
        match state.kind() {
            MechanismKind::Owa => Some(Self::Owa { weight: w, alpha: p.alpha? }),
            MechanismKind::Hedge => Some(Self::Hedge { weight: w, eta: p.eta? }),
            MechanismKind::Oms => Some(Self::Oms {
                gamma: state.gamma()?[worker],
                alpha: p.alpha?,
                beta: p.beta?,
                theta: state.selection_distribution(active)[worker],
            }),
            MechanismKind::Exp3 => {
                Some(Self::Exp3 { weight: w, eta: p.eta?, pick: state.selection_distribution(active)[worker] })
            }
            MechanismKind::Em => {
                let em = crate::mechanisms::Em { params: p.em?, reliability: state.weights().to_vec() };
                Some(Self::em_against_ones(&em, worker))
            }
            MechanismKind::Median => None,
        }
    }

    /// Next weight given report `r` and realised verified label.
    pub fn next_weight(&self, report: f64, label: bool) -> f64 {
        let loss = (report - if label { 1.0 } else { 0.0 }).powi(2);
        match *self {
            Self::Owa { weight, alpha } => weight * (1.0 - alpha * loss),
            Self::Oms { gamma, alpha, beta, theta } => {
                let chosen = (1.0 - beta) * gamma * (1.0 - alpha * loss * (1.0 - alpha / theta) / theta) + beta;
                let skipped = (1.0 - beta) * gamma + beta;
                theta * chosen + (1.0 - theta) * skipped
            }
            Self::Hedge { weight, eta } => weight * (-eta * loss).exp(),
            Self::Exp3 { weight, eta, pick } => weight * (pick * (-eta * loss / pick).exp() + (1.0 - pick)),
            Self::Em { prior_a, prior_b, agree_high, agree_low } => {
                let d = prior_a + prior_b + 1.0;
                report * (prior_a + agree_high) / d + (1.0 - report) * (prior_a + agree_low) / d
            }
        }
    }

    /// Exact expectation over the label `~ Bernoulli(belief)`.
    pub fn expected(&self, report: f64, belief: f64) -> f64 {
        belief * self.next_weight(report, true) + (1.0 - belief) * self.next_weight(report, false)
    }

    /// Largest payoff a truthful worker can lose to grid rounding, scaled
    /// by the mechanism's rate: `rate · step²`.
    pub fn resolution_slack(&self, step: f64) -> f64 {
        let rate = match *self {
            Self::Owa { alpha, .. } | Self::Oms { alpha, .. } => alpha,
            Self::Hedge { eta, .. } | Self::Exp3 { eta, .. } => eta,
            Self::Em { prior_a, prior_b, .. } => 1.0 / (prior_a + prior_b + 1.0),
        };
        rate * step * step
    }

    fn check(&self) -> Result<()> {
        if let Self::Oms { alpha, theta, .. } = *self {
            if alpha >= theta {
                return Err(Error::PreconditionViolated(format!("α = {alpha} is not below θ = {theta}")));
            }
        }
        Ok(())
    }
}

/// A best report on the grid and what it gains over the truthful one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub belief: f64,
    pub flip_epsilon: f64,
    pub report: f64,
    pub gain: f64,
    pub truthful_value: f64,
    pub best_value: f64,
}

pub fn grid_best_response(model: &ResponseModel, belief: f64, step: f64) -> Result<BestResponse> {
    grid_best_response_under_flips(model, belief, 0.0, step)
}

/// Searches reports `k·step` when the verified label is flipped with rate
/// `ε`. The gain is measured against reporting `belief` itself.
pub fn grid_best_response_under_flips(
    model: &ResponseModel,
    belief: f64,
    epsilon: f64,
    step: f64,
) -> Result<BestResponse> {
    check_grid_step(step)?;
    model.check()?;
    if !(0.0..=1.0).contains(&belief) {
        return Err(invalid(format!("belief {belief} outside [0, 1]")));
    }
    if !(0.0..0.5).contains(&epsilon) {
        return Err(invalid(format!("flip rate {epsilon} must lie in [0, 1/2)")));
    }
    let seen = flipped_belief(belief, epsilon);
    let cells = (1.0 / step).round() as usize;
    let (report, best_value) = (0..=cells)
        .map(|k| {
            let r = k as f64 / cells as f64;
            (r, model.expected(r, seen))
        })
        .fold((f64::NAN, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let truthful_value = model.expected(belief, seen);
    Ok(BestResponse {
        belief,
        flip_epsilon: epsilon,
        report,
        gain: best_value - truthful_value,
        truthful_value,
        best_value,
    })
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Environment for [`expected_next_weight_mc`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSetup {
    /// Report every other worker sends.
    pub others: f64,
    /// Send a `Bernoulli(r)` vote instead of `r` itself.
    pub randomize_report: bool,
}

impl Default for McSetup {
    fn default() -> Self {
        Self { others: 0.5, randomize_report: false }
    }
}

/// Simulates one slot of `state` many times with a single prompt whose
/// label is `Bernoulli(belief)` and returns the mean next weight of `worker`.
pub fn expected_next_weight_mc<R: Rng + ?Sized>(
    state: &MechanismState,
    worker: usize,
    report: f64,
    belief: f64,
    setup: &McSetup,
    draws: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if draws < 2 {
        return Err(invalid("need at least two draws"));
    }
    let n = state.weights().len();
    if worker >= n {
        return Err(invalid(format!("worker {worker} out of range")));
    }
    let active = vec![true; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws {
        let label = rng.gen_bool(belief);
        let sent = if setup.randomize_report { f64::from(u8::from(rng.gen_bool(report))) } else { report };
        let mut s = state.clone();
        let selected = s.prepare(&active, rng);
        let mut reports = vec![setup.others; n];
        reports[worker] = sent;
        let batch = SlotBatch {
            slot_index: s.slot + 1,
            prompt_count: 1,
            reports: reports.iter().map(|r| ReportVector::new(vec![*r]).map(Some)).collect::<Result<_>>()?,
            beliefs: reports.iter().map(|r| WorkerBelief::new(vec![*r]).map(Some)).collect::<Result<_>>()?,
            true_labels: vec![label],
            verified_labels: vec![label],
            selected_worker: selected,
        };
        s.update(&batch)?;
        let w = s.weights()[worker];
        sum += w;
        sum_sq += w * w;
    }
    let k = draws as f64;
    let mean = sum / k;
    let var = ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0);
    Ok(McEstimate { mean, stderr: (var / k).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{oms_params, ParamChoice};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(kind: MechanismKind, n: usize, choice: ParamChoice, t: usize) -> MechanismState {
        MechanismState::new(kind, n, choice.resolve(kind, n, t).unwrap()).unwrap()
    }

    /// Hedge payoff `q·e^{−η(r−1)²} + (1−q)·e^{−ηr²}`.
    fn hedge_f(r: f64, q: f64, eta: f64) -> f64 {
        q * (-eta * (r - 1.0).powi(2)).exp() + (1.0 - q) * (-eta * r * r).exp()
    }

    #[test]
    fn owa_closed_form() {
        assert_abs_diff_eq!(expected_next_weight_owa(1.0, 0.1, 0.5, 0.5), 0.975, epsilon = 1e-15);
        assert_abs_diff_eq!(expected_next_weight_owa(1.0, 0.1, 0.6, 0.6), 0.976, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_next_weight_owa(1.0, 0.1, 0.9, 0.6), 0.967, epsilon = 1e-12);
        let m = ResponseModel::Owa { weight: 0.7, alpha: 0.2 };
        for &(r, q) in &[(0.1, 0.3), (0.9, 0.2), (0.5, 0.5)] {
            assert_abs_diff_eq!(m.expected(r, q), expected_next_weight_owa(0.7, 0.2, r, q), epsilon = 1e-14);
        }
        for q in [0.2, 0.6, 0.85] {
            let h = 1e-5;
            let slope = (expected_next_weight_owa(1.0, 0.1, q + h, q) - expected_next_weight_owa(1.0, 0.1, q - h, q))
                / (2.0 * h);
            assert!(slope.abs() < 1e-8);
        }
    }

    #[test]
    fn owa_closed_form_matches_monte_carlo() {
        let s = state(MechanismKind::Owa, 3, ParamChoice { alpha: Some(0.1), ..Default::default() }, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (r, want) in [(0.6, 0.976), (0.9, 0.967)] {
            let est = expected_next_weight_mc(&s, 0, r, 0.6, &McSetup::default(), 1_000_000, &mut rng).unwrap();
            assert!((est.mean - want).abs() < 0.001);
            assert!((est.mean - expected_next_weight_owa(1.0, 0.1, r, 0.6)).abs() <= 3.0 * est.stderr + 1e-12);
        }
    }

    #[test]
    fn oms_closed_form() {
        let (a, b) = (0.0042888, 0.042888);
        let v = expected_next_weight_oms(1.0, a, b, 0.2, 0.5, 0.5).unwrap();
        let hand = (1.0 - b) * (1.0 - a * (1.0 - a / 0.2) * 0.25) + b;
        assert_abs_diff_eq!(v, hand, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.998996, epsilon = 1e-6);
        let m = ResponseModel::Oms { gamma: 0.8, alpha: a, beta: b, theta: 0.3 };
        for &(r, q) in &[(0.1, 0.3), (0.9, 0.2)] {
            let closed = expected_next_weight_oms(0.8, a, b, 0.3, r, q).unwrap();
            assert_abs_diff_eq!(m.expected(r, q), closed, epsilon = 1e-14);
        }
        // at α = θ the report stops mattering
        let lo = expected_next_weight_oms(1.0, 0.2, 0.1, 0.2 + 1e-15, 0.0, 0.4).unwrap();
        let hi = expected_next_weight_oms(1.0, 0.2, 0.1, 0.2 + 1e-15, 1.0, 0.4).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-12);
        assert!(matches!(expected_next_weight_oms(1.0, 0.3, 0.1, 0.2, 0.5, 0.5), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn oms_closed_form_matches_monte_carlo() {
        let (a, b) = oms_params(5, 2500).unwrap();
        let s = state(MechanismKind::Oms, 5, ParamChoice::default(), 2500);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est = expected_next_weight_mc(&s, 0, 0.9, 0.3, &McSetup::default(), 200_000, &mut rng).unwrap();
        let closed = expected_next_weight_oms(1.0, a, b, 0.2, 0.9, 0.3).unwrap();
        assert!((est.mean - closed).abs() <= 3.0 * est.stderr + 1e-12);
    }

    #[test]
    fn hedge_payoff_values() {
        let m = ResponseModel::Hedge { weight: 1.0, eta: 1.0 };
        let f7 = hedge_f(0.7, 0.7, 1.0);
        assert_abs_diff_eq!(m.expected(0.7, 0.7), f7, epsilon = 1e-15);
        assert_abs_diff_eq!(f7, 0.8235397, epsilon = 1e-7);
        assert_abs_diff_eq!(m.expected(0.8, 0.7), 0.830740, epsilon = 1e-6);
        let s = state(MechanismKind::Hedge, 2, ParamChoice { eta: Some(1.0), ..Default::default() }, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = expected_next_weight_mc(&s, 0, 0.7, 0.7, &McSetup::default(), 200_000, &mut rng).unwrap();
        assert!((est.mean - f7).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn hedge_best_response_moves_outward() {
        let m = ResponseModel::Hedge { weight: 1.0, eta: 1.0 };
        let br = grid_best_response(&m, 0.7, 0.01).unwrap();
        let dense = (0..=100_000).map(|k| hedge_f(k as f64 / 1e5, 0.7, 1.0)).fold(f64::NEG_INFINITY, f64::max);
        assert!(br.report > 0.7);
        assert!(br.gain >= 0.007);
        assert!(dense - br.best_value < 1e-4);
    }

    #[test]
    fn owa_and_oms_grid_truthful() {
        let step = 0.01;
        let owa = ResponseModel::Owa { weight: 1.0, alpha: 0.083395 };
        let (a, b) = oms_params(5, 2500).unwrap();
        let oms = ResponseModel::Oms { gamma: 1.0, alpha: a, beta: b, theta: 0.2 };
        for k in 1..=19 {
            let q = k as f64 * 0.05;
            for m in [&owa, &oms] {
                let br = grid_best_response(m, q, step).unwrap();
                assert!(br.gain <= m.resolution_slack(step) + 1e-9);
                assert!((br.report - q).abs() <= step / 2.0 + 1e-12);
            }
        }
        // off-grid belief rounds to the nearest grid point
        let br = grid_best_response(&owa, 0.4234, step).unwrap();
        assert_abs_diff_eq!(br.report, 0.42, epsilon = 1e-12);
        assert!(br.gain <= owa.resolution_slack(step));
    }

    #[test]
    fn exp3_payoff_uses_scaled_exponent() {
        // uniform start: pick = 1/N, payoff (1/N)·F_{ηN}(r) + (N−1)/N
        let n = 5.0;
        let m = ResponseModel::Exp3 { weight: 1.0, eta: 1.0, pick: 1.0 / n };
        for r in [0.2, 0.7, 1.0] {
            let want = hedge_f(r, 0.7, n) / n + (n - 1.0) / n;
            assert_abs_diff_eq!(m.expected(r, 0.7), want, epsilon = 1e-14);
        }
        let br = grid_best_response(&m, 0.7, 0.01).unwrap();
        assert!(br.gain > 10.0 * m.resolution_slack(0.01));
        let s = state(MechanismKind::Exp3, 5, ParamChoice { eta: Some(1.0), beta: Some(0.1), ..Default::default() }, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = expected_next_weight_mc(&s, 0, 0.9, 0.7, &McSetup::default(), 200_000, &mut rng).unwrap();
        assert!((est.mean - m.expected(0.9, 0.7)).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn em_lie_gain() {
        let m = ResponseModel::em_unanimous(EmParams::default(), 5).unwrap();
        let (g1, g0) = (243.0 / 275.0, 1.0 / (1.0 + (2.0f64 / 3.0).powi(3)));
        assert_abs_diff_eq!(g0, 0.771429, epsilon = 1e-6);
        let q = 0.7;
        let gain = m.expected(1.0, q) - m.expected(q, q);
        assert_abs_diff_eq!(gain, (1.0 - q) * (g1 + g0 - 1.0) / 3.0, epsilon = 1e-14);
        let br = grid_best_response(&m, q, 0.01).unwrap();
        assert_eq!(br.report, 1.0);
        assert_abs_diff_eq!(br.gain, gain, epsilon = 1e-14);

        let s = state(MechanismKind::Em, 5, ParamChoice::default(), 1);
        let setup = McSetup { others: 1.0, randomize_report: true };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let high = expected_next_weight_mc(&s, 0, 1.0, q, &setup, 20_000, &mut rng).unwrap();
        let honest = expected_next_weight_mc(&s, 0, q, q, &setup, 200_000, &mut rng).unwrap();
        let diff = high.mean - honest.mean;
        let se = (high.stderr.powi(2) + honest.stderr.powi(2)).sqrt();
        assert!((diff - gain).abs() <= 3.0 * se + 1e-12);
    }

    #[test]
    fn flips_contract_best_response() {
        let m = ResponseModel::Owa { weight: 1.0, alpha: 0.05 };
        let br = grid_best_response_under_flips(&m, 0.8, 0.1, 0.01).unwrap();
        assert_abs_diff_eq!(br.report, 0.74, epsilon = 1e-12);
        assert_abs_diff_eq!(flipped_belief(0.8, 0.1), 0.74, epsilon = 1e-15);
        assert!((br.report - 0.8).abs() <= 0.1 + 1e-12);
        assert!(grid_best_response_under_flips(&m, 0.8, 0.5, 0.01).is_err());
    }

    #[test]
    fn from_state_snapshots() {
        let s = state(MechanismKind::Oms, 5, ParamChoice::default(), 2500);
        let Some(ResponseModel::Oms { theta, gamma, .. }) = ResponseModel::from_state(&s, 1, &[true; 5]) else {
            panic!("expected OMS model")
        };
        assert_abs_diff_eq!(theta, 0.2);
        assert_eq!(gamma, 1.0);
        let med = state(MechanismKind::Median, 3, ParamChoice::default(), 10);
        assert!(ResponseModel::from_state(&med, 0, &[true; 3]).is_none());
        let em = state(MechanismKind::Em, 5, ParamChoice::default(), 10);
        assert_eq!(
            ResponseModel::from_state(&em, 0, &[true; 5]),
            Some(ResponseModel::em_unanimous(EmParams::default(), 5).unwrap())
        );
    }
}
