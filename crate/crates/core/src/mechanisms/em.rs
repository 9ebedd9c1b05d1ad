//! Online Dawid–Skene EM benchmark.
//!
//! Reports are binarised at 0.5 (ties vote 1). Each slot runs one E-step per
//! prompt, computing the posterior that the hidden label is 1 from the
//! workers' current reliabilities, then one M-step that moves each worker's
//! reliability to the Beta posterior mean
//! `(a + E[1{vote = label}]) / (a + b + 1)`, averaged over the slot's prompts.
//! Verified labels are never consulted.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::SlotBatch;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmParams {
    pub prior_a: f64,
    pub prior_b: f64,
    pub truth_prior: f64,
    pub initial_reliability: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        Self { prior_a: 1.0, prior_b: 1.0, truth_prior: 0.5, initial_reliability: 0.6 }
    }
}

impl EmParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.prior_a > 0.0 && self.prior_b > 0.0) {
            return Err(invalid("EM Beta prior parameters must be positive"));
        }
        if !open_unit(self.truth_prior) || !open_unit(self.initial_reliability) {
            return Err(invalid("EM truth prior and initial reliability must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[inline]
pub fn binarize(report: f64) -> bool {
    report >= 0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct Em {
    pub params: EmParams,
    /// Per-worker reliability; exported as the mechanism's weights.
    pub reliability: Vec<f64>,
}

impl Em {
    pub fn new(workers: usize, params: EmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { reliability: vec![params.initial_reliability; workers], params })
    }

    /// E-step: `P(label = 1 | votes)` under the current reliabilities.
    pub fn posterior(&self, votes: &[(usize, bool)]) -> f64 {
        let pi = self.params.truth_prior;
        let mut log_odds = (pi / (1.0 - pi)).ln();
        for &(i, vote) in votes {
            let w = self.reliability[i];
            let evidence = (w / (1.0 - w)).ln();
            log_odds += if vote { evidence } else { -evidence };
        }
        1.0 / (1.0 + (-log_odds).exp())
    }

    fn votes(batch: &SlotBatch, prompt: usize) -> Vec<(usize, bool)> {
        batch.transmitted().map(|(i, r)| (i, binarize(r.values()[prompt]))).collect()
    }

    /// Inferred label probabilities, one per prompt; this is the benchmark's
    /// aggregate.
    pub fn posteriors(&self, batch: &SlotBatch) -> Vec<f64> {
        (0..batch.prompt_count).map(|j| self.posterior(&Self::votes(batch, j))).collect()
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        let m = batch.prompt_count;
        if m == 0 {
            return Err(invalid("EM update over zero prompts"));
        }
        let EmParams { prior_a: a, prior_b: b, .. } = self.params;
        let mut next = vec![0.0; self.reliability.len()];
        let mut touched = vec![false; self.reliability.len()];
        for j in 0..m {
            let votes = Self::votes(batch, j);
            let gamma = self.posterior(&votes);
            for (i, vote) in votes {
                let agree = if vote { gamma } else { 1.0 - gamma };
                next[i] += (a + agree) / (a + b + 1.0) / m as f64;
                touched[i] = true;
            }
        }
        for ((r, n), t) in self.reliability.iter_mut().zip(next).zip(touched) {
            if t {
                *r = n;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Brute-force Bayes over label ∈ {0, 1} with a shared reliability.
    fn brute_posterior(votes: &[bool], w0: f64, pi: f64) -> f64 {
        let like = |label: bool| -> f64 { votes.iter().map(|v| if *v == label { w0 } else { 1.0 - w0 }).product() };
        let one = pi * like(true);
        let zero = (1.0 - pi) * like(false);
        one / (one + zero)
    }

    fn shared(n: usize) -> Em {
        Em::new(n, EmParams::default()).unwrap()
    }

    #[test]
    fn posterior_matches_bayes_and_closed_form() {
        let em = shared(5);
        for m in 0..=5 {
            let votes: Vec<bool> = (0..5).map(|i| i < m).collect();
            let indexed: Vec<_> = votes.iter().copied().enumerate().collect();
            let got = em.posterior(&indexed);
            assert_abs_diff_eq!(got, brute_posterior(&votes, 0.6, 0.5), epsilon = 1e-12);
            let closed = 1.0 / (1.0 + (0.4f64 / 0.6).powi(2 * m - 5));
            assert_abs_diff_eq!(got, closed, epsilon = 1e-12);
        }
        let all: Vec<_> = (0..5).map(|i| (i, true)).collect();
        assert_abs_diff_eq!(em.posterior(&all), 243.0 / 275.0, epsilon = 1e-12);
        assert_abs_diff_eq!(em.posterior(&all), 0.883636, epsilon = 1e-6);
    }

    #[test]
    fn half_split_is_even() {
        let em = shared(4);
        let votes = [(0, true), (1, true), (2, false), (3, false)];
        assert_abs_diff_eq!(em.posterior(&votes), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn m_step_posterior_mean() {
        let mut em = shared(5);
        let batch = SlotBatch::truthful(1, vec![vec![1.0]; 5], vec![false]).unwrap();
        em.update(&batch).unwrap();
        let g1 = 243.0 / 275.0;
        for r in &em.reliability {
            assert_abs_diff_eq!(*r, (1.0 + g1) / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lie_gain_closed_form() {
        // Worker 0 votes against four 1-votes; compare its expected
        // reliability when always voting 1 vs sampling its vote from q.
        let q = 0.7;
        let next = |vote: f64| {
            let mut em = shared(5);
            let mut reports = vec![vec![1.0]; 5];
            reports[0] = vec![vote];
            em.update(&SlotBatch::truthful(1, reports, vec![true]).unwrap()).unwrap();
            em.reliability[0]
        };
        let lie = next(1.0);
        let truth = q * next(1.0) + (1.0 - q) * next(0.0);
        let g1 = 1.0 / (1.0 + (2.0f64 / 3.0).powi(5));
        let g0 = 1.0 / (1.0 + (2.0f64 / 3.0).powi(3));
        let closed = (1.0 - q) * (g1 + g0 - 1.0) / 3.0;
        assert_abs_diff_eq!(lie - truth, closed, epsilon = 1e-12);
        assert_abs_diff_eq!(closed, 0.065506, epsilon = 1e-6);
    }

    #[test]
    fn ties_vote_high() {
        assert!(binarize(0.5));
        assert!(!binarize(0.4999));
    }
}
