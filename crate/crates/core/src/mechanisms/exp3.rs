//! EXP3 benchmark for single-report slots.
//!
//! Selection mixes the weight shares with uniform exploration,
//! `π_i = (1 − β)·θ_i + β/N`, and the selected worker's loss is importance
//! weighted by `1/π_i` so the estimate is unbiased under that same draw.

use rand::Rng;

use crate::aggregation::slot_loss;
use crate::error::{invalid, Result};
use crate::model::SlotBatch;

use super::sample_index;

#[derive(Debug, Clone, PartialEq)]
pub struct Exp3 {
    pub eta: f64,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub last_selected: Option<usize>,
}

impl Exp3 {
    pub fn new(workers: usize, eta: f64, beta: f64) -> Result<Self> {
        if !(eta > 0.0) || !(0.0..1.0).contains(&beta) {
            return Err(invalid(format!("EXP3 needs η > 0 and β in [0, 1); got η = {eta}, β = {beta}")));
        }
        Ok(Self { eta, beta, weights: vec![1.0; workers], last_selected: None })
    }

    pub fn selection_distribution(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let n = self.weights.len() as f64;
        self.weights.iter().map(|w| (1.0 - self.beta) * w / total + self.beta / n).collect()
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let i = sample_index(&self.selection_distribution(), rng);
        self.last_selected = Some(i);
        i
    }

    /// `ℓ / π_i` for the selected worker.
    pub fn estimate(&self, worker: usize, loss: f64) -> f64 {
        loss / self.selection_distribution()[worker]
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        let i = batch.selected_worker.ok_or_else(|| invalid("EXP3 update needs a selected worker"))?;
        let report = batch.reports[i].as_ref().ok_or_else(|| invalid("selected worker sent no report"))?;
        let loss = slot_loss(report.values(), &batch.verified_labels)?;
        let estimate = self.estimate(i, loss);
        self.weights[i] *= (-self.eta * estimate).exp();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn estimator_substitution() {
        let m = Exp3::new(5, 0.1, 0.1).unwrap();
        // π = 0.9·0.2 + 0.02 = 0.2
        assert_abs_diff_eq!(m.estimate(0, 0.5), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn unselected_untouched() {
        let mut m = Exp3::new(3, 0.5, 0.1).unwrap();
        let batch = SlotBatch::truthful(1, vec![vec![0.2]; 3], vec![true]).unwrap().with_selected(1);
        m.update(&batch).unwrap();
        assert_eq!(m.weights[0], 1.0);
        assert_eq!(m.weights[2], 1.0);
        assert!(m.weights[1] < 1.0);
    }

    #[test]
    fn estimator_is_unbiased() {
        let mut m = Exp3::new(4, 0.1, 0.2).unwrap();
        m.weights = vec![1.0, 0.3, 0.05, 0.6];
        let losses = [0.1, 0.5, 0.7, 0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let mut sums = [0.0; 4];
        for _ in 0..draws {
            let i = m.select(&mut rng);
            sums[i] += m.estimate(i, losses[i]);
        }
        for (s, l) in sums.iter().zip(losses) {
            assert!((s / draws as f64 - l).abs() < 0.02, "mean {} vs {l}", s / draws as f64);
        }
    }
}
