//! Online mixed selection for single-report slots.
//!
//! One worker `I_t` is drawn with probability `θ_i = w_i / Σ w`. Only that
//! worker's score moves:
//!
//! ```text
//! γ_i ← γ_i · (1 − α · ℓ_i · (1 − α/θ_i) / θ_i)
//! w_i ← (1 − β) · γ_i + β
//! ```
//!
//! With `β = 2αN` every weight stays in `[β, 1]`, hence `θ_i ≥ β/N = 2α` and
//! the factor `(1 − α/θ_i)` stays positive, which is what makes truthful
//! reporting optimal for the selected worker.

use rand::Rng;

use crate::aggregation::slot_loss;
use crate::error::{invalid, Error, Result};
use crate::model::SlotBatch;

use super::sample_index;

#[derive(Debug, Clone, PartialEq)]
pub struct Oms {
    pub alpha: f64,
    pub beta: f64,
    pub weights: Vec<f64>,
    pub gamma: Vec<f64>,
    pub last_selected: Option<usize>,
}

impl Oms {
    pub fn new(workers: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0 && beta < 1.0) {
            return Err(invalid(format!("OMS needs α > 0 and β in (0, 1); got α = {alpha}, β = {beta}")));
        }
        Ok(Self { alpha, beta, weights: vec![1.0; workers], gamma: vec![1.0; workers], last_selected: None })
    }

    pub fn theta(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn select<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let i = sample_index(&self.theta(), rng);
        self.last_selected = Some(i);
        i
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        let i = batch.selected_worker.ok_or_else(|| invalid("OMS update needs a selected worker"))?;
        let report = batch.reports[i].as_ref().ok_or_else(|| invalid("selected worker sent no report"))?;
        let theta = self.theta()[i];
        if self.alpha >= theta {
            return Err(Error::PreconditionViolated(format!(
                "step size α = {} is not below selection probability θ = {theta} of worker {i}",
                self.alpha
            )));
        }
        let loss = slot_loss(report.values(), &batch.verified_labels)?;
        self.gamma[i] *= 1.0 - self.alpha * loss * (1.0 - self.alpha / theta) / theta;
        self.weights[i] = (1.0 - self.beta) * self.gamma[i] + self.beta;
        Ok(())
    }
}
