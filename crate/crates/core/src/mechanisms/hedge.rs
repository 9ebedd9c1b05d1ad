use crate::aggregation::slot_loss;
use crate::error::{invalid, Result};
use crate::model::SlotBatch;

/// Exponential-weights benchmark: `w ← w·exp(−η·loss)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hedge {
    pub eta: f64,
    pub weights: Vec<f64>,
}

impl Hedge {
    pub fn new(workers: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("Hedge learning rate must be positive, got {eta}")));
        }
        Ok(Self { eta, weights: vec![1.0; workers] })
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        for (i, report) in batch.transmitted() {
            let loss = slot_loss(report.values(), &batch.verified_labels)?;
            self.weights[i] *= (-self.eta * loss).exp();
        }
        Ok(())
    }
}
