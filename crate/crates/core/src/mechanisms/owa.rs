//! Online weighted aggregation: `w ← w·(1 − α·loss)` with loss measured
//! against the verified labels.

use crate::aggregation::slot_loss;
use crate::error::{invalid, Result};
use crate::model::SlotBatch;

#[derive(Debug, Clone, PartialEq)]
pub struct Owa {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

impl Owa {
    pub fn new(workers: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(invalid(format!("OWA step size must lie in (0, 1/2), got {alpha}")));
        }
        Ok(Self { alpha, weights: vec![1.0; workers] })
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        for (i, report) in batch.transmitted() {
            let loss = slot_loss(report.values(), &batch.verified_labels)?;
            self.weights[i] *= 1.0 - self.alpha * loss;
        }
        Ok(())
    }
}
