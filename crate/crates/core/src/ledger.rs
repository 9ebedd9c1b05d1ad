//! Regret accounting.
//!
//! The platform term is scored against the *verified* labels the platform
//! actually receives, while the best-worker benchmark is scored on each
//! worker's true belief against the *true* labels. With exact verification
//! the two label sets coincide.
//!
//! Finite-sample regret can be negative (the aggregate may beat every single
//! worker); it is reported as is.

use serde::Serialize;

use crate::aggregation::{slot_loss, weighted_aggregate};
use crate::error::{invalid, Error, Result};
use crate::model::{SlotBatch, WeightVector};

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegretLedger {
    pub cumulative_platform_loss: f64,
    pub per_worker_true_loss: Vec<f64>,
    /// Limited feedback only: loss of the worker that was actually selected.
    pub realized_platform_loss: f64,
    pub slot_count: usize,
    /// Slots in which each worker was active. A worker competes for "best in
    /// hindsight" only if it was active in every recorded slot.
    pub active_slots: Vec<usize>,
}

impl RegretLedger {
    pub fn new(workers: usize) -> Self {
        Self { per_worker_true_loss: vec![0.0; workers], active_slots: vec![0; workers], ..Self::default() }
    }

    fn ensure_width(&mut self, n: usize) -> Result<()> {
        if self.per_worker_true_loss.is_empty() && self.slot_count == 0 {
            self.per_worker_true_loss = vec![0.0; n];
            self.active_slots = vec![0; n];
        }
        if self.per_worker_true_loss.len() != n {
            return Err(invalid(format!("ledger tracks {} workers, batch has {n}", self.per_worker_true_loss.len())));
        }
        Ok(())
    }

    fn record_true_losses(&mut self, batch: &SlotBatch) -> Result<()> {
        for (i, belief) in batch.beliefs.iter().enumerate() {
            if let Some(b) = belief {
                self.per_worker_true_loss[i] += slot_loss(b.values(), &batch.true_labels)?;
                self.active_slots[i] += 1;
            }
        }
        self.slot_count += 1;
        Ok(())
    }

    /// Full feedback: the platform output is the weighted aggregate of all
    /// transmitted reports, unless `aggregation_override` supplies the
    /// per-prompt output directly (median and EM benchmarks). Returns the
    /// platform's loss for this slot.
    pub fn record_full(
        &mut self,
        batch: &SlotBatch,
        weights: &WeightVector,
        aggregation_override: Option<&[f64]>,
    ) -> Result<f64> {
        batch.validate()?;
        self.ensure_width(batch.worker_count())?;
        let output = match aggregation_override {
            Some(o) => {
                if o.len() != batch.prompt_count {
                    return Err(invalid("override length differs from prompt count"));
                }
                o.to_vec()
            }
            None => aggregate_batch(batch, weights)?,
        };
        let loss = slot_loss(&output, &batch.verified_labels)?;
        self.cumulative_platform_loss += loss;
        self.record_true_losses(batch)?;
        Ok(loss)
    }

    /// Limited feedback: charges the expected loss under the selection
    /// distribution, and separately the loss of the realised selection.
    /// Returns `(expected, realized)` for the slot.
    pub fn record_limited(&mut self, batch: &SlotBatch, distribution: &[f64]) -> Result<(f64, f64)> {
        batch.validate()?;
        self.ensure_width(batch.worker_count())?;
        let selected =
            batch.selected_worker.ok_or_else(|| invalid("limited-feedback batch without a selected worker"))?;
        if distribution.len() != batch.worker_count() {
            return Err(invalid("distribution length differs from worker count"));
        }
        let total: f64 = distribution.iter().sum();
        if (total - 1.0).abs() > 1e-9 || distribution.iter().any(|p| *p < 0.0) {
            return Err(invalid(format!("selection distribution sums to {total}, not 1")));
        }
        let mut expected = 0.0;
        for (i, p) in distribution.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            let r = batch.reports[i].as_ref().ok_or_else(|| invalid(format!("worker {i} has mass but no report")))?;
            expected += p * slot_loss(r.values(), &batch.verified_labels)?;
        }
        let realized =
            slot_loss(batch.reports[selected].as_ref().expect("validated").values(), &batch.verified_labels)?;
        self.cumulative_platform_loss += expected;
        self.realized_platform_loss += realized;
        self.record_true_losses(batch)?;
        Ok((expected, realized))
    }

    /// Smallest cumulative true loss among workers active for the whole run.
    pub fn best_worker_loss(&self) -> Option<(usize, f64)> {
        self.per_worker_true_loss
            .iter()
            .zip(&self.active_slots)
            .enumerate()
            .filter(|(_, (_, a))| **a == self.slot_count)
            .map(|(i, (l, _))| (i, *l))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// `(R(T), R(T)/T)`.
    pub fn regret(&self) -> Result<(f64, f64)> {
        if self.slot_count == 0 {
            return Err(Error::EmptyLedger);
        }
        let (_, best) = self.best_worker_loss().ok_or_else(|| invalid("no worker was active in every slot"))?;
        let r = self.cumulative_platform_loss - best;
        Ok((r, r / self.slot_count as f64))
    }
}

/// Per-prompt weighted aggregate over the reports the platform received.
pub fn aggregate_batch(batch: &SlotBatch, weights: &WeightVector) -> Result<Vec<f64>> {
    if weights.len() != batch.worker_count() {
        return Err(invalid("weight vector length differs from worker count"));
    }
    let received: Vec<_> = batch.transmitted().collect();
    let w: Vec<f64> = received.iter().map(|(i, _)| weights.as_slice()[*i]).collect();
    let mut column = vec![0.0; received.len()];
    (0..batch.prompt_count)
        .map(|j| {
            for (c, (_, r)) in column.iter_mut().zip(&received) {
                *c = r.values()[j];
            }
            weighted_aggregate(&w, &column)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_slot_two_workers() {
        let batch = SlotBatch::truthful(1, vec![vec![1.0], vec![0.0]], vec![true]).unwrap();
        let mut ledger = RegretLedger::new(2);
        ledger.record_full(&batch, &WeightVector::uniform(2, 1.0), None).unwrap();
        assert_abs_diff_eq!(ledger.cumulative_platform_loss, 0.25);
        assert_eq!(ledger.per_worker_true_loss, vec![0.0, 1.0]);
        assert_eq!(ledger.slot_count, 1);
    }

    #[test]
    fn empty_ledger() {
        let ledger = RegretLedger::new(3);
        assert_eq!(ledger.cumulative_platform_loss, 0.0);
        assert!(ledger.per_worker_true_loss.iter().all(|l| *l == 0.0));
        assert_eq!(ledger.regret(), Err(Error::EmptyLedger));
    }

    #[test]
    fn perfect_worker_has_zero_loss() {
        let mut ledger = RegretLedger::new(2);
        for t in 1..=10 {
            let labels = vec![t % 2 == 0, t % 3 == 0];
            let perfect: Vec<f64> = labels.iter().map(|l| if *l { 1.0 } else { 0.0 }).collect();
            let batch = SlotBatch::truthful(t, vec![perfect, vec![0.5, 0.5]], labels).unwrap();
            ledger.record_full(&batch, &WeightVector::uniform(2, 1.0), None).unwrap();
        }
        assert_eq!(ledger.per_worker_true_loss[0], 0.0);
        assert_eq!(ledger.best_worker_loss(), Some((0, 0.0)));
    }

    #[test]
    fn limited_increments() {
        let labels = vec![true];
        // losses 0 and 1
        let batch = SlotBatch::truthful(1, vec![vec![1.0], vec![0.0]], labels.clone()).unwrap().with_selected(1);
        let mut ledger = RegretLedger::new(2);
        let (e, r) = ledger.record_limited(&batch, &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(e, 0.5);
        assert_abs_diff_eq!(r, 1.0);

        let mut ledger = RegretLedger::new(2);
        let (e, _) = ledger.record_limited(&batch, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(e, 0.0);

        // losses 0.1, 0.2, 0.4 from reports at distance sqrt(loss) of label 1
        let reports = [0.1f64, 0.2, 0.4].iter().map(|l| vec![1.0 - l.sqrt()]).collect();
        let batch = SlotBatch::truthful(1, reports, labels).unwrap().with_selected(0);
        let theta = [0.2, 0.3, 0.5];
        let oracle: f64 = theta.iter().zip([0.1, 0.2, 0.4]).map(|(a, b)| a * b).sum();
        let mut ledger = RegretLedger::new(3);
        let (e, _) = ledger.record_limited(&batch, &theta).unwrap();
        assert_abs_diff_eq!(e, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(oracle, 0.28, epsilon = 1e-12);
    }

    #[test]
    fn limited_rejects_unnormalised() {
        let batch = SlotBatch::truthful(1, vec![vec![1.0], vec![0.0]], vec![true]).unwrap().with_selected(0);
        let mut ledger = RegretLedger::new(2);
        assert!(matches!(ledger.record_limited(&batch, &[0.5, 0.6]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn regret_examples() {
        let ledger = RegretLedger {
            cumulative_platform_loss: 5.0,
            per_worker_true_loss: vec![2.0, 4.0],
            realized_platform_loss: 0.0,
            slot_count: 10,
            active_slots: vec![10, 10],
        };
        let (r, avg) = ledger.regret().unwrap();
        assert_abs_diff_eq!(r, 3.0);
        assert_abs_diff_eq!(avg, 0.3);
    }

    #[test]
    fn copying_best_worker_gives_zero_regret() {
        let mut ledger = RegretLedger::new(2);
        for t in 1..=5 {
            let batch = SlotBatch::truthful(t, vec![vec![0.9, 0.2], vec![0.4, 0.6]], vec![true, false]).unwrap();
            let copy = [0.9, 0.2];
            ledger.record_full(&batch, &WeightVector::uniform(2, 1.0), Some(&copy)).unwrap();
        }
        let (r, avg) = ledger.regret().unwrap();
        assert!(r.abs() < 1e-12 && avg.abs() < 1e-12);
    }

    #[test]
    fn median_replay_half_loss_per_slot() {
        // One exact worker and two whose report sits sqrt(1/2) from the label;
        // the median is always one of the latter, so c = 1/2 every slot.
        let d = 0.5f64.sqrt();
        let mut ledger = RegretLedger::new(3);
        for t in 1..=100 {
            let p = t % 2 == 0;
            let exact = if p { 1.0 } else { 0.0 };
            let off = if p { 1.0 - d } else { d };
            let batch = SlotBatch::truthful(t, vec![vec![exact], vec![off], vec![off]], vec![p]).unwrap();
            ledger.record_full(&batch, &WeightVector::uniform(3, 1.0), Some(&[off])).unwrap();
        }
        let (r, avg) = ledger.regret().unwrap();
        assert_abs_diff_eq!(r, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(avg, 0.5, epsilon = 1e-9);
    }
}
