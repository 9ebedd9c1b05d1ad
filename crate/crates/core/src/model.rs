//! Domain values shared by every stage of a slot: beliefs, reports, weights
//! and the per-slot batch handed to mechanisms and ledgers.

use serde::Serialize;

use crate::error::{invalid, Result};

fn check_probabilities(what: &str, values: &[f64]) -> Result<()> {
    if let Some((j, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("{what}[{j}] = {v} is outside [0, 1]")));
    }
    Ok(())
}

/// A worker's private probability that the first response is preferred,
/// one entry per prompt of the slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkerBelief(Vec<f64>);

impl WorkerBelief {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_probabilities("belief", &values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// What a worker actually tells the platform; may differ from the belief.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportVector(Vec<f64>);

impl ReportVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_probabilities("report", &values)?;
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&WorkerBelief> for ReportVector {
    fn from(b: &WorkerBelief) -> Self {
        Self(b.0.clone())
    }
}

/// Strictly positive, finite per-worker weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!("weight[{i}] = {w} must be finite and > 0")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `w_i / Σ w` over the workers flagged active; inactive entries get 0.
    pub fn shares(&self, active: &[bool]) -> Vec<f64> {
        let total: f64 = self.0.iter().zip(active).filter(|(_, a)| **a).map(|(w, _)| w).sum();
        self.0.iter().zip(active).map(|(w, a)| if *a && total > 0.0 { w / total } else { 0.0 }).collect()
    }
}

/// Everything that happened in one slot.
///
/// `reports` and `beliefs` are indexed by worker and hold what the simulator
/// knows omnisciently; `None` marks a worker that is not active this slot.
/// In limited-feedback slots only `reports[selected_worker]` is transmitted to
/// the platform, see [`SlotBatch::transmitted`].
#[derive(Debug, Clone, PartialEq)]
pub struct SlotBatch {
    pub slot_index: usize,
    pub prompt_count: usize,
    pub reports: Vec<Option<ReportVector>>,
    pub beliefs: Vec<Option<WorkerBelief>>,
    pub true_labels: Vec<bool>,
    pub verified_labels: Vec<bool>,
    pub selected_worker: Option<usize>,
}

impl SlotBatch {
    /// Full-feedback batch where every worker is active, reports truthfully and
    /// verification is exact.
    pub fn truthful(slot_index: usize, reports: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        let mut rs = Vec::with_capacity(reports.len());
        let mut bs = Vec::with_capacity(reports.len());
        for r in reports {
            bs.push(Some(WorkerBelief::new(r.clone())?));
            rs.push(Some(ReportVector::new(r)?));
        }
        let batch = Self {
            slot_index,
            prompt_count: labels.len(),
            reports: rs,
            beliefs: bs,
            verified_labels: labels.clone(),
            true_labels: labels,
            selected_worker: None,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn with_selected(mut self, worker: usize) -> Self {
        self.selected_worker = Some(worker);
        self
    }

    pub fn with_verified(mut self, verified: Vec<bool>) -> Self {
        self.verified_labels = verified;
        self
    }

    pub fn worker_count(&self) -> usize {
        self.reports.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.prompt_count;
        if m == 0 {
            return Err(invalid("slot has no prompts"));
        }
        if self.true_labels.len() != m || self.verified_labels.len() != m {
            return Err(invalid(format!(
                "label lengths {}/{} differ from prompt count {m}",
                self.true_labels.len(),
                self.verified_labels.len()
            )));
        }
        if self.beliefs.len() != self.reports.len() {
            return Err(invalid("beliefs and reports cover different worker counts"));
        }
        for (i, (r, b)) in self.reports.iter().zip(&self.beliefs).enumerate() {
            if r.as_ref().is_some_and(|r| r.len() != m) || b.as_ref().is_some_and(|b| b.len() != m) {
                return Err(invalid(format!("worker {i} vector length differs from {m}")));
            }
        }
        if let Some(s) = self.selected_worker {
            if self.reports.get(s).is_none_or(Option::is_none) {
                return Err(invalid(format!("selected worker {s} has no report")));
            }
        }
        Ok(())
    }

    /// Workers that take part in this slot.
    pub fn active(&self) -> Vec<bool> {
        self.reports.iter().map(Option::is_some).collect()
    }

    /// Reports the platform is allowed to see.
    pub fn transmitted(&self) -> impl Iterator<Item = (usize, &ReportVector)> + '_ {
        let selected = self.selected_worker;
        self.reports
            .iter()
            .enumerate()
            .filter(move |(i, _)| selected.is_none_or(|s| s == *i))
            .filter_map(|(i, r)| r.as_ref().map(|r| (i, r)))
    }
}

#[inline]
pub(crate) fn label_value(label: bool) -> f64 {
    if label {
        1.0
    } else {
        0.0
    }
}
