//! Weighted aggregation of reports and the per-slot squared loss.

use crate::error::{invalid, Error, Result};
use crate::model::label_value;

/// `Σ w_i r_i / Σ w_i` for a single prompt.
pub fn weighted_aggregate(weights: &[f64], reports: &[f64]) -> Result<f64> {
    if weights.is_empty() || weights.len() != reports.len() {
        return Err(invalid(format!(
            "need equal, positive lengths; got {} weights and {} reports",
            weights.len(),
            reports.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights(total));
    }
    let num: f64 = weights.iter().zip(reports).map(|(w, r)| w * r).sum();
    // Keep the result inside the hull of the reports despite rounding.
    let (lo, hi) = reports.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    Ok((num / total).clamp(lo, hi))
}

/// Mean squared distance between a report vector and binary labels.
pub fn slot_loss(report: &[f64], labels: &[bool]) -> Result<f64> {
    if report.len() != labels.len() {
        return Err(invalid(format!("report has {} entries but there are {} labels", report.len(), labels.len())));
    }
    if report.is_empty() {
        return Err(invalid("slot loss over zero prompts"));
    }
    let sum: f64 = report
        .iter()
        .zip(labels)
        .map(|(r, l)| {
            let d = r - label_value(*l);
            d * d
        })
        .sum();
    Ok(sum / report.len() as f64)
}
