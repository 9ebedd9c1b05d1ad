//! Weight-update and selection schemes behind one interface.
//!
//! [`MechanismState`] wraps one of six concrete mechanisms. A slot runs as
//! `prepare` (draw the selected worker or the median subsample), build the
//! batch, `aggregation_override` (median / EM produce their own output),
//! then `update`.

mod em;
mod exp3;
mod hedge;
mod median;
mod oms;
mod owa;
mod params;

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::{SlotBatch, WeightVector};

pub use em::{binarize, Em, EmParams};
pub use exp3::Exp3;
pub use hedge::Hedge;
pub use median::{median_aggregate, Median};
pub use oms::Oms;
pub use owa::Owa;
pub use params::{catchup_bound, oms_params, oms_regret_bound, owa_alpha, owa_alpha_from_log, owa_regret_bound};

/// Floor applied to every weight after an update.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Draws an index with probability proportional to `dist`.
///
/// Panics if `dist` has no positive mass; callers only pass weight shares.
pub fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(dist).expect("selection distribution must have positive finite mass").sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Owa,
    Oms,
    Hedge,
    Em,
    Median,
    Exp3,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 6] = [Self::Owa, Self::Oms, Self::Hedge, Self::Em, Self::Median, Self::Exp3];

    /// Whether the mechanism sees a single selected report per slot.
    pub fn is_limited(self) -> bool {
        matches!(self, Self::Oms | Self::Exp3)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Owa => "owa",
            Self::Oms => "oms",
            Self::Hedge => "hedge",
            Self::Em => "em",
            Self::Median => "median",
            Self::Exp3 => "exp3",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| invalid(format!("unknown mechanism '{s}' (expected owa, oms, hedge, em, median or exp3)")))
    }
}

/// Hyperparameters with `None` meaning "derive from N and T".
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ParamChoice {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub em: EmParams,
    pub median_subsample: Option<usize>,
}

/// Concrete hyperparameters. Fields a mechanism does not use are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    pub em: Option<EmParams>,
    pub median_subsample: Option<usize>,
}

impl ParamChoice {
    /// Fills the automatic choices:
    ///
    /// * OWA: `α = owa_alpha(N, T)`
    /// * OMS: `(α, β) = oms_params(N, T)`
    /// * Hedge: `η = owa_alpha(N, T)`
    /// * EXP3: `η, β = oms_params(N, T)`
    pub fn resolve(&self, kind: MechanismKind, workers: usize, horizon: usize) -> Result<ResolvedParams> {
        let mut out = ResolvedParams { alpha: None, beta: None, eta: None, em: None, median_subsample: None };
        match kind {
            MechanismKind::Owa => {
                out.alpha = Some(match self.alpha {
                    Some(a) => a,
                    None => owa_alpha(workers, horizon)?,
                });
            }
            MechanismKind::Hedge => {
                out.eta = Some(match self.eta {
                    Some(e) => e,
                    None => owa_alpha(workers, horizon)?,
                });
            }
            MechanismKind::Oms | MechanismKind::Exp3 => {
                let step = if kind == MechanismKind::Oms { self.alpha } else { self.eta };
                let auto =
                    if step.is_none() || self.beta.is_none() { Some(oms_params(workers, horizon)?) } else { None };
                let (a, b) = auto.unwrap_or((f64::NAN, f64::NAN));
                if kind == MechanismKind::Oms {
                    out.alpha = Some(self.alpha.unwrap_or(a));
                    out.beta = Some(self.beta.unwrap_or(2.0 * out.alpha.unwrap() * workers as f64));
                } else {
                    out.eta = Some(self.eta.unwrap_or(a));
                    out.beta = Some(self.beta.unwrap_or(b));
                }
            }
            MechanismKind::Em => {
                self.em.validate()?;
                out.em = Some(self.em);
            }
            MechanismKind::Median => out.median_subsample = self.median_subsample,
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Owa(Owa),
    Oms(Oms),
    Hedge(Hedge),
    Em(Em),
    Median(Median),
    Exp3(Exp3),
}

/// One running mechanism plus bookkeeping shared by all kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismState {
    inner: Inner,
    pub params: ResolvedParams,
    /// Slots consumed so far.
    pub slot: usize,
    /// Number of (slot, worker) pairs whose weight hit [`WEIGHT_FLOOR`].
    pub clamp_events: usize,
}

impl MechanismState {
    pub fn new(kind: MechanismKind, workers: usize, params: ResolvedParams) -> Result<Self> {
        if workers == 0 {
            return Err(invalid("mechanism needs at least one worker"));
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| invalid(format!("{kind} needs {name}")));
        let inner = match kind {
            MechanismKind::Owa => Inner::Owa(Owa::new(workers, need(params.alpha, "alpha")?)?),
            MechanismKind::Oms => {
                Inner::Oms(Oms::new(workers, need(params.alpha, "alpha")?, need(params.beta, "beta")?)?)
            }
            MechanismKind::Hedge => Inner::Hedge(Hedge::new(workers, need(params.eta, "eta")?)?),
            MechanismKind::Em => Inner::Em(Em::new(workers, params.em.unwrap_or_default())?),
            MechanismKind::Median => Inner::Median(Median::new(workers, params.median_subsample)?),
            MechanismKind::Exp3 => {
                Inner::Exp3(Exp3::new(workers, need(params.eta, "eta")?, need(params.beta, "beta")?)?)
            }
        };
        Ok(Self { inner, params, slot: 0, clamp_events: 0 })
    }

    pub fn kind(&self) -> MechanismKind {
        match self.inner {
            Inner::Owa(_) => MechanismKind::Owa,
            Inner::Oms(_) => MechanismKind::Oms,
            Inner::Hedge(_) => MechanismKind::Hedge,
            Inner::Em(_) => MechanismKind::Em,
            Inner::Median(_) => MechanismKind::Median,
            Inner::Exp3(_) => MechanismKind::Exp3,
        }
    }

    /// Current weights. EM exports its reliabilities; the median keeps
    /// uniform weights.
    pub fn weights(&self) -> &[f64] {
        match &self.inner {
            Inner::Owa(m) => &m.weights,
            Inner::Oms(m) => &m.weights,
            Inner::Hedge(m) => &m.weights,
            Inner::Em(m) => &m.reliability,
            Inner::Median(m) => &m.weights,
            Inner::Exp3(m) => &m.weights,
        }
    }

    pub fn weight_vector(&self) -> Result<WeightVector> {
        WeightVector::new(self.weights().to_vec())
    }

    /// OMS auxiliary scores `γ`.
    pub fn gamma(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Oms(m) => Some(&m.gamma),
            _ => None,
        }
    }

    /// Chosen probability of each active worker: the selection distribution
    /// for limited mechanisms (EXP3 mixes in uniform exploration), the weight
    /// share otherwise.
    pub fn selection_distribution(&self, active: &[bool]) -> Vec<f64> {
        match &self.inner {
            Inner::Oms(m) => m.theta(),
            Inner::Exp3(m) => m.selection_distribution(),
            _ => {
                let total: f64 = self.weights().iter().zip(active).filter(|(_, a)| **a).map(|(w, _)| w).sum();
                self.weights().iter().zip(active).map(|(w, a)| if *a { w / total } else { 0.0 }).collect()
            }
        }
    }

    /// Draws per-slot randomness: the selected worker for limited mechanisms,
    /// the subsample for a subsampled median. Returns the selected worker.
    pub fn prepare<R: Rng + ?Sized>(&mut self, active: &[bool], rng: &mut R) -> Option<usize> {
        match &mut self.inner {
            Inner::Oms(m) => Some(m.select(rng)),
            Inner::Exp3(m) => Some(m.select(rng)),
            Inner::Median(m) => {
                if let Some(k) = m.subsample {
                    let pool: Vec<usize> = (0..active.len()).filter(|i| active[*i]).collect();
                    let k = k.min(pool.len());
                    let mut picked: Vec<usize> = sample(rng, pool.len(), k).into_iter().map(|j| pool[j]).collect();
                    picked.sort_unstable();
                    m.subset = Some(picked);
                }
                None
            }
            _ => None,
        }
    }

    /// Platform output that bypasses weighted aggregation: the per-prompt
    /// median, or EM's inferred label probabilities.
    pub fn aggregation_override(&self, batch: &SlotBatch) -> Result<Option<Vec<f64>>> {
        match &self.inner {
            Inner::Median(m) => {
                let pool: Vec<_> = batch
                    .transmitted()
                    .filter(|(i, _)| m.subset.as_ref().is_none_or(|s| s.contains(i)))
                    .map(|(_, r)| r)
                    .collect();
                let mut column = Vec::with_capacity(pool.len());
                let out = (0..batch.prompt_count)
                    .map(|j| {
                        column.clear();
                        column.extend(pool.iter().map(|r| r.values()[j]));
                        median_aggregate(&column)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(out))
            }
            Inner::Em(m) => Ok(Some(m.posteriors(batch))),
            _ => Ok(None),
        }
    }

    pub fn update(&mut self, batch: &SlotBatch) -> Result<()> {
        match &mut self.inner {
            Inner::Owa(m) => m.update(batch)?,
            Inner::Oms(m) => m.update(batch)?,
            Inner::Hedge(m) => m.update(batch)?,
            Inner::Em(m) => m.update(batch)?,
            Inner::Median(_) => {}
            Inner::Exp3(m) => m.update(batch)?,
        }
        let weights: &mut Vec<f64> = match &mut self.inner {
            Inner::Owa(m) => &mut m.weights,
            Inner::Oms(m) => &mut m.weights,
            Inner::Hedge(m) => &mut m.weights,
            Inner::Em(m) => &mut m.reliability,
            Inner::Median(m) => &mut m.weights,
            Inner::Exp3(m) => &mut m.weights,
        };
        for w in weights.iter_mut() {
            if *w <= WEIGHT_FLOOR {
                *w = WEIGHT_FLOOR;
                self.clamp_events += 1;
            }
        }
        self.slot += 1;
        Ok(())
    }

    /// Overrides one worker's weight, used when a worker joins mid-run.
    /// Only the full-feedback multiplicative schemes have a weight that can be
    /// set independently of other state.
    pub fn set_weight(&mut self, worker: usize, weight: f64) -> Result<()> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(invalid(format!("initial weight {weight} must be finite and > 0")));
        }
        let kind = self.kind();
        let slot = match &mut self.inner {
            Inner::Owa(m) => m.weights.get_mut(worker),
            Inner::Hedge(m) => m.weights.get_mut(worker),
            _ => return Err(invalid(format!("{kind} does not support setting a worker's weight"))),
        };
        *slot.ok_or_else(|| invalid(format!("worker {worker} out of range")))? = weight;
        Ok(())
    }
}
