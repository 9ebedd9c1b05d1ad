use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{MechanismKind, ParamChoice, ResolvedParams};
use crate::workers::{NoiseBand, StrategySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackMode {
    /// Every worker's report reaches the platform.
    Full,
    /// One selected worker's report reaches the platform.
    Limited,
}

impl FeedbackMode {
    pub fn for_mechanism(kind: MechanismKind) -> Self {
        if kind.is_limited() {
            Self::Limited
        } else {
            Self::Full
        }
    }
}

/// Initial weight of a worker joining mid-run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ArrivalWeight {
    Absolute(f64),
    /// `incumbent`'s weight at arrival divided by `ratio`.
    Ratio {
        incumbent: usize,
        ratio: f64,
    },
}

/// A worker that joins at `start_slot`. It takes index `N`, after the
/// incumbents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrivalSpec {
    pub start_slot: usize,
    pub weight: ArrivalWeight,
    pub band: NoiseBand,
    pub strategy: StrategySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub mechanism: MechanismKind,
    pub params: ParamChoice,
    /// Incumbent workers, present from slot 1.
    pub workers: usize,
    pub horizon: usize,
    pub prompts: usize,
    pub bands: Vec<NoiseBand>,
    pub strategies: Vec<StrategySpec>,
    pub feedback: FeedbackMode,
    pub flip_epsilon: f64,
    pub arrival: Option<ArrivalSpec>,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Truthful workers with the default noise bands and automatic step sizes.
    pub fn preset(mechanism: MechanismKind, workers: usize, horizon: usize, prompts: usize, seed: u64) -> Self {
        Self {
            mechanism,
            params: ParamChoice::default(),
            workers,
            horizon,
            prompts,
            bands: NoiseBand::preset(workers),
            strategies: vec![StrategySpec::truthful(); workers],
            feedback: FeedbackMode::for_mechanism(mechanism),
            flip_epsilon: 0.0,
            arrival: None,
            seed,
        }
    }

    /// Same scenario with `workers` truthful workers on the default bands.
    pub fn with_workers(&self, workers: usize) -> Self {
        Self {
            workers,
            bands: NoiseBand::preset(workers),
            strategies: vec![StrategySpec::truthful(); workers],
            ..self.clone()
        }
    }

    /// Same scenario run by another mechanism, feedback mode following it.
    pub fn with_mechanism(&self, mechanism: MechanismKind) -> Self {
        Self { mechanism, feedback: FeedbackMode::for_mechanism(mechanism), ..self.clone() }
    }

    pub fn total_workers(&self) -> usize {
        self.workers + usize::from(self.arrival.is_some())
    }

    pub fn all_bands(&self) -> Vec<NoiseBand> {
        let mut b = self.bands.clone();
        b.extend(self.arrival.map(|a| a.band));
        b
    }

    pub fn all_strategies(&self) -> Vec<StrategySpec> {
        let mut s = self.strategies.clone();
        s.extend(self.arrival.map(|a| a.strategy));
        s
    }

    pub fn is_active(&self, worker: usize, slot: usize) -> bool {
        worker < self.workers || self.arrival.is_some_and(|a| worker == self.workers && slot >= a.start_slot)
    }

    /// Step sizes tuned to the total worker count and the horizon.
    pub fn resolve_params(&self) -> Result<ResolvedParams> {
        self.params.resolve(self.mechanism, self.total_workers(), self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.workers == 0 {
            return bad("N: need at least one worker".into());
        }
        if self.prompts == 0 {
            return bad("m: need at least one prompt per slot".into());
        }
        if self.bands.len() != self.workers {
            return bad(format!("bands: {} noise bands for N = {}", self.bands.len(), self.workers));
        }
        if self.strategies.len() != self.workers {
            return bad(format!("strategies: {} strategies for N = {}", self.strategies.len(), self.workers));
        }
        for (i, b) in self.all_bands().iter().enumerate() {
            if let Err(e) = NoiseBand::new(b.low, b.high) {
                return bad(format!("worker.{}.band: {e}", i + 1));
            }
        }
        for (i, s) in self.all_strategies().iter().enumerate() {
            if let Err(e) = s.validate() {
                return bad(format!("worker.{}.strategy: {e}", i + 1));
            }
        }
        if self.feedback != FeedbackMode::for_mechanism(self.mechanism) {
            return bad(format!(
                "feedback: {} runs with {:?} feedback",
                self.mechanism,
                FeedbackMode::for_mechanism(self.mechanism)
            ));
        }
        if !(0.0..0.5).contains(&self.flip_epsilon) {
            return bad(format!("flip_epsilon: {} must lie in [0, 1/2)", self.flip_epsilon));
        }
        if let Some(k) = self.params.median_subsample {
            if k == 0 || k > self.total_workers() {
                return bad(format!("median_subsample: {k} must lie in [1, {}]", self.total_workers()));
            }
        }
        if let Some(a) = &self.arrival {
            if !(1..=self.horizon).contains(&a.start_slot) {
                return bad(format!("arrival.slot: {} must lie in [1, T = {}]", a.start_slot, self.horizon));
            }
            if !matches!(self.mechanism, MechanismKind::Owa | MechanismKind::Hedge) {
                return bad(format!("arrival: {} has no settable per-worker weight", self.mechanism));
            }
            match a.weight {
                ArrivalWeight::Absolute(w) if !(w > 0.0 && w.is_finite()) => {
                    return bad(format!("arrival.weight: {w} must be positive"));
                }
                ArrivalWeight::Ratio { incumbent, ratio } => {
                    if incumbent >= self.workers {
                        return bad(format!("arrival.incumbent: {} is not an incumbent", incumbent + 1));
                    }
                    if !(ratio >= 1.0 && ratio.is_finite()) {
                        return bad(format!("arrival.ratio: {ratio} must be >= 1"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
