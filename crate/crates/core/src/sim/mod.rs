//! The slot loop.
//!
//! Each slot draws ground truth, forms beliefs and reports, lets the
//! platform aggregate (all reports, or only the selected one in limited
//! feedback), perturbs the verified labels, updates the mechanism and books
//! the losses. Every random quantity comes from its own stream derived from
//! the master seed, so e.g. raising the flip rate leaves labels and beliefs
//! untouched.

mod config;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::ledger::RegretLedger;
use crate::mechanisms::{MechanismKind, MechanismState, ResolvedParams};
use crate::model::{ReportVector, SlotBatch, WorkerBelief};
use crate::workers::{gen_beliefs, make_report, ResponseModel, StrategyKind};

pub use config::{ArrivalSpec, ArrivalWeight, FeedbackMode, ScenarioConfig};

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Labels,
    Selection,
    Flips,
    /// Per-worker belief noise.
    Noise(usize),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Labels => 1,
            Stream::Selection => 2,
            Stream::Flips => 3,
            Stream::Noise(i) => 1000 + i as u64,
        }
    }
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// Flips each label independently with probability `ε`.
pub fn flip_labels<R: Rng + ?Sized>(labels: &[bool], epsilon: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..0.5).contains(&epsilon) {
        return Err(invalid(format!("flip rate {epsilon} must lie in [0, 1/2)")));
    }
    Ok(labels.iter().map(|p| p ^ rng.gen_bool(epsilon)).collect())
}

/// What happened in one slot. Weights and chosen probabilities are those in
/// force during the slot, i.e. before its update. Inactive workers carry
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub weights: Vec<Option<f64>>,
    pub theta: Vec<f64>,
    pub selected: Option<usize>,
    /// True loss of each worker's belief against the true labels.
    pub worker_losses: Vec<Option<f64>>,
    /// Platform loss against the verified labels; expected over the
    /// selection in limited feedback.
    pub platform_loss: f64,
    /// Limited feedback: loss of the report actually received.
    pub realized_loss: Option<f64>,
    pub cum_regret: f64,
    pub avg_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub workers: usize,
    pub params: Option<ResolvedParams>,
    pub clamp_events: usize,
    /// Not serialised, so output files stay byte-stable.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub records: Vec<SlotRecord>,
    pub ledger: RegretLedger,
    pub final_weights: Vec<f64>,
    pub metadata: RunMetadata,
}

impl Trajectory {
    /// Weight of `worker` during slot `slot` (1-based).
    pub fn weight(&self, slot: usize, worker: usize) -> Option<f64> {
        self.records.get(slot.checked_sub(1)?)?.weights.get(worker).copied().flatten()
    }

    /// Chosen probabilities after the final update.
    pub fn final_theta(&self) -> Vec<f64> {
        let total: f64 = self.final_weights.iter().sum();
        self.final_weights.iter().map(|w| w / total).collect()
    }
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Trajectory> {
    let started = Instant::now();
    config.validate()?;
    let n = config.total_workers();
    let mut meta = RunMetadata {
        seed: config.seed,
        mechanism: config.mechanism,
        workers: n,
        params: None,
        clamp_events: 0,
        wall_time: Duration::ZERO,
    };
    if config.horizon == 0 {
        meta.wall_time = started.elapsed();
        return Ok(Trajectory {
            records: Vec::new(),
            ledger: RegretLedger::new(n),
            final_weights: vec![1.0; n],
            metadata: meta,
        });
    }

    let params = config.resolve_params()?;
    meta.params = Some(params);
    let mut mech = MechanismState::new(config.mechanism, n, params)?;
    let mut ledger = RegretLedger::new(n);
    let mut labels_rng = stream_rng(config.seed, Stream::Labels);
    let mut select_rng = stream_rng(config.seed, Stream::Selection);
    let mut flip_rng = stream_rng(config.seed, Stream::Flips);
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..n).map(|i| stream_rng(config.seed, Stream::Noise(i))).collect();
    let bands = config.all_bands();
    let strategies = config.all_strategies();
    let limited = config.feedback == FeedbackMode::Limited;
    let m = config.prompts;
    let mut records = Vec::with_capacity(config.horizon);

    for t in 1..=config.horizon {
        let active: Vec<bool> = (0..n).map(|i| config.is_active(i, t)).collect();
        if let Some(arrival) = &config.arrival {
            if arrival.start_slot == t {
                let w = match arrival.weight {
                    ArrivalWeight::Absolute(w) => w,
                    ArrivalWeight::Ratio { incumbent, ratio } => mech.weights()[incumbent] / ratio,
                };
                mech.set_weight(config.workers, w)?;
            }
        }

        let labels: Vec<bool> = (0..m).map(|_| labels_rng.gen_bool(0.5)).collect();
        let beliefs: Vec<Option<WorkerBelief>> =
            (0..n).map(|i| active[i].then(|| gen_beliefs(&bands[i], &labels, &mut noise_rngs[i]))).collect();
        let selected = mech.prepare(&active, &mut select_rng);
        let reports = beliefs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b.as_ref()
                    .map(|b| {
                        let model = match strategies[i].kind {
                            StrategyKind::GridBestResponse(_) => ResponseModel::from_state(&mech, i, &active),
                            _ => None,
                        };
                        make_report(&strategies[i], b, t, model.as_ref())
                    })
                    .transpose()
            })
            .collect::<Result<Vec<Option<ReportVector>>>>()?;
        let verified = flip_labels(&labels, config.flip_epsilon, &mut flip_rng)?;
        let batch = SlotBatch {
            slot_index: t,
            prompt_count: m,
            reports,
            beliefs,
            true_labels: labels,
            verified_labels: verified,
            selected_worker: if limited { selected } else { None },
        };

        let weights_now = mech.weights().to_vec();
        let theta = mech.selection_distribution(&active);
        let (platform_loss, realized_loss) = if limited {
            let (e, r) = ledger.record_limited(&batch, &theta)?;
            (e, Some(r))
        } else {
            let output = mech.aggregation_override(&batch)?;
            (ledger.record_full(&batch, &mech.weight_vector()?, output.as_deref())?, None)
        };
        mech.update(&batch)?;

        let (cum_regret, avg_regret) = ledger.regret()?;
        let worker_losses = batch
            .beliefs
            .iter()
            .map(|b| b.as_ref().map(|b| crate::aggregation::slot_loss(b.values(), &batch.true_labels)).transpose())
            .collect::<Result<Vec<_>>>()?;
        records.push(SlotRecord {
            slot: t,
            weights: weights_now.iter().zip(&active).map(|(w, a)| a.then_some(*w)).collect(),
            theta,
            selected: batch.selected_worker,
            worker_losses,
            platform_loss,
            realized_loss,
            cum_regret,
            avg_regret,
        });
    }

    meta.clamp_events = mech.clamp_events;
    meta.wall_time = started.elapsed();
    Ok(Trajectory { records, ledger, final_weights: mech.weights().to_vec(), metadata: meta })
}

/// First slot `s ≥ t₀` in which `new` holds at least the weight of
/// `incumbent` (ties count), or `None` if that never happens.
pub fn catchup_time(trajectory: &Trajectory, new: usize, incumbent: usize) -> Option<usize> {
    trajectory.records.iter().find_map(|r| {
        let (Some(a), Some(b)) = (*r.weights.get(new)?, *r.weights.get(incumbent)?) else {
            return None;
        };
        (a >= b).then_some(r.slot)
    })
}
