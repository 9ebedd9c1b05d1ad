//! Worker beliefs, reporting strategies and best-response oracles.

mod response;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{ReportVector, WorkerBelief};

pub use response::{
    expected_next_weight_mc, expected_next_weight_oms, expected_next_weight_owa, flipped_belief, grid_best_response,
    grid_best_response_under_flips, BestResponse, McEstimate, McSetup, ResponseModel,
};

/// Range `[low, high]` of a worker's per-prompt noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBand {
    pub low: f64,
    pub high: f64,
}

impl NoiseBand {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(0.0 <= low && low <= high && high <= 1.0) {
            return Err(invalid(format!("noise band [{low}, {high}] must satisfy 0 <= low <= high <= 1")));
        }
        Ok(Self { low, high })
    }

    /// `E[ε²]` for `ε ~ U[low, high]`.
    pub fn mean_square(&self) -> f64 {
        let (a, b) = (self.low, self.high);
        if b == a {
            a * a
        } else {
            (b.powi(3) - a.powi(3)) / (3.0 * (b - a))
        }
    }

    /// The default population: worker 1 is nearly perfect with `[0, 0.1]`,
    /// the rest have width-0.1 bands centred on a grid from 0.5 to 0.8.
    /// For five workers this is `[0,.1] [.45,.55] [.55,.65] [.65,.75] [.75,.85]`.
    pub fn preset(workers: usize) -> Vec<NoiseBand> {
        let mut bands = Vec::with_capacity(workers);
        if workers == 0 {
            return bands;
        }
        bands.push(NoiseBand { low: 0.0, high: 0.1 });
        let rest = workers - 1;
        for k in 0..rest {
            let centre = if rest == 1 { 0.5 } else { 0.5 + 0.3 * k as f64 / (rest - 1) as f64 };
            bands.push(NoiseBand { low: centre - 0.05, high: centre + 0.05 });
        }
        bands
    }
}

/// Draws one noise level per prompt and pushes the belief toward the wrong
/// label: `P = p(1 − ε) + (1 − p)ε`, so the squared loss is `ε²`.
pub fn gen_beliefs<R: Rng + ?Sized>(band: &NoiseBand, labels: &[bool], rng: &mut R) -> WorkerBelief {
    gen_beliefs_with_noise(band, labels, rng).0
}

/// [`gen_beliefs`] that also returns the drawn noise levels.
pub fn gen_beliefs_with_noise<R: Rng + ?Sized>(
    band: &NoiseBand,
    labels: &[bool],
    rng: &mut R,
) -> (WorkerBelief, Vec<f64>) {
    let noise: Vec<f64> = labels.iter().map(|_| band.low + (band.high - band.low) * rng.gen::<f64>()).collect();
    let values = labels.iter().zip(&noise).map(|(p, e)| if *p { 1.0 - e } else { *e }).collect();
    (WorkerBelief::new(values).expect("noise in [0, 1] keeps beliefs in [0, 1]"), noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StrategyKind {
    Truthful,
    ConstantShift(f64),
    AlwaysHigh,
    AlwaysLow,
    GridBestResponse(f64),
}

/// A reporting rule and the first slot it applies from; earlier slots are
/// reported truthfully.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub applies_from_slot: usize,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self::truthful()
    }
}

impl StrategySpec {
    pub fn truthful() -> Self {
        Self { kind: StrategyKind::Truthful, applies_from_slot: 1 }
    }

    pub fn new(kind: StrategyKind, applies_from_slot: usize) -> Result<Self> {
        let spec = Self { kind, applies_from_slot };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.applies_from_slot == 0 {
            return Err(invalid("strategy start slot must be >= 1"));
        }
        match self.kind {
            StrategyKind::ConstantShift(d) if !d.is_finite() => Err(invalid("shift must be finite")),
            StrategyKind::GridBestResponse(step) => check_grid_step(step),
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_grid_step(step: f64) -> Result<()> {
    let cells = 1.0 / step;
    if !(step > 0.0 && step <= 1.0) || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
        return Err(invalid(format!("grid step {step} must divide 1 evenly")));
    }
    Ok(())
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            StrategyKind::Truthful => write!(f, "truthful")?,
            StrategyKind::ConstantShift(d) => write!(f, "shift:{d}")?,
            StrategyKind::AlwaysHigh => write!(f, "always_high")?,
            StrategyKind::AlwaysLow => write!(f, "always_low")?,
            StrategyKind::GridBestResponse(s) => write!(f, "best_response:{s}")?,
        }
        if self.applies_from_slot != 1 {
            write!(f, "@{}", self.applies_from_slot)?;
        }
        Ok(())
    }
}

/// `truthful`, `shift:<delta>`, `always_high`, `always_low`,
/// `best_response[:<step>]`, each optionally suffixed `@<slot>`.
impl FromStr for StrategySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, from) = match s.split_once('@') {
            Some((b, t)) => {
                (b, t.trim().parse::<usize>().map_err(|_| invalid(format!("bad strategy start slot in '{s}'")))?)
            }
            None => (s, 1),
        };
        let (name, arg) = match body.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (body.trim(), None),
        };
        let number = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| invalid(format!("strategy '{name}' needs a value")))?
                .parse::<f64>()
                .map_err(|_| invalid(format!("bad number in strategy '{s}'")))
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "truthful" => StrategyKind::Truthful,
            "shift" => StrategyKind::ConstantShift(number(arg)?),
            "always_high" => StrategyKind::AlwaysHigh,
            "always_low" => StrategyKind::AlwaysLow,
            "best_response" => StrategyKind::GridBestResponse(if arg.is_some() { number(arg)? } else { 0.01 }),
            _ => return Err(invalid(format!("unknown strategy '{name}'"))),
        };
        Self::new(kind, from)
    }
}

/// Turns a belief into the report sent in `slot`. `model` describes the
/// worker's one-step payoff under the running mechanism and is only used by
/// the best-response strategy; without one the worker reports truthfully.
pub fn make_report(
    strategy: &StrategySpec,
    belief: &WorkerBelief,
    slot: usize,
    model: Option<&ResponseModel>,
) -> Result<ReportVector> {
    if slot < strategy.applies_from_slot {
        return Ok(ReportVector::from(belief));
    }
    let values: Vec<f64> = match strategy.kind {
        StrategyKind::Truthful => belief.values().to_vec(),
        StrategyKind::ConstantShift(d) => belief.values().iter().map(|q| (q + d).clamp(0.0, 1.0)).collect(),
        StrategyKind::AlwaysHigh => vec![1.0; belief.len()],
        StrategyKind::AlwaysLow => vec![0.0; belief.len()],
        StrategyKind::GridBestResponse(step) => match model {
            Some(m) => belief
                .values()
                .iter()
                .map(|q| grid_best_response(m, *q, step).map(|b| b.report))
                .collect::<Result<_>>()?,
            None => belief.values().to_vec(),
        },
    };
    ReportVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn preset_matches_reference_population() {
        let b = NoiseBand::preset(5);
        let want = [(0.0, 0.1), (0.45, 0.55), (0.55, 0.65), (0.65, 0.75), (0.75, 0.85)];
        for (band, (lo, hi)) in b.iter().zip(want) {
            assert_abs_diff_eq!(band.low, lo, epsilon = 1e-12);
            assert_abs_diff_eq!(band.high, hi, epsilon = 1e-12);
        }
        assert_eq!(NoiseBand::preset(50).len(), 50);
        assert!(NoiseBand::new(0.5, 0.4).is_err());
    }

    #[test]
    fn belief_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let perfect = gen_beliefs(&NoiseBand::new(0.0, 0.0).unwrap(), &[true, false], &mut rng);
        assert_eq!(perfect.values(), &[1.0, 0.0]);
        let fixed = gen_beliefs(&NoiseBand::new(0.05, 0.05).unwrap(), &[true], &mut rng);
        assert_abs_diff_eq!(fixed.values()[0], 0.95, epsilon = 1e-15);
        let loss = crate::aggregation::slot_loss(fixed.values(), &[true]).unwrap();
        assert_abs_diff_eq!(loss, 0.0025, epsilon = 1e-12);
    }

    #[test]
    fn belief_noise_moment() {
        let band = NoiseBand::new(0.75, 0.85).unwrap();
        // (b³ − a³) / (3(b − a))
        let oracle = (0.85f64.powi(3) - 0.75f64.powi(3)) / (3.0 * 0.1);
        assert_abs_diff_eq!(oracle, 0.640833, epsilon = 1e-6);
        assert_abs_diff_eq!(band.mean_square(), oracle, epsilon = 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let labels: Vec<bool> = (0..10_000).map(|j| j % 2 == 0).collect();
        let (belief, noise) = gen_beliefs_with_noise(&band, &labels, &mut rng);
        let loss = crate::aggregation::slot_loss(belief.values(), &labels).unwrap();
        assert!((loss - oracle).abs() < 0.01);
        assert!((0.5625..=0.7225).contains(&loss));
        for ((q, p), e) in belief.values().iter().zip(&labels).zip(&noise) {
            let l = (q - if *p { 1.0 } else { 0.0 }).powi(2);
            assert_abs_diff_eq!(l, e * e, epsilon = 1e-15);
        }
    }

    #[test]
    fn strategy_examples() {
        let belief = WorkerBelief::new(vec![0.6]).unwrap();
        let run = |s: &str| make_report(&s.parse().unwrap(), &belief, 1, None).unwrap().values().to_vec();
        assert_eq!(run("truthful"), vec![0.6]);
        assert_eq!(run("always_high"), vec![1.0]);
        assert_eq!(run("always_low"), vec![0.0]);
        let b7 = WorkerBelief::new(vec![0.7]).unwrap();
        let shifted = make_report(&"shift:0.5".parse().unwrap(), &b7, 1, None).unwrap();
        assert_eq!(shifted.values(), &[1.0]);
        let owa = ResponseModel::Owa { weight: 1.0, alpha: 0.1 };
        let br = make_report(&"best_response:0.01".parse().unwrap(), &belief, 1, Some(&owa)).unwrap();
        assert_abs_diff_eq!(br.values()[0], 0.6, epsilon = 1e-12);
        let late: StrategySpec = "always_high@3".parse().unwrap();
        assert_eq!(make_report(&late, &belief, 2, None).unwrap().values(), &[0.6]);
        assert_eq!(make_report(&late, &belief, 3, None).unwrap().values(), &[1.0]);
    }

    #[test]
    fn strategy_parse_round_trip() {
        for s in ["truthful", "shift:-0.2", "always_high@5", "always_low", "best_response:0.001"] {
            let spec: StrategySpec = s.parse().unwrap();
            assert_eq!(spec.to_string().parse::<StrategySpec>().unwrap(), spec);
        }
        assert!("best_response:0.03".parse::<StrategySpec>().is_err());
        assert!("wobbly".parse::<StrategySpec>().is_err());
        assert!("truthful@0".parse::<StrategySpec>().is_err());
    }
}
