//! Config parsing and the `run`, `verify` and `sweep` commands.
//!
//! Every artifact is written to a temporary file in the output directory and
//! renamed into place, so a failed command never leaves a half-written file.
//! Numbers are rounded to 9 significant digits before they are printed.

mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::analysis::{
    avg_regret_trend_check, best_response_shift_check, chosen_probability_check, em_lie_gain_check, hedge_sign_check,
    linear_regret_contrast, linear_regret_witness, mean, regret_bound_check, regret_slope_check, responsiveness_check,
    responsiveness_reference, robustness_sweep, seed_list, trajectory_metrics, truthfulness_suite,
    untruthfulness_witness, ChosenProbabilityRule, VerdictReport, TRUTHFUL_GRID_STEP,
};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::MechanismKind;
use crate::sim::{run_scenario, ScenarioConfig, Trajectory};

pub use config::{apply_seed_override, parse_config, SEED_ENV};

/// Process exit status for an error: 2 for usage and config problems, 1
/// otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::ConfigInvalid(_) | Error::InvalidArgument(_) | Error::InvalidHorizon { .. } => 2,
        _ => 1,
    }
}

/// Reads a config file and applies the [`SEED_ENV`] override.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    apply_seed_override(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Rounds to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// CSV cell for a number: 9 significant digits, empty for a missing value.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{:?}", round9(v)),
    }
}

fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n.as_f64().map_or(Value::Null, |x| serde_json::json!(round9(x))),
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| Error::Io(e.to_string()))?;
    Ok(target)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
    let mut out = serde_json::to_vec_pretty(&round_json(v)).map_err(|e| Error::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))
}

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["slot", "worker", "weight", "theta", "slot_loss", "selected", "platform_slot_loss", "cum_regret", "avg_regret"];

/// trajectory.csv contents.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let rows = trajectory_metrics(traj).into_iter().map(|r| {
        vec![
            r.slot.to_string(),
            r.worker.to_string(),
            fmt_num(r.weight),
            fmt_num(Some(r.theta)),
            fmt_num(r.slot_loss),
            u8::from(r.selected).to_string(),
            fmt_num(Some(r.platform_slot_loss)),
            fmt_num(Some(r.cum_regret)),
            fmt_num(Some(r.avg_regret)),
        ]
    });
    csv_bytes(&TRAJECTORY_HEADER, rows)
}

/// What summary.json holds.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub params: Option<crate::mechanisms::ResolvedParams>,
    pub regret: f64,
    pub avg_regret: f64,
    pub platform_loss: f64,
    pub realized_platform_loss: Option<f64>,
    pub best_worker: Option<usize>,
    pub final_weights: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub worker_total_loss: Vec<f64>,
    pub clamp_events: usize,
    pub config: ScenarioConfig,
}

impl RunSummary {
    pub fn new(config: &ScenarioConfig, traj: &Trajectory) -> Result<Self> {
        let (regret, avg_regret) = if traj.records.is_empty() { (0.0, 0.0) } else { traj.ledger.regret()? };
        Ok(Self {
            seed: traj.metadata.seed,
            mechanism: traj.metadata.mechanism,
            params: traj.metadata.params,
            regret,
            avg_regret,
            platform_loss: traj.ledger.cumulative_platform_loss,
            realized_platform_loss: config.mechanism.is_limited().then_some(traj.ledger.realized_platform_loss),
            best_worker: traj.ledger.best_worker_loss().map(|(i, _)| i + 1),
            final_weights: traj.final_weights.clone(),
            final_theta: traj.final_theta(),
            worker_total_loss: traj.ledger.per_worker_true_loss.clone(),
            clamp_events: traj.metadata.clamp_events,
            config: config.clone(),
        })
    }
}

/// Runs one scenario and writes trajectory.csv and summary.json to `out`.
pub fn cmd_run(config: &ScenarioConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    config.resolve_params()?;
    let traj = run_scenario(config)?;
    let summary = RunSummary::new(config, &traj)?;
    let csv = trajectory_csv(&traj)?;
    let json = json_bytes(&summary)?;
    prepare_dir(out)?;
    write_atomic(out, "trajectory.csv", &csv)?;
    write_atomic(out, "summary.json", &json)?;
    Ok(summary)
}

/// Verifier suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Truthfulness,
    Regret,
    LinearWitness,
    Responsiveness,
    Robustness,
    All,
}

impl Suite {
    const NAMES: [(&'static str, Suite); 6] = [
        ("truthfulness", Suite::Truthfulness),
        ("regret", Suite::Regret),
        ("linear-witness", Suite::LinearWitness),
        ("responsiveness", Suite::Responsiveness),
        ("robustness", Suite::Robustness),
        ("all", Suite::All),
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(_, s)| s == self).map_or("?", |(n, _)| n);
        f.write_str(name)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES.iter().find(|(n, _)| *n == s.trim().to_ascii_lowercase()).map(|(_, k)| *k).ok_or_else(|| {
            let names: Vec<&str> = Self::NAMES.iter().map(|(n, _)| *n).collect();
            invalid(format!("unknown suite '{s}', expected one of {}", names.join(", ")))
        })
    }
}

/// Beliefs `0.05, 0.10, ..., 0.95`.
pub fn belief_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

fn truthfulness_checks() -> Result<Vec<VerdictReport>> {
    let mut out = Vec::new();
    for kind in [MechanismKind::Owa, MechanismKind::Oms, MechanismKind::Hedge, MechanismKind::Em, MechanismKind::Exp3] {
        out.push(truthfulness_suite(kind, &belief_grid(), TRUTHFUL_GRID_STEP)?);
    }
    out.push(hedge_sign_check(1.0, &belief_grid()));
    out.push(untruthfulness_witness(MechanismKind::Hedge, 0.7, TRUTHFUL_GRID_STEP)?.0);
    out.push(untruthfulness_witness(MechanismKind::Em, 0.7, TRUTHFUL_GRID_STEP)?.0);
    out.push(em_lie_gain_check(0.7, 0.0655, 0.1, 200_000, 1)?);
    Ok(out)
}

fn regret_checks(seeds: &[u64]) -> Result<Vec<VerdictReport>> {
    let min_seeds = (28 * seeds.len()).div_ceil(30);
    Ok(vec![
        regret_bound_check(MechanismKind::Owa, 50, 500, seeds)?,
        regret_slope_check(MechanismKind::Owa, 50, &[125, 250, 500, 1000, 2000], seeds)?,
        regret_bound_check(MechanismKind::Oms, 5, 2500, seeds)?,
        avg_regret_trend_check(MechanismKind::Oms, 5, &[625, 1250, 2500], seeds)?,
        chosen_probability_check(
            MechanismKind::Owa,
            5,
            500,
            seeds,
            ChosenProbabilityRule::SeedsAbove { threshold: 0.85, min_seeds },
        )?,
        chosen_probability_check(MechanismKind::Oms, 5, 2500, seeds, ChosenProbabilityRule::MeanAtLeast(0.70))?,
    ])
}

fn linear_witness_checks(seeds: &[u64]) -> Result<Vec<VerdictReport>> {
    let horizons = [500, 1000, 2000];
    Ok(vec![
        linear_regret_witness(MechanismKind::Median, &horizons, seeds)?,
        linear_regret_witness(MechanismKind::Em, &horizons, seeds)?,
        linear_regret_contrast(500, seeds)?,
    ])
}

fn robustness_checks(seeds: &[u64]) -> Result<Vec<VerdictReport>> {
    let base = ScenarioConfig::preset(MechanismKind::Owa, 5, 500, 20, 0);
    let mut out = robustness_sweep(&[0.05, 0.1], &base, seeds)?;
    for eps in [0.05, 0.1] {
        out.push(best_response_shift_check(eps, &belief_grid(), TRUTHFUL_GRID_STEP)?);
    }
    Ok(out)
}

/// Runs the checks of `suite` on seeds `1..=seeds`.
pub fn suite_checks(suite: Suite, seeds: usize) -> Result<Vec<VerdictReport>> {
    let list = seed_list(seeds);
    Ok(match suite {
        Suite::Truthfulness => truthfulness_checks()?,
        Suite::Regret => regret_checks(&list)?,
        Suite::LinearWitness => linear_witness_checks(&list)?,
        Suite::Responsiveness => vec![responsiveness_check(&responsiveness_reference(0)?, &list)?],
        Suite::Robustness => robustness_checks(&list)?,
        Suite::All => {
            let mut all = Vec::new();
            for s in
                [Suite::Truthfulness, Suite::Regret, Suite::LinearWitness, Suite::Responsiveness, Suite::Robustness]
            {
                all.extend(suite_checks(s, seeds)?);
            }
            all
        }
    })
}

pub const VERDICT_HEADER: [&str; 7] =
    ["check_name", "passed", "observed", "bound_or_expected", "tolerance", "seeds_used", "notes"];

pub fn verdicts_csv(verdicts: &[VerdictReport]) -> Result<Vec<u8>> {
    let rows = verdicts.iter().map(|v| {
        vec![
            v.check_name.clone(),
            v.passed.to_string(),
            fmt_num(Some(v.observed)),
            fmt_num(Some(v.bound_or_expected)),
            fmt_num(Some(v.tolerance)),
            v.seeds_used.to_string(),
            v.notes.clone(),
        ]
    });
    csv_bytes(&VERDICT_HEADER, rows)
}

/// Runs a verifier suite and writes verdicts.csv to `out`.
pub fn cmd_verify(suite: Suite, seeds: usize, out: &Path) -> Result<Vec<VerdictReport>> {
    if seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    let verdicts = suite_checks(suite, seeds)?;
    let csv = verdicts_csv(&verdicts)?;
    prepare_dir(out)?;
    write_atomic(out, "verdicts.csv", &csv)?;
    Ok(verdicts)
}

/// Parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisParam {
    Horizon,
    Workers,
    Epsilon,
    Mechanism,
}

/// A swept parameter and its values, written `name=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: AxisParam,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Name as it appears in the output.
    pub fn name(&self) -> &'static str {
        match self.param {
            AxisParam::Horizon => "T",
            AxisParam::Workers => "N",
            AxisParam::Epsilon => "epsilon",
            AxisParam::Mechanism => "mechanism",
        }
    }

    /// `template` with the axis set to `value`.
    pub fn apply(&self, template: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let bad = |e: String| invalid(format!("axis {}: '{value}' {e}", self.name()));
        let cfg = match self.param {
            AxisParam::Horizon => {
                ScenarioConfig { horizon: value.parse().map_err(|_| bad("is not a count".into()))?, ..template.clone() }
            }
            AxisParam::Workers => template.with_workers(value.parse().map_err(|_| bad("is not a count".into()))?),
            AxisParam::Epsilon => ScenarioConfig {
                flip_epsilon: value.parse().map_err(|_| bad("is not a number".into()))?,
                ..template.clone()
            },
            AxisParam::Mechanism => template.with_mechanism(value.parse().map_err(|e: Error| bad(e.to_string()))?),
        };
        cfg.validate().map_err(|e| bad(e.to_string()))?;
        cfg.resolve_params().map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, values) = s.split_once('=').ok_or_else(|| invalid(format!("axis '{s}' is not name=v1,v2,...")))?;
        let param = match name.trim() {
            "T" => AxisParam::Horizon,
            "N" => AxisParam::Workers,
            "epsilon" | "flip_epsilon" => AxisParam::Epsilon,
            "mechanism" => AxisParam::Mechanism,
            other => return Err(invalid(format!("unknown axis '{other}', expected T, N, epsilon or mechanism"))),
        };
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(invalid(format!("axis '{name}' has no values")));
        }
        Ok(Self { param, values })
    }
}

/// One run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: String,
    pub seed: u64,
    pub mechanism: MechanismKind,
    pub workers: usize,
    pub horizon: usize,
    pub flip_epsilon: f64,
    pub regret: f64,
    pub avg_regret: f64,
    pub theta_1: f64,
    pub clamp_events: usize,
}

/// Mean over the seeds of one axis value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummaryRow {
    pub value: String,
    pub runs: usize,
    pub mean_regret: f64,
    pub mean_avg_regret: f64,
    pub sd_avg_regret: f64,
    pub mean_theta_1: f64,
}

/// Runs `template` for every axis value and every seed. Seeds are
/// `template.seed, template.seed + 1, ...`.
pub fn sweep_rows(template: &ScenarioConfig, axis: &SweepAxis, seeds: usize) -> Result<Vec<SweepRow>> {
    let configs: Vec<(String, ScenarioConfig)> =
        axis.values.iter().map(|v| Ok((v.clone(), axis.apply(template, v)?))).collect::<Result<_>>()?;
    let jobs: Vec<(&String, ScenarioConfig)> = configs
        .iter()
        .flat_map(|(v, c)| {
            (0..seeds as u64).map(move |i| (v, ScenarioConfig { seed: c.seed.wrapping_add(i), ..c.clone() }))
        })
        .collect();
    jobs.par_iter()
        .map(|(value, cfg)| {
            let traj = run_scenario(cfg)?;
            let (regret, avg_regret) = traj.ledger.regret()?;
            Ok(SweepRow {
                value: value.to_string(),
                seed: cfg.seed,
                mechanism: cfg.mechanism,
                workers: cfg.total_workers(),
                horizon: cfg.horizon,
                flip_epsilon: cfg.flip_epsilon,
                regret,
                avg_regret,
                theta_1: traj.records.last().map_or(f64::NAN, |r| r.theta[0]),
                clamp_events: traj.metadata.clamp_events,
            })
        })
        .collect()
}

/// Groups rows by axis value, in axis order.
pub fn summarize_sweep(axis: &SweepAxis, rows: &[SweepRow]) -> Vec<SweepSummaryRow> {
    axis.values
        .iter()
        .map(|value| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| &r.value == value).collect();
            let pick = |f: fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let avgs = pick(|r| r.avg_regret);
            let m = mean(&avgs);
            let sd = if avgs.len() > 1 {
                (avgs.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (avgs.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            SweepSummaryRow {
                value: value.clone(),
                runs: group.len(),
                mean_regret: mean(&pick(|r| r.regret)),
                mean_avg_regret: m,
                sd_avg_regret: sd,
                mean_theta_1: mean(&pick(|r| r.theta_1)),
            }
        })
        .collect()
}

/// Runs a sweep and writes sweep.csv and sweep_summary.csv to `out`.
pub fn cmd_sweep(
    template: &ScenarioConfig,
    axis: &SweepAxis,
    seeds: usize,
    out: &Path,
) -> Result<Vec<SweepSummaryRow>> {
    if seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    let rows = sweep_rows(template, axis, seeds)?;
    let summary = summarize_sweep(axis, &rows);
    let name = axis.name();
    let detail = csv_bytes(
        &[name, "seed", "mechanism", "N", "T", "flip_epsilon", "regret", "avg_regret", "theta_1", "clamp_events"],
        rows.iter().map(|r| {
            vec![
                r.value.clone(),
                r.seed.to_string(),
                r.mechanism.to_string(),
                r.workers.to_string(),
                r.horizon.to_string(),
                fmt_num(Some(r.flip_epsilon)),
                fmt_num(Some(r.regret)),
                fmt_num(Some(r.avg_regret)),
                fmt_num(Some(r.theta_1)),
                r.clamp_events.to_string(),
            ]
        }),
    )?;
    let means = csv_bytes(
        &[name, "runs", "mean_regret", "mean_avg_regret", "sd_avg_regret", "mean_theta_1"],
        summary.iter().map(|s| {
            vec![
                s.value.clone(),
                s.runs.to_string(),
                fmt_num(Some(s.mean_regret)),
                fmt_num(Some(s.mean_avg_regret)),
                fmt_num(Some(s.sd_avg_regret)),
                fmt_num(Some(s.mean_theta_1)),
            ]
        }),
    )?;
    prepare_dir(out)?;
    write_atomic(out, "sweep.csv", &detail)?;
    write_atomic(out, "sweep_summary.csv", &means)?;
    Ok(summary)
}
