use super::{least_squares_slope, mean, run_seeds, VerdictReport};
use crate::error::{invalid, Result};
use crate::mechanisms::{oms_regret_bound, owa_regret_bound, MechanismKind};
use crate::sim::{ScenarioConfig, Trajectory};
use crate::workers::NoiseBand;

const PROMPTS: usize = 20;

fn regrets(trajs: &[Trajectory]) -> Result<Vec<(f64, f64)>> {
    trajs.iter().map(|t| t.ledger.regret()).collect()
}

fn mean_regret(kind: MechanismKind, workers: usize, horizon: usize, seeds: &[u64]) -> Result<(f64, f64)> {
    let base = ScenarioConfig::preset(kind, workers, horizon, PROMPTS, 0);
    let r = regrets(&run_seeds(&base, seeds)?)?;
    let total: Vec<f64> = r.iter().map(|x| x.0).collect();
    let avg: Vec<f64> = r.iter().map(|x| x.1).collect();
    Ok((mean(&total), mean(&avg)))
}

fn theorem_bound(kind: MechanismKind, workers: usize, horizon: usize) -> Result<f64> {
    match kind {
        MechanismKind::Owa => Ok(owa_regret_bound(workers, horizon)),
        MechanismKind::Oms => Ok(oms_regret_bound(workers, horizon)),
        _ => Err(invalid(format!("{kind} has no regret guarantee to check"))),
    }
}

/// Mean `R(T)` of truthful default-population runs against the guarantee:
/// `3·sqrt(T ln N / 2)` for OWA, `2·sqrt(7)·sqrt(N T ln N)` for OMS.
pub fn regret_bound_check(kind: MechanismKind, workers: usize, horizon: usize, seeds: &[u64]) -> Result<VerdictReport> {
    let bound = theorem_bound(kind, workers, horizon)?;
    let (r, avg) = mean_regret(kind, workers, horizon, seeds)?;
    Ok(VerdictReport::at_most(format!("regret-bound/{kind}/N={workers}/T={horizon}"), r, bound, 0.0, seeds.len())
        .with_notes(format!("mean R(T)/T = {avg:.9}"))
        .inconclusive_if_short(seeds.len()))
}

/// Log-log slope of mean `R(T)` across horizons, expected in `[0.3, 0.7]`.
pub fn regret_slope_check(
    kind: MechanismKind,
    workers: usize,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<VerdictReport> {
    let mut means = Vec::with_capacity(horizons.len());
    for &t in horizons {
        means.push(mean_regret(kind, workers, t, seeds)?.0);
    }
    let name = format!("regret-slope/{kind}/N={workers}");
    let notes = format!("T={horizons:?} mean R(T)={means:?}");
    if means.iter().any(|r| *r <= 0.0) {
        return Ok(VerdictReport::near(name, f64::NAN, 0.5, 0.2, seeds.len())
            .with_notes(format!("non-positive regret, slope undefined; {notes}")));
    }
    let xs: Vec<f64> = horizons.iter().map(|t| (*t as f64).ln()).collect();
    let ys: Vec<f64> = means.iter().map(|r| r.ln()).collect();
    Ok(VerdictReport::near(name, least_squares_slope(&xs, &ys), 0.5, 0.2, seeds.len())
        .with_notes(notes)
        .inconclusive_if_short(seeds.len()))
}

/// Mean `R(T)/T` strictly decreasing across increasing horizons. `observed`
/// is the largest step-to-step change, which must be negative.
pub fn avg_regret_trend_check(
    kind: MechanismKind,
    workers: usize,
    horizons: &[usize],
    seeds: &[u64],
) -> Result<VerdictReport> {
    let mut avgs = Vec::with_capacity(horizons.len());
    for &t in horizons {
        avgs.push(mean_regret(kind, workers, t, seeds)?.1);
    }
    let worst = avgs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let mut v = VerdictReport::at_most(format!("regret-trend/{kind}/N={workers}"), worst, 0.0, 0.0, seeds.len())
        .with_notes(format!("T={horizons:?} mean R(T)/T={avgs:?}"));
    v.passed = worst < 0.0;
    Ok(v.inconclusive_if_short(seeds.len()))
}

/// How the best worker's chosen probability at the final slot is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChosenProbabilityRule {
    /// At least `min_seeds` runs reach `threshold`.
    SeedsAbove { threshold: f64, min_seeds: usize },
    /// The mean over runs reaches `threshold`.
    MeanAtLeast(f64),
}

/// Chosen probability of worker 1 (the accurate one) in the last slot of
/// truthful default-population runs.
pub fn chosen_probability_check(
    kind: MechanismKind,
    workers: usize,
    horizon: usize,
    seeds: &[u64],
    rule: ChosenProbabilityRule,
) -> Result<VerdictReport> {
    let base = ScenarioConfig::preset(kind, workers, horizon, PROMPTS, 0);
    let trajs = run_seeds(&base, seeds)?;
    let thetas: Vec<f64> = trajs
        .iter()
        .map(|t| t.records.last().map(|r| r.theta[0]).ok_or_else(|| invalid("empty run")))
        .collect::<Result<_>>()?;
    let name = format!("chosen-probability/{kind}/N={workers}/T={horizon}");
    let notes = format!("mean {:.6}, min {:.6}", mean(&thetas), thetas.iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(match rule {
        ChosenProbabilityRule::SeedsAbove { threshold, min_seeds } => {
            let hits = thetas.iter().filter(|t| **t >= threshold).count();
            VerdictReport::at_least(name, hits as f64, min_seeds as f64, 0.0, seeds.len())
                .with_notes(format!("runs with theta_1 >= {threshold}; {notes}"))
        }
        ChosenProbabilityRule::MeanAtLeast(threshold) => {
            VerdictReport::at_least(name, mean(&thetas), threshold, 0.0, seeds.len()).with_notes(notes)
        }
    })
}

/// Five workers where worker 1 is perfect. With `Em` the other four always
/// report the wrong label; otherwise they sit at noise `sqrt(1/2)`, so the
/// median always lands on a report with squared error exactly 1/2.
pub fn witness_config(mechanism: MechanismKind, horizon: usize, seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(mechanism, 5, horizon, PROMPTS, seed);
    let other = if mechanism == MechanismKind::Em { 1.0 } else { 0.5f64.sqrt() };
    cfg.bands = vec![NoiseBand { low: 0.0, high: 0.0 }];
    cfg.bands.extend(std::iter::repeat_n(NoiseBand { low: other, high: other }, 4));
    cfg
}

fn witness_avgs(kind: MechanismKind, horizons: &[usize], seeds: &[u64]) -> Result<Vec<f64>> {
    horizons
        .iter()
        .map(|&t| {
            let r = regrets(&run_seeds(&witness_config(kind, t, 0), seeds)?)?;
            Ok(mean(&r.iter().map(|x| x.1).collect::<Vec<_>>()))
        })
        .collect()
}

/// Linear regret of the median and EM benchmarks: `R(T)/T ≥ 0.4` at every
/// horizon and a least-squares slope over horizons of at least `−1e-3`. The
/// median must moreover sit at exactly `1/2`.
pub fn linear_regret_witness(kind: MechanismKind, horizons: &[usize], seeds: &[u64]) -> Result<VerdictReport> {
    if !matches!(kind, MechanismKind::Median | MechanismKind::Em) {
        return Err(invalid(format!("no linear-regret construction for {kind}")));
    }
    let avgs = witness_avgs(kind, horizons, seeds)?;
    let xs: Vec<f64> = horizons.iter().map(|t| *t as f64).collect();
    let slope = least_squares_slope(&xs, &avgs);
    let lowest = avgs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut v = VerdictReport::at_least(format!("linear-witness/{kind}"), lowest, 0.4, 0.0, seeds.len())
        .with_notes(format!("T={horizons:?} R(T)/T={avgs:?} slope={slope:.3e}"));
    v.passed &= slope >= -1e-3;
    if kind == MechanismKind::Median {
        let off = avgs.iter().map(|a| (a - 0.5).abs()).fold(0.0, f64::max);
        v.passed &= off <= 1e-9;
        v.bound_or_expected = 0.5;
        v.tolerance = 1e-9;
        v.observed = avgs.iter().cloned().fold(0.5, |a, b| if (b - 0.5).abs() > (a - 0.5).abs() { b } else { a });
    }
    Ok(v)
}

/// OWA on the median's adversarial population: `R(T)/T < 0.1`.
pub fn linear_regret_contrast(horizon: usize, seeds: &[u64]) -> Result<VerdictReport> {
    let avg = witness_avgs(MechanismKind::Owa, &[horizon], seeds)?[0];
    let mut v = VerdictReport::at_most(format!("linear-witness-contrast/owa/T={horizon}"), avg, 0.1, 0.0, seeds.len());
    v.passed = avg < 0.1;
    Ok(v)
}
