use super::{mean, run_seeds, VerdictReport};
use crate::error::{invalid, Result};
use crate::mechanisms::{catchup_bound, owa_alpha, MechanismKind};
use crate::sim::{catchup_time, ArrivalSpec, ArrivalWeight, ScenarioConfig};
use crate::workers::{flipped_belief, grid_best_response_under_flips, NoiseBand, ResponseModel, StrategySpec};

/// One incumbent with noise `[0.5, 0.6]` and an entrant with `[0, 0.1]`
/// joining at slot 100 with a quarter of the incumbent's weight, under OWA
/// with `α = owa_alpha(50, 500)`. The expected per-slot loss gap is 0.3.
pub fn responsiveness_reference(seed: u64) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::preset(MechanismKind::Owa, 1, 400, 20, seed);
    cfg.params.alpha = Some(owa_alpha(50, 500)?);
    cfg.bands = vec![NoiseBand::new(0.5, 0.6)?];
    cfg.arrival = Some(ArrivalSpec {
        start_slot: 100,
        weight: ArrivalWeight::Ratio { incumbent: 0, ratio: 4.0 },
        band: NoiseBand::new(0.0, 0.1)?,
        strategy: StrategySpec::truthful(),
    });
    Ok(cfg)
}

/// Mean slots until the entrant's weight reaches the incumbent's, against
/// `ceil(ln(ratio) / (α Δ))` with `Δ` the gap in expected squared noise of
/// the two bands. Runs that never catch up count as the remaining horizon
/// plus one.
pub fn responsiveness_check(config: &ScenarioConfig, seeds: &[u64]) -> Result<VerdictReport> {
    let arrival = config.arrival.ok_or_else(|| invalid("responsiveness needs an arrival"))?;
    let ArrivalWeight::Ratio { incumbent, ratio } = arrival.weight else {
        return Err(invalid("responsiveness needs the entrant weight as a ratio to an incumbent"));
    };
    let alpha =
        config.resolve_params()?.alpha.ok_or_else(|| invalid("responsiveness is defined for OWA step sizes"))?;
    let gap = config.bands[incumbent].mean_square() - arrival.band.mean_square();
    let entrant = config.workers;
    let trajs = run_seeds(config, seeds)?;
    let mut missed = 0;
    let times: Vec<f64> = trajs
        .iter()
        .map(|t| match catchup_time(t, entrant, incumbent) {
            Some(s) => (s - arrival.start_slot) as f64,
            None => {
                missed += 1;
                (config.horizon + 1 - arrival.start_slot) as f64
            }
        })
        .collect();
    let name = "responsiveness/owa";
    let observed = mean(&times);
    let Some(bound) = catchup_bound(ratio, alpha, gap) else {
        return Ok(VerdictReport::at_most(name, observed, f64::INFINITY, 0.0, seeds.len())
            .with_notes(format!("non-positive gap {gap}: bound vacuous")));
    };
    Ok(VerdictReport::at_most(name, observed, bound as f64, 0.0, seeds.len())
        .with_notes(format!("alpha={alpha:.6} gap={gap:.6} ratio={ratio} never caught up in {missed} runs"))
        .inconclusive_if_short(seeds.len()))
}

/// Excess time-average regret under verification flips: for each `ε`, mean
/// `R(T)/T` minus the clean mean must stay within `2ε + 0.05`.
pub fn robustness_sweep(epsilons: &[f64], base: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<VerdictReport>> {
    let avg_at = |eps: f64| -> Result<f64> {
        let cfg = ScenarioConfig { flip_epsilon: eps, ..base.clone() };
        let r: Vec<f64> =
            run_seeds(&cfg, seeds)?.iter().map(|t| t.ledger.regret().map(|x| x.1)).collect::<Result<_>>()?;
        Ok(mean(&r))
    };
    let clean = avg_at(0.0)?;
    epsilons
        .iter()
        .map(|&eps| {
            let excess = avg_at(eps)? - clean;
            Ok(VerdictReport::at_most(
                format!("robustness/{}/eps={eps}", base.mechanism),
                excess,
                2.0 * eps + 0.05,
                0.0,
                seeds.len(),
            )
            .with_notes(format!("clean mean R(T)/T = {clean:.9}"))
            .inconclusive_if_short(seeds.len()))
        })
        .collect()
}

/// Under flip rate `ε` the OWA best report on the grid sits at
/// `(1 − 2ε)q + ε` within half a grid step, and so moves at most `ε` from
/// the belief. `observed` is the largest distance from the contracted
/// belief.
pub fn best_response_shift_check(epsilon: f64, beliefs: &[f64], step: f64) -> Result<VerdictReport> {
    let model = ResponseModel::Owa { weight: 1.0, alpha: owa_alpha(5, 500)? };
    let mut worst: f64 = 0.0;
    let mut within_eps = true;
    for &q in beliefs {
        let br = grid_best_response_under_flips(&model, q, epsilon, step)?;
        worst = worst.max((br.report - flipped_belief(q, epsilon)).abs());
        within_eps &= (br.report - q).abs() <= epsilon + step / 2.0 + 1e-12;
    }
    let mut v = VerdictReport::at_most(format!("best-response-shift/eps={epsilon}"), worst, step / 2.0, 1e-12, 0);
    v.passed &= within_eps;
    Ok(v.with_notes(format!("|r* - q| <= eps for all beliefs: {within_eps}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_gap_and_bound() {
        let cfg = responsiveness_reference(1).unwrap();
        let gap = cfg.bands[0].mean_square() - cfg.arrival.unwrap().band.mean_square();
        assert!((gap - 0.3).abs() < 1e-12);
        assert_eq!(catchup_bound(4.0, cfg.params.alpha.unwrap(), gap), Some(56));
    }

    #[test]
    fn shift_matches_contraction() {
        let beliefs: Vec<f64> = (1..=19).map(|k| k as f64 * 0.05).collect();
        for eps in [0.0, 0.05, 0.1] {
            assert!(best_response_shift_check(eps, &beliefs, 0.01).unwrap().passed);
        }
    }
}
