use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::VerdictReport;
use crate::error::{invalid, Result};
use crate::mechanisms::{oms_params, owa_alpha, EmParams, MechanismKind, MechanismState, ParamChoice};
use crate::workers::{expected_next_weight_mc, grid_best_response, BestResponse, McSetup, ResponseModel};

/// Default report grid.
pub const TRUTHFUL_GRID_STEP: f64 = 0.01;
/// Finer grid used to re-check an apparent violation.
const FINE_GRID_STEP: f64 = 0.001;

/// Payoff model each mechanism is checked against: a fresh worker among
/// five, with the horizon-tuned step sizes of the reference runs (OWA at
/// `T = 500`, OMS at `T = 2500`), `η = 1` for Hedge and EXP3, and the EM
/// environment where every other worker votes 1.
pub fn reference_model(kind: MechanismKind) -> Result<ResponseModel> {
    Ok(match kind {
        MechanismKind::Owa => ResponseModel::Owa { weight: 1.0, alpha: owa_alpha(5, 500)? },
        MechanismKind::Oms => {
            let (alpha, beta) = oms_params(5, 2500)?;
            ResponseModel::Oms { gamma: 1.0, alpha, beta, theta: 0.2 }
        }
        MechanismKind::Hedge => ResponseModel::Hedge { weight: 1.0, eta: 1.0 },
        MechanismKind::Exp3 => ResponseModel::Exp3 { weight: 1.0, eta: 1.0, pick: 0.2 },
        MechanismKind::Em => ResponseModel::em_unanimous(EmParams::default(), 5)?,
        MechanismKind::Median => return Err(invalid("the median's weights do not depend on reports")),
    })
}

fn expects_truthful(kind: MechanismKind) -> bool {
    matches!(kind, MechanismKind::Owa | MechanismKind::Oms)
}

fn largest_gain(model: &ResponseModel, beliefs: &[f64], step: f64) -> Result<BestResponse> {
    let mut best: Option<BestResponse> = None;
    for q in beliefs {
        let br = grid_best_response(model, *q, step)?;
        if best.is_none_or(|b| br.gain > b.gain) {
            best = Some(br);
        }
    }
    best.ok_or_else(|| invalid("empty belief grid"))
}

fn triple(br: &BestResponse) -> String {
    format!("q={} r*={} gain={:.9}", br.belief, br.report, br.gain)
}

/// Grid best response over `beliefs`. OWA and OMS pass when no belief gains
/// more than `α·step² + 1e-9` (a failure is re-checked on the 0.001 grid);
/// Hedge, EM and EXP3 pass when some belief gains more than ten times the
/// resolution slack, i.e. untruthfulness is confirmed.
pub fn truthfulness_suite(kind: MechanismKind, beliefs: &[f64], step: f64) -> Result<VerdictReport> {
    let model = reference_model(kind)?;
    let name = format!("truthfulness/{kind}");
    let br = largest_gain(&model, beliefs, step)?;
    if expects_truthful(kind) {
        let slack = model.resolution_slack(step);
        let verdict = VerdictReport::at_most(&name, br.gain, slack, 1e-9, 0);
        if verdict.passed || step <= FINE_GRID_STEP {
            return Ok(verdict.with_notes(format!("truthful; worst {}", triple(&br))));
        }
        let fine = largest_gain(&model, beliefs, FINE_GRID_STEP)?;
        let slack = model.resolution_slack(FINE_GRID_STEP);
        Ok(VerdictReport::at_most(&name, fine.gain, slack, 1e-9, 0)
            .with_notes(format!("re-checked at step {FINE_GRID_STEP}; worst {}", triple(&fine))))
    } else {
        let threshold = 10.0 * model.resolution_slack(step);
        Ok(VerdictReport { passed: br.gain > threshold, ..VerdictReport::at_least(&name, br.gain, threshold, 0.0, 0) }
            .with_notes(format!("untruthful; witness {}", triple(&br))))
    }
}

/// Best response of a single belief `q`, passing when the gain clearly
/// exceeds grid resolution.
pub fn untruthfulness_witness(kind: MechanismKind, belief: f64, step: f64) -> Result<(VerdictReport, BestResponse)> {
    let model = reference_model(kind)?;
    let br = grid_best_response(&model, belief, step)?;
    let threshold = 10.0 * model.resolution_slack(step);
    let verdict = VerdictReport {
        passed: br.gain > threshold,
        ..VerdictReport::at_least(format!("witness/{kind}"), br.gain, threshold, 0.0, 0)
    }
    .with_notes(triple(&br));
    Ok((verdict, br))
}

/// Sign of the Hedge payoff slope at the truthful report equals
/// `sign(q − 1/2)`: extreme beliefs are pushed further out. Central
/// differences with step `1e-5`; slopes within `1e-7` of zero count as
/// unsigned. `observed` is the number of mismatches.
pub fn hedge_sign_check(eta: f64, beliefs: &[f64]) -> VerdictReport {
    let model = ResponseModel::Hedge { weight: 1.0, eta };
    let h = 1e-5;
    let mut mismatches = Vec::new();
    for &q in beliefs {
        if (q - 0.5).abs() < 1e-12 {
            continue;
        }
        let slope = (model.expected(q + h, q) - model.expected(q - h, q)) / (2.0 * h);
        if slope.abs() <= 1e-7 || slope.signum() != (q - 0.5).signum() {
            mismatches.push(q);
        }
    }
    VerdictReport::at_most("truthfulness/hedge-slope-sign", mismatches.len() as f64, 0.0, 0.0, 0).with_notes(
        if mismatches.is_empty() { "slope sign matches q - 1/2".into() } else { format!("mismatch at {mismatches:?}") },
    )
}

/// Simulated EM lie gain: next reliability when always voting 1 minus
/// when voting 1 with probability `q`, with four others voting 1, against
/// `expected` within a relative tolerance.
pub fn em_lie_gain_check(belief: f64, expected: f64, relative: f64, draws: usize, seed: u64) -> Result<VerdictReport> {
    let params = ParamChoice::default().resolve(MechanismKind::Em, 5, 1)?;
    let state = MechanismState::new(MechanismKind::Em, 5, params)?;
    let setup = McSetup { others: 1.0, randomize_report: true };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let high = expected_next_weight_mc(&state, 0, 1.0, belief, &setup, draws, &mut rng)?;
    let honest = expected_next_weight_mc(&state, 0, belief, belief, &setup, draws, &mut rng)?;
    let gain = high.mean - honest.mean;
    let se = (high.stderr.powi(2) + honest.stderr.powi(2)).sqrt();
    Ok(VerdictReport::near("witness/em-simulated", gain, expected, relative * expected.abs(), 0)
        .with_notes(format!("q={belief} r*=1 gain={gain:.9} se={se:.2e} draws={draws}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (1..=19).map(|k| k as f64 * 0.05).collect()
    }

    #[test]
    fn truthful_mechanisms_pass() {
        for k in [MechanismKind::Owa, MechanismKind::Oms] {
            assert!(truthfulness_suite(k, &grid(), TRUTHFUL_GRID_STEP).unwrap().passed);
        }
    }

    #[test]
    fn untruthful_mechanisms_confirmed() {
        for k in [MechanismKind::Hedge, MechanismKind::Em, MechanismKind::Exp3] {
            let v = truthfulness_suite(k, &grid(), TRUTHFUL_GRID_STEP).unwrap();
            assert!(v.passed, "{v:?}");
        }
        assert!(truthfulness_suite(MechanismKind::Median, &grid(), 0.01).is_err());
    }

    #[test]
    fn hedge_witness_location() {
        let (v, br) = untruthfulness_witness(MechanismKind::Hedge, 0.7, 0.01).unwrap();
        assert!(v.passed);
        assert!((br.report - 0.82).abs() < 0.015);
        assert!((0.007..0.0075).contains(&br.gain));
    }

    #[test]
    fn hedge_slope_sign() {
        assert!(hedge_sign_check(1.0, &grid()).passed);
    }
}
