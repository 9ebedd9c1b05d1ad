//! Horizon-tuned step sizes and the matching regret / catch-up bounds.

use crate::error::{invalid, Error, Result};

/// Full-feedback step size `(2/3)·sqrt(2 ln N / T)`.
///
/// The regret guarantee needs `α < 1/2`, which fails for short horizons.
pub fn owa_alpha(workers: usize, horizon: usize) -> Result<f64> {
    if workers < 2 || horizon == 0 {
        return Err(invalid(format!("need N >= 2 and T >= 1, got N = {workers}, T = {horizon}")));
    }
    let ln_n = (workers as f64).ln();
    let alpha = owa_alpha_from_log(ln_n, horizon);
    if alpha >= 0.5 {
        // α < 1/2  <=>  T > 32 ln N / 9
        let min_horizon = (32.0 * ln_n / 9.0).floor() as usize + 1;
        return Err(Error::InvalidHorizon { workers, horizon, min_horizon });
    }
    Ok(alpha)
}

/// Same formula with `ln N` supplied directly.
pub fn owa_alpha_from_log(ln_workers: f64, horizon: usize) -> f64 {
    2.0 / 3.0 * (2.0 * ln_workers / horizon as f64).sqrt()
}

/// Limited-feedback step sizes `(α, β)` with `α = sqrt(ln N / (7 N T))` and
/// `β = 2 α N`. Rejects horizons where `β > 1/2`.
pub fn oms_params(workers: usize, horizon: usize) -> Result<(f64, f64)> {
    if workers < 2 || horizon == 0 {
        return Err(invalid(format!("need N >= 2 and T >= 1, got N = {workers}, T = {horizon}")));
    }
    let n = workers as f64;
    let t = horizon as f64;
    let ln_n = n.ln();
    let alpha = (ln_n / (7.0 * n * t)).sqrt();
    let beta = 2.0 * (n * ln_n / (7.0 * t)).sqrt();
    debug_assert!((beta - 2.0 * alpha * n).abs() <= 1e-12);
    if beta > 0.5 {
        // β <= 1/2  <=>  T >= 16 N ln N / 7
        let min_horizon = (16.0 * n * ln_n / 7.0).ceil() as usize;
        return Err(Error::InvalidHorizon { workers, horizon, min_horizon });
    }
    Ok((alpha, beta))
}

/// `3·sqrt(T ln N / 2)`.
pub fn owa_regret_bound(workers: usize, horizon: usize) -> f64 {
    3.0 * (horizon as f64 * (workers as f64).ln() / 2.0).sqrt()
}

/// `2·sqrt(7)·sqrt(N T ln N)`.
pub fn oms_regret_bound(workers: usize, horizon: usize) -> f64 {
    let n = workers as f64;
    2.0 * 7f64.sqrt() * (n * horizon as f64 * n.ln()).sqrt()
}

/// Slots an entrant needs to overtake an incumbent holding `weight_ratio`
/// times its weight, given per-slot expected-loss gap `gap`:
/// `ceil(ln(ratio) / (α Δ))`. `None` when the gap is not positive.
pub fn catchup_bound(weight_ratio: f64, alpha: f64, gap: f64) -> Option<usize> {
    if !(gap > 0.0) || !(alpha > 0.0) || !(weight_ratio > 0.0) {
        return None;
    }
    let raw = weight_ratio.ln() / (alpha * gap);
    Some(raw.max(0.0).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn owa_alpha_values() {
        // independent evaluation
        let want = |n: f64, t: f64| (2.0f64 / 3.0) * (2.0 * n.ln() / t).sqrt();
        assert_abs_diff_eq!(owa_alpha(50, 500).unwrap(), want(50.0, 500.0), epsilon = 1e-15);
        assert_abs_diff_eq!(owa_alpha(50, 500).unwrap(), 0.083395, epsilon = 5e-7);
        assert_abs_diff_eq!(owa_alpha(5, 500).unwrap(), 0.0534904, epsilon = 1e-7);
        assert_abs_diff_eq!(owa_alpha_from_log(1.0, 8), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn owa_alpha_rejects_short_horizon() {
        match owa_alpha(50, 10) {
            Err(Error::InvalidHorizon { min_horizon, .. }) => {
                assert!(owa_alpha(50, min_horizon).is_ok());
                assert!(owa_alpha(50, min_horizon - 1).is_err());
            }
            other => panic!("expected InvalidHorizon, got {other:?}"),
        }
    }

    #[test]
    fn oms_values() {
        let (a, b) = oms_params(5, 2500).unwrap();
        assert_abs_diff_eq!(a, 0.0042888, epsilon = 1e-7);
        assert_abs_diff_eq!(b, 0.042888, epsilon = 1e-6);
        assert_abs_diff_eq!(b, 2.0 * a * 5.0, epsilon = 1e-12);

        let (a, b) = oms_params(50, 100_000).unwrap();
        let want = (50f64.ln() / (7.0 * 50.0 * 1e5)).sqrt();
        assert_abs_diff_eq!(a, want, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 3.3432e-4, epsilon = 1e-7);
        assert_abs_diff_eq!(b, 100.0 * a, epsilon = 1e-12);
    }

    #[test]
    fn oms_rejects_below_threshold() {
        // 16·2·ln2/7 ≈ 3.17 -> smallest valid T is 4
        assert!(matches!(oms_params(2, 3), Err(Error::InvalidHorizon { min_horizon: 4, .. })));
        let (_, b) = oms_params(2, 4).unwrap();
        assert!(b <= 0.5);
    }

    #[test]
    fn bounds() {
        assert_abs_diff_eq!(owa_regret_bound(50, 500), 93.82, epsilon = 0.01);
        assert_abs_diff_eq!(
            oms_regret_bound(5, 2500),
            2.0 * 7f64.sqrt() * (5.0 * 2500.0 * 5f64.ln()).sqrt(),
            epsilon = 1e-9
        );
        assert_eq!(catchup_bound(4.0, 0.083395, 0.3), Some(56));
        assert_eq!(catchup_bound(4.0, 0.083395, 0.6375), Some(27));
        assert_eq!(catchup_bound(1.0, 0.083395, 0.3), Some(0));
        assert_eq!(catchup_bound(4.0, 0.083395, 0.0), None);
    }
}
