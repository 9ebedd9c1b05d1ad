//! Verified labels are flipped with probability `ε`. Excess regret stays
//! within `2ε` plus slack, and the best report moves toward 1/2 by `ε(1 − 2q)`.

use aggrsim::analysis::{mean, run_seeds, seed_list};
use aggrsim::mechanisms::{owa_alpha, MechanismKind};
use aggrsim::sim::ScenarioConfig;
use aggrsim::workers::{flipped_belief, grid_best_response_under_flips, ResponseModel};

fn main() -> aggrsim::error::Result<()> {
    let base = ScenarioConfig::preset(MechanismKind::Owa, 5, 500, 20, 0);
    for eps in [0.0, 0.05, 0.1, 0.2] {
        let cfg = ScenarioConfig { flip_epsilon: eps, ..base.clone() };
        let avgs: Vec<f64> = run_seeds(&cfg, &seed_list(30))?
            .iter()
            .map(|t| t.ledger.regret().map(|x| x.1))
            .collect::<Result<_, _>>()?;
        println!("eps = {eps:.2}: mean R(T)/T = {:.4}", mean(&avgs));
    }
    let model = ResponseModel::Owa { weight: 1.0, alpha: owa_alpha(5, 500)? };
    for q in [0.1, 0.3, 0.8] {
        let br = grid_best_response_under_flips(&model, q, 0.1, 0.01)?;
        println!("q = {q}: best report {:.2} (contracted belief {:.3})", br.report, flipped_belief(q, 0.1));
    }
    Ok(())
}
