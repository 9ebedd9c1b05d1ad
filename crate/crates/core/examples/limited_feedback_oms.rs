//! One worker is consulted per slot. Selection probabilities never drop
//! below `β/N`, yet drift toward the accurate worker.

use aggrsim::mechanisms::MechanismKind;
use aggrsim::sim::{run_scenario, ScenarioConfig};

fn main() -> aggrsim::error::Result<()> {
    let cfg = ScenarioConfig::preset(MechanismKind::Oms, 5, 2500, 20, 3);
    let traj = run_scenario(&cfg)?;
    let params = traj.metadata.params.expect("resolved");
    let (alpha, beta) = (params.alpha.unwrap_or_default(), params.beta.unwrap_or_default());
    println!("alpha = {alpha:.5}, beta = {beta:.4}, floor beta/N = {:.4}", beta / 5.0);

    let mut picks = [0usize; 5];
    for r in &traj.records {
        if let Some(i) = r.selected {
            picks[i] += 1;
        }
    }
    println!("times selected: {picks:?}");
    let last = &traj.records.last().expect("non-empty").theta;
    println!("final theta: {:?}", last.iter().map(|x| (x * 1e3).round() / 1e3).collect::<Vec<_>>());
    let (r, avg) = traj.ledger.regret()?;
    println!("R(T) = {r:.1}, R(T)/T = {avg:.4}, realized loss = {:.1}", traj.ledger.realized_platform_loss);
    Ok(())
}
