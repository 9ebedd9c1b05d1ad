//! Five workers of decreasing accuracy under full feedback. The accurate
//! worker ends up with almost all of the aggregation weight.

use aggrsim::mechanisms::MechanismKind;
use aggrsim::sim::{run_scenario, ScenarioConfig};

fn main() -> aggrsim::error::Result<()> {
    let cfg = ScenarioConfig::preset(MechanismKind::Owa, 5, 500, 20, 1);
    let traj = run_scenario(&cfg)?;
    println!("alpha = {:.6}", traj.metadata.params.and_then(|p| p.alpha).unwrap_or(f64::NAN));
    for t in [1, 50, 100, 250, 500] {
        let theta = &traj.records[t - 1].theta;
        let cells: Vec<String> = theta.iter().map(|x| format!("{x:.3}")).collect();
        println!("slot {t:>3}: theta = [{}]", cells.join(", "));
    }
    let (r, avg) = traj.ledger.regret()?;
    println!("R(T) = {r:.3}, R(T)/T = {avg:.4}");
    Ok(())
}
