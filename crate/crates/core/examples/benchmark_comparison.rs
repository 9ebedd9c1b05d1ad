//! Time-average regret of every mechanism on the same population as the
//! horizon grows.

use aggrsim::analysis::{mean, run_seeds, seed_list};
use aggrsim::mechanisms::MechanismKind;
use aggrsim::sim::ScenarioConfig;

fn main() -> aggrsim::error::Result<()> {
    let horizons = [125, 250, 500, 1000, 2000];
    let seeds = seed_list(10);
    print!("{:<8}", "T");
    for t in horizons {
        print!("{t:>9}");
    }
    println!();
    for kind in MechanismKind::ALL {
        print!("{:<8}", kind.name());
        for t in horizons {
            let runs = run_seeds(&ScenarioConfig::preset(kind, 5, t, 20, 0), &seeds)?;
            let avgs: Vec<f64> = runs.iter().map(|r| r.ledger.regret().map(|x| x.1)).collect::<Result<_, _>>()?;
            print!("{:>9.4}", mean(&avgs));
        }
        println!();
    }
    Ok(())
}
