//! A more accurate worker joins at slot 100 with a quarter of the
//! incumbent's weight and overtakes it.

use aggrsim::analysis::{responsiveness_check, responsiveness_reference, seed_list};
use aggrsim::sim::{catchup_time, run_scenario};

fn main() -> aggrsim::error::Result<()> {
    let cfg = responsiveness_reference(4)?;
    let traj = run_scenario(&cfg)?;
    let start = cfg.arrival.expect("reference has an entrant").start_slot;
    for t in [start, start + 20, start + 40, start + 60] {
        println!(
            "slot {t}: incumbent {:.4}, entrant {:.4}",
            traj.weight(t, 0).unwrap_or(0.0),
            traj.weight(t, 1).unwrap_or(0.0)
        );
    }
    match catchup_time(&traj, 1, 0) {
        Some(s) => println!("entrant caught up at slot {s}, {} slots after arriving", s - start),
        None => println!("entrant never caught up"),
    }
    let v = responsiveness_check(&cfg, &seed_list(30))?;
    println!("mean over 30 seeds: {:.2} slots, bound {}", v.observed, v.bound_or_expected);
    Ok(())
}
