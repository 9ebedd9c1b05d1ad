//! Parses a scenario from key=value text, with one strategic worker, and
//! writes the run artifacts to a temporary directory.

use aggrsim::cli::{cmd_run, parse_config};

const SCENARIO: &str = "\
mechanism=owa
N=5
T=300
m=20
bands=default
strategies=truthful
# worker 2 shades every report by 0.15 from slot 50 on
worker.2.strategy=shift:0.15@50
seed=9
";

fn main() -> aggrsim::error::Result<()> {
    let cfg = parse_config(SCENARIO)?;
    let out = std::env::temp_dir().join("aggrsim-config-example");
    let summary = cmd_run(&cfg, &out)?;
    println!("wrote {}", out.join("trajectory.csv").display());
    println!(
        "R(T)/T = {:.4}, final theta = {:?}",
        summary.avg_regret,
        summary.final_theta.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    Ok(())
}
