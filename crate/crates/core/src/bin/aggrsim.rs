use std::path::PathBuf;
use std::process::ExitCode;

use aggrsim::analysis::DEFAULT_SEEDS;
use aggrsim::cli::{cmd_run, cmd_sweep, cmd_verify, exit_code, fmt_num, load_config, Suite, SweepAxis};
use aggrsim::error::{Error, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aggrsim", version, about = "Online preference aggregation simulator")]
struct Cli {
    /// Worker threads for seed fan-out (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trajectory.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verifier suite; writes verdicts.csv.
    Verify {
        /// truthfulness, regret, linear-witness, responsiveness, robustness or all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: usize,
    },
    /// Vary one parameter across seeds; writes sweep.csv and sweep_summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// name=v1,v2,... with name one of T, N, epsilon, mechanism
        #[arg(long)]
        axis: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEEDS)]
        seeds: usize,
    },
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let s = cmd_run(&cfg, &out)?;
            println!(
                "mechanism={} seed={} params={}",
                s.mechanism,
                s.seed,
                serde_json::to_string(&s.params).unwrap_or_default()
            );
            println!("R(T)={} R(T)/T={}", fmt_num(Some(s.regret)), fmt_num(Some(s.avg_regret)));
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Verify { suite, out, seeds } => {
            let suite: Suite = suite.parse()?;
            let verdicts = cmd_verify(suite, seeds, &out)?;
            for v in &verdicts {
                let mark = if v.passed { "PASS" } else { "FAIL" };
                println!(
                    "{mark} {} observed={} bound={} {}",
                    v.check_name,
                    fmt_num(Some(v.observed)),
                    fmt_num(Some(v.bound_or_expected)),
                    v.notes
                );
            }
            let failed: Vec<_> = verdicts.iter().filter(|v| !v.passed).collect();
            for v in &failed {
                eprintln!("failed: {v:?}");
            }
            Ok(failed.is_empty())
        }
        Command::Sweep { config, axis, out, seeds } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = load_config(&config)?;
            for s in cmd_sweep(&cfg, &axis, seeds, &out)? {
                println!(
                    "{}={} runs={} mean R(T)/T={}",
                    axis.name(),
                    s.value,
                    s.runs,
                    fmt_num(Some(s.mean_avg_regret))
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build();
    let result = match pool {
        Ok(pool) => pool.install(|| execute(cli.command)),
        Err(e) => Err(Error::InvalidArgument(format!("--jobs: {e}"))),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
