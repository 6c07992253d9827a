use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdr_anpg::harness::{cmd_run, cmd_sweep, cmd_verify, exit_code, CliOverrides};

#[derive(Parser)]
#[command(name = "pdr-anpg", about = "Primal-dual regularized accelerated NPG experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Use exact oracle gradients instead of sampling.
    #[arg(long, global = true)]
    exact: bool,
    #[arg(long, global = true)]
    k_override: Option<u64>,
    #[arg(long, global = true)]
    record_stride: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed and write per-seed CSVs plus summary.json.
    Run { config: PathBuf },
    /// Run the property suite against the configured CMDP.
    Verify { config: PathBuf },
    /// Run once per epsilon and write sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        epsilons: Vec<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let o = cli.overrides;
    let overrides = CliOverrides {
        seed_offset: o.seed_offset,
        output_dir: o.output_dir,
        exact: o.exact,
        k_override: o.k_override,
        record_stride: o.record_stride,
    };
    let fail = |e: pdr_anpg::Error| {
        eprintln!("error: {e}");
        ExitCode::from(exit_code(&e) as u8)
    };
    match cli.command {
        Command::Run { config } => match cmd_run(&config, &overrides) {
            Ok(summary) => {
                for s in &summary.seeds {
                    println!(
                        "seed {}: gap {:.6} violation {:.6} samples {} -> {}",
                        s.seed,
                        s.final_gap,
                        s.final_violation,
                        s.samples,
                        s.csv.display()
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { config } => match cmd_verify(&config, &overrides) {
            Ok(outcomes) => {
                for o in &outcomes {
                    println!("{}", o.line());
                }
                match outcomes.iter().find(|o| !o.passed) {
                    Some(first) => {
                        eprintln!("verification failed: {}", first.name);
                        ExitCode::from(5)
                    }
                    None => ExitCode::SUCCESS,
                }
            }
            Err(e) => fail(e),
        },
        Command::Sweep { config, epsilons } => match cmd_sweep(&config, &epsilons, &overrides) {
            Ok(rows) => {
                for r in &rows {
                    println!(
                        "epsilon {}: samples {:.0} gap {:.6} violation {:.6}",
                        r.epsilon, r.samples, r.final_gap, r.final_violation
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
