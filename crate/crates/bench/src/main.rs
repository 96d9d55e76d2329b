use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use minmin_bench::summary::expand_glob;
use minmin_bench::{run_experiment, summarize, BenchError, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "minmin-bench", about = "Run and summarize min-min solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory, overriding the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed replacing problem.seed
    #[arg(long, global = true)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every cell of an experiment config
    Run { config: PathBuf },
    /// Aggregate trace files matching a glob
    Summarize { pattern: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, BenchError> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(config)?;
            let opts = RunOptions {
                jobs: cli.jobs,
                out: cli.out.clone(),
                seed_override: cli.seed_override,
            };
            let report = run_experiment(&cfg, &opts)?;
            print!("{}", report.summary.to_table());
            for o in report.outcomes.iter().filter(|o| o.error.is_some()) {
                eprintln!("{} failed: {}", o.run_id, o.error.as_deref().unwrap_or_default());
            }
            eprintln!("wrote {}", report.dir.display());
            Ok(report.exit_code())
        }
        Command::Summarize { pattern } => {
            let paths = expand_glob(pattern)?;
            let summary = summarize(&paths)?;
            print!("{}", summary.to_table());
            if let Some(dir) = &cli.out {
                summary.write(dir)?;
            }
            Ok(0)
        }
    }
}
