use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ionctl::{parse_scenario, run, Scenario};

#[derive(Parser)]
#[command(name = "ionctl", version, about = "Trapped-ion control studies from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for parallel evaluation.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and validate a scenario without running it.
    Validate { scenario: PathBuf },
}

fn load(path: &PathBuf) -> Result<Scenario, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => load(&scenario).map(|s| {
            println!("{}: valid {} scenario", scenario.display(), s.task.kind());
        }),
        Command::Run { scenario, out, seed, threads } => (|| {
            if let Some(k) = threads {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build_global()
                    .map_err(|e| format!("thread pool: {e}"))?;
            }
            let mut s = load(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let report = run(&s, &out).map_err(|e| format!("{}: {e}", scenario.display()))?;
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            for f in &report.files {
                log::info!("wrote {}", f.display());
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
