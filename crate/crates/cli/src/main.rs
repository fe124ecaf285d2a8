use clap::{Parser, Subcommand};
use pinlab::config::{load_config, Command, ExperimentConfig, SCHEMA_VERSION};
use pinlab::run::{run, Overrides};
use pinlab::suite::DEFAULT_SEED;
use pinlab::{CliError, EXIT_INVALID};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pinlab", version, about = "Disordered pinning laboratory: seeded experiment runs and the acceptance battery")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every acceptance criterion and write the pass/fail report.
    Suite {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, hide = true)]
        zero_tolerance: bool,
        #[arg(long, hide = true, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn env_threads() -> Result<Option<usize>, String> {
    match std::env::var("PINLAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(format!("PINLAB_THREADS: expected a positive integer, got {v:?}")),
        },
        Err(_) => Ok(None),
    }
}

fn suite_config(seed: u64) -> ExperimentConfig {
    let text = format!(r#"{{"schema_version": {SCHEMA_VERSION}, "command": "suite", "seed": {seed}}}"#);
    let c: ExperimentConfig = serde_json::from_str(&text).expect("built-in suite config parses");
    debug_assert_eq!(c.command, Command::Suite);
    c
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env = match env_threads() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let (config, ov) = match cli.command {
        Cmd::Run { config, seed, threads, out } => match load_config(&config) {
            Ok(c) => (c, Overrides { seed, threads, out, ..Overrides::default() }),
            Err(e) => return report(CliError::Config(e)),
        },
        Cmd::Suite { out, seed, threads, zero_tolerance, only } => {
            let ov = Overrides {
                seed: None,
                threads,
                out,
                zero_tolerance,
                only: (!only.is_empty()).then_some(only),
            };
            (suite_config(seed.unwrap_or(DEFAULT_SEED)), ov)
        }
    };
    match run(config, &ov, env) {
        Ok(o) => {
            if let Some(table) = &o.suite_table {
                print!("{table}");
            } else {
                for t in &o.tasks {
                    println!("{:<10} {}  {}", format!("{:?}", t.status).to_lowercase(), t.name, t.detail);
                }
            }
            println!("manifest: {}", o.manifest.display());
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
