use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use replidyn::experiment::{self, exit, ExperimentConfig, Outcome};
use replidyn::fitness::catalog::{self, CheckOptions};
use replidyn::Result;

#[derive(Parser)]
#[command(name = "replidyn", version, about = "Replicator dynamics with similar-order preserving fitness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CatalogAction {
    List,
    Check,
    InjectBroken,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the map and write orbit.csv.
    Simulate(Common),
    /// Certify the folk-theorem clauses on a stable system.
    VerifyFolk(Common),
    /// Certify historic behavior of a zero-sum system.
    VerifyHistoric(Common),
    /// List or check the fitness catalog.
    Catalog {
        action: CatalogAction,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// SOP samples per entry (per source).
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Simulate(c) => experiment::run_simulate(&load(&c)?, c.out.as_deref()),
        Command::VerifyFolk(c) => experiment::run_verify_folk(&load(&c)?, c.out.as_deref()).map(|r| r.0),
        Command::VerifyHistoric(c) => experiment::run_verify_historic(&load(&c)?, c.out.as_deref()).map(|r| r.0),
        Command::Catalog {
            action,
            out,
            seed,
            samples,
        } => match action {
            CatalogAction::List => {
                print!("{}", catalog::listing());
                Ok(Outcome {
                    code: exit::PASS,
                    message: String::new(),
                    files: Vec::new(),
                })
            }
            CatalogAction::Check | CatalogAction::InjectBroken => {
                let opts = CheckOptions {
                    seed,
                    samples,
                    inject_broken: matches!(action, CatalogAction::InjectBroken),
                    ..Default::default()
                };
                experiment::run_catalog_check(&opts, out.as_deref()).map(|r| r.0)
            }
        },
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("REPLIDYN_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: REPLIDYN_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(exit::CONFIG as u8);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => {
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            if o.code == exit::PASS {
                if !o.message.is_empty() {
                    println!("{}", o.message);
                }
            } else {
                eprintln!("{}", o.message);
            }
            ExitCode::from(o.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
