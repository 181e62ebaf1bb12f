use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levelset_gibbs::harness::{self, ExperimentConfig};
use levelset_gibbs::{catalog, Error};

#[derive(Parser)]
#[command(name = "levelset-gibbs", version, about = "Run level-set Gibbs experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV/SVG outputs plus a manifest.
    Run {
        /// Experiment id (fig1, fig2, fig3, w1rate, coarea, lemma_a1, prop10, barrier, sgld).
        id: String,
        /// TOML file with `seed`, `out` and a `[params]` table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory. Defaults to `$LEVELSET_GIBBS_OUT/<id>` or `results/<id>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the catalog of maps, weights and potential families.
    Catalog,
}

fn run(id: &str, config: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), Error> {
    let mut cfg = match &config {
        Some(path) => ExperimentConfig::from_file(path, Some(id))?,
        None => {
            let mut c = ExperimentConfig::new(id)?;
            c.out_dir = harness::default_out_dir(id);
            c
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let manifest = harness::run_experiment(&cfg)?;
    println!(
        "{}: wrote {} files to {}",
        cfg.id,
        manifest.files.len() + 1,
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Run {
            id,
            config,
            seed,
            out,
        } => run(&id, config, seed, out),
        Command::Catalog => {
            print!("{}", catalog::describe());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
