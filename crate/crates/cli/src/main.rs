use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acas_cli::pipeline::{
    cmd_authenticate, cmd_e2e, cmd_generate, cmd_simulate, FullReport, PipelineError,
};
use acas_cli::report::{render_text, to_json};
use acas_cli::scenario::Scenario;

/// Exit code when the pipeline ran but the position did not
/// authenticate.
const EXIT_NOT_AUTHENTICATED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "acas",
    about = "Spreading-code authentication scenario driver: publish re-encrypted \
             sequences, record snapshots, verify positions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Publish per-satellite .recs files, the .bgd file and the chain root
    Generate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Record the baseband snapshot for the scenario's slot
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decrypt, correlate and verify against a recorded snapshot
    Authenticate {
        #[arg(long)]
        scenario: PathBuf,
        /// Directory holding the published .recs/.bgd files
        #[arg(long)]
        recs_dir: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        /// Receiver GST at which verification runs (keys disclosed up
        /// to this time only)
        #[arg(long)]
        at: Option<u64>,
        /// Directory for report.txt / report.json
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate, simulate and authenticate in one run
    E2e {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, PipelineError> {
    let mut sc = Scenario::from_path(path)?;
    if let Some(seed) = seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn emit_report(full: &FullReport, out: Option<&PathBuf>) -> Result<(), PipelineError> {
    print!("{}", render_text(full));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
        let txt = dir.join("report.txt");
        std::fs::write(&txt, render_text(full)).map_err(|source| PipelineError::Io {
            path: txt.clone(),
            source,
        })?;
        let json = dir.join("report.json");
        let doc = serde_json::to_string_pretty(&to_json(full)).expect("report serializes");
        std::fs::write(&json, doc).map_err(|source| PipelineError::Io {
            path: json.clone(),
            source,
        })?;
    }
    Ok(())
}

fn run() -> Result<ExitCode, PipelineError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            scenario,
            out,
            seed,
        } => {
            let sc = load_scenario(&scenario, seed)?;
            let gen = cmd_generate(&sc, &out)?;
            println!(
                "published {} .recs files, {} and {}",
                gen.recs_paths.len(),
                gen.bgd_path.display(),
                gen.root_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            scenario,
            out,
            seed,
        } => {
            let sc = load_scenario(&scenario, seed)?;
            let sim = cmd_simulate(&sc, &out)?;
            println!(
                "wrote {} ({} samples, window [{:.6}, {:.6}])",
                sim.snapshot_path.display(),
                sim.samples,
                sim.window.0,
                sim.window.1
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Authenticate {
            scenario,
            recs_dir,
            snapshot,
            at,
            out,
            seed,
        } => {
            let sc = load_scenario(&scenario, seed)?;
            let full = cmd_authenticate(&sc, &recs_dir, &snapshot, at)?;
            emit_report(&full, out.as_ref())?;
            Ok(if full.report.position_authenticated {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NOT_AUTHENTICATED)
            })
        }
        Command::E2e {
            scenario,
            out,
            seed,
        } => {
            let sc = load_scenario(&scenario, seed)?;
            let full = cmd_e2e(&sc, &out)?;
            emit_report(&full, Some(&out))?;
            Ok(if full.report.position_authenticated {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NOT_AUTHENTICATED)
            })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
