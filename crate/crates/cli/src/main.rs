use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermovisc::validate_problem;
use thermovisc_cli::output::OutDir;
use thermovisc_cli::problem::build_problem;
use thermovisc_cli::{catalog, load_scenario, run, CliError, RunOptions};

#[derive(Parser)]
#[command(
    name = "thermovisc",
    version,
    about = "Coupled thermoviscous solver and estimate audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write its outputs.
    Run {
        /// Scenario file, or `builtin:<name>`.
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's mesh size.
        #[arg(long)]
        mesh: Option<usize>,
        /// Worker threads for sweeps (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse a scenario and run the model validators on its problem data.
    Validate {
        #[arg(long)]
        config: String,
    },
    /// List the bundled scenarios.
    Catalog {
        /// Also write them as `.ini` files into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<i32, CliError> {
    match cmd {
        Cmd::Run {
            config,
            out,
            mesh,
            jobs,
        } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(j.max(1))
                    .build_global()
                    .map_err(|e| CliError::Other(e.to_string()))?;
            }
            let scenario = load_scenario(&config)?;
            let mut dir = OutDir::create(&out)?;
            let summary = run(&scenario, &mut dir, RunOptions { mesh })?;
            eprintln!(
                "{}: {} in {:.2}s, {} files under {}",
                scenario.name,
                if summary.converged {
                    "converged"
                } else {
                    "NOT converged"
                },
                summary.wall_time.as_secs_f64(),
                summary.files.len(),
                out.display()
            );
            for a in &summary.audits {
                eprintln!("  {:<28} {}", a.id, if a.pass { "pass" } else { "FAIL" });
            }
            Ok(summary.exit_code())
        }
        Cmd::Validate { config } => {
            let scenario = load_scenario(&config)?;
            let problem = build_problem(&scenario, scenario.mesh)?;
            let report = validate_problem(&problem, 400, 10.0);
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.ok() { 0 } else { 1 })
        }
        Cmd::Catalog { export } => {
            for e in catalog::CATALOG {
                println!("{:<20} {}", e.name, e.checks);
            }
            if let Some(dir) = export {
                for f in catalog::export(&dir)? {
                    eprintln!("wrote {}", dir.join(f).display());
                }
            }
            Ok(0)
        }
    }
}
