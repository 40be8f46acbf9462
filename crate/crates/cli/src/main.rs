//! `arbsim`: validate, run and inspect driving scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arbitration_core::EvalMode;
use arbitration_driving::export::{corridor_svg, ego_path, initial_corridors, timeline_svg, trace_csv, trace_ndjson};
use arbitration_driving::scenario::{parse_scenario, LoadedScenario};
use arbitration_driving::sim::Outcome;
use clap::{Parser, Subcommand};

/// Relative scenario paths that do not exist are looked up here.
const SCENARIO_DIR_VAR: &str = "ARBSIM_SCENARIO_DIR";

#[derive(Parser)]
#[command(name = "arbsim", version, about = "Run driving scenarios through the behavior arbitration graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and export the results.
    Run {
        scenario: PathBuf,
        /// Tick table (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// One selection snapshot per tick (NDJSON).
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Behavior timeline (SVG).
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Map with initial corridors and the driven path (SVG).
        #[arg(long)]
        corridors: Option<PathBuf>,
        /// Overrides the seed from the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate sibling options on the thread pool.
        #[arg(long)]
        parallel: bool,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Show the arbitration graph a scenario builds.
    Graph {
        scenario: PathBuf,
        /// Print the node tree.
        #[arg(long)]
        print: bool,
    },
}

fn resolve(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(SCENARIO_DIR_VAR) {
        Some(dir) => Path::new(&dir).join(path),
        None => path.to_path_buf(),
    }
}

fn load(path: &Path) -> Result<LoadedScenario, ExitCode> {
    parse_scenario(&resolve(path)).map_err(|errors| {
        eprintln!("{}: invalid scenario", path.display());
        eprintln!("{errors}");
        ExitCode::from(1)
    })
}

fn write(path: &Path, contents: &str) -> Result<(), ExitCode> {
    std::fs::write(path, contents).map_err(|e| {
        eprintln!("cannot write {}: {e}", path.display());
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Validate { scenario } => {
            let s = load(&scenario)?;
            println!(
                "{}: ok ({} lanes, {} agents)",
                s.file.name,
                s.scenario.map.lanes.len(),
                s.scenario.agents.len()
            );
        }
        Command::Graph { scenario, print } => {
            let s = load(&scenario)?;
            let graph = s.build_graph(EvalMode::Sequential).map_err(|e| {
                eprintln!("{e}");
                ExitCode::from(1)
            })?;
            if print {
                print!("{}", graph.render_tree());
            } else {
                println!("{} nodes, root {}", graph.structure().ids().len(), graph.root_id());
            }
        }
        Command::Run { scenario, trace, snapshots, plot, corridors, seed, parallel } => {
            let s = load(&scenario)?;
            let mode = if parallel { EvalMode::Parallel } else { EvalMode::Sequential };
            let result = s.run(seed.unwrap_or(s.sim.seed), mode).map_err(|e| {
                eprintln!("{e}");
                ExitCode::from(1)
            })?;
            for e in &result.events {
                println!("{:8.2}  {:?}  {}", e.time, e.kind, e.detail);
            }
            println!("outcome: {:?} after {} ticks", result.outcome, result.ticks.len());
            if let Some(p) = trace {
                write(&p, &trace_csv(&result))?;
            }
            if let Some(p) = snapshots {
                write(&p, &trace_ndjson(&result))?;
            }
            if let Some(p) = plot {
                let svg = timeline_svg(&result).map_err(|e| {
                    eprintln!("{e}");
                    ExitCode::from(2)
                })?;
                write(&p, &svg)?;
            }
            if let Some(p) = corridors {
                let b = s.behavior();
                let cs = initial_corridors(&s.scenario, b.d_max_lane_change, b.a_lat_max);
                let svg = corridor_svg(&s.scenario.map, &cs, &ego_path(&result)).map_err(|e| {
                    eprintln!("{e}");
                    ExitCode::from(1)
                })?;
                write(&p, &svg)?;
            }
            if matches!(result.outcome, Outcome::Collision | Outcome::Fatal) {
                return Err(ExitCode::from(2));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
