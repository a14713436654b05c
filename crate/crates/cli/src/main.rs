use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use explore_core::harness::{batch_summary, run_batch, run_summary, write_env, write_run_outputs, EnvFile, ScenarioConfig};
use explore_core::mission::{DoneReason, PlannerKind};

/// Volumetric exploration planner simulator.
#[derive(Parser)]
#[command(name = "explore", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one mission and write metrics.csv and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        planner: Option<PlannerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `[output] dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_map: bool,
        #[arg(long)]
        dump_graph: bool,
    },
    /// Run seeds `seed .. seed + runs` and aggregate them.
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        planner: Option<PlannerKind>,
    },
    /// Generate an environment and write it as a VOXMAP file with a `.home` sidecar.
    GenEnv {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf, planner: Option<PlannerKind>, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_file(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(p) = planner {
        cfg.planner = p;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<DoneReason> {
    match cli.command {
        Command::Run {
            config,
            planner,
            seed,
            out,
            dump_map,
            dump_graph,
        } => {
            let mut cfg = load(&config, planner, seed)?;
            cfg.output.dump_map |= dump_map;
            cfg.output.dump_graph |= dump_graph;
            let dir = out.unwrap_or_else(|| cfg.output.dir.clone());
            let (_, outcome) = cfg.run(cfg.seed)?;
            write_run_outputs(&cfg, cfg.seed, &outcome, &dir)?;
            print!("{}", run_summary(&cfg, cfg.seed, &outcome));
            Ok(outcome.termination())
        }
        Command::Batch {
            config,
            runs,
            out,
            planner,
        } => {
            let cfg = load(&config, planner, None)?;
            let result = run_batch(&cfg, runs, Some(&out))?;
            print!("{}", batch_summary(&cfg, &result));
            let aborted = result.runs.iter().any(|r| r.termination == DoneReason::Aborted);
            Ok(if aborted { DoneReason::Aborted } else { DoneReason::Completed })
        }
        Command::GenEnv { spec, out } => {
            let file = EnvFile::from_file(&spec).with_context(|| format!("loading {}", spec.display()))?;
            let env = file.generate()?;
            write_env(&env.env, &out)?;
            let h = env.env.home();
            println!("wrote {} (home {} {} {})", out.display(), h.x, h.y, h.z);
            Ok(DoneReason::Completed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(DoneReason::Aborted) => ExitCode::from(2),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
