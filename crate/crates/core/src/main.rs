use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use tiernav::harness::{
    ablation_suite, apply_config_text, run_ablation, run_experiment, EnvKind, ModuleSet, ScenarioConfig,
};
use tiernav::{NavError, Result};

#[derive(Parser)]
#[command(name = "tiernav", about = "Layered multi-robot navigation simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        /// key=value file applied before the flags below
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        env: Option<EnvKind>,
        /// number of dynamic obstacles
        #[arg(long = "dyn")]
        dynamic: Option<usize>,
        #[arg(long)]
        robots: Option<usize>,
        /// e.g. LH+MH+SH
        #[arg(long)]
        modules: Option<ModuleSet>,
        /// simulated seconds
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a module-ablation suite.
    Ablate {
        #[arg(long, default_value = "paper")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long endurance run with the full stack.
    Longrun {
        #[arg(long)]
        hours: f64,
        #[arg(long, default_value_t = 100)]
        dynamic: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, env, dynamic, robots, modules, duration, seed, out } => {
            let mut cfg = ScenarioConfig::new(EnvKind::Forest, ModuleSet::FULL, 0, 0);
            if let Some(path) = config {
                apply_config_text(&mut cfg, &std::fs::read_to_string(path)?)?;
            }
            cfg.env = env.unwrap_or(cfg.env);
            cfg.dynamic_obstacles = dynamic.unwrap_or(cfg.dynamic_obstacles);
            cfg.robots = robots.unwrap_or(cfg.robots);
            cfg.modules = modules.unwrap_or(cfg.modules);
            cfg.duration = duration.unwrap_or(cfg.duration);
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.world.seed = s;
            }
            let started = Instant::now();
            let result = run_experiment(&cfg, out.as_deref())?;
            println!("{} {} dyn={} seed={}: {}", cfg.env, cfg.modules, cfg.dynamic_obstacles, cfg.seed, result.report);
            println!(
                "safety fallbacks {} | replans ok {} failed {} | wall {:.1} s",
                result.report.sbc_fallbacks,
                result.report.mh_successes,
                result.report.mh_failures,
                started.elapsed().as_secs_f64()
            );
        }
        Command::Ablate { suite, seeds, out } => {
            let seeds: Vec<u64> = (0..seeds).collect();
            let scenarios = ablation_suite(&suite, &seeds)?;
            run_ablation(&scenarios, out.as_deref(), |row| {
                println!("{:<6} dyn={:<3} {:<9} seed={} {}", row.env, row.dynamic_obstacles, row.modules, row.seed, row.report)
            })?;
        }
        Command::Longrun { hours, dynamic, seed, out } => {
            if !(hours.is_finite() && hours > 0.0) {
                return Err(NavError::Config("hours must be positive".into()));
            }
            let mut cfg = ScenarioConfig::new(EnvKind::Forest, ModuleSet::FULL, dynamic, seed);
            cfg.duration = hours * 3600.0;
            // keep log volume bounded: one trajectory row per robot per second
            cfg.log_every = cfg.steps_per(1.0) as usize;
            let result = run_experiment(&cfg, out.as_deref())?;
            println!("longrun {hours} h: {}", result.report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
