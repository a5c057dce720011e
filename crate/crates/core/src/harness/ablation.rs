use std::fs;
use std::path::Path;

use super::{run_experiment, EnvKind, MetricsReport, ModuleSet, ScenarioConfig};
use crate::error::{NavError, Result};

pub const ALL_COMBINATIONS: [ModuleSet; 7] = [
    ModuleSet { lh: true, mh: true, sh: true },
    ModuleSet { lh: false, mh: true, sh: true },
    ModuleSet { lh: true, mh: false, sh: true },
    ModuleSet { lh: true, mh: true, sh: false },
    ModuleSet { lh: true, mh: false, sh: false },
    ModuleSet { lh: false, mh: true, sh: false },
    ModuleSet { lh: false, mh: false, sh: true },
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub env: EnvKind,
    pub dynamic_obstacles: usize,
    pub modules: ModuleSet,
    pub seed: u64,
    pub report: MetricsReport,
}

impl AblationRow {
    pub fn csv_header() -> String {
        format!("env,dynamic_obstacles,modules,seed,{}", MetricsReport::CSV_HEADER)
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.env, self.dynamic_obstacles, self.modules, self.seed, self.report.csv_row())
    }
}

/// Scenario list of a named suite. `paper`: all seven combinations, both
/// environments, with and without dynamic obstacles, once per seed.
pub fn ablation_suite(name: &str, seeds: &[u64]) -> Result<Vec<ScenarioConfig>> {
    if name != "paper" {
        return Err(NavError::Config(format!("unknown suite '{name}'")));
    }
    let mut out = Vec::new();
    for env in [EnvKind::Forest, EnvKind::Maze] {
        for dynamic in [0, 150] {
            for modules in ALL_COMBINATIONS {
                for &seed in seeds {
                    out.push(ScenarioConfig::new(env, modules, dynamic, seed));
                }
            }
        }
    }
    Ok(out)
}

/// Runs every scenario; with `out_dir` each run's logs go to their own
/// subdirectory and a summary `ablation.csv` is written.
pub fn run_ablation(
    scenarios: &[ScenarioConfig],
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(scenarios.len());
    for cfg in scenarios {
        let sub = out_dir.map(|d| {
            d.join(format!("{}_dyn{}_{}_seed{}", cfg.env, cfg.dynamic_obstacles, cfg.modules.to_string().replace('+', "-"), cfg.seed))
        });
        let out = run_experiment(cfg, sub.as_deref())?;
        let row = AblationRow {
            env: cfg.env,
            dynamic_obstacles: cfg.dynamic_obstacles,
            modules: cfg.modules,
            seed: cfg.seed,
            report: out.report,
        };
        progress(&row);
        rows.push(row);
    }
    if let Some(d) = out_dir {
        let mut s = AblationRow::csv_header() + "\n";
        for r in &rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        fs::create_dir_all(d)?;
        fs::write(d.join("ablation.csv"), s)?;
    }
    Ok(rows)
}
