//! Scenario generation, the experiment runner, metrics, and the ablation suite.

mod ablation;
mod config;
mod generate;
mod metrics;
mod run;

pub use ablation::{ablation_suite, run_ablation, AblationRow, ALL_COMBINATIONS};
pub use config::{apply_config_text, apply_setting, parse_config, read_prior_map, render_config, write_prior_map};
pub use generate::{
    concavity_witnesses, free_space_connected, generate_dynamic_obstacles, generate_forest, generate_maze,
    sample_robot_starts, ForestParams, MazeLayout,
};
pub use metrics::{compute_metrics, MetricsReport, RobotSummary, TaskRecord};
pub use run::{run_experiment, RunOutput};

use std::fmt;
use std::str::FromStr;

use crate::error::{NavError, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mh::MhConfig;
use crate::sh::{PdGains, SbcParams};
use crate::sim::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    Forest,
    Maze,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Forest => "forest",
            EnvKind::Maze => "maze",
        })
    }
}

impl FromStr for EnvKind {
    type Err = NavError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forest" => Ok(EnvKind::Forest),
            "maze" => Ok(EnvKind::Maze),
            other => Err(NavError::Config(format!("unknown environment '{other}'"))),
        }
    }
}

/// Which planning layers run. Missing layers are substituted: without the
/// long-horizon layer tasks are planned on an empty prior map, without the
/// medium-horizon layer the desired trajectory is the reference, and without
/// the safety layer the desired acceleration is applied directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModuleSet {
    pub lh: bool,
    pub mh: bool,
    pub sh: bool,
}

impl ModuleSet {
    pub const FULL: ModuleSet = ModuleSet { lh: true, mh: true, sh: true };

    pub fn is_empty(&self) -> bool {
        !(self.lh || self.mh || self.sh)
    }
}

impl fmt::Display for ModuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = [(self.lh, "LH"), (self.mh, "MH"), (self.sh, "SH")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for ModuleSet {
    type Err = NavError;
    fn from_str(s: &str) -> Result<Self> {
        let mut m = ModuleSet { lh: false, mh: false, sh: false };
        for part in s.split('+').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_uppercase().as_str() {
                "LH" => m.lh = true,
                "MH" => m.mh = true,
                "SH" => m.sh = true,
                other => return Err(NavError::Config(format!("unknown module '{other}'"))),
            }
        }
        if m.is_empty() {
            return Err(NavError::Config("module combination must not be empty".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub env: EnvKind,
    pub arena: Aabb,
    pub static_resolution: f64,
    pub forest: ForestParams,
    pub dynamic_obstacles: usize,
    pub obstacle_diagonal: (f64, f64),
    pub obstacle_speed: (f64, f64),
    pub robots: usize,
    /// Diagonal of the cubic robot body.
    pub robot_diagonal: f64,
    pub modules: ModuleSet,
    pub duration: f64,
    pub seed: u64,
    pub world: WorldConfig,
    pub mh: MhConfig,
    pub sbc: SbcParams,
    pub gains: PdGains,
    pub lh_cell: f64,
    /// Extra clearance added to the robot radius when inflating the prior map.
    pub lh_clearance: f64,
    pub lh_speed: f64,
    pub dsht_period: f64,
    pub report_period: f64,
    pub task_resend_period: f64,
    pub goal_tolerance: f64,
    pub settle_speed: f64,
    pub deadlock_window: f64,
    pub deadlock_displacement: f64,
    /// Keep dynamic obstacles this far from robot start positions.
    pub spawn_clearance: f64,
    /// Trajectory and safety logs keep every n-th physics step.
    pub log_every: usize,
    pub plot_period: f64,
}

impl ScenarioConfig {
    /// Desk-scale defaults: 30 x 30 x 4 m arena, 4 robots, 120 s.
    pub fn new(env: EnvKind, modules: ModuleSet, dynamic_obstacles: usize, seed: u64) -> Self {
        let world = WorldConfig { seed, ..WorldConfig::default() };
        Self {
            env,
            arena: Aabb::new(Vec3::new(-15.0, -15.0, 0.0), Vec3::new(15.0, 15.0, 4.0)),
            static_resolution: 0.25,
            forest: ForestParams::default(),
            dynamic_obstacles,
            obstacle_diagonal: (1.2, 1.6),
            obstacle_speed: (0.25, 0.35),
            robots: 4,
            robot_diagonal: 0.6,
            modules,
            duration: 120.0,
            seed,
            mh: MhConfig::for_limits(world.v_max, world.a_max),
            sbc: SbcParams::with_a_max(world.a_max),
            gains: PdGains::default(),
            world,
            lh_cell: 0.5,
            lh_clearance: 0.3,
            lh_speed: 1.0,
            dsht_period: 0.1,
            report_period: 0.2,
            task_resend_period: 1.0,
            goal_tolerance: 0.2,
            settle_speed: 0.1,
            deadlock_window: 30.0,
            deadlock_displacement: 0.1,
            spawn_clearance: 2.0,
            log_every: 1,
            plot_period: 1.0,
        }
    }

    pub fn robot_radius(&self) -> f64 {
        self.robot_diagonal / 2.0
    }

    /// Physics steps per event of the given period.
    pub fn steps_per(&self, period: f64) -> u64 {
        ((period / self.world.dt_physics).round() as u64).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.mh.validate(self.world.v_max, self.world.a_max)?;
        let bad = |m: &str| Err(NavError::Config(m.to_string()));
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if self.modules.is_empty() {
            return bad("module combination must not be empty");
        }
        if self.robots == 0 {
            return bad("at least one robot is required");
        }
        let size = self.arena.size();
        if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
            return bad("arena must have positive extent");
        }
        if size.z < self.robot_diagonal + 2.0 * self.lh_clearance {
            return bad("arena too low for the robots");
        }
        if !(self.obstacle_diagonal.0 > 0.0 && self.obstacle_diagonal.0 <= self.obstacle_diagonal.1) {
            return bad("obstacle diagonal range must be positive and ordered");
        }
        if !(self.obstacle_speed.0 >= 0.0 && self.obstacle_speed.0 <= self.obstacle_speed.1) {
            return bad("obstacle speed range must be non-negative and ordered");
        }
        let periods = [
            self.static_resolution,
            self.robot_diagonal,
            self.lh_cell,
            self.lh_speed,
            self.dsht_period,
            self.report_period,
            self.task_resend_period,
            self.goal_tolerance,
            self.plot_period,
        ];
        if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return bad("sizes, speeds and periods must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1");
        }
        if (self.sbc.a_max - self.world.a_max).abs() > 1e-12 {
            return bad("safety filter and world must share a_max");
        }
        Ok(())
    }
}
