//! Browser bindings for a few small, self-contained demos of the navigation
//! stack. Everything returns plain numbers or strings so the page needs no
//! glue beyond what wasm-bindgen generates.

use tiernav::geometry::{Aabb, TrajSample, Vec3, VoxelMap};
use tiernav::harness::{run_experiment, EnvKind, ModuleSet, ScenarioConfig};
use tiernav::lh::{astar_cells, FreeGrid, GridSpec};
use tiernav::sh::{collect_neighbors, pd_desired_acceleration, sbc_filter, PdGains, SbcParams};
use tiernav::sim::{RobotState, World, WorldConfig};
use wasm_bindgen::prelude::*;

const A_MAX: f64 = 4.0;
const V_MAX: f64 = 2.0;
const DT: f64 = 0.005;
/// Physics steps between recorded frames.
const FRAME_EVERY: usize = 4;

/// Two robots swap places head-on. Returns `[safety_distance, fallbacks,
/// then t, x0, y0, x1, y1 per frame]`. With `filter` off the robots simply
/// track their goals and collide.
#[wasm_bindgen]
pub fn encounter(offset: f64, seconds: f64, filter: bool) -> Vec<f64> {
    let params = SbcParams::with_a_max(A_MAX);
    let shape = Aabb::cube_with_diagonal(Vec3::ZERO, 0.6);
    let ds = 2.0 * shape.bounding_radius() + params.clearance;
    let starts = [Vec3::new(-3.0, 0.0, 1.0), Vec3::new(3.0, offset, 1.0)];
    let goals = [starts[1], starts[0]];
    let robots = (0..2)
        .map(|i| RobotState { id: i, position: starts[i], velocity: Vec3::ZERO, shape })
        .collect();
    let config = WorldConfig { dt_physics: DT, a_max: A_MAX, v_max: V_MAX, ..WorldConfig::default() };
    let map = VoxelMap::new(0.25, Aabb::new(Vec3::splat(-10.0), Vec3::splat(10.0)));
    let mut world = match World::new(config, robots, Vec::new(), map) {
        Ok(w) => w,
        Err(_) => return Vec::new(),
    };
    let gains = PdGains::default();
    let steps = (seconds.clamp(0.0, 30.0) / DT) as usize;
    let mut out = vec![ds, 0.0];
    for step in 0..=steps {
        if step % FRAME_EVERY == 0 {
            let [a, b] = [world.robots[0].position, world.robots[1].position];
            out.extend([step as f64 * DT, a.x, a.y, b.x, b.y]);
        }
        let snapshot = world.robots.clone();
        let cmds: Vec<Vec3> = snapshot
            .iter()
            .enumerate()
            .map(|(i, ego)| {
                let reference = TrajSample { pos: goals[i], vel: Vec3::ZERO, acc: Vec3::ZERO };
                let desired = pd_desired_acceleration(ego, &reference, &gains, A_MAX);
                if !filter {
                    return desired;
                }
                let f = sbc_filter(desired, ego, &collect_neighbors(ego, &snapshot, &[], &[], &params), &params);
                if f.fallback {
                    out[1] += 1.0;
                }
                f.accel
            })
            .collect();
        if world.step(&cmds).is_err() {
            break;
        }
    }
    out
}

/// Shortest 26-connected path on a single-layer grid. `blocked` is row-major
/// with `width * height` entries. Returns `[x0, y0, x1, y1, ...]`, empty when
/// the goal cannot be reached.
#[wasm_bindgen]
pub fn grid_path(width: usize, height: usize, blocked: &[u8], start: &[usize], goal: &[usize]) -> Vec<u32> {
    if width == 0 || height == 0 || blocked.len() != width * height || start.len() != 2 || goal.len() != 2 {
        return Vec::new();
    }
    if start[0] >= width || start[1] >= height || goal[0] >= width || goal[1] >= height {
        return Vec::new();
    }
    let bounds = Aabb::new(Vec3::ZERO, Vec3::new(width as f64, height as f64, 1.0));
    let mut map = VoxelMap::new(0.5, bounds);
    for (i, &b) in blocked.iter().enumerate() {
        if b != 0 {
            let lo = Vec3::new((i % width) as f64, (i / width) as f64, 0.0);
            map.insert_box(&Aabb::new(lo, lo + Vec3::splat(1.0)));
        }
    }
    let grid = FreeGrid::build(&map, GridSpec { cell: 1.0, bounds, inflation: 0.0 });
    match astar_cells(&grid, [start[0], start[1], 0], [goal[0], goal[1], 0]) {
        Ok(cells) => cells.iter().flat_map(|c| [c[0] as u32, c[1] as u32]).collect(),
        Err(_) => Vec::new(),
    }
}

/// Runs a short scenario and returns a one-line summary, or the error text.
#[wasm_bindgen]
pub fn scenario(env: &str, modules: &str, dynamic: usize, seed: u64, duration: f64) -> String {
    let summary = || -> tiernav::Result<String> {
        let env: EnvKind = env.parse()?;
        let modules: ModuleSet = modules.parse()?;
        let mut cfg = ScenarioConfig::new(env, modules, dynamic, seed);
        cfg.duration = duration;
        let out = run_experiment(&cfg, None)?;
        Ok(format!("{env} {modules} dyn={dynamic} seed={seed} {duration} s: {}", out.report))
    };
    summary().unwrap_or_else(|e| format!("error: {e}"))
}
