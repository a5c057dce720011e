use std::fs;
use std::path::Path;

use super::{EnvKind, ModuleSet, ScenarioConfig};
use crate::error::{NavError, Result};
use crate::geometry::{Aabb, Vec3, VoxelMap};
use crate::mh::{MhConfig, REFERENCE_LIMIT_FRACTION};
use crate::sh::SbcParams;

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| NavError::Config(format!("bad value '{value}' for '{key}'")))
}

fn triple(key: &str, value: &str) -> Result<Vec3> {
    let parts: Vec<f64> = value.split(',').map(|p| num(key, p)).collect::<Result<_>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(NavError::Config(format!("'{key}' needs three comma-separated numbers"))),
    }
}

/// Applies one `key=value` setting. Keys mirror the command-line flags.
pub fn apply_setting(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<()> {
    let value = value.trim();
    match key.trim() {
        "env" => cfg.env = value.parse::<EnvKind>()?,
        "dyn" => cfg.dynamic_obstacles = num(key, value)?,
        "robots" => cfg.robots = num(key, value)?,
        "modules" => cfg.modules = value.parse::<ModuleSet>()?,
        "duration" => cfg.duration = num(key, value)?,
        "seed" => {
            cfg.seed = num(key, value)?;
            cfg.world.seed = cfg.seed;
        }
        "pillars" => cfg.forest.pillars = num(key, value)?,
        "arena_min" => cfg.arena = Aabb::new(triple(key, value)?, cfg.arena.max),
        "arena_max" => cfg.arena = Aabb::new(cfg.arena.min, triple(key, value)?),
        "dt" => cfg.world.dt_physics = num(key, value)?,
        "drop_probability" => cfg.world.drop_probability = num(key, value)?,
        "delay_low" => cfg.world.delay_low = num(key, value)?,
        "delay_high" => cfg.world.delay_high = num(key, value)?,
        "sensing_noise" => cfg.world.sensing_noise = num(key, value)?,
        "v_max" | "a_max" => {
            let v: f64 = num(key, value)?;
            if key.trim() == "v_max" {
                cfg.world.v_max = v;
            } else {
                cfg.world.a_max = v;
            }
            let keep = cfg.mh.clone();
            cfg.mh = MhConfig {
                v_ref: REFERENCE_LIMIT_FRACTION * cfg.world.v_max,
                a_ref: REFERENCE_LIMIT_FRACTION * cfg.world.a_max,
                ..keep
            };
            cfg.sbc = SbcParams { a_max: cfg.world.a_max, alpha: 0.5 * cfg.world.a_max, ..cfg.sbc };
        }
        "replan_period" => cfg.mh.replan_period = num(key, value)?,
        "horizon" => cfg.mh.horizon = num(key, value)?,
        "primitive_speed" => cfg.mh.primitive_speed = num(key, value)?,
        "v_ref" => cfg.mh.v_ref = num(key, value)?,
        "a_ref" => cfg.mh.a_ref = num(key, value)?,
        "max_expansions" => cfg.mh.max_expansions = num(key, value)?,
        "log_every" => cfg.log_every = num(key, value)?,
        "deadlock_window" => cfg.deadlock_window = num(key, value)?,
        other => return Err(NavError::Config(format!("unknown setting '{other}'"))),
    }
    Ok(())
}

/// Parses a flat `key=value` file on top of the defaults. Blank lines and
/// `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::new(EnvKind::Forest, ModuleSet::FULL, 0, 0);
    apply_config_text(&mut cfg, text)?;
    Ok(cfg)
}

/// Applies `key=value` lines on top of an existing config.
pub fn apply_config_text(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(NavError::Parse { line: n + 1, msg: "expected key=value".into() });
        };
        apply_setting(cfg, k, v).map_err(|e| NavError::Parse { line: n + 1, msg: e.to_string() })?;
    }
    Ok(())
}

pub fn render_config(cfg: &ScenarioConfig) -> String {
    let v = |p: Vec3| format!("{},{},{}", p.x, p.y, p.z);
    [
        format!("env={}", cfg.env),
        format!("dyn={}", cfg.dynamic_obstacles),
        format!("robots={}", cfg.robots),
        format!("modules={}", cfg.modules),
        format!("duration={}", cfg.duration),
        format!("seed={}", cfg.seed),
        format!("pillars={}", cfg.forest.pillars),
        format!("arena_min={}", v(cfg.arena.min)),
        format!("arena_max={}", v(cfg.arena.max)),
        format!("dt={}", cfg.world.dt_physics),
        format!("drop_probability={}", cfg.world.drop_probability),
        format!("delay_low={}", cfg.world.delay_low),
        format!("delay_high={}", cfg.world.delay_high),
        format!("sensing_noise={}", cfg.world.sensing_noise),
        format!("v_max={}", cfg.world.v_max),
        format!("a_max={}", cfg.world.a_max),
        format!("replan_period={}", cfg.mh.replan_period),
        format!("horizon={}", cfg.mh.horizon),
        format!("primitive_speed={}", cfg.mh.primitive_speed),
        format!("v_ref={}", cfg.mh.v_ref),
        format!("a_ref={}", cfg.mh.a_ref),
        format!("max_expansions={}", cfg.mh.max_expansions),
        format!("log_every={}", cfg.log_every),
        format!("deadlock_window={}", cfg.deadlock_window),
    ]
    .join("\n")
        + "\n"
}

/// One box per line: `minx miny minz maxx maxy maxz`.
pub fn write_prior_map(path: &Path, map: &VoxelMap) -> Result<()> {
    let mut s = String::new();
    for c in map.occupied() {
        let b = map.cell_box(c);
        s.push_str(&format!("{} {} {} {} {} {}\n", b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z));
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_prior_map(path: &Path, resolution: f64, bounds: Aabb) -> Result<VoxelMap> {
    let text = fs::read_to_string(path)?;
    let mut map = VoxelMap::new(resolution, bounds);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| NavError::Parse { line: n + 1, msg: e.to_string() })?;
        let [a, b, c, d, e, f] = vals[..] else {
            return Err(NavError::Parse { line: n + 1, msg: format!("expected 6 numbers, found {}", vals.len()) });
        };
        map.insert_box(&Aabb::new(Vec3::new(a, b, c), Vec3::new(d, e, f)));
    }
    Ok(map)
}
