use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    compute_metrics, generate_dynamic_obstacles, generate_forest, generate_maze, render_config, sample_robot_starts,
    write_prior_map, EnvKind, MetricsReport, RobotSummary, ScenarioConfig, TaskRecord,
};
use crate::error::{NavError, Result};
use crate::geometry::{Aabb, CellBuckets, PiecewiseTrajectory, Vec3, VoxelMap};
use crate::lh::{FreeGrid, GridSpec, LongHorizonPlanner, Task};
use crate::mh::{AppendOutcome, MediumHorizonPlanner, ObstacleObservation};
use crate::sh::{collect_neighbors, pd_desired_acceleration, sbc_filter};
use crate::sim::{BusStats, CollisionEvent, DynamicObstacle, MessageBus, Payload, RobotState, World, CENTRAL};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub tasks: Vec<TaskRecord>,
    pub collisions: Vec<CollisionEvent>,
    pub final_states: Vec<RobotState>,
    pub bus: BusStats,
}

/// Independent random streams so that, e.g., a different obstacle count does
/// not reshuffle the map.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

struct Logs {
    trajectory: BufWriter<File>,
    safety: BufWriter<File>,
    collisions: BufWriter<File>,
    plot: BufWriter<File>,
}

impl Logs {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            writeln!(w, "{header}")?;
            Ok(w)
        };
        Ok(Self {
            trajectory: open("trajectory.csv", "time,robot_id,px,py,pz,vx,vy,vz,ax,ay,az")?,
            safety: open("safety.csv", "time,robot_id,constraint_count,fallback_flag,correction_norm")?,
            collisions: open("collisions.csv", "time,entity_a,entity_b")?,
            plot: open("goal_distance.csv", "time,robot_id,goal_distance")?,
        })
    }
}

/// What a robot believes its task to be.
struct Assignment {
    task_id: u64,
    desired: PiecewiseTrajectory,
}

struct Agent {
    assignment: Option<Assignment>,
    mh: Option<MediumHorizonPlanner>,
    hold: Vec3,
    replan_offset: u64,
}

/// Central long-horizon bookkeeping for one robot.
struct Dispatch {
    task: Option<Task>,
    record: Option<usize>,
    last_sent: f64,
}

fn build_static_map(cfg: &ScenarioConfig) -> Result<VoxelMap> {
    let mut rng = stream(cfg.seed, 1);
    match cfg.env {
        EnvKind::Forest => generate_forest(&cfg.arena, &cfg.forest, cfg.static_resolution, &mut rng),
        EnvKind::Maze => {
            let corridor = (6.0 * cfg.robot_radius()).max(2.0);
            generate_maze(&cfg.arena, cfg.static_resolution, corridor, cfg.robot_radius(), &mut rng).map(|(m, _)| m)
        }
    }
}

fn noisy(v: Vec3, normal: Option<&Normal<f64>>, rng: &mut ChaCha8Rng) -> Vec3 {
    match normal {
        Some(n) => v + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)),
        None => v,
    }
}

fn send_task(bus: &mut MessageBus, task: &Task, now: f64, rng: &mut ChaCha8Rng) {
    let payload = Payload::DesiredTrajectory {
        robot: task.robot,
        task_id: task.id,
        goal: task.goal,
        trajectory: task.desired.clone(),
    };
    bus.send(CENTRAL, task.robot, payload, now, rng);
}

/// Runs one scenario end to end. With `out_dir` set, CSV logs, the rendered
/// config and the static map are written there.
pub fn run_experiment(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let dt = cfg.world.dt_physics;
    let radius = cfg.robot_radius();
    let static_map = build_static_map(cfg)?;
    let spec = GridSpec { cell: cfg.lh_cell, bounds: cfg.arena, inflation: radius + cfg.lh_clearance };
    let true_grid = FreeGrid::build(&static_map, spec);

    let obstacles = generate_dynamic_obstacles(
        cfg.dynamic_obstacles,
        &cfg.arena,
        cfg.obstacle_diagonal,
        cfg.obstacle_speed,
        &mut stream(cfg.seed, 2),
    );
    let starts = sample_robot_starts(cfg.robots, &true_grid, &obstacles, 2.0, cfg.spawn_clearance, &mut stream(cfg.seed, 3))?;
    let shape = Aabb::cube_with_diagonal(Vec3::ZERO, cfg.robot_diagonal);
    let robots: Vec<RobotState> = starts
        .iter()
        .enumerate()
        .map(|(id, &p)| RobotState { id, position: p, velocity: Vec3::ZERO, shape })
        .collect();

    let prior = if cfg.modules.lh { static_map.clone() } else { VoxelMap::new(cfg.static_resolution, cfg.arena) };
    let mut lh = LongHorizonPlanner::new(&prior, spec, cfg.lh_speed);
    let mut lh_rng = stream(cfg.seed, 4);
    let mut bus_rng = stream(cfg.seed, 5);
    let mut sense_rng = stream(cfg.seed, 6);
    let noise = (cfg.world.sensing_noise > 0.0)
        .then(|| Normal::new(0.0, cfg.world.sensing_noise))
        .transpose()
        .map_err(|e| NavError::Config(format!("sensing noise: {e}")))?;
    let mut bus = MessageBus::new(cfg.world.drop_probability, cfg.world.delay_low, cfg.world.delay_high);
    let buckets = CellBuckets::new(&static_map, 2.0);

    let mut world = World::new(cfg.world.clone(), robots, obstacles, static_map)?;
    let mut logs = out_dir.map(Logs::create).transpose()?;
    if let Some(dir) = out_dir {
        fs::write(dir.join("config.txt"), render_config(cfg))?;
        write_prior_map(&dir.join("prior_map.txt"), &world.static_map)?;
    }

    let replan_steps = cfg.steps_per(cfg.mh.replan_period);
    let mut mh_bounds = cfg.arena;
    mh_bounds.min += shape.half_extents();
    mh_bounds.max -= shape.half_extents();
    let mut agents: Vec<Agent> = starts
        .iter()
        .enumerate()
        .map(|(i, &p)| Agent {
            assignment: None,
            mh: cfg.modules.mh.then(|| MediumHorizonPlanner::new(i, cfg.mh.clone(), Some(mh_bounds))),
            hold: p,
            replan_offset: (i as u64 * cfg.steps_per(cfg.dsht_period)) % replan_steps,
        })
        .collect();

    let mut tasks: Vec<TaskRecord> = Vec::new();
    let mut dispatch: Vec<Dispatch> = (0..cfg.robots).map(|_| Dispatch { task: None, record: None, last_sent: 0.0 }).collect();
    // goals come from the true free space; only the desired path ignores
    // obstacles when the long-horizon layer is ablated
    let goals = &true_grid;
    let issue = |lh: &mut LongHorizonPlanner,
                 rng: &mut ChaCha8Rng,
                 bus: &mut MessageBus,
                 bus_rng: &mut ChaCha8Rng,
                 tasks: &mut Vec<TaskRecord>,
                 d: &mut Dispatch,
                 robot: usize,
                 from: Vec3,
                 now: f64| {
        // an unreachable draw is retried at the next report
        if let Ok(task) = lh.issue_task_from(robot, from, now, rng, goals) {
            send_task(bus, &task, now, bus_rng);
            tasks.push(TaskRecord { robot, task_id: task.id, goal: task.goal, issue_time: now, completion_time: None });
            d.record = Some(tasks.len() - 1);
            d.task = Some(task);
            d.last_sent = now;
        }
    };
    for (i, d) in dispatch.iter_mut().enumerate() {
        issue(&mut lh, &mut lh_rng, &mut bus, &mut bus_rng, &mut tasks, d, i, starts[i], 0.0);
    }

    let total_steps = ((cfg.duration / dt).round() as u64).max(1);
    let window_start_step = (cfg.duration >= cfg.deadlock_window)
        .then(|| ((cfg.duration - cfg.deadlock_window) / dt).round() as u64);
    let mut window_positions: Option<Vec<Vec3>> = None;
    let report_steps = cfg.steps_per(cfg.report_period);
    let dsht_steps = cfg.steps_per(cfg.dsht_period);
    let plot_steps = cfg.steps_per(cfg.plot_period);
    let resend_steps = cfg.steps_per(cfg.task_resend_period);
    let mut collisions: Vec<CollisionEvent> = Vec::new();
    let mut sbc_fallbacks = 0u64;
    let mut mh_successes = 0u64;
    let mut mh_failures = 0u64;
    let mut overlap_skips = 0u64;
    let sensing_reach = cfg.sbc.activation_radius + radius;

    for step in 0..total_steps {
        let now = world.time();
        if window_start_step == Some(step) {
            window_positions = Some(world.robots.iter().map(|r| r.position).collect());
        }

        // central planner
        for msg in bus.poll(CENTRAL, now) {
            if let Payload::StateReport { state, .. } = msg.payload {
                let d = &mut dispatch[state.id];
                let done = d.task.as_ref().is_none_or(|t| {
                    t.goal.distance(state.position) <= cfg.goal_tolerance && state.velocity.norm() < cfg.settle_speed
                });
                if done {
                    issue(&mut lh, &mut lh_rng, &mut bus, &mut bus_rng, &mut tasks, d, state.id, state.position, now);
                }
            }
        }
        if step % resend_steps == 0 && step > 0 {
            for d in &mut dispatch {
                if let Some(t) = &d.task {
                    if now - d.last_sent >= cfg.task_resend_period - 1e-9 {
                        send_task(&mut bus, t, now, &mut bus_rng);
                        d.last_sent = now;
                    }
                }
            }
        }

        // sensing snapshot
        let truth = world.robots.clone();
        let sensed: Vec<RobotState> = truth
            .iter()
            .map(|r| RobotState {
                position: noisy(r.position, noise.as_ref(), &mut sense_rng),
                velocity: noisy(r.velocity, noise.as_ref(), &mut sense_rng),
                ..*r
            })
            .collect();
        let obstacle_view: Vec<(Aabb, Vec3, &DynamicObstacle)> = world
            .obstacles
            .iter()
            .map(|o| {
                let p = noisy(o.position, noise.as_ref(), &mut sense_rng);
                let v = noisy(o.velocity, noise.as_ref(), &mut sense_rng);
                (o.shape.translated(p), v, o)
            })
            .collect();

        let mut commands = Vec::with_capacity(agents.len());
        let mut safety_rows = Vec::new();
        for (i, agent) in agents.iter_mut().enumerate() {
            let ego = &truth[i];
            for msg in bus.poll(i, now) {
                match msg.payload {
                    Payload::DesiredTrajectory { task_id, trajectory, .. } => {
                        if agent.assignment.as_ref().is_none_or(|a| task_id > a.task_id) {
                            agent.assignment = Some(Assignment { task_id, desired: trajectory });
                        }
                    }
                    Payload::PlanSuccess { robot, stamp } => {
                        if let Some(mh) = agent.mh.as_mut() {
                            mh.on_plan_success(robot, stamp);
                        }
                    }
                    Payload::StateReport { .. } => {}
                }
            }
            if (step + i as u64) % report_steps == 0 {
                let state = RobotState { ..sensed[i] };
                bus.send(i, CENTRAL, Payload::StateReport { state, time: now }, now, &mut bus_rng);
            }
            let teammates: Vec<RobotState> = sensed.iter().filter(|r| r.id != i).copied().collect();

            if let Some(mh) = agent.mh.as_mut() {
                if step % dsht_steps == 0 {
                    for t in &teammates {
                        if mh.record_teammate(ego, t, now) == AppendOutcome::SkippedOverlap {
                            overlap_skips += 1;
                        }
                    }
                }
                if let Some(a) = &agent.assignment {
                    if step % replan_steps == agent.replan_offset {
                        let seen: Vec<ObstacleObservation> = obstacle_view
                            .iter()
                            .enumerate()
                            .filter(|(_, (b, _, _))| b.center().distance(ego.position) <= cfg.mh.sensing_range)
                            .map(|(id, (b, v, _))| ObstacleObservation {
                                id,
                                position: b.center(),
                                velocity: *v,
                                half_extents: b.half_extents(),
                            })
                            .collect();
                        match mh.plan(now, ego, &teammates, &a.desired, &seen, &world.static_map) {
                            Ok(out) => {
                                mh_successes += 1;
                                let payload = Payload::PlanSuccess { robot: i, stamp: out.stamp };
                                bus.broadcast(i, (0..cfg.robots).filter(|&j| j != i), payload, now, &mut bus_rng);
                            }
                            Err(_) => mh_failures += 1,
                        }
                    }
                }
            }

            let reference = match (&agent.mh, &agent.assignment) {
                (Some(mh), _) => mh.reference_sample(now, agent.hold),
                (None, Some(a)) => a.desired.sample_clamped(now),
                (None, None) => crate::geometry::TrajSample { pos: agent.hold, vel: Vec3::ZERO, acc: Vec3::ZERO },
            };
            let a_des = pd_desired_acceleration(ego, &reference, &cfg.gains, cfg.world.a_max);
            let accel = if cfg.modules.sh {
                let near: Vec<(Aabb, Vec3)> = obstacle_view
                    .iter()
                    .filter(|(b, _, _)| b.distance_to_point(ego.position) <= sensing_reach)
                    .map(|(b, v, _)| (*b, *v))
                    .collect();
                let cells = buckets.nearest(ego.position, sensing_reach, cfg.sbc.max_static_cells * 4);
                let neighbors = collect_neighbors(ego, &teammates, &near, &cells, &cfg.sbc);
                let out = sbc_filter(a_des, ego, &neighbors, &cfg.sbc);
                if out.fallback {
                    sbc_fallbacks += 1;
                }
                safety_rows.push((i, out.constraints.len(), out.fallback, (a_des - out.accel).norm()));
                out.accel
            } else {
                safety_rows.push((i, 0, false, 0.0));
                a_des
            };
            commands.push(accel);
        }

        let applied = world.step(&commands)?;
        let t = world.time();
        let events = world.detect_collisions();

        for (i, r) in world.robots.iter().enumerate() {
            if let Some(k) = dispatch[i].record {
                let rec = &mut tasks[k];
                if rec.completion_time.is_none()
                    && rec.goal.distance(r.position) <= cfg.goal_tolerance
                    && r.velocity.norm() < cfg.settle_speed
                {
                    rec.completion_time = Some(t);
                }
            }
        }

        if let Some(l) = logs.as_mut() {
            if step % cfg.log_every as u64 == 0 {
                for (r, a) in world.robots.iter().zip(&applied) {
                    let (p, v) = (r.position, r.velocity);
                    writeln!(
                        l.trajectory,
                        "{t:.3},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                        r.id, p.x, p.y, p.z, v.x, v.y, v.z, a.x, a.y, a.z
                    )?;
                }
                for (i, n, fb, corr) in &safety_rows {
                    writeln!(l.safety, "{t:.3},{i},{n},{},{corr:.6}", u8::from(*fb))?;
                }
            }
            for e in &events {
                writeln!(l.collisions, "{:.3},{},{}", e.time, e.a, e.b)?;
            }
            if (step + 1) % plot_steps == 0 {
                for (i, r) in world.robots.iter().enumerate() {
                    if let Some(task) = &dispatch[i].task {
                        writeln!(l.plot, "{t:.3},{i},{:.6}", task.goal.distance(r.position))?;
                    }
                }
            }
        }
        collisions.extend(events);
    }

    let summaries: Vec<RobotSummary> = world
        .robots
        .iter()
        .enumerate()
        .map(|(i, r)| RobotSummary {
            robot: i,
            final_position: r.position,
            window_start_position: window_positions.as_ref().map(|w| w[i]),
            current_goal: dispatch[i].task.as_ref().map(|t| t.goal),
        })
        .collect();
    let mut report = compute_metrics(&tasks, &collisions, &summaries, cfg.goal_tolerance, cfg.deadlock_displacement);
    report.sbc_fallbacks = sbc_fallbacks;
    report.mh_successes = mh_successes;
    report.mh_failures = mh_failures;
    report.dsht_overlap_skips = overlap_skips;

    if let (Some(dir), Some(mut l)) = (out_dir, logs) {
        l.trajectory.flush()?;
        l.safety.flush()?;
        l.collisions.flush()?;
        l.plot.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("tasks.csv"))?);
        writeln!(w, "robot_id,task_id,goal_x,goal_y,goal_z,issue_time,completion_time")?;
        for t in &tasks {
            let done = t.completion_time.map_or_else(String::new, |c| format!("{c:.3}"));
            writeln!(w, "{},{},{:.6},{:.6},{:.6},{:.3},{done}", t.robot, t.task_id, t.goal.x, t.goal.y, t.goal.z, t.issue_time)?;
        }
        w.flush()?;
        fs::write(dir.join("metrics.csv"), format!("{}\n{}\n", MetricsReport::CSV_HEADER, report.csv_row()))?;
    }

    Ok(RunOutput { report, tasks, collisions, final_states: world.robots.clone(), bus: bus.stats() })
}
