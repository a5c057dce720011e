//! Independent oracles and scenario drivers shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::cmp::Reverse;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tiernav::geometry::{Aabb, Hyperplane, PiecewiseTrajectory, Vec3, VoxelMap};
use tiernav::lh::{cell_path_cost, FreeGrid, GridSpec};
use tiernav::mh::{
    optimize_spline, spatiotemporal_search, DshtStore, MhConfig, PredictedObstacle, SearchProblem, SplineResult,
};
use tiernav::qp::{kkt_residual, solve_qp, QpProblem};
use tiernav::sh::{collect_neighbors, pd_desired_acceleration, sbc_filter, PdGains, SbcParams};
use tiernav::sim::{MessageBus, Payload, RobotState, World, WorldConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cube(half: f64) -> Aabb {
    Aabb::from_center_half_extents(Vec3::ZERO, Vec3::splat(half))
}

// ---------------------------------------------------------------- QP oracles

pub struct QpCheck {
    pub kkt: f64,
    /// Distance to the oracle minimizer.
    pub distance: f64,
}

fn random_spd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Diagonal Hessian with box bounds: the minimizer is the clamped
/// unconstrained optimum, coordinate by coordinate.
pub fn box_qp_case<R: Rng>(rng: &mut R) -> QpCheck {
    let n = rng.random_range(1..=12);
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.5)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
    let mut a = DMatrix::zeros(2 * n, n);
    let mut b = DVector::zeros(2 * n);
    for i in 0..n {
        a[(2 * i, i)] = 1.0;
        b[2 * i] = hi[i];
        a[(2 * i + 1, i)] = -1.0;
        b[2 * i + 1] = -lo[i];
    }
    let p = QpProblem::inequality_only(DMatrix::from_diagonal(&DVector::from_vec(d.clone())), DVector::from_vec(q.clone()), a, b)
        .unwrap();
    let sol = solve_qp(&p, 1e-10, 500);
    assert!(sol.is_optimal(), "box QP not solved: {:?}", sol.status);
    let expect = DVector::from_fn(n, |i, _| (-q[i] / d[i]).clamp(lo[i], hi[i]));
    QpCheck { kkt: kkt_residual(&p, &sol.x, &sol.multipliers), distance: (&sol.x - expect).norm() }
}

/// Equality-only QP: the minimizer solves the KKT linear system directly.
pub fn equality_qp_case<R: Rng>(rng: &mut R) -> QpCheck {
    let n = rng.random_range(2..=12);
    let m = rng.random_range(1..n);
    let p = random_spd(n, rng);
    let q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p);
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&q));
    rhs.rows_mut(n, m).copy_from(&b);
    let exact = kkt.lu().solve(&rhs).expect("KKT system of a full-rank random problem is regular");
    let prob = QpProblem::new(p, q, DMatrix::zeros(0, n), DVector::zeros(0), a, b).unwrap();
    let sol = solve_qp(&prob, 1e-10, 500);
    assert!(sol.is_optimal(), "equality QP not solved: {:?}", sol.status);
    QpCheck { kkt: kkt_residual(&prob, &sol.x, &sol.multipliers), distance: (&sol.x - exact.rows(0, n)).norm() }
}

/// Two-dimensional QP with random half-planes inside a box, compared with a
/// enumeration of the free, edge and vertex candidates.
pub fn planar_qp_case<R: Rng>(rng: &mut R) -> QpCheck {
    let p = random_spd(2, rng);
    let q = DVector::from_fn(2, |_, _| rng.random_range(-4.0..4.0));
    let extra = rng.random_range(0..=4);
    // box |x|,|y| <= 2 plus half-planes that keep the origin strictly feasible
    let mut rows: Vec<([f64; 2], f64)> = vec![([1.0, 0.0], 2.0), ([-1.0, 0.0], 2.0), ([0.0, 1.0], 2.0), ([0.0, -1.0], 2.0)];
    for _ in 0..extra {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        rows.push(([th.cos(), th.sin()], rng.random_range(0.2..1.5)));
    }
    let a = DMatrix::from_fn(rows.len(), 2, |i, j| rows[i].0[j]);
    let b = DVector::from_fn(rows.len(), |i, _| rows[i].1);
    let prob = QpProblem::inequality_only(p.clone(), q.clone(), a, b).unwrap();
    let sol = solve_qp(&prob, 1e-10, 500);
    assert!(sol.is_optimal(), "planar QP not solved: {:?}", sol.status);

    // in 2D the optimum is the free minimum, a minimum on one constraint line,
    // or a vertex of two lines; enumerate them all and keep the best feasible
    let f = |x: f64, y: f64| 0.5 * (p[(0, 0)] * x * x + 2.0 * p[(0, 1)] * x * y + p[(1, 1)] * y * y) + q[0] * x + q[1] * y;
    let feasible = |x: f64, y: f64| rows.iter().all(|(r, c)| r[0] * x + r[1] * y <= c + 1e-9);
    let (p00, p01, p11) = (p[(0, 0)], p[(0, 1)], p[(1, 1)]);
    let det = p00 * p11 - p01 * p01;
    let mut candidates = vec![((-p11 * q[0] + p01 * q[1]) / det, (p01 * q[0] - p00 * q[1]) / det)];
    for (r, c) in &rows {
        // x = c r + t d with d perpendicular to r
        let (x0, y0, dx, dy) = (c * r[0], c * r[1], -r[1], r[0]);
        let curv = p00 * dx * dx + 2.0 * p01 * dx * dy + p11 * dy * dy;
        let slope = (p00 * x0 + p01 * y0 + q[0]) * dx + (p01 * x0 + p11 * y0 + q[1]) * dy;
        let t = -slope / curv;
        candidates.push((x0 + t * dx, y0 + t * dy));
    }
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let ((r1, c1), (r2, c2)) = (rows[i], rows[j]);
            let d = r1[0] * r2[1] - r1[1] * r2[0];
            if d.abs() > 1e-12 {
                candidates.push(((c1 * r2[1] - c2 * r1[1]) / d, (r1[0] * c2 - r2[0] * c1) / d));
            }
        }
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (x, y) in candidates {
        if feasible(x, y) && f(x, y) < best.0 {
            best = (f(x, y), x, y);
        }
    }
    let oracle = DVector::from_vec(vec![best.1, best.2]);
    QpCheck { kkt: kkt_residual(&prob, &sol.x, &sol.multipliers), distance: (&sol.x - oracle).norm() }
}

// ------------------------------------------------------------ grid search

/// Random pillar map on a small grid; start and goal are drawn from free cells.
pub fn random_grid<R: Rng>(rng: &mut R) -> (FreeGrid, [usize; 3], [usize; 3]) {
    let nx = rng.random_range(4..=14) as f64;
    let ny = rng.random_range(4..=14) as f64;
    let nz = rng.random_range(1..=4) as f64;
    let bounds = Aabb::new(Vec3::ZERO, Vec3::new(nx, ny, nz));
    let mut map = VoxelMap::new(0.5, bounds);
    let fill: f64 = rng.random_range(0.0..0.35);
    for i in 0..nx as i64 {
        for j in 0..ny as i64 {
            for k in 0..nz as i64 {
                if rng.random_bool(fill) {
                    let lo = Vec3::new(i as f64, j as f64, k as f64);
                    map.insert_box(&Aabb::new(lo, lo + Vec3::splat(1.0)));
                }
            }
        }
    }
    let grid = FreeGrid::build(&map, GridSpec { cell: 1.0, bounds, inflation: 0.0 });
    let d = grid.spec.dims();
    let pick = |rng: &mut R| loop {
        let c = [rng.random_range(0..d[0]), rng.random_range(0..d[1]), rng.random_range(0..d[2])];
        if grid.is_free(c) {
            break Some(c);
        }
    };
    // at least one free cell is needed; refill a fully blocked draw
    if grid.free_count() == 0 {
        return random_grid(rng);
    }
    let s = pick(rng).unwrap();
    let g = pick(rng).unwrap();
    (grid, s, g)
}

/// Dijkstra over the same transition relation as the planner: returns the
/// cheapest cell path or `None` when the goal is unreachable.
pub fn dijkstra_cells(grid: &FreeGrid, start: [usize; 3], goal: [usize; 3]) -> Option<Vec<[usize; 3]>> {
    #[derive(PartialEq, PartialOrd)]
    struct Key(f64);
    impl Eq for Key {}
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }
    let mut dist: HashMap<[usize; 3], f64> = HashMap::new();
    let mut parent: HashMap<[usize; 3], [usize; 3]> = HashMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0.0);
    heap.push(Reverse((Key(0.0), start)));
    while let Some(Reverse((Key(d), c))) = heap.pop() {
        if dist.get(&c).is_some_and(|&best| d > best) {
            continue;
        }
        if c == goal {
            let mut path = vec![goal];
            let mut cur = goal;
            while let Some(&p) = parent.get(&cur) {
                path.push(p);
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        for (n, _) in grid.neighbors(c) {
            let nd = d + cell_path_cost(&[c, n], 1.0);
            if dist.get(&n).is_none_or(|&old| nd < old) {
                dist.insert(n, nd);
                parent.insert(n, c);
                heap.push(Reverse((Key(nd), n)));
            }
        }
    }
    None
}

// ------------------------------------------------------ spline instances

pub struct SplineInstance {
    pub points: Vec<Vec3>,
    pub start_vel: Vec3,
    pub planes: Vec<Hyperplane>,
    pub map: VoxelMap,
    pub half: Vec3,
}

/// Lattice path from the real search on a random pillar field, with a
/// couple of random teammate planes.
pub fn spline_instance<R: Rng>(rng: &mut R, cfg: &MhConfig) -> SplineInstance {
    let bounds = Aabb::new(Vec3::new(-6.0, -6.0, 0.0), Vec3::new(6.0, 6.0, 3.0));
    let mut map = VoxelMap::new(0.25, bounds);
    let half = Vec3::splat(0.2);
    for _ in 0..rng.random_range(0..6) {
        let c = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), 1.5);
        if c.x.hypot(c.y) < 1.0 {
            continue;
        }
        let s = rng.random_range(0.25..0.6);
        map.insert_box(&Aabb::from_center_half_extents(c, Vec3::new(s, s, 1.5)));
    }
    let start = Vec3::new(0.0, 0.0, 1.5);
    let goal = loop {
        let g = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(0.6..2.4));
        if !map.any_in(&Aabb::from_center_half_extents(g, half + Vec3::splat(0.1))) {
            break g;
        }
    };
    let mut planes = Vec::new();
    for k in 0..rng.random_range(0..3) {
        let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = Vec3::new(th.cos(), th.sin(), 0.0);
        // keep the start on the ego side with some slack
        let offset = normal.dot(start) + normal.abs().dot(half) + rng.random_range(0.5..3.0);
        planes.push(Hyperplane { normal, offset, stamp: k as f64 * 0.1 });
    }
    let obstacles: Vec<PredictedObstacle> = Vec::new();
    let problem = SearchProblem {
        start,
        goal,
        static_map: &map,
        obstacles: &obstacles,
        planes: &planes,
        robot_half_extents: half,
        bounds: Some(Aabb::new(bounds.min + half, bounds.max - half)),
    };
    let path = spatiotemporal_search(&problem, cfg).expect("search always yields progress in open space");
    let v = cfg.v_ref * 0.8;
    let start_vel = Vec3::new(rng.random_range(-v..v), rng.random_range(-v..v), rng.random_range(-v..v) * 0.2);
    SplineInstance { points: path.positions(), start_vel, planes, map, half }
}

pub struct SplineCheck {
    pub hull_violation: f64,
    pub plane_violation: f64,
    pub vel_excess: f64,
    pub acc_excess: f64,
}

/// Direct linear checks on the control points plus 1 kHz derivative samples.
pub fn check_spline(inst: &SplineInstance, out: &SplineResult, cfg: &MhConfig) -> SplineCheck {
    let respected: Vec<&Hyperplane> = inst
        .planes
        .iter()
        .filter(|h| inst.points.iter().all(|p| h.normal.dot(*p) + h.normal.abs().dot(inst.half) <= h.offset + 1e-9))
        .collect();
    let mut hull = 0.0f64;
    let mut plane = 0.0f64;
    for (piece, corridor) in out.trajectory.pieces.iter().zip(&out.corridors) {
        for cp in &piece.control_points {
            let r = &corridor.region;
            for i in 0..3 {
                hull = hull.max(r.min[i] - cp[i]).max(cp[i] - r.max[i]);
            }
            for h in &respected {
                plane = plane.max(h.normal.dot(*cp) + h.normal.abs().dot(inst.half) - h.offset);
            }
        }
    }
    let (vel, acc) = derivative_excess(&out.trajectory, cfg);
    SplineCheck { hull_violation: hull, plane_violation: plane, vel_excess: vel, acc_excess: acc }
}

fn derivative_excess(tr: &PiecewiseTrajectory, cfg: &MhConfig) -> (f64, f64) {
    let n = (tr.total_duration() * 1000.0).floor() as usize;
    let mut v = 0.0f64;
    let mut a = 0.0f64;
    for k in 0..=n {
        let s = tr.evaluate(tr.start_time + k as f64 * 1e-3).unwrap();
        v = v.max(s.vel.max_abs() - cfg.v_ref);
        a = a.max(s.acc.max_abs() - cfg.a_ref);
    }
    (v, a)
}

pub fn run_spline_instance<R: Rng>(rng: &mut R, cfg: &MhConfig) -> Option<SplineCheck> {
    let inst = spline_instance(rng, cfg);
    let out = optimize_spline(&inst.points, inst.start_vel, 0.0, &inst.planes, &inst.map, inst.half, cfg).ok()?;
    Some(check_spline(&inst, &out, cfg))
}

// ------------------------------------------------------- SBC encounters

pub struct Encounter {
    pub min_distance: f64,
    pub safety_distance: f64,
    pub fallback: bool,
    /// Largest constraint violation of a non-fallback output.
    pub max_violation: f64,
}

/// Two filtered robots swapping sides at 200 Hz.
pub fn sbc_encounter<R: Rng>(rng: &mut R) -> Encounter {
    let a_max = 4.0;
    let v_max = 2.0;
    let params = SbcParams::with_a_max(a_max);
    let shape = cube(0.6 / (2.0 * 3f64.sqrt()));
    let radius = shape.bounding_radius();
    let ds = 2.0 * radius + params.clearance;
    let gains = PdGains::default();
    let (robots, goals) = loop {
        let a = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0));
        let b = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..1.0));
        if a.distance(b) <= ds + 0.2 {
            continue;
        }
        let mut vel = || {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3));
            v.clamp_norm(rng.random_range(0.0..v_max))
        };
        let robots = vec![
            RobotState { id: 0, position: a, velocity: vel(), shape },
            RobotState { id: 1, position: b, velocity: vel(), shape },
        ];
        // start inside the safe set of the barrier
        let n = (robots[0].position - robots[1].position) / a.distance(b);
        let h = (4.0 * params.alpha * (a.distance(b) - ds)).sqrt() + n.dot(robots[0].velocity - robots[1].velocity);
        if h < 0.0 {
            continue;
        }
        let jitter = |rng: &mut R| Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
        let goals = [b + jitter(rng), a + jitter(rng)];
        break (robots, goals);
    };
    let config = WorldConfig { dt_physics: 0.005, a_max, v_max, ..WorldConfig::default() };
    let map = VoxelMap::new(0.25, Aabb::new(Vec3::splat(-50.0), Vec3::splat(50.0)));
    let mut world = World::new(config, robots, Vec::new(), map).unwrap();
    let mut out = Encounter { min_distance: f64::INFINITY, safety_distance: ds, fallback: false, max_violation: 0.0 };
    for _ in 0..1600 {
        let snapshot = world.robots.clone();
        let mut cmds = Vec::with_capacity(2);
        for (i, ego) in snapshot.iter().enumerate() {
            let reference = tiernav::geometry::TrajSample { pos: goals[i], vel: Vec3::ZERO, acc: Vec3::ZERO };
            let a_des = pd_desired_acceleration(ego, &reference, &gains, a_max);
            let neighbors = collect_neighbors(ego, &snapshot, &[], &[], &params);
            let f = sbc_filter(a_des, ego, &neighbors, &params);
            if f.fallback {
                out.fallback = true;
            } else {
                out.max_violation = out.max_violation.max(f.max_violation());
            }
            cmds.push(f.accel);
        }
        world.step(&cmds).unwrap();
        out.min_distance = out.min_distance.min(world.robots[0].position.distance(world.robots[1].position));
    }
    out
}

// ------------------------------------------------------ DSHT protocol

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DshtEvent {
    Append { ego: usize, time: f64 },
    Prune { ego: usize, from: usize, stamp: f64 },
}

pub struct DshtRun {
    /// Bus events (appends and deliveries) checked, and those that held.
    pub checked: usize,
    pub held: usize,
    pub stores: [DshtStore; 2],
    /// Every delivered plan notice, per receiver, in delivery order.
    pub delivered: [Vec<(usize, f64)>; 2],
    pub robots_at_end: [RobotState; 2],
    /// Full append/prune history for replays.
    pub events: Vec<DshtEvent>,
    /// Robot states at each append time.
    pub states: BTreeMap<u64, [RobotState; 2]>,
}

/// Both stores share at least one plane for the pair: same stamp, opposite
/// normals.
pub fn shares_plane(stores: &[DshtStore; 2]) -> bool {
    let a = stores[0].planes(1);
    let b = stores[1].planes(0);
    a.iter().any(|p| b.iter().any(|q| p.stamp == q.stamp && (p.normal + q.normal).norm() < 1e-9))
}

/// Two robots circling each other for `duration` s; planes every 0.1 s,
/// plans every 0.5 s (staggered), plan notices over a lossy bus.
pub fn dsht_protocol_run(seed: u64, drop: f64, delay_high: f64, duration: f64) -> DshtRun {
    let dt = 0.005;
    let shape = cube(0.2);
    let mut bus = MessageBus::new(drop, 0.0, delay_high);
    let mut r = rng(seed);
    let mut stores = [DshtStore::new(), DshtStore::new()];
    let mut delivered: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
    let mut events = Vec::new();
    let mut states = BTreeMap::new();
    let (mut checked, mut held) = (0, 0);
    let steps = (duration / dt).round() as u64;
    let pos = |i: usize, t: f64| {
        let ph = t * 0.4 + i as f64 * std::f64::consts::PI;
        Vec3::new(2.0 * ph.cos(), 2.0 * ph.sin(), 1.0 + 0.3 * (t * 0.7 + i as f64).sin())
    };
    let state = |i: usize, t: f64| RobotState { id: i, position: pos(i, t), velocity: Vec3::ZERO, shape };
    let check = |stores: &[DshtStore; 2], checked: &mut usize, held: &mut usize| {
        *checked += 1;
        if shares_plane(stores) {
            *held += 1;
        }
    };
    for step in 0..=steps {
        let now = step as f64 * dt;
        for ego in 0..2 {
            for m in bus.poll(ego, now) {
                if let Payload::PlanSuccess { robot, stamp } = m.payload {
                    stores[ego].prune(robot, stamp);
                    delivered[ego].push((robot, stamp));
                    events.push(DshtEvent::Prune { ego, from: robot, stamp });
                    check(&stores, &mut checked, &mut held);
                }
            }
        }
        if step % 20 == 0 {
            let s = [state(0, now), state(1, now)];
            for ego in 0..2 {
                stores[ego].append(&s[ego], &s[1 - ego], now);
                events.push(DshtEvent::Append { ego, time: now });
            }
            states.insert(step, s);
            check(&stores, &mut checked, &mut held);
        }
        for ego in 0..2 {
            if step % 100 == 20 * ego as u64 + 20 {
                bus.send(ego, 1 - ego, Payload::PlanSuccess { robot: ego, stamp: now }, now, &mut r);
            }
        }
    }
    DshtRun {
        checked,
        held,
        stores,
        delivered,
        robots_at_end: [state(0, duration), state(1, duration)],
        events,
        states,
    }
}

/// Rebuilds one robot's store from the run's appends followed by `notices`
/// applied in the given order.
pub fn replay_store(run: &DshtRun, ego: usize, notices: &[(usize, f64)]) -> DshtStore {
    let mut store = DshtStore::new();
    for (step, s) in &run.states {
        store.append(&s[ego], &s[1 - ego], *step as f64 * 0.005);
    }
    for &(from, stamp) in notices {
        store.prune(from, stamp);
    }
    store
}
