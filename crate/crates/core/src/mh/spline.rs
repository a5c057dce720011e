use nalgebra::{DMatrix, DVector};

use super::search::plane_violations;
use super::MhConfig;
use crate::error::{NavError, Result};
use crate::geometry::{Aabb, BezierPiece, Hyperplane, PiecewiseTrajectory, Vec3, VoxelMap};
use crate::qp::{solve_qp_warm, QpProblem};

const DEGREE: usize = 5;
const NCP: usize = DEGREE + 1;
const CHECK_TOL: f64 = 1e-6;
const GROWTH_STEP: f64 = 0.05;

/// Region the robot center must stay in while a piece is flown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corridor {
    pub region: Aabb,
    pub start_time: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineResult {
    pub trajectory: PiecewiseTrajectory,
    /// One corridor per piece.
    pub corridors: Vec<Corridor>,
    pub planes_used: usize,
    pub objective: f64,
}

/// Splits the path into runs of identical steps; returns (first index, last index).
fn segments(points: &[Vec3]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut begin = 0;
    for k in 1..points.len() {
        let last = k + 1 == points.len();
        if last || (points[k + 1] - points[k] - (points[k] - points[k - 1])).max_abs() > 1e-9 {
            out.push((begin, k));
            begin = k;
        }
    }
    out
}

/// Grows the box spanned by a path segment face by face, up to `reach`,
/// without letting the robot body pick up static cells it did not already touch.
fn free_corridor(a: Vec3, b: Vec3, reach: f64, map: &VoxelMap, half: Vec3) -> Aabb {
    let base = Aabb::new(a.min(b), a.max(b));
    let body = |r: &Aabb| Aabb::new(r.min - half, r.max + half);
    let allowed = map.count_in(&body(&base));
    let mut region = base;
    let mut grown = [0.0f64; 6];
    let mut active = [true; 6];
    while active.iter().any(|&x| x) {
        for face in 0..6 {
            if !active[face] {
                continue;
            }
            let next = (grown[face] + GROWTH_STEP).min(reach);
            let mut trial = region;
            let axis = face / 2;
            let coord = match axis {
                0 => if face % 2 == 0 { &mut trial.min.x } else { &mut trial.max.x },
                1 => if face % 2 == 0 { &mut trial.min.y } else { &mut trial.max.y },
                _ => if face % 2 == 0 { &mut trial.min.z } else { &mut trial.max.z },
            };
            let delta = next - grown[face];
            *coord += if face % 2 == 0 { -delta } else { delta };
            if delta <= 0.0 || map.count_in(&body(&trial)) > allowed {
                active[face] = false;
                continue;
            }
            region = trial;
            grown[face] = next;
        }
    }
    region
}

/// Integral of the squared second derivative of a quintic per unit control
/// point coordinate, as a 6x6 matrix, for a piece of duration `t`.
fn acceleration_energy(t: f64) -> [[f64; NCP]; NCP] {
    const BINOM3: [f64; 4] = [1.0, 3.0, 3.0, 1.0];
    const BINOM6: [f64; 7] = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
    // second difference: row i has 1, -2, 1 at columns i, i+1, i+2
    let mut out = [[0.0; NCP]; NCP];
    let scale = 400.0 / (t * t * t);
    for i in 0..4 {
        for j in 0..4 {
            let m = BINOM3[i] * BINOM3[j] / (BINOM6[i + j] * 7.0);
            for (a, ca) in [(i, 1.0), (i + 1, -2.0), (i + 2, 1.0)] {
                for (b, cb) in [(j, 1.0), (j + 1, -2.0), (j + 2, 1.0)] {
                    out[a][b] += scale * m * ca * cb;
                }
            }
        }
    }
    out
}

struct Builder {
    p: DMatrix<f64>,
    q: DVector<f64>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
}

/// Control points written as `m z + c` in the free parameters `z`, which
/// builds the boundary and continuity equalities in by construction.
struct Param {
    m: DMatrix<f64>,
    c: DVector<f64>,
    /// Free parameters of a straight-segment guess, used as warm start.
    guess: DVector<f64>,
}

/// Per axis the free parameters are P2..P5 of the first piece and P3..P5 of
/// later ones, minus the last piece's P4, P5 which sit at the goal. Start
/// position and velocity fix P0, P1; C0-C2 fix each later piece's P0..P2.
fn parametrize(s: &Setup<'_>, axes: &[usize]) -> Param {
    let na = axes.len();
    let nseg = s.segs.len();
    let per_axis = 3 * nseg - 1;
    let nz = na * per_axis;
    let n = nseg * NCP * na;
    let mut m = DMatrix::zeros(n, nz);
    let mut c = DVector::zeros(n);
    let mut guess = DVector::zeros(nz);
    let d = DEGREE as f64;
    for (slot, &axis) in axes.iter().enumerate() {
        let mut next_z = slot * per_axis;
        // (coefficients over z, constant) for each control point of the previous piece
        let mut prev: Vec<(DVector<f64>, f64)> = Vec::new();
        for seg in 0..nseg {
            let (a, b) = s.segs[seg];
            let (pa, pb) = (s.points[a][axis], s.points[b][axis]);
            let t = s.durations[seg];
            let mut cur: Vec<(DVector<f64>, f64)> = Vec::with_capacity(NCP);
            let zero = || DVector::zeros(nz);
            if seg == 0 {
                cur.push((zero(), pa));
                cur.push((zero(), pa + s.start_vel[axis] * t / d));
            } else {
                let r = t / s.durations[seg - 1];
                let (p3, p4, p5) = (&prev[3], &prev[4], &prev[5]);
                let p0 = p5.clone();
                let p1 = (&p5.0 + (&p5.0 - &p4.0) * r, p5.1 + (p5.1 - p4.1) * r);
                let curv = (&p5.0 - &p4.0 * 2.0 + &p3.0, p5.1 - 2.0 * p4.1 + p3.1);
                let p2 = (&p1.0 * 2.0 - &p0.0 + &curv.0 * (r * r), 2.0 * p1.1 - p0.1 + curv.1 * r * r);
                cur.push(p0);
                cur.push(p1);
                cur.push(p2);
            }
            let last = seg + 1 == nseg;
            for j in cur.len()..NCP {
                if last && j >= 4 {
                    cur.push((zero(), pb));
                } else {
                    let mut v = zero();
                    v[next_z] = 1.0;
                    guess[next_z] = pa + (pb - pa) * j as f64 / d;
                    next_z += 1;
                    cur.push((v, 0.0));
                }
            }
            for (j, (coef, k)) in cur.iter().enumerate() {
                let row = (seg * NCP + j) * na + slot;
                m.set_row(row, &coef.transpose());
                c[row] = *k;
            }
            prev = cur;
        }
        debug_assert_eq!(next_z, (slot + 1) * per_axis);
    }
    Param { m, c, guess }
}

struct Setup<'a> {
    points: &'a [Vec3],
    segs: &'a [(usize, usize)],
    durations: &'a [f64],
    regions: &'a [Aabb],
    planes: &'a [Hyperplane],
    start_vel: Vec3,
    half: Vec3,
    cfg: &'a MhConfig,
}

/// Objective and inequalities over the given axes, in control points laid
/// out as `(segment * 6 + control point) * axes.len() + axis slot`.
fn build(s: &Setup<'_>, axes: &[usize]) -> Builder {
    let na = axes.len();
    let nseg = s.segs.len();
    let n = nseg * NCP * na;
    let idx = |seg: usize, j: usize, a: usize| (seg * NCP + j) * na + a;
    let mut b = Builder { p: DMatrix::zeros(n, n), q: DVector::zeros(n), ineq: Vec::new() };
    let d = DEGREE as f64;
    for (seg, &(_, last)) in s.segs.iter().enumerate() {
        let t = s.durations[seg];
        let e = acceleration_energy(t);
        for (slot, &axis) in axes.iter().enumerate() {
            for i in 0..NCP {
                for j in 0..NCP {
                    b.p[(idx(seg, i, slot), idx(seg, j, slot))] += 2.0 * e[i][j];
                }
            }
            if seg + 1 < nseg {
                let k = idx(seg, DEGREE, slot);
                b.p[(k, k)] += 2.0 * s.cfg.tracking_weight;
                b.q[k] -= 2.0 * s.cfg.tracking_weight * s.points[last][axis];
            }
            // corridor
            let (lo, hi) = (s.regions[seg].min[axis], s.regions[seg].max[axis]);
            for j in 0..NCP {
                b.ineq.push((vec![(idx(seg, j, slot), 1.0)], hi));
                b.ineq.push((vec![(idx(seg, j, slot), -1.0)], -lo));
            }
            // velocity hodograph
            let kv = d / t;
            for j in 0..DEGREE {
                let row = vec![(idx(seg, j + 1, slot), kv), (idx(seg, j, slot), -kv)];
                let neg = row.iter().map(|&(c, v)| (c, -v)).collect();
                b.ineq.push((row, s.cfg.v_ref));
                b.ineq.push((neg, s.cfg.v_ref));
            }
            // acceleration hodograph
            let ka = d * (d - 1.0) / (t * t);
            for j in 0..DEGREE - 1 {
                let row = vec![(idx(seg, j, slot), ka), (idx(seg, j + 1, slot), -2.0 * ka), (idx(seg, j + 2, slot), ka)];
                let neg = row.iter().map(|&(c, v)| (c, -v)).collect();
                b.ineq.push((row, s.cfg.a_ref));
                b.ineq.push((neg, s.cfg.a_ref));
            }
        }
        for h in s.planes {
            let bound = h.offset - h.normal.abs().dot(s.half);
            // planes the whole corridor already satisfies add nothing
            let region = &s.regions[seg];
            let worst = h.normal.dot(region.center()) + h.normal.abs().dot(region.half_extents());
            if worst <= bound {
                continue;
            }
            for j in 0..NCP {
                let row = axes.iter().enumerate().map(|(slot, &axis)| (idx(seg, j, slot), h.normal[axis])).collect();
                b.ineq.push((row, bound));
            }
        }
    }
    b
}

/// Fits a quintic Bézier spline to the search path: one piece per run of
/// identical primitives, minimizing acceleration energy plus a pull towards
/// the run endpoints. The spline starts at the path root with `start_vel`,
/// ends at rest at the last path point, stays C2, keeps every control point
/// inside its free corridor and on the ego side of every plane the path
/// itself respects, and bounds the velocity and acceleration hodographs
/// per axis. A wider corridor is tried once if the first fit is infeasible.
pub fn optimize_spline(
    points: &[Vec3],
    start_vel: Vec3,
    start_time: f64,
    planes: &[Hyperplane],
    static_map: &VoxelMap,
    robot_half: Vec3,
    cfg: &MhConfig,
) -> Result<SplineResult> {
    if points.len() < 2 {
        return Err(NavError::PlanningFailed("spline needs at least two path points".into()));
    }
    if start_vel.max_abs() > cfg.v_ref + 1e-12 {
        return Err(NavError::PlanningFailed("start velocity exceeds the reference bound".into()));
    }
    let segs = segments(points);
    let base: Vec<f64> = segs.iter().map(|&(a, b)| (b - a) as f64 * cfg.primitive_duration).collect();
    let respected: Vec<Hyperplane> = planes
        .iter()
        .filter(|h| points.iter().all(|&p| plane_violations(std::slice::from_ref(*h), p, robot_half) == 0))
        .copied()
        .collect();
    let mut last_err = NavError::PlanningFailed("spline fit infeasible".into());
    // the last piece gets one extra primitive to come to rest; later
    // attempts widen the corridor and then slow the whole spline down
    for (cells, stretch) in [(1.0, 1.0), (2.0, 1.0), (2.0, 1.5)] {
        let mut durations: Vec<f64> = base.iter().map(|d| d * stretch).collect();
        if let Some(d) = durations.last_mut() {
            *d += cfg.primitive_duration;
        }
        let reach = (cells * cfg.step_length() - robot_half.max_abs()).max(0.0);
        let regions: Vec<Aabb> = segs
            .iter()
            .map(|&(a, b)| free_corridor(points[a], points[b], reach, static_map, robot_half))
            .collect();
        let setup = Setup {
            points,
            segs: &segs,
            durations: &durations,
            regions: &regions,
            planes: &respected,
            start_vel,
            half: robot_half,
            cfg,
        };
        match fit(&setup) {
            Ok((cps, objective)) => {
                let mut pieces = Vec::with_capacity(segs.len());
                let mut corridors = Vec::with_capacity(segs.len());
                let mut t = start_time;
                for (seg, c) in cps.into_iter().enumerate() {
                    pieces.push(BezierPiece::new(c, durations[seg])?);
                    corridors.push(Corridor { region: regions[seg], start_time: t, end_time: t + durations[seg] });
                    t += durations[seg];
                }
                let trajectory = PiecewiseTrajectory::new(pieces, start_time)?;
                return Ok(SplineResult { trajectory, corridors, planes_used: respected.len(), objective });
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn fit(s: &Setup<'_>) -> Result<(Vec<Vec<Vec3>>, f64)> {
    let nseg = s.segs.len();
    let mut cps = vec![vec![Vec3::ZERO; NCP]; nseg];
    let mut objective = 0.0;
    let groups: Vec<Vec<usize>> = if s.planes.is_empty() { vec![vec![0], vec![1], vec![2]] } else { vec![vec![0, 1, 2]] };
    for axes in groups {
        let b = build(s, &axes);
        let par = parametrize(s, &axes);
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(b.ineq.len());
        for (coeffs, rhs) in &b.ineq {
            let mut row = DVector::zeros(par.m.ncols());
            let mut shift = 0.0;
            for &(k, v) in coeffs {
                row.axpy(v, &par.m.row(k).transpose(), 1.0);
                shift += v * par.c[k];
            }
            let bound = rhs - shift;
            if row.amax() <= 1e-12 {
                // fixed by the boundary conditions alone
                if bound < -CHECK_TOL {
                    return Err(NavError::PlanningFailed("boundary conditions leave the corridor or limits".into()));
                }
                continue;
            }
            rows.push((row, bound));
        }
        let nz = par.m.ncols();
        let a = DMatrix::from_fn(rows.len(), nz, |i, j| rows[i].0[j]);
        let bz = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        let pz = par.m.transpose() * &b.p * &par.m;
        let pz = (&pz + pz.transpose()) * 0.5;
        let qz = par.m.transpose() * (&b.p * &par.c + &b.q);
        let qp = QpProblem::inequality_only(pz, qz, a, bz)?;
        let sol = solve_qp_warm(&qp, &par.guess, s.cfg.qp_tolerance, s.cfg.qp_max_iter);
        if !sol.is_optimal() {
            return Err(NavError::PlanningFailed(format!("spline qp ended with {:?}", sol.status)));
        }
        let x = &par.m * &sol.x + &par.c;
        objective += 0.5 * x.dot(&(&b.p * &x)) + b.q.dot(&x);
        let sol = crate::qp::QpSolution { x, ..sol };
        let na = axes.len();
        for (seg, piece) in cps.iter_mut().enumerate() {
            for (j, cp) in piece.iter_mut().enumerate() {
                for (slot, &axis) in axes.iter().enumerate() {
                    let v = sol.x[(seg * NCP + j) * na + slot];
                    match axis {
                        0 => cp.x = v,
                        1 => cp.y = v,
                        _ => cp.z = v,
                    }
                }
            }
        }
    }
    verify(s, &cps)?;
    Ok((cps, objective))
}

/// Re-checks the hull conditions on the recovered control points.
fn verify(s: &Setup<'_>, cps: &[Vec<Vec3>]) -> Result<()> {
    for (seg, c) in cps.iter().enumerate() {
        let piece = BezierPiece::new(c.clone(), s.durations[seg])?;
        let inside = c.iter().all(|&p| s.regions[seg].contains_point(p, CHECK_TOL));
        let vel = piece.velocity_points().iter().all(|v| v.max_abs() <= s.cfg.v_ref + CHECK_TOL);
        let acc = piece.acceleration_points().iter().all(|a| a.max_abs() <= s.cfg.a_ref + CHECK_TOL);
        let planes = c.iter().all(|&p| {
            s.planes.iter().all(|h| h.normal.dot(p) + h.normal.abs().dot(s.half) <= h.offset + CHECK_TOL)
        });
        if !(inside && vel && acc && planes) {
            return Err(NavError::PlanningFailed("spline solution violates its constraints".into()));
        }
    }
    Ok(())
}
