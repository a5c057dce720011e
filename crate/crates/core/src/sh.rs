//! Short-horizon control: PD reference tracking followed by a minimally
//! invasive safety-barrier filter for double-integrator robots.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{Aabb, TrajSample, Vec3};
use crate::qp::{solve_qp, QpProblem, QpStatus};
use crate::sim::RobotState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self { kp: 4.0, kd: 4.0 }
    }
}

/// `acc_ref + kp (pos_ref - pos) + kd (vel_ref - vel)`, norm-clamped to `a_max`.
pub fn pd_desired_acceleration(state: &RobotState, reference: &TrajSample, gains: &PdGains, a_max: f64) -> Vec3 {
    let a = reference.acc + (reference.pos - state.position) * gains.kp + (reference.vel - state.velocity) * gains.kd;
    a.clamp_norm(a_max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbcParams {
    /// Added to the sum of bounding radii to form the safety distance.
    pub clearance: f64,
    /// Braking budget in the barrier, m/s².
    pub alpha: f64,
    /// Class-K gain on `h³`.
    pub gamma: f64,
    /// Entities whose surface distance exceeds this are ignored.
    pub activation_radius: f64,
    pub a_max: f64,
    /// Responsibility share for teammates that run the same filter.
    pub teammate_share: f64,
    pub max_static_cells: usize,
}

impl SbcParams {
    pub fn with_a_max(a_max: f64) -> Self {
        Self {
            clearance: 0.1,
            alpha: 0.5 * a_max,
            gamma: 1.0,
            activation_radius: 3.0,
            a_max,
            teammate_share: 0.5,
            max_static_cells: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborKind {
    Teammate,
    Obstacle,
    Static,
}

/// Something to keep away from, reduced to a bounding sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub position: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub kind: NeighborKind,
}

impl Neighbor {
    pub fn teammate(r: &RobotState) -> Self {
        Self { position: r.position, velocity: r.velocity, radius: r.radius(), kind: NeighborKind::Teammate }
    }

    /// Dynamic obstacle with a world-frame box moving at `velocity`.
    pub fn obstacle(world_box: &Aabb, velocity: Vec3) -> Self {
        Self { position: world_box.center(), velocity, radius: world_box.bounding_radius(), kind: NeighborKind::Obstacle }
    }

    /// Static cell as a stationary point at its closest point to `ego`.
    pub fn static_cell(cell: &Aabb, ego: Vec3) -> Self {
        Self { position: cell.closest_point(ego), velocity: Vec3::ZERO, radius: 0.0, kind: NeighborKind::Static }
    }
}

/// Linear constraint `row · a ≤ bound` on the ego acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbcConstraint {
    pub row: Vec3,
    pub bound: f64,
}

impl SbcConstraint {
    pub fn violation(&self, a: Vec3) -> f64 {
        self.row.dot(a) - self.bound
    }
}

/// Barrier value `h = sqrt(4α(‖Δp‖ - Ds)) + Δp̂·Δv`.
pub fn barrier_value(ego_pos: Vec3, ego_vel: Vec3, other: &Neighbor, ego_radius: f64, params: &SbcParams) -> f64 {
    let dp = ego_pos - other.position;
    let d = dp.norm();
    let ds = ego_radius + other.radius + params.clearance;
    (4.0 * params.alpha * (d - ds).max(0.0)).sqrt() + (dp / d).dot(ego_vel - other.velocity)
}

const MIN_MARGIN: f64 = 1e-6;

/// Barrier constraint for one neighbor, or `None` when out of range.
pub fn sbc_constraint(ego: &RobotState, other: &Neighbor, params: &SbcParams) -> Option<SbcConstraint> {
    let r_ego = ego.radius();
    let dp = ego.position - other.position;
    let d = dp.norm();
    if d - r_ego - other.radius > params.activation_radius || d < 1e-9 {
        return None;
    }
    let n = dp / d;
    let dv = ego.velocity - other.velocity;
    let ds = r_ego + other.radius + params.clearance;
    let margin = (d - ds).max(MIN_MARGIN);
    let root = (4.0 * params.alpha * margin).sqrt();
    let closing = n.dot(dv);
    let h = root + closing;
    let share = match other.kind {
        NeighborKind::Teammate => params.teammate_share,
        NeighborKind::Obstacle | NeighborKind::Static => 1.0,
    };
    let rhs = params.gamma * h * h * h + (dv.norm_squared() - closing * closing) / d + 2.0 * params.alpha * closing / root;
    Some(SbcConstraint { row: -n, bound: share * rhs })
}

/// Filter output with diagnostics for the safety log.
#[derive(Debug, Clone, PartialEq)]
pub struct SbcOutput {
    pub accel: Vec3,
    pub constraints: Vec<SbcConstraint>,
    /// Set when no safe acceleration within `a_max` was found and the
    /// braking fallback was used instead.
    pub fallback: bool,
}

impl SbcOutput {
    pub fn max_violation(&self) -> f64 {
        self.constraints.iter().map(|c| c.violation(self.accel)).fold(0.0, f64::max)
    }
}

/// Gathers neighbors: teammates (excluding the ego id), dynamic obstacles as
/// `(world box, velocity)`, and the nearest static cells.
pub fn collect_neighbors(
    ego: &RobotState,
    teammates: &[RobotState],
    obstacles: &[(Aabb, Vec3)],
    static_cells: &[Aabb],
    params: &SbcParams,
) -> Vec<Neighbor> {
    let mut out: Vec<Neighbor> = teammates.iter().filter(|t| t.id != ego.id).map(Neighbor::teammate).collect();
    out.extend(obstacles.iter().map(|(b, v)| Neighbor::obstacle(b, *v)));
    let mut cells: Vec<Neighbor> = static_cells.iter().map(|c| Neighbor::static_cell(c, ego.position)).collect();
    cells.sort_by(|a, b| (a.position - ego.position).norm_squared().total_cmp(&(b.position - ego.position).norm_squared()));
    // cells sharing a closest point give identical constraints
    cells.dedup_by(|a, b| (a.position - b.position).norm() < 1e-9);
    cells.truncate(params.max_static_cells);
    out.extend(cells);
    out
}

fn project(target: Vec3, constraints: &[SbcConstraint]) -> Option<Vec3> {
    if constraints.iter().all(|c| c.violation(target) <= 0.0) {
        return Some(target);
    }
    let m = constraints.len();
    let mut a = DMatrix::zeros(m, 3);
    let mut b = DVector::zeros(m);
    for (i, c) in constraints.iter().enumerate() {
        a[(i, 0)] = c.row.x;
        a[(i, 1)] = c.row.y;
        a[(i, 2)] = c.row.z;
        b[i] = c.bound;
    }
    let p = DMatrix::identity(3, 3) * 2.0;
    let q = DVector::from_column_slice(&(target * -2.0).to_array());
    let prob = QpProblem::inequality_only(p, q, a, b).expect("well-formed SBC program");
    let sol = solve_qp(&prob, 1e-10, 200);
    (sol.status == QpStatus::Optimal).then(|| Vec3::new(sol.x[0], sol.x[1], sol.x[2]))
}

/// Minimally invasive filter: the acceleration closest to `a_des` that
/// satisfies every barrier constraint. When the closest one exceeds `a_max`
/// the target is shrunk towards zero. If even the minimum-norm safe
/// acceleration is too large it is applied clamped to `a_max`; if the
/// program is infeasible the robot pushes away from the violated
/// constraints, weighted by violation. Both count as fallbacks.
pub fn sbc_filter(a_des: Vec3, ego: &RobotState, neighbors: &[Neighbor], params: &SbcParams) -> SbcOutput {
    let constraints: Vec<SbcConstraint> = neighbors.iter().filter_map(|n| sbc_constraint(ego, n, params)).collect();
    if constraints.is_empty() {
        return SbcOutput { accel: a_des, constraints, fallback: false };
    }
    let mut min_norm = None;
    for scale in [1.0, 0.5, 0.0] {
        match project(a_des * scale, &constraints) {
            Some(a) if a.norm() <= params.a_max + 1e-9 => {
                return SbcOutput { accel: a.clamp_norm(params.a_max), constraints, fallback: false };
            }
            Some(a) => min_norm = Some(a),
            None => break,
        }
    }
    let accel = match min_norm {
        Some(a) => a.clamp_norm(params.a_max),
        None => {
            let push = constraints.iter().fold(Vec3::ZERO, |acc, c| acc - c.row * c.violation(Vec3::ZERO).max(0.0));
            if push.norm() > 1e-12 {
                push.normalized() * params.a_max
            } else {
                -ego.velocity.normalized() * params.a_max
            }
        }
    };
    SbcOutput { accel, constraints, fallback: true }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn robot(id: usize, p: Vec3, v: Vec3) -> RobotState {
        RobotState { id, position: p, velocity: v, shape: Aabb::cube_with_diagonal(Vec3::ZERO, 0.6) }
    }

    #[test]
    fn pd_examples() {
        let s = robot(0, Vec3::ZERO, Vec3::ZERO);
        let g = PdGains { kp: 4.0, kd: 2.0 };
        let on = TrajSample { pos: Vec3::ZERO, vel: Vec3::ZERO, acc: Vec3::ZERO };
        assert_eq!(pd_desired_acceleration(&s, &on, &g, 5.0), Vec3::ZERO);
        let off = TrajSample { pos: Vec3::new(1.0, 0.0, 0.0), ..on };
        assert!((pd_desired_acceleration(&s, &off, &g, 5.0) - Vec3::new(4.0, 0.0, 0.0)).norm() < 1e-12);
        let far = TrajSample { pos: Vec3::new(100.0, 50.0, 0.0), ..on };
        assert!((pd_desired_acceleration(&s, &far, &g, 5.0).norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn no_neighbors_passes_through() {
        let p = SbcParams::with_a_max(4.0);
        let ego = robot(0, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        let a = Vec3::new(0.3, -1.0, 2.0);
        let far = robot(1, Vec3::new(50.0, 0.0, 0.0), Vec3::ZERO);
        let out = sbc_filter(a, &ego, &[Neighbor::teammate(&far)], &p);
        assert_eq!(out.accel, a);
        assert!(out.constraints.is_empty());
    }

    #[test]
    fn head_on_pushes_apart() {
        let p = SbcParams::with_a_max(4.0);
        let ego = robot(0, Vec3::ZERO, Vec3::new(1.5, 0.0, 0.0));
        let other = robot(1, Vec3::new(1.4, 0.0, 0.0), Vec3::new(-1.5, 0.0, 0.0));
        let out = sbc_filter(Vec3::new(1.0, 0.0, 0.0), &ego, &[Neighbor::teammate(&other)], &p);
        // Δp̂ = p_ego - p_other points along -x; pushing apart is a negative x accel.
        let n = (ego.position - other.position).normalized();
        assert!(n.dot(out.accel) >= 0.0);
        assert!(!out.fallback);
        assert!(out.max_violation() <= 1e-6);
    }

    #[test]
    fn distant_stationary_pair_unchanged() {
        let p = SbcParams::with_a_max(4.0);
        let ego = robot(0, Vec3::ZERO, Vec3::ZERO);
        let other = robot(1, Vec3::new(2.5, 0.0, 0.0), Vec3::ZERO);
        let out = sbc_filter(Vec3::ZERO, &ego, &[Neighbor::teammate(&other)], &p);
        assert_eq!(out.constraints.len(), 1);
        assert_eq!(out.accel, Vec3::ZERO);
    }

    #[test]
    fn mirrored_configurations_mirror_outputs() {
        let p = SbcParams::with_a_max(4.0);
        let a = robot(0, Vec3::new(-0.8, 0.1, 0.0), Vec3::new(1.2, 0.0, 0.0));
        let b = robot(1, Vec3::new(0.8, -0.1, 0.0), Vec3::new(-1.2, 0.0, 0.0));
        let des = Vec3::new(2.0, 0.0, 0.0);
        let oa = sbc_filter(des, &a, &[Neighbor::teammate(&b)], &p);
        let ob = sbc_filter(-des, &b, &[Neighbor::teammate(&a)], &p);
        assert!((oa.accel + ob.accel).norm() < 1e-9);
    }

    #[test]
    fn static_cells_are_capped_and_deduplicated() {
        let p = SbcParams::with_a_max(4.0);
        let ego = robot(0, Vec3::ZERO, Vec3::ZERO);
        let cells: Vec<Aabb> = (0..20)
            .map(|k| Aabb::new(Vec3::new(1.0, k as f64 * 0.5 - 5.0, -0.25), Vec3::new(1.5, k as f64 * 0.5 - 4.5, 0.25)))
            .collect();
        let n = collect_neighbors(&ego, &[], &[], &cells, &p);
        assert_eq!(n.len(), 8);
        assert!(n.iter().all(|x| x.kind == NeighborKind::Static));
    }
}
