use crate::geometry::{PiecewiseTrajectory, Vec3};

const TIME_STEP: f64 = 0.05;

/// Picks the local goal on the desired trajectory: the latest point within
/// the horizon that a straight line at `speed` can reach in time. If the
/// desired trajectory has ended its endpoint is used; if nothing is
/// reachable in time, the latest point within `speed * horizon`, and failing
/// that the closest point on the trajectory. Returns the goal and the
/// time at which it should be reached.
pub fn select_goal(desired: &PiecewiseTrajectory, position: Vec3, now: f64, horizon: f64, speed: f64) -> (Vec3, f64) {
    let end = desired.end_time();
    if end <= now {
        let g = desired.end_point();
        return (g, now + g.distance(position) / speed);
    }
    let hi = (now + horizon).min(end);
    let lo = now.max(desired.start_time).min(hi);
    let n = ((hi - lo) / TIME_STEP).ceil() as usize;
    for k in 0..=n {
        let t = (hi - k as f64 * TIME_STEP).max(lo);
        let p = desired.sample_clamped(t).pos;
        if p.distance(position) <= speed * (t - now) + 1e-9 {
            return (p, t);
        }
    }
    // behind schedule: latest point within a horizon's reach
    let n = ((hi - desired.start_time) / TIME_STEP).ceil() as usize;
    for k in 0..=n {
        let t = (hi - k as f64 * TIME_STEP).max(desired.start_time);
        let p = desired.sample_clamped(t).pos;
        if p.distance(position) <= speed * horizon {
            return (p, now + p.distance(position) / speed);
        }
    }
    let g = closest_point(desired, position);
    (g, now + g.distance(position) / speed)
}

fn closest_point(traj: &PiecewiseTrajectory, p: Vec3) -> Vec3 {
    let mut best = traj.start_point();
    let mut best_d = best.distance(p);
    for piece in &traj.pieces {
        if piece.degree() == 1 {
            let (a, b) = (piece.first(), piece.last());
            let ab = b - a;
            let l2 = ab.norm_squared();
            let u = if l2 > 0.0 { ((p - a).dot(ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
            let q = a + ab * u;
            if q.distance(p) < best_d {
                best_d = q.distance(p);
                best = q;
            }
        } else {
            let n = 200;
            for k in 0..=n {
                let (q, _, _) = piece.evaluate_local(piece.duration * k as f64 / n as f64);
                if q.distance(p) < best_d {
                    best_d = q.distance(p);
                    best = q;
                }
            }
        }
    }
    best
}
