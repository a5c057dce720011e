use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::{BehaviorBelief, MhConfig};
use crate::error::{NavError, Result};
use crate::geometry::{Aabb, Hyperplane, Vec3, VoxelMap};
use crate::lh::MOVES;

/// Edge cost weights: w_s per static hit, w_d per expected dynamic
/// collision, w_h per violated teammate plane, w_t per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWeights {
    pub static_hits: f64,
    pub dynamic: f64,
    pub dsht: f64,
    pub time: f64,
}

impl Default for SearchWeights {
    fn default() -> Self {
        Self { static_hits: 1000.0, dynamic: 1000.0, dsht: 10.0, time: 1.0 }
    }
}

/// Rolled-out positions of one obstacle under each likely behavior model.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedObstacle {
    pub half_extents: Vec3,
    pub sample_dt: f64,
    /// (probability, positions at `k * sample_dt` after the search start)
    pub rollouts: Vec<(f64, Vec<Vec3>)>,
}

impl PredictedObstacle {
    fn position(&self, rollout: usize, t: f64) -> Vec3 {
        let ps = &self.rollouts[rollout].1;
        let k = ((t / self.sample_dt).round().max(0.0) as usize).min(ps.len() - 1);
        ps[k]
    }
}

/// Models below this probability are not rolled out.
const MIN_MODEL_PROBABILITY: f64 = 0.01;

pub fn predict_obstacle(
    belief: &BehaviorBelief,
    position: Vec3,
    half_extents: Vec3,
    duration: f64,
    dt: f64,
) -> PredictedObstacle {
    let n = (duration / dt).ceil() as usize;
    let mut rollouts = Vec::new();
    for (m, &p) in belief.models.iter().zip(&belief.probabilities) {
        if p < MIN_MODEL_PROBABILITY {
            continue;
        }
        let mut pos = position;
        let mut ps = Vec::with_capacity(n + 1);
        ps.push(pos);
        for _ in 0..n {
            pos += m.movement.desired_velocity(pos) * dt;
            ps.push(pos);
        }
        rollouts.push((p, ps));
    }
    PredictedObstacle { half_extents, sample_dt: dt, rollouts }
}

pub struct SearchProblem<'a> {
    pub start: Vec3,
    pub goal: Vec3,
    pub static_map: &'a VoxelMap,
    pub obstacles: &'a [PredictedObstacle],
    /// Teammate planes, ego on the negative side.
    pub planes: &'a [Hyperplane],
    pub robot_half_extents: Vec3,
    /// Region the robot center must stay in.
    pub bounds: Option<Aabb>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    /// Lattice offset from the start, in primitive steps.
    pub offset: [i32; 3],
    pub depth: usize,
    pub position: Vec3,
    pub g: f64,
    pub parent: Option<usize>,
    pub static_hits: usize,
    pub dynamic_cost: f64,
    pub dsht_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Root first; node `k` is reached `k * primitive_duration` after the start.
    pub path: Vec<SearchNode>,
    pub reached_goal: bool,
    pub expansions: usize,
}

impl SearchResult {
    pub fn cost(&self) -> f64 {
        self.path.last().map_or(0.0, |n| n.g)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.path.iter().map(|n| n.position).collect()
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    /// straight-line distance to the goal, for tie-breaking only
    h: f64,
    depth: usize,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // max-heap: smallest f first, then smallest h, then deepest, then oldest
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(o.h.total_cmp(&self.h))
            .then(self.depth.cmp(&o.depth))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Obstacle boxes per half-primitive time slice, already inflated by the
/// robot's half extents, bucketed on a planar grid.
struct DynamicIndex {
    bucket: f64,
    slices: Vec<HashMap<[i64; 2], Vec<usize>>>,
    entries: Vec<(Aabb, f64, usize)>,
}

impl DynamicIndex {
    fn build(obstacles: &[PredictedObstacle], slices: usize, slice_dt: f64, inflate: Vec3) -> Self {
        let bucket = 2.0;
        let mut out = Self { bucket, slices: vec![HashMap::new(); slices], entries: Vec::new() };
        let mut key = 0;
        for ob in obstacles {
            for (r, (p, _)) in ob.rollouts.iter().enumerate() {
                for (j, slice) in out.slices.iter_mut().enumerate() {
                    let c = ob.position(r, j as f64 * slice_dt);
                    let b = Aabb::from_center_half_extents(c, ob.half_extents + inflate);
                    let (x0, x1) = ((b.min.x / bucket).floor() as i64, (b.max.x / bucket).floor() as i64);
                    let (y0, y1) = ((b.min.y / bucket).floor() as i64, (b.max.y / bucket).floor() as i64);
                    out.entries.push((b, *p, key));
                    let e = out.entries.len() - 1;
                    for x in x0..=x1 {
                        for y in y0..=y1 {
                            slice.entry([x, y]).or_default().push(e);
                        }
                    }
                }
                key += 1;
            }
        }
        out
    }

    /// Keys of the (obstacle, model) rollouts whose inflated box strictly
    /// contains `q` at slice `j`.
    fn hits(&self, j: usize, q: Vec3, out: &mut Vec<(usize, f64)>) {
        let Some(slice) = self.slices.get(j) else { return };
        let k = [(q.x / self.bucket).floor() as i64, (q.y / self.bucket).floor() as i64];
        if let Some(list) = slice.get(&k) {
            for &e in list {
                let (b, p, key) = &self.entries[e];
                if (0..3).all(|i| q[i] > b.min[i] && q[i] < b.max[i]) {
                    out.push((*key, *p));
                }
            }
        }
    }
}

fn chebyshev(a: [i32; 3], b: [i32; 3]) -> i32 {
    (0..3).map(|i| (a[i] - b[i]).abs()).max().unwrap_or(0)
}

/// Counts plane violations of a box centered at `p`.
pub(crate) fn plane_violations(planes: &[Hyperplane], p: Vec3, half: Vec3) -> usize {
    planes
        .iter()
        .filter(|h| h.normal.dot(p) + h.normal.abs().dot(half) > h.offset + 1e-9)
        .count()
}

/// Time-indexed best-first search over a lattice of constant-velocity
/// primitives (26 moves plus waiting). Returns the cheapest path to the goal
/// cell, or the best-progress path when the goal is out of reach within the
/// depth or expansion budget. Fails only when no node beyond the root exists.
pub fn spatiotemporal_search(problem: &SearchProblem<'_>, cfg: &MhConfig) -> Result<SearchResult> {
    let step = cfg.step_length();
    let tau = cfg.primitive_duration;
    let w = cfg.weights;
    let max_depth = cfg.max_depth();
    let rel = (problem.goal - problem.start) / step;
    let goal_off = [rel.x.round() as i32, rel.y.round() as i32, rel.z.round() as i32];
    let heur = |o: [i32; 3]| w.time * tau * chebyshev(o, goal_off) as f64;
    let pos_of = |o: [i32; 3]| problem.start + Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64) * step;
    let static_half = problem.robot_half_extents + Vec3::splat(cfg.static_margin);
    let dyn_half = problem.robot_half_extents + Vec3::splat(cfg.dynamic_margin);
    let in_bounds = |p: Vec3| problem.bounds.is_none_or(|b| b.contains_point(p, 1e-9));

    // static hits keyed on doubled lattice coordinates so midpoints are shared
    let mut static_memo: HashMap<[i32; 3], usize> = HashMap::new();
    let mut static_at = |twice: [i32; 3]| -> usize {
        *static_memo.entry(twice).or_insert_with(|| {
            let p = problem.start + Vec3::new(twice[0] as f64, twice[1] as f64, twice[2] as f64) * (0.5 * step);
            problem.static_map.count_in(&Aabb::from_center_half_extents(p, static_half))
        })
    };

    let dyn_index = DynamicIndex::build(problem.obstacles, 2 * max_depth + 1, 0.5 * tau, dyn_half);
    let mut hit_buf: Vec<(usize, f64)> = Vec::new();

    let root = SearchNode {
        offset: [0; 3],
        depth: 0,
        position: problem.start,
        g: 0.0,
        parent: None,
        static_hits: 0,
        dynamic_cost: 0.0,
        dsht_violations: 0,
    };
    let mut nodes = vec![root];
    let mut best_g: HashMap<([i32; 3], usize), f64> = HashMap::new();
    best_g.insert(([0; 3], 0), 0.0);
    let mut open = BinaryHeap::new();
    open.push(Open { f: heur([0; 3]), h: problem.start.distance(problem.goal), depth: 0, idx: 0 });
    let mut expansions = 0;
    let mut goal_idx = None;
    let mut depth_limited = None;

    while let Some(Open { idx, .. }) = open.pop() {
        let node = nodes[idx].clone();
        if best_g.get(&(node.offset, node.depth)).is_some_and(|&g| g < node.g) {
            continue;
        }
        if node.offset == goal_off {
            goal_idx = Some(idx);
            break;
        }
        if node.depth >= max_depth {
            // popped in f order, so no open node beats it on progress
            depth_limited = Some(idx);
            break;
        }
        if expansions >= cfg.max_expansions {
            break;
        }
        expansions += 1;
        let parent_in = in_bounds(node.position);
        for mv in MOVES.iter().copied().chain(std::iter::once([0, 0, 0])) {
            let off = [node.offset[0] + mv[0] as i32, node.offset[1] + mv[1] as i32, node.offset[2] + mv[2] as i32];
            let pos = pos_of(off);
            // the goal cell stands for the exact goal, which may sit nearer the bounds
            let checked = if off == goal_off { problem.goal } else { pos };
            if parent_in && !in_bounds(checked) {
                continue;
            }
            let mid = (node.position + pos) * 0.5;
            let twice_child = [2 * off[0], 2 * off[1], 2 * off[2]];
            let twice_mid = [node.offset[0] + off[0], node.offset[1] + off[1], node.offset[2] + off[2]];
            let hits = static_at(twice_mid) + static_at(twice_child);
            hit_buf.clear();
            dyn_index.hits(2 * node.depth + 1, mid, &mut hit_buf);
            dyn_index.hits(2 * node.depth + 2, pos, &mut hit_buf);
            hit_buf.sort_unstable_by_key(|h| h.0);
            hit_buf.dedup_by_key(|h| h.0);
            let dynamic: f64 = hit_buf.iter().map(|h| h.1).sum();
            let viol = plane_violations(problem.planes, pos, problem.robot_half_extents);
            let g = node.g
                + w.static_hits * hits as f64
                + w.dynamic * dynamic
                + w.dsht * viol as f64
                + w.time * tau;
            let key = (off, node.depth + 1);
            if best_g.get(&key).is_some_and(|&old| old <= g) {
                continue;
            }
            best_g.insert(key, g);
            let h = heur(off);
            let straight = pos.distance(problem.goal);
            nodes.push(SearchNode {
                offset: off,
                depth: node.depth + 1,
                position: pos,
                g,
                parent: Some(idx),
                static_hits: hits,
                dynamic_cost: dynamic,
                dsht_violations: viol,
            });
            open.push(Open { f: g + h, h: straight, depth: node.depth + 1, idx: nodes.len() - 1 });
        }
    }

    let (end, reached) = match goal_idx {
        Some(0) => {
            // already at the goal cell: a single primitive settles onto the exact goal
            nodes.push(SearchNode {
                offset: goal_off,
                depth: 1,
                position: problem.goal,
                g: w.time * tau,
                parent: Some(0),
                static_hits: 0,
                dynamic_cost: 0.0,
                dsht_violations: 0,
            });
            (nodes.len() - 1, true)
        }
        Some(i) => (i, true),
        None if depth_limited.is_some() => (depth_limited.unwrap_or_default(), false),
        None => {
            let best = nodes
                .iter()
                .enumerate()
                .skip(1)
                .min_by(|(_, a), (_, b)| {
                    (a.g + heur(a.offset))
                        .total_cmp(&(b.g + heur(b.offset)))
                        .then(b.depth.cmp(&a.depth))
                })
                .map(|(i, _)| i);
            match best {
                Some(i) => (i, false),
                None => return Err(NavError::PlanningFailed("search made no progress".into())),
            }
        }
    };
    let mut path = Vec::new();
    let mut cur = Some(end);
    while let Some(i) = cur {
        path.push(nodes[i].clone());
        cur = nodes[i].parent;
    }
    path.reverse();
    if reached {
        if let Some(last) = path.last_mut() {
            last.position = problem.goal;
        }
    }
    Ok(SearchResult { path, reached_goal: reached, expansions })
}
