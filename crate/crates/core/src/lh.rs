//! Centralized long-horizon planning: random goals and A* desired
//! trajectories against the prior static map.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;

use crate::error::{NavError, Result};
use crate::geometry::{Aabb, BezierPiece, PiecewiseTrajectory, VoxelMap, Vec3};

/// Discretization used by the A* search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub cell: f64,
    pub bounds: Aabb,
    /// Robot bounding-sphere radius (plus any clearance) used to inflate obstacles.
    pub inflation: f64,
}

impl GridSpec {
    pub fn dims(&self) -> [usize; 3] {
        let s = self.bounds.size();
        [
            ((s.x / self.cell).floor() as usize).max(1),
            ((s.y / self.cell).floor() as usize).max(1),
            ((s.z / self.cell).floor() as usize).max(1),
        ]
    }

    pub fn center(&self, c: [usize; 3]) -> Vec3 {
        self.bounds.min + Vec3::new(c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5) * self.cell
    }

    /// Cell containing `p`, clamped into the grid.
    pub fn cell_of(&self, p: Vec3) -> [usize; 3] {
        let d = self.dims();
        let rel = (p - self.bounds.min) / self.cell;
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        [clampi(rel.x, d[0]), clampi(rel.y, d[1]), clampi(rel.z, d[2])]
    }

    fn linear(&self, c: [usize; 3]) -> usize {
        let d = self.dims();
        (c[2] * d[1] + c[1]) * d[0] + c[0]
    }

    fn unlinear(&self, i: usize) -> [usize; 3] {
        let d = self.dims();
        [i % d[0], (i / d[0]) % d[1], i / (d[0] * d[1])]
    }
}

/// Free/blocked flag per grid cell: a cell is free when a sphere of radius
/// `inflation` at its center touches no occupied voxel.
#[derive(Debug, Clone)]
pub struct FreeGrid {
    pub spec: GridSpec,
    free: Vec<bool>,
}

impl FreeGrid {
    pub fn build(map: &VoxelMap, spec: GridSpec) -> Self {
        let d = spec.dims();
        let mut free = vec![true; d[0] * d[1] * d[2]];
        for (i, f) in free.iter_mut().enumerate() {
            let c = spec.center(spec.unlinear(i));
            let probe = Aabb::from_center_half_extents(c, Vec3::splat(spec.inflation));
            *f = map.query(&probe).iter().all(|b| b.distance_to_point(c) >= spec.inflation);
            // zero inflation still has to keep the center itself out of a cell
            if spec.inflation == 0.0 && map.is_occupied(map.cell_of(c)) {
                *f = false;
            }
        }
        Self { spec, free }
    }

    pub fn is_free(&self, c: [usize; 3]) -> bool {
        self.free[self.spec.linear(c)]
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    pub fn is_point_free(&self, p: Vec3) -> bool {
        self.spec.bounds.contains_point(p, 0.0) && self.is_free(self.spec.cell_of(p))
    }

    /// Uniformly sampled free cell center.
    pub fn sample_goal<R: Rng>(&self, rng: &mut R) -> Result<Vec3> {
        let n = self.free_count();
        if n == 0 {
            return Err(NavError::NoFreeCell);
        }
        let k = rng.random_range(0..n);
        let idx = self.free.iter().enumerate().filter(|(_, f)| **f).nth(k).map(|(i, _)| i).unwrap();
        Ok(self.spec.center(self.spec.unlinear(idx)))
    }

    /// Neighbor offsets that do not cut corners: every axis-aligned component
    /// step of a diagonal move must be free as well.
    pub fn neighbors(&self, c: [usize; 3]) -> impl Iterator<Item = ([usize; 3], [i64; 3])> + '_ {
        let d = self.spec.dims();
        let shift = move |c: [usize; 3], o: [i64; 3]| -> Option<[usize; 3]> {
            let mut out = [0usize; 3];
            for a in 0..3 {
                let v = c[a] as i64 + o[a];
                if v < 0 || v >= d[a] as i64 {
                    return None;
                }
                out[a] = v as usize;
            }
            Some(out)
        };
        MOVES.iter().filter_map(move |&o| {
            let n = shift(c, o)?;
            if !self.is_free(n) {
                return None;
            }
            let axes = o.iter().filter(|v| **v != 0).count();
            if axes > 1 {
                for a in 0..3 {
                    if o[a] != 0 {
                        let mut single = [0i64; 3];
                        single[a] = o[a];
                        if !self.is_free(shift(c, single)?) {
                            return None;
                        }
                    }
                }
            }
            Some((n, o))
        })
    }

    /// Nearest free cell by breadth-first search over the grid.
    fn nearest_free(&self, c: [usize; 3]) -> Option<[usize; 3]> {
        if self.is_free(c) {
            return Some(c);
        }
        let d = self.spec.dims();
        let mut seen = vec![false; self.free.len()];
        let mut queue = VecDeque::from([c]);
        seen[self.spec.linear(c)] = true;
        while let Some(cur) = queue.pop_front() {
            for o in MOVES.iter() {
                let mut n = [0usize; 3];
                let mut ok = true;
                for a in 0..3 {
                    let v = cur[a] as i64 + o[a];
                    if v < 0 || v >= d[a] as i64 {
                        ok = false;
                        break;
                    }
                    n[a] = v as usize;
                }
                if !ok || seen[self.spec.linear(n)] {
                    continue;
                }
                if self.is_free(n) {
                    return Some(n);
                }
                seen[self.spec.linear(n)] = true;
                queue.push_back(n);
            }
        }
        None
    }
}

/// The 26 neighbor offsets in a fixed order.
pub const MOVES: [[i64; 3]; 26] = {
    let mut out = [[0i64; 3]; 26];
    let mut k = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if !(dx == 0 && dy == 0 && dz == 0) {
                    out[k] = [dx, dy, dz];
                    k += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    out
};

/// Edge cost of a move in cell units, from the count of nonzero axes.
pub fn move_cost_units(o: [i64; 3]) -> f64 {
    match o.iter().filter(|v| **v != 0).count() {
        1 => 1.0,
        2 => std::f64::consts::SQRT_2,
        _ => 3f64.sqrt(),
    }
}

/// Cost of a cell path, computed from its move-type counts so that equal
/// mathematical costs compare exactly equal.
pub fn cell_path_cost(cells: &[[usize; 3]], cell: f64) -> f64 {
    let mut counts = [0u64; 3];
    for w in cells.windows(2) {
        let axes = (0..3).filter(|&a| w[0][a] != w[1][a]).count();
        counts[axes - 1] += 1;
    }
    cell * (counts[0] as f64 + counts[1] as f64 * std::f64::consts::SQRT_2 + counts[2] as f64 * 3f64.sqrt())
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    index: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for OpenEntry {}
impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: reverse so the smallest (f, h, index) pops first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(o.h.total_cmp(&self.h)).then(o.index.cmp(&self.index))
    }
}

/// A* over the free grid. Returns the cell sequence from `start` to `goal`.
pub fn astar_cells(grid: &FreeGrid, start: [usize; 3], goal: [usize; 3]) -> Result<Vec<[usize; 3]>> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return Err(NavError::Unreachable);
    }
    let spec = &grid.spec;
    let n = grid.free.len();
    let goal_p = spec.center(goal);
    let heuristic = |c: [usize; 3]| (spec.center(c) - goal_p).norm() / spec.cell;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = spec.linear(start);
    g[s] = 0.0;
    open.push(OpenEntry { f: heuristic(start), h: heuristic(start), index: s });
    let mut last_f = f64::NEG_INFINITY;
    while let Some(OpenEntry { f, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        debug_assert!(f >= last_f - 1e-9, "A* expanded f decreased: {f} < {last_f}");
        last_f = f;
        let c = spec.unlinear(index);
        if c == goal {
            let mut cells = vec![c];
            let mut cur = index;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                cells.push(spec.unlinear(cur));
            }
            cells.reverse();
            return Ok(cells);
        }
        for (nb, o) in grid.neighbors(c) {
            let ni = spec.linear(nb);
            if closed[ni] {
                continue;
            }
            let cand = g[index] + move_cost_units(o);
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = index;
                let h = heuristic(nb);
                open.push(OpenEntry { f: cand + h, h, index: ni });
            }
        }
    }
    Err(NavError::Unreachable)
}

fn drop_collinear(points: Vec<Vec3>) -> Vec<Vec3> {
    let mut out: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if let Some(&last) = out.last() {
            if (p - last).norm() < 1e-12 {
                continue;
            }
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let d1 = (b - a).normalized();
            let d2 = (p - b).normalized();
            if (d1 - d2).norm() < 1e-9 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

/// Shortest 26-connected grid path, returned as waypoints beginning at the
/// exact `start` and ending at the exact `goal`, collinear runs merged. If the
/// start cell is blocked the path first leaves to the nearest free cell.
pub fn plan_grid_path(start: Vec3, goal: Vec3, grid: &FreeGrid) -> Result<Vec<Vec3>> {
    let goal_cell = grid.spec.cell_of(goal);
    if !grid.is_free(goal_cell) {
        return Err(NavError::Unreachable);
    }
    let start_cell = grid.nearest_free(grid.spec.cell_of(start)).ok_or(NavError::Unreachable)?;
    let cells = astar_cells(grid, start_cell, goal_cell)?;
    let mut pts = Vec::with_capacity(cells.len() + 2);
    pts.push(start);
    if cells.len() > 2 || start_cell != grid.spec.cell_of(start) {
        let skip_first = usize::from(start_cell == grid.spec.cell_of(start));
        for c in &cells[skip_first..cells.len() - 1] {
            pts.push(grid.spec.center(*c));
        }
    }
    pts.push(goal);
    Ok(drop_collinear(pts))
}

pub fn path_length(waypoints: &[Vec3]) -> f64 {
    waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// One linear piece per segment with duration `length / nominal_speed`.
/// A zero-length path becomes a one-second hold.
pub fn path_to_trajectory(waypoints: &[Vec3], nominal_speed: f64, issue_time: f64) -> Result<PiecewiseTrajectory> {
    if waypoints.is_empty() {
        return Err(NavError::InvalidTrajectory("empty waypoint list".into()));
    }
    if !(nominal_speed > 0.0) {
        return Err(NavError::Config("nominal speed must be > 0".into()));
    }
    let mut pieces = Vec::new();
    for w in waypoints.windows(2) {
        let len = (w[1] - w[0]).norm();
        if len > 1e-12 {
            pieces.push(BezierPiece::new(vec![w[0], w[1]], len / nominal_speed)?);
        }
    }
    if pieces.is_empty() {
        return Ok(PiecewiseTrajectory::hold(waypoints[0], issue_time, 1.0));
    }
    PiecewiseTrajectory::new(pieces, issue_time)
}

/// Samples a goal uniformly from the free cells of `grid` built over `prior_map`.
pub fn sample_goal<R: Rng>(prior_map: &VoxelMap, grid: GridSpec, rng: &mut R) -> Result<Vec3> {
    FreeGrid::build(prior_map, grid).sample_goal(rng)
}

/// A navigation task: a goal and the desired trajectory towards it.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub robot: usize,
    pub id: u64,
    pub goal: Vec3,
    pub issue_time: f64,
    pub desired: PiecewiseTrajectory,
}

/// Central planner state: the prior map's free grid and task counter.
#[derive(Debug, Clone)]
pub struct LongHorizonPlanner {
    pub grid: FreeGrid,
    pub nominal_speed: f64,
    next_id: u64,
}

impl LongHorizonPlanner {
    pub fn new(prior_map: &VoxelMap, spec: GridSpec, nominal_speed: f64) -> Self {
        Self { grid: FreeGrid::build(prior_map, spec), nominal_speed, next_id: 0 }
    }

    /// Draws goals until one is reachable from `position` and issues a task.
    pub fn issue_task<R: Rng>(&mut self, robot: usize, position: Vec3, now: f64, rng: &mut R) -> Result<Task> {
        let grid = self.grid.clone();
        self.issue_task_from(robot, position, now, rng, &grid)
    }

    /// Like [`Self::issue_task`] but with goals drawn from `goals`, which may
    /// know more about free space than the prior map does.
    pub fn issue_task_from<R: Rng>(
        &mut self,
        robot: usize,
        position: Vec3,
        now: f64,
        rng: &mut R,
        goals: &FreeGrid,
    ) -> Result<Task> {
        for _ in 0..100 {
            let goal = goals.sample_goal(rng)?;
            if (goal - position).norm() < 1.0 {
                continue;
            }
            match plan_grid_path(position, goal, &self.grid) {
                Ok(path) => {
                    let desired = path_to_trajectory(&path, self.nominal_speed, now)?;
                    let id = self.next_id;
                    self.next_id += 1;
                    return Ok(Task { robot, id, goal, issue_time: now, desired });
                }
                Err(NavError::Unreachable) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(NavError::Unreachable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(n: f64) -> GridSpec {
        GridSpec { cell: 1.0, bounds: Aabb::new(Vec3::new(-0.5, -0.5, -0.5), Vec3::new(n - 0.5, n - 0.5, 0.5)), inflation: 0.3 }
    }

    #[test]
    fn straight_line_on_empty_map() {
        let g = spec(10.0);
        let map = VoxelMap::new(1.0, g.bounds);
        let grid = FreeGrid::build(&map, g);
        let path = plan_grid_path(Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0), &grid).unwrap();
        assert_eq!(path, vec![Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0)]);
        assert!((path_length(&path) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn sealed_goal_is_unreachable() {
        let g = GridSpec { cell: 1.0, bounds: Aabb::new(Vec3::ZERO, Vec3::new(9.0, 9.0, 1.0)), inflation: 0.0 };
        let mut map = VoxelMap::new(1.0, g.bounds);
        // ring of walls around cell (5,5,0)
        for (x, y) in [(4, 4), (5, 4), (6, 4), (4, 5), (6, 5), (4, 6), (5, 6), (6, 6)] {
            map.insert_box(&Aabb::new(Vec3::new(x as f64, y as f64, 0.0), Vec3::new(x as f64 + 1.0, y as f64 + 1.0, 1.0)));
        }
        let grid = FreeGrid::build(&map, g);
        let r = plan_grid_path(Vec3::new(0.5, 0.5, 0.5), Vec3::new(5.5, 5.5, 0.5), &grid);
        assert_eq!(r, Err(NavError::Unreachable));
    }

    #[test]
    fn durations_follow_segment_lengths() {
        let t = path_to_trajectory(&[Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0)], 1.0, 0.0).unwrap();
        assert_eq!(t.pieces.len(), 1);
        assert!((t.total_duration() - 5.0).abs() < 1e-12);
        let l = path_to_trajectory(&[Vec3::ZERO, Vec3::new(3.0, 0.0, 0.0), Vec3::new(3.0, 4.0, 0.0)], 2.0, 1.0).unwrap();
        assert!((l.pieces[0].duration - 1.5).abs() < 1e-12);
        assert!((l.pieces[1].duration - 2.0).abs() < 1e-12);
        let hold = path_to_trajectory(&[Vec3::ZERO, Vec3::ZERO], 1.0, 0.0).unwrap();
        assert_eq!(hold.total_duration(), 1.0);
    }

    #[test]
    fn sample_goal_edge_cases() {
        let g = GridSpec { cell: 1.0, bounds: Aabb::new(Vec3::ZERO, Vec3::new(3.0, 1.0, 1.0)), inflation: 0.0 };
        let mut map = VoxelMap::new(1.0, g.bounds);
        map.insert_box(&Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)));
        map.insert_box(&Aabb::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(3.0, 1.0, 1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            assert_eq!(sample_goal(&map, g, &mut rng).unwrap(), Vec3::new(1.5, 0.5, 0.5));
        }
        map.insert_box(&g.bounds);
        assert_eq!(sample_goal(&map, g, &mut rng), Err(NavError::NoFreeCell));
    }

    #[test]
    fn blocked_start_escapes_to_free_cell() {
        let g = GridSpec { cell: 1.0, bounds: Aabb::new(Vec3::ZERO, Vec3::new(10.0, 3.0, 1.0)), inflation: 0.6 };
        let mut map = VoxelMap::new(1.0, g.bounds);
        map.insert_box(&Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0)));
        let grid = FreeGrid::build(&map, g);
        let start = Vec3::new(1.6, 0.5, 0.5);
        assert!(!grid.is_point_free(start));
        let path = plan_grid_path(start, Vec3::new(8.5, 1.5, 0.5), &grid).unwrap();
        assert_eq!(path[0], start);
        assert_eq!(*path.last().unwrap(), Vec3::new(8.5, 1.5, 0.5));
    }
}
