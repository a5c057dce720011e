use std::collections::VecDeque;

use rand::Rng;

use crate::error::{NavError, Result};
use crate::geometry::{Aabb, Vec3, VoxelMap};
use crate::lh::{FreeGrid, GridSpec};
use crate::sim::{BehaviorModel, DynamicObstacle, MovementModel};

const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub pillars: usize,
    /// Side length range of the square pillar footprint.
    pub size: (f64, f64),
    pub min_spacing: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { pillars: 40, size: (0.5, 1.0), min_spacing: 1.5 }
    }
}

/// Full-height square pillars at rejection-sampled positions.
pub fn generate_forest<R: Rng>(bounds: &Aabb, params: &ForestParams, resolution: f64, rng: &mut R) -> Result<VoxelMap> {
    let mut map = VoxelMap::new(resolution, *bounds);
    let mut centers: Vec<(f64, f64)> = Vec::with_capacity(params.pillars);
    let mut rejections = 0;
    while centers.len() < params.pillars {
        let side = rng.random_range(params.size.0..=params.size.1);
        let (lo, hi) = (bounds.min + Vec3::splat(side / 2.0), bounds.max - Vec3::splat(side / 2.0));
        if lo.x > hi.x || lo.y > hi.y {
            return Err(NavError::Generation("pillars do not fit in the arena".into()));
        }
        let x = rng.random_range(lo.x..=hi.x);
        let y = rng.random_range(lo.y..=hi.y);
        let spaced = centers.iter().all(|&(cx, cy)| ((cx - x).powi(2) + (cy - y).powi(2)).sqrt() >= params.min_spacing);
        if !spaced {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(NavError::Generation(format!(
                    "could not place pillar {} of {} after {MAX_REJECTIONS} rejections",
                    centers.len() + 1,
                    params.pillars
                )));
            }
            continue;
        }
        centers.push((x, y));
        let h = side / 2.0;
        map.insert_box(&Aabb::new(Vec3::new(x - h, y - h, bounds.min.z), Vec3::new(x + h, y + h, bounds.max.z)));
    }
    Ok(map)
}

/// Walls of a generated maze.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeLayout {
    pub walls: Vec<Aabb>,
    pub pockets: usize,
}

const WALL_THICKNESS: f64 = 0.5;
/// Space left between a pocket's back wall and the arena edge.
const BACK_GAP: f64 = 2.5;
const MIN_POCKET_ARENA: f64 = 20.0;

fn pocket<R: Rng>(bounds: &Aabb, side: usize, rng: &mut R) -> Vec<Aabb> {
    let (zmin, zmax) = (bounds.min.z, bounds.max.z);
    let width = rng.random_range(8.0..=10.0);
    let depth = rng.random_range(5.0..=7.0);
    let jitter = rng.random_range(-2.0..=2.0);
    let t = WALL_THICKNESS;
    // build for an opening towards +y with the back wall near the low y edge,
    // then rotate into place
    let c = bounds.center();
    let half = bounds.half_extents();
    let (along_c, across_half) = if side % 2 == 0 { (c.x, half.y) } else { (c.y, half.x) };
    let cx = along_c + jitter;
    let back = -across_half + BACK_GAP;
    let local = [
        (cx - width / 2.0, back, cx + width / 2.0, back + t),
        (cx - width / 2.0, back, cx - width / 2.0 + t, back + depth),
        (cx + width / 2.0 - t, back, cx + width / 2.0, back + depth),
    ];
    local
        .iter()
        .map(|&(x0, y0, x1, y1)| {
            // y offsets are relative to the arena center along the across axis
            let (a0, a1, b0, b1) = match side {
                0 => (x0, x1, c.y + y0, c.y + y1),  // south, opens north
                1 => (c.x - y1, c.x - y0, x0, x1),  // east, opens west
                2 => (x0, x1, c.y - y1, c.y - y0),  // north, opens south
                _ => (c.x + y0, c.x + y1, x0, x1),  // west, opens east
            };
            Aabb::new(Vec3::new(a0, b0, zmin), Vec3::new(a1, b1, zmax))
        })
        .collect()
}

fn single_wall(bounds: &Aabb) -> Vec<Aabb> {
    let c = bounds.center();
    let h = bounds.half_extents();
    vec![Aabb::new(
        Vec3::new(c.x - 0.6 * h.x, c.y - WALL_THICKNESS / 2.0, bounds.min.z),
        Vec3::new(c.x + 0.6 * h.x, c.y + WALL_THICKNESS / 2.0, bounds.max.z),
    )]
}

fn rasterize(bounds: &Aabb, walls: &[Aabb], resolution: f64) -> VoxelMap {
    let mut map = VoxelMap::new(resolution, *bounds);
    for w in walls {
        map.insert_box(w);
    }
    map
}

/// Four U-shaped pockets, one against each arena edge, opening towards the
/// center. Layouts whose pockets come closer than `corridor` or that split
/// the free space are redrawn; after repeated failures two opposite pockets
/// are used, and arenas too small for pockets get a single wall.
pub fn generate_maze<R: Rng>(bounds: &Aabb, resolution: f64, corridor: f64, robot_radius: f64, rng: &mut R) -> Result<(VoxelMap, MazeLayout)> {
    let size = bounds.size();
    if size.x < MIN_POCKET_ARENA || size.y < MIN_POCKET_ARENA {
        let walls = single_wall(bounds);
        return Ok((rasterize(bounds, &walls, resolution), MazeLayout { walls, pockets: 0 }));
    }
    let spec = GridSpec { cell: 0.5, bounds: *bounds, inflation: robot_radius };
    for sides in [&[0usize, 1, 2, 3][..], &[0, 2][..]] {
        for _ in 0..100 {
            let groups: Vec<Vec<Aabb>> = sides.iter().map(|&s| pocket(bounds, s, rng)).collect();
            let separated = groups.iter().enumerate().all(|(i, gi)| {
                groups.iter().skip(i + 1).all(|gj| gi.iter().all(|a| gj.iter().all(|b| a.distance_to(b) >= corridor)))
            });
            if !separated {
                continue;
            }
            let walls: Vec<Aabb> = groups.into_iter().flatten().collect();
            let map = rasterize(bounds, &walls, resolution);
            if free_space_connected(&map, spec) {
                return Ok((map, MazeLayout { walls, pockets: sides.len() }));
            }
        }
    }
    Err(NavError::Generation("no connected maze layout found".into()))
}

/// Flood fill over the free cells of the inflated grid.
pub fn free_space_connected(map: &VoxelMap, spec: GridSpec) -> bool {
    let grid = FreeGrid::build(map, spec);
    let d = spec.dims();
    let mut seen = vec![false; d[0] * d[1] * d[2]];
    let lin = |c: [usize; 3]| (c[2] * d[1] + c[1]) * d[0] + c[0];
    let mut start = None;
    'outer: for k in 0..d[2] {
        for j in 0..d[1] {
            for i in 0..d[0] {
                if grid.is_free([i, j, k]) {
                    start = Some([i, j, k]);
                    break 'outer;
                }
            }
        }
    }
    let Some(start) = start else { return false };
    let mut queue = VecDeque::from([start]);
    seen[lin(start)] = true;
    let mut reached = 1;
    while let Some(c) = queue.pop_front() {
        for (n, _) in grid.neighbors(c) {
            if !seen[lin(n)] {
                seen[lin(n)] = true;
                reached += 1;
                queue.push_back(n);
            }
        }
    }
    reached == grid.free_count()
}

/// Free sample points on a 1 m grid at height `z` whose straight line to the
/// arena center crosses an occupied cell.
pub fn concavity_witnesses(map: &VoxelMap, bounds: &Aabb, z: f64) -> usize {
    let c = Vec3::new(bounds.center().x, bounds.center().y, z);
    let probe = |p: Vec3| map.any_in(&Aabb::from_center_half_extents(p, Vec3::splat(0.01)));
    let mut count = 0;
    let mut x = bounds.min.x + 0.5;
    while x < bounds.max.x {
        let mut y = bounds.min.y + 0.5;
        while y < bounds.max.y {
            let p = Vec3::new(x, y, z);
            if !probe(p) {
                let n = (p.distance(c) / 0.1).ceil() as usize;
                if (1..n).any(|k| probe(p + (c - p) * (k as f64 / n as f64))) {
                    count += 1;
                }
            }
            y += 1.0;
        }
        x += 1.0;
    }
    count
}

/// Cubes circling the vertical axis through the origin at a constant speed.
pub fn generate_dynamic_obstacles<R: Rng>(
    count: usize,
    bounds: &Aabb,
    diagonal: (f64, f64),
    speed: (f64, f64),
    rng: &mut R,
) -> Vec<DynamicObstacle> {
    (0..count)
        .map(|_| {
            let d = rng.random_range(diagonal.0..=diagonal.1);
            let s = rng.random_range(speed.0..=speed.1);
            let p = Vec3::new(
                rng.random_range(bounds.min.x..=bounds.max.x),
                rng.random_range(bounds.min.y..=bounds.max.y),
                rng.random_range(bounds.min.z..=bounds.max.z),
            );
            let behavior = BehaviorModel::non_interactive(MovementModel::Rotation { speed: s });
            DynamicObstacle {
                position: p,
                velocity: behavior.movement.desired_velocity(p),
                shape: Aabb::cube_with_diagonal(Vec3::ZERO, d),
                behavior,
            }
        })
        .collect()
}

/// Start positions on free grid cells, pairwise at least `spacing` apart
/// and at least `clearance` from every obstacle box.
pub fn sample_robot_starts<R: Rng>(
    count: usize,
    grid: &FreeGrid,
    obstacles: &[DynamicObstacle],
    spacing: f64,
    clearance: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    let mut out: Vec<Vec3> = Vec::with_capacity(count);
    for _ in 0..MAX_REJECTIONS {
        if out.len() == count {
            break;
        }
        let p = grid.sample_goal(rng)?;
        let spaced = out.iter().all(|q| q.distance(p) >= spacing);
        let clear = obstacles.iter().all(|o| o.world_box().distance_to_point(p) >= clearance);
        if spaced && clear {
            out.push(p);
        }
    }
    if out.len() < count {
        return Err(NavError::Generation(format!("placed only {} of {count} robots", out.len())));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arena() -> Aabb {
        Aabb::new(Vec3::new(-15.0, -15.0, 0.0), Vec3::new(15.0, 15.0, 4.0))
    }

    #[test]
    fn forest_counts_and_spacing() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let empty = ForestParams { pillars: 0, ..Default::default() };
        assert!(generate_forest(&arena(), &empty, 0.25, &mut rng).unwrap().is_empty());
        let one = ForestParams { pillars: 1, ..Default::default() };
        let m = generate_forest(&arena(), &one, 0.25, &mut rng).unwrap();
        assert!(!m.is_empty());
        assert!(m.occupied().iter().all(|&c| arena().contains_point(m.cell_box(c).center(), 0.0)));
    }

    #[test]
    fn overfull_forest_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ForestParams { pillars: 2000, ..Default::default() };
        assert!(matches!(generate_forest(&arena(), &p, 0.25, &mut rng), Err(NavError::Generation(_))));
    }

    #[test]
    fn maze_is_connected_and_concave() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (map, layout) = generate_maze(&arena(), 0.25, 2.0, 0.3, &mut rng).unwrap();
            assert!(layout.pockets >= 2);
            let spec = GridSpec { cell: 0.5, bounds: arena(), inflation: 0.3 };
            assert!(free_space_connected(&map, spec));
            assert!(concavity_witnesses(&map, &arena(), 2.0) >= 2);
        }
    }

    #[test]
    fn tiny_maze_falls_back_to_single_wall() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let small = Aabb::new(Vec3::new(-4.0, -4.0, 0.0), Vec3::new(4.0, 4.0, 3.0));
        let (_, layout) = generate_maze(&small, 0.25, 2.0, 0.3, &mut rng).unwrap();
        assert_eq!(layout.pockets, 0);
        assert_eq!(layout.walls.len(), 1);
    }

    #[test]
    fn rotation_example() {
        let m = MovementModel::Rotation { speed: 0.3 };
        assert!((m.desired_velocity(Vec3::new(2.0, 0.0, 1.0)) - Vec3::new(0.0, 0.3, 0.0)).norm() < 1e-12);
        assert_eq!(m.desired_velocity(Vec3::new(0.0, 0.0, 2.0)), Vec3::ZERO);
    }
}
