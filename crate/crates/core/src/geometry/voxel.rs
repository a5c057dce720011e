use std::collections::{HashMap, HashSet};

use super::{boxes_overlap, Aabb, Vec3};

pub type CellIndex = [i64; 3];

/// Sparse occupancy grid: a hash set of occupied cell indices. Cell `(i,j,k)`
/// spans `[i*res, (i+1)*res] x ...`.
#[derive(Debug, Clone)]
pub struct VoxelMap {
    resolution: f64,
    bounds: Aabb,
    cells: HashSet<CellIndex>,
}

/// Result of a [`VoxelMap::insert_box`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsertOutcome {
    pub cells_added: usize,
    /// Set when the box lay entirely outside the map bounds.
    pub outside_bounds: bool,
}

/// Inclusive index range of cells whose interior intersects `[lo, hi]`.
fn index_range(lo: f64, hi: f64, res: f64) -> Option<(i64, i64)> {
    if hi <= lo {
        return None;
    }
    let first = (lo / res).floor() as i64;
    let last = (hi / res).ceil() as i64 - 1;
    (first <= last).then_some((first, last))
}

impl VoxelMap {
    pub fn new(resolution: f64, bounds: Aabb) -> Self {
        assert!(resolution > 0.0, "voxel resolution must be positive");
        Self { resolution, bounds, cells: HashSet::new() }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_box(&self, idx: CellIndex) -> Aabb {
        let r = self.resolution;
        let min = Vec3::new(idx[0] as f64 * r, idx[1] as f64 * r, idx[2] as f64 * r);
        Aabb { min, max: min + Vec3::splat(r) }
    }

    pub fn cell_of(&self, p: Vec3) -> CellIndex {
        let r = self.resolution;
        [(p.x / r).floor() as i64, (p.y / r).floor() as i64, (p.z / r).floor() as i64]
    }

    pub fn is_occupied(&self, idx: CellIndex) -> bool {
        self.cells.contains(&idx)
    }

    fn ranges(&self, region: &Aabb) -> Option<[(i64, i64); 3]> {
        let r = self.resolution;
        Some([
            index_range(region.min.x, region.max.x, r)?,
            index_range(region.min.y, region.max.y, r)?,
            index_range(region.min.z, region.max.z, r)?,
        ])
    }

    /// Marks every cell intersecting `b` (clipped to the map bounds) as occupied.
    pub fn insert_box(&mut self, b: &Aabb) -> InsertOutcome {
        if !boxes_overlap(b, &self.bounds) {
            return InsertOutcome { cells_added: 0, outside_bounds: true };
        }
        let clipped = Aabb { min: b.min.max(self.bounds.min), max: b.max.min(self.bounds.max) };
        let mut added = 0;
        if let Some([rx, ry, rz]) = self.ranges(&clipped) {
            for i in rx.0..=rx.1 {
                for j in ry.0..=ry.1 {
                    for k in rz.0..=rz.1 {
                        if self.cells.insert([i, j, k]) {
                            added += 1;
                        }
                    }
                }
            }
        }
        InsertOutcome { cells_added: added, outside_bounds: false }
    }

    /// Occupied cell indices intersecting `region`, sorted.
    pub fn query_indices(&self, region: &Aabb) -> Vec<CellIndex> {
        let Some([rx, ry, rz]) = self.ranges(region) else {
            return Vec::new();
        };
        let volume = (rx.1 - rx.0 + 1) * (ry.1 - ry.0 + 1) * (rz.1 - rz.0 + 1);
        let mut out: Vec<CellIndex> = if volume as usize > self.cells.len() {
            self.cells
                .iter()
                .filter(|c| {
                    (rx.0..=rx.1).contains(&c[0]) && (ry.0..=ry.1).contains(&c[1]) && (rz.0..=rz.1).contains(&c[2])
                })
                .copied()
                .collect()
        } else {
            let mut v = Vec::new();
            for i in rx.0..=rx.1 {
                for j in ry.0..=ry.1 {
                    for k in rz.0..=rz.1 {
                        if self.cells.contains(&[i, j, k]) {
                            v.push([i, j, k]);
                        }
                    }
                }
            }
            v
        };
        out.sort_unstable();
        out
    }

    /// Boxes of the occupied cells intersecting `region`.
    pub fn query(&self, region: &Aabb) -> Vec<Aabb> {
        self.query_indices(region).into_iter().map(|c| self.cell_box(c)).collect()
    }

    pub fn count_in(&self, region: &Aabb) -> usize {
        let Some([rx, ry, rz]) = self.ranges(region) else {
            return 0;
        };
        let mut n = 0;
        for i in rx.0..=rx.1 {
            for j in ry.0..=ry.1 {
                for k in rz.0..=rz.1 {
                    if self.cells.contains(&[i, j, k]) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    pub fn any_in(&self, region: &Aabb) -> bool {
        let Some([rx, ry, rz]) = self.ranges(region) else {
            return false;
        };
        for i in rx.0..=rx.1 {
            for j in ry.0..=ry.1 {
                for k in rz.0..=rz.1 {
                    if self.cells.contains(&[i, j, k]) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Up to `k` occupied cells nearest to `p` within `radius`, nearest first.
    pub fn nearest_cells(&self, p: Vec3, radius: f64, k: usize) -> Vec<Aabb> {
        let region = Aabb::from_center_half_extents(p, Vec3::splat(radius));
        let mut found: Vec<(f64, CellIndex, Aabb)> = self
            .query_indices(&region)
            .into_iter()
            .map(|c| {
                let b = self.cell_box(c);
                (b.distance_to_point(p), c, b)
            })
            .filter(|(d, _, _)| *d <= radius)
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(_, _, b)| b).collect()
    }

    /// All occupied cells, sorted.
    pub fn occupied(&self) -> Vec<CellIndex> {
        let mut v: Vec<_> = self.cells.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Coarse buckets over the surface cells of a map, for repeated nearest-cell
/// queries. Interior cells (all six face neighbors occupied) can never be
/// the nearest cell to an outside point and are left out.
#[derive(Debug, Clone)]
pub struct CellBuckets {
    resolution: f64,
    bucket: f64,
    buckets: HashMap<CellIndex, Vec<CellIndex>>,
}

impl CellBuckets {
    pub fn new(map: &VoxelMap, bucket: f64) -> Self {
        let mut buckets: HashMap<CellIndex, Vec<CellIndex>> = HashMap::new();
        const FACES: [[i64; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        for &c in map.occupied().iter() {
            let interior = FACES.iter().all(|f| map.cells.contains(&[c[0] + f[0], c[1] + f[1], c[2] + f[2]]));
            if interior {
                continue;
            }
            let center = map.cell_box(c).center();
            let key = [0, 1, 2].map(|i| (center[i] / bucket).floor() as i64);
            buckets.entry(key).or_default().push(c);
        }
        Self { resolution: map.resolution, bucket, buckets }
    }

    /// Same contract as [`VoxelMap::nearest_cells`] for points outside the
    /// occupied volume.
    pub fn nearest(&self, p: Vec3, radius: f64, k: usize) -> Vec<Aabb> {
        let reach = radius + self.resolution;
        let lo = [0, 1, 2].map(|i| ((p[i] - reach) / self.bucket).floor() as i64);
        let hi = [0, 1, 2].map(|i| ((p[i] + reach) / self.bucket).floor() as i64);
        let r = self.resolution;
        let mut found: Vec<(f64, CellIndex, Aabb)> = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for l in lo[2]..=hi[2] {
                    let Some(cells) = self.buckets.get(&[i, j, l]) else { continue };
                    for &c in cells {
                        let min = Vec3::new(c[0] as f64 * r, c[1] as f64 * r, c[2] as f64 * r);
                        let b = Aabb { min, max: min + Vec3::splat(r) };
                        let d = b.distance_to_point(p);
                        if d <= radius {
                            found.push((d, c, b));
                        }
                    }
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(_, _, b)| b).collect()
    }
}
