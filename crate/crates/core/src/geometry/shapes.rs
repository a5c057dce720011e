use super::Vec3;
use crate::error::{NavError, Result};

/// Axis-aligned box with `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Builds a box, reordering corners so that `min <= max`.
    pub fn new(a: Vec3, b: Vec3) -> Self {
        Self { min: a.min(b), max: a.max(b) }
    }

    pub fn from_center_half_extents(center: Vec3, half: Vec3) -> Self {
        Self::new(center - half, center + half)
    }

    /// Cube centered at `center` whose space diagonal has the given length.
    pub fn cube_with_diagonal(center: Vec3, diagonal: f64) -> Self {
        let half = diagonal / (2.0 * 3f64.sqrt());
        Self::from_center_half_extents(center, Vec3::splat(half))
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn half_extents(&self) -> Vec3 {
        (self.max - self.min) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.size().norm()
    }

    /// Radius of the smallest sphere about the center containing the box.
    pub fn bounding_radius(&self) -> f64 {
        self.half_extents().norm()
    }

    pub fn translated(&self, by: Vec3) -> Aabb {
        Aabb { min: self.min + by, max: self.max + by }
    }

    /// Grows every face outward by `margin` (negative shrinks, never past the center).
    pub fn inflated(&self, margin: f64) -> Aabb {
        let c = self.center();
        let h = self.half_extents() + Vec3::splat(margin);
        Aabb::from_center_half_extents(c, h.max(Vec3::ZERO))
    }

    pub fn contains_point(&self, p: Vec3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    /// Point of the box nearest to `p`.
    pub fn closest_point(&self, p: Vec3) -> Vec3 {
        p.max(self.min).min(self.max)
    }

    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        (self.closest_point(p) - p).norm()
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let mut out = [Vec3::ZERO; 8];
        for (k, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if k & 1 == 0 { self.min.x } else { self.max.x },
                if k & 2 == 0 { self.min.y } else { self.max.y },
                if k & 4 == 0 { self.min.z } else { self.max.z },
            );
        }
        out
    }

    /// Per-axis separation vector from `self` to `other`; zero on axes whose
    /// projections overlap.
    pub fn gap_to(&self, other: &Aabb) -> Vec3 {
        let axis = |i: usize| {
            if other.min[i] > self.max[i] {
                other.min[i] - self.max[i]
            } else if self.min[i] > other.max[i] {
                other.max[i] - self.min[i]
            } else {
                0.0
            }
        };
        Vec3::new(axis(0), axis(1), axis(2))
    }

    pub fn distance_to(&self, other: &Aabb) -> f64 {
        self.gap_to(other).norm()
    }
}

/// `true` iff the intersection has positive extent on every axis.
/// Face-touching boxes do not overlap.
pub fn boxes_overlap(a: &Aabb, b: &Aabb) -> bool {
    (0..3).all(|i| a.min[i] < b.max[i] && b.min[i] < a.max[i])
}

/// Plane `{p : normal . p = offset}` with a timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec3,
    pub offset: f64,
    pub stamp: f64,
}

impl Hyperplane {
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// The same plane seen from the other side.
    pub fn flipped(&self) -> Hyperplane {
        Hyperplane { normal: -self.normal, offset: -self.offset, stamp: self.stamp }
    }

    pub fn with_stamp(mut self, stamp: f64) -> Hyperplane {
        self.stamp = stamp;
        self
    }
}

/// Maximum-margin plane separating two disjoint boxes, with `a` on the
/// negative side. It bisects the shortest segment between the boxes.
pub fn separating_hyperplane(a: &Aabb, b: &Aabb) -> Result<Hyperplane> {
    let gap = a.gap_to(b);
    let dist = gap.norm();
    if dist <= 0.0 {
        return Err(NavError::Infeasible("boxes are not disjoint".into()));
    }
    let normal = gap / dist;
    // Closest points differ only on separated axes; on those axes the face
    // coordinates of a and b fix the midpoint.
    let mut offset = 0.0;
    for i in 0..3 {
        if gap[i] > 0.0 {
            offset += normal[i] * 0.5 * (a.max[i] + b.min[i]);
        } else if gap[i] < 0.0 {
            offset += normal[i] * 0.5 * (a.min[i] + b.max[i]);
        }
    }
    Ok(Hyperplane { normal, offset, stamp: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_at(c: Vec3) -> Aabb {
        Aabb::from_center_half_extents(c, Vec3::splat(0.5))
    }

    #[test]
    fn overlap_examples() {
        let a = Aabb::new(Vec3::ZERO, Vec3::splat(1.0));
        assert!(!boxes_overlap(&a, &Aabb::new(Vec3::splat(2.0), Vec3::splat(3.0))));
        assert!(boxes_overlap(&a, &Aabb::new(Vec3::splat(0.5), Vec3::splat(1.5))));
        assert!(!boxes_overlap(&a, &Aabb::new(Vec3::splat(1.0), Vec3::splat(2.0))));
    }

    #[test]
    fn symmetric_pair_plane() {
        let h = separating_hyperplane(&unit_at(Vec3::ZERO), &unit_at(Vec3::new(3.0, 0.0, 0.0)))
            .unwrap();
        assert!((h.normal - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((h.offset - 1.5).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pair_plane() {
        // Closest corners are (0.5,0.5,*) and (2.5,2.5,*): normal along (1,1,0),
        // passing through (1.5,1.5,0).
        let h = separating_hyperplane(&unit_at(Vec3::ZERO), &unit_at(Vec3::new(3.0, 3.0, 0.0)))
            .unwrap();
        let n = Vec3::new(1.0, 1.0, 0.0).normalized();
        assert!((h.normal - n).norm() < 1e-12);
        assert!((h.offset - n.dot(Vec3::new(1.5, 1.5, 0.0))).abs() < 1e-12);
    }

    #[test]
    fn overlapping_boxes_are_infeasible() {
        let r = separating_hyperplane(&unit_at(Vec3::ZERO), &unit_at(Vec3::new(0.5, 0.0, 0.0)));
        assert!(matches!(r, Err(NavError::Infeasible(_))));
    }

    #[test]
    fn closest_point_clamps() {
        let a = unit_at(Vec3::ZERO);
        assert_eq!(a.closest_point(Vec3::new(2.0, 0.1, -3.0)), Vec3::new(0.5, 0.1, -0.5));
        assert!((a.distance_to_point(Vec3::new(1.5, 0.0, 0.0)) - 1.0).abs() < 1e-12);
    }
}
