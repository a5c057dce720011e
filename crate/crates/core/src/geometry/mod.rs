//! Vectors, boxes, hyperplanes, Bézier trajectories and the voxel map.

mod bezier;
mod shapes;
mod vec3;
mod voxel;

pub use bezier::{BezierPiece, PiecewiseTrajectory, TrajSample, CONTINUITY_TOL};
pub use shapes::{boxes_overlap, separating_hyperplane, Aabb, Hyperplane};
pub use vec3::Vec3;
pub use voxel::{CellBuckets, CellIndex, InsertOutcome, VoxelMap};
