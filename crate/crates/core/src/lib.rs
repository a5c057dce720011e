//! Three-tier multi-robot navigation: a centralized long-horizon A* planner,
//! an on-board receding-horizon spatiotemporal planner with spline
//! optimization, and a high-rate safety-barrier acceleration filter, together
//! with a deterministic double-integrator simulator and an ablation harness.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod lh;
pub mod mh;
pub mod qp;
pub mod sh;
pub mod sim;

pub use error::{NavError, Result};
