//! Medium-horizon planning: behavior beliefs over dynamic obstacles, a
//! spatiotemporal search, and a spline fit that respects teammate planes.

mod belief;
mod dsht;
mod goal;
mod planner;
mod search;
mod spline;

pub use belief::{update_behavior_belief, BehaviorBelief, PROBABILITY_FLOOR};
pub use dsht::{AppendOutcome, DshtStore, TeammatePlanes};
pub use goal::select_goal;
pub use planner::{MediumHorizonPlanner, ObstacleObservation, PlanOutcome};
pub use search::{
    predict_obstacle, spatiotemporal_search, PredictedObstacle, SearchNode, SearchProblem, SearchResult, SearchWeights,
};
pub use spline::{optimize_spline, Corridor, SplineResult};

use crate::error::{NavError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub replan_period: f64,
    pub horizon: f64,
    /// Duration of one motion primitive.
    pub primitive_duration: f64,
    /// Per-axis speed of a primitive; a move covers `speed * duration` per axis.
    pub primitive_speed: f64,
    /// Extra search depth beyond the horizon, for detours.
    pub extra_depth: usize,
    pub max_expansions: usize,
    pub weights: SearchWeights,
    /// Per-axis reference velocity bound.
    pub v_ref: f64,
    /// Per-axis reference acceleration bound.
    pub a_ref: f64,
    /// Weight pulling segment ends towards the search path.
    pub tracking_weight: f64,
    /// Extra clearance around dynamic obstacles during search.
    pub dynamic_margin: f64,
    /// Extra clearance around static cells during search.
    pub static_margin: f64,
    pub sigma_v: f64,
    /// Obstacles farther than this are not predicted.
    pub sensing_range: f64,
    /// Teammates farther than this contribute no planes to the spline.
    pub plane_range: f64,
    /// Step used to roll behavior models forward.
    pub rollout_dt: f64,
    pub qp_tolerance: f64,
    pub qp_max_iter: usize,
}

/// Reference limits as a fraction of the physical ones. Lower than the
/// robot can do so the short-horizon filter keeps authority to swerve.
pub const REFERENCE_LIMIT_FRACTION: f64 = 0.45;

impl MhConfig {
    /// Defaults scaled from the physical limits.
    pub fn for_limits(v_max: f64, a_max: f64) -> Self {
        Self {
            replan_period: 0.5,
            horizon: 4.0,
            primitive_duration: 0.5,
            primitive_speed: 0.7,
            extra_depth: 4,
            max_expansions: 6000,
            weights: SearchWeights::default(),
            v_ref: REFERENCE_LIMIT_FRACTION * v_max,
            a_ref: REFERENCE_LIMIT_FRACTION * a_max,
            tracking_weight: 10.0,
            dynamic_margin: 0.3,
            static_margin: 0.1,
            sigma_v: 0.2,
            sensing_range: 10.0,
            plane_range: 6.0,
            rollout_dt: 0.1,
            qp_tolerance: 1e-9,
            qp_max_iter: 500,
        }
    }

    pub fn step_length(&self) -> f64 {
        self.primitive_speed * self.primitive_duration
    }

    pub fn max_depth(&self) -> usize {
        (self.horizon / self.primitive_duration).ceil() as usize + self.extra_depth
    }

    pub fn validate(&self, v_max: f64, a_max: f64) -> Result<()> {
        let positive = [
            self.replan_period,
            self.horizon,
            self.primitive_duration,
            self.primitive_speed,
            self.v_ref,
            self.a_ref,
            self.sigma_v,
            self.rollout_dt,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(NavError::Config("medium-horizon parameters must be positive".into()));
        }
        if self.v_ref >= v_max || self.a_ref >= a_max {
            return Err(NavError::Config("reference limits must stay below the physical limits".into()));
        }
        if self.primitive_speed > self.v_ref {
            return Err(NavError::Config("primitive speed exceeds the reference velocity bound".into()));
        }
        Ok(())
    }
}
