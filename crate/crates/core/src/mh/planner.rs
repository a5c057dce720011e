use std::collections::BTreeMap;

use super::{
    optimize_spline, predict_obstacle, select_goal, spatiotemporal_search, update_behavior_belief, AppendOutcome,
    BehaviorBelief, Corridor, DshtStore, MhConfig, SearchProblem, SplineResult,
};
use crate::error::Result;
use crate::geometry::{Aabb, Hyperplane, PiecewiseTrajectory, TrajSample, Vec3, VoxelMap};
use crate::sim::RobotState;

/// A sensed dynamic obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleObservation {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    pub half_extents: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub stamp: f64,
    pub reached_goal: bool,
    pub expansions: usize,
    pub spline: SplineResult,
}

/// Restart from the previous reference only if the robot is this close to it.
const REFERENCE_RESTART_DISTANCE: f64 = 0.5;
const GOAL_BACKOFF_STEP: f64 = 0.1;

/// Per-robot medium-horizon planner. Keeps the last good reference when a
/// replan fails.
#[derive(Debug, Clone)]
pub struct MediumHorizonPlanner {
    pub robot: usize,
    pub cfg: MhConfig,
    pub dsht: DshtStore,
    /// Region the robot center must stay in.
    pub bounds: Option<Aabb>,
    beliefs: BTreeMap<usize, BehaviorBelief>,
    reference: Option<PiecewiseTrajectory>,
    corridors: Vec<Corridor>,
    pub successes: usize,
    pub failures: usize,
}

impl MediumHorizonPlanner {
    pub fn new(robot: usize, cfg: MhConfig, bounds: Option<Aabb>) -> Self {
        Self {
            robot,
            cfg,
            dsht: DshtStore::new(),
            bounds,
            beliefs: BTreeMap::new(),
            reference: None,
            corridors: Vec::new(),
            successes: 0,
            failures: 0,
        }
    }

    pub fn reference(&self) -> Option<&PiecewiseTrajectory> {
        self.reference.as_ref()
    }

    pub fn corridors(&self) -> &[Corridor] {
        &self.corridors
    }

    pub fn belief(&self, obstacle: usize) -> Option<&BehaviorBelief> {
        self.beliefs.get(&obstacle)
    }

    /// Reference sample at `now`; holds `fallback` when no reference exists yet.
    pub fn reference_sample(&self, now: f64, fallback: Vec3) -> TrajSample {
        match &self.reference {
            Some(r) => r.sample_clamped(now),
            None => TrajSample { pos: fallback, vel: Vec3::ZERO, acc: Vec3::ZERO },
        }
    }

    pub fn record_teammate(&mut self, ego: &RobotState, teammate: &RobotState, now: f64) -> AppendOutcome {
        self.dsht.append(ego, teammate, now)
    }

    pub fn on_plan_success(&mut self, teammate: usize, stamp: f64) -> bool {
        self.dsht.prune(teammate, stamp)
    }

    pub fn observe_obstacles(&mut self, observations: &[ObstacleObservation], dt: f64) {
        for o in observations {
            let sigma = self.cfg.sigma_v;
            self.beliefs
                .entry(o.id)
                .and_modify(|b| *b = update_behavior_belief(b, o.position, o.velocity, dt, sigma))
                .or_insert_with(|| BehaviorBelief::initial_guess(o.velocity));
        }
    }

    /// Full replan. On success the new reference replaces the old one and
    /// the stamp to broadcast is returned; on failure the old reference stays.
    pub fn plan(
        &mut self,
        now: f64,
        ego: &RobotState,
        teammates: &[RobotState],
        desired: &PiecewiseTrajectory,
        obstacles: &[ObstacleObservation],
        static_map: &VoxelMap,
    ) -> Result<PlanOutcome> {
        let out = self.plan_inner(now, ego, teammates, desired, obstacles, static_map);
        match &out {
            Ok(o) => {
                self.successes += 1;
                self.reference = Some(o.spline.trajectory.clone());
                self.corridors = o.spline.corridors.clone();
            }
            Err(_) => self.failures += 1,
        }
        out
    }

    fn plan_inner(
        &mut self,
        now: f64,
        ego: &RobotState,
        teammates: &[RobotState],
        desired: &PiecewiseTrajectory,
        obstacles: &[ObstacleObservation],
        static_map: &VoxelMap,
    ) -> Result<PlanOutcome> {
        let cfg = self.cfg.clone();
        let half = ego.shape.half_extents();
        let (start, start_vel) = match &self.reference {
            Some(r) => {
                let s = r.sample_clamped(now);
                if s.pos.distance(ego.position) <= REFERENCE_RESTART_DISTANCE {
                    (s.pos, s.vel)
                } else {
                    (ego.position, ego.velocity)
                }
            }
            None => (ego.position, ego.velocity),
        };
        let start_vel = start_vel.clamp_each(cfg.v_ref);

        let blocked = |p: Vec3| static_map.any_in(&Aabb::from_center_half_extents(p, half));
        let (mut goal, mut goal_time) = select_goal(desired, start, now, cfg.horizon, cfg.v_ref);
        while blocked(goal) && goal_time - GOAL_BACKOFF_STEP >= desired.start_time.max(now) {
            goal_time -= GOAL_BACKOFF_STEP;
            goal = desired.sample_clamped(goal_time).pos;
        }
        if let Some(b) = &self.bounds {
            goal = goal.max(b.min).min(b.max);
        }

        let in_range: Vec<&ObstacleObservation> =
            obstacles.iter().filter(|o| o.position.distance(ego.position) <= cfg.sensing_range).collect();
        let owned: Vec<ObstacleObservation> = in_range.iter().map(|o| **o).collect();
        self.observe_obstacles(&owned, cfg.replan_period);
        let lookahead = cfg.max_depth() as f64 * cfg.primitive_duration;
        let predicted: Vec<_> = in_range
            .iter()
            .map(|o| predict_obstacle(&self.beliefs[&o.id], o.position, o.half_extents, lookahead, cfg.rollout_dt))
            .collect();

        let planes: Vec<Hyperplane> = teammates
            .iter()
            .filter(|t| t.id != self.robot && t.position.distance(ego.position) <= cfg.plane_range)
            .flat_map(|t| self.dsht.planes(t.id).iter().copied())
            .collect();

        let problem = SearchProblem {
            start,
            goal,
            static_map,
            obstacles: &predicted,
            planes: &planes,
            robot_half_extents: half,
            bounds: self.bounds,
        };
        let found = spatiotemporal_search(&problem, &cfg)?;
        let spline = optimize_spline(&found.positions(), start_vel, now, &planes, static_map, half, &cfg)?;
        Ok(PlanOutcome { stamp: now, reached_goal: found.reached_goal, expansions: found.expansions, spline })
    }
}
