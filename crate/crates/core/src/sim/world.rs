use std::collections::BTreeSet;
use std::fmt;

use crate::error::{NavError, Result};
use crate::geometry::{boxes_overlap, Aabb, VoxelMap, Vec3};

use super::BehaviorModel;

/// Default physics step: 200 Hz.
pub const DEFAULT_DT: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Body-frame shape centered at the origin.
    pub shape: Aabb,
}

impl RobotState {
    pub fn world_box(&self) -> Aabb {
        self.shape.translated(self.position)
    }

    pub fn radius(&self) -> f64 {
        self.shape.bounding_radius()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObstacle {
    pub position: Vec3,
    pub velocity: Vec3,
    pub shape: Aabb,
    /// True behavior; never shown to robots.
    pub behavior: BehaviorModel,
}

impl DynamicObstacle {
    pub fn world_box(&self) -> Aabb {
        self.shape.translated(self.position)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub dt_physics: f64,
    pub a_max: f64,
    pub v_max: f64,
    pub drop_probability: f64,
    pub delay_low: f64,
    pub delay_high: f64,
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise on sensed positions and
    /// velocities; zero disables noise.
    pub sensing_noise: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt_physics: DEFAULT_DT,
            a_max: 4.0,
            v_max: 2.0,
            drop_probability: 0.1,
            delay_low: 0.0,
            delay_high: 0.1,
            seed: 0,
            sensing_noise: 0.0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(NavError::Config(m.to_string()));
        if !(self.dt_physics > 0.0) {
            return err("dt_physics must be > 0");
        }
        if !(self.a_max > 0.0 && self.v_max > 0.0) {
            return err("a_max and v_max must be > 0");
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return err("drop_probability must lie in [0, 1]");
        }
        if !(0.0 <= self.delay_low && self.delay_low <= self.delay_high) {
            return err("delay bounds must satisfy 0 <= low <= high");
        }
        if self.sensing_noise < 0.0 {
            return err("sensing_noise must be >= 0");
        }
        Ok(())
    }
}

/// A collidable entity. All static occupancy counts as one entity so a robot
/// sliding along a wall is one contact episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Robot(usize),
    Obstacle(usize),
    Static,
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Robot(i) => write!(f, "robot{i}"),
            Entity::Obstacle(i) => write!(f, "obstacle{i}"),
            Entity::Static => write!(f, "static"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub time: f64,
    pub a: Entity,
    pub b: Entity,
}

#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub robots: Vec<RobotState>,
    pub obstacles: Vec<DynamicObstacle>,
    pub static_map: VoxelMap,
    steps: u64,
    contacts: BTreeSet<(Entity, Entity)>,
}

/// Advances one obstacle: velocity from its behavior model relative to the
/// nearest ego robot, then a position update.
pub fn propagate_dynamic_obstacle(obs: &mut DynamicObstacle, egos: &[RobotState], dt: f64) {
    let nearest = egos
        .iter()
        .min_by(|a, b| (a.position - obs.position).norm_squared().total_cmp(&(b.position - obs.position).norm_squared()));
    let (ego_pos, ego_vel) = nearest.map_or((Vec3::splat(f64::INFINITY), Vec3::ZERO), |r| (r.position, r.velocity));
    obs.velocity = obs.behavior.velocity(obs.position, ego_pos, ego_vel);
    obs.position += obs.velocity * dt;
}

impl World {
    pub fn new(config: WorldConfig, robots: Vec<RobotState>, obstacles: Vec<DynamicObstacle>, static_map: VoxelMap) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, robots, obstacles, static_map, steps: 0, contacts: BTreeSet::new() })
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt_physics
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Semi-implicit Euler step. Commands are norm-clamped to `a_max`,
    /// velocities to `v_max`. Returns the applied accelerations.
    pub fn step(&mut self, commanded: &[Vec3]) -> Result<Vec<Vec3>> {
        assert_eq!(commanded.len(), self.robots.len(), "one command per robot");
        for (i, a) in commanded.iter().enumerate() {
            if !a.is_finite() {
                return Err(NavError::NonFiniteAccel(self.robots[i].id));
            }
        }
        let dt = self.config.dt_physics;
        let snapshot = self.robots.clone();
        for obs in &mut self.obstacles {
            propagate_dynamic_obstacle(obs, &snapshot, dt);
        }
        let mut applied = Vec::with_capacity(commanded.len());
        for (robot, a) in self.robots.iter_mut().zip(commanded) {
            let a = a.clamp_norm(self.config.a_max);
            robot.velocity = (robot.velocity + a * dt).clamp_norm(self.config.v_max);
            robot.position += robot.velocity * dt;
            applied.push(a);
        }
        self.steps += 1;
        Ok(applied)
    }

    fn overlapping_pairs(&self) -> BTreeSet<(Entity, Entity)> {
        let mut pairs = BTreeSet::new();
        let boxes: Vec<Aabb> = self.robots.iter().map(RobotState::world_box).collect();
        for (i, bi) in boxes.iter().enumerate() {
            for (j, bj) in boxes.iter().enumerate().skip(i + 1) {
                if boxes_overlap(bi, bj) {
                    pairs.insert((Entity::Robot(i), Entity::Robot(j)));
                }
            }
            for (k, obs) in self.obstacles.iter().enumerate() {
                if boxes_overlap(bi, &obs.world_box()) {
                    pairs.insert((Entity::Robot(i), Entity::Obstacle(k)));
                }
            }
            if self.static_map.any_in(bi) {
                pairs.insert((Entity::Robot(i), Entity::Static));
            }
        }
        pairs
    }

    /// Reports overlaps that began this step; a continuing contact is
    /// reported once until the pair separates.
    pub fn detect_collisions(&mut self) -> Vec<CollisionEvent> {
        let current = self.overlapping_pairs();
        let t = self.time();
        let events = current
            .difference(&self.contacts)
            .map(|&(a, b)| CollisionEvent { time: t, a, b })
            .collect();
        self.contacts = current;
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::MovementModel;

    fn cube(half: f64) -> Aabb {
        Aabb::from_center_half_extents(Vec3::ZERO, Vec3::splat(half))
    }

    fn robot(id: usize, p: Vec3) -> RobotState {
        RobotState { id, position: p, velocity: Vec3::ZERO, shape: cube(0.5) }
    }

    fn world(robots: Vec<RobotState>, obstacles: Vec<DynamicObstacle>) -> World {
        let cfg = WorldConfig { dt_physics: 0.01, a_max: 5.0, v_max: 10.0, ..Default::default() };
        let map = VoxelMap::new(1.0, Aabb::new(Vec3::splat(-50.0), Vec3::splat(50.0)));
        World::new(cfg, robots, obstacles, map).unwrap()
    }

    #[test]
    fn zero_command_holds_still() {
        let mut w = world(vec![robot(0, Vec3::new(1.0, 2.0, 3.0))], vec![]);
        w.step(&[Vec3::ZERO]).unwrap();
        assert_eq!(w.robots[0].position, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn one_step_hand_integration() {
        let mut w = world(vec![robot(0, Vec3::ZERO)], vec![]);
        w.step(&[Vec3::new(1.0, 0.0, 0.0)]).unwrap();
        assert!((w.robots[0].velocity - Vec3::new(0.01, 0.0, 0.0)).norm() < 1e-15);
        assert!((w.robots[0].position - Vec3::new(0.0001, 0.0, 0.0)).norm() < 1e-15);
        assert!((w.time() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn acceleration_is_clamped() {
        let mut w = world(vec![robot(0, Vec3::ZERO)], vec![]);
        let applied = w.step(&[Vec3::new(6.0, 8.0, 0.0)]).unwrap();
        assert!((applied[0].norm() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_command_names_robot() {
        let mut w = world(vec![robot(7, Vec3::ZERO)], vec![]);
        assert_eq!(w.step(&[Vec3::new(f64::NAN, 0.0, 0.0)]), Err(NavError::NonFiniteAccel(7)));
    }

    #[test]
    fn separated_robots_do_not_collide() {
        let mut w = world(vec![robot(0, Vec3::ZERO), robot(1, Vec3::new(3.0, 0.0, 0.0))], vec![]);
        assert!(w.detect_collisions().is_empty());
    }

    #[test]
    fn robot_obstacle_overlap_reported_once_per_episode() {
        let obs = DynamicObstacle {
            position: Vec3::new(0.5, 0.0, 0.0),
            velocity: Vec3::ZERO,
            shape: cube(0.5),
            behavior: BehaviorModel::non_interactive(MovementModel::Stationary),
        };
        let mut w = world(vec![robot(0, Vec3::ZERO)], vec![obs]);
        let mut total = 0;
        for _ in 0..10 {
            total += w.detect_collisions().len();
            w.step(&[Vec3::ZERO]).unwrap();
        }
        assert_eq!(total, 1);
        // separate, then touch again: a second episode
        w.robots[0].position = Vec3::new(-5.0, 0.0, 0.0);
        assert!(w.detect_collisions().is_empty());
        w.robots[0].position = Vec3::ZERO;
        assert_eq!(w.detect_collisions().len(), 1);
    }

    #[test]
    fn rotating_obstacle_moves_tangentially() {
        let mut obs = DynamicObstacle {
            position: Vec3::new(2.0, 0.0, 1.0),
            velocity: Vec3::ZERO,
            shape: cube(0.4),
            behavior: BehaviorModel::non_interactive(MovementModel::Rotation { speed: 0.3 }),
        };
        propagate_dynamic_obstacle(&mut obs, &[], 0.1);
        assert!((obs.velocity - Vec3::new(0.0, 0.3, 0.0)).norm() < 1e-12);
        let mut still = DynamicObstacle { behavior: BehaviorModel::non_interactive(MovementModel::Stationary), ..obs.clone() };
        let p = still.position;
        propagate_dynamic_obstacle(&mut still, &[], 0.1);
        assert_eq!(still.position, p);
    }

    #[test]
    fn config_validation() {
        assert!(WorldConfig { dt_physics: 0.0, ..Default::default() }.validate().is_err());
        assert!(WorldConfig { drop_probability: 1.5, ..Default::default() }.validate().is_err());
        assert!(WorldConfig::default().validate().is_ok());
    }
}
