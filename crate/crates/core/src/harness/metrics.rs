use std::fmt;

use crate::geometry::Vec3;
use crate::sim::{CollisionEvent, Entity};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub robot: usize,
    pub task_id: u64,
    pub goal: Vec3,
    pub issue_time: f64,
    pub completion_time: Option<f64>,
}

/// End-of-run view of one robot, for deadlock detection.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSummary {
    pub robot: usize,
    pub final_position: Vec3,
    /// Position at the start of the final window; `None` if the run was
    /// shorter than the window.
    pub window_start_position: Option<Vec3>,
    pub current_goal: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub robots: usize,
    pub tasks: usize,
    pub collided_tasks: usize,
    /// Tasks completed without a collision.
    pub completed_tasks: usize,
    pub deadlocked_robots: usize,
    pub collision_events: usize,
    pub deadlock_rate: f64,
    pub collision_rate: f64,
    pub completion_rate: f64,
    /// Mean duration of completed no-collision tasks; `None` when there are none.
    pub mean_navigation_duration: Option<f64>,
    pub sbc_fallbacks: u64,
    pub mh_successes: u64,
    pub mh_failures: u64,
    pub dsht_overlap_skips: u64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "robots,tasks,collided_tasks,completed_tasks,deadlocked_robots,collision_events,\
deadlock_rate,collision_rate,completion_rate,mean_navigation_duration,sbc_fallbacks,mh_successes,mh_failures,dsht_overlap_skips";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{}",
            self.robots,
            self.tasks,
            self.collided_tasks,
            self.completed_tasks,
            self.deadlocked_robots,
            self.collision_events,
            self.deadlock_rate,
            self.collision_rate,
            self.completion_rate,
            self.mean_navigation_duration.map_or_else(|| "nan".to_string(), |d| format!("{d:.6}")),
            self.sbc_fallbacks,
            self.mh_successes,
            self.mh_failures,
            self.dsht_overlap_skips,
        )
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tasks {} | collided {} ({:.1}%) | completed {} ({:.1}%) | deadlocked {}/{} | mean duration {}",
            self.tasks,
            self.collided_tasks,
            100.0 * self.collision_rate,
            self.completed_tasks,
            100.0 * self.completion_rate,
            self.deadlocked_robots,
            self.robots,
            self.mean_navigation_duration.map_or_else(|| "n/a".to_string(), |d| format!("{d:.2} s")),
        )
    }
}

fn involves(e: &CollisionEvent, robot: usize) -> bool {
    e.a == Entity::Robot(robot) || e.b == Entity::Robot(robot)
}

/// A task is collided if a collision involving its robot happened between
/// issue and completion (or the end of the run). A robot is deadlocked if it
/// is away from its current goal and moved less than `min_displacement` over
/// the final window.
pub fn compute_metrics(
    tasks: &[TaskRecord],
    collisions: &[CollisionEvent],
    robots: &[RobotSummary],
    goal_tolerance: f64,
    min_displacement: f64,
) -> MetricsReport {
    let mut collided = 0;
    let mut completed = 0;
    let mut durations = Vec::new();
    for t in tasks {
        let end = t.completion_time.unwrap_or(f64::INFINITY);
        let hit = collisions.iter().any(|e| involves(e, t.robot) && e.time >= t.issue_time && e.time <= end);
        if hit {
            collided += 1;
        } else if let Some(done) = t.completion_time {
            completed += 1;
            durations.push(done - t.issue_time);
        }
    }
    let deadlocked = robots
        .iter()
        .filter(|r| {
            let away = r.current_goal.is_some_and(|g| g.distance(r.final_position) > goal_tolerance);
            let still = r.window_start_position.is_some_and(|p| p.distance(r.final_position) < min_displacement);
            away && still
        })
        .count();
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    MetricsReport {
        robots: robots.len(),
        tasks: tasks.len(),
        collided_tasks: collided,
        completed_tasks: completed,
        deadlocked_robots: deadlocked,
        collision_events: collisions.len(),
        deadlock_rate: frac(deadlocked, robots.len()),
        collision_rate: frac(collided, tasks.len()),
        completion_rate: frac(completed, tasks.len()),
        mean_navigation_duration: (!durations.is_empty()).then(|| durations.iter().sum::<f64>() / durations.len() as f64),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(robot: usize, id: u64, issue: f64, done: Option<f64>) -> TaskRecord {
        TaskRecord { robot, task_id: id, goal: Vec3::ZERO, issue_time: issue, completion_time: done }
    }

    fn summary(robot: usize, start: Vec3, end: Vec3, goal: Vec3) -> RobotSummary {
        RobotSummary { robot, final_position: end, window_start_position: Some(start), current_goal: Some(goal) }
    }

    #[test]
    fn clean_run() {
        let tasks = vec![task(0, 0, 0.0, Some(5.0)), task(0, 1, 5.0, Some(9.0))];
        let robots = vec![summary(0, Vec3::new(3.0, 0.0, 0.0), Vec3::ZERO, Vec3::ZERO)];
        let m = compute_metrics(&tasks, &[], &robots, 0.2, 0.1);
        assert_eq!(m.collision_rate, 0.0);
        assert_eq!(m.completion_rate, 1.0);
        assert_eq!(m.mean_navigation_duration, Some(4.5));
        assert_eq!(m.deadlocked_robots, 0);
    }

    #[test]
    fn pinned_robot_is_deadlocked() {
        let robots = vec![summary(0, Vec3::ZERO, Vec3::new(0.05, 0.0, 0.0), Vec3::new(5.0, 0.0, 0.0))];
        let m = compute_metrics(&[task(0, 0, 0.0, None)], &[], &robots, 0.2, 0.1);
        assert_eq!(m.deadlocked_robots, 1);
        assert_eq!(m.deadlock_rate, 1.0);
    }

    #[test]
    fn one_collided_task_in_ten() {
        let tasks: Vec<_> = (0..10).map(|k| task(0, k, k as f64 * 10.0, Some(k as f64 * 10.0 + 5.0))).collect();
        let hit = CollisionEvent { time: 32.0, a: Entity::Robot(0), b: Entity::Static };
        let m = compute_metrics(&tasks, &[hit], &[], 0.2, 0.1);
        assert_eq!(m.collided_tasks, 1);
        assert!((m.collision_rate - 0.1).abs() < 1e-12);
        assert!((m.completion_rate - 0.9).abs() < 1e-12);
        assert!(m.collided_tasks + m.completed_tasks <= m.tasks);
    }
}
