use std::collections::BTreeMap;

use crate::geometry::{separating_hyperplane, Hyperplane};
use crate::sim::RobotState;

/// Separating planes towards one teammate, oldest first, ego on the
/// negative side of every plane.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeammatePlanes {
    pub planes: Vec<Hyperplane>,
    /// Latest plan stamp acknowledged from this teammate.
    pub acknowledged: Option<f64>,
}

/// Discretized separating hyperplane trajectories, one per teammate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DshtStore {
    per_teammate: BTreeMap<usize, TeammatePlanes>,
    /// Appends skipped because the two bodies already overlapped.
    pub skipped_overlaps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    /// The shapes overlap; nothing stored.
    SkippedOverlap,
    /// Stamp not newer than the newest stored plane.
    SkippedStale,
}

impl DshtStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn teammates(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_teammate.keys().copied()
    }

    pub fn planes(&self, teammate: usize) -> &[Hyperplane] {
        self.per_teammate.get(&teammate).map_or(&[], |t| t.planes.as_slice())
    }

    pub fn acknowledged(&self, teammate: usize) -> Option<f64> {
        self.per_teammate.get(&teammate).and_then(|t| t.acknowledged)
    }

    pub fn total_planes(&self) -> usize {
        self.per_teammate.values().map(|t| t.planes.len()).sum()
    }

    /// Appends the plane separating the two world-frame shapes, stamped `now`.
    pub fn append(&mut self, ego: &RobotState, teammate: &RobotState, now: f64) -> AppendOutcome {
        let entry = self.per_teammate.entry(teammate.id).or_default();
        if entry.planes.last().is_some_and(|p| p.stamp >= now) {
            return AppendOutcome::SkippedStale;
        }
        match separating_hyperplane(&ego.world_box(), &teammate.world_box()) {
            Ok(h) => {
                entry.planes.push(h.with_stamp(now));
                AppendOutcome::Appended
            }
            Err(_) => {
                self.skipped_overlaps += 1;
                AppendOutcome::SkippedOverlap
            }
        }
    }

    /// Handles a plan-success notice from `teammate`: planes older than the
    /// plan stamp are dropped, the plane at the stamp itself is kept since
    /// the teammate's new plan was built against it. Stale or duplicate
    /// notices change nothing.
    pub fn prune(&mut self, teammate: usize, plan_stamp: f64) -> bool {
        let entry = self.per_teammate.entry(teammate).or_default();
        if entry.acknowledged.is_some_and(|a| plan_stamp <= a) {
            return false;
        }
        entry.acknowledged = Some(plan_stamp);
        entry.planes.retain(|p| p.stamp >= plan_stamp);
        true
    }
}
