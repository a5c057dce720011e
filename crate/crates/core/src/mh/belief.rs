use crate::geometry::Vec3;
use crate::sim::{BehaviorModel, MovementModel};

/// Probability floor applied after every update.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

/// Distribution over candidate behavior models of one dynamic obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorBelief {
    pub models: Vec<BehaviorModel>,
    pub probabilities: Vec<f64>,
}

impl BehaviorBelief {
    pub fn uniform(models: Vec<BehaviorModel>) -> Self {
        assert!(!models.is_empty(), "belief needs at least one candidate");
        let p = 1.0 / models.len() as f64;
        let probabilities = vec![p; models.len()];
        Self { models, probabilities }
    }

    /// Hypotheses formed when an obstacle is first seen at `pos` moving at `vel`:
    /// circling the vertical axis either way at the observed planar speed,
    /// keeping its current velocity, or standing still.
    pub fn initial_guess(vel: Vec3) -> Self {
        let planar = (vel.x * vel.x + vel.y * vel.y).sqrt();
        Self::uniform(vec![
            BehaviorModel::non_interactive(MovementModel::Rotation { speed: planar }),
            BehaviorModel::non_interactive(MovementModel::Rotation { speed: -planar }),
            BehaviorModel::non_interactive(MovementModel::ConstantVelocity(vel)),
            BehaviorModel::non_interactive(MovementModel::Stationary),
        ])
    }

    pub fn most_likely(&self) -> (usize, f64) {
        self.probabilities
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best })
    }

    fn renormalize(&mut self) {
        let total: f64 = self.probabilities.iter().sum();
        if total > 0.0 && total.is_finite() {
            self.probabilities.iter_mut().for_each(|p| *p /= total);
        } else {
            let u = 1.0 / self.probabilities.len() as f64;
            self.probabilities.iter_mut().for_each(|p| *p = u);
        }
    }
}

/// Bayesian update with an isotropic Gaussian likelihood on the residual
/// between the measured velocity and each model's predicted velocity.
/// Probabilities are floored at [`PROBABILITY_FLOOR`] and renormalized.
pub fn update_behavior_belief(
    belief: &BehaviorBelief,
    obs_position: Vec3,
    measured_velocity: Vec3,
    _dt: f64,
    sigma_v: f64,
) -> BehaviorBelief {
    let mut out = belief.clone();
    let inv = 1.0 / (2.0 * sigma_v * sigma_v);
    // work in log space relative to the best model to avoid underflow
    let logs: Vec<f64> = belief
        .models
        .iter()
        .zip(&belief.probabilities)
        .map(|(m, p)| {
            let predicted = m.movement.desired_velocity(obs_position);
            p.max(f64::MIN_POSITIVE).ln() - (measured_velocity - predicted).norm_squared() * inv
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (p, l) in out.probabilities.iter_mut().zip(&logs) {
        *p = (l - peak).exp();
    }
    out.renormalize();
    for p in out.probabilities.iter_mut() {
        *p = p.max(PROBABILITY_FLOOR);
    }
    out.renormalize();
    out
}
