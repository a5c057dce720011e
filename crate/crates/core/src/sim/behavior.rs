use crate::geometry::Vec3;

/// Movement model: obstacle position -> desired velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MovementModel {
    /// Circles the vertical axis through the origin at constant `speed`;
    /// positive is counter-clockwise seen from above.
    Rotation { speed: f64 },
    ConstantVelocity(Vec3),
    Stationary,
}

impl MovementModel {
    pub fn desired_velocity(&self, p: Vec3) -> Vec3 {
        match *self {
            MovementModel::Rotation { speed } => {
                let r = (p.x * p.x + p.y * p.y).sqrt();
                if r < 1e-9 {
                    // undefined on the axis; the obstacle stays put
                    Vec3::ZERO
                } else {
                    Vec3::new(-p.y, p.x, 0.0) * (speed / r)
                }
            }
            MovementModel::ConstantVelocity(v) => v,
            MovementModel::Stationary => Vec3::ZERO,
        }
    }
}

/// Interaction model: (obstacle position, desired velocity, ego position,
/// ego velocity) -> obstacle velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionModel {
    Identity,
    /// Adds a push away from an ego closer than `radius`, capped at `max_speed`.
    Repulsive { radius: f64, gain: f64, max_speed: f64 },
}

impl InteractionModel {
    pub fn velocity(&self, obs_pos: Vec3, desired: Vec3, ego_pos: Vec3, _ego_vel: Vec3) -> Vec3 {
        match *self {
            InteractionModel::Identity => desired,
            InteractionModel::Repulsive { radius, gain, max_speed } => {
                let away = obs_pos - ego_pos;
                let d = away.norm();
                if d >= radius || d < 1e-9 {
                    return desired;
                }
                (desired + away.normalized() * (gain * (radius - d))).clamp_norm(max_speed)
            }
        }
    }
}

/// Behavior model tuple of movement and interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorModel {
    pub movement: MovementModel,
    pub interaction: InteractionModel,
}

impl BehaviorModel {
    pub fn non_interactive(movement: MovementModel) -> Self {
        Self { movement, interaction: InteractionModel::Identity }
    }

    pub fn velocity(&self, pos: Vec3, ego_pos: Vec3, ego_vel: Vec3) -> Vec3 {
        self.interaction.velocity(pos, self.movement.desired_velocity(pos), ego_pos, ego_vel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_field_is_tangent() {
        let m = MovementModel::Rotation { speed: 0.3 };
        let v = m.desired_velocity(Vec3::new(2.0, 0.0, 1.0));
        assert!((v - Vec3::new(0.0, 0.3, 0.0)).norm() < 1e-15);
        assert_eq!(m.desired_velocity(Vec3::new(0.0, 0.0, 2.0)), Vec3::ZERO);
    }

    #[test]
    fn identity_interaction_passes_through() {
        let b = BehaviorModel::non_interactive(MovementModel::ConstantVelocity(Vec3::new(1.0, 2.0, 0.0)));
        assert_eq!(b.velocity(Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0), Vec3::ZERO), Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn repulsive_respects_cap() {
        let i = InteractionModel::Repulsive { radius: 2.0, gain: 10.0, max_speed: 0.5 };
        let v = i.velocity(Vec3::ZERO, Vec3::new(0.3, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0), Vec3::ZERO);
        assert!(v.norm() <= 0.5 + 1e-12);
        assert!(v.x < 0.0);
    }
}
