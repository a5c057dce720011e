//! Deterministic fixed-step world: double-integrator robots, scripted
//! dynamic obstacles, collision bookkeeping, and the message bus.

mod behavior;
mod bus;
mod world;

pub use behavior::{BehaviorModel, InteractionModel, MovementModel};
pub use bus::{BusMessage, BusStats, MessageBus, Payload, CENTRAL};
pub use world::{
    propagate_dynamic_obstacle, CollisionEvent, DynamicObstacle, Entity, RobotState, World, WorldConfig, DEFAULT_DT,
};
