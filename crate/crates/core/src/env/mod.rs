//! Feature maps, KNR ground-truth dynamics, rewards and episode rollout.

mod features;
mod reward;
mod world;
pub mod zoo;

pub use features::{cell_index, FeatureMap, FeatureSpec};
pub use reward::{RewardFn, RewardSet, RewardSpec};
pub use world::{
    monte_carlo_value_on, rollout_on, ActionSpace, Dynamics, KnrWorld, Policy, Trajectory, TrajectoryStep,
    Transition, WorldSpec,
};
