//! Inner reinforcement-learning loop on the multi-objective CartPole.

mod policy;
mod reinforce;
mod train;
mod weights;

pub use policy::{scaled_observation, Policy, OBS_SCALE, POLICY_SIZES};
pub use reinforce::{
    reinforce_update, reinforce_update_with_returns, reset_policy, rollout, Actor, Agent, Baseline,
    FrozenBatch, ReinforceConfig, RolloutBatch, Step, Trajectory, UpdateReport, BUFFER_CAPACITY,
};
pub use train::{train_cartpole, train_cartpole_agent, train_cartpole_with_gate, CartpoleConfig, CartpoleStrategy};
pub use weights::{WeightFunction, WEIGHT_NET_SIZES};
