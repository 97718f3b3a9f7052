//! Fixtures shared by the kernel benchmarks.

pub use morse_core;

use morse_core::inner::{rollout, Agent, FrozenBatch};
use morse_core::rng::rng_from_seed;
use morse_core::Result;

/// A frozen rollout batch from a fresh policy, plus the agent that produced it.
pub fn cartpole_batch(seed: u64, episodes: usize) -> Result<(Agent, FrozenBatch)> {
    let agent = Agent::new(seed)?;
    let batch = rollout(&agent.policy, episodes, &mut rng_from_seed(seed ^ 0x5eed))?;
    Ok((agent, FrozenBatch::new(&batch, 0.99)))
}
