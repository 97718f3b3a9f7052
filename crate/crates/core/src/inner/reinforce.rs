use rand::Rng as _;

use crate::cartpole::{self, Action, CartState, RewardVector, NUM_COMPONENTS};
use crate::rng::Rng;
use crate::{Error, Result};

use super::policy::{scaled_observation, Policy};
use super::weights::WeightFunction;

pub const BUFFER_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: CartState,
    pub action: Action,
    pub reward: RewardVector,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub success: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub trajectories: Vec<Trajectory>,
    /// Fraction of episodes that survived the full horizon.
    pub performance: f64,
    pub episodes: usize,
    pub successes: usize,
}

impl RolloutBatch {
    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// Anything that picks an action; the stochastic [`Policy`] is the usual one.
pub trait Actor {
    fn act(&self, s: &CartState, rng: &mut Rng) -> (Action, f64);
}

impl Actor for Policy {
    fn act(&self, s: &CartState, rng: &mut Rng) -> (Action, f64) {
        Policy::act(self, s, rng)
    }
}

impl<F: Fn(&CartState) -> Action> Actor for F {
    fn act(&self, s: &CartState, _rng: &mut Rng) -> (Action, f64) {
        (self(s), 0.0)
    }
}

/// Sample `n_episodes` episodes. At most [`BUFFER_CAPACITY`] steps are stored;
/// episodes past that point still count toward the success rate.
pub fn rollout<A: Actor + ?Sized>(actor: &A, n_episodes: usize, rng: &mut Rng) -> Result<RolloutBatch> {
    if n_episodes == 0 {
        return Err(Error::Config("rollout needs at least one episode".into()));
    }
    let mut trajectories = Vec::with_capacity(n_episodes);
    let mut stored = 0;
    let mut successes = 0;
    for _ in 0..n_episodes {
        let mut s = cartpole::reset(rng);
        let mut traj = Trajectory::default();
        loop {
            let (action, log_prob) = actor.act(&s, rng);
            let tr = cartpole::step(&s, action)?;
            if stored < BUFFER_CAPACITY {
                traj.steps.push(Step {
                    state: s,
                    action,
                    reward: tr.reward,
                    log_prob,
                });
                stored += 1;
            }
            s = tr.next;
            if tr.done {
                traj.success = tr.success;
                break;
            }
        }
        successes += traj.success as usize;
        trajectories.push(traj);
    }
    Ok(RolloutBatch {
        trajectories,
        performance: successes as f64 / n_episodes as f64,
        episodes: n_episodes,
        successes,
    })
}

/// Bias-corrected exponential moving average of batch-mean returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    ema: f64,
    count: u32,
    pub beta: f64,
}

impl Default for Baseline {
    fn default() -> Self {
        Self {
            ema: 0.0,
            count: 0,
            beta: 0.1,
        }
    }
}

impl Baseline {
    pub fn observe(&mut self, batch_mean: f64) {
        self.ema = (1.0 - self.beta) * self.ema + self.beta * batch_mean;
        self.count += 1;
    }

    pub fn value(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.ema / (1.0 - (1.0 - self.beta).powi(self.count as i32))
        }
    }
}

/// Actor plus the baseline statistic that stands in for a critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: Policy,
    pub baseline: Baseline,
}

impl Agent {
    pub fn new(seed: u64) -> Result<Self> {
        Ok(Self {
            policy: Policy::new(seed)?,
            baseline: Baseline::default(),
        })
    }
}

/// Fully reinitialise the actor from a fresh seed and zero the baseline.
pub fn reset_policy(agent: &mut Agent, rng: &mut Rng) -> Result<()> {
    agent.policy = Policy::new(rng.random())?;
    agent.baseline = Baseline::default();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinforceConfig {
    pub gamma: f64,
    pub lr: f64,
    pub l2: f64,
    /// Gradient passes over each rollout batch.
    pub passes: usize,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-3,
            l2: 0.25,
            passes: 5,
        }
    }
}

/// A rollout batch flattened for repeated gradient evaluation.
#[derive(Debug, Clone)]
pub struct FrozenBatch {
    obs: Vec<[f64; 4]>,
    actions: Vec<Action>,
    rewards: Vec<[f64; NUM_COMPONENTS]>,
    /// `(start, end)` step ranges, one per episode.
    episodes: Vec<(usize, usize)>,
    pub gamma: f64,
}

impl FrozenBatch {
    pub fn new(batch: &RolloutBatch, gamma: f64) -> Self {
        let mut obs = Vec::new();
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let mut episodes = Vec::new();
        for traj in &batch.trajectories {
            let start = obs.len();
            for st in &traj.steps {
                obs.push(scaled_observation(&st.state));
                actions.push(st.action);
                rewards.push(st.reward.as_array());
            }
            if obs.len() > start {
                episodes.push((start, obs.len()));
            }
        }
        Self {
            obs,
            actions,
            rewards,
            episodes,
            gamma,
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Discounted return-to-go of a per-step scalar reward.
    fn returns_of(&self, per_step: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for &(s, e) in &self.episodes {
            let mut acc = 0.0;
            for t in (s..e).rev() {
                acc = per_step(t) + self.gamma * acc;
                out[t] = acc;
            }
        }
        out
    }

    /// `G_t = sum_k gamma^(k-t) w(s_k) . R_k`.
    pub fn composite_returns(&self, wf: &WeightFunction) -> Vec<f64> {
        let weights: Vec<[f64; NUM_COMPONENTS]> = self.obs.iter().map(|o| wf.emit_obs(o)).collect();
        self.returns_of(|t| weights[t].iter().zip(&self.rewards[t]).map(|(w, r)| w * r).sum())
    }

    /// Discounted return-to-go of a single reward component.
    pub fn component_returns(&self, component: usize) -> Vec<f64> {
        self.returns_of(|t| self.rewards[t][component])
    }

    /// `(1/N) sum_t adv_t grad_theta log pi(a_t | s_t)` at `params`.
    pub fn score_gradient(&self, policy: &Policy, params: &[f64], adv: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; params.len()];
        if self.is_empty() {
            return g;
        }
        let scale = 1.0 / self.len() as f64;
        for t in 0..self.len() {
            if adv[t] != 0.0 {
                policy.accumulate_log_prob_grad(params, &self.obs[t], self.actions[t], adv[t] * scale, &mut g);
            }
        }
        g
    }

    /// `(1/N) sum_t adv_t log pi(a_t | s_t)`; the scalar whose gradient is
    /// [`FrozenBatch::score_gradient`].
    pub fn surrogate(&self, policy: &Policy, params: &[f64], adv: &[f64]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..self.len())
            .map(|t| adv[t] * policy.probs_with(params, &self.obs[t])[self.actions[t].index()].ln())
            .sum();
        total / self.len() as f64
    }

    /// Per-step `c_t = u . grad_theta log pi(a_t | s_t)`.
    pub fn directional_log_prob(&self, policy: &Policy, u: &[f64]) -> Vec<f64> {
        let params = policy.net.params();
        let mut buf = vec![0.0; params.len()];
        (0..self.len())
            .map(|t| {
                buf.iter_mut().for_each(|b| *b = 0.0);
                policy.accumulate_log_prob_grad(params, &self.obs[t], self.actions[t], 1.0, &mut buf);
                crate::net::dot(&buf, u)
            })
            .collect()
    }

    /// `grad_phi (1/N) sum_t c_t G_t(phi)` for fixed per-step coefficients `c`.
    pub fn weight_gradient(&self, wf: &WeightFunction, c: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; wf.num_params()];
        if self.is_empty() {
            return g;
        }
        let scale = 1.0 / self.len() as f64;
        for &(s, e) in &self.episodes {
            // C_k = sum_{t <= k} gamma^(k-t) c_t
            let mut carried = 0.0;
            for k in s..e {
                carried = carried * self.gamma + c[k];
                if carried == 0.0 {
                    continue;
                }
                let cot: Vec<f64> = self.rewards[k].iter().map(|r| r * carried * scale).collect();
                if cot.iter().any(|x| *x != 0.0) {
                    wf.accumulate_grad(&self.obs[k], &cot, &mut g);
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateReport {
    pub passes: usize,
    pub skipped: bool,
    pub baseline: f64,
    pub grad_norm: f64,
}

/// REINFORCE with a running-mean baseline: `cfg.passes` ascent steps on
/// `(1/N) sum_t (G_t - b) log pi(a_t | s_t)` with L2 decay.
pub fn reinforce_update(
    agent: &mut Agent,
    batch: &FrozenBatch,
    wf: &WeightFunction,
    cfg: &ReinforceConfig,
) -> Result<UpdateReport> {
    let returns = batch.composite_returns(wf);
    reinforce_update_with_returns(agent, batch, &returns, cfg)
}

/// [`reinforce_update`] for precomputed per-step returns.
pub fn reinforce_update_with_returns(
    agent: &mut Agent,
    batch: &FrozenBatch,
    returns: &[f64],
    cfg: &ReinforceConfig,
) -> Result<UpdateReport> {
    if batch.is_empty() {
        return Err(Error::Config("reinforce update on an empty batch".into()));
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    agent.baseline.observe(mean);
    let b = agent.baseline.value();
    let adv: Vec<f64> = returns.iter().map(|g| g - b).collect();
    let mut report = UpdateReport {
        passes: 0,
        skipped: false,
        baseline: b,
        grad_norm: 0.0,
    };
    for _ in 0..cfg.passes.max(1) {
        let g = batch.score_gradient(&agent.policy, agent.policy.net.params(), &adv);
        report.grad_norm = crate::net::norm(&g);
        let descent: Vec<f64> = g.iter().map(|x| -x).collect();
        match agent.policy.net.apply_sgd(&descent, cfg.lr, cfg.l2) {
            Ok(()) => report.passes += 1,
            Err(Error::Numeric(_)) => {
                report.skipped = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sampling::WeightBox;

    fn unit_box() -> WeightBox {
        WeightBox::uniform(4, 0.0, 1.0).unwrap()
    }

    #[test]
    fn always_left_never_succeeds() {
        let left = |_: &CartState| Action::Left;
        let mut rng = rng_from_seed(2);
        let b = rollout(&left, 20, &mut rng).unwrap();
        assert_eq!(b.performance, 0.0);
        assert!(b.trajectories.iter().all(|t| t.len() < cartpole::HORIZON));
    }

    #[test]
    fn performance_is_success_ratio() {
        let pol = Policy::new(1).unwrap();
        let mut rng = rng_from_seed(3);
        let b = rollout(&pol, 25, &mut rng).unwrap();
        let s = b.trajectories.iter().filter(|t| t.success).count();
        assert_eq!(b.performance, s as f64 / 25.0);
        assert!((0.0..=1.0).contains(&b.performance));
    }

    #[test]
    fn rollouts_replay_and_log_probs_match() {
        let pol = Policy::new(4).unwrap();
        let a = rollout(&pol, 10, &mut rng_from_seed(9)).unwrap();
        let b = rollout(&pol, 10, &mut rng_from_seed(9)).unwrap();
        assert_eq!(a, b);
        for t in &a.trajectories {
            for st in &t.steps {
                assert!((st.log_prob - pol.log_prob(&st.state, st.action)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn survival_sums_to_episode_length() {
        let pol = Policy::new(5).unwrap();
        let b = rollout(&pol, 10, &mut rng_from_seed(1)).unwrap();
        for t in &b.trajectories {
            let s: f64 = t.steps.iter().map(|s| s.reward.survival).sum();
            assert_eq!(s as usize, t.len());
            assert_eq!(t.success, t.len() == cartpole::HORIZON);
        }
    }

    #[test]
    fn zero_rewards_mean_pure_decay() {
        let mut agent = Agent::new(7).unwrap();
        let batch = rollout(&agent.policy, 3, &mut rng_from_seed(0)).unwrap();
        let frozen = FrozenBatch::new(&batch, 0.99);
        let wf = WeightFunction::constant(vec![0.0; 4], unit_box()).unwrap();
        let before = agent.policy.net.clone();
        let cfg = ReinforceConfig {
            passes: 1,
            ..Default::default()
        };
        reinforce_update(&mut agent, &frozen, &wf, &cfg).unwrap();
        let expect = before.sgd_step(&vec![0.0; before.num_params()], cfg.lr, cfg.l2).unwrap();
        assert_eq!(agent.policy.net, expect);
    }

    #[test]
    fn survival_basis_reduces_to_plain_reinforce() {
        let batch = rollout(&Policy::new(3).unwrap(), 4, &mut rng_from_seed(5)).unwrap();
        let frozen = FrozenBatch::new(&batch, 0.99);
        let wf = WeightFunction::constant(vec![0.0, 1.0, 0.0, 0.0], unit_box()).unwrap();
        let cfg = ReinforceConfig::default();
        let mut a = Agent::new(3).unwrap();
        let mut b = a.clone();
        reinforce_update(&mut a, &frozen, &wf, &cfg).unwrap();
        let plain = frozen.component_returns(1);
        reinforce_update_with_returns(&mut b, &frozen, &plain, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reset_policy_is_seeded_and_restores_entropy() {
        let mut a = Agent::new(1).unwrap();
        a.baseline.observe(5.0);
        let mut b = a.clone();
        reset_policy(&mut a, &mut rng_from_seed(12)).unwrap();
        reset_policy(&mut b, &mut rng_from_seed(12)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.baseline.value(), 0.0);
    }

    #[test]
    fn baseline_is_bias_corrected() {
        let mut b = Baseline::default();
        assert_eq!(b.value(), 0.0);
        b.observe(10.0);
        assert!((b.value() - 10.0).abs() < 1e-12);
        b.observe(10.0);
        assert!((b.value() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut agent = Agent::new(0).unwrap();
        let frozen = FrozenBatch::new(
            &RolloutBatch {
                trajectories: vec![],
                performance: 0.0,
                episodes: 0,
                successes: 0,
            },
            0.99,
        );
        let wf = WeightFunction::constant(vec![0.0; 4], unit_box()).unwrap();
        assert!(reinforce_update(&mut agent, &frozen, &wf, &ReinforceConfig::default()).is_err());
    }
}
