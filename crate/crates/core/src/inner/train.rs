use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;

use super::reinforce::{reinforce_update, reset_policy, rollout, Agent, FrozenBatch, ReinforceConfig};
use super::weights::WeightFunction;
use crate::outer::{
    bilevel_outer_grad, gate_with, outer_grad_step, NeumannConfig, OuterStepConfig, RndProposer,
};
use crate::record::{Experiment, RunRecord};
use crate::rng::{rng_from_seed, split_label, Rng};
use crate::sampling::{NoveltyScorer, WeightBox};
use crate::scheduler::{run_morse, Components, OuterOutcome, Schedule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CartpoleStrategy {
    /// Random initial weights, never updated.
    Constant,
    Gradient,
    /// Gradient plus a blind weight and policy reinitialisation every few outer steps.
    GradientWithReset,
    /// Gradient plus the performance-gated novelty explorer.
    Morse,
}

impl CartpoleStrategy {
    pub const ALL: [CartpoleStrategy; 4] = [
        CartpoleStrategy::Constant,
        CartpoleStrategy::Gradient,
        CartpoleStrategy::GradientWithReset,
        CartpoleStrategy::Morse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            CartpoleStrategy::Constant => "constant",
            CartpoleStrategy::Gradient => "gradient",
            CartpoleStrategy::GradientWithReset => "gradient_reset",
            CartpoleStrategy::Morse => "morse",
        }
    }
}

impl fmt::Display for CartpoleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for CartpoleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "constant" => CartpoleStrategy::Constant,
            "gradient" => CartpoleStrategy::Gradient,
            "gradient_reset" | "gradient_with_reset" => CartpoleStrategy::GradientWithReset,
            "morse" => CartpoleStrategy::Morse,
            other => return Err(Error::Config(format!("unknown cartpole strategy '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleConfig {
    pub epochs: usize,
    pub episodes: usize,
    pub reinforce: ReinforceConfig,
    pub neumann: NeumannConfig,
    pub outer: OuterStepConfig,
    pub weight_box: WeightBox,
    /// State-conditioned weight network instead of a constant vector.
    pub state_conditioned: bool,
    pub t_grad: usize,
    pub t_explore: usize,
    /// Outer steps between blind resets.
    pub reset_every: usize,
    pub alpha: f64,
    pub candidates: usize,
    pub tau: f64,
}

impl Default for CartpoleConfig {
    fn default() -> Self {
        Self {
            epochs: 360,
            episodes: 20,
            reinforce: ReinforceConfig::default(),
            neumann: NeumannConfig::default(),
            outer: OuterStepConfig::default(),
            weight_box: WeightBox::uniform(4, 0.0, 1.0).expect("unit box"),
            state_conditioned: true,
            t_grad: 15,
            t_explore: 30,
            reset_every: 5,
            alpha: 0.05,
            candidates: 64,
            tau: 10.0,
        }
    }
}

impl CartpoleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.episodes == 0 || self.reset_every == 0 || self.candidates == 0 {
            return Err(Error::Config("epochs, episodes, reset_every and candidates must be positive".into()));
        }
        if self.weight_box.dim() != crate::cartpole::NUM_COMPONENTS {
            return Err(Error::shape("cartpole weight box", crate::cartpole::NUM_COMPONENTS, self.weight_box.dim()));
        }
        if !(self.alpha >= 0.0) || !(self.tau > 0.0) {
            return Err(Error::Config("alpha must be >= 0 and tau > 0".into()));
        }
        self.schedule(0).validate()
    }

    pub fn schedule(&self, seed: u64) -> Schedule {
        Schedule {
            n_epoch: self.epochs,
            t_grad: self.t_grad,
            t_explore: self.t_explore,
            rng_seed: seed,
        }
    }

    fn weight_function(&self, seed: u64, target: &[f64]) -> Result<WeightFunction> {
        if self.state_conditioned {
            WeightFunction::network_at(seed, target, self.weight_box.clone())
        } else {
            WeightFunction::constant(target.to_vec(), self.weight_box.clone())
        }
    }
}

type GateFn<'a> = dyn FnMut(usize, f64, f64, &[f64]) -> Result<Option<Vec<f64>>> + 'a;

struct CartpoleRun<'a> {
    cfg: &'a CartpoleConfig,
    strategy: CartpoleStrategy,
    agent: Agent,
    wf: WeightFunction,
    batch: Option<FrozenBatch>,
    rollout_rng: Rng,
    reset_rng: Rng,
    outer_steps: usize,
    gate: Option<Box<GateFn<'a>>>,
}

impl Components for CartpoleRun<'_> {
    fn inner_epoch(&mut self, _epoch: usize) -> Result<f64> {
        let batch = rollout(&self.agent.policy, self.cfg.episodes, &mut self.rollout_rng)?;
        let frozen = FrozenBatch::new(&batch, self.cfg.reinforce.gamma);
        reinforce_update(&mut self.agent, &frozen, &self.wf, &self.cfg.reinforce)?;
        self.batch = Some(frozen);
        Ok(batch.performance)
    }

    fn has_outer(&self) -> bool {
        self.strategy != CartpoleStrategy::Constant
    }

    fn outer_step(&mut self, _epoch: usize) -> Result<OuterOutcome> {
        let batch = self.batch.as_ref().ok_or_else(|| Error::Contract("outer step before rollout".into()))?;
        let (agent, cfg) = (&self.agent, self.cfg);
        let report = outer_grad_step(
            &mut self.wf,
            |wf| bilevel_outer_grad(agent, wf, batch, cfg.reinforce.l2, &cfg.neumann),
            &cfg.outer,
        )?;
        self.outer_steps += 1;
        if self.strategy == CartpoleStrategy::GradientWithReset && self.outer_steps % cfg.reset_every == 0 {
            let target = cfg.weight_box.sample(&mut self.reset_rng);
            self.adopt(&target)?;
            return Ok(OuterOutcome::Reset);
        }
        Ok(if report.skipped {
            OuterOutcome::Skipped
        } else {
            OuterOutcome::Applied
        })
    }

    fn gate(&mut self, epoch: usize, delta_r: f64, p: f64) -> Result<Option<Vec<f64>>> {
        let current = self.wf.snapshot();
        match self.gate.as_mut() {
            Some(g) => g(epoch, delta_r, p, &current),
            None => Ok(None),
        }
    }

    fn adopt(&mut self, w: &[f64]) -> Result<()> {
        self.wf = self.cfg.weight_function(self.reset_rng.random(), w)?;
        reset_policy(&mut self.agent, &mut self.reset_rng)
    }

    fn snapshot(&self) -> Vec<f64> {
        self.wf.snapshot()
    }
}

fn build_run<'a>(cfg: &'a CartpoleConfig, strategy: CartpoleStrategy, seed: u64) -> Result<CartpoleRun<'a>> {
    cfg.validate()?;
    let mut init_rng = rng_from_seed(split_label(seed, "weights"));
    let target = cfg.weight_box.sample(&mut init_rng);
    Ok(CartpoleRun {
        cfg,
        strategy,
        agent: Agent::new(split_label(seed, "policy"))?,
        wf: cfg.weight_function(init_rng.random(), &target)?,
        batch: None,
        rollout_rng: rng_from_seed(split_label(seed, "rollout")),
        reset_rng: rng_from_seed(split_label(seed, "reset")),
        outer_steps: 0,
        gate: None,
    })
}

fn finish(mut run: CartpoleRun<'_>, schedule: &Schedule, started: Instant) -> Result<(RunRecord, Agent)> {
    let series = run_morse(schedule, &mut run)?;
    let final_score = series.last().map_or(0.0, |r| r.value);
    let best_score = series.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let strategy = run.strategy.tag().to_string();
    let record = RunRecord {
        run_id: RunRecord::make_run_id(Experiment::Cartpole, &strategy, schedule.rng_seed, "cartpole", 0),
        experiment: Experiment::Cartpole,
        strategy,
        group: "cartpole".into(),
        seed: schedule.rng_seed,
        instance_seed: 0,
        series,
        final_score,
        best_score,
        wall_ms: started.elapsed().as_millis() as u64,
        config_hash: String::new(),
    };
    Ok((record, run.agent))
}

/// One CartPole training run. The series holds one row per epoch with the
/// rollout success rate, the event and the weight snapshot.
pub fn train_cartpole(strategy: CartpoleStrategy, cfg: &CartpoleConfig, seed: u64) -> Result<RunRecord> {
    train_cartpole_agent(strategy, cfg, seed).map(|(r, _)| r)
}

/// [`train_cartpole`], also returning the trained agent.
pub fn train_cartpole_agent(strategy: CartpoleStrategy, cfg: &CartpoleConfig, seed: u64) -> Result<(RunRecord, Agent)> {
    let started = Instant::now();
    let mut run = build_run(cfg, strategy, seed)?;
    if strategy == CartpoleStrategy::Morse {
        let mut scorer = NoveltyScorer::new(cfg.weight_box.dim(), split_label(seed, "scorer"))?;
        let mut gate_rng = rng_from_seed(split_label(seed, "gate"));
        run.gate = Some(Box::new(move |_epoch, delta_r, p, current: &[f64]| {
            scorer.push_history(current)?;
            let mut proposer = RndProposer {
                scorer: &mut scorer,
                candidates: cfg.candidates,
                tau: cfg.tau,
                space: &cfg.weight_box,
            };
            gate_with(cfg.alpha, delta_r, p, &mut proposer, &mut gate_rng)
        }));
    }
    finish(run, &cfg.schedule(seed), started)
}

/// [`CartpoleStrategy::Morse`] with a caller-supplied gate
/// `(epoch, delta_r, p, current_weights) -> Option<new_weights>`.
pub fn train_cartpole_with_gate<G>(cfg: &CartpoleConfig, seed: u64, gate: G) -> Result<RunRecord>
where
    G: FnMut(usize, f64, f64, &[f64]) -> Result<Option<Vec<f64>>>,
{
    let started = Instant::now();
    let mut run = build_run(cfg, CartpoleStrategy::Morse, seed)?;
    run.gate = Some(Box::new(gate));
    finish(run, &cfg.schedule(seed), started).map(|(r, _)| r)
}
