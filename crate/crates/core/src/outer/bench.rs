use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use super::{gate_with, CemProposer, CmaProposer, Proposer, RandomProposer, RndProposer};
use crate::landscape::{finite_diff_grad, Field};
use crate::record::{Event, Experiment, RunRecord, SeriesRow};
use crate::rng::{rng_from_seed, split_label};
use crate::sampling::{NoveltyScorer, WeightBox};
use crate::{Error, Result};

pub const CHECK_INTERVAL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SamplerKind {
    Rnd,
    Random,
    Cem,
    Cma,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [SamplerKind::Random, SamplerKind::Cem, SamplerKind::Cma, SamplerKind::Rnd];

    pub fn tag(self) -> &'static str {
        match self {
            SamplerKind::Rnd => "rnd",
            SamplerKind::Random => "random",
            SamplerKind::Cem => "cem",
            SamplerKind::Cma => "cma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchStrategy {
    NoExploration,
    /// Unconditional novelty-sampled reset at every check.
    PeriodicExploration,
    /// Performance-gated reset with the given sampler.
    Morse(SamplerKind),
}

impl BenchStrategy {
    pub fn tag(self) -> String {
        match self {
            BenchStrategy::NoExploration => "no_explore".into(),
            BenchStrategy::PeriodicExploration => "periodic".into(),
            BenchStrategy::Morse(s) => format!("morse_{}", s.tag()),
        }
    }
}

impl fmt::Display for BenchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

impl FromStr for BenchStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "no_explore" | "none" => BenchStrategy::NoExploration,
            "periodic" => BenchStrategy::PeriodicExploration,
            "morse" | "morse_rnd" | "rnd" => BenchStrategy::Morse(SamplerKind::Rnd),
            "morse_random" | "random" => BenchStrategy::Morse(SamplerKind::Random),
            "morse_cem" | "cem" => BenchStrategy::Morse(SamplerKind::Cem),
            "morse_cma" | "cma" => BenchStrategy::Morse(SamplerKind::Cma),
            other => return Err(Error::Config(format!("unknown bench strategy '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Total update events: gradient steps plus resets.
    pub budget: usize,
    pub lr: f64,
    pub check_interval: usize,
    pub alpha: f64,
    pub candidates: usize,
    pub tau: f64,
    /// Center CEM/CMA search distributions on the run's start point instead of the box center.
    pub anchor_at_start: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            lr: 0.05,
            check_interval: CHECK_INTERVAL,
            alpha: 0.01,
            candidates: 64,
            tau: 10.0,
            anchor_at_start: true,
        }
    }
}

/// One run of box-constrained gradient ascent on a 2-D field.
///
/// Every `check_interval` steps the exploring strategies consult their
/// sampler. The gate compares the current value with the value at the start
/// of the segment (after the previous check's step); a reset consumes that
/// step of the budget.
/// All samplers spend one step per reset. CEM and CMA score each handed-out
/// candidate by the value reached at the following check and update after
/// five scored candidates.
pub fn bench_run<F: Field + ?Sized>(
    field: &F,
    strategy: BenchStrategy,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<RunRecord> {
    if cfg.budget == 0 || cfg.check_interval == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("bench needs budget, check interval and lr > 0".into()));
    }
    let started = Instant::now();
    let space = WeightBox::uniform(2, -1.0, 1.0)?;
    let mut start_rng = rng_from_seed(split_label(seed, "start"));
    let mut gate_rng = rng_from_seed(split_label(seed, "gate"));
    let mut scorer = NoveltyScorer::new(2, split_label(seed, "scorer"))?;

    let s = space.sample(&mut start_rng);
    let mut x = [s[0], s[1]];
    let kind = match strategy {
        BenchStrategy::NoExploration => None,
        BenchStrategy::PeriodicExploration => Some(SamplerKind::Rnd),
        BenchStrategy::Morse(kind) => Some(kind),
    };
    let mut proposer: Option<Box<dyn Proposer + '_>> = kind
        .map(|kind| -> Result<Box<dyn Proposer + '_>> {
        Ok(match kind {
            SamplerKind::Rnd => Box::new(RndProposer {
                scorer: &mut scorer,
                candidates: cfg.candidates,
                tau: cfg.tau,
                space: &space,
            }),
            SamplerKind::Random => Box::new(RandomProposer { space: &space }),
            SamplerKind::Cem if cfg.anchor_at_start => Box::new(CemProposer::around(&space, s.clone())?),
            SamplerKind::Cma if cfg.anchor_at_start => Box::new(CmaProposer::around(&space, s.clone())?),
            SamplerKind::Cem => Box::new(CemProposer::new(&space)),
            SamplerKind::Cma => Box::new(CmaProposer::new(&space)),
        })
    })
    .transpose()?;

    let mut value = field.value(x);
    let mut best = value;
    // value at the start of the current check segment
    let mut segment_start = value;
    let mut series = Vec::with_capacity(cfg.budget);

    for t in 0..cfg.budget {
        let mut event = Event::Grad;
        if let Some(p) = proposer.as_mut() {
            if t > 0 && t % cfg.check_interval == 0 {
                let delta = value - segment_start;
                p.observe(&x, value)?;
                let jump = match strategy {
                    BenchStrategy::PeriodicExploration => {
                        p.prepare();
                        Some(p.propose(&mut gate_rng)?)
                    }
                    _ => gate_with(cfg.alpha, delta, value, p.as_mut(), &mut gate_rng)?,
                };
                if let Some(w) = jump {
                    x = [w[0], w[1]];
                    event = Event::Reset;
                }
            }
        }
        if event == Event::Grad {
            let g = finite_diff_grad(field, x)?.grad;
            x = [
                (x[0] + cfg.lr * g[0]).clamp(-1.0, 1.0),
                (x[1] + cfg.lr * g[1]).clamp(-1.0, 1.0),
            ];
        }
        value = field.value(x);
        best = best.max(value);
        if t % cfg.check_interval == 0 {
            segment_start = value;
        }
        series.push(SeriesRow {
            index: t,
            value,
            event,
            weights: x.to_vec(),
        });
    }

    let strategy_tag = strategy.tag();
    Ok(RunRecord {
        run_id: RunRecord::make_run_id(Experiment::Bench, &strategy_tag, seed, "field", 0),
        experiment: Experiment::Bench,
        strategy: strategy_tag,
        group: "field".into(),
        seed,
        instance_seed: 0,
        series,
        final_score: value,
        best_score: best,
        wall_ms: started.elapsed().as_millis() as u64,
        config_hash: String::new(),
    })
}
