//! Outer loop: the exploration gate, single-level ascent on synthetic
//! landscapes, and the implicit-function gradient for the RL setting.

mod bench;
mod bilevel;
mod neumann;

pub use bench::{bench_run, BenchConfig, BenchStrategy, SamplerKind, CHECK_INTERVAL};
pub use bilevel::{
    bilevel_outer_grad, implicit_outer_grad, outer_grad_step, OuterGrad, OuterStepConfig,
    OuterStepReport,
};
pub use neumann::{adaptive_damping, neumann_inverse_apply, NeumannConfig, NeumannResult};

use rand::Rng as _;

use crate::rng::Rng;
use crate::sampling::{softmax_select, CemState, CmaState, NoveltyScorer, WeightBox, CEM_BATCH};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationConfig {
    /// Candidates drawn per exploration event.
    pub candidates: usize,
    /// Improvement threshold; exploration is considered only when `delta < alpha`.
    pub alpha: f64,
    pub tau: f64,
    pub t_grad: usize,
    pub t_explore: usize,
    pub weight_box: WeightBox,
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates == 0 {
            return Err(Error::Config("exploration needs at least one candidate".into()));
        }
        if self.t_grad == 0 || self.t_explore == 0 || self.t_explore % self.t_grad != 0 {
            return Err(Error::Config(format!(
                "exploration interval {} must be a positive multiple of the gradient interval {}",
                self.t_explore, self.t_grad
            )));
        }
        if !(self.alpha >= 0.0) || !(self.tau > 0.0) {
            return Err(Error::Config("alpha must be >= 0 and tau > 0".into()));
        }
        Ok(())
    }
}

/// Source of reset candidates for the gate.
pub trait Proposer {
    /// Called once the improvement test has failed, before the coin flip.
    fn prepare(&mut self) {}

    /// Pick the weight to jump to.
    fn propose(&mut self, rng: &mut Rng) -> Result<Vec<f64>>;

    /// A weight the search has spent time at, with the performance reached there.
    fn observe(&mut self, _w: &[f64], _value: f64) -> Result<()> {
        Ok(())
    }
}

/// Novelty-softmax proposals: fit the predictor, draw `candidates` uniform
/// points, and sample one with probability `softmax(tau * novelty)`.
pub struct RndProposer<'a> {
    pub scorer: &'a mut NoveltyScorer,
    pub candidates: usize,
    pub tau: f64,
    pub space: &'a WeightBox,
}

impl Proposer for RndProposer<'_> {
    fn prepare(&mut self) {
        self.scorer.fit();
    }

    fn propose(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        let cands: Vec<Vec<f64>> = (0..self.candidates).map(|_| self.space.sample(rng)).collect();
        let scores = cands.iter().map(|w| self.scorer.novelty(w)).collect::<Result<Vec<_>>>()?;
        let pick = softmax_select(&scores, self.tau, rng)?;
        let chosen = cands[pick].clone();
        self.scorer.push_history(&chosen)?;
        Ok(chosen)
    }

    fn observe(&mut self, w: &[f64], _value: f64) -> Result<()> {
        self.scorer.push_history(w)
    }
}

/// The gate test alone: `false` when recent improvement reached `alpha`,
/// otherwise the proposer is prepared and a coin with success probability
/// `1 - p_curr` is flipped.
pub fn gate_open<P: Proposer + ?Sized>(
    alpha: f64,
    delta_r: f64,
    p_curr: f64,
    proposer: &mut P,
    rng: &mut Rng,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&p_curr) {
        return Err(Error::Config(format!("performance {p_curr} outside [0, 1]")));
    }
    if delta_r >= alpha {
        return Ok(false);
    }
    proposer.prepare();
    let u: f64 = rng.random();
    Ok(u < 1.0 - p_curr)
}

/// Performance-gated exploration step: [`gate_open`] followed by a proposal
/// when the gate opens.
pub fn gate_with<P: Proposer + ?Sized>(
    alpha: f64,
    delta_r: f64,
    p_curr: f64,
    proposer: &mut P,
    rng: &mut Rng,
) -> Result<Option<Vec<f64>>> {
    if gate_open(alpha, delta_r, p_curr, proposer, rng)? {
        proposer.propose(rng).map(Some)
    } else {
        Ok(None)
    }
}

/// The novelty-guided gate with the scorer as proposer.
pub fn explore_gate(
    cfg: &ExplorationConfig,
    delta_r: f64,
    p_curr: f64,
    scorer: &mut NoveltyScorer,
    rng: &mut Rng,
) -> Result<Option<Vec<f64>>> {
    let mut proposer = RndProposer {
        scorer,
        candidates: cfg.candidates,
        tau: cfg.tau,
        space: &cfg.weight_box,
    };
    gate_with(cfg.alpha, delta_r, p_curr, &mut proposer, rng)
}

/// Uniform proposals.
pub struct RandomProposer<'a> {
    pub space: &'a WeightBox,
}

impl Proposer for RandomProposer<'_> {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        Ok(self.space.sample(rng))
    }
}

/// Shared batching for CEM and CMA: candidates are handed out one per
/// exploration event, each is scored by the performance observed at the next
/// check, and a full batch of five scored candidates triggers one update.
struct BatchQueue {
    pending: Vec<Vec<f64>>,
    awaiting: Option<Vec<f64>>,
    scored: Vec<(Vec<f64>, f64)>,
}

impl BatchQueue {
    fn new() -> Self {
        Self {
            pending: Vec::new(),
            awaiting: None,
            scored: Vec::new(),
        }
    }

    fn next(&mut self, refill: impl FnOnce() -> Result<Vec<Vec<f64>>>) -> Result<Vec<f64>> {
        if self.pending.is_empty() {
            let mut batch = refill()?;
            batch.reverse();
            self.pending = batch;
        }
        let w = self.pending.pop().expect("refilled batch is nonempty");
        self.awaiting = Some(w.clone());
        Ok(w)
    }

    /// Returns a full scored batch once five candidates have values.
    fn score(&mut self, value: f64) -> Option<Vec<(Vec<f64>, f64)>> {
        let w = self.awaiting.take()?;
        self.scored.push((w, value));
        (self.scored.len() == CEM_BATCH).then(|| std::mem::take(&mut self.scored))
    }
}

pub struct CemProposer<'a> {
    pub state: CemState,
    space: &'a WeightBox,
    queue: BatchQueue,
}

impl<'a> CemProposer<'a> {
    pub fn new(space: &'a WeightBox) -> Self {
        Self::with_state(space, CemState::for_box(space))
    }

    /// Search distribution centered on `mean`, std a quarter of each side.
    pub fn around(space: &'a WeightBox, mean: Vec<f64>) -> Result<Self> {
        let std = space.lo().iter().zip(space.hi()).map(|(l, h)| 0.25 * (h - l)).collect();
        Ok(Self::with_state(space, CemState::new(mean, std)?))
    }

    pub fn with_state(space: &'a WeightBox, state: CemState) -> Self {
        Self {
            state,
            space,
            queue: BatchQueue::new(),
        }
    }
}

impl Proposer for CemProposer<'_> {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        let (state, space) = (&self.state, self.space);
        self.queue.next(|| Ok(state.sample_batch(space, rng)))
    }

    fn observe(&mut self, _w: &[f64], value: f64) -> Result<()> {
        if let Some(batch) = self.queue.score(value) {
            self.state = self.state.step(&batch)?;
        }
        Ok(())
    }
}

pub struct CmaProposer<'a> {
    pub state: CmaState,
    space: &'a WeightBox,
    queue: BatchQueue,
}

impl<'a> CmaProposer<'a> {
    pub fn new(space: &'a WeightBox) -> Self {
        Self::with_state(space, CmaState::for_box(space))
    }

    /// Search distribution centered on `mean`, step size a quarter of the mean side.
    pub fn around(space: &'a WeightBox, mean: Vec<f64>) -> Result<Self> {
        let sigma = space.lo().iter().zip(space.hi()).map(|(l, h)| h - l).sum::<f64>() / space.dim() as f64;
        Ok(Self::with_state(space, CmaState::new(mean, 0.25 * sigma)?))
    }

    pub fn with_state(space: &'a WeightBox, state: CmaState) -> Self {
        Self {
            state,
            space,
            queue: BatchQueue::new(),
        }
    }
}

impl Proposer for CmaProposer<'_> {
    fn propose(&mut self, rng: &mut Rng) -> Result<Vec<f64>> {
        let (state, space) = (&self.state, self.space);
        self.queue.next(|| state.sample_batch(space, rng))
    }

    fn observe(&mut self, _w: &[f64], value: f64) -> Result<()> {
        if let Some(batch) = self.queue.score(value) {
            self.state = self.state.step(&batch)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn cfg(alpha: f64) -> ExplorationConfig {
        ExplorationConfig {
            candidates: 16,
            alpha,
            tau: 10.0,
            t_grad: 1,
            t_explore: 10,
            weight_box: WeightBox::uniform(2, -1.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.01).validate().is_ok());
        let mut c = cfg(0.01);
        c.t_grad = 3;
        assert!(c.validate().is_err());
        c.t_grad = 5;
        c.candidates = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn improvement_at_threshold_closes_gate() {
        let mut s = NoveltyScorer::new(2, 0).unwrap();
        let mut rng = rng_from_seed(0);
        assert_eq!(explore_gate(&cfg(0.01), 0.01, 0.0, &mut s, &mut rng).unwrap(), None);
    }

    #[test]
    fn perfect_performance_never_explores() {
        let mut s = NoveltyScorer::new(2, 0).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            assert_eq!(explore_gate(&cfg(0.01), -1.0, 1.0, &mut s, &mut rng).unwrap(), None);
        }
    }

    #[test]
    fn zero_performance_always_explores_inside_box() {
        let c = cfg(0.01);
        let mut s = NoveltyScorer::new(2, 3).unwrap();
        s.fit_iters_max = 5;
        let mut rng = rng_from_seed(2);
        for _ in 0..1000 {
            let w = explore_gate(&c, 0.0, 0.0, &mut s, &mut rng).unwrap().expect("gate open");
            assert!(c.weight_box.contains(&w));
        }
        assert_eq!(s.history().len(), 1000);
    }

    #[test]
    fn out_of_range_performance_is_rejected() {
        let mut s = NoveltyScorer::new(2, 0).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(explore_gate(&cfg(0.01), 0.0, 1.5, &mut s, &mut rng).is_err());
    }

    #[test]
    fn cem_proposer_updates_after_five_scores() {
        let space = WeightBox::uniform(2, -1.0, 1.0).unwrap();
        let mut p = CemProposer::new(&space);
        let mut rng = rng_from_seed(4);
        let initial = p.state.clone();
        for i in 0..5 {
            let w = p.propose(&mut rng).unwrap();
            assert!(space.contains(&w));
            p.observe(&w, i as f64).unwrap();
            if i < 4 {
                assert_eq!(p.state, initial);
            }
        }
        assert_ne!(p.state, initial);
    }

    #[test]
    fn cma_proposer_updates_after_five_scores() {
        let space = WeightBox::uniform(2, -1.0, 1.0).unwrap();
        let mut p = CmaProposer::new(&space);
        let mut rng = rng_from_seed(4);
        for i in 0..5 {
            let w = p.propose(&mut rng).unwrap();
            p.observe(&w, (i % 3) as f64).unwrap();
        }
        assert_eq!(p.state.generation, 1);
    }
}
