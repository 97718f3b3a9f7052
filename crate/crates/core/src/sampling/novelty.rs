use crate::net::DenseNet;
use crate::rng::split_label;
use crate::{Error, Result};

pub const SCORER_HIDDEN: [usize; 2] = [32, 32];
pub const SCORER_OUT: usize = 8;

/// Random-network-distillation novelty over weight vectors.
///
/// The target network is frozen at construction. The predictor is regressed
/// onto the target at every visited weight, so prediction error stays small
/// where the search has already been and grows away from it.
#[derive(Debug, Clone)]
pub struct NoveltyScorer {
    target: DenseNet,
    predictor: DenseNet,
    history: Vec<Vec<f64>>,
    pub fit_iters_min: usize,
    pub fit_iters_max: usize,
    pub overfit_tol: f64,
    pub lr: f64,
}

/// Outcome of one [`NoveltyScorer::fit`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    /// Mean squared prediction error before each gradient step.
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
}

impl NoveltyScorer {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        let sizes = [dim, SCORER_HIDDEN[0], SCORER_HIDDEN[1], SCORER_OUT];
        Ok(Self {
            target: DenseNet::new(&sizes, split_label(seed, "rnd-target"))?,
            predictor: DenseNet::new(&sizes, split_label(seed, "rnd-predictor"))?,
            history: Vec::new(),
            fit_iters_min: 1,
            fit_iters_max: 1000,
            overfit_tol: 1e-3,
            lr: 1e-2,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.input_dim()
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    pub fn predictor(&self) -> &DenseNet {
        &self.predictor
    }

    /// Replace the predictor, e.g. with a copy of the target in tests.
    pub fn set_predictor(&mut self, predictor: DenseNet) -> Result<()> {
        if predictor.sizes() != self.target.sizes() {
            return Err(Error::Config("predictor shape differs from target".into()));
        }
        self.predictor = predictor;
        Ok(())
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    pub fn push_history(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::shape("history weight", self.dim(), w.len()));
        }
        self.history.push(w.to_vec());
        Ok(())
    }

    /// `|f_pred(w) - f_target(w)|_2`.
    pub fn novelty(&self, w: &[f64]) -> Result<f64> {
        let p = self.predictor.forward(w)?;
        let t = self.target.forward(w)?;
        Ok(p.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
    }

    /// Mean over history of the squared prediction error.
    pub fn loss(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        let total: f64 = self.history.iter().map(|w| self.novelty(w).unwrap().powi(2)).sum();
        total / self.history.len() as f64
    }

    /// Full-batch gradient descent on the history until the mean squared error
    /// drops below `overfit_tol^2` or `fit_iters_max` steps have run.
    pub fn fit(&mut self) -> FitReport {
        if self.history.is_empty() {
            return FitReport {
                iterations: 0,
                loss_trace: Vec::new(),
                final_loss: 0.0,
            };
        }
        let targets: Vec<Vec<f64>> =
            self.history.iter().map(|w| self.target.forward_with(self.target.params(), w)).collect();
        let n = self.history.len() as f64;
        let stop = self.overfit_tol * self.overfit_tol;
        let mut grad = vec![0.0; self.predictor.num_params()];
        let mut trace = Vec::new();
        let mut iterations = 0;
        loop {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for (w, t) in self.history.iter().zip(&targets) {
                let params = self.predictor.params();
                self.predictor.backward_with(params, w, &mut grad, |out| {
                    out.iter()
                        .zip(t)
                        .map(|(o, tv)| {
                            let e = o - tv;
                            loss += e * e;
                            2.0 * e / n
                        })
                        .collect()
                });
            }
            loss /= n;
            let done = iterations >= self.fit_iters_max
                || (iterations >= self.fit_iters_min && loss < stop);
            trace.push(loss);
            if done {
                break;
            }
            let lr = self.lr;
            for (p, g) in self.predictor.params_mut().iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            iterations += 1;
        }
        let final_loss = *trace.last().expect("at least one loss evaluation");
        FitReport {
            iterations,
            loss_trace: trace,
            final_loss,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_nets_have_zero_novelty() {
        let mut s = NoveltyScorer::new(2, 5).unwrap();
        s.set_predictor(s.target().clone()).unwrap();
        for w in [[0.0, 0.0], [0.9, -0.4], [-1.0, 1.0]] {
            assert_eq!(s.novelty(&w).unwrap(), 0.0);
        }
    }

    #[test]
    fn novelty_is_nonnegative_and_checks_shape() {
        let s = NoveltyScorer::new(2, 1).unwrap();
        assert!(s.novelty(&[0.2, 0.1]).unwrap() >= 0.0);
        assert!(matches!(s.novelty(&[0.2]), Err(Error::Shape { .. })));
    }

    #[test]
    fn empty_history_fit_is_noop() {
        let mut s = NoveltyScorer::new(2, 1).unwrap();
        let before = s.predictor().clone();
        let r = s.fit();
        assert_eq!(r.iterations, 0);
        assert_eq!(s.predictor(), &before);
    }

    #[test]
    fn single_point_overfits() {
        let mut s = NoveltyScorer::new(2, 3).unwrap();
        s.push_history(&[0.3, -0.6]).unwrap();
        let r = s.fit();
        assert!(r.final_loss < 1e-6, "loss {}", r.final_loss);
        assert!(r.iterations <= 1000);
        assert!(s.novelty(&[0.3, -0.6]).unwrap() < 1e-3);
    }

    #[test]
    fn refit_loss_trace_does_not_increase() {
        let mut s = NoveltyScorer::new(2, 9).unwrap();
        for w in [[0.1, 0.2], [-0.7, 0.5], [0.9, -0.9], [0.0, -0.3]] {
            s.push_history(&w).unwrap();
        }
        s.fit();
        let r = s.fit();
        for pair in r.loss_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn target_is_frozen_by_fit() {
        let mut s = NoveltyScorer::new(2, 2).unwrap();
        let target = s.target().clone();
        s.push_history(&[0.5, 0.5]).unwrap();
        s.fit();
        assert_eq!(s.target(), &target);
    }

    #[test]
    fn history_order_does_not_change_fit() {
        let pts = [[0.1, 0.2], [-0.7, 0.5], [0.9, -0.9]];
        let mut a = NoveltyScorer::new(2, 4).unwrap();
        let mut b = NoveltyScorer::new(2, 4).unwrap();
        for p in pts {
            a.push_history(&p).unwrap();
        }
        for p in pts.iter().rev() {
            b.push_history(p).unwrap();
        }
        a.fit();
        b.fit();
        let q = [0.33, -0.12];
        assert!((a.novelty(&q).unwrap() - b.novelty(&q).unwrap()).abs() < 1e-9);
    }
}
