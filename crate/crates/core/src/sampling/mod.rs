//! Candidate proposal for outer-loop exploration.
//!
//! [`NoveltyScorer`] ranks candidates by random-network-distillation error and
//! [`softmax_select`] turns those scores into a draw. Random, CEM and CMA
//! proposals are the baselines the novelty sampler is compared against.

mod cem;
mod cma;
mod novelty;
mod space;

pub use cem::{CemState, CEM_BATCH, CEM_ELITES, CEM_STD_FLOOR};
pub use cma::{CmaParams, CmaState, CMA_EIGEN_FLOOR};
pub use novelty::{FitReport, NoveltyScorer, SCORER_HIDDEN, SCORER_OUT};
pub use space::WeightBox;

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

/// Softmax probabilities `exp(s_i * tau) / sum_j exp(s_j * tau)`, computed
/// after subtracting the largest score.
pub fn softmax_probs(scores: &[f64], tau: f64) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Config("softmax over an empty score list".into()));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("softmax temperature must be positive, got {tau}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score passed to softmax".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) * tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Draw an index with probability proportional to `exp(score * tau)`.
pub fn softmax_select(scores: &[f64], tau: f64, rng: &mut Rng) -> Result<usize> {
    let probs = softmax_probs(scores, tau)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return Ok(i);
        }
    }
    // Rounding can leave cum a hair below 1.
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}

/// Uniform sample inside the box.
pub fn propose_random(space: &WeightBox, rng: &mut Rng) -> Vec<f64> {
    space.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn frequencies(scores: &[f64], tau: f64, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        let mut counts = vec![0usize; scores.len()];
        for _ in 0..draws {
            counts[softmax_select(scores, tau, &mut rng).unwrap()] += 1;
        }
        counts.into_iter().map(|c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn equal_scores_are_uniform() {
        let f = frequencies(&[0.4, 0.4, 0.4], 10.0, 30_000, 1);
        for p in f {
            assert!((p - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn graded_scores_follow_closed_form() {
        // softmax(1, 2, 3)
        let expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219];
        let probs = softmax_probs(&[0.1, 0.2, 0.3], 10.0).unwrap();
        for (p, e) in probs.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        let f = frequencies(&[0.1, 0.2, 0.3], 10.0, 30_000, 2);
        for (p, e) in f.iter().zip(expected) {
            assert!((p - e).abs() < 0.02);
        }
    }

    #[test]
    fn dominant_score_wins() {
        let f = frequencies(&[0.0, 10.0, 0.0], 10.0, 30_000, 3);
        assert!(f[1] >= 1.0 - 1e-4);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        let mut rng = rng_from_seed(0);
        assert!(matches!(softmax_select(&[0.1, f64::NAN], 10.0, &mut rng), Err(Error::Numeric(_))));
        assert!(matches!(softmax_select(&[], 10.0, &mut rng), Err(Error::Config(_))));
        assert!(matches!(softmax_select(&[1.0], 0.0, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn softmax_is_stable_for_large_scores() {
        let p = softmax_probs(&[1e6, 1e6 + 0.1], 10.0).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_proposals_stay_in_box_and_are_centered() {
        let space = WeightBox::uniform(2, -1.0, 1.0).unwrap();
        let mut rng = rng_from_seed(4);
        let mut mean = [0.0; 2];
        for _ in 0..10_000 {
            let w = propose_random(&space, &mut rng);
            assert!(space.contains(&w));
            mean[0] += w[0] / 10_000.0;
            mean[1] += w[1] / 10_000.0;
        }
        assert!(mean[0].abs() < 0.05 && mean[1].abs() < 0.05);
    }

    #[test]
    fn random_proposals_replay() {
        let space = WeightBox::uniform(3, 0.0, 1.0).unwrap();
        let mut a = rng_from_seed(8);
        let mut b = rng_from_seed(8);
        for _ in 0..50 {
            assert_eq!(propose_random(&space, &mut a), propose_random(&space, &mut b));
        }
    }
}
