use rand_distr::{Distribution, StandardNormal};

use super::WeightBox;
use crate::rng::Rng;
use crate::{Error, Result};

pub const CEM_BATCH: usize = 5;
pub const CEM_ELITES: usize = 2;
pub const CEM_STD_FLOOR: f64 = 1e-3;

/// Diagonal-Gaussian cross-entropy method state.
#[derive(Debug, Clone, PartialEq)]
pub struct CemState {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Indices sorted by descending value; ties keep the lower index first.
pub(crate) fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

pub(crate) fn check_batch(batch: &[(Vec<f64>, f64)], dim: usize) -> Result<()> {
    if batch.len() != CEM_BATCH {
        return Err(Error::Config(format!(
            "batch must hold exactly {CEM_BATCH} candidates, got {}",
            batch.len()
        )));
    }
    for (w, v) in batch {
        if w.len() != dim {
            return Err(Error::shape("batch candidate", dim, w.len()));
        }
        if !v.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite candidate in batch".into()));
        }
    }
    Ok(())
}

impl CemState {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::shape("cem std", mean.len(), std.len()));
        }
        let std = std.into_iter().map(|s| s.max(CEM_STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    /// Mean at the box center, std a quarter of each side.
    pub fn for_box(space: &WeightBox) -> Self {
        let std = space.lo().iter().zip(space.hi()).map(|(l, h)| 0.25 * (h - l)).collect();
        Self {
            mean: space.center(),
            std,
        }
    }

    /// Draw one batch, clipped into `space`.
    pub fn sample_batch(&self, space: &WeightBox, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..CEM_BATCH)
            .map(|_| {
                let mut w: Vec<f64> = self
                    .mean
                    .iter()
                    .zip(&self.std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + s * z
                    })
                    .collect();
                space.clip(&mut w);
                w
            })
            .collect()
    }

    /// Refit mean and std to the two best candidates of a five-sample batch.
    pub fn step(&self, batch: &[(Vec<f64>, f64)]) -> Result<Self> {
        check_batch(batch, self.mean.len())?;
        let values: Vec<f64> = batch.iter().map(|(_, v)| *v).collect();
        let elites: Vec<&[f64]> =
            rank_descending(&values)[..CEM_ELITES].iter().map(|&i| batch[i].0.as_slice()).collect();
        let k = CEM_ELITES as f64;
        let dim = self.mean.len();
        let mean: Vec<f64> =
            (0..dim).map(|d| elites.iter().map(|e| e[d]).sum::<f64>() / k).collect();
        let std = (0..dim)
            .map(|d| {
                let var = elites.iter().map(|e| (e[d] - mean[d]).powi(2)).sum::<f64>() / k;
                var.sqrt().max(CEM_STD_FLOOR)
            })
            .collect();
        Ok(Self { mean, std })
    }
}
