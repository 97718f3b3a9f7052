use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use super::cem::{check_batch, rank_descending};
use super::{WeightBox, CEM_BATCH, CEM_ELITES};
use crate::rng::Rng;
use crate::{Error, Result};

pub const CMA_EIGEN_FLOOR: f64 = 1e-8;

/// Strategy constants for a `(mu = 2, lambda = 5)` CMA-ES with the usual
/// logarithmic recombination weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn new(dim: usize) -> Self {
        let n = dim as f64;
        let mu = CEM_ELITES;
        let raw: Vec<f64> =
            (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self {
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Full-covariance CMA-ES state, maximising.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: Vec<f64>,
    pub step_size: f64,
    pub covariance: DMatrix<f64>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub generation: usize,
    params: CmaParams,
}

fn floored_eigen(c: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite covariance".into()));
    }
    let mut eig = SymmetricEigen::new(c.clone());
    for ev in eig.eigenvalues.iter_mut() {
        *ev = ev.max(CMA_EIGEN_FLOOR);
    }
    Ok(eig)
}

impl CmaState {
    pub fn new(mean: Vec<f64>, step_size: f64) -> Result<Self> {
        if mean.is_empty() || !(step_size > 0.0) {
            return Err(Error::Config("cma needs a nonempty mean and positive step size".into()));
        }
        let n = mean.len();
        Ok(Self {
            covariance: DMatrix::identity(n, n),
            path_sigma: vec![0.0; n],
            path_c: vec![0.0; n],
            generation: 0,
            params: CmaParams::new(n),
            mean,
            step_size,
        })
    }

    /// Centered in the box with step size a quarter of the mean side length.
    pub fn for_box(space: &WeightBox) -> Self {
        let side = space.lo().iter().zip(space.hi()).map(|(l, h)| h - l).sum::<f64>()
            / space.dim() as f64;
        Self::new(space.center(), 0.25 * side).expect("valid box")
    }

    pub fn params(&self) -> &CmaParams {
        &self.params
    }

    pub fn sample_batch(&self, space: &WeightBox, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
        let n = self.mean.len();
        let eig = floored_eigen(&self.covariance)?;
        let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let a = &eig.eigenvectors * scale;
        Ok((0..CEM_BATCH)
            .map(|_| {
                let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                let y = &a * z;
                let mut w: Vec<f64> =
                    self.mean.iter().zip(y.iter()).map(|(m, yi)| m + self.step_size * yi).collect();
                space.clip(&mut w);
                w
            })
            .collect())
    }

    /// One generation update from a scored batch of five.
    pub fn step(&self, batch: &[(Vec<f64>, f64)]) -> Result<Self> {
        let n = self.mean.len();
        check_batch(batch, n)?;
        let p = &self.params;
        let values: Vec<f64> = batch.iter().map(|(_, v)| *v).collect();
        let order = rank_descending(&values);
        let sigma = self.step_size;
        let mean_old = DVector::from_column_slice(&self.mean);

        let ys: Vec<DVector<f64>> = order[..CEM_ELITES]
            .iter()
            .map(|&i| (DVector::from_column_slice(&batch[i].0) - &mean_old) / sigma)
            .collect();
        let mut y_w = DVector::zeros(n);
        for (w, y) in p.weights.iter().zip(&ys) {
            y_w += y * *w;
        }
        let mean_new = &mean_old + &y_w * sigma;

        let eig = floored_eigen(&self.covariance)?;
        let inv_sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt()))
            * eig.eigenvectors.transpose();

        let ps_old = DVector::from_column_slice(&self.path_sigma);
        let ps = ps_old * (1.0 - p.c_sigma)
            + (&inv_sqrt * &y_w) * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();
        let gen = self.generation + 1;
        let ps_norm = ps.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - p.c_sigma).powi(2 * gen as i32)).sqrt()
            < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        let pc_old = DVector::from_column_slice(&self.path_c);
        let pc = pc_old * (1.0 - p.c_c) + &y_w * (h * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

        let delta_h = (1.0 - h) * p.c_c * (2.0 - p.c_c);
        let mut rank_mu = DMatrix::zeros(n, n);
        for (w, y) in p.weights.iter().zip(&ys) {
            rank_mu += (y * y.transpose()) * *w;
        }
        let mut c = &self.covariance * (1.0 - p.c_1 - p.c_mu)
            + (&pc * pc.transpose() + &self.covariance * delta_h) * p.c_1
            + rank_mu * p.c_mu;
        c = (&c + c.transpose()) * 0.5;
        let eig_new = floored_eigen(&c)?;
        let c = &eig_new.eigenvectors
            * DMatrix::from_diagonal(&eig_new.eigenvalues)
            * eig_new.eigenvectors.transpose();
        let c = (&c + c.transpose()) * 0.5;

        let step_size = sigma * ((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).exp();

        let next = Self {
            mean: mean_new.iter().copied().collect(),
            step_size,
            covariance: c,
            path_sigma: ps.iter().copied().collect(),
            path_c: pc.iter().copied().collect(),
            generation: gen,
            params: self.params.clone(),
        };
        if !next.is_finite() {
            return Err(Error::Numeric("cma update produced non-finite state".into()));
        }
        Ok(next)
    }

    fn is_finite(&self) -> bool {
        self.step_size.is_finite()
            && self.step_size > 0.0
            && self.mean.iter().chain(&self.path_sigma).chain(&self.path_c).all(|x| x.is_finite())
            && self.covariance.iter().all(|x| x.is_finite())
    }
}
