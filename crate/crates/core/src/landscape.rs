//! Synthetic performance landscapes over the square `[-1, 1]^2`.
//!
//! Three seeded families stand in for the map from reward weights to task
//! performance: a smooth multimodal polynomial, a fixed random network, and a
//! flat zero field with a few sharp conical spikes. Each is normalised to `[0, 1]`
//! using its extrema on a 101 x 101 grid, with clamping for off-grid excess.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use crate::net::DenseNet;
use crate::rng::{rng_from_seed, split_label};
use crate::{Error, Result};

pub const DOMAIN_LO: f64 = -1.0;
pub const DOMAIN_HI: f64 = 1.0;
pub const NORM_GRID: usize = 101;
pub const FD_STEP: f64 = 1e-3;
const POLY_DEGREE: usize = 6;
const RESEED_OFFSET: u64 = 1_000_000;
/// Base radius range of the conical spikes.
pub const SPIKE_RADIUS: (f64, f64) = (0.15, 0.45);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SmoothPolynomial,
    FixedNN,
    RandomSpiky,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::RandomSpiky, Family::SmoothPolynomial, Family::FixedNN];

    pub fn tag(self) -> &'static str {
        match self {
            Family::SmoothPolynomial => "smooth",
            Family::FixedNN => "fixednn",
            Family::RandomSpiky => "spiky",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" | "smoothpolynomial" => Ok(Family::SmoothPolynomial),
            "fixednn" | "nn" => Ok(Family::FixedNN),
            "spiky" | "randomspiky" => Ok(Family::RandomSpiky),
            other => Err(Error::Config(format!("unknown landscape family '{other}'"))),
        }
    }
}

/// One conical spike of the `RandomSpiky` family: `height * max(0, 1 - d / radius)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 2],
    pub height: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    /// Coefficients in [`monomials`] order.
    Polynomial(Vec<f64>),
    Network(DenseNet),
    Spikes(Vec<Bump>),
}

/// Any scalar field on the domain. Implemented by [`Landscape`] and by the
/// small analytic fields tests inject into the optimizer.
pub trait Field: Sync {
    /// Value at `x`, which the caller guarantees lies inside the domain.
    fn value(&self, x: [f64; 2]) -> f64;
}

impl<F: Fn([f64; 2]) -> f64 + Sync> Field for F {
    fn value(&self, x: [f64; 2]) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    family: Family,
    seed: u64,
    effective_seed: u64,
    params: Params,
    norm_lo: f64,
    norm_hi: f64,
}

/// Exponent pairs `(i, j)` of `x1^i x2^j` with `i + j <= 6`, in coefficient order.
pub fn monomials() -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=POLY_DEGREE as u32 {
        for i in (0..=total).rev() {
            out.push((i, total - i));
        }
    }
    out
}

fn in_domain(x: [f64; 2]) -> bool {
    x.iter().all(|v| (DOMAIN_LO..=DOMAIN_HI).contains(v))
}

fn grid_point(i: usize, j: usize, n: usize) -> [f64; 2] {
    let step = (DOMAIN_HI - DOMAIN_LO) / (n - 1) as f64;
    [DOMAIN_LO + i as f64 * step, DOMAIN_LO + j as f64 * step]
}

impl Params {
    fn raw(&self, x: [f64; 2]) -> f64 {
        match self {
            Params::Polynomial(coeffs) => {
                // Powers are built once per call; 28 terms.
                let mut p1 = [1.0; POLY_DEGREE + 1];
                let mut p2 = [1.0; POLY_DEGREE + 1];
                for k in 1..=POLY_DEGREE {
                    p1[k] = p1[k - 1] * x[0];
                    p2[k] = p2[k - 1] * x[1];
                }
                let mut acc = 0.0;
                let mut idx = 0;
                for total in 0..=POLY_DEGREE {
                    for i in (0..=total).rev() {
                        acc += coeffs[idx] * p1[i] * p2[total - i];
                        idx += 1;
                    }
                }
                acc
            }
            Params::Network(net) => net.forward_with(net.params(), &x)[0],
            Params::Spikes(bumps) => bumps
                .iter()
                .map(|b| {
                    let d = ((x[0] - b.center[0]).powi(2) + (x[1] - b.center[1]).powi(2)).sqrt();
                    b.height * (1.0 - d / b.radius).max(0.0)
                })
                .sum(),
        }
    }

    fn generate(family: Family, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(split_label(seed, family.tag()));
        Ok(match family {
            Family::SmoothPolynomial => Params::Polynomial(
                (0..monomials().len()).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            ),
            Family::FixedNN => Params::Network(DenseNet::new(&[2, 16, 16, 1], rng.random())?),
            Family::RandomSpiky => {
                let k = rng.random_range(3..=6);
                Params::Spikes(
                    (0..k)
                        .map(|_| Bump {
                            center: [
                                rng.random_range(DOMAIN_LO..=DOMAIN_HI),
                                rng.random_range(DOMAIN_LO..=DOMAIN_HI),
                            ],
                            height: rng.random_range(0.5..=1.0),
                            radius: rng.random_range(SPIKE_RADIUS.0..=SPIKE_RADIUS.1),
                        })
                        .collect(),
                )
            }
        })
    }
}

/// Raw values on an `n x n` grid, row index = first coordinate.
fn raw_grid(params: &Params, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(params.raw(grid_point(i, j, n)));
        }
    }
    out
}

/// Count of grid points strictly greater than all of their (up to 8) neighbours.
pub fn strict_local_maxima(values: &[f64], n: usize) -> usize {
    let mut count = 0;
    for i in 0..n {
        for j in 0..n {
            let v = values[i * n + j];
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    if values[a as usize * n + b as usize] >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                count += 1;
            }
        }
    }
    count
}

impl Landscape {
    pub fn new(family: Family, seed: u64) -> Result<Self> {
        let mut effective = seed;
        loop {
            let params = Params::generate(family, effective)?;
            let grid = raw_grid(&params, NORM_GRID);
            let multimodal = family != Family::SmoothPolynomial
                || strict_local_maxima(&grid, NORM_GRID) >= 2;
            if multimodal {
                let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
                let mut hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo < 1e-12 {
                    hi = lo + 1.0;
                }
                return Ok(Self {
                    family,
                    seed,
                    effective_seed: effective,
                    params,
                    norm_lo: lo,
                    norm_hi: hi,
                });
            }
            effective = effective.wrapping_add(RESEED_OFFSET);
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Seed actually used for the coefficients after multimodality redraws.
    pub fn effective_seed(&self) -> u64 {
        self.effective_seed
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn norm_bounds(&self) -> (f64, f64) {
        (self.norm_lo, self.norm_hi)
    }

    /// Unnormalised value; no domain check.
    pub fn raw(&self, x: [f64; 2]) -> f64 {
        self.params.raw(x)
    }

    pub fn eval(&self, x: [f64; 2]) -> Result<f64> {
        if !in_domain(x) {
            return Err(Error::Domain(x));
        }
        Ok(self.normalized(x))
    }

    fn normalized(&self, x: [f64; 2]) -> f64 {
        ((self.params.raw(x) - self.norm_lo) / (self.norm_hi - self.norm_lo)).clamp(0.0, 1.0)
    }

    /// Normalised values on an `n x n` grid as `(x1, x2, f)` rows.
    pub fn grid(&self, n: usize) -> Vec<(f64, f64, f64)> {
        let n = n.max(2);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let p = grid_point(i, j, n);
                out.push((p[0], p[1], self.normalized(p)));
            }
        }
        out
    }
}

impl Field for Landscape {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.normalized(x)
    }
}

/// Black-box gradient estimate. `one_sided` marks axes where the point sat
/// within one step of the boundary and a one-sided difference was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGradient {
    pub grad: [f64; 2],
    pub one_sided: bool,
}

pub fn finite_diff_grad<F: Field + ?Sized>(field: &F, x: [f64; 2]) -> Result<FdGradient> {
    if !in_domain(x) {
        return Err(Error::Domain(x));
    }
    let h = FD_STEP;
    let mut grad = [0.0; 2];
    let mut one_sided = false;
    for axis in 0..2 {
        let mut up = x;
        let mut down = x;
        up[axis] += h;
        down[axis] -= h;
        if up[axis] > DOMAIN_HI {
            one_sided = true;
            grad[axis] = (field.value(x) - field.value(down)) / h;
        } else if down[axis] < DOMAIN_LO {
            one_sided = true;
            grad[axis] = (field.value(up) - field.value(x)) / h;
        } else {
            grad[axis] = (field.value(up) - field.value(down)) / (2.0 * h);
        }
    }
    Ok(FdGradient { grad, one_sided })
}
