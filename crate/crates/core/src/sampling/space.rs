use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

/// Axis-aligned box of admissible weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl WeightBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Config(format!(
                "box bounds need equal nonzero lengths, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Config(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        w.len() == self.dim()
            && w.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clip(&self, w: &mut [f64]) {
        for (v, (l, h)) in w.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| rng.random_range(*l..*h)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate() {
        assert!(WeightBox::uniform(2, 1.0, 1.0).is_err());
        assert!(WeightBox::new(vec![0.0], vec![]).is_err());
        assert!(WeightBox::new(vec![], vec![]).is_err());
    }

    #[test]
    fn clip_and_contains() {
        let b = WeightBox::uniform(2, 0.0, 1.0).unwrap();
        let mut w = vec![1.5, -0.2];
        assert!(!b.contains(&w));
        b.clip(&mut w);
        assert_eq!(w, vec![1.0, 0.0]);
        assert!(b.contains(&w));
        assert!(!b.contains(&[0.5]));
    }
}
