use crate::net::{dot, norm};
use crate::{Error, Result};

/// Truncated Neumann series for `H^-1 v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannConfig {
    /// Number of series terms.
    pub terms: usize,
    /// Fixed damping `eta`; `None` picks it from one probe product.
    pub damping: Option<f64>,
    /// Abort once a partial term exceeds `divergence_cap * |v|`.
    pub divergence_cap: f64,
}

impl Default for NeumannConfig {
    fn default() -> Self {
        Self {
            terms: 5,
            damping: None,
            divergence_cap: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannResult {
    pub value: Vec<f64>,
    pub damping: f64,
    pub hvp_calls: usize,
}

/// `eta = 1 / (1 + |Hv| / |v|)`, which makes `I - eta H` contract along `v`.
pub fn adaptive_damping(v: &[f64], hv: &[f64]) -> f64 {
    let nv = norm(v);
    if nv == 0.0 {
        return 1.0;
    }
    1.0 / (1.0 + norm(hv) / nv)
}

/// Approximates `H^-1 v` by `sum_{i<K} (I - eta H)^i (eta v)` using only
/// Hessian-vector products.
///
/// Returns [`Error::Numeric`] when a term blows past the divergence cap or a
/// product is non-finite; the caller is expected to skip its update.
pub fn neumann_inverse_apply<F>(mut hvp: F, v: &[f64], cfg: &NeumannConfig) -> Result<NeumannResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if cfg.terms == 0 {
        return Err(Error::Config("neumann series needs at least one term".into()));
    }
    let v_norm = norm(v);
    if !v_norm.is_finite() {
        return Err(Error::Numeric("non-finite neumann input".into()));
    }
    if v_norm == 0.0 {
        return Ok(NeumannResult {
            value: vec![0.0; v.len()],
            damping: cfg.damping.unwrap_or(1.0),
            hvp_calls: 0,
        });
    }
    let mut calls = 0;
    let eta = match cfg.damping {
        Some(eta) if eta > 0.0 => eta,
        Some(eta) => return Err(Error::Config(format!("neumann damping must be positive, got {eta}"))),
        None => {
            let hv = hvp(v)?;
            calls += 1;
            adaptive_damping(v, &hv)
        }
    };
    let cap = cfg.divergence_cap * v_norm;
    let mut term: Vec<f64> = v.iter().map(|x| eta * x).collect();
    let mut acc = term.clone();
    for _ in 1..cfg.terms {
        let ht = hvp(&term)?;
        calls += 1;
        if ht.len() != term.len() {
            return Err(Error::shape("hessian-vector product", term.len(), ht.len()));
        }
        for (t, h) in term.iter_mut().zip(&ht) {
            *t -= eta * h;
        }
        let tn = norm(&term);
        if !tn.is_finite() || tn > cap {
            return Err(Error::Numeric(format!("neumann series diverged (term norm {tn:.3e})")));
        }
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += t;
        }
    }
    if acc.iter().any(|x| !x.is_finite()) || !dot(&acc, &acc).is_finite() {
        return Err(Error::Numeric("non-finite neumann result".into()));
    }
    Ok(NeumannResult {
        value: acc,
        damping: eta,
        hvp_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: Vec<f64>) -> impl FnMut(&[f64]) -> Result<Vec<f64>> {
        move |u: &[f64]| Ok(u.iter().zip(&d).map(|(a, b)| a * b).collect())
    }

    fn fixed(k: usize) -> NeumannConfig {
        NeumannConfig {
            terms: k,
            damping: Some(1.0),
            divergence_cap: 1e3,
        }
    }

    #[test]
    fn identity_returns_input() {
        let v = [0.3, -1.2, 4.0];
        for k in [1, 2, 5, 17] {
            let r = neumann_inverse_apply(diag(vec![1.0; 3]), &v, &fixed(k)).unwrap();
            assert_eq!(r.value, v.to_vec());
        }
    }

    #[test]
    fn half_diagonal_is_geometric() {
        let v = [1.0, -2.0];
        let r = neumann_inverse_apply(diag(vec![0.5, 0.5]), &v, &fixed(5)).unwrap();
        assert_eq!(r.value, vec![1.9375, -3.875]);
    }

    #[test]
    fn divergence_is_flagged() {
        let r = neumann_inverse_apply(diag(vec![5.0]), &[1.0], &fixed(20));
        assert!(matches!(r, Err(Error::Numeric(_))));
    }

    #[test]
    fn zero_input_is_zero() {
        let r = neumann_inverse_apply(diag(vec![2.0, 3.0]), &[0.0, 0.0], &NeumannConfig::default()).unwrap();
        assert_eq!(r.value, vec![0.0, 0.0]);
        assert_eq!(r.hvp_calls, 0);
    }

    #[test]
    fn adaptive_damping_contracts_probe_direction() {
        let v = [1.0, 1.0];
        let r = neumann_inverse_apply(diag(vec![3.0, 3.0]), &v, &NeumannConfig { terms: 200, ..Default::default() })
            .unwrap();
        assert!((r.damping - 0.25).abs() < 1e-12);
        for x in r.value {
            assert!((x - 1.0 / 3.0).abs() < 1e-9);
        }
    }
}
