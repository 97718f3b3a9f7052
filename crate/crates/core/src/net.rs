//! Dense feed-forward networks with hand-written reverse mode.
//!
//! A [`DenseNet`] stores every weight and bias in one flat vector. Layer `l`
//! occupies `(n_l + 1) * n_{l+1}` consecutive entries: first the row-major
//! weight matrix with shape `(n_{l+1}, n_l)`, then the `n_{l+1}` biases.
//!
//! Only first derivatives are implemented. Hessian-vector products are taken by
//! symmetric differencing of gradients, see [`hvp`].

use rand::Rng as _;

use crate::rng::rng_from_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
    hidden: Activation,
    output: Activation,
    seed: u64,
}

/// Derivatives of `upstream . forward(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub param_grad: Vec<f64>,
    pub input_grad: Vec<f64>,
}

/// Number of parameters for the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl DenseNet {
    /// Seeded network with tanh hidden layers and an identity output layer.
    ///
    /// Each parameter of layer `l` is drawn uniformly from
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "a network needs at least 2 layer sizes, got {}",
                sizes.len()
            )));
        }
        if sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] + 1) * w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            hidden: Activation::Tanh,
            output: Activation::Identity,
            seed,
        })
    }

    /// Network with explicit parameters; mostly for tests and copies.
    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::new(sizes, 0)?;
        net.set_params(params)?;
        Ok(net)
    }

    pub fn with_activations(mut self, hidden: Activation, output: Activation) -> Self {
        self.hidden = hidden;
        self.output = output;
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::shape("parameters", self.params.len(), params.len()));
        }
        self.params = params;
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of the last layer's block inside the flat parameter vector.
    pub fn last_layer_offset(&self) -> usize {
        let n = self.sizes.len();
        param_count(&self.sizes[..n - 1])
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            self.hidden
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), x.len()));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.forward_with(&self.params, x))
    }

    /// Forward pass using an arbitrary parameter vector of the right length.
    pub(crate) fn forward_with(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut act = x.to_vec();
        let mut offset = 0;
        for l in 0..self.sizes.len() - 1 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let f = self.activation_for(l);
            act = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>();
                    f.apply(z)
                })
                .collect();
            offset += (n_in + 1) * n_out;
        }
        act
    }

    /// Reverse-mode derivatives of `upstream . forward(x)`.
    pub fn grad(&self, x: &[f64], upstream: &[f64]) -> Result<GradientReport> {
        self.check_input(x)?;
        if upstream.len() != self.output_dim() {
            return Err(Error::shape("upstream gradient", self.output_dim(), upstream.len()));
        }
        let mut param_grad = vec![0.0; self.params.len()];
        let (_, input_grad) =
            self.backward_with(&self.params, x, &mut param_grad, |_| upstream.to_vec());
        Ok(GradientReport { param_grad, input_grad })
    }

    /// One fused forward/backward pass. `upstream` maps the network output to
    /// the cotangent to propagate; the parameter gradient is added into `acc`.
    /// Returns `(output, input_grad)`. Shapes are the caller's responsibility.
    pub(crate) fn backward_with<U>(
        &self,
        params: &[f64],
        x: &[f64],
        acc: &mut [f64],
        upstream: U,
    ) -> (Vec<f64>, Vec<f64>)
    where
        U: FnOnce(&[f64]) -> Vec<f64>,
    {
        let layers = self.sizes.len() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        acts.push(x.to_vec());
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let f = self.activation_for(l);
            let prev = &acts[l];
            let next = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    f.apply(b[o] + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>())
                })
                .collect();
            acts.push(next);
            offset += (n_in + 1) * n_out;
        }

        let output = acts[layers].clone();
        let mut delta = upstream(&output);
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let f = self.activation_for(l);
            for (d, &y) in delta.iter_mut().zip(&acts[l + 1]) {
                *d *= f.derivative_from_output(y);
            }
            let off = offsets[l];
            let w = &params[off..off + n_in * n_out];
            let prev = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g_row = &mut acc[off + o * n_in..off + (o + 1) * n_in];
                for (g, &a) in g_row.iter_mut().zip(prev) {
                    *g += d * a;
                }
                acc[off + n_in * n_out + o] += d;
            }
            let mut below = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (bi, &wv) in below.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *bi += d * wv;
                }
            }
            delta = below;
        }
        (output, delta)
    }

    /// `theta <- theta - lr * (grad + l2 * theta)`, returning the updated net.
    pub fn sgd_step(&self, grad: &[f64], lr: f64, l2: f64) -> Result<Self> {
        let mut next = self.clone();
        next.apply_sgd(grad, lr, l2)?;
        Ok(next)
    }

    /// In-place form of [`DenseNet::sgd_step`]. On error the net is untouched.
    pub fn apply_sgd(&mut self, grad: &[f64], lr: f64, l2: f64) -> Result<()> {
        if !(lr > 0.0) || !(l2 >= 0.0) {
            return Err(Error::Config(format!("sgd needs lr > 0 and l2 >= 0, got {lr}, {l2}")));
        }
        if grad.len() != self.params.len() {
            return Err(Error::shape("gradient", self.params.len(), grad.len()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient in sgd step".into()));
        }
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= lr * (g + l2 * *p);
        }
        Ok(())
    }
}

/// Hessian-vector product by symmetric differencing of a gradient oracle.
///
/// `loss_grad` maps a parameter vector to the loss gradient at that point. The
/// probe step is `1e-4 / max(1, |v|)`.
pub fn hvp<F>(net: &DenseNet, loss_grad: F, v: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    hvp_at(net.params(), loss_grad, v)
}

/// [`hvp`] around an explicit parameter vector.
pub fn hvp_at<F>(theta: &[f64], mut loss_grad: F, v: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if v.len() != theta.len() {
        return Err(Error::shape("hvp direction", theta.len(), v.len()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::Numeric("non-finite hvp direction".into()));
    }
    if norm == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let eps = 1e-4 / norm.max(1.0);
    let plus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t + eps * d).collect();
    let minus: Vec<f64> = theta.iter().zip(v).map(|(t, d)| t - eps * d).collect();
    let gp = loss_grad(&plus)?;
    let gm = loss_grad(&minus)?;
    if gp.len() != theta.len() || gm.len() != theta.len() {
        return Err(Error::shape("loss gradient", theta.len(), gp.len().min(gm.len())));
    }
    let out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite hessian-vector product".into()));
    }
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
