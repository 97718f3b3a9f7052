use crate::cartpole::{CartState, NUM_COMPONENTS};
use crate::net::DenseNet;
use crate::sampling::WeightBox;
use crate::{Error, Result};

use super::policy::scaled_observation;

pub const WEIGHT_NET_SIZES: [usize; 3] = [4, 16, 4];
const LOGIT_EPS: f64 = 1e-3;

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_EPS, 1.0 - LOGIT_EPS);
    (p / (1.0 - p)).ln()
}

/// Reward-weight function `w_phi(s)`.
///
/// Either a box-constrained constant vector, or a small network whose outputs
/// are squashed into the box by `lo + (hi - lo) * sigmoid(z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightFunction {
    Constant { weights: Vec<f64>, space: WeightBox },
    Network { net: DenseNet, space: WeightBox },
}

impl WeightFunction {
    pub fn constant(mut weights: Vec<f64>, space: WeightBox) -> Result<Self> {
        if weights.len() != space.dim() {
            return Err(Error::shape("constant weights", space.dim(), weights.len()));
        }
        space.clip(&mut weights);
        Ok(Self::Constant { weights, space })
    }

    /// Network with default initialisation; emitted weights start near the box center.
    pub fn network(seed: u64, space: WeightBox) -> Result<Self> {
        if space.dim() != NUM_COMPONENTS {
            return Err(Error::shape("weight box", NUM_COMPONENTS, space.dim()));
        }
        Ok(Self::Network {
            net: DenseNet::new(&WEIGHT_NET_SIZES, seed)?,
            space,
        })
    }

    /// Freshly initialised network that emits exactly `target` at every state:
    /// hidden layers are random, the output weights are zero and the output
    /// biases are the squashing map's inverse at `target`.
    pub fn network_at(seed: u64, target: &[f64], space: WeightBox) -> Result<Self> {
        if target.len() != space.dim() {
            return Err(Error::shape("target weights", space.dim(), target.len()));
        }
        let Self::Network { mut net, space } = Self::network(seed, space)? else {
            unreachable!()
        };
        let off = net.last_layer_offset();
        let hidden = WEIGHT_NET_SIZES[1];
        let params = net.params_mut();
        for p in &mut params[off..off + hidden * NUM_COMPONENTS] {
            *p = 0.0;
        }
        for (k, t) in target.iter().enumerate() {
            let (lo, hi) = (space.lo()[k], space.hi()[k]);
            params[off + hidden * NUM_COMPONENTS + k] = logit((t - lo) / (hi - lo));
        }
        Ok(Self::Network { net, space })
    }

    pub fn space(&self) -> &WeightBox {
        match self {
            Self::Constant { space, .. } | Self::Network { space, .. } => space,
        }
    }

    pub fn is_network(&self) -> bool {
        matches!(self, Self::Network { .. })
    }

    /// Flat outer parameters `phi`.
    pub fn params(&self) -> &[f64] {
        match self {
            Self::Constant { weights, .. } => weights,
            Self::Network { net, .. } => net.params(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().len()
    }

    /// Replace `phi`; constant weights are clipped into the box.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        match self {
            Self::Constant { weights, space } => {
                if params.len() != weights.len() {
                    return Err(Error::shape("constant weights", weights.len(), params.len()));
                }
                *weights = params;
                space.clip(weights);
                Ok(())
            }
            Self::Network { net, .. } => net.set_params(params),
        }
    }

    pub fn emit(&self, s: &CartState) -> [f64; NUM_COMPONENTS] {
        self.emit_obs(&scaled_observation(s))
    }

    pub(crate) fn emit_obs(&self, obs: &[f64]) -> [f64; NUM_COMPONENTS] {
        let mut out = [0.0; NUM_COMPONENTS];
        match self {
            Self::Constant { weights, .. } => out.copy_from_slice(weights),
            Self::Network { net, space } => {
                let z = net.forward_with(net.params(), obs);
                for k in 0..NUM_COMPONENTS {
                    let (lo, hi) = (space.lo()[k], space.hi()[k]);
                    out[k] = (lo + (hi - lo) * sigmoid(z[k])).clamp(lo, hi);
                }
            }
        }
        out
    }

    /// Weights emitted at the all-zero state; used for logging and novelty history.
    pub fn snapshot(&self) -> Vec<f64> {
        self.emit_obs(&[0.0; 4]).to_vec()
    }

    /// Adds `grad_phi (cotangent . w_phi(s))` into `acc`.
    pub(crate) fn accumulate_grad(&self, obs: &[f64], cotangent: &[f64], acc: &mut [f64]) {
        match self {
            Self::Constant { .. } => {
                for (a, c) in acc.iter_mut().zip(cotangent) {
                    *a += c;
                }
            }
            Self::Network { net, space } => {
                net.backward_with(net.params(), obs, acc, |z| {
                    (0..NUM_COMPONENTS)
                        .map(|k| {
                            let s = sigmoid(z[k]);
                            cotangent[k] * (space.hi()[k] - space.lo()[k]) * s * (1.0 - s)
                        })
                        .collect()
                });
            }
        }
    }
}
