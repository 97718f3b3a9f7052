use rand::Rng as _;

use crate::cartpole::{Action, CartState};
use crate::net::DenseNet;
use crate::rng::Rng;
use crate::Result;

pub const POLICY_SIZES: [usize; 3] = [4, 32, 2];
const OUTPUT_INIT_SCALE: f64 = 0.1;

/// Fixed per-variable scaling applied to CartPole observations before they
/// reach any network.
pub const OBS_SCALE: [f64; 4] = [1.0 / 0.5, 1.0 / 0.5, 1.0 / 0.05, 1.0 / 0.5];

pub fn scaled_observation(s: &CartState) -> [f64; 4] {
    let o = s.observation();
    [o[0] * OBS_SCALE[0], o[1] * OBS_SCALE[1], o[2] * OBS_SCALE[2], o[3] * OBS_SCALE[3]]
}

/// Softmax policy over `{left, right}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: DenseNet,
}

pub(crate) fn softmax2(z: &[f64]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

impl Policy {
    /// Fresh policy; the output layer starts scaled down so the initial action
    /// distribution is close to uniform.
    pub fn new(seed: u64) -> Result<Self> {
        let mut net = DenseNet::new(&POLICY_SIZES, seed)?;
        let off = net.last_layer_offset();
        for p in &mut net.params_mut()[off..] {
            *p *= OUTPUT_INIT_SCALE;
        }
        Ok(Self { net })
    }

    pub fn seed(&self) -> u64 {
        self.net.seed()
    }

    pub fn probs(&self, s: &CartState) -> [f64; 2] {
        self.probs_with(self.net.params(), &scaled_observation(s))
    }

    pub(crate) fn probs_with(&self, params: &[f64], obs: &[f64]) -> [f64; 2] {
        softmax2(&self.net.forward_with(params, obs))
    }

    pub fn log_prob(&self, s: &CartState, a: Action) -> f64 {
        self.probs(s)[a.index()].ln()
    }

    pub fn entropy(&self, s: &CartState) -> f64 {
        self.probs(s).iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
    }

    /// Sample an action, returning it with its log-probability.
    pub fn act(&self, s: &CartState, rng: &mut Rng) -> (Action, f64) {
        let p = self.probs(s);
        let u: f64 = rng.random();
        let a = if u < p[0] { Action::Left } else { Action::Right };
        (a, p[a.index()].ln())
    }

    /// Adds `scale * grad_theta log pi(a | s)` at `params` into `acc`.
    pub(crate) fn accumulate_log_prob_grad(
        &self,
        params: &[f64],
        obs: &[f64],
        a: Action,
        scale: f64,
        acc: &mut [f64],
    ) {
        self.net.backward_with(params, obs, acc, |z| {
            let p = softmax2(z);
            let mut up = [-p[0] * scale, -p[1] * scale];
            up[a.index()] += scale;
            up.to_vec()
        });
    }
}
