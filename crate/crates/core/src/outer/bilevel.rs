use super::neumann::{neumann_inverse_apply, NeumannConfig};
use crate::inner::{Agent, FrozenBatch, WeightFunction};
use crate::net::{hvp_at, norm};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OuterGrad {
    /// `dJ/dphi`; all zeros when skipped.
    pub grad: Vec<f64>,
    pub skipped: bool,
    pub task_grad_norm: f64,
    pub hvp_calls: usize,
}

impl OuterGrad {
    fn skipped(n: usize, task_grad_norm: f64, hvp_calls: usize) -> Self {
        Self {
            grad: vec![0.0; n],
            skipped: true,
            task_grad_norm,
            hvp_calls,
        }
    }
}

/// Implicit-function outer gradient.
///
/// `loss_hvp` is the Hessian-vector product of the inner *loss* (negated
/// inner objective plus any L2 term) in `theta`, so that near an inner
/// optimum it is positive definite. With `u = H^-1 g_task` the returned
/// gradient is `grad_phi (u . grad_theta G)`, evaluated by `mixed(u)`.
pub fn implicit_outer_grad<H, M>(
    g_task: &[f64],
    loss_hvp: H,
    mixed: M,
    n_phi: usize,
    neumann: &NeumannConfig,
) -> Result<OuterGrad>
where
    H: FnMut(&[f64]) -> Result<Vec<f64>>,
    M: FnOnce(&[f64]) -> Vec<f64>,
{
    let task_grad_norm = norm(g_task);
    if !task_grad_norm.is_finite() {
        return Ok(OuterGrad::skipped(n_phi, task_grad_norm, 0));
    }
    let inv = match neumann_inverse_apply(loss_hvp, g_task, neumann) {
        Ok(r) => r,
        Err(Error::Numeric(_)) => return Ok(OuterGrad::skipped(n_phi, task_grad_norm, 0)),
        Err(e) => return Err(e),
    };
    let grad = mixed(&inv.value);
    if grad.len() != n_phi {
        return Err(Error::shape("mixed gradient", n_phi, grad.len()));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Ok(OuterGrad::skipped(n_phi, task_grad_norm, inv.hvp_calls));
    }
    Ok(OuterGrad {
        grad,
        skipped: false,
        task_grad_norm,
        hvp_calls: inv.hvp_calls,
    })
}

/// Outer gradient for the CartPole weight function on a frozen rollout batch.
///
/// The task gradient uses only the task component with a batch-mean
/// baseline; the inner loss is the REINFORCE surrogate on composite returns
/// (agent baseline held fixed) plus `l2/2 |theta|^2`.
pub fn bilevel_outer_grad(
    agent: &Agent,
    wf: &WeightFunction,
    batch: &FrozenBatch,
    l2: f64,
    neumann: &NeumannConfig,
) -> Result<OuterGrad> {
    let n_phi = wf.num_params();
    if batch.is_empty() {
        return Ok(OuterGrad::skipped(n_phi, 0.0, 0));
    }
    let policy = &agent.policy;
    let theta = policy.net.params();

    let task = batch.component_returns(0);
    let task_mean = task.iter().sum::<f64>() / task.len() as f64;
    let task_adv: Vec<f64> = task.iter().map(|g| g - task_mean).collect();
    let g_task = batch.score_gradient(policy, theta, &task_adv);

    let b = agent.baseline.value();
    let inner_adv: Vec<f64> = batch.composite_returns(wf).iter().map(|g| g - b).collect();
    let loss_grad = |p: &[f64]| -> Result<Vec<f64>> {
        let g = batch.score_gradient(policy, p, &inner_adv);
        Ok(g.iter().zip(p).map(|(g, p)| -g + l2 * p).collect())
    };
    let hvp = |v: &[f64]| hvp_at(theta, loss_grad, v);
    let mixed = |u: &[f64]| batch.weight_gradient(wf, &batch.directional_log_prob(policy, u));
    implicit_outer_grad(&g_task, hvp, mixed, n_phi, neumann)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterStepConfig {
    pub lr_net: f64,
    pub lr_coeff: f64,
    pub min_iters: usize,
    pub max_iters: usize,
    pub clip: f64,
    pub tol: f64,
}

impl Default for OuterStepConfig {
    fn default() -> Self {
        Self {
            lr_net: 5e-4,
            lr_coeff: 2.5e-3,
            min_iters: 3,
            max_iters: 10,
            clip: 1.0,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OuterStepReport {
    pub iterations: usize,
    pub skipped: bool,
    /// Norm of each applied (clipped, scaled) step.
    pub step_norms: Vec<f64>,
    pub grad_norm: f64,
}

/// Ascend `J` in `phi` for between `min_iters` and `max_iters` sub-iterations.
///
/// `grad_fn` is re-evaluated at the current weights each sub-iteration. If
/// any evaluation is skipped or non-finite the weights are restored exactly
/// and the report is flagged.
pub fn outer_grad_step<G>(wf: &mut WeightFunction, mut grad_fn: G, cfg: &OuterStepConfig) -> Result<OuterStepReport>
where
    G: FnMut(&WeightFunction) -> Result<OuterGrad>,
{
    if cfg.min_iters == 0 || cfg.max_iters < cfg.min_iters || !(cfg.clip > 0.0) {
        return Err(Error::Config("outer step needs 1 <= min_iters <= max_iters and clip > 0".into()));
    }
    let lr = if wf.is_network() { cfg.lr_net } else { cfg.lr_coeff };
    let original = wf.clone();
    let mut report = OuterStepReport::default();
    for i in 0..cfg.max_iters {
        let g = grad_fn(wf)?;
        let n = norm(&g.grad);
        report.grad_norm = n;
        if g.skipped || !n.is_finite() {
            *wf = original;
            report.skipped = true;
            report.step_norms.clear();
            return Ok(report);
        }
        report.iterations = i + 1;
        if n < cfg.tol {
            report.step_norms.push(0.0);
            if i + 1 >= cfg.min_iters {
                break;
            }
            continue;
        }
        let scale = lr * if n > cfg.clip { cfg.clip / n } else { 1.0 };
        let next: Vec<f64> = wf.params().iter().zip(&g.grad).map(|(p, g)| p + scale * g).collect();
        wf.set_params(next)?;
        report.step_norms.push(scale * n);
    }
    Ok(report)
}
