//! Quick invariant suite behind the `selftest` subcommand.

use crate::cartpole::CartState;
use crate::inner::{Policy, WeightFunction};
use crate::landscape::{Family, Landscape};
use crate::outer::{
    bench_run, explore_gate, neumann_inverse_apply, outer_grad_step, BenchConfig, BenchStrategy, ExplorationConfig,
    NeumannConfig, OuterGrad, OuterStepConfig, SamplerKind,
};
use crate::rng::rng_from_seed;
use crate::sampling::{softmax_probs, NoveltyScorer, WeightBox};
use crate::Result;

use rand::Rng as _;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<Option<String>>) -> CheckResult {
    match f() {
        Ok(None) => CheckResult {
            name,
            passed: true,
            detail: String::new(),
        },
        Ok(Some(why)) => CheckResult {
            name,
            passed: false,
            detail: why,
        },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn fail_if(cond: bool, msg: impl FnOnce() -> String) -> Option<String> {
    cond.then(msg)
}

pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        check("neumann_geometric_series", || {
            let v = [1.0, -2.0, 0.5];
            let cfg = NeumannConfig {
                terms: 5,
                damping: Some(1.0),
                ..Default::default()
            };
            let r = neumann_inverse_apply(|u: &[f64]| Ok(u.iter().map(|x| 0.5 * x).collect()), &v, &cfg)?;
            Ok(fail_if(
                r.value.iter().zip(&v).any(|(a, b)| *a != 1.9375 * b),
                || format!("got {:?}", r.value),
            ))
        }),
        check("neumann_linear_in_v", || {
            let h = |u: &[f64]| Ok(vec![2.0 * u[0] + 0.3 * u[1], 0.3 * u[0] + 1.5 * u[1]]);
            let cfg = NeumannConfig {
                damping: Some(0.4),
                ..Default::default()
            };
            let a = neumann_inverse_apply(h, &[1.0, 0.2], &cfg)?.value;
            let b = neumann_inverse_apply(h, &[-0.3, 0.7], &cfg)?.value;
            let ab = neumann_inverse_apply(h, &[0.7, 0.9], &cfg)?.value;
            Ok(fail_if((0..2).any(|i| (a[i] + b[i] - ab[i]).abs() > 1e-9), || {
                format!("{a:?} + {b:?} != {ab:?}")
            }))
        }),
        check("softmax_closed_form", || {
            let p = softmax_probs(&[0.1, 0.2, 0.3], 10.0)?;
            let e = [1f64.exp(), 2f64.exp(), 3f64.exp()];
            let z: f64 = e.iter().sum();
            Ok(fail_if((0..3).any(|i| (p[i] - e[i] / z).abs() > 1e-12), || format!("{p:?}")))
        }),
        check("gate_stays_in_box", || {
            let cfg = ExplorationConfig {
                candidates: 16,
                alpha: 0.01,
                tau: 10.0,
                t_grad: 1,
                t_explore: 1,
                weight_box: WeightBox::uniform(4, 0.0, 1.0)?,
            };
            let mut scorer = NoveltyScorer::new(4, 1)?;
            let mut rng = rng_from_seed(2);
            for _ in 0..50 {
                match explore_gate(&cfg, 0.0, 0.0, &mut scorer, &mut rng)? {
                    Some(w) if cfg.weight_box.contains(&w) => {}
                    other => return Ok(Some(format!("gate returned {other:?}"))),
                }
            }
            Ok(None)
        }),
        check("skipped_outer_step_is_bitwise_noop", || {
            let mut wf = WeightFunction::network(4, WeightBox::uniform(4, 0.0, 1.0)?)?;
            let before = wf.clone();
            let mut calls = 0;
            let r = outer_grad_step(
                &mut wf,
                |w| {
                    calls += 1;
                    Ok(OuterGrad {
                        grad: vec![0.1; w.num_params()],
                        skipped: calls == 2,
                        task_grad_norm: 0.0,
                        hvp_calls: 0,
                    })
                },
                &OuterStepConfig::default(),
            )?;
            Ok(fail_if(!r.skipped || wf != before, || "weights moved".into()))
        }),
        check("weights_inside_box", || {
            let space = WeightBox::new(vec![-1.0, 0.0, 0.0, -1.0], vec![1.0, 1.0, 2.0, 0.0])?;
            let wf = WeightFunction::network(9, space.clone())?;
            let mut rng = rng_from_seed(3);
            for _ in 0..2000 {
                let s = CartState {
                    x: rng.random_range(-3.0..3.0),
                    x_dot: rng.random_range(-5.0..5.0),
                    theta: rng.random_range(-0.5..0.5),
                    theta_dot: rng.random_range(-5.0..5.0),
                    t: 0,
                };
                let w = wf.emit(&s);
                if !space.contains(&w) {
                    return Ok(Some(format!("{w:?} outside box")));
                }
            }
            Ok(None)
        }),
        check("policy_probabilities_sum_to_one", || {
            let p = Policy::new(5)?;
            let mut rng = rng_from_seed(6);
            for _ in 0..1000 {
                let s = CartState {
                    x: rng.random_range(-2.4..2.4),
                    x_dot: rng.random_range(-3.0..3.0),
                    theta: rng.random_range(-0.2..0.2),
                    theta_dot: rng.random_range(-3.0..3.0),
                    t: 0,
                };
                let q = p.probs(&s);
                if (q[0] + q[1] - 1.0).abs() > 1e-9 {
                    return Ok(Some(format!("{q:?}")));
                }
            }
            Ok(None)
        }),
        check("bench_replay_and_budget", || {
            let l = Landscape::new(Family::RandomSpiky, 1)?;
            let cfg = BenchConfig::default();
            let a = bench_run(&l, BenchStrategy::Morse(SamplerKind::Rnd), &cfg, 3)?;
            let b = bench_run(&l, BenchStrategy::Morse(SamplerKind::Rnd), &cfg, 3)?;
            Ok(fail_if(a.series != b.series || a.series.len() != cfg.budget, || {
                "bench run did not replay".into()
            }))
        }),
    ]
}
