use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{BenchSettings, CartpoleSettings};
use super::persist::{config_hash, persist_run, write_trajectory_csv};
use crate::inner::{rollout, train_cartpole_agent, CartpoleConfig, CartpoleStrategy};
use crate::landscape::{Family, Landscape};
use crate::outer::{bench_run, BenchConfig, BenchStrategy};
use crate::record::RunRecord;
use crate::rng::{rng_from_seed, split_label};
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MORSE_OUT_DIR";

/// `explicit`, else `$MORSE_OUT_DIR`, else nothing.
pub fn resolve_out_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
}

/// Every bench run of `settings`, in (family, landscape seed, strategy, run
/// seed) order. Runs execute on the rayon pool; when `out` is set each worker
/// persists its own record.
pub fn run_bench(settings: &BenchSettings, out: Option<&Path>) -> Result<Vec<RunRecord>> {
    settings.validate()?;
    let cfg = BenchConfig {
        budget: settings.budget,
        ..BenchConfig::default()
    };
    let hash = config_hash(&format!("{cfg:?}|{:?}", BenchSettings { out: None, ..settings.clone() }));
    let landscapes: Vec<Landscape> = settings
        .families
        .iter()
        .flat_map(|&f| (0..settings.landscape_seeds).map(move |s| (f, s)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(f, s)| Landscape::new(f, s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(&Landscape, BenchStrategy, u64)> = landscapes
        .iter()
        .flat_map(|l| {
            settings
                .strategies
                .iter()
                .flat_map(move |&st| (0..settings.run_seeds).map(move |seed| (l, st, seed)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(l, strategy, seed)| {
            let mut r = bench_run(l, strategy, &cfg, seed)?;
            r.relabel(l.family().tag(), l.seed());
            r.config_hash = hash.clone();
            if let Some(dir) = out {
                persist_run(&r, dir)?;
            }
            Ok(r)
        })
        .collect()
}

/// Bench runs for one family and strategy with default settings; the unit the
/// acceptance tables are built from.
pub fn bench_family(family: Family, strategy: BenchStrategy, landscape_seeds: u64, run_seeds: u64) -> Result<Vec<f64>> {
    let settings = BenchSettings {
        families: vec![family],
        strategies: vec![strategy],
        landscape_seeds,
        run_seeds,
        ..BenchSettings::default()
    };
    Ok(run_bench(&settings, None)?.iter().map(|r| r.final_score).collect())
}

/// Every CartPole run of `settings`, in (strategy, seed) order.
pub fn run_cartpole(settings: &CartpoleSettings, out: Option<&Path>) -> Result<Vec<RunRecord>> {
    settings.validate()?;
    let mut cfg = CartpoleConfig::default();
    if let Some(e) = settings.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let hash = config_hash(&format!("{cfg:?}|{:?}", CartpoleSettings { out: None, ..settings.clone() }));
    if settings.dump_trajectories && out.is_none() {
        return Err(Error::Config("trajectory dumps need an output directory".into()));
    }
    let jobs: Vec<(CartpoleStrategy, u64)> = settings
        .strategies
        .iter()
        .flat_map(|&st| (0..settings.seeds).map(move |seed| (st, seed)))
        .collect();
    jobs.par_iter()
        .map(|&(strategy, seed)| {
            let (mut r, agent) = train_cartpole_agent(strategy, &cfg, seed)?;
            r.config_hash = hash.clone();
            if let Some(dir) = out {
                persist_run(&r, dir)?;
                if settings.dump_trajectories {
                    let mut rng = rng_from_seed(split_label(seed, "trajectory"));
                    let batch = rollout(&agent.policy, 1, &mut rng)?;
                    write_trajectory_csv(&batch.trajectories[0], &dir.join(format!("{}.traj.csv", r.run_id)))?;
                }
            }
            Ok(r)
        })
        .collect()
}
