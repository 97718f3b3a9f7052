//! Configuration, run persistence, aggregation and the parallel runners used
//! by the command-line front end.

pub mod aggregate;
pub mod config;
pub mod persist;
pub mod runner;
pub mod selftest;

pub use aggregate::{aggregate, aggregate_dir, family_average, read_aggregate_csv, write_aggregate_csv, AggregateRow};
pub use config::{parse_entries, read_entries, BenchSettings, CartpoleSettings, Entry};
pub use persist::{config_hash, load_run, persist_run, read_meta, write_grid_csv, write_trajectory_csv, RunMeta};
pub use runner::{bench_family, resolve_out_dir, run_bench, run_cartpole, OUT_DIR_ENV};
pub use selftest::{run_selftest, CheckResult};
