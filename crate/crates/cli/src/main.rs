use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use morse_core::harness::{
    aggregate, aggregate_dir, config, read_entries, resolve_out_dir, run_bench, run_cartpole, run_selftest,
    write_aggregate_csv, write_grid_csv, AggregateRow, BenchSettings, CartpoleSettings, OUT_DIR_ENV,
};
use morse_core::inner::CartpoleStrategy;
use morse_core::{Error, Family, Landscape, Result, RunRecord};

#[derive(Parser)]
#[command(name = "morse", version, about = "Reward-weight search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gradient ascent with and without exploration on synthetic 2-D landscapes.
    Bench(BenchArgs),
    /// Bi-level reward-weight training on the multi-objective CartPole.
    Cartpole(CartpoleArgs),
    /// Write a landscape as an x1,x2,f grid.
    DumpLandscape(DumpArgs),
    /// Summarise persisted runs into strategy,family,mean,std,n.
    Aggregate(AggregateArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args)]
struct BenchArgs {
    /// key = value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// all, or a comma-separated list of smooth, fixednn, spiky.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated strategies, or all.
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    landscape_seeds: Option<u64>,
    #[arg(long)]
    run_seeds: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Output directory; defaults to $MORSE_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CartpoleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies, or all.
    #[arg(long)]
    strategies: Option<String>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one rollout of each trained policy.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    family: Family,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Output CSV; defaults to <out dir>/landscape-<family>-<seed>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn bench_settings(a: &BenchArgs) -> Result<BenchSettings> {
    let mut s = BenchSettings::default();
    if let Some(p) = &a.config {
        s.apply(&read_entries(p)?)?;
    }
    if let Some(f) = &a.family {
        s.families = config::parse_families(f)?;
    }
    if let Some(v) = &a.strategies {
        s.strategies = config::parse_bench_strategies(v)?;
    }
    if let Some(v) = a.landscape_seeds {
        s.landscape_seeds = v;
    }
    if let Some(v) = a.run_seeds {
        s.run_seeds = v;
    }
    if let Some(v) = a.budget {
        s.budget = v;
    }
    if a.out.is_some() {
        s.out = a.out.clone();
    }
    s.validate()?;
    Ok(s)
}

fn cartpole_settings(a: &CartpoleArgs) -> Result<CartpoleSettings> {
    let mut s = CartpoleSettings::default();
    if let Some(p) = &a.config {
        s.apply(&read_entries(p)?)?;
    }
    if let Some(v) = &a.strategies {
        s.strategies = if v.trim() == "all" {
            CartpoleStrategy::ALL.to_vec()
        } else {
            v.split(',').map(|x| x.trim().parse()).collect::<Result<_>>()?
        };
    }
    if let Some(v) = a.seeds {
        s.seeds = v;
    }
    if a.epochs.is_some() {
        s.epochs = a.epochs;
    }
    if a.out.is_some() {
        s.out = a.out.clone();
    }
    s.dump_trajectories |= a.dump_trajectories;
    s.validate()?;
    Ok(s)
}

fn summarize(records: &[RunRecord], out: Option<&Path>) -> Result<()> {
    let rows = aggregate(records.iter().map(|r| (r.strategy.as_str(), r.group.as_str(), r.final_score)));
    print_rows(&rows);
    if let Some(dir) = out {
        println!("{} runs written to {}", records.len(), dir.display());
    }
    Ok(())
}

fn print_rows(rows: &[AggregateRow]) {
    println!("{:<16} {:<10} {:>8} {:>8} {:>5}", "strategy", "family", "mean", "std", "n");
    for r in rows {
        println!("{:<16} {:<10} {:>8.3} {:>8.3} {:>5}", r.strategy, r.family, r.mean, r.std, r.n);
    }
}

fn need_dir(explicit: Option<&Path>, what: &str) -> Result<PathBuf> {
    resolve_out_dir(explicit).ok_or_else(|| Error::Config(format!("{what} needs --out or {OUT_DIR_ENV}")))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bench(a) => {
            let s = bench_settings(&a)?;
            let out = resolve_out_dir(s.out.as_deref());
            let records = run_bench(&s, out.as_deref())?;
            summarize(&records, out.as_deref())?;
        }
        Command::Cartpole(a) => {
            let s = cartpole_settings(&a)?;
            let out = resolve_out_dir(s.out.as_deref());
            let records = run_cartpole(&s, out.as_deref())?;
            summarize(&records, out.as_deref())?;
        }
        Command::DumpLandscape(a) => {
            let l = Landscape::new(a.family, a.seed)?;
            let path = match a.out {
                Some(p) => p,
                None => need_dir(None, "dump-landscape")?.join(format!("landscape-{}-{}.csv", a.family, a.seed)),
            };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.to_path_buf(),
                    source: e,
                })?;
            }
            write_grid_csv(&l.grid(a.grid), &path)?;
            println!("{}", path.display());
        }
        Command::Aggregate(a) => {
            let dir = need_dir(a.input.as_deref(), "aggregate")?;
            let rows = aggregate_dir(&dir)?;
            let out = a.out.unwrap_or_else(|| dir.join("table.csv"));
            write_aggregate_csv(&rows, &out)?;
            print_rows(&rows);
        }
        Command::Selftest => {
            let results = run_selftest();
            let mut ok = true;
            for c in &results {
                if c.passed {
                    println!("PASS {}", c.name);
                } else {
                    ok = false;
                    println!("FAIL {}: {}", c.name, c.detail);
                }
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
