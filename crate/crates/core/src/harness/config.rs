//! `key = value` configuration files. Keys mirror the long CLI flags, with
//! either `-` or `_` as the separator; `#` starts a comment.

use std::path::{Path, PathBuf};

use crate::inner::CartpoleStrategy;
use crate::landscape::Family;
use crate::outer::{BenchStrategy, SamplerKind};
use crate::{Error, Result};

/// One parsed `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = k.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty key".into(),
            });
        }
        out.push(Entry {
            line,
            key,
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_entries(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_entries(&text)
}

fn parse_num<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        msg: format!("invalid value '{}' for {}", e.value, e.key),
    })
}

fn parse_list<T: std::str::FromStr<Err = Error>>(e: &Entry) -> Result<Vec<T>> {
    let items: Vec<&str> = e.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Parse {
            line: e.line,
            msg: format!("{} needs at least one item", e.key),
        });
    }
    items
        .into_iter()
        .map(|s| {
            s.parse().map_err(|err: Error| Error::Parse {
                line: e.line,
                msg: err.to_string(),
            })
        })
        .collect()
}

fn unknown(e: &Entry) -> Error {
    Error::Parse {
        line: e.line,
        msg: format!("unknown key '{}'", e.key),
    }
}

/// Parse a `--family` value: `all` or a comma-separated list.
pub fn parse_families(s: &str) -> Result<Vec<Family>> {
    if s.trim() == "all" {
        return Ok(Family::ALL.to_vec());
    }
    s.split(',').map(|f| f.trim().parse()).collect()
}

pub fn parse_bench_strategies(s: &str) -> Result<Vec<BenchStrategy>> {
    if s.trim() == "all" {
        return Ok(all_bench_strategies());
    }
    s.split(',').map(|f| f.trim().parse()).collect()
}

pub fn all_bench_strategies() -> Vec<BenchStrategy> {
    let mut v = vec![BenchStrategy::NoExploration, BenchStrategy::PeriodicExploration];
    v.extend([SamplerKind::Rnd, SamplerKind::Random, SamplerKind::Cem, SamplerKind::Cma].map(BenchStrategy::Morse));
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub families: Vec<Family>,
    pub strategies: Vec<BenchStrategy>,
    pub landscape_seeds: u64,
    pub run_seeds: u64,
    pub budget: usize,
    pub out: Option<PathBuf>,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            strategies: vec![
                BenchStrategy::NoExploration,
                BenchStrategy::PeriodicExploration,
                BenchStrategy::Morse(SamplerKind::Rnd),
            ],
            landscape_seeds: 10,
            run_seeds: 10,
            budget: 100,
            out: None,
        }
    }
}

impl BenchSettings {
    pub fn apply(&mut self, entries: &[Entry]) -> Result<()> {
        for e in entries {
            match e.key.as_str() {
                "family" => {
                    self.families = parse_families(&e.value).map_err(|err| Error::Parse {
                        line: e.line,
                        msg: err.to_string(),
                    })?
                }
                "strategies" => {
                    self.strategies = if e.value.trim() == "all" {
                        all_bench_strategies()
                    } else {
                        parse_list(e)?
                    }
                }
                "landscape_seeds" => self.landscape_seeds = parse_num(e)?,
                "run_seeds" => self.run_seeds = parse_num(e)?,
                "budget" => self.budget = parse_num(e)?,
                "out" => self.out = Some(PathBuf::from(&e.value)),
                _ => return Err(unknown(e)),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.strategies.is_empty() {
            return Err(Error::Config("bench needs at least one family and one strategy".into()));
        }
        if self.landscape_seeds == 0 || self.run_seeds == 0 || self.budget == 0 {
            return Err(Error::Config("landscape seeds, run seeds and budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleSettings {
    pub strategies: Vec<CartpoleStrategy>,
    pub seeds: u64,
    pub epochs: Option<usize>,
    pub out: Option<PathBuf>,
    /// Write one rollout of each trained policy as a trajectory CSV.
    pub dump_trajectories: bool,
}

impl Default for CartpoleSettings {
    fn default() -> Self {
        Self {
            strategies: CartpoleStrategy::ALL.to_vec(),
            seeds: 10,
            epochs: None,
            out: None,
            dump_trajectories: false,
        }
    }
}

impl CartpoleSettings {
    pub fn apply(&mut self, entries: &[Entry]) -> Result<()> {
        for e in entries {
            match e.key.as_str() {
                "strategies" => {
                    self.strategies = if e.value.trim() == "all" {
                        CartpoleStrategy::ALL.to_vec()
                    } else {
                        parse_list(e)?
                    }
                }
                "seeds" => self.seeds = parse_num(e)?,
                "epochs" => self.epochs = Some(parse_num(e)?),
                "out" => self.out = Some(PathBuf::from(&e.value)),
                "dump_trajectories" => self.dump_trajectories = parse_num(e)?,
                _ => return Err(unknown(e)),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() || self.seeds == 0 || self.epochs == Some(0) {
            return Err(Error::Config("cartpole needs a strategy, seeds > 0 and epochs > 0".into()));
        }
        Ok(())
    }
}
