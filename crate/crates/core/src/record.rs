//! Run records shared by the optimizers and the harness.

use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    Bench,
    Cartpole,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Bench => "bench",
            Experiment::Cartpole => "cartpole",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bench" => Ok(Experiment::Bench),
            "cartpole" => Ok(Experiment::Cartpole),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// What happened at one step or epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    /// Landscape gradient-ascent step.
    Grad,
    /// Weight reset by the sampler (landscape) or reinitialisation (CartPole).
    Reset,
    /// Rollout and inner policy update only.
    Inner,
    /// Inner update followed by an outer gradient step.
    Outer,
    /// Outer step attempted but skipped (divergence or non-finite values).
    Skip,
    /// Gate fired: new weight adopted and policy reset.
    Explore,
}

impl Event {
    pub fn tag(self) -> &'static str {
        match self {
            Event::Grad => "grad",
            Event::Reset => "reset",
            Event::Inner => "inner",
            Event::Outer => "outer",
            Event::Skip => "skip",
            Event::Explore => "explore",
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "grad" => Event::Grad,
            "reset" => Event::Reset,
            "inner" => Event::Inner,
            "outer" => Event::Outer,
            "skip" => Event::Skip,
            "explore" => Event::Explore,
            other => return Err(Error::Config(format!("unknown event '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub index: usize,
    pub value: f64,
    pub event: Event,
    pub weights: Vec<f64>,
}

/// One optimisation run. `series` has one row per budgeted step (landscape)
/// or epoch (CartPole).
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub experiment: Experiment,
    pub strategy: String,
    /// Landscape family tag, or the environment name.
    pub group: String,
    pub seed: u64,
    /// Landscape seed; zero for CartPole.
    pub instance_seed: u64,
    pub series: Vec<SeriesRow>,
    pub final_score: f64,
    pub best_score: f64,
    pub wall_ms: u64,
    pub config_hash: String,
}

impl RunRecord {
    pub fn make_run_id(experiment: Experiment, strategy: &str, seed: u64, group: &str, instance: u64) -> String {
        match experiment {
            Experiment::Bench => format!("{experiment}-{strategy}-{seed}-{group}{instance}"),
            Experiment::Cartpole => format!("{experiment}-{strategy}-{seed}-{instance}"),
        }
    }

    pub fn relabel(&mut self, group: &str, instance_seed: u64) {
        self.group = group.to_string();
        self.instance_seed = instance_seed;
        self.run_id =
            Self::make_run_id(self.experiment, &self.strategy, self.seed, &self.group, instance_seed);
    }

    pub fn count_events(&self, event: Event) -> usize {
        self.series.iter().filter(|r| r.event == event).count()
    }
}
