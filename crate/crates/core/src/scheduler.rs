//! Epoch timeline shared by the bi-level experiments: inner training every
//! epoch, outer steps every `t_grad` epochs and exploration checks every
//! `t_explore` epochs.

use crate::record::{Event, SeriesRow};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub n_epoch: usize,
    pub t_grad: usize,
    pub t_explore: usize,
    pub rng_seed: u64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_epoch == 0 {
            return Err(Error::Config("schedule needs at least one epoch".into()));
        }
        if self.t_grad == 0 || self.t_explore == 0 || self.t_explore % self.t_grad != 0 {
            return Err(Error::Config(format!(
                "t_explore {} must be a positive multiple of t_grad {}",
                self.t_explore, self.t_grad
            )));
        }
        Ok(())
    }

    pub fn is_grad_epoch(&self, epoch: usize) -> bool {
        epoch % self.t_grad == 0
    }

    pub fn is_explore_epoch(&self, epoch: usize) -> bool {
        epoch > 0 && epoch % self.t_explore == 0
    }
}

/// Outcome of one outer update slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterOutcome {
    Applied,
    Skipped,
    /// The step ran and was followed by a scheduled reinitialisation.
    Reset,
}

/// The pieces the timeline drives.
pub trait Components {
    /// Rollout followed by the inner update; returns the performance `P` of
    /// the rollout batch.
    fn inner_epoch(&mut self, epoch: usize) -> Result<f64>;

    /// Whether this run takes outer steps at all.
    fn has_outer(&self) -> bool {
        true
    }

    fn outer_step(&mut self, epoch: usize) -> Result<OuterOutcome>;

    /// Exploration check. `None` leaves the run untouched; `Some(w)` means the
    /// caller will adopt `w` and reset the policy.
    fn gate(&mut self, _epoch: usize, _delta_r: f64, _p: f64) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }

    /// Replace the weight function so it emits `w` and reinitialise the policy.
    fn adopt(&mut self, w: &[f64]) -> Result<()>;

    /// Logged weight snapshot.
    fn snapshot(&self) -> Vec<f64>;
}

/// Runs the timeline and returns one log row per epoch.
///
/// Within an epoch the exploration check precedes the outer step; when the
/// gate fires the new weight is adopted, the policy reset, and that epoch's
/// outer step is dropped.
pub fn run_morse<C: Components + ?Sized>(schedule: &Schedule, c: &mut C) -> Result<Vec<SeriesRow>> {
    schedule.validate()?;
    let mut log = Vec::with_capacity(schedule.n_epoch);
    let mut perf = Vec::with_capacity(schedule.n_epoch);
    for epoch in 0..schedule.n_epoch {
        let row = epoch_step(schedule, c, epoch, &mut perf).map_err(|e| Error::AtEpoch {
            epoch,
            source: Box::new(e),
        })?;
        log.push(row);
    }
    Ok(log)
}

fn epoch_step<C: Components + ?Sized>(
    schedule: &Schedule,
    c: &mut C,
    epoch: usize,
    perf: &mut Vec<f64>,
) -> Result<SeriesRow> {
    let p = c.inner_epoch(epoch)?;
    perf.push(p);
    let mut event = Event::Inner;
    if schedule.is_explore_epoch(epoch) {
        let delta = p - perf[epoch - schedule.t_explore];
        if let Some(w) = c.gate(epoch, delta, p)? {
            c.adopt(&w)?;
            event = Event::Explore;
        }
    }
    if event == Event::Inner && c.has_outer() && schedule.is_grad_epoch(epoch) {
        event = match c.outer_step(epoch)? {
            OuterOutcome::Applied => Event::Outer,
            OuterOutcome::Skipped => Event::Skip,
            OuterOutcome::Reset => Event::Reset,
        };
    }
    Ok(SeriesRow {
        index: epoch,
        value: p,
        event,
        weights: c.snapshot(),
    })
}
