//! Run files: `<run_id>.csv` holds the series, `<run_id>.meta` the manifest.
//!
//! Bench series use the path layout `step,x1,x2,value,event`; CartPole series
//! use the event-log layout `epoch,event,P,w1..wn`. Floats are written with
//! Rust's shortest round-trip formatting, so reading back is lossless.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::inner::Trajectory;
use crate::record::{Event, Experiment, RunRecord, SeriesRow};
use crate::{Error, Result};

/// Hex SHA-256 of a canonical configuration description.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn series_header(experiment: Experiment, n_weights: usize) -> Vec<String> {
    match experiment {
        Experiment::Bench => ["step", "x1", "x2", "value", "event"].map(String::from).to_vec(),
        Experiment::Cartpole => {
            let mut h: Vec<String> = ["epoch", "event", "P"].map(String::from).to_vec();
            h.extend((1..=n_weights).map(|i| format!("w{i}")));
            h
        }
    }
}

pub fn write_series_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let n_weights = record.series.first().map_or(0, |r| r.weights.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(series_header(record.experiment, n_weights))?;
    for row in &record.series {
        let mut fields = match record.experiment {
            Experiment::Bench => {
                if row.weights.len() != 2 {
                    return Err(Error::shape("bench path point", 2, row.weights.len()));
                }
                vec![
                    row.index.to_string(),
                    row.weights[0].to_string(),
                    row.weights[1].to_string(),
                    row.value.to_string(),
                    row.event.tag().to_string(),
                ]
            }
            Experiment::Cartpole => vec![row.index.to_string(), row.event.tag().to_string(), row.value.to_string()],
        };
        if record.experiment == Experiment::Cartpole {
            fields.extend(row.weights.iter().map(f64::to_string));
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn bad(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: format!("{}: {}", path.display(), msg.into()),
    }
}

pub fn read_series_csv(experiment: Experiment, path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(path, line, format!("bad number in column {}", j + 1)))
        };
        let index: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(path, line, "bad index"))?;
        let row = match experiment {
            Experiment::Bench => SeriesRow {
                index,
                weights: vec![num(1)?, num(2)?],
                value: num(3)?,
                event: rec.get(4).unwrap_or("").parse()?,
            },
            Experiment::Cartpole => SeriesRow {
                index,
                event: rec.get(1).unwrap_or("").parse()?,
                value: num(2)?,
                weights: (3..rec.len()).map(num).collect::<Result<_>>()?,
            },
        };
        out.push(row);
    }
    Ok(out)
}

fn write_meta(record: &RunRecord, path: &Path) -> Result<()> {
    let text = format!(
        "run_id = {}\nexperiment = {}\nstrategy = {}\ngroup = {}\nseed = {}\ninstance_seed = {}\nconfig_hash = {}\nfinal_score = {}\nbest_score = {}\nwall_ms = {}\n",
        record.run_id,
        record.experiment,
        record.strategy,
        record.group,
        record.seed,
        record.instance_seed,
        record.config_hash,
        record.final_score,
        record.best_score,
        record.wall_ms,
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Manifest fields of a persisted run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub run_id: String,
    pub experiment: Experiment,
    pub strategy: String,
    pub group: String,
    pub seed: u64,
    pub instance_seed: u64,
    pub config_hash: String,
    pub final_score: f64,
    pub best_score: f64,
    pub wall_ms: u64,
}

pub fn read_meta(path: &Path) -> Result<RunMeta> {
    let entries = super::config::read_entries(path)?;
    let map: BTreeMap<&str, (usize, &str)> =
        entries.iter().map(|e| (e.key.as_str(), (e.line, e.value.as_str()))).collect();
    let get = |k: &str| -> Result<&str> {
        map.get(k)
            .map(|(_, v)| *v)
            .ok_or_else(|| bad(path, 0, format!("missing key '{k}'")))
    };
    fn num<T: std::str::FromStr>(path: &Path, map: &BTreeMap<&str, (usize, &str)>, k: &str) -> Result<T> {
        let (line, v) = map.get(k).ok_or_else(|| bad(path, 0, format!("missing key '{k}'")))?;
        v.parse().map_err(|_| bad(path, *line, format!("invalid {k} '{v}'")))
    }
    Ok(RunMeta {
        run_id: get("run_id")?.to_string(),
        experiment: get("experiment")?.parse()?,
        strategy: get("strategy")?.to_string(),
        group: get("group")?.to_string(),
        seed: num(path, &map, "seed")?,
        instance_seed: num(path, &map, "instance_seed")?,
        config_hash: map.get("config_hash").map_or("", |(_, v)| *v).to_string(),
        final_score: num(path, &map, "final_score")?,
        best_score: num(path, &map, "best_score")?,
        wall_ms: num(path, &map, "wall_ms")?,
    })
}

/// Write both run files into `dir` (created if missing); returns the CSV path.
pub fn persist_run(record: &RunRecord, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{}.csv", record.run_id));
    write_series_csv(record, &csv_path)?;
    write_meta(record, &dir.join(format!("{}.meta", record.run_id)))?;
    Ok(csv_path)
}

/// Reload a run from its `.meta` path.
pub fn load_run(meta_path: &Path) -> Result<RunRecord> {
    let meta = read_meta(meta_path)?;
    let series = read_series_csv(meta.experiment, &meta_path.with_extension("csv"))?;
    Ok(RunRecord {
        run_id: meta.run_id,
        experiment: meta.experiment,
        strategy: meta.strategy,
        group: meta.group,
        seed: meta.seed,
        instance_seed: meta.instance_seed,
        series,
        final_score: meta.final_score,
        best_score: meta.best_score,
        wall_ms: meta.wall_ms,
        config_hash: meta.config_hash,
    })
}

/// Every `.meta` file directly inside `dir`, sorted by name.
pub fn meta_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "meta") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `(x1, x2, f)` grid rows as CSV.
pub fn write_grid_csv(rows: &[(f64, f64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x1", "x2", "f"])?;
    for (x1, x2, f) in rows {
        w.write_record([x1.to_string(), x2.to_string(), f.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "x",
        "x_dot",
        "theta",
        "theta_dot",
        "action",
        "r_task",
        "r_survival",
        "r_position",
        "r_interference",
    ])?;
    for st in &traj.steps {
        let s = &st.state;
        let r = &st.reward;
        w.write_record([
            s.t.to_string(),
            s.x.to_string(),
            s.x_dot.to_string(),
            s.theta.to_string(),
            s.theta_dot.to_string(),
            st.action.index().to_string(),
            r.task.to_string(),
            r.survival.to_string(),
            r.position.to_string(),
            r.interference.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Event counts, handy for summaries.
pub fn event_counts(record: &RunRecord) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for ev in [Event::Grad, Event::Reset, Event::Inner, Event::Outer, Event::Skip, Event::Explore] {
        let n = record.count_events(ev);
        if n > 0 {
            m.insert(ev.tag(), n);
        }
    }
    m
}
