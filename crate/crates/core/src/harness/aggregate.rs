use std::collections::BTreeMap;
use std::path::Path;

use super::persist::{meta_files, read_meta};
use crate::{Error, Result};

/// One cell: mean and population standard deviation of final scores.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub strategy: String,
    /// Landscape family or environment name.
    pub family: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Group `(strategy, family, score)` triples. Scores are sorted before
/// summation so the result does not depend on input order.
pub fn aggregate<'a, I>(scores: I) -> Vec<AggregateRow>
where
    I: IntoIterator<Item = (&'a str, &'a str, f64)>,
{
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (strategy, family, score) in scores {
        cells.entry((strategy.to_string(), family.to_string())).or_default().push(score);
    }
    cells
        .into_iter()
        .map(|((strategy, family), mut v)| {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            AggregateRow {
                strategy,
                family,
                mean,
                std: var.sqrt(),
                n,
            }
        })
        .collect()
}

/// Aggregate every persisted run in `dir` by final score.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<AggregateRow>> {
    let metas = meta_files(dir)?
        .iter()
        .map(|p| read_meta(p))
        .collect::<Result<Vec<_>>>()?;
    if metas.is_empty() {
        return Err(Error::Config(format!("no run manifests in {}", dir.display())));
    }
    Ok(aggregate(metas.iter().map(|m| (m.strategy.as_str(), m.group.as_str(), m.final_score))))
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "family", "mean", "std", "n"])?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.family.clone(),
            r.mean.to_string(),
            r.std.to_string(),
            r.n.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse_err = || Error::Parse {
            line: i + 2,
            msg: format!("malformed aggregate row in {}", path.display()),
        };
        let field = |j: usize| rec.get(j).ok_or_else(parse_err);
        out.push(AggregateRow {
            strategy: field(0)?.to_string(),
            family: field(1)?.to_string(),
            mean: field(2)?.parse().map_err(|_| parse_err())?,
            std: field(3)?.parse().map_err(|_| parse_err())?,
            n: field(4)?.parse().map_err(|_| parse_err())?,
        });
    }
    Ok(out)
}

/// Mean over a strategy's cells, weighting each family equally.
pub fn family_average(rows: &[AggregateRow], strategy: &str) -> Option<f64> {
    let cells: Vec<f64> = rows.iter().filter(|r| r.strategy == strategy).map(|r| r.mean).collect();
    (!cells.is_empty()).then(|| cells.iter().sum::<f64>() / cells.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_std() {
        let rows = aggregate([("a", "f", 0.0), ("a", "f", 1.0), ("b", "f", 0.5)]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean, 0.5);
        assert_eq!(rows[0].std, 0.5);
        assert_eq!(rows[0].n, 2);
        assert_eq!(rows[1].std, 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = aggregate([("a", "spiky", 0.1), ("a", "spiky", 0.7), ("a", "smooth", 1.0 / 3.0)]);
        write_aggregate_csv(&rows, &path).unwrap();
        assert_eq!(read_aggregate_csv(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("strategy,family,mean,std,n\n"));
    }

    #[test]
    fn family_average_weights_cells_equally() {
        let rows = aggregate([("a", "x", 1.0), ("a", "x", 1.0), ("a", "y", 0.0)]);
        assert_eq!(family_average(&rows, "a"), Some(0.5));
        assert_eq!(family_average(&rows, "b"), None);
    }
}
