//! Per-cell aggregation of summary rows into table and box-plot data.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliResult;
use crate::output;

/// Linear-interpolation quantile of sorted data (`p` in `[0, 1]`). With an
/// even count the median is the mean of the middle two.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub p05: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub p95: f64,
    pub max: f64,
}

impl BoxStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxStats {
            n: v.len(),
            min: v[0],
            p05: quantile(&v, 0.05),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            p95: quantile(&v, 0.95),
            max: v[v.len() - 1],
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub cell: usize,
    pub algorithm: String,
    pub parameters: String,
    /// Rows with status other than `ok`.
    pub failed: usize,
    /// `None` when every replication of the cell failed.
    pub gap: Option<BoxStats>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregate {
    pub cells: Vec<CellStats>,
    /// Rows that could not be parsed.
    pub skipped: usize,
}

/// Reads a summary file and groups gap values by cell.
pub fn aggregate(summary: &Path) -> CliResult<Aggregate> {
    let mut reader = output::reader(summary)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ci), Some(ai), Some(pi), Some(si), Some(gi)) =
        (col("cell"), col("algorithm"), col("parameters"), col("status"), col("percent_gap"))
    else {
        return Err(crate::error::CliError::Invalid(format!(
            "{} lacks the summary columns",
            summary.display()
        )));
    };

    struct Acc {
        algorithm: String,
        parameters: String,
        failed: usize,
        gaps: Vec<f64>,
    }
    let mut groups: BTreeMap<usize, Acc> = BTreeMap::new();
    let mut skipped = 0;
    for record in reader.records() {
        let Ok(record) = record else {
            skipped += 1;
            continue;
        };
        let fields = (record.get(ci), record.get(ai), record.get(pi), record.get(si), record.get(gi));
        let (Some(c), Some(a), Some(p), Some(s), Some(g)) = fields else {
            skipped += 1;
            continue;
        };
        let Ok(cell) = c.parse::<usize>() else {
            skipped += 1;
            continue;
        };
        let gap = if s == "ok" {
            match g.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => {
                    skipped += 1;
                    continue;
                }
            }
        } else {
            None
        };
        let acc = groups.entry(cell).or_insert_with(|| Acc {
            algorithm: a.to_string(),
            parameters: p.to_string(),
            failed: 0,
            gaps: Vec::new(),
        });
        match gap {
            Some(v) => acc.gaps.push(v),
            None => acc.failed += 1,
        }
    }
    let cells = groups
        .into_iter()
        .map(|(cell, acc)| CellStats {
            cell,
            gap: BoxStats::from_values(&acc.gaps),
            algorithm: acc.algorithm,
            parameters: acc.parameters,
            failed: acc.failed,
        })
        .collect();
    Ok(Aggregate { cells, skipped })
}
