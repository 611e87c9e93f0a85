use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentReport;
use crate::error::{Error, Result};

/// Mean and population standard deviation of a set of counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

pub fn summarize(counts: &[usize]) -> Result<Summary> {
    if counts.is_empty() {
        return Err(Error::Empty("iteration counts"));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    let var = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(Summary {
        n: counts.len(),
        mean,
        sd: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub point: (f64, f64),
    pub policy: String,
    pub iterations: Summary,
}

/// Per-policy aggregate over all points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRow {
    pub policy: String,
    pub runs: usize,
    pub mean: f64,
    /// Within-point spread: `sqrt(sum(n_i * sd_i^2) / sum(n_i))`.
    pub pooled_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTable {
    pub rows: Vec<PointRow>,
    pub pooled: Vec<PooledRow>,
}

impl IterationTable {
    pub fn pooled_for(&self, policy: &str) -> Option<&PooledRow> {
        self.pooled.iter().find(|p| p.policy == policy)
    }
}

/// Mean (s.d.) iterations per point and policy, with pooled values per
/// policy. Policies are listed in order of first appearance.
pub fn iteration_stats(reports: &[ExperimentReport]) -> Result<IterationTable> {
    if reports.is_empty() {
        return Err(Error::Empty("experiment reports"));
    }
    let rows = reports
        .iter()
        .map(|r| PointRow {
            point: r.point,
            policy: r.policy.clone(),
            iterations: r.iterations,
        })
        .collect();

    let mut order: Vec<&str> = Vec::new();
    let mut acc: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
    for r in reports {
        if !acc.contains_key(r.policy.as_str()) {
            order.push(&r.policy);
        }
        let e = acc.entry(&r.policy).or_insert((0, 0.0, 0.0));
        let s = r.iterations;
        e.0 += s.n;
        e.1 += s.n as f64 * s.mean;
        e.2 += s.n as f64 * s.sd * s.sd;
    }
    let pooled = order
        .into_iter()
        .map(|p| {
            let (n, sum, ss) = acc[p];
            PooledRow {
                policy: p.to_string(),
                runs: n,
                mean: sum / n as f64,
                pooled_sd: (ss / n as f64).sqrt(),
            }
        })
        .collect();
    Ok(IterationTable { rows, pooled })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_run_has_zero_spread() {
        let s = summarize(&[7]).unwrap();
        assert_eq!((s.n, s.mean, s.sd), (1, 7.0, 0.0));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn population_sd() {
        let s = summarize(&[2, 4, 4, 4, 5, 5, 7, 9]).unwrap();
        assert_eq!((s.mean, s.sd), (5.0, 2.0));
    }
}
