use serde::{Deserialize, Serialize};

use super::experiment::{run_and_grade, run_parallel, RunSettings};
use crate::classifier::WindowClassifier;
use crate::device::{DOMAIN_MAX_MV, DOMAIN_MIN_MV};
use crate::error::{Error, Result};
use crate::scan_io::MeasurementSource;
use crate::tuner::SimplexPolicy;

/// Distance kept between the start lattice and the low and high edges of
/// the sampled rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRule {
    pub low: f64,
    pub high: f64,
}

impl MarginRule {
    /// Smallest margin that keeps every initial vertex's window inside the
    /// rectangle: vertices only move down, by at most the largest step.
    pub fn for_policy(policy: &SimplexPolicy, span: (f64, f64)) -> Self {
        let half = span.0.max(span.1) / 2.0;
        Self {
            low: policy.max_step() + half,
            high: half,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapConfig {
    pub grid_step: f64,
    /// `((v1_min, v1_max), (v2_min, v2_max))`; defaults to the stored raster
    /// for premeasured sources and the device domain otherwise.
    pub rect: Option<((f64, f64), (f64, f64))>,
    /// Defaults to [`MarginRule::for_policy`].
    pub margin: Option<MarginRule>,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            grid_step: 10.0,
            rect: None,
            margin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapReport {
    pub policy: String,
    pub v1_starts: Vec<f64>,
    pub v2_starts: Vec<f64>,
    /// Success weight per start, `[v2 index][v1 index]`.
    pub success: Vec<Vec<f64>>,
    pub iterations: Vec<Vec<usize>>,
    pub mean_success: f64,
}

impl HeatmapReport {
    pub fn starts(&self) -> usize {
        self.v1_starts.len() * self.v2_starts.len()
    }

    /// Mean success over starts accepted by `keep`, or `None` if none are.
    pub fn mean_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let mut n = 0usize;
        let mut total = 0.0;
        for (j, &v2) in self.v2_starts.iter().enumerate() {
            for (i, &v1) in self.v1_starts.iter().enumerate() {
                if keep(v1, v2) {
                    n += 1;
                    total += self.success[j][i];
                }
            }
        }
        (n > 0).then(|| total / n as f64)
    }
}

fn lattice(lo: f64, hi: f64, margin: MarginRule, step: f64) -> Vec<f64> {
    let first = lo + margin.low;
    let last = hi - margin.high;
    if last < first {
        return Vec::new();
    }
    let count = ((last - first) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| first + k as f64 * step).collect()
}

/// Start points on a `grid_step` lattice inside the rectangle less margins.
pub fn heatmap_axes(
    rect: ((f64, f64), (f64, f64)),
    grid_step: f64,
    margin: MarginRule,
) -> (Vec<f64>, Vec<f64>) {
    (
        lattice(rect.0 .0, rect.0 .1, margin, grid_step),
        lattice(rect.1 .0, rect.1 .1, margin, grid_step),
    )
}

/// One run per lattice start, scored by success weight.
pub fn heatmap<C: WindowClassifier + ?Sized>(
    source: &MeasurementSource,
    classifier: &C,
    settings: &RunSettings,
    config: &HeatmapConfig,
    workers: Option<usize>,
) -> Result<HeatmapReport> {
    settings.validate()?;
    if !(config.grid_step > 0.0) {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let rect = config.rect.unwrap_or_else(|| match source {
        MeasurementSource::PremeasuredScan { scan, .. } => (
            (scan.v1_axis().lower_edge(), scan.v1_axis().upper_edge()),
            (scan.v2_axis().lower_edge(), scan.v2_axis().upper_edge()),
        ),
        MeasurementSource::SimulatedDevice { .. } => (
            (DOMAIN_MIN_MV, DOMAIN_MAX_MV),
            (DOMAIN_MIN_MV, DOMAIN_MAX_MV),
        ),
    });
    let margin = config
        .margin
        .unwrap_or_else(|| MarginRule::for_policy(&settings.tune.policy, settings.tune.span));
    let (v1s, v2s) = heatmap_axes(rect, config.grid_step, margin);
    if v1s.is_empty() || v2s.is_empty() {
        return Err(Error::Config("the margins leave no start points".into()));
    }
    let starts: Vec<(f64, f64)> = v2s
        .iter()
        .flat_map(|&v2| v1s.iter().map(move |&v1| (v1, v2)))
        .collect();
    let records = run_parallel(&starts, workers, |&s| {
        run_and_grade(source, classifier, s, settings).map(|(_, r)| r)
    })?;
    let success: Vec<Vec<f64>> = records
        .chunks(v1s.len())
        .map(|row| row.iter().map(|r| r.grade.weight()).collect())
        .collect();
    let iterations = records
        .chunks(v1s.len())
        .map(|row| row.iter().map(|r| r.iterations).collect())
        .collect();
    let mean_success = records.iter().map(|r| r.grade.weight()).sum::<f64>() / records.len() as f64;
    Ok(HeatmapReport {
        policy: settings.tune.policy.name(),
        v1_starts: v1s,
        v2_starts: v2s,
        success,
        iterations,
        mean_success,
    })
}
