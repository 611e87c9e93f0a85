use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regions::{success_rate, Grade, SuccessRegions};
use super::stats::{summarize, Summary};
use crate::classifier::WindowClassifier;
use crate::error::{Error, Result};
use crate::scan_io::{MeasurementSource, Sandbox};
use crate::tuner::{autotune, Outcome, TuneConfig, TuningRun};

/// Neighborhood half-width in native pixels; 4 gives a 9x9 block.
pub const NEIGHBORHOOD_RADIUS_PX: usize = 4;

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub tune: TuneConfig,
    pub sandbox: Sandbox,
    pub regions: SuccessRegions,
}

impl RunSettings {
    pub fn validate(&self) -> Result<()> {
        self.tune.validate()?;
        self.sandbox.validate()?;
        self.regions.validate()
    }
}

/// Condensed record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub start: (f64, f64),
    pub outcome: String,
    pub iterations: usize,
    pub end_center: (f64, f64),
    pub best_fitness: f64,
    /// True double-dot fraction at the end center.
    pub final_p_dd: Option<f64>,
    pub grade: Grade,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeCounts {
    pub ideal: usize,
    pub close: usize,
    pub fail: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub converged: usize,
    pub max_iterations: usize,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub point: (f64, f64),
    pub policy: String,
    pub runs: usize,
    pub success_rate: f64,
    pub grades: GradeCounts,
    pub outcomes: OutcomeCounts,
    pub iterations: Summary,
    pub records: Vec<RunRecord>,
}

impl ExperimentReport {
    pub fn from_records(
        point: (f64, f64),
        policy: String,
        records: Vec<RunRecord>,
    ) -> Result<Self> {
        let rate = success_rate(records.iter().map(|r| r.grade))?;
        let mut grades = GradeCounts::default();
        let mut outcomes = OutcomeCounts::default();
        for r in &records {
            match r.grade {
                Grade::Ideal => grades.ideal += 1,
                Grade::Close => grades.close += 1,
                Grade::Fail => grades.fail += 1,
            }
            match r.outcome.as_str() {
                "converged" => outcomes.converged += 1,
                "max_iterations" => outcomes.max_iterations += 1,
                _ => outcomes.aborted += 1,
            }
        }
        let counts: Vec<usize> = records.iter().map(|r| r.iterations).collect();
        Ok(Self {
            point,
            policy,
            runs: records.len(),
            success_rate: rate,
            grades,
            outcomes,
            iterations: summarize(&counts)?,
            records,
        })
    }
}

/// Runs one tuning episode and grades it against the ground truth.
pub fn run_and_grade<C: WindowClassifier + ?Sized>(
    source: &MeasurementSource,
    classifier: &C,
    start: (f64, f64),
    settings: &RunSettings,
) -> Result<(TuningRun, RunRecord)> {
    let run = autotune(source, classifier, start, &settings.tune, &settings.sandbox)?;
    let final_p_dd = settings
        .regions
        .final_fraction(source, &run, &settings.tune)?;
    let grade = final_p_dd.map_or(Grade::Fail, |p| settings.regions.grade_fraction(p));
    let outcome = match run.outcome {
        Outcome::Converged { .. } => "converged",
        Outcome::MaxIterations => "max_iterations",
        Outcome::Aborted { .. } => "aborted",
    };
    let record = RunRecord {
        start,
        outcome: outcome.into(),
        iterations: run.iteration_count,
        end_center: run.end_center(),
        best_fitness: run.best_fitness,
        final_p_dd,
        grade,
    };
    Ok((run, record))
}

/// Pixel pitch of the source: the stored raster's for premeasured scans,
/// the tuning resolution otherwise.
pub fn native_pitch(source: &MeasurementSource, settings: &RunSettings) -> f64 {
    match source {
        MeasurementSource::PremeasuredScan { scan, .. } => scan.resolution(),
        MeasurementSource::SimulatedDevice { .. } => settings.tune.resolution,
    }
}

/// Start points of the 9x9 native-pixel block centered on `point`, row by
/// row (v2 outer, v1 inner).
pub fn neighborhood_starts(point: (f64, f64), pitch: f64) -> Vec<(f64, f64)> {
    let r = NEIGHBORHOOD_RADIUS_PX as i64;
    (-r..=r)
        .flat_map(|j| {
            (-r..=r).map(move |i| (point.0 + i as f64 * pitch, point.1 + j as f64 * pitch))
        })
        .collect()
}

/// Runs `f` over `items` on a pool of `workers` threads (all cores when
/// `None`), returning results in input order.
pub fn run_parallel<T, R, F>(items: &[T], workers: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// One tuning run from every pixel of the 9x9 neighborhood of `point`.
pub fn neighborhood_experiment<C: WindowClassifier + ?Sized>(
    source: &MeasurementSource,
    classifier: &C,
    point: (f64, f64),
    settings: &RunSettings,
    workers: Option<usize>,
) -> Result<ExperimentReport> {
    settings.validate()?;
    let starts = neighborhood_starts(point, native_pitch(source, settings));
    if let Some(&(v1, v2)) = starts.iter().find(|s| !settings.sandbox.contains(s.0, s.1)) {
        return Err(Error::Domain { v1, v2 });
    }
    let records = run_parallel(&starts, workers, |&s| {
        run_and_grade(source, classifier, s, settings).map(|(_, r)| r)
    })?;
    ExperimentReport::from_records(point, settings.tune.policy.name(), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::OracleClassifier;
    use crate::device::{DeviceParams, Noise};

    #[test]
    fn nine_by_nine_starts() {
        let s = neighborhood_starts((300.0, 200.0), 2.0);
        assert_eq!(s.len(), 81);
        assert_eq!(s[0], (292.0, 192.0));
        assert_eq!(s[80], (308.0, 208.0));
        assert_eq!(s[1], (294.0, 192.0));
    }

    #[test]
    fn out_of_sandbox_neighborhood_is_rejected() {
        let src = MeasurementSource::simulated(DeviceParams::reference(), Noise::Off).unwrap();
        let r = neighborhood_experiment(
            &src,
            &OracleClassifier,
            (596.0, 300.0),
            &RunSettings::default(),
            Some(1),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn report_is_consistent_and_worker_independent() {
        let src = MeasurementSource::simulated(DeviceParams::reference(), Noise::Off).unwrap();
        let a = neighborhood_experiment(
            &src,
            &OracleClassifier,
            (330.0, 220.0),
            &RunSettings::default(),
            Some(1),
        )
        .unwrap();
        let b = neighborhood_experiment(
            &src,
            &OracleClassifier,
            (330.0, 220.0),
            &RunSettings::default(),
            Some(4),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs, 81);
        assert_eq!(a.grades.ideal + a.grades.close + a.grades.fail, 81);
        assert_eq!(
            a.outcomes.converged + a.outcomes.max_iterations + a.outcomes.aborted,
            81
        );
        assert!((0.0..=1.0).contains(&a.success_rate));
    }
}
