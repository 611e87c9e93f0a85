use serde::{Deserialize, Serialize};

use crate::classifier::oracle_probability;
use crate::error::{Error, Result};
use crate::scan_io::{ground_truth, MeasurementSource};
use crate::tuner::{Outcome, TuneConfig, TuningRun};

/// Thresholds on the true double-dot fraction of a run's final window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessRegions {
    pub theta_ideal: f64,
    pub theta_close: f64,
}

impl Default for SuccessRegions {
    fn default() -> Self {
        Self {
            theta_ideal: 0.8,
            theta_close: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Ideal,
    Close,
    Fail,
}

impl Grade {
    pub fn weight(self) -> f64 {
        match self {
            Grade::Ideal => 1.0,
            Grade::Close => 0.5,
            Grade::Fail => 0.0,
        }
    }
}

impl SuccessRegions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.theta_close
            && self.theta_close < self.theta_ideal
            && self.theta_ideal <= 1.0)
        {
            return Err(Error::Config(format!(
                "need 0 <= theta_close < theta_ideal <= 1, got {} and {}",
                self.theta_close, self.theta_ideal
            )));
        }
        Ok(())
    }

    pub fn grade_fraction(&self, p_dd: f64) -> Grade {
        if p_dd >= self.theta_ideal {
            Grade::Ideal
        } else if p_dd >= self.theta_close {
            Grade::Close
        } else {
            Grade::Fail
        }
    }

    /// True double-dot fraction of the window around the run's end center,
    /// or `None` when the run never measured anything or was aborted.
    pub fn final_fraction(
        &self,
        source: &MeasurementSource,
        run: &TuningRun,
        config: &TuneConfig,
    ) -> Result<Option<f64>> {
        if run.is_aborted() || run.steps.iter().all(|s| s.blocked) {
            return Ok(None);
        }
        match ground_truth(source, run.end_center(), config.span, config.resolution)? {
            Some(labels) => Ok(Some(oracle_probability(&labels)?.p_dd)),
            // Ended on a window the source cannot measure: a failed run.
            None if source.has_labels() => Ok(None),
            None => Err(Error::MissingLabels),
        }
    }

    pub fn grade_run(
        &self,
        source: &MeasurementSource,
        run: &TuningRun,
        config: &TuneConfig,
    ) -> Result<Grade> {
        Ok(self
            .final_fraction(source, run, config)?
            .map_or(Grade::Fail, |p| self.grade_fraction(p)))
    }
}

impl TuningRun {
    /// Where the run ended: the converged vertex, or the best center seen.
    pub fn end_center(&self) -> (f64, f64) {
        match self.outcome {
            Outcome::Converged { center } => center,
            _ => self.best_center,
        }
    }
}

/// Weighted success rate: 1 per ideal run, 0.5 per close run.
pub fn success_rate(grades: impl IntoIterator<Item = Grade>) -> Result<f64> {
    let (mut n, mut total) = (0usize, 0.0);
    for g in grades {
        n += 1;
        total += g.weight();
    }
    if n == 0 {
        return Err(Error::Empty("run list"));
    }
    Ok(total / n as f64)
}
