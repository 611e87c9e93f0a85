use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fitness::{fitness, FitnessConfig};
use super::nelder_mead::{nelder_mead, Termination, TerminationConfig};
use super::simplex::{initial_simplex, SimplexPolicy};
use crate::classifier::{ProbabilityVector, WindowClassifier};
use crate::error::{Error, Result};
use crate::scan_io::{acquire, Acquisition, MeasurementSource, Sandbox};

/// Everything about a tuning run except the source, classifier and start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    /// Window size in mV.
    pub span: (f64, f64),
    /// Pixel size in mV.
    pub resolution: f64,
    pub fitness: FitnessConfig,
    pub policy: SimplexPolicy,
    pub termination: TerminationConfig,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            span: (60.0, 60.0),
            resolution: 2.0,
            fitness: FitnessConfig::default(),
            policy: SimplexPolicy::fixed(75.0),
            termination: TerminationConfig::default(),
        }
    }
}

impl TuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.span.0 > 0.0 && self.span.1 > 0.0 && self.resolution > 0.0) {
            return Err(Error::Config("span and resolution must be positive".into()));
        }
        self.fitness.validate()?;
        self.policy.validate()?;
        self.termination.validate()
    }
}

/// One measurement of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningStep {
    pub center: (f64, f64),
    /// Absent when the window was blocked.
    pub probability: Option<ProbabilityVector>,
    pub fitness: f64,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged { center: (f64, f64) },
    MaxIterations,
    Aborted { cause: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRun {
    pub start: (f64, f64),
    pub steps: Vec<TuningStep>,
    pub outcome: Outcome,
    pub iteration_count: usize,
    /// Lowest-fitness center seen, or the start if nothing was measured.
    pub best_center: (f64, f64),
    pub best_fitness: f64,
}

impl TuningRun {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("tuning run", e.to_string()))
    }

    /// One row per measurement; probability columns are empty for blocked
    /// windows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,v1,v2,p_none,p_sd,p_dd,fitness\n");
        for (i, s) in self.steps.iter().enumerate() {
            let p = match s.probability {
                Some(p) => format!("{},{},{}", p.p_none, p.p_sd, p.p_dd),
                None => ",,".into(),
            };
            let _ = writeln!(out, "{i},{},{},{p},{}", s.center.0, s.center.1, s.fitness);
        }
        out
    }

    pub fn is_aborted(&self) -> bool {
        matches!(self.outcome, Outcome::Aborted { .. })
    }
}

/// Runs the measure, classify, score and step loop from `start` until the
/// optimizer terminates. Failures of the source or classifier end the run
/// as [`Outcome::Aborted`] with the trace so far.
pub fn autotune<C: WindowClassifier + ?Sized>(
    source: &MeasurementSource,
    classifier: &C,
    start: (f64, f64),
    config: &TuneConfig,
    sandbox: &Sandbox,
) -> Result<TuningRun> {
    config.validate()?;
    sandbox.validate()?;
    if !sandbox.contains(start.0, start.1) {
        return Err(Error::Domain {
            v1: start.0,
            v2: start.1,
        });
    }
    let mut steps = Vec::new();
    let mut measure = |x: &[f64; 2]| -> Result<f64> {
        let center = (x[0], x[1]);
        let step = match acquire(source, center, config.span, config.resolution, sandbox)? {
            Acquisition::Blocked => TuningStep {
                center,
                probability: None,
                fitness: sandbox.blocked_fitness,
                blocked: true,
            },
            Acquisition::Data(window) => {
                let p = classifier.classify_window(&window)?;
                TuningStep {
                    center,
                    probability: Some(p),
                    fitness: fitness(&p, &config.fitness)?,
                    blocked: false,
                }
            }
        };
        let f = step.fitness;
        steps.push(step);
        Ok(f)
    };

    let result = (|| {
        let known_first = if config.policy.needs_start_fitness() {
            Some(measure(&[start.0, start.1])?)
        } else {
            None
        };
        let simplex = initial_simplex(start, &config.policy, known_first.unwrap_or(0.0));
        nelder_mead(&mut measure, &simplex, known_first, &config.termination)
    })();

    let outcome = match &result {
        Ok(m) => match m.termination {
            Termination::Converged => Outcome::Converged {
                center: (m.point[0], m.point[1]),
            },
            Termination::MaxIterations => Outcome::MaxIterations,
        },
        Err(e) => Outcome::Aborted {
            cause: e.to_string(),
        },
    };
    let (best_center, best_fitness) = steps.iter().fold((start, f64::INFINITY), |(bc, bf), s| {
        if s.fitness < bf {
            (s.center, s.fitness)
        } else {
            (bc, bf)
        }
    });
    let best_fitness = if best_fitness.is_finite() {
        best_fitness
    } else {
        sandbox.blocked_fitness
    };
    Ok(TuningRun {
        start,
        iteration_count: steps.len(),
        steps,
        outcome,
        best_center,
        best_fitness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::OracleClassifier;
    use crate::device::{DeviceParams, Noise};
    use crate::scan_io::Window;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl WindowClassifier for Counting {
        fn classify_window(&self, _: &Window) -> Result<ProbabilityVector> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(ProbabilityVector::new(0.0, 1.0, 0.0).unwrap())
        }
    }

    struct Failing;

    impl WindowClassifier for Failing {
        fn classify_window(&self, _: &Window) -> Result<ProbabilityVector> {
            Err(Error::MissingLabels)
        }
    }

    fn sim() -> MeasurementSource {
        MeasurementSource::simulated(DeviceParams::reference(), Noise::Off).unwrap()
    }

    #[test]
    fn records_every_measurement() {
        let run = autotune(
            &sim(),
            &OracleClassifier,
            (300.0, 250.0),
            &TuneConfig::default(),
            &Sandbox::default(),
        )
        .unwrap();
        assert_eq!(run.iteration_count, run.steps.len());
        assert!(run.iteration_count <= 50);
        assert!(run.steps.iter().all(|s| (0.0..=2.0).contains(&s.fitness)));
        assert_eq!(run.steps[0].center, (300.0, 250.0));
        assert_eq!(run.steps[1].center, (225.0, 250.0));
        assert_eq!(run.steps[2].center, (300.0, 175.0));
        let min = run
            .steps
            .iter()
            .map(|s| s.fitness)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(run.best_fitness, min);
    }

    #[test]
    fn blocked_windows_skip_the_classifier() {
        let counter = Counting(AtomicUsize::new(0));
        // Two vertices start outside the sandbox.
        let cfg = TuneConfig {
            policy: SimplexPolicy::fixed(100.0),
            ..Default::default()
        };
        let run = autotune(&sim(), &counter, (60.0, 60.0), &cfg, &Sandbox::default()).unwrap();
        let blocked = run.steps.iter().filter(|s| s.blocked).count();
        assert!(blocked >= 2);
        assert_eq!(counter.0.load(Ordering::SeqCst), run.steps.len() - blocked);
        assert!(run
            .steps
            .iter()
            .filter(|s| s.blocked)
            .all(|s| s.fitness == 2.0));
    }

    #[test]
    fn dynamic_policy_measures_the_start_once() {
        let cfg = TuneConfig {
            policy: SimplexPolicy::dynamic(),
            ..Default::default()
        };
        let run = autotune(
            &sim(),
            &OracleClassifier,
            (300.0, 250.0),
            &cfg,
            &Sandbox::default(),
        )
        .unwrap();
        let d = SimplexPolicy::dynamic().step(run.steps[0].fitness);
        assert_eq!(run.steps[1].center, (300.0 - d, 250.0));
        assert_eq!(
            run.steps
                .iter()
                .filter(|s| s.center == (300.0, 250.0))
                .count(),
            1
        );
    }

    #[test]
    fn classifier_failure_aborts_with_trace() {
        let run = autotune(
            &sim(),
            &Failing,
            (300.0, 300.0),
            &TuneConfig::default(),
            &Sandbox::default(),
        )
        .unwrap();
        assert!(run.is_aborted());
        assert!(run.steps.is_empty());
    }

    #[test]
    fn start_outside_sandbox_is_an_error() {
        assert!(autotune(
            &sim(),
            &OracleClassifier,
            (700.0, 0.0),
            &TuneConfig::default(),
            &Sandbox::default()
        )
        .is_err());
    }

    #[test]
    fn json_and_csv_export() {
        let run = autotune(
            &sim(),
            &OracleClassifier,
            (300.0, 250.0),
            &TuneConfig::default(),
            &Sandbox::default(),
        )
        .unwrap();
        assert_eq!(TuningRun::from_json(&run.to_json().unwrap()).unwrap(), run);
        let csv = run.to_csv();
        assert_eq!(csv.lines().count(), run.steps.len() + 1);
        assert!(csv.starts_with("step,v1,v2,p_none,p_sd,p_dd,fitness\n"));
    }
}
