use serde::{Deserialize, Serialize};

use crate::classifier::ProbabilityVector;
use crate::error::{Error, Result};

/// Smooth penalty on `[0, 1]` with `g(0) = 0`, `g(1) = 1` and its inflection
/// at 0.5; `s` sets the steepness.
pub fn penalty_g(x: f64, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "penalty argument",
            value: x,
        });
    }
    if !(s > 0.0) {
        return Err(Error::OutOfRange {
            what: "penalty steepness",
            value: s,
        });
    }
    let half = (s / 2.0).atan();
    Ok(((s * (x - 0.5)).atan() + half) / (2.0 * half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessConfig {
    pub p_target: ProbabilityVector,
    /// Weight of the no-dot penalty.
    pub alpha: f64,
    /// Weight of the single-dot penalty.
    pub beta: f64,
    pub steepness: f64,
    pub blocked_fitness: f64,
    /// Clip fitness values at `blocked_fitness`.
    pub cap: bool,
}

impl Default for FitnessConfig {
    fn default() -> Self {
        Self {
            p_target: ProbabilityVector::DOUBLE_DOT,
            alpha: 1.0,
            beta: 1.0,
            steepness: 10.0,
            blocked_fitness: 2.0,
            cap: true,
        }
    }
}

impl FitnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0) {
            return Err(Error::Config("alpha and beta must be non-negative".into()));
        }
        if !(self.steepness > 0.0) {
            return Err(Error::Config("steepness must be positive".into()));
        }
        if !self.p_target.is_valid() {
            return Err(Error::Config("p_target is not a probability vector".into()));
        }
        if !(self.blocked_fitness > 0.0 && self.blocked_fitness.is_finite()) {
            return Err(Error::Config("blocked_fitness must be positive".into()));
        }
        Ok(())
    }
}

/// Uncapped fitness: Euclidean distance to the target plus the weighted
/// no-dot and single-dot penalties.
pub fn raw_fitness(p: &ProbabilityVector, config: &FitnessConfig) -> Result<f64> {
    let t = config.p_target.to_array();
    let a = p.to_array();
    let distance = t
        .iter()
        .zip(a)
        .map(|(ti, ai)| (ti - ai).powi(2))
        .sum::<f64>()
        .sqrt();
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    Ok(distance
        + config.alpha * penalty_g(clamp(p.p_none), config.steepness)?
        + config.beta * penalty_g(clamp(p.p_sd), config.steepness)?)
}

/// Fitness of a probability vector, capped at `blocked_fitness` when
/// `config.cap` is set.
pub fn fitness(p: &ProbabilityVector, config: &FitnessConfig) -> Result<f64> {
    let raw = raw_fitness(p, config)?;
    Ok(if config.cap {
        raw.min(config.blocked_fitness)
    } else {
        raw
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(a: f64, b: f64, c: f64) -> ProbabilityVector {
        ProbabilityVector::new(a, b, c).unwrap()
    }

    #[test]
    fn penalty_anchor_points() {
        assert_eq!(penalty_g(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(penalty_g(1.0, 10.0).unwrap(), 1.0);
        assert_eq!(penalty_g(0.5, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn penalty_at_three_quarters() {
        // atan(2.5) = 1.19028995, atan(5) = 1.37340077
        let expected =
            (1.190_289_949_682_532 + 1.373_400_766_945_016) / (2.0 * 1.373_400_766_945_016);
        assert!((penalty_g(0.75, 10.0).unwrap() - expected).abs() < 1e-12);
        assert!((penalty_g(0.75, 10.0).unwrap() - 0.93334).abs() < 1e-5);
    }

    #[test]
    fn penalty_rejects_out_of_range() {
        assert!(penalty_g(-0.01, 10.0).is_err());
        assert!(penalty_g(1.01, 10.0).is_err());
        assert!(penalty_g(0.5, 0.0).is_err());
    }

    #[test]
    fn perfect_double_dot_has_zero_fitness() {
        assert_eq!(
            fitness(&ProbabilityVector::DOUBLE_DOT, &FitnessConfig::default()).unwrap(),
            0.0
        );
        let heavy = FitnessConfig {
            alpha: 7.0,
            beta: 3.0,
            ..Default::default()
        };
        assert_eq!(
            fitness(&ProbabilityVector::DOUBLE_DOT, &heavy).unwrap(),
            0.0
        );
    }

    #[test]
    fn pure_states_are_capped() {
        let cfg = FitnessConfig::default();
        for p in [pv(1.0, 0.0, 0.0), pv(0.0, 1.0, 0.0)] {
            assert!((raw_fitness(&p, &cfg).unwrap() - (2f64.sqrt() + 1.0)).abs() < 1e-12);
            assert_eq!(fitness(&p, &cfg).unwrap(), 2.0);
        }
        let uncapped = FitnessConfig { cap: false, ..cfg };
        assert!(fitness(&pv(1.0, 0.0, 0.0), &uncapped).unwrap() > 2.4);
    }

    #[test]
    fn mixed_vector_by_hand() {
        let p = pv(0.2, 0.5, 0.3);
        let d = (0.04f64 + 0.25 + 0.49).sqrt();
        let g = |x: f64| ((10.0 * (x - 0.5)).atan() + 5f64.atan()) / (2.0 * 5f64.atan());
        let want = d + g(0.2) + g(0.5);
        assert!((fitness(&p, &FitnessConfig::default()).unwrap() - want.min(2.0)).abs() < 1e-12);
    }
}
