use serde::{Deserialize, Serialize};

use crate::device::{StateClass, StateLabel};
use crate::error::{Error, Result};
use crate::grid::LabelGrid;

/// Fractions of a scan in the no-dot, single-dot and double-dot states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub p_none: f64,
    pub p_sd: f64,
    pub p_dd: f64,
}

impl ProbabilityVector {
    pub const DOUBLE_DOT: Self = Self {
        p_none: 0.0,
        p_sd: 0.0,
        p_dd: 1.0,
    };

    /// Checked constructor: components must be non-negative and sum to 1
    /// within 1e-12.
    pub fn new(p_none: f64, p_sd: f64, p_dd: f64) -> Result<Self> {
        let p = Self { p_none, p_sd, p_dd };
        if !p.is_valid() {
            return Err(Error::Config(format!(
                "[{p_none}, {p_sd}, {p_dd}] is not a probability vector"
            )));
        }
        Ok(p)
    }

    pub fn from_array(a: [f64; 3]) -> Result<Self> {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_valid(&self) -> bool {
        let a = self.to_array();
        a.iter().all(|&x| x >= 0.0 && x.is_finite()) && (a.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p_none, self.p_sd, self.p_dd]
    }

    /// Dominant class; ties resolve to the earlier of none, single, double.
    pub fn argmax(&self) -> StateClass {
        let a = self.to_array();
        let mut best = 0;
        for i in 1..3 {
            if a[i] > a[best] {
                best = i;
            }
        }
        StateClass::ALL[best]
    }
}

/// Pixel-fraction probability vector of a labelled window. All single-dot
/// variants count toward the single-dot share.
pub fn oracle_probability(labels: &LabelGrid) -> Result<ProbabilityVector> {
    probability_from_labels(labels.labels().iter().copied())
}

pub(crate) fn probability_from_labels(
    labels: impl Iterator<Item = StateLabel>,
) -> Result<ProbabilityVector> {
    let mut counts = [0usize; 3];
    let mut n = 0usize;
    for l in labels {
        counts[l.class().index()] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("label grid"));
    }
    let total = n as f64;
    let p_sd = counts[1] as f64 / total;
    let p_dd = counts[2] as f64 / total;
    let p_none = (n - counts[1] - counts[2]) as f64 / total;
    Ok(ProbabilityVector { p_none, p_sd, p_dd })
}
