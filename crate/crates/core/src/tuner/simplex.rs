use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DYNAMIC_MIN_MV: f64 = 50.0;
pub const DYNAMIC_MAX_MV: f64 = 150.0;

/// How large the initial simplex is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SimplexPolicy {
    Fixed {
        delta: f64,
    },
    /// Size grows with the fitness at the start point.
    Dynamic {
        delta_min: f64,
        delta_max: f64,
    },
}

impl SimplexPolicy {
    pub fn fixed(delta: f64) -> Self {
        SimplexPolicy::Fixed { delta }
    }

    pub fn dynamic() -> Self {
        SimplexPolicy::Dynamic {
            delta_min: DYNAMIC_MIN_MV,
            delta_max: DYNAMIC_MAX_MV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SimplexPolicy::Fixed { delta } if delta > 0.0 && delta.is_finite() => Ok(()),
            SimplexPolicy::Dynamic {
                delta_min,
                delta_max,
            } if delta_min > 0.0 && delta_min < delta_max && delta_max.is_finite() => Ok(()),
            _ => Err(Error::Config(format!("invalid simplex policy {self:?}"))),
        }
    }

    pub fn needs_start_fitness(&self) -> bool {
        matches!(self, SimplexPolicy::Dynamic { .. })
    }

    /// Step size for a start point whose fitness is `delta0`.
    pub fn step(&self, delta0: f64) -> f64 {
        match *self {
            SimplexPolicy::Fixed { delta } => delta,
            SimplexPolicy::Dynamic {
                delta_min,
                delta_max,
            } => (delta_min * (1.0 + delta0)).clamp(delta_min, delta_max),
        }
    }

    /// Largest step the policy can produce.
    pub fn max_step(&self) -> f64 {
        match *self {
            SimplexPolicy::Fixed { delta } => delta,
            SimplexPolicy::Dynamic { delta_max, .. } => delta_max,
        }
    }

    /// Short identifier used in reports and on the command line.
    pub fn name(&self) -> String {
        match *self {
            SimplexPolicy::Fixed { delta } => format!("fixed{delta}"),
            SimplexPolicy::Dynamic { .. } => "dynamic".into(),
        }
    }

    /// Parses `fixed<mV>` or `dynamic`.
    pub fn parse(text: &str) -> Result<Self> {
        let policy = if text == "dynamic" {
            Self::dynamic()
        } else if let Some(rest) = text.strip_prefix("fixed") {
            let delta = rest
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("unknown simplex policy '{text}'")))?;
            Self::fixed(delta)
        } else {
            return Err(Error::Config(format!("unknown simplex policy '{text}'")));
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// The start point followed by the start lowered by the step on each
/// plunger in turn.
pub fn initial_simplex(start: (f64, f64), policy: &SimplexPolicy, delta0: f64) -> [[f64; 2]; 3] {
    let d = policy.step(delta0);
    [
        [start.0, start.1],
        [start.0 - d, start.1],
        [start.0, start.1 - d],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_75_lowers_each_plunger() {
        assert_eq!(
            initial_simplex((350.0, 400.0), &SimplexPolicy::fixed(75.0), 1.3),
            [[350.0, 400.0], [275.0, 400.0], [350.0, 325.0]]
        );
    }

    #[test]
    fn fixed_100() {
        assert_eq!(
            initial_simplex((250.0, 400.0), &SimplexPolicy::fixed(100.0), 0.0),
            [[250.0, 400.0], [150.0, 400.0], [250.0, 300.0]]
        );
    }

    #[test]
    fn dynamic_clamps() {
        let p = SimplexPolicy::dynamic();
        assert_eq!(p.step(0.0), 50.0);
        assert_eq!(p.step(1.0), 100.0);
        assert_eq!(p.step(2.0), 150.0);
        assert_eq!(p.step(5.0), 150.0);
    }

    #[test]
    fn parse_and_name() {
        for s in ["fixed75", "fixed100", "dynamic"] {
            assert_eq!(SimplexPolicy::parse(s).unwrap().name(), s);
        }
        assert!(SimplexPolicy::parse("fixed-3").is_err());
        assert!(SimplexPolicy::parse("adaptive").is_err());
        let bad = SimplexPolicy::Dynamic {
            delta_min: 80.0,
            delta_max: 60.0,
        };
        assert!(bad.validate().is_err());
    }
}
