//! Fitness scoring and the Nelder-Mead tuning loop.

mod autotune;
mod fitness;
mod nelder_mead;
mod simplex;

pub use autotune::{autotune, Outcome, TuneConfig, TuningRun, TuningStep};
pub use fitness::{fitness, penalty_g, raw_fitness, FitnessConfig};
pub use nelder_mead::{nelder_mead, Minimum, StopRule, Termination, TerminationConfig};
pub use simplex::{initial_simplex, SimplexPolicy, DYNAMIC_MAX_MV, DYNAMIC_MIN_MV};
