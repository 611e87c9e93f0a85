//! Simulation, classification and Nelder-Mead autotuning of double quantum
//! dot devices.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod codec;
pub mod device;
pub mod error;
pub mod grid;
pub mod harness;
pub mod preprocess;
pub mod scan_io;
pub mod tuner;

pub use classifier::{ClassifierModel, OracleClassifier, ProbabilityVector, WindowClassifier};
pub use device::{DeviceParams, Noise, StateClass, StateLabel, VariationConfig};
pub use error::{Error, Result};
pub use grid::{AcquisitionDirection, Axis, LabelGrid, ScanGrid};
pub use preprocess::ProcessedImage;
pub use scan_io::{Acquisition, MeasurementSource, Sandbox, Window};
pub use tuner::{autotune, FitnessConfig, SimplexPolicy, TerminationConfig, TuneConfig, TuningRun};
