//! Quantitative state classification of measured windows.

mod dataset;
mod mlp;
mod probability;

pub use dataset::{
    dataset_from_json, dataset_to_json, generate_dataset, load_dataset, save_dataset,
    split_dataset, DatasetConfig, LabeledSample, DATASET_SCHEMA_VERSION, MAX_WINDOW_DRAWS,
};
pub use mlp::{
    design_matrices, evaluate, evaluate_predictions, train, ClassifierModel, DenseLayer,
    EvaluationReport, Gradients, TrainingConfig, TrainingOutcome, DEFAULT_LAYER_SIZES,
    MODEL_SCHEMA_VERSION,
};
pub use probability::{oracle_probability, ProbabilityVector};

use crate::error::{Error, Result};
use crate::preprocess::process;
use crate::scan_io::Window;

/// Anything that turns an acquired window into a probability vector.
pub trait WindowClassifier: Sync {
    fn classify_window(&self, window: &Window) -> Result<ProbabilityVector>;
}

/// Reads the answer straight off the window's ground-truth labels.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleClassifier;

impl WindowClassifier for OracleClassifier {
    fn classify_window(&self, window: &Window) -> Result<ProbabilityVector> {
        let labels = window.labels.as_ref().ok_or(Error::MissingLabels)?;
        oracle_probability(labels)
    }
}

impl WindowClassifier for ClassifierModel {
    fn classify_window(&self, window: &Window) -> Result<ProbabilityVector> {
        Ok(self.classify(&process(&window.scan)?))
    }
}

impl<C: WindowClassifier + ?Sized> WindowClassifier for &C {
    fn classify_window(&self, window: &Window) -> Result<ProbabilityVector> {
        (**self).classify_window(window)
    }
}

impl<C: WindowClassifier + ?Sized> WindowClassifier for Box<C> {
    fn classify_window(&self, window: &Window) -> Result<ProbabilityVector> {
        (**self).classify_window(window)
    }
}
