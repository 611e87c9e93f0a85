//! Off-line evaluation: neighborhood experiments, heatmaps, fitness
//! landscapes and iteration statistics.

mod config;
mod experiment;
mod heatmap;
mod landscape;
mod regions;
mod report;
mod stats;

pub use config::{DeviceSpec, ExperimentConfig, REFERENCE_POINTS};
pub use experiment::{
    native_pitch, neighborhood_experiment, neighborhood_starts, run_and_grade, run_parallel,
    ExperimentReport, GradeCounts, OutcomeCounts, RunRecord, RunSettings, NEIGHBORHOOD_RADIUS_PX,
};
pub use heatmap::{heatmap, heatmap_axes, HeatmapConfig, HeatmapReport, MarginRule};
pub use landscape::{fitness_landscape, LandscapeMap};
pub use regions::{success_rate, Grade, SuccessRegions};
pub use report::{experiment_csv, heatmap_csv, iteration_csv, summary_text};
pub use stats::{iteration_stats, summarize, IterationTable, PointRow, PooledRow, Summary};
