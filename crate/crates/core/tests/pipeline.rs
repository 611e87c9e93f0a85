use qdtune_core::classifier::{
    evaluate, generate_dataset, split_dataset, train, DatasetConfig, TrainingConfig,
};
use qdtune_core::harness::{
    heatmap, neighborhood_experiment, run_and_grade, ExperimentConfig, Grade, HeatmapConfig,
    RunSettings,
};
use qdtune_core::scan_io::{load_scan, save_scan};
use qdtune_core::tuner::Outcome;
use qdtune_core::{
    autotune, DeviceParams, MeasurementSource, Noise, OracleClassifier, Sandbox, SimplexPolicy,
    TuneConfig,
};

fn reference_raster(noise: Noise) -> MeasurementSource {
    let (scan, labels) = DeviceParams::reference()
        .render_scan((300.0, 350.0), (400.0, 400.0), 2.0, noise)
        .unwrap();
    MeasurementSource::premeasured(scan, Some(labels)).unwrap()
}

#[test]
fn heatmap_favors_starts_beside_the_band() {
    let source = reference_raster(Noise::Off);
    let mut settings = RunSettings::default();
    settings.tune.span = (30.0, 30.0);
    settings.tune.policy = SimplexPolicy::fixed(100.0);
    let map = heatmap(
        &source,
        &OracleClassifier,
        &settings,
        &HeatmapConfig::default(),
        Some(2),
    )
    .unwrap();
    assert_eq!((map.v1_starts.len(), map.v2_starts.len()), (28, 28));
    assert_eq!(map.v1_starts[0], 100.0 + 100.0 + 15.0);

    let both_high = map.mean_where(|v1, v2| v1 > 400.0 && v2 > 400.0).unwrap();
    let one_mid = map
        .mean_where(|v1, v2| (250.0..=375.0).contains(&v1) != (250.0..=375.0).contains(&v2))
        .unwrap();
    assert!(
        one_mid >= 0.9 && one_mid > both_high,
        "one plunger mid {one_mid}, both high {both_high}"
    );
}

#[test]
fn stored_scan_tunes_like_the_original() {
    let (scan, labels) = DeviceParams::reference()
        .render_scan((300.0, 300.0), (600.0, 600.0), 2.0, Noise::Seeded(12))
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ref.qdscan.json");
    save_scan(&path, &scan, Some(&labels)).unwrap();
    let (scan2, labels2) = load_scan(&path).unwrap();

    let a = MeasurementSource::premeasured(scan, Some(labels)).unwrap();
    let b = MeasurementSource::premeasured(scan2, labels2).unwrap();
    let cfg = TuneConfig::default();
    let ra = autotune(
        &a,
        &OracleClassifier,
        (250.0, 230.0),
        &cfg,
        &Sandbox::default(),
    )
    .unwrap();
    let rb = autotune(
        &b,
        &OracleClassifier,
        (250.0, 230.0),
        &cfg,
        &Sandbox::default(),
    )
    .unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra.to_json().unwrap(), rb.to_json().unwrap());
}

#[test]
fn trained_model_tunes_into_the_double_dot_region() {
    let samples = generate_dataset(&DatasetConfig {
        n_devices: 300,
        seed: 31,
        ..DatasetConfig::default()
    })
    .unwrap();
    let (train_set, test_set) = split_dataset(&samples, 0.8, 1).unwrap();
    let model = train(
        &train_set,
        &TrainingConfig {
            steps: 2000,
            seed: 2,
            ..TrainingConfig::default()
        },
    )
    .unwrap()
    .model;
    assert!(evaluate(&model, &test_set).unwrap().accuracy > 0.8);

    let source = MeasurementSource::simulated(DeviceParams::reference(), Noise::Seeded(5)).unwrap();
    let settings = RunSettings::default();
    let mut good = 0;
    let starts = [
        (250.0, 230.0),
        (300.0, 215.0),
        (210.0, 300.0),
        (380.0, 225.0),
    ];
    for &start in &starts {
        let (run, record) = run_and_grade(&source, &model, start, &settings).unwrap();
        assert!(!run.is_aborted());
        assert!(run.iteration_count <= 50);
        good += usize::from(record.grade != Grade::Fail);
    }
    assert!(
        good >= 3,
        "{good} of {} runs reached the double-dot region",
        starts.len()
    );
}

#[test]
fn neighborhood_rejects_points_outside_the_sandbox() {
    let source = reference_raster(Noise::Off);
    let settings = ExperimentConfig::default().settings;
    assert!(neighborhood_experiment(
        &source,
        &OracleClassifier,
        (601.0, 300.0),
        &settings,
        Some(1)
    )
    .is_err());
}

#[test]
fn oracle_without_labels_aborts_cleanly() {
    let (scan, _) = DeviceParams::reference()
        .render_scan((300.0, 300.0), (600.0, 600.0), 2.0, Noise::Off)
        .unwrap();
    let source = MeasurementSource::premeasured(scan, None).unwrap();
    // The oracle needs labels, so the run aborts cleanly rather than panicking.
    let run = autotune(
        &source,
        &OracleClassifier,
        (300.0, 215.0),
        &TuneConfig::default(),
        &Sandbox::default(),
    )
    .unwrap();
    assert!(matches!(run.outcome, Outcome::Aborted { .. }));
}
