use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use qdtune_core::classifier::{
    dataset_to_json, evaluate, generate_dataset, load_dataset, save_dataset, split_dataset, train,
    DatasetConfig, TrainingConfig,
};
use qdtune_core::device::sample_device;
use qdtune_core::harness::{
    experiment_csv, fitness_landscape, heatmap, heatmap_csv, iteration_csv, iteration_stats,
    neighborhood_experiment, run_and_grade, summary_text, ExperimentConfig, ExperimentReport,
};
use qdtune_core::scan_io::{load_scan, scan_to_json};
use qdtune_core::{
    ClassifierModel, DeviceParams, MeasurementSource, OracleClassifier, SimplexPolicy,
    VariationConfig, WindowClassifier,
};

use crate::{Cli, Command, Common};

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    let cfg = load_config(c)?;
    match &cli.command {
        Command::SampleDevice => {
            let device = match c.seed {
                Some(seed) => sample_device(seed, &VariationConfig::default())?,
                None => cfg.device.build()?,
            };
            emit(c, &[("device.json", device.to_json()?)])
        }
        Command::RenderScan(a) => {
            let device = match &a.device {
                Some(path) => DeviceParams::from_json(&read(path)?)?,
                None => cfg.device.build()?,
            };
            let noise = noise_for(c, &cfg);
            let (scan, labels) =
                device.render_scan(a.center, (a.span, a.span), a.resolution, noise)?;
            emit(
                c,
                &[("scan.qdscan.json", scan_to_json(&scan, Some(&labels))?)],
            )
        }
        Command::GenDataset(a) => {
            let dc = DatasetConfig {
                n_devices: a.devices,
                samples_per_device: a.per_device,
                seed: c.seed.unwrap_or(0),
                noisy: !a.clean,
                ..DatasetConfig::default()
            };
            let samples = generate_dataset(&dc)?;
            match &c.out {
                Some(dir) => {
                    create(dir)?;
                    let path = dir.join("dataset.json");
                    save_dataset(&path, &samples)?;
                    println!("wrote {}", path.display());
                    Ok(())
                }
                None => emit(c, &[("dataset.json", dataset_to_json(&samples)?)]),
            }
        }
        Command::Train(a) => {
            let samples = load_dataset(&a.dataset)?;
            let (train_set, test_set) = split_dataset(&samples, a.train_fraction, a.split_seed)?;
            let outcome = train(
                &train_set,
                &TrainingConfig {
                    steps: a.steps,
                    seed: c.seed.unwrap_or(0),
                    ..TrainingConfig::default()
                },
            )?;
            let held_out = if test_set.is_empty() {
                Value::Null
            } else {
                serde_json::to_value(evaluate(&outcome.model, &test_set)?)?
            };
            let summary = json!({
                "train_samples": train_set.len(),
                "test_samples": test_set.len(),
                "final_loss": outcome.loss_trace.last(),
                "held_out": held_out,
            });
            emit(
                c,
                &[
                    ("model.json", outcome.model.to_json()?),
                    ("training.json", serde_json::to_string_pretty(&summary)?),
                ],
            )
        }
        Command::Evaluate(a) => {
            let model = ClassifierModel::from_json(&read(&a.model)?)?;
            let report = evaluate(&model, &load_dataset(&a.dataset)?)?;
            emit(
                c,
                &[("evaluation.json", serde_json::to_string_pretty(&report)?)],
            )
        }
        Command::Tune(a) => {
            let source = build_source(c, &cfg)?;
            let classifier = build_classifier(c)?;
            let mut settings = cfg.settings.clone();
            if let Some(p) = &c.policy {
                settings.tune.policy = SimplexPolicy::parse(p)?;
            }
            let (run, record) = run_and_grade(&source, &classifier, a.start, &settings)?;
            let doc = json!({ "run": run, "grade": record.grade, "final_p_dd": record.final_p_dd });
            emit(
                c,
                &[
                    ("run.json", serde_json::to_string_pretty(&doc)?),
                    ("run.csv", run.to_csv()),
                ],
            )
        }
        Command::Neighborhood(a) => {
            let mut cfg = cfg;
            if !a.points.is_empty() {
                cfg.points = a.points.clone();
            }
            let source = build_source(c, &cfg)?;
            let classifier = build_classifier(c)?;
            let workers = c.workers.or(cfg.workers);
            let mut reports = Vec::new();
            for policy in policies(c, &cfg)? {
                let settings = cfg.settings_for(policy);
                for &point in &cfg.points {
                    reports.push(
                        neighborhood_experiment(&source, &classifier, point, &settings, workers)
                            .with_context(|| {
                                format!("neighborhood of ({}, {})", point.0, point.1)
                            })?,
                    );
                }
            }
            let table = iteration_stats(&reports)?;
            cfg.workers = None;
            let doc = json!({ "config": cfg, "reports": reports, "iterations": table });
            emit(
                c,
                &[
                    ("neighborhood.json", serde_json::to_string_pretty(&doc)?),
                    ("success.csv", experiment_csv(&reports)),
                    ("iterations.csv", iteration_csv(&table)),
                    ("summary.txt", summary_text(&reports, &table)),
                ],
            )
        }
        Command::Heatmap => {
            let source = build_source(c, &cfg)?;
            let classifier = build_classifier(c)?;
            let workers = c.workers.or(cfg.workers);
            let mut maps = Vec::new();
            let mut files = Vec::new();
            for policy in policies(c, &cfg)? {
                let map = heatmap(
                    &source,
                    &classifier,
                    &cfg.settings_for(policy),
                    &cfg.heatmap,
                    workers,
                )?;
                files.push((format!("heatmap_{}.csv", map.policy), heatmap_csv(&map)));
                maps.push(map);
            }
            let mut out = vec![(
                "heatmap.json".to_string(),
                serde_json::to_string_pretty(&maps)?,
            )];
            out.extend(files);
            let refs: Vec<(&str, String)> =
                out.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
            emit(c, &refs)
        }
        Command::Landscape(a) => {
            let (scan, labels) = match c.source.as_str() {
                "sim" => {
                    let device = cfg.device.build()?;
                    let (s, l) = device.render_scan(
                        a.center,
                        (a.span, a.span),
                        cfg.settings.tune.resolution,
                        noise_for(c, &cfg),
                    )?;
                    (s, Some(l))
                }
                other => load_scan(scan_path(other)?)?,
            };
            let classifier = build_classifier(c)?;
            let window = a.window_px.unwrap_or(cfg.landscape_window_px);
            let map = fitness_landscape(
                &scan,
                labels.as_ref(),
                &classifier,
                window,
                &cfg.settings.tune.fitness,
            )?;
            emit(c, &[("landscape.json", map.to_json()?)])
        }
        Command::Report(a) => {
            let doc: Value = serde_json::from_str(&read(&a.input)?)
                .with_context(|| format!("{} is not JSON", a.input.display()))?;
            let reports: Vec<ExperimentReport> =
                serde_json::from_value(doc.get("reports").cloned().context("no `reports` field")?)
                    .context("malformed `reports`")?;
            let table = iteration_stats(&reports)?;
            emit(
                c,
                &[
                    ("summary.txt", summary_text(&reports, &table)),
                    ("success.csv", experiment_csv(&reports)),
                    ("iterations.csv", iteration_csv(&table)),
                ],
            )
        }
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if c.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    Ok(cfg)
}

/// `--seed` picks the sensor noise for simulated measurements.
fn noise_for(c: &Common, cfg: &ExperimentConfig) -> qdtune_core::Noise {
    match c.seed {
        Some(s) => qdtune_core::Noise::Seeded(s),
        None => cfg.noise(),
    }
}

fn policies(c: &Common, cfg: &ExperimentConfig) -> Result<Vec<SimplexPolicy>> {
    Ok(match &c.policy {
        Some(p) => vec![SimplexPolicy::parse(p)?],
        None => cfg.policies()?,
    })
}

fn scan_path(source: &str) -> Result<&Path> {
    match source.strip_prefix("scan:") {
        Some(p) if !p.is_empty() => Ok(Path::new(p)),
        _ => bail!("unknown source `{source}`; expected `sim` or `scan:<path>`"),
    }
}

fn build_source(c: &Common, cfg: &ExperimentConfig) -> Result<MeasurementSource> {
    Ok(match c.source.as_str() {
        "sim" => MeasurementSource::simulated(cfg.device.build()?, noise_for(c, cfg))?,
        other => {
            let path = scan_path(other)?;
            let (scan, labels) = load_scan(path)?;
            MeasurementSource::premeasured(scan, labels)?
        }
    })
}

fn build_classifier(c: &Common) -> Result<Box<dyn WindowClassifier>> {
    match c.classifier.as_str() {
        "oracle" => Ok(Box::new(OracleClassifier)),
        other => match other.strip_prefix("model:") {
            Some(p) if !p.is_empty() => {
                Ok(Box::new(ClassifierModel::from_json(&read(Path::new(p))?)?))
            }
            _ => bail!("unknown classifier `{other}`; expected `oracle` or `model:<path>`"),
        },
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn create(dir: &PathBuf) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

/// Writes every file into `--out`, or prints the first one to stdout.
fn emit(c: &Common, files: &[(&str, String)]) -> Result<()> {
    match &c.out {
        Some(dir) => {
            create(dir)?;
            for (name, body) in files {
                let path = dir.join(name);
                fs::write(&path, body)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                println!("wrote {}", path.display());
            }
        }
        None => {
            let (_, body) = &files[0];
            let mut stdout = io::stdout().lock();
            let written = stdout
                .write_all(body.as_bytes())
                .and_then(|()| {
                    if body.ends_with('\n') {
                        Ok(())
                    } else {
                        stdout.write_all(b"\n")
                    }
                })
                .and_then(|()| stdout.flush());
            match written {
                // A closed pipe (e.g. `| head`) is not a failure of the command.
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}
