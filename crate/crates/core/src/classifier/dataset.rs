//! Labelled training windows drawn from randomly sampled devices.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::probability::{oracle_probability, ProbabilityVector};
use crate::codec;
use crate::device::{mix, sample_device, Noise, VariationConfig, DOMAIN_MAX_MV, DOMAIN_MIN_MV};
use crate::error::{Error, Result};
use crate::preprocess::{process, ProcessedImage, IMAGE_PIXELS};
use crate::scan_io::{check_version, field, Sandbox};

pub const DATASET_SCHEMA_VERSION: &str = "qdtune.dataset/1";

/// Redraws allowed per window before giving up.
pub const MAX_WINDOW_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: ProcessedImage,
    pub target: ProbabilityVector,
    pub center: (f64, f64),
    pub span: (f64, f64),
    /// Seed passed to [`sample_device`] for the source device.
    pub device_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_devices: usize,
    pub samples_per_device: usize,
    /// Square window side in mV.
    pub window_span: f64,
    /// Pixel size in mV; the window is always 30 pixels wide at the default.
    pub resolution: f64,
    pub seed: u64,
    /// Add each device's sensor noise to the rendered windows.
    pub noisy: bool,
    pub variation: VariationConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_devices: 1001,
            samples_per_device: 10,
            window_span: 60.0,
            resolution: 2.0,
            seed: 0,
            noisy: true,
            variation: VariationConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 || self.samples_per_device == 0 {
            return Err(Error::Config(
                "n_devices and samples_per_device must be at least 1".into(),
            ));
        }
        let span = DOMAIN_MAX_MV - DOMAIN_MIN_MV;
        if !(self.window_span > 0.0 && self.window_span <= span) || !(self.resolution > 0.0) {
            return Err(Error::Config(format!(
                "window span must be in (0, {span}] and resolution positive"
            )));
        }
        self.variation.validate()
    }

    /// Seed of the `index`-th device.
    pub fn device_seed(&self, index: usize) -> u64 {
        mix(self.seed, index as u64)
    }
}

/// Draws `samples_per_device` windows from each of `n_devices` devices.
/// Devices are processed in parallel; the output order and content depend
/// only on the config.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Vec<LabeledSample>> {
    config.validate()?;
    let per_device: Vec<Vec<LabeledSample>> = (0..config.n_devices)
        .into_par_iter()
        .map(|d| device_samples(config, config.device_seed(d)))
        .collect::<Result<_>>()?;
    Ok(per_device.into_iter().flatten().collect())
}

fn device_samples(config: &DatasetConfig, device_seed: u64) -> Result<Vec<LabeledSample>> {
    let params = sample_device(device_seed, &config.variation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(device_seed, 0xda7a));
    let span = (config.window_span, config.window_span);
    let domain = Sandbox::default();
    let mut out = Vec::with_capacity(config.samples_per_device);
    for k in 0..config.samples_per_device {
        let center = draw_center(&mut rng, &domain, span)?;
        let noise = if config.noisy {
            Noise::Seeded(mix(device_seed, k as u64))
        } else {
            Noise::Off
        };
        let (scan, labels) = params.render_scan(center, span, config.resolution, noise)?;
        out.push(LabeledSample {
            image: process(&scan)?,
            target: oracle_probability(&labels)?,
            center,
            span,
            device_seed,
        });
    }
    Ok(out)
}

fn draw_center(rng: &mut ChaCha8Rng, domain: &Sandbox, span: (f64, f64)) -> Result<(f64, f64)> {
    for _ in 0..MAX_WINDOW_DRAWS {
        let c = (
            rng.random_range(DOMAIN_MIN_MV..=DOMAIN_MAX_MV),
            rng.random_range(DOMAIN_MIN_MV..=DOMAIN_MAX_MV),
        );
        if domain.admits(c, span) {
            return Ok(c);
        }
    }
    Err(Error::WindowRetries {
        attempts: MAX_WINDOW_DRAWS,
    })
}

/// Deterministic shuffle followed by a split into `(train, test)`, with
/// `train_fraction` of the samples (rounded down) in the first part.
pub fn split_dataset(
    samples: &[LabeledSample],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} is outside [0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (samples.len() as f64 * train_fraction).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&order[..cut]), pick(&order[cut..])))
}

pub fn dataset_to_json(samples: &[LabeledSample]) -> Result<String> {
    let images = codec::encode_f64(
        samples
            .iter()
            .flat_map(|s| s.image.as_slice().iter().copied()),
    );
    let targets = codec::encode_f64(samples.iter().flat_map(|s| s.target.to_array()));
    let windows = codec::encode_f64(
        samples
            .iter()
            .flat_map(|s| [s.center.0, s.center.1, s.span.0, s.span.1]),
    );
    let seeds: Vec<u64> = samples.iter().map(|s| s.device_seed).collect();
    let doc = json!({
        "schema_version": DATASET_SCHEMA_VERSION,
        "count": samples.len(),
        "image_shape": [30, 30],
        "images": images,
        "targets": targets,
        "target_order": ["p_none", "p_sd", "p_dd"],
        "windows": windows,
        "window_order": ["center_v1", "center_v2", "span_v1", "span_v2"],
        "device_seeds": seeds,
    });
    Ok(serde_json::to_string(&doc)?)
}

pub fn dataset_from_json(text: &str) -> Result<Vec<LabeledSample>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
    check_version(&doc, DATASET_SCHEMA_VERSION)?;
    let count = field(&doc, "count")?
        .as_u64()
        .ok_or_else(|| Error::parse("count", "expected a non-negative integer"))?
        as usize;
    let blob = |name: &str| -> Result<&str> {
        field(&doc, name)?
            .as_str()
            .ok_or_else(|| Error::parse(name, "expected a base64 string"))
    };
    let images = codec::decode_f64("images", blob("images")?, count * IMAGE_PIXELS)?;
    let targets = codec::decode_f64("targets", blob("targets")?, count * 3)?;
    let windows = codec::decode_f64("windows", blob("windows")?, count * 4)?;
    let seeds: Vec<u64> = serde_json::from_value(field(&doc, "device_seeds")?.clone())
        .map_err(|e| Error::parse("device_seeds", e.to_string()))?;
    if seeds.len() != count {
        return Err(Error::parse("device_seeds", "length does not match count"));
    }
    (0..count)
        .map(|i| {
            let image =
                ProcessedImage::from_slice(&images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS])
                    .map_err(|e| Error::parse("images", e.to_string()))?;
            let t = &targets[i * 3..i * 3 + 3];
            let target = ProbabilityVector::new(t[0], t[1], t[2])
                .map_err(|e| Error::parse("targets", e.to_string()))?;
            let w = &windows[i * 4..i * 4 + 4];
            Ok(LabeledSample {
                image,
                target,
                center: (w[0], w[1]),
                span: (w[2], w[3]),
                device_seed: seeds[i],
            })
        })
        .collect()
}

pub fn save_dataset(path: impl AsRef<Path>, samples: &[LabeledSample]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset_to_json(samples)?).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_json(&text)
}
