//! Fully connected state classifier: rectifier hidden layers, softmax output,
//! trained with mini-batch Adam on soft cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::dataset::LabeledSample;
use super::probability::ProbabilityVector;
use crate::codec;
use crate::error::{Error, Result};
use crate::preprocess::{ProcessedImage, IMAGE_PIXELS};
use crate::scan_io::{check_version, field};

pub const MODEL_SCHEMA_VERSION: &str = "qdtune.model/1";

/// Input, hidden and output widths of the default network.
pub const DEFAULT_LAYER_SIZES: [usize; 4] = [IMAGE_PIXELS, 128, 64, 3];

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Array2::zeros(self.weights.dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    layers: Vec<DenseLayer>,
}

/// Per-layer gradients, laid out like the model's layers.
pub type Gradients = Vec<DenseLayer>;

impl ClassifierModel {
    /// Random model with `sizes[0]` inputs and `sizes.last()` outputs.
    /// Weights are uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != 3 {
            return Err(Error::Config("the output layer must have 3 units".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / fan_in as f64).sqrt();
                DenseLayer {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| {
                        rng.random_range(-limit..limit)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].weights.ncols()];
        sizes.extend(self.layers.iter().map(|l| l.weights.nrows()));
        sizes
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    /// Pre-activations and activations of every layer; `acts[0]` is the input.
    fn forward(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
        let mut acts = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = acts[i].dot(&layer.weights.t()) + &layer.bias;
            let a = if i + 1 == self.layers.len() {
                softmax_rows(&z)
            } else {
                z.mapv(|v| v.max(0.0))
            };
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    /// Row-wise class probabilities.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).1.pop().expect("at least one layer")
    }

    pub fn classify(&self, image: &ProcessedImage) -> ProbabilityVector {
        let x = ArrayView2::from_shape((1, IMAGE_PIXELS), image.as_slice()).expect("900 pixels");
        let p = self.predict_batch(x);
        ProbabilityVector {
            p_none: p[[0, 0]],
            p_sd: p[[0, 1]],
            p_dd: p[[0, 2]],
        }
    }

    /// Mean soft cross-entropy over the batch.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>) -> f64 {
        let (pre, _) = self.forward(x);
        cross_entropy(pre.last().unwrap(), targets)
    }

    /// Loss and its analytic gradient by backpropagation.
    pub fn loss_and_gradient(
        &self,
        x: ArrayView2<f64>,
        targets: ArrayView2<f64>,
    ) -> (f64, Gradients) {
        let (pre, acts) = self.forward(x);
        let batch = x.nrows() as f64;
        let loss = cross_entropy(pre.last().unwrap(), targets);

        let mut grads: Gradients = self.layers.iter().map(DenseLayer::zeros_like).collect();
        // d loss / d logits = (softmax - target) / batch
        let mut delta = (acts.last().unwrap() - &targets) / batch;
        for i in (0..self.layers.len()).rev() {
            grads[i].weights = delta.t().dot(&acts[i]);
            grads[i].bias = delta.sum_axis(NdAxis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights);
                Zip::from(&mut back).and(&pre[i - 1]).for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        (loss, grads)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Flat parameter index: per layer, weights row-major then bias.
    fn locate(&self, mut index: usize) -> (usize, Option<(usize, usize)>, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                let cols = layer.weights.ncols();
                return (l, Some((index / cols, index % cols)), 0);
            }
            index -= layer.weights.len();
            if index < layer.bias.len() {
                return (l, None, index);
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, Some(rc), _) => self.layers[l].weights[rc],
            (l, None, b) => self.layers[l].bias[b],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, Some(rc), _) => self.layers[l].weights[rc] = value,
            (l, None, b) => self.layers[l].bias[b] = value,
        }
    }

    /// Gradient entry at a flat parameter index.
    pub fn gradient_entry(&self, grads: &Gradients, index: usize) -> f64 {
        match self.locate(index) {
            (l, Some(rc), _) => grads[l].weights[rc],
            (l, None, b) => grads[l].bias[b],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                json!({
                    "weights": codec::encode_f64(l.weights.iter().copied()),
                    "bias": codec::encode_f64(l.bias.iter().copied()),
                })
            })
            .collect();
        let doc = json!({
            "schema_version": MODEL_SCHEMA_VERSION,
            "layer_sizes": self.layer_sizes(),
            "activation": "relu",
            "output": "softmax",
            "layers": layers,
        });
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
        check_version(&doc, MODEL_SCHEMA_VERSION)?;
        let sizes: Vec<usize> = serde_json::from_value(field(&doc, "layer_sizes")?.clone())
            .map_err(|e| Error::parse("layer_sizes", e.to_string()))?;
        if sizes.len() < 2 || sizes.last() != Some(&3) {
            return Err(Error::parse(
                "layer_sizes",
                "expected at least two sizes ending in 3",
            ));
        }
        let raw = field(&doc, "layers")?
            .as_array()
            .ok_or_else(|| Error::parse("layers", "expected an array"))?;
        if raw.len() != sizes.len() - 1 {
            return Err(Error::parse(
                "layers",
                "layer count does not match layer_sizes",
            ));
        }
        let mut layers = Vec::with_capacity(raw.len());
        for (i, (l, w)) in raw.iter().zip(sizes.windows(2)).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let blob = |name: &str| -> Result<&str> {
                l.get(name)
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::parse(format!("layers[{i}].{name}"), "missing"))
            };
            let weights = codec::decode_f64(
                &format!("layers[{i}].weights"),
                blob("weights")?,
                fan_in * fan_out,
            )?;
            let bias = codec::decode_f64(&format!("layers[{i}].bias"), blob("bias")?, fan_out)?;
            layers.push(DenseLayer {
                weights: Array2::from_shape_vec((fan_out, fan_in), weights).expect("checked"),
                bias: Array1::from(bias),
            });
        }
        Ok(Self { layers })
    }
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn cross_entropy(logits: &Array2<f64>, targets: ArrayView2<f64>) -> f64 {
    let mut total = 0.0;
    for (z, t) in logits.rows().into_iter().zip(targets.rows()) {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total -= z
            .iter()
            .zip(t.iter())
            .map(|(zi, ti)| ti * (zi - log_sum))
            .sum::<f64>();
    }
    total / logits.nrows() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_layers: Vec<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            steps: 5000,
            batch_size: 50,
            seed: 0,
            hidden_layers: DEFAULT_LAYER_SIZES[1..3].to_vec(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "learning rate, steps and batch size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(Error::Config("invalid Adam moment parameters".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![IMAGE_PIXELS];
        s.extend(&self.hidden_layers);
        s.push(3);
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: ClassifierModel,
    /// Mini-batch loss before each update.
    pub loss_trace: Vec<f64>,
}

struct Moments {
    m: Gradients,
    v: Gradients,
}

/// Stacks samples into an `n x 900` image matrix and an `n x 3` target matrix.
pub fn design_matrices(samples: &[LabeledSample]) -> (Array2<f64>, Array2<f64>) {
    let n = samples.len();
    let mut x = Array2::zeros((n, IMAGE_PIXELS));
    let mut t = Array2::zeros((n, 3));
    for (i, s) in samples.iter().enumerate() {
        x.row_mut(i)
            .assign(&ndarray::ArrayView1::from(s.image.as_slice()));
        t.row_mut(i)
            .assign(&Array1::from(s.target.to_array().to_vec()));
    }
    (x, t)
}

/// Mini-batch Adam over shuffled epochs. Deterministic for a given
/// dataset and config.
pub fn train(samples: &[LabeledSample], config: &TrainingConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    if samples.len() < config.batch_size {
        return Err(Error::Config(format!(
            "dataset has {} samples, fewer than one batch of {}",
            samples.len(),
            config.batch_size
        )));
    }
    let (x, t) = design_matrices(samples);
    let mut model = ClassifierModel::new(&config.layer_sizes(), config.seed)?;
    let mut moments = Moments {
        m: model.layers.iter().map(DenseLayer::zeros_like).collect(),
        v: model.layers.iter().map(DenseLayer::zeros_like).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut loss_trace = Vec::with_capacity(config.steps);

    for step in 0..config.steps {
        if cursor + config.batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let idx = &order[cursor..cursor + config.batch_size];
        cursor += config.batch_size;
        let xb = x.select(NdAxis(0), idx);
        let tb = t.select(NdAxis(0), idx);

        let (loss, grads) = model.loss_and_gradient(xb.view(), tb.view());
        if !loss.is_finite() {
            return Err(Error::Divergence { step });
        }
        loss_trace.push(loss);
        adam_update(&mut model, &grads, &mut moments, config, step + 1);
    }
    Ok(TrainingOutcome { model, loss_trace })
}

fn adam_update(
    model: &mut ClassifierModel,
    grads: &Gradients,
    moments: &mut Moments,
    config: &TrainingConfig,
    t: usize,
) {
    let (b1, b2) = (config.beta1, config.beta2);
    let correction1 = 1.0 - b1.powi(t as i32);
    let correction2 = 1.0 - b2.powi(t as i32);
    let step = config.learning_rate;
    let eps = config.epsilon;
    let update = |p: &mut f64, g: &f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= step * m_hat / (v_hat.sqrt() + eps);
    };
    for (l, layer) in model.layers.iter_mut().enumerate() {
        Zip::from(&mut layer.weights)
            .and(&grads[l].weights)
            .and(&mut moments.m[l].weights)
            .and(&mut moments.v[l].weights)
            .for_each(update);
        Zip::from(&mut layer.bias)
            .and(&grads[l].bias)
            .and(&mut moments.m[l].bias)
            .and(&mut moments.v[l].bias)
            .for_each(update);
    }
}

/// Argmax accuracy and confusion matrix (`[true][predicted]`, classes in
/// none/single/double order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub confusion: [[u64; 3]; 3],
    pub samples: usize,
}

pub fn evaluate_predictions<F>(
    samples: &[LabeledSample],
    mut predict: F,
) -> Result<EvaluationReport>
where
    F: FnMut(&LabeledSample) -> ProbabilityVector,
{
    if samples.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut confusion = [[0u64; 3]; 3];
    for s in samples {
        let truth = s.target.argmax().index();
        let guess = predict(s).argmax().index();
        confusion[truth][guess] += 1;
    }
    let correct: u64 = (0..3).map(|i| confusion[i][i]).sum();
    Ok(EvaluationReport {
        accuracy: correct as f64 / samples.len() as f64,
        confusion,
        samples: samples.len(),
    })
}

pub fn evaluate(model: &ClassifierModel, samples: &[LabeledSample]) -> Result<EvaluationReport> {
    evaluate_predictions(samples, |s| model.classify(&s.image))
}
