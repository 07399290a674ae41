use std::fs;
use std::io::Cursor;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bundle::{label_accuracy, FeatureBundle};
use super::raster::{LabeledImageSet, Raster, Shape};
use crate::codec::{hex_digest, to_u32, Reader, Writer};
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &[u8; 4] = b"AECK";
const CHECKPOINT_VERSION: u32 = 1;

/// Hyperparameters for [`train_classifier`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Width of both hidden layers; the second one is the feature layer.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 20,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    inputs: usize,
    outputs: usize,
    /// `outputs × inputs`, row-major.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / inputs as f32).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f32], out: &mut [f32], relu: bool) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let v = dot(row, x) + self.bias[o];
            *slot = if relu { v.max(0.0) } else { v };
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Eight-lane dot product. The lane split is fixed, so results do not depend
/// on where the call happens.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// flatten → dense(h, ReLU) → dense(h, ReLU) → dense(K) → softmax.
///
/// The second hidden layer's post-ReLU activations are the exported features.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyClassifier {
    input: Shape,
    classes: usize,
    hidden1: Dense,
    hidden2: Dense,
    output: Dense,
}

struct Activations {
    h1: Vec<f32>,
    h2: Vec<f32>,
    logits: Vec<f32>,
}

impl TinyClassifier {
    fn new(input: Shape, classes: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            input,
            classes,
            hidden1: Dense::init(input.len(), hidden, rng),
            hidden2: Dense::init(hidden, hidden, rng),
            output: Dense::init(hidden, classes, rng),
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden2.outputs
    }

    pub fn param_count(&self) -> usize {
        self.hidden1.param_count() + self.hidden2.param_count() + self.output.param_count()
    }

    fn activations(&self, x: &[f32]) -> Activations {
        let mut h1 = vec![0.0; self.hidden1.outputs];
        let mut h2 = vec![0.0; self.hidden2.outputs];
        let mut logits = vec![0.0; self.classes];
        self.hidden1.forward(x, &mut h1, true);
        self.hidden2.forward(&h1, &mut h2, true);
        self.output.forward(&h2, &mut logits, false);
        Activations { h1, h2, logits }
    }

    fn check_shape(&self, image: &Raster) -> Result<()> {
        if image.shape() != self.input {
            return Err(Error::Shape(format!(
                "image shape {:?} does not match classifier input {:?}",
                image.shape(),
                self.input
            )));
        }
        Ok(())
    }

    /// Penultimate features and softmax scores for one image.
    pub fn infer(&self, image: &Raster) -> Result<(Vec<f32>, Vec<f32>)> {
        self.check_shape(image)?;
        let act = self.activations(image.data());
        Ok((act.h2, softmax(&act.logits)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Writer::new(Vec::new());
        w.magic(CHECKPOINT_MAGIC)?;
        w.u32(CHECKPOINT_VERSION)?;
        w.u32(to_u32(self.input.height, "height")?)?;
        w.u32(to_u32(self.input.width, "width")?)?;
        w.u32(to_u32(self.input.channels, "channels")?)?;
        w.u32(to_u32(self.classes, "classes")?)?;
        let layers = [&self.hidden1, &self.hidden2, &self.output];
        w.u32(layers.len() as u32)?;
        for l in layers {
            w.u32(to_u32(l.inputs, "layer inputs")?)?;
            w.u32(to_u32(l.outputs, "layer outputs")?)?;
        }
        for l in layers {
            w.f32s(&l.weights)?;
            w.f32s(&l.bias)?;
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(Cursor::new(bytes));
        r.expect_magic(CHECKPOINT_MAGIC)?;
        r.expect_version(CHECKPOINT_VERSION)?;
        let input = Shape {
            height: r.u32("height")? as usize,
            width: r.u32("width")? as usize,
            channels: r.u32("channels")? as usize,
        };
        let classes = r.u32("classes")? as usize;
        let count = r.u32("layer count")?;
        if count != 3 {
            return Err(Error::Format(format!("expected 3 layers, found {count}")));
        }
        let mut shapes = Vec::new();
        for _ in 0..3 {
            shapes.push((r.u32("layer inputs")? as usize, r.u32("layer outputs")? as usize));
        }
        let chain_ok = shapes[0].0 == input.len()
            && shapes[1].0 == shapes[0].1
            && shapes[2].0 == shapes[1].1
            && shapes[2].1 == classes;
        if !chain_ok || classes < 2 {
            return Err(Error::Format(format!("inconsistent layer shapes {shapes:?}")));
        }
        let mut layers = Vec::new();
        for &(inputs, outputs) in &shapes {
            let weights = r.f32_vec(inputs * outputs, "weights")?;
            let bias = r.f32_vec(outputs, "bias")?;
            if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
                return Err(Error::Validation("checkpoint has non-finite parameters".into()));
            }
            layers.push(Dense {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        r.finish()?;
        let output = layers.pop().unwrap();
        let hidden2 = layers.pop().unwrap();
        let hidden1 = layers.pop().unwrap();
        Ok(Self {
            input,
            classes,
            hidden1,
            hidden2,
            output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// SHA-256 of the checkpoint bytes.
    pub fn checkpoint_hash(&self) -> Result<String> {
        Ok(hex_digest(&self.to_bytes()?))
    }
}

/// Softmax computed in `f64` and rounded to `f32`.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let exps: Vec<f64> = logits.iter().map(|&v| (v as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| (e / total) as f32).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

struct Grads {
    layers: [(Vec<f32>, Vec<f32>); 3],
}

impl Grads {
    fn zeros(clf: &TinyClassifier) -> Self {
        let z = |l: &Dense| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]);
        Self {
            layers: [z(&clf.hidden1), z(&clf.hidden2), z(&clf.output)],
        }
    }

    fn clear(&mut self) {
        for (w, b) in self.layers.iter_mut() {
            w.fill(0.0);
            b.fill(0.0);
        }
    }
}

/// Accumulate `delta ⊗ input` into a layer gradient and return `Wᵀ delta`
/// when `want_input` is set.
fn accumulate(layer: &Dense, grad: &mut (Vec<f32>, Vec<f32>), delta: &[f32], input: &[f32], want_input: bool) -> Vec<f32> {
    let mut back = if want_input { vec![0.0; layer.inputs] } else { Vec::new() };
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad.1[o] += d;
        let gw = &mut grad.0[o * layer.inputs..(o + 1) * layer.inputs];
        for (g, &x) in gw.iter_mut().zip(input) {
            *g += d * x;
        }
        if want_input {
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (b, &w) in back.iter_mut().zip(row) {
                *b += d * w;
            }
        }
    }
    back
}

fn momentum_step(params: &mut [f32], velocity: &mut [f32], grad: &[f32], lr: f32, momentum: f32, scale: f32) {
    for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = momentum * *v + g * scale;
        *p -= lr * *v;
    }
}

/// Train the classifier with mini-batch momentum SGD on cross-entropy.
///
/// Deterministic for a given `seed`: initialization and shuffling draw from
/// one ChaCha stream, and gradients accumulate in a fixed order.
pub fn train_classifier(train: &LabeledImageSet, config: &TrainConfig, seed: u64) -> Result<TinyClassifier> {
    let shape = train
        .shape()
        .ok_or_else(|| Error::InsufficientData("training set is empty".into()))?;
    let k = train.classes();
    let mut seen = vec![false; k];
    for &l in train.labels() {
        seen[l as usize] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::DegenerateLabels(
            "training labels cover fewer than 2 classes".into(),
        ));
    }
    if config.hidden == 0 || config.batch_size == 0 {
        return Err(Error::Config("hidden width and batch size must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clf = TinyClassifier::new(shape, k, config.hidden, &mut rng);
    let mut grads = Grads::zeros(&clf);
    let mut velocity = Grads::zeros(&clf);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                let x = train.images()[i].data();
                let y = train.labels()[i] as usize;
                let act = clf.activations(x);
                let probs = softmax(&act.logits);
                epoch_loss -= (probs[y].max(f32::MIN_POSITIVE) as f64).ln();

                let mut delta = probs;
                delta[y] -= 1.0;
                let mut d2 = accumulate(&clf.output, &mut grads.layers[2], &delta, &act.h2, true);
                for (d, &h) in d2.iter_mut().zip(&act.h2) {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                }
                let mut d1 = accumulate(&clf.hidden2, &mut grads.layers[1], &d2, &act.h1, true);
                for (d, &h) in d1.iter_mut().zip(&act.h1) {
                    if h <= 0.0 {
                        *d = 0.0;
                    }
                }
                accumulate(&clf.hidden1, &mut grads.layers[0], &d1, x, false);
            }
            let scale = 1.0 / batch.len() as f32;
            let layers = [&mut clf.hidden1, &mut clf.hidden2, &mut clf.output];
            for ((layer, g), v) in layers
                .into_iter()
                .zip(grads.layers.iter())
                .zip(velocity.layers.iter_mut())
            {
                momentum_step(&mut layer.weights, &mut v.0, &g.0, config.learning_rate, config.momentum, scale);
                momentum_step(&mut layer.bias, &mut v.1, &g.1, config.learning_rate, config.momentum, scale);
            }
        }
        epoch_loss /= train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::TrainingFailure(format!(
                "loss became non-finite in epoch {epoch}"
            )));
        }
        log::debug!("classifier epoch {epoch}: loss {epoch_loss:.4}");
    }

    let acc = accuracy(&clf, train)?;
    if acc <= 1.0 / k as f64 {
        return Err(Error::TrainingFailure(format!(
            "training accuracy {acc:.3} does not exceed chance"
        )));
    }
    Ok(clf)
}

/// Features and softmax scores for every image. Each image is processed on
/// its own, so rows do not depend on batch composition.
pub fn extract_features(clf: &TinyClassifier, images: &[Raster], source_id: &str) -> Result<FeatureBundle> {
    for im in images {
        clf.check_shape(im)?;
    }
    let rows: Vec<(Vec<f32>, Vec<f32>)> = images
        .par_iter()
        .map(|im| {
            let act = clf.activations(im.data());
            (act.h2, softmax(&act.logits))
        })
        .collect();
    let mut features = Vec::with_capacity(rows.len() * clf.feature_dim());
    let mut scores = Vec::with_capacity(rows.len() * clf.classes);
    for (f, s) in rows {
        features.extend_from_slice(&f);
        scores.extend_from_slice(&s);
    }
    FeatureBundle::new(features, scores, clf.feature_dim(), clf.classes, None, source_id)
}

/// Fraction of images whose argmax class equals the label.
pub fn accuracy(clf: &TinyClassifier, data: &LabeledImageSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InsufficientData("accuracy of an empty set".into()));
    }
    for im in data.images() {
        clf.check_shape(im)?;
    }
    let scores: Vec<f32> = data
        .images()
        .par_iter()
        .flat_map_iter(|im| softmax(&clf.activations(im.data()).logits))
        .collect();
    label_accuracy(&scores, clf.classes, data.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f32> = (0..21).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..21).map(|i| 1.0 - i as f32 * 0.1).collect();
        let naive: f32 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-4);
    }

    #[test]
    fn softmax_normalizes() {
        let s = softmax(&[1000.0, 0.0, -5.0]);
        assert!((s.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn single_class_is_rejected() {
        let set = LabeledImageSet::new(vec![Raster::zeros(2, 2, 1); 4], vec![1; 4], 3).unwrap();
        assert!(matches!(
            train_classifier(&set, &TrainConfig::default(), 0),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_and_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = Shape {
            height: 4,
            width: 4,
            channels: 3,
        };
        let clf = TinyClassifier::new(shape, 3, 8, &mut rng);
        let bytes = clf.to_bytes().unwrap();
        assert_eq!(TinyClassifier::from_bytes(&bytes).unwrap(), clf);
        assert!(matches!(
            TinyClassifier::from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
    }
}
