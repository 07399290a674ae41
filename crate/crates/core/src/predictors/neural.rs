use std::io::Cursor;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::representation::DatasetRepresentation;
use crate::codec::{to_u32, Reader, Writer};
use crate::error::{Error, Result};

pub const NEURAL_MAGIC: &[u8; 4] = b"AENP";
pub const NEURAL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self {
            hidden1: 128,
            hidden2: 64,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 500,
            patience: 50,
        }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden1 == 0 || self.hidden2 == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("neural layer sizes, batch size and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "neural learning rate {} / momentum {} out of range",
                self.learning_rate, self.momentum
            )));
        }
        Ok(())
    }
}

/// Input scaling fitted on the training records: fd is divided by its mean,
/// mean coordinates and covariance entries are standardized.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNormalizer {
    pub fd_scale: f64,
    pub mean_center: Vec<f64>,
    pub mean_scale: Vec<f64>,
    pub cov_center: Vec<f64>,
    pub cov_scale: Vec<f64>,
}

fn center_scale(columns: usize, rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut center = vec![0.0; columns];
    for r in rows {
        for (c, v) in center.iter_mut().zip(r.iter()) {
            *c += v;
        }
    }
    center.iter_mut().for_each(|c| *c /= n);
    let mut scale = vec![0.0; columns];
    for r in rows {
        for ((s, v), c) in scale.iter_mut().zip(r.iter()).zip(&center) {
            *s += (v - c) * (v - c);
        }
    }
    for s in &mut scale {
        *s = (*s / n).sqrt();
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    (center, scale)
}

impl NeuralNormalizer {
    pub fn fit(reps: &[&DatasetRepresentation]) -> Result<Self> {
        let first = reps
            .first()
            .ok_or_else(|| Error::InsufficientData("no records to normalize".into()))?;
        let d = first.dim();
        let mean_fd = reps.iter().map(|r| r.fd).sum::<f64>() / reps.len() as f64;
        let means: Vec<&[f64]> = reps.iter().map(|r| r.mean.as_slice()).collect();
        let covs: Vec<&[f64]> = reps.iter().map(|r| r.cov.as_slice()).collect();
        let (mean_center, mean_scale) = center_scale(d, &means);
        let (cov_center, cov_scale) = center_scale(d * d, &covs);
        Ok(Self {
            fd_scale: if mean_fd > 1e-12 { mean_fd } else { 1.0 },
            mean_center,
            mean_scale,
            cov_center,
            cov_scale,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            fd_scale: 1.0,
            mean_center: vec![0.0; dim],
            mean_scale: vec![1.0; dim],
            cov_center: vec![0.0; dim * dim],
            cov_scale: vec![1.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean_center.len()
    }

    fn apply(&self, rep: &DatasetRepresentation) -> Prepared {
        let mut head = Vec::with_capacity(1 + rep.dim());
        head.push(rep.fd / self.fd_scale);
        for ((v, c), s) in rep.mean.as_slice().iter().zip(&self.mean_center).zip(&self.mean_scale) {
            head.push((v - c) / s);
        }
        let cov = rep
            .cov
            .as_slice()
            .iter()
            .zip(&self.cov_center)
            .zip(&self.cov_scale)
            .map(|((v, c), s)| (v - c) / s)
            .collect();
        Prepared { head, cov }
    }

    fn check(&self) -> Result<()> {
        let d = self.dim();
        let finite = |xs: &[f64]| xs.iter().all(|v| v.is_finite());
        if self.mean_scale.len() != d || self.cov_center.len() != d * d || self.cov_scale.len() != d * d {
            return Err(Error::Shape("normalizer vectors disagree on dimension".into()));
        }
        let scales_ok = self.mean_scale.iter().chain(&self.cov_scale).all(|&s| s > 0.0);
        if !(self.fd_scale > 0.0)
            || !scales_ok
            || !finite(&self.mean_center)
            || !finite(&self.cov_center)
            || !finite(&self.mean_scale)
            || !finite(&self.cov_scale)
        {
            return Err(Error::Validation("normalizer has non-finite or non-positive entries".into()));
        }
        Ok(())
    }
}

/// Normalized `[fd; μ]` plus the standardized covariance, row-major.
struct Prepared {
    head: Vec<f64>,
    cov: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    d: usize,
    h1: usize,
    h2: usize,
}

impl Layout {
    fn input(&self) -> usize {
        1 + 2 * self.d
    }
    // parameter order: c, W1, b1, W2, b2, w3, b3
    fn w1(&self) -> usize {
        self.d
    }
    fn b1(&self) -> usize {
        self.w1() + self.h1 * self.input()
    }
    fn w2(&self) -> usize {
        self.b1() + self.h1
    }
    fn b2(&self) -> usize {
        self.w2() + self.h2 * self.h1
    }
    fn w3(&self) -> usize {
        self.b2() + self.h2
    }
    fn b3(&self) -> usize {
        self.w3() + self.h2
    }
    fn len(&self) -> usize {
        self.b3() + 1
    }
}

struct Activations {
    x: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    y: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Learned covariance reduction `σ = Σ·c` followed by a two-hidden-layer
/// rectifier network on `[fd; μ; σ]` with a logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralPredictor {
    hidden1: usize,
    hidden2: usize,
    normalizer: NeuralNormalizer,
    params: Vec<f64>,
}

impl NeuralPredictor {
    /// Random initialization; `c` starts at `1/√d`, rectifier layers use
    /// He-uniform weights and the output bias starts at `output_bias`.
    pub fn init(normalizer: NeuralNormalizer, config: &NeuralConfig, output_bias: f64, seed: u64) -> Result<Self> {
        config.validate()?;
        normalizer.check()?;
        let l = Layout {
            d: normalizer.dim(),
            h1: config.hidden1,
            h2: config.hidden2,
        };
        if l.d == 0 {
            return Err(Error::Shape("feature dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; l.len()];
        let c0 = 1.0 / (l.d as f64).sqrt();
        params[..l.d].iter_mut().for_each(|c| *c = c0);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(l.w1()..l.b1(), l.input());
        fill(l.w2()..l.b2(), l.h1);
        // output layer: Glorot-uniform keeps the initial logit near the bias
        let bound = (6.0 / (l.h2 + 1) as f64).sqrt() * 0.1;
        for p in &mut params[l.w3()..l.b3()] {
            *p = rng.gen_range(-bound..bound);
        }
        params[l.b3()] = output_bias;
        Ok(Self {
            hidden1: l.h1,
            hidden2: l.h2,
            normalizer,
            params,
        })
    }

    fn layout(&self) -> Layout {
        Layout {
            d: self.normalizer.dim(),
            h1: self.hidden1,
            h2: self.hidden2,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.normalizer.dim()
    }

    /// Width of the concatenated network input, `1 + 2d`.
    pub fn input_dim(&self) -> usize {
        self.layout().input()
    }

    pub fn normalizer(&self) -> &NeuralNormalizer {
        &self.normalizer
    }

    /// Flat parameter vector in the order `c, W1, b1, W2, b2, w3, b3`.
    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        self.params = params;
        Ok(())
    }

    /// The covariance-reduction coefficients `c`.
    pub fn reduction(&self) -> &[f64] {
        &self.params[..self.normalizer.dim()]
    }

    fn check_rep(&self, rep: &DatasetRepresentation) -> Result<()> {
        if rep.dim() != self.feature_dim() {
            return Err(Error::Shape(format!(
                "representation dim {} does not match predictor dim {}",
                rep.dim(),
                self.feature_dim()
            )));
        }
        Ok(())
    }

    fn forward(&self, p: &Prepared) -> Activations {
        let l = self.layout();
        let w = &self.params;
        let c = &w[..l.d];
        let mut x = p.head.clone();
        x.extend(p.cov.chunks_exact(l.d).map(|row| dot(row, c)));
        let affine = |wi: usize, bi: usize, rows: usize, input: &[f64]| -> Vec<f64> {
            let cols = input.len();
            (0..rows)
                .map(|r| dot(&w[wi + r * cols..wi + (r + 1) * cols], input) + w[bi + r])
                .collect::<Vec<f64>>()
        };
        let z1 = affine(l.w1(), l.b1(), l.h1, &x);
        let a1: Vec<f64> = z1.iter().map(|v| v.max(0.0)).collect();
        let z2 = affine(l.w2(), l.b2(), l.h2, &a1);
        let a2: Vec<f64> = z2.iter().map(|v| v.max(0.0)).collect();
        let y = sigmoid(dot(&w[l.w3()..l.b3()], &a2) + w[l.b3()]);
        Activations { x, z1, a1, z2, a2, y }
    }

    /// Accumulate `scale · ∂y/∂θ` into `grad`.
    fn backward(&self, p: &Prepared, act: &Activations, scale: f64, grad: &mut [f64]) {
        let l = self.layout();
        let w = &self.params;
        let dz3 = scale * act.y * (1.0 - act.y);
        for (g, a) in grad[l.w3()..l.b3()].iter_mut().zip(&act.a2) {
            *g += dz3 * a;
        }
        grad[l.b3()] += dz3;
        let dz2: Vec<f64> = (0..l.h2)
            .map(|k| if act.z2[k] > 0.0 { dz3 * w[l.w3() + k] } else { 0.0 })
            .collect();
        let mut da1 = vec![0.0; l.h1];
        for (k, &g) in dz2.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let row = l.w2() + k * l.h1;
            for j in 0..l.h1 {
                grad[row + j] += g * act.a1[j];
                da1[j] += g * w[row + j];
            }
            grad[l.b2() + k] += g;
        }
        let n_in = l.input();
        let mut dx = vec![0.0; n_in];
        for j in 0..l.h1 {
            if act.z1[j] <= 0.0 || da1[j] == 0.0 {
                continue;
            }
            let g = da1[j];
            let row = l.w1() + j * n_in;
            for i in 0..n_in {
                grad[row + i] += g * act.x[i];
                dx[i] += g * w[row + i];
            }
            grad[l.b1() + j] += g;
        }
        let dsigma = &dx[1 + l.d..];
        for (k, &g) in dsigma.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (gc, v) in grad[..l.d].iter_mut().zip(&p.cov[k * l.d..(k + 1) * l.d]) {
                *gc += g * v;
            }
        }
    }

    /// The concatenated `[fd; μ; σ]` input after normalization and reduction.
    pub fn network_input(&self, rep: &DatasetRepresentation) -> Result<Vec<f64>> {
        self.check_rep(rep)?;
        Ok(self.forward(&self.normalizer.apply(rep)).x)
    }

    pub fn predict(&self, rep: &DatasetRepresentation) -> Result<f64> {
        self.check_rep(rep)?;
        let y = self.forward(&self.normalizer.apply(rep)).y;
        if !y.is_finite() {
            return Err(Error::Numerical("non-finite neural prediction".into()));
        }
        Ok(y)
    }

    fn batch_loss_grad(&self, batch: &[(&Prepared, f64)], grad: &mut [f64]) -> f64 {
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for (p, target) in batch {
            let act = self.forward(p);
            let err = act.y - target;
            loss += err * err / n;
            self.backward(p, &act, 2.0 * err / n, grad);
        }
        loss
    }

    /// Mean squared error over `data` and its gradient with respect to
    /// [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, data: &[(DatasetRepresentation, f64)]) -> Result<(f64, Vec<f64>)> {
        if data.is_empty() {
            return Err(Error::InsufficientData("loss over no records".into()));
        }
        let prepared = data
            .iter()
            .map(|(r, a)| self.check_rep(r).map(|_| (self.normalizer.apply(r), *a)))
            .collect::<Result<Vec<_>>>()?;
        let batch: Vec<(&Prepared, f64)> = prepared.iter().map(|(p, a)| (p, *a)).collect();
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.batch_loss_grad(&batch, &mut grad);
        Ok((loss, grad))
    }

    pub fn loss(&self, data: &[(DatasetRepresentation, f64)]) -> Result<f64> {
        let mut total = 0.0;
        for (r, a) in data {
            total += (self.predict(r)? - a).powi(2);
        }
        Ok(total / data.len().max(1) as f64)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let n = &self.normalizer;
        let mut w = Writer::new(Vec::new());
        w.magic(NEURAL_MAGIC)?;
        w.u32(NEURAL_VERSION)?;
        w.u32(to_u32(n.dim(), "feature dim")?)?;
        w.u32(to_u32(self.hidden1, "hidden width")?)?;
        w.u32(to_u32(self.hidden2, "hidden width")?)?;
        w.f64(n.fd_scale)?;
        w.f64s(&n.mean_center)?;
        w.f64s(&n.mean_scale)?;
        w.f64s(&n.cov_center)?;
        w.f64s(&n.cov_scale)?;
        w.u64(self.params.len() as u64)?;
        w.f64s(&self.params)?;
        Ok(w.into_inner())
    }

    fn read_from<R: std::io::Read>(r: &mut Reader<R>) -> Result<Self> {
        r.expect_magic(NEURAL_MAGIC)?;
        r.expect_version(NEURAL_VERSION)?;
        let d = r.u32("feature dim")? as usize;
        let h1 = r.u32("hidden width")? as usize;
        let h2 = r.u32("hidden width")? as usize;
        let l = Layout { d, h1, h2 };
        if d == 0 || h1 == 0 || h2 == 0 || d > 1024 || h1 > 1 << 16 || h2 > 1 << 16 {
            return Err(Error::Format(format!("implausible layer sizes {d}/{h1}/{h2}")));
        }
        let normalizer = NeuralNormalizer {
            fd_scale: r.f64("fd scale")?,
            mean_center: r.f64_vec(d, "mean center")?,
            mean_scale: r.f64_vec(d, "mean scale")?,
            cov_center: r.f64_vec(d * d, "covariance center")?,
            cov_scale: r.f64_vec(d * d, "covariance scale")?,
        };
        let count = r.u64("parameter count")? as usize;
        if count != l.len() {
            return Err(Error::Format(format!(
                "{count} parameters stored, layer sizes imply {}",
                l.len()
            )));
        }
        let params = r.f64_vec(count, "parameters")?;
        normalizer.check()?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("non-finite parameter in checkpoint".into()));
        }
        Ok(Self {
            hidden1: h1,
            hidden2: h2,
            normalizer,
            params,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(Cursor::new(bytes));
        let p = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub fn predict_neural(p: &NeuralPredictor, rep: &DatasetRepresentation) -> Result<f64> {
    p.predict(rep)
}

fn check_split(name: &str, data: &[(DatasetRepresentation, f64)], dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InsufficientData(format!("{name} split is empty")));
    }
    for (r, a) in data {
        if r.dim() != dim {
            return Err(Error::Shape(format!("{name} split mixes feature dims {} and {dim}", r.dim())));
        }
        if !(0.0..=1.0).contains(a) {
            return Err(Error::Validation(format!("{name} accuracy {a} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Minimize mean squared error on `train` with momentum SGD, keeping the
/// parameters with the lowest validation RMSE and stopping once validation
/// has not improved for `config.patience` epochs.
pub fn fit_neural(
    train: &[(DatasetRepresentation, f64)],
    val: &[(DatasetRepresentation, f64)],
    config: &NeuralConfig,
    seed: u64,
) -> Result<NeuralPredictor> {
    config.validate()?;
    let dim = train
        .first()
        .ok_or_else(|| Error::InsufficientData("train split is empty".into()))?
        .0
        .dim();
    check_split("train", train, dim)?;
    check_split("validation", val, dim)?;
    let normalizer = NeuralNormalizer::fit(&train.iter().map(|(r, _)| r).collect::<Vec<_>>())?;
    let mean_acc = train.iter().map(|(_, a)| a).sum::<f64>() / train.len() as f64;
    let m = mean_acc.clamp(0.01, 0.99);
    let mut model = NeuralPredictor::init(normalizer, config, (m / (1.0 - m)).ln(), seed)?;

    let prep = |data: &[(DatasetRepresentation, f64)]| -> Vec<(Prepared, f64)> {
        data.iter().map(|(r, a)| (model.normalizer.apply(r), *a)).collect()
    };
    let train_p = prep(train);
    let val_p = prep(val);
    let val_rmse = |m: &NeuralPredictor| -> f64 {
        let sse: f64 = val_p.iter().map(|(p, a)| (m.forward(p).y - a).powi(2)).sum();
        (sse / val_p.len() as f64).sqrt()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05ee_df17);
    let mut velocity = vec![0.0; model.params.len()];
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train_p.len()).collect();
    let mut best = (val_rmse(&model), model.params.clone(), 0usize);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Prepared, f64)> = chunk.iter().map(|&i| (&train_p[i].0, train_p[i].1)).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = model.batch_loss_grad(&batch, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingFailure(format!("non-finite loss at epoch {epoch}")));
            }
            epoch_loss += loss * batch.len() as f64;
            for ((p, v), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = config.momentum * *v + g;
                *p -= config.learning_rate * *v;
            }
        }
        let rmse = val_rmse(&model);
        if !rmse.is_finite() {
            return Err(Error::TrainingFailure(format!("non-finite validation error at epoch {epoch}")));
        }
        if rmse < best.0 {
            best = (rmse, model.params.clone(), epoch);
        }
        log::trace!(
            "epoch {epoch}: train mse {:.3e}, val rmse {rmse:.4}",
            epoch_loss / train_p.len() as f64
        );
        if epoch - best.2 >= config.patience {
            break;
        }
    }
    log::debug!("neural fit: best val rmse {:.4} at epoch {}", best.0, best.2);
    model.params = best.1;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};

    fn random_rep(rng: &mut ChaCha8Rng, d: usize) -> DatasetRepresentation {
        let mean = Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let a: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = Matrix::new(d, d, a).unwrap();
        let mut cov = a.matmul(&a.transpose()).unwrap();
        cov.symmetrize();
        DatasetRepresentation::new(rng.gen_range(0.0..50.0), mean, cov).unwrap()
    }

    fn small_config() -> NeuralConfig {
        NeuralConfig {
            hidden1: 12,
            hidden2: 8,
            ..NeuralConfig::default()
        }
    }

    #[test]
    fn input_width_is_one_plus_two_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = random_rep(&mut rng, 5);
        let p = NeuralPredictor::init(NeuralNormalizer::identity(5), &small_config(), 0.0, 1).unwrap();
        assert_eq!(p.network_input(&rep).unwrap().len(), 11);
        assert_eq!(p.input_dim(), 11);
        assert!(matches!(p.predict(&random_rep(&mut rng, 4)), Err(Error::Shape(_))));
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = NeuralPredictor::init(NeuralNormalizer::identity(4), &small_config(), 3.0, 2).unwrap();
        for _ in 0..1000 {
            let mut rep = random_rep(&mut rng, 4);
            rep.fd *= rng.gen_range(0.0..1e4);
            let y = p.predict(&rep).unwrap();
            assert!((0.0..=1.0).contains(&y));
            assert_eq!(y, p.predict(&rep).unwrap());
        }
    }

    #[test]
    fn memorizes_one_record() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = vec![(random_rep(&mut rng, 4), 0.37)];
        let cfg = NeuralConfig {
            learning_rate: 0.05,
            max_epochs: 400,
            patience: 400,
            ..small_config()
        };
        let p = fit_neural(&data, &data, &cfg, 3).unwrap();
        assert!(p.loss(&data).unwrap() < 1e-4);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<_> = (0..10).map(|i| (random_rep(&mut rng, 3), i as f64 / 10.0)).collect();
        let cfg = NeuralConfig {
            max_epochs: 20,
            ..small_config()
        };
        let a = fit_neural(&data[..7], &data[7..], &cfg, 9).unwrap();
        let b = fit_neural(&data[..7], &data[7..], &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<_> = (0..5)
            .map(|_| (random_rep(&mut rng, 3), rng.gen_range(0.0..1.0)))
            .collect();
        let reps: Vec<_> = data.iter().map(|(r, _)| r).collect();
        let norm = NeuralNormalizer::fit(&reps).unwrap();
        let p = NeuralPredictor::init(norm, &small_config(), 0.2, 5).unwrap();
        let (_, grad) = p.loss_and_gradient(&data).unwrap();
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut q = p.clone();
            let mut theta = p.parameters().to_vec();
            theta[i] += h;
            q.set_parameters(theta.clone()).unwrap();
            let up = q.loss(&data).unwrap();
            theta[i] -= 2.0 * h;
            q.set_parameters(theta).unwrap();
            let down = q.loss(&data).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {i}: analytic {} numeric {numeric}", grad[i]);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data: Vec<_> = (0..4).map(|i| (random_rep(&mut rng, 3), 0.2 * i as f64)).collect();
        let cfg = NeuralConfig {
            max_epochs: 5,
            ..small_config()
        };
        let p = fit_neural(&data, &data, &cfg, 1).unwrap();
        let bytes = p.to_bytes().unwrap();
        assert_eq!(NeuralPredictor::from_bytes(&bytes).unwrap(), p);
        assert!(matches!(NeuralPredictor::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(NeuralPredictor::from_bytes(&bad), Err(Error::Format(_))));
    }
}
