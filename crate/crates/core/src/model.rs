//! Linear classification heads over frozen features.
//!
//! Training is minibatch SGD on softmax cross-entropy with decoupled-from-bias
//! weight decay and a cosine-annealed learning rate. Every call starts from a
//! fresh seeded initialization, so a head is a pure function of the training
//! set, the label table and the [`TrainConfig`].

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{argmax, axpy, dot};
use crate::seed;

const INIT_STD: f64 = 0.01;
const CE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    num_classes: usize,
    dim: usize,
    /// Row-major K×D.
    weights: Vec<f32>,
    biases: Vec<f32>,
}

impl LinearHead {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * dim],
            biases: vec![0.0; num_classes],
        }
    }

    pub fn from_parts(num_classes: usize, dim: usize, weights: Vec<f32>, biases: Vec<f32>) -> Result<Self> {
        if weights.len() != num_classes * dim || biases.len() != num_classes {
            return Err(Error::validation(format!(
                "head shape mismatch: {} weights and {} biases for K={num_classes}, D={dim}",
                weights.len(),
                biases.len()
            )));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::validation("head parameters must be finite"));
        }
        Ok(Self {
            num_classes,
            dim,
            weights,
            biases,
        })
    }

    /// Gaussian weights with std 0.01 and zero biases.
    pub fn init(num_classes: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let weights = (0..num_classes * dim)
            .map(|_| (INIT_STD * rng.sample::<f64, _>(StandardNormal)) as f32)
            .collect();
        Self {
            num_classes,
            dim,
            weights,
            biases: vec![0.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    #[inline]
    pub fn weight_row(&self, class: usize) -> &[f32] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    /// Writes the K logits of `x` into `out`.
    #[inline]
    pub fn logits_into(&self, x: &[f32], out: &mut [f32]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = dot(self.weight_row(c), x) + self.biases[c];
        }
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0; self.num_classes];
        self.logits_into(x, &mut out);
        out
    }

    /// Argmax class of `x`; ties go to the lowest class index.
    pub fn predict(&self, x: &[f32]) -> usize {
        argmax(&self.logits(x))
    }

    /// Softmax probabilities of a single feature vector.
    pub fn proba(&self, x: &[f32]) -> Vec<f64> {
        let logits: Vec<f64> = self.logits(x).into_iter().map(f64::from).collect();
        softmax_f64(&logits)
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }
}

pub(crate) fn softmax_f64(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

#[inline]
fn softmax_in_place(z: &mut [f32]) {
    let max = z.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0f32;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in z.iter_mut() {
        *v *= inv;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    CrossEntropy,
    Brier,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::CrossEntropy => "cross_entropy",
            LossKind::Brier => "brier",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_one" | "zero-one" => Ok(LossKind::ZeroOne),
            "cross_entropy" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "brier" => Ok(LossKind::Brier),
            other => Err(Error::validation(format!(
                "unknown loss `{other}` (expected zero_one, cross_entropy or brier)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    pub minibatch_size: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    /// 200 epochs, batch 64, lr 0.01, weight decay 1e-4.
    fn default() -> Self {
        Self {
            epochs: 200,
            base_lr: 0.01,
            weight_decay: 1e-4,
            minibatch_size: 64,
            init_seed: 0,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if self.minibatch_size == 0 {
            return Err(Error::validation("minibatch_size must be at least 1"));
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::validation("base_lr must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::validation("weight_decay must be nonnegative"));
        }
        Ok(())
    }

    pub fn with_seeds(&self, init_seed: u64, shuffle_seed: u64) -> Self {
        Self {
            init_seed,
            shuffle_seed,
            ..self.clone()
        }
    }
}

/// `base_lr · ½ · (1 + cos(π · epoch / epochs))`
pub fn cosine_lr(epoch: usize, config: &TrainConfig) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::validation(format!(
            "epoch {epoch} outside [0, {})",
            config.epochs
        )));
    }
    Ok(cosine(epoch, config.epochs, config.base_lr))
}

fn cosine(epoch: usize, epochs: usize, base_lr: f64) -> f64 {
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos())
}

/// Trains a fresh head on `indices`, reading targets from the full-length
/// label table `labels`.
pub fn train_head(
    dataset: &Dataset,
    indices: &[usize],
    labels: &[u32],
    config: &TrainConfig,
) -> Result<LinearHead> {
    if indices.is_empty() {
        return Err(Error::validation("cannot train a head on an empty index set"));
    }
    config.validate()?;
    check_labels(dataset, labels)?;
    if let Some(&i) = indices.iter().find(|&&i| i >= dataset.len()) {
        return Err(Error::validation(format!("index {i} out of bounds")));
    }

    let (k, d) = (dataset.num_classes(), dataset.dim());
    let mut head = LinearHead::init(k, d, config.init_seed);
    let mut rng = seed::rng(config.shuffle_seed);
    let mut order = indices.to_vec();
    let mut grad_w = vec![0f32; k * d];
    let mut grad_b = vec![0f32; k];
    let mut p = vec![0f32; k];
    let decay = config.weight_decay as f32;

    for epoch in 0..config.epochs {
        let lr = cosine(epoch, config.epochs, config.base_lr) as f32;
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.minibatch_size) {
            grad_w.fill(0.0);
            grad_b.fill(0.0);
            for &i in chunk {
                let x = dataset.row(i);
                head.logits_into(x, &mut p);
                softmax_in_place(&mut p);
                p[labels[i] as usize] -= 1.0;
                for c in 0..k {
                    let g = p[c];
                    grad_b[c] += g;
                    axpy(g, x, &mut grad_w[c * d..(c + 1) * d]);
                }
            }
            let step = lr / chunk.len() as f32;
            let shrink = 1.0 - lr * decay;
            for (w, g) in head.weights.iter_mut().zip(&grad_w) {
                *w = *w * shrink - step * g;
            }
            for (b, g) in head.biases.iter_mut().zip(&grad_b) {
                *b -= step * g;
            }
        }
    }
    if !head.is_finite() {
        return Err(Error::validation("training diverged to non-finite parameters"));
    }
    Ok(head)
}

fn check_labels(dataset: &Dataset, labels: &[u32]) -> Result<()> {
    if labels.len() != dataset.len() {
        return Err(Error::validation(format!(
            "label table has {} entries for {} instances",
            labels.len(),
            dataset.len()
        )));
    }
    Ok(())
}

/// Row-major |indices|×K probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Probabilities {
    pub num_classes: usize,
    pub values: Vec<f64>,
}

impl Probabilities {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.num_classes..(r + 1) * self.num_classes]
    }

    pub fn rows(&self) -> usize {
        self.values.len() / self.num_classes.max(1)
    }
}

pub fn predict_proba(head: &LinearHead, dataset: &Dataset, indices: &[usize]) -> Probabilities {
    let mut values = Vec::with_capacity(indices.len() * head.num_classes);
    for &i in indices {
        values.extend(head.proba(dataset.row(i)));
    }
    Probabilities {
        num_classes: head.num_classes,
        values,
    }
}

/// Mean loss of `head` on `eval_indices` against `labels`.
pub fn evaluate(
    head: &LinearHead,
    dataset: &Dataset,
    eval_indices: &[usize],
    labels: &[u32],
    loss: LossKind,
) -> Result<f64> {
    if eval_indices.is_empty() {
        return Err(Error::validation("evaluation set is empty"));
    }
    check_labels(dataset, labels)?;
    let mut logits = vec![0f32; head.num_classes];
    let mut total = 0f64;
    for &i in eval_indices {
        let y = labels[i] as usize;
        head.logits_into(dataset.row(i), &mut logits);
        total += match loss {
            LossKind::ZeroOne => (argmax(&logits) != y) as u8 as f64,
            LossKind::CrossEntropy => {
                let z: Vec<f64> = logits.iter().map(|&v| f64::from(v)).collect();
                let p = softmax_f64(&z);
                -p[y].max(CE_FLOOR).ln()
            }
            LossKind::Brier => {
                let z: Vec<f64> = logits.iter().map(|&v| f64::from(v)).collect();
                softmax_f64(&z)
                    .iter()
                    .enumerate()
                    .map(|(c, &pc)| {
                        let t = if c == y { 1.0 } else { 0.0 };
                        (pc - t) * (pc - t)
                    })
                    .sum()
            }
        };
    }
    Ok(total / eval_indices.len() as f64)
}

pub fn accuracy(head: &LinearHead, dataset: &Dataset, eval_indices: &[usize], labels: &[u32]) -> Result<f64> {
    Ok(1.0 - evaluate(head, dataset, eval_indices, labels, LossKind::ZeroOne)?)
}

/// Loss and gradient of mean softmax cross-entropy in 64-bit arithmetic.
fn ce_loss_f64(k: usize, d: usize, params: &[f64], dataset: &Dataset, indices: &[usize], labels: &[u32]) -> f64 {
    let (w, b) = params.split_at(k * d);
    let mut total = 0.0;
    for &i in indices {
        let x = dataset.row(i);
        let z: Vec<f64> = (0..k)
            .map(|c| {
                w[c * d..(c + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(a, &v)| a * f64::from(v))
                    .sum::<f64>()
                    + b[c]
            })
            .collect();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - z[labels[i] as usize];
    }
    total / indices.len() as f64
}

/// Analytic gradient `(p − onehot(y)) ⊗ h(x)` averaged over `indices`,
/// weights first then biases.
pub fn analytic_gradient(head: &LinearHead, dataset: &Dataset, indices: &[usize], labels: &[u32]) -> Vec<f64> {
    let (k, d) = (head.num_classes, head.dim);
    let params: Vec<f64> = head.weights.iter().chain(&head.biases).map(|&v| f64::from(v)).collect();
    let (w, b) = params.split_at(k * d);
    let mut grad = vec![0f64; k * d + k];
    for &i in indices {
        let x = dataset.row(i);
        let z: Vec<f64> = (0..k)
            .map(|c| {
                w[c * d..(c + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(a, &v)| a * f64::from(v))
                    .sum::<f64>()
                    + b[c]
            })
            .collect();
        let mut p = softmax_f64(&z);
        p[labels[i] as usize] -= 1.0;
        for c in 0..k {
            for j in 0..d {
                grad[c * d + j] += p[c] * f64::from(x[j]);
            }
            grad[k * d + c] += p[c];
        }
    }
    let n = indices.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    grad
}

/// Largest relative disagreement between the analytic cross-entropy gradient
/// and central finite differences (step 1e-3) on a 64-bit copy of the head.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-3)`; the floor keeps
/// vanishing components from dominating through round-off.
pub fn grad_check(head: &LinearHead, dataset: &Dataset, indices: &[usize], labels: &[u32]) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::validation("grad_check needs at least one instance"));
    }
    check_labels(dataset, labels)?;
    const STEP: f64 = 1e-3;
    let (k, d) = (head.num_classes, head.dim);
    let analytic = analytic_gradient(head, dataset, indices, labels);
    let mut params: Vec<f64> = head.weights.iter().chain(&head.biases).map(|&v| f64::from(v)).collect();
    let mut worst = 0f64;
    for p in 0..params.len() {
        let orig = params[p];
        params[p] = orig + STEP;
        let up = ce_loss_f64(k, d, &params, dataset, indices, labels);
        params[p] = orig - STEP;
        let down = ce_loss_f64(k, d, &params, dataset, indices, labels);
        params[p] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[p];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
        worst = worst.max(rel);
    }
    Ok(worst)
}
