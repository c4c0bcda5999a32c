//! Datasets, the ALFX feature-file format, synthetic data and pool bookkeeping.
//!
//! ALFX layout (all integers little-endian, no padding):
//!
//! | field      | type              |
//! |------------|-------------------|
//! | magic      | `b"ALFX"`         |
//! | version    | `u32` (= 1)       |
//! | N          | `u64`             |
//! | D          | `u32`             |
//! | K          | `u32`             |
//! | name       | `u16` len + UTF-8 |
//! | labels     | `N × i32`         |
//! | features   | `N × D × f32`     |

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const ALFX_MAGIC: &[u8; 4] = b"ALFX";
pub const ALFX_VERSION: u32 = 1;

/// An N×D matrix of frozen features with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    num_classes: usize,
    dim: usize,
    features: Vec<f32>,
    labels: Vec<u32>,
}

impl Dataset {
    /// Builds a dataset from row-major features, validating every invariant.
    pub fn new(
        name: impl Into<String>,
        features: Vec<f32>,
        labels: Vec<u32>,
        num_classes: usize,
        dim: usize,
    ) -> Result<Self> {
        let n = labels.len();
        if dim == 0 {
            return Err(Error::validation("feature dimension D must be at least 1"));
        }
        if num_classes == 0 {
            return Err(Error::validation("number of classes K must be at least 1"));
        }
        if n < num_classes {
            return Err(Error::validation(format!(
                "dataset has N={n} instances but K={num_classes} classes (need N >= K)"
            )));
        }
        if features.len() != n * dim {
            return Err(Error::validation(format!(
                "feature block has {} values, expected N*D = {}",
                features.len(),
                n * dim
            )));
        }
        let mut seen = vec![false; num_classes];
        for (i, &y) in labels.iter().enumerate() {
            if y as usize >= num_classes {
                return Err(Error::validation(format!(
                    "label {y} at row {i} is outside [0, {num_classes})"
                )));
            }
            seen[y as usize] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::validation(format!("class {c} has no instances")));
        }
        if let Some(p) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite feature at (row {}, col {})",
                p / dim,
                p % dim
            )));
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            dim,
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    /// Ground-truth labels of every instance.
    ///
    /// Oracles read these freely. Selection strategies only ever see labels
    /// through [`crate::strategies::StrategyContext`].
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Copy with every feature multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.features.iter().map(|v| v * factor).collect(),
            self.labels.clone(),
            self.num_classes,
            self.dim,
        )
    }

    /// Copy with the given labels substituted. The result is revalidated.
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.features.clone(),
            labels,
            self.num_classes,
            self.dim,
        )
    }
}

/// Serializes a dataset to the ALFX byte layout.
pub fn encode_alfx(dataset: &Dataset) -> Result<Vec<u8>> {
    let name = dataset.name.as_bytes();
    let name_len = u16::try_from(name.len())
        .map_err(|_| Error::validation("dataset name longer than 65535 bytes"))?;
    let dim = u32::try_from(dataset.dim).map_err(|_| Error::validation("D exceeds u32"))?;
    let k = u32::try_from(dataset.num_classes).map_err(|_| Error::validation("K exceeds u32"))?;

    let mut out = Vec::with_capacity(26 + name.len() + dataset.len() * (4 + 4 * dataset.dim));
    out.extend_from_slice(ALFX_MAGIC);
    out.extend_from_slice(&ALFX_VERSION.to_le_bytes());
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&k.to_le_bytes());
    out.extend_from_slice(&name_len.to_le_bytes());
    out.extend_from_slice(name);
    for &y in &dataset.labels {
        out.extend_from_slice(&(y as i32).to_le_bytes());
    }
    for &v in &dataset.features {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(
                field,
                format!(
                    "file truncated: need {n} bytes at offset {}, {} available",
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }

    fn u16(&mut self, field: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, field)?.try_into().unwrap()))
    }

    fn u32(&mut self, field: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}

/// Parses ALFX bytes into a validated dataset.
pub fn decode_alfx(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != ALFX_MAGIC {
        return Err(Error::format("magic", "expected the bytes `ALFX`"));
    }
    let version = r.u32("version")?;
    if version != ALFX_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported format version {version} (supported: {ALFX_VERSION})"),
        ));
    }
    let n = r.u64("N")?;
    let dim = r.u32("D")? as usize;
    let k = r.u32("K")? as usize;
    if dim == 0 {
        return Err(Error::format("D", "feature dimension must be at least 1"));
    }
    if k == 0 {
        return Err(Error::format("K", "number of classes must be at least 1"));
    }
    let n = usize::try_from(n).map_err(|_| Error::format("N", "instance count too large"))?;
    let name_len = r.u16("name")? as usize;
    let name = std::str::from_utf8(r.take(name_len, "name")?)
        .map_err(|e| Error::format("name", format!("invalid UTF-8: {e}")))?
        .to_owned();

    let label_bytes = n
        .checked_mul(4)
        .ok_or_else(|| Error::format("N", "instance count too large"))?;
    let raw_labels = r.take(label_bytes, "labels")?;
    let mut labels = Vec::with_capacity(n);
    for (i, chunk) in raw_labels.chunks_exact(4).enumerate() {
        let y = i32::from_le_bytes(chunk.try_into().unwrap());
        if y < 0 || y as usize >= k {
            return Err(Error::validation(format!(
                "label {y} at row {i} is outside [0, {k})"
            )));
        }
        labels.push(y as u32);
    }

    let feature_bytes = n
        .checked_mul(dim)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::format("features", "feature block size overflows"))?;
    let raw = r.take(feature_bytes, "features")?;
    let features: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::format(
            "features",
            format!("{} trailing bytes after the feature block", bytes.len() - r.pos),
        ));
    }
    Dataset::new(name, features, labels, k, dim)
}

pub fn load_feature_file(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_alfx(&fs::read(path)?)
}

pub fn write_feature_file(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_alfx(dataset)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Parameters of the Gaussian-mixture data source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub cluster_spread: f64,
    pub class_separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            dim: 32,
            per_class: 500,
            cluster_spread: 3.0,
            class_separation: 15.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::validation("num_classes must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::validation("dim must be at least 1"));
        }
        if self.per_class < 2 {
            return Err(Error::validation(format!(
                "per_class must be at least 2, got {}",
                self.per_class
            )));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::validation("cluster_spread must be positive and finite"));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::validation("class_separation must be nonnegative and finite"));
        }
        Ok(())
    }
}

/// Draws a Gaussian mixture: one centroid per class, rescaled about their mean
/// so the average pairwise centroid distance equals `class_separation`, and
/// `per_class` isotropic samples around each. Row order is shuffled.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let (k, d) = (spec.num_classes, spec.dim);
    let mut rng = seed::rng(spec.seed);

    let mut centroids: Vec<f64> = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
    let mut mean = vec![0f64; d];
    for c in 0..k {
        for j in 0..d {
            mean[j] += centroids[c * d + j] / k as f64;
        }
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..k {
        for b in a + 1..k {
            let dist: f64 = (0..d)
                .map(|j| (centroids[a * d + j] - centroids[b * d + j]).powi(2))
                .sum::<f64>()
                .sqrt();
            total += dist;
            pairs += 1;
        }
    }
    let scale = if pairs > 0 && total > 0.0 {
        spec.class_separation / (total / pairs as f64)
    } else {
        0.0
    };
    for c in 0..k {
        for j in 0..d {
            let v = &mut centroids[c * d + j];
            *v = (*v - mean[j]) * scale;
        }
    }

    let n = k * spec.per_class;
    let mut rows: Vec<(u32, Vec<f32>)> = Vec::with_capacity(n);
    for c in 0..k {
        for _ in 0..spec.per_class {
            let x = (0..d)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    (centroids[c * d + j] + spec.cluster_spread * z) as f32
                })
                .collect();
            rows.push((c as u32, x));
        }
    }
    rows.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (y, x) in rows {
        labels.push(y);
        features.extend(x);
    }
    Dataset::new(
        format!(
            "synthetic(K={k},D={d},per_class={},spread={},sep={},seed={})",
            spec.per_class, spec.cluster_spread, spec.class_separation, spec.seed
        ),
        features,
        labels,
        k,
        d,
    )
}

/// Disjoint labeled, unlabeled and evaluation index sets.
///
/// `labeled` keeps acquisition order; `unlabeled` and `eval` are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    eval: Vec<usize>,
}

impl PoolState {
    pub fn new(labeled: Vec<usize>, mut unlabeled: Vec<usize>, mut eval: Vec<usize>) -> Result<Self> {
        unlabeled.sort_unstable();
        eval.sort_unstable();
        let mut seen = BTreeSet::new();
        for &i in labeled.iter().chain(&unlabeled).chain(&eval) {
            if !seen.insert(i) {
                return Err(Error::validation(format!(
                    "index {i} appears in more than one pool"
                )));
            }
        }
        Ok(Self {
            labeled,
            unlabeled,
            eval,
        })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn eval(&self) -> &[usize] {
        &self.eval
    }

    /// All train-split indices (labeled then unlabeled).
    pub fn train_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.labeled.iter().chain(&self.unlabeled).copied().collect();
        all.sort_unstable();
        all
    }

    /// Successor state with `batch` moved from the unlabeled to the labeled pool.
    pub fn acquire(&self, batch: &[usize]) -> Result<PoolState> {
        let mut taken = BTreeSet::new();
        for &i in batch {
            if !taken.insert(i) {
                return Err(Error::validation(format!("index {i} repeated in batch")));
            }
            if self.unlabeled.binary_search(&i).is_err() {
                return Err(Error::validation(format!(
                    "index {i} is not in the unlabeled pool"
                )));
            }
        }
        let mut labeled = self.labeled.clone();
        labeled.extend_from_slice(batch);
        let unlabeled = self
            .unlabeled
            .iter()
            .copied()
            .filter(|i| !taken.contains(i))
            .collect();
        Ok(PoolState {
            labeled,
            unlabeled,
            eval: self.eval.clone(),
        })
    }
}

/// Stratified train/eval split. The labeled pool starts empty.
///
/// The eval set receives `round(eval_fraction * N)` instances apportioned to
/// classes by largest remainder, with every class getting at least one eval
/// instance and keeping at least one train instance.
pub fn make_splits(dataset: &Dataset, eval_fraction: f64, seed: u64) -> Result<PoolState> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::validation(format!(
            "eval_fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    let n = dataset.len();
    let k = dataset.num_classes();
    let n_eval = (eval_fraction * n as f64).round() as usize;
    if n_eval < k {
        return Err(Error::validation(format!(
            "eval split of {n_eval} instances cannot hold all {k} classes"
        )));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y as usize].push(i);
    }
    if let Some(c) = by_class.iter().position(|m| m.len() < 2) {
        return Err(Error::validation(format!(
            "class {c} has fewer than 2 instances and cannot appear in both splits"
        )));
    }

    let exact: Vec<f64> = by_class
        .iter()
        .map(|m| n_eval as f64 * m.len() as f64 / n as f64)
        .collect();
    let mut quota: Vec<usize> = exact
        .iter()
        .zip(&by_class)
        .map(|(&e, m)| (e.floor() as usize).clamp(1, m.len() - 1))
        .collect();
    let mut assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while assigned < n_eval {
        let before = assigned;
        for &c in &order {
            if assigned == n_eval {
                break;
            }
            if quota[c] + 1 < by_class[c].len() {
                quota[c] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            return Err(Error::validation("eval fraction leaves no train instances"));
        }
    }
    while assigned > n_eval {
        let before = assigned;
        for &c in order.iter().rev() {
            if assigned == n_eval {
                break;
            }
            if quota[c] > 1 {
                quota[c] -= 1;
                assigned -= 1;
            }
        }
        if assigned == before {
            return Err(Error::validation(format!(
                "eval split of {n_eval} instances cannot hold all {k} classes"
            )));
        }
    }

    let mut rng = seed::rng(seed);
    let mut eval = Vec::with_capacity(n_eval);
    let mut train = Vec::with_capacity(n - n_eval);
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        members.shuffle(&mut rng);
        eval.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    PoolState::new(Vec::new(), train, eval)
}
