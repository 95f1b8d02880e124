//! Linear projection from feature space into concept space, trained by
//! mini-batch gradient descent on `1 - cos(xW, target)`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::taxonomy::ConceptId;

/// Norm floor used inside the training loss so a zero prediction cannot produce NaN.
pub const TRAINING_NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureItem {
    pub id: String,
    pub label: Option<String>,
    pub values: Vec<f64>,
}

/// Feature vectors of one dataset; every item has the same length and a unique id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    items: Vec<FeatureItem>,
}

impl FeatureSet {
    pub fn new(dim: usize, items: Vec<FeatureItem>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension(
                "feature dimension must be positive".into(),
            ));
        }
        let mut ids = HashSet::with_capacity(items.len());
        for item in &items {
            if item.values.len() != dim {
                return Err(Error::Dimension(format!(
                    "item `{}` has {} features, expected {dim}",
                    item.id,
                    item.values.len()
                )));
            }
            if item.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Precondition(format!(
                    "item `{}` has non-finite features",
                    item.id
                )));
            }
            if !ids.insert(item.id.as_str()) {
                return Err(Error::Precondition(format!(
                    "duplicate item id `{}`",
                    item.id
                )));
            }
        }
        Ok(Self { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[FeatureItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn has_labels(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|i| i.label.is_some())
    }

    /// Resolves each item's label to a row of `table`.
    pub fn resolve_labels(&self, table: &EmbeddingTable) -> Result<Vec<ConceptId>> {
        self.items
            .iter()
            .map(|item| match &item.label {
                Some(l) => table.id(l),
                None => Err(Error::Precondition(format!(
                    "item `{}` has no label",
                    item.id
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 16,
            seed: 42,
            init_scale: 0.1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be positive".into()));
        }
        Ok(())
    }
}

/// `f x d` weight matrix, row-major; a feature row vector `x` maps to `x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    input_dim: usize,
    output_dim: usize,
    weights: Vec<f64>,
}

impl ProjectionModel {
    pub fn new(input_dim: usize, output_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || weights.len() != input_dim * output_dim {
            return Err(Error::Dimension(format!(
                "{} weights for a {input_dim}x{output_dim} projection",
                weights.len()
            )));
        }
        Ok(Self {
            input_dim,
            output_dim,
            weights,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self {
            input_dim: dim,
            output_dim: dim,
            weights,
        }
    }

    /// Uniform(-scale, scale) initialization from a seeded ChaCha stream.
    pub fn random(input_dim: usize, output_dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let weights = (0..input_dim * output_dim)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self {
            input_dim,
            output_dim,
            weights,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim];
        for (xi, row) in x.iter().zip(self.weights.chunks(self.output_dim)) {
            if *xi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        out
    }

    /// SHA-256 of the little-endian f64 weights and the shape.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.input_dim as u64).to_le_bytes());
        h.update((self.output_dim as u64).to_le_bytes());
        for w in &self.weights {
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nonzero_norm(v: &[f64], what: &str) -> Result<f64> {
    let n = dot(v, v).sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::DegenerateVector(format!(
            "{what} vector has zero norm"
        )));
    }
    Ok(n)
}

fn check_lengths(p: &[f64], t: &[f64]) -> Result<()> {
    if p.len() != t.len() {
        return Err(Error::Dimension(format!(
            "predicted has {} entries, target {}",
            p.len(),
            t.len()
        )));
    }
    Ok(())
}

/// `1 - cos(predicted, target)`, in `[0, 2]`.
pub fn cosine_loss(predicted: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(predicted, target)?;
    let np = nonzero_norm(predicted, "predicted")?;
    let nt = nonzero_norm(target, "target")?;
    Ok(1.0 - dot(predicted, target) / (np * nt))
}

/// Gradient of [`cosine_loss`] with respect to `predicted`.
pub fn loss_gradient(predicted: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_lengths(predicted, target)?;
    let np = nonzero_norm(predicted, "predicted")?;
    let nt = nonzero_norm(target, "target")?;
    Ok(gradient_with_norms(predicted, target, np, nt))
}

fn gradient_with_norms(p: &[f64], t: &[f64], np: f64, nt: f64) -> Vec<f64> {
    let pt = dot(p, t);
    let a = 1.0 / (np * nt);
    let b = pt / (np * np * np * nt);
    p.iter().zip(t).map(|(pi, ti)| b * pi - a * ti).collect()
}

/// Loss and gradient with norms floored at [`TRAINING_NORM_EPSILON`].
fn guarded_loss_and_gradient(p: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let np = dot(p, p).sqrt().max(TRAINING_NORM_EPSILON);
    let nt = dot(t, t).sqrt().max(TRAINING_NORM_EPSILON);
    let loss = 1.0 - dot(p, t) / (np * nt);
    (loss, gradient_with_norms(p, t, np, nt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: ProjectionModel,
    /// Mean training loss before the first epoch, then after each epoch.
    pub loss_trajectory: Vec<f64>,
}

struct Example<'a> {
    x: &'a [f64],
    target: &'a [f64],
}

fn mean_loss(model: &ProjectionModel, examples: &[Example<'_>]) -> f64 {
    let total: f64 = examples
        .iter()
        .map(|e| guarded_loss_and_gradient(&model.apply_unchecked(e.x), e.target).0)
        .sum();
    total / examples.len() as f64
}

/// Trains from a seeded uniform initialization.
pub fn train(
    features: &FeatureSet,
    concepts: &EmbeddingTable,
    config: &TrainingConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = ProjectionModel::random(features.dim(), concepts.dim(), config.init_scale, &mut rng);
    train_loop(features, concepts, config, init, &mut rng)
}

/// Trains from a caller-supplied initial model. Shuffling still follows `config.seed`.
pub fn train_from(
    features: &FeatureSet,
    concepts: &EmbeddingTable,
    config: &TrainingConfig,
    initial: ProjectionModel,
) -> Result<TrainedModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    train_loop(features, concepts, config, initial, &mut rng)
}

fn train_loop(
    features: &FeatureSet,
    concepts: &EmbeddingTable,
    config: &TrainingConfig,
    mut model: ProjectionModel,
    rng: &mut ChaCha8Rng,
) -> Result<TrainedModel> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no training items".into()));
    }
    if model.input_dim != features.dim() || model.output_dim != concepts.dim() {
        return Err(Error::Dimension(format!(
            "model is {}x{}, data needs {}x{}",
            model.input_dim,
            model.output_dim,
            features.dim(),
            concepts.dim()
        )));
    }
    let labels = features.resolve_labels(concepts)?;
    let examples: Vec<Example<'_>> = features
        .items()
        .iter()
        .zip(&labels)
        .map(|(item, &c)| Example {
            x: &item.values,
            target: concepts.vector(c).expect("resolved label"),
        })
        .collect();

    let (f, d) = (model.input_dim, model.output_dim);
    let mut trajectory = Vec::with_capacity(config.epochs + 1);
    trajectory.push(mean_loss(&model, &examples));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut grad = vec![0.0; f * d];

    for epoch in 0..config.epochs {
        order.shuffle(rng);
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let e = &examples[i];
                let p = model.apply_unchecked(e.x);
                let (loss, gp) = guarded_loss_and_gradient(&p, e.target);
                batch_loss += loss;
                for (xi, grow) in e.x.iter().zip(grad.chunks_mut(d)) {
                    for (g, gpj) in grow.iter_mut().zip(&gp) {
                        *g += xi * gpj;
                    }
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    batch: batch_no,
                });
            }
            let step = config.learning_rate / batch.len() as f64;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
        }
        let loss = mean_loss(&model, &examples);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        trajectory.push(loss);
    }
    Ok(TrainedModel {
        model,
        loss_trajectory: trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreEntry {
    pub id: String,
    pub vector: Vec<f64>,
    pub label: Option<String>,
}

impl StoreEntry {
    /// A zero output cannot be ranked by cosine similarity.
    pub fn is_degenerate(&self) -> bool {
        self.vector.iter().all(|v| *v == 0.0)
    }
}

/// Projected items in concept space.
#[derive(Debug, Clone, PartialEq)]
pub struct VisualEmbeddingStore {
    pub dim: usize,
    pub entries: Vec<StoreEntry>,
}

impl VisualEmbeddingStore {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn embed_items(model: &ProjectionModel, features: &FeatureSet) -> Result<VisualEmbeddingStore> {
    if features.dim() != model.input_dim {
        return Err(Error::Dimension(format!(
            "features have dimension {}, model expects {}",
            features.dim(),
            model.input_dim
        )));
    }
    let entries = features
        .items()
        .par_iter()
        .map(|item| StoreEntry {
            id: item.id.clone(),
            vector: model.apply_unchecked(&item.values),
            label: item.label.clone(),
        })
        .collect();
    Ok(VisualEmbeddingStore {
        dim: model.output_dim,
        entries,
    })
}
