//! Trainable-model substrate: parameter stores, seeded SGD, finite-difference
//! gradient checks and a binary model format.

mod graph;
mod io;

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{log_sigmoid, log_sum_exp, sigmoid, Graph, NodeId};
pub use io::{load_model, read_model, save_model, write_model, ModelFile, ModelIoError, FORMAT_VERSION, MAGIC};

/// Default half-width of the uniform initializer.
pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("parameter {0:?} already exists")]
    DuplicateParam(String),
    #[error("parameter {name:?} expects {expected} values, got {got}")]
    Shape { name: String, expected: usize, got: usize },
    #[error("non-finite loss in epoch {0}")]
    NonFiniteLoss(usize),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Frozen parameters are skipped by the optimizer.
    pub trainable: bool,
}

pub enum Init<'a> {
    Zeros,
    Uniform(&'a mut ChaCha8Rng),
    Values(Vec<f64>),
}

/// Named dense matrices with fixed shapes. Vectors are 1×n matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    /// Bumped on every optimizer update.
    pub version: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init<'_>) -> Result<ParamId, MlError> {
        if self.index.contains_key(name) {
            return Err(MlError::DuplicateParam(name.to_string()));
        }
        let n = rows * cols;
        let values = match init {
            Init::Zeros => vec![0.0; n],
            Init::Uniform(rng) => (0..n).map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE)).collect(),
            Init::Values(v) => {
                if v.len() != n {
                    return Err(MlError::Shape {
                        name: name.to_string(),
                        expected: n,
                        got: v.len(),
                    });
                }
                v
            }
        };
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            rows,
            cols,
            values,
            trainable: true,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, p: ParamId) -> &Param {
        &self.params[p.0]
    }

    pub fn get_mut(&mut self, p: ParamId) -> &mut Param {
        &mut self.params[p.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|p| self.get(p))
    }

    pub fn row(&self, p: ParamId, row: usize) -> &[f64] {
        let param = &self.params[p.0];
        &param.values[row * param.cols..(row + 1) * param.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn set_trainable(&mut self, p: ParamId, trainable: bool) {
        self.params[p.0].trainable = trainable;
    }

    /// Freezes every parameter whose name starts with `prefix`.
    pub fn set_trainable_prefix(&mut self, prefix: &str, trainable: bool) {
        for p in self.params.iter_mut().filter(|p| p.name.starts_with(prefix)) {
            p.trainable = trainable;
        }
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.values.iter().all(|v| v.is_finite()))
    }

    /// Squared L2 norm over trainable parameters.
    pub fn trainable_sq_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .flat_map(|p| p.values.iter())
            .map(|v| v * v)
            .sum()
    }

    /// Copies every parameter of `other` into this store under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: &ParamStore) -> Result<Vec<ParamId>, MlError> {
        other
            .params
            .iter()
            .map(|p| {
                let id = self.add(&format!("{prefix}{}", p.name), p.rows, p.cols, Init::Values(p.values.clone()))?;
                self.params[id.0].trainable = p.trainable;
                Ok(id)
            })
            .collect()
    }

    /// Copies the parameters under `prefix` into a new store, stripping it.
    pub fn extract_prefix(&self, prefix: &str) -> ParamStore {
        let mut out = ParamStore::new();
        for p in self.params.iter().filter(|p| p.name.starts_with(prefix)) {
            let id = out
                .add(&p.name[prefix.len()..], p.rows, p.cols, Init::Values(p.values.clone()))
                .expect("names are unique within a store");
            out.params[id.0].trainable = p.trainable;
        }
        out.version = self.version;
        out
    }

    /// Drops every parameter whose name starts with `prefix`. Ids of the
    /// remaining parameters may change.
    pub fn remove_prefix(&mut self, prefix: &str) {
        self.params.retain(|p| !p.name.starts_with(prefix));
        self.index = self.params.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
    }
}

/// Gradient buffers shaped like a `ParamStore`.
#[derive(Debug, Clone)]
pub struct Grads {
    values: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads {
            values: store.params.iter().map(|p| vec![0.0; p.values.len()]).collect(),
        }
    }

    pub fn get(&self, p: ParamId) -> &[f64] {
        &self.values[p.0]
    }

    pub(crate) fn slice_mut(&mut self, p: ParamId) -> &mut [f64] {
        &mut self.values[p.0]
    }

    pub(crate) fn add_slice(&mut self, p: ParamId, offset: usize, delta: &[f64]) {
        for (a, d) in self.values[p.0][offset..offset + delta.len()].iter_mut().zip(delta) {
            *a += d;
        }
    }

    pub fn clear(&mut self) {
        for v in &mut self.values {
            v.fill(0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Per-task loss multipliers; missing tasks weigh 1.
    #[serde(default)]
    pub loss_weights: BTreeMap<String, f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 10,
            l2: 0.0,
            seed: 0,
            batch_size: 1,
            loss_weights: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlError> {
        let bad = |m: &str| Err(MlError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.loss_weights.values().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("loss weights must be non-negative");
        }
        if !self.loss_weights.is_empty() && self.loss_weights.values().sum::<f64>() <= 0.0 {
            return bad("loss weights sum to zero");
        }
        Ok(())
    }

    pub fn weight(&self, task: &str) -> f64 {
        self.loss_weights.get(task).copied().unwrap_or(1.0)
    }
}

/// A model whose loss on one example can be expressed on a `Graph`.
pub trait Trainable {
    type Example;

    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;

    /// Builds the example loss. The returned node must hold one value.
    fn loss<'a>(&'a self, graph: &mut Graph<'a>, example: &Self::Example) -> NodeId;
}

/// Loss of one example and its gradient, accumulated into `grads`.
pub fn accumulate<M: Trainable>(model: &M, example: &M::Example, grads: &mut Grads) -> f64 {
    let mut g = Graph::new(model.params());
    let root = model.loss(&mut g, example);
    g.backward(root, 1.0, grads);
    g.scalar_value(root)
}

pub fn example_loss<M: Trainable>(model: &M, example: &M::Example) -> f64 {
    let mut g = Graph::new(model.params());
    let root = model.loss(&mut g, example);
    g.scalar_value(root)
}

/// Mini-batch SGD with a seeded shuffle. Returns the mean loss of each epoch.
///
/// Each step applies `θ ← θ − lr·(mean batch gradient + l2·θ)` to trainable
/// parameters. Training stops with `NonFiniteLoss` on the first epoch whose
/// loss or parameters go non-finite; the model keeps the state reached so far.
pub fn sgd_train<M: Trainable>(model: &mut M, data: &[M::Example], config: &TrainConfig) -> Result<Vec<f64>, MlError> {
    config.validate()?;
    if config.epochs == 0 {
        return Ok(Vec::new());
    }
    if data.is_empty() {
        return Err(MlError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Grads::zeros_like(model.params());
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                total += accumulate(model, &data[i], &mut grads);
            }
            if !total.is_finite() {
                return Err(MlError::NonFiniteLoss(epoch));
            }
            apply_update(model.params_mut(), &grads, batch.len(), config);
            if !model.params().all_finite() {
                return Err(MlError::NonFiniteLoss(epoch));
            }
        }
        trace.push(total / data.len() as f64);
    }
    Ok(trace)
}

fn apply_update(store: &mut ParamStore, grads: &Grads, batch_len: usize, config: &TrainConfig) {
    let inv = 1.0 / batch_len as f64;
    for (p, g) in store.params.iter_mut().zip(&grads.values) {
        if !p.trainable {
            continue;
        }
        for (v, d) in p.values.iter_mut().zip(g) {
            *v -= config.learning_rate * (d * inv + config.l2 * *v);
        }
    }
    store.version += 1;
}

/// Relative error below this denominator is measured as absolute error, so
/// near-zero gradients do not blow up the ratio.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Largest relative disagreement between the analytic gradient and central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε`, over every parameter entry.
///
/// Entries the forward pass never reads have zero gradient both ways and are
/// not perturbed. A pair of zero gradients counts as error 0.
pub fn grad_check<M: Trainable + Clone>(model: &M, example: &M::Example, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0);
    let mut grads = Grads::zeros_like(model.params());
    let reads = {
        let mut g = Graph::new(model.params());
        let root = model.loss(&mut g, example);
        g.backward(root, 1.0, &mut grads);
        g.read_entries()
    };
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (p, range) in reads {
        for k in range {
            let orig = probe.params().get(p).values[k];
            probe.params_mut().get_mut(p).values[k] = orig + epsilon;
            let up = example_loss(&probe, example);
            probe.params_mut().get_mut(p).values[k] = orig - epsilon;
            let down = example_loss(&probe, example);
            probe.params_mut().get_mut(p).values[k] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(relative_error(grads.get(p)[k], numeric));
        }
    }
    worst
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
