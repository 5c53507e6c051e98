//! Skip-gram with negative sampling.
//!
//! For a center word c, a context word o and negatives n_k the loss is
//! `−log σ(u_o·v_c) − Σ_k log σ(−u_{n_k}·v_c)`, where v are input vectors
//! (the exported table) and u are output vectors. Negatives are drawn from
//! the unigram distribution raised to 0.75, with fresh draws every epoch.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbError, EmbeddingTable};
use crate::ml::{self, Graph, Init, NodeId, ParamId, ParamStore, TrainConfig, Trainable};

/// Redraws allowed when a negative equals the context word.
const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Words added to the vocabulary even if absent from the corpus.
    #[serde(default)]
    pub extra_vocab: Vec<String>,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 16,
            window: 2,
            negatives: 5,
            epochs: 5,
            seed: 0,
            learning_rate: 0.05,
            extra_vocab: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramExample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SkipGram {
    store: ParamStore,
    input: ParamId,
    output: ParamId,
}

impl SkipGram {
    pub fn new(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ml::seeded_rng(seed);
        let mut store = ParamStore::new();
        let input = store.add("in", vocab_size, dim, Init::Uniform(&mut rng)).expect("fresh store");
        let output = store.add("out", vocab_size, dim, Init::Uniform(&mut rng)).expect("fresh store");
        SkipGram { store, input, output }
    }

    /// σ(u_o·v_c), the model's probability that `context` appears near `center`.
    pub fn context_probability(&self, center: usize, context: usize) -> f64 {
        let v = self.store.row(self.input, center);
        let u = self.store.row(self.output, context);
        ml::sigmoid(v.iter().zip(u).map(|(a, b)| a * b).sum())
    }

    pub fn input_vectors(&self) -> &[f64] {
        &self.store.get(self.input).values
    }
}

impl Trainable for SkipGram {
    type Example = SkipGramExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &SkipGramExample) -> NodeId {
        let v = g.lookup(self.input, ex.center);
        let u = g.lookup(self.output, ex.context);
        let pos = g.dot(u, v);
        let mut terms = vec![g.log_sigmoid(pos)];
        for &n in &ex.negatives {
            let un = g.lookup(self.output, n);
            let s = g.dot(un, v);
            let s = g.scale(s, -1.0);
            terms.push(g.log_sigmoid(s));
        }
        let total = g.sum_of(&terms);
        g.scale(total, -1.0)
    }
}

/// Vocabulary in sorted order with corpus counts.
fn vocabulary(corpus: &[Vec<String>], extra: &[String]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for w in corpus.iter().flatten() {
        *counts.entry(w.clone()).or_insert(0) += 1;
    }
    for w in extra {
        counts.entry(w.clone()).or_insert(0);
    }
    counts
}

fn pairs(corpus: &[Vec<String>], index: &BTreeMap<String, usize>, window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for sent in corpus {
        let ids: Vec<usize> = sent.iter().map(|w| index[w]).collect();
        for (i, &c) in ids.iter().enumerate() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(ids.len() - 1);
            for (j, &o) in ids.iter().enumerate().take(hi + 1).skip(lo) {
                if j != i {
                    out.push((c, o));
                }
            }
        }
    }
    out
}

fn draw_negatives(pairs: &[(usize, usize)], k: usize, dist: &WeightedIndex<f64>, rng: &mut ChaCha8Rng) -> Vec<SkipGramExample> {
    pairs
        .iter()
        .map(|&(center, context)| {
            let mut negatives = Vec::with_capacity(k);
            for _ in 0..k {
                let mut tries = 0;
                loop {
                    let n = dist.sample(rng);
                    if n != context {
                        negatives.push(n);
                        break;
                    }
                    tries += 1;
                    if tries > MAX_REDRAWS {
                        break;
                    }
                }
            }
            SkipGramExample {
                center,
                context,
                negatives,
            }
        })
        .collect()
}

/// Trains input vectors on whitespace-tokenized sentences.
pub fn train_skipgram(corpus: &[Vec<String>], config: &SkipGramConfig) -> Result<(EmbeddingTable, SkipGram), EmbError> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(EmbError::EmptyCorpus);
    }
    if config.dim == 0 || config.window == 0 || config.negatives == 0 {
        return Err(EmbError::InvalidConfig("dim, window and negatives must be positive".into()));
    }
    let counts = vocabulary(corpus, &config.extra_vocab);
    let index: BTreeMap<String, usize> = counts.keys().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    let weights: Vec<f64> = counts.values().map(|&c| (c as f64).powf(0.75)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| EmbError::InvalidConfig(e.to_string()))?;
    let pairs = pairs(corpus, &index, config.window);
    let mut model = SkipGram::new(counts.len(), config.dim, config.seed);
    let mut rng = ml::seeded_rng(config.seed ^ 0x5eed);
    for epoch in 0..config.epochs {
        let data = draw_negatives(&pairs, config.negatives, &dist, &mut rng);
        let tc = TrainConfig {
            learning_rate: config.learning_rate,
            epochs: 1,
            seed: config.seed.wrapping_add(epoch as u64),
            ..TrainConfig::default()
        };
        ml::sgd_train(&mut model, &data, &tc).map_err(|e| match e {
            ml::MlError::NonFiniteLoss(_) => EmbError::Ml(ml::MlError::NonFiniteLoss(epoch)),
            other => other.into(),
        })?;
    }
    let table = EmbeddingTable::new(counts.into_keys().collect(), config.dim, model.input_vectors().to_vec())?;
    Ok((table, model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abab() -> Vec<Vec<String>> {
        vec![(0..200).map(|i| if i % 2 == 0 { "a" } else { "b" }.to_string()).collect()]
    }

    fn cfg(epochs: usize) -> SkipGramConfig {
        SkipGramConfig {
            dim: 8,
            window: 1,
            epochs,
            extra_vocab: vec!["held".into()],
            ..SkipGramConfig::default()
        }
    }

    #[test]
    fn cooccurrence_beats_held_out_word() {
        let (table, model) = train_skipgram(&abab(), &cfg(3)).unwrap();
        let a = table.index_of("a").unwrap();
        let b = table.index_of("b").unwrap();
        let h = table.index_of("held").unwrap();
        let pb = model.context_probability(a, b);
        let ph = model.context_probability(a, h);
        assert!(pb > 0.9, "{pb}");
        assert!(pb - ph > 0.3, "{pb} vs {ph}");
    }

    #[test]
    fn zero_epochs_is_the_seeded_init() {
        let (table, _) = train_skipgram(&abab(), &cfg(0)).unwrap();
        let init = SkipGram::new(3, 8, 0);
        assert_eq!(table.row(0), &init.input_vectors()[..8]);
        assert_eq!(table.words(), &["a", "b", "held"]);
    }

    #[test]
    fn deterministic() {
        let a = train_skipgram(&abab(), &cfg(2)).unwrap().0;
        let b = train_skipgram(&abab(), &cfg(2)).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(train_skipgram(&[vec![]], &cfg(1)), Err(EmbError::EmptyCorpus)));
    }

    #[test]
    fn negatives_never_equal_context() {
        let corpus = vec!["x y z x y z w".split(' ').map(String::from).collect::<Vec<_>>()];
        let counts = vocabulary(&corpus, &[]);
        let index: BTreeMap<String, usize> = counts.keys().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let weights: Vec<f64> = counts.values().map(|&c| (c as f64).powf(0.75)).collect();
        let dist = WeightedIndex::new(&weights).unwrap();
        let p = pairs(&corpus, &index, 2);
        let ex = draw_negatives(&p, 5, &dist, &mut ml::seeded_rng(1));
        assert!(ex.iter().all(|e| !e.negatives.contains(&e.context)));
    }

    #[test]
    fn gradient_check() {
        let model = SkipGram::new(4, 3, 9);
        let ex = SkipGramExample { center: 0, context: 1, negatives: vec![2, 3, 2] };
        assert!(ml::grad_check(&model, &ex, 1e-6) < 1e-6);
    }
}
