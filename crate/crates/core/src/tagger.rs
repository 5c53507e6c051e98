//! Joint morphological tagging and lemmatization.
//!
//! A shared window encoder feeds two heads: per-token tag emissions decoded
//! with a first-order CRF over monolithic tags, and a classifier over
//! suffix edit scripts that turn a form into its lemma. Lexicon candidate
//! tags get an additive bonus at both training and decoding time.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{ConlluError, TaggedSentence};
use crate::encoder::{EncoderConfig, TokenInput, Vocab, WindowEncoder};
use crate::lexicon::{Lexicon, MorphTag};
use crate::metrics::{f1, macro_f1};
use crate::ml::{self, Graph, Init, MlError, ModelFile, ModelIoError, NodeId, ParamId, ParamStore, TrainConfig, Trainable};
use crate::text::PhonemeString;

pub const MODULE_ID: &str = "tagger";
pub const DEFAULT_BETA: f64 = 2.0;

#[derive(Debug, Error)]
pub enum TagError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no edit script maps {token} to {lemma}")]
    UnreachableLemma { token: String, lemma: String },
    #[error("tag {0} is not in the model's inventory")]
    UnknownTag(String),
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Conllu(#[from] ConlluError),
}

/// Rewrites a form into a lemma: drop `strip` final phonemes, then append.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EditScript {
    pub strip: usize,
    pub append: PhonemeString,
}

impl EditScript {
    pub fn identity() -> Self {
        EditScript {
            strip: 0,
            append: PhonemeString::new(),
        }
    }

    /// The script keeping the longest common prefix of `token` and `lemma`.
    /// Empty lemmas are unreachable.
    pub fn induce(token: &PhonemeString, lemma: &PhonemeString) -> Option<Self> {
        if lemma.is_empty() {
            return None;
        }
        let common = token.iter().zip(lemma.iter()).take_while(|(a, b)| a == b).count();
        Some(EditScript {
            strip: token.len() - common,
            append: lemma.slice(common..lemma.len()),
        })
    }

    pub fn apply(&self, token: &PhonemeString) -> Option<PhonemeString> {
        if self.strip > token.len() || (self.strip == token.len() && self.append.is_empty()) {
            return None;
        }
        let keep = &token.phonemes()[..token.len() - self.strip];
        Some(PhonemeString::concat(&[keep, self.append.phonemes()]))
    }
}

/// Lexicon tags of `token`; empty when the form is unknown.
pub fn candidate_tags(token: &PhonemeString, lexicon: &Lexicon) -> BTreeSet<MorphTag> {
    lexicon.lookup(token).iter().map(|e| e.tag).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAnalysis {
    pub token: PhonemeString,
    pub tag: MorphTag,
    pub lemma: PhonemeString,
    pub candidates: BTreeSet<MorphTag>,
    pub in_candidates: bool,
}

/// Best tag sequence under emission, transition, start and end scores.
///
/// Scores accumulate left to right as `(δ + trans) + emit`. Ties go to the
/// smallest final tag, then to the smallest predecessor at each step.
pub fn viterbi(emissions: &[Vec<f64>], trans: &[f64], start: &[f64], end: &[f64]) -> (Vec<usize>, f64) {
    let nt = start.len();
    let n = emissions.len();
    assert!(n > 0);
    let mut delta: Vec<f64> = (0..nt).map(|j| start[j] + emissions[0][j]).collect();
    let mut back = vec![vec![0usize; nt]; n];
    for t in 1..n {
        let mut next = vec![0.0; nt];
        for j in 0..nt {
            let mut best = (0, f64::NEG_INFINITY);
            for (i, d) in delta.iter().enumerate() {
                let s = d + trans[i * nt + j];
                if s > best.1 {
                    best = (i, s);
                }
            }
            back[t][j] = best.0;
            next[j] = best.1 + emissions[t][j];
        }
        delta = next;
    }
    let mut last = (0, f64::NEG_INFINITY);
    for j in 0..nt {
        let s = delta[j] + end[j];
        if s > last.1 {
            last = (j, s);
        }
    }
    let mut path = vec![last.0; n];
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    (path, last.1)
}

/// Score of one tag sequence with the same summation order as `viterbi`.
pub fn sequence_score(emissions: &[Vec<f64>], trans: &[f64], start: &[f64], end: &[f64], tags: &[usize]) -> f64 {
    let nt = start.len();
    let mut s = start[tags[0]] + emissions[0][tags[0]];
    for t in 1..tags.len() {
        s = s + trans[tags[t - 1] * nt + tags[t]] + emissions[t][tags[t]];
    }
    s + end[tags[tags.len() - 1]]
}

/// Exhaustive search; among equal scores the sequence that is smallest when
/// compared from the last position backwards wins, matching `viterbi`.
pub fn brute_force_tags(emissions: &[Vec<f64>], trans: &[f64], start: &[f64], end: &[f64]) -> (Vec<usize>, f64) {
    let nt = start.len();
    let n = emissions.len();
    let mut cur = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let s = sequence_score(emissions, trans, start, end, &cur);
        let better = match &best {
            None => true,
            Some((b, bs)) => s > *bs || (s == *bs && cur.iter().rev().lt(b.iter().rev())),
        };
        if better {
            best = Some((cur.clone(), s));
        }
        let mut k = 0;
        while k < n {
            cur[k] += 1;
            if cur[k] < nt {
                break;
            }
            cur[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    best.expect("at least one sequence")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    pub encoder: EncoderConfig,
    pub beta: f64,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            encoder: EncoderConfig::default(),
            beta: DEFAULT_BETA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeadIds {
    tag_w: ParamId,
    tag_b: ParamId,
    lemma_w: ParamId,
    lemma_b: ParamId,
    trans: ParamId,
    start: ParamId,
    end: ParamId,
}

/// Encoder-side input of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TagInput {
    pub tokens: Vec<TokenInput>,
    /// β on candidate tags, zero elsewhere; one row per token.
    pub bonus: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagExample {
    pub input: TagInput,
    pub tags: Vec<usize>,
    pub scripts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TagModel {
    pub config: TagConfig,
    store: ParamStore,
    encoder: WindowEncoder,
    ids: HeadIds,
    tags: Vec<MorphTag>,
    tag_index: BTreeMap<MorphTag, usize>,
    scripts: Vec<EditScript>,
    /// Task weights used by `loss`: (tag, lemma).
    weights: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct TagMeta {
    config: TagConfig,
    encoder: WindowEncoder,
    tags: Vec<MorphTag>,
    scripts: Vec<EditScript>,
}

impl TagModel {
    /// Fresh model with explicit inventories. Script 0 must be the identity.
    pub fn new(config: TagConfig, tags: Vec<MorphTag>, scripts: Vec<EditScript>, vocab: Vocab, seed: u64) -> Result<Self, TagError> {
        if tags.is_empty() {
            return Err(TagError::Incompatible("empty tag inventory".into()));
        }
        if scripts.first() != Some(&EditScript::identity()) {
            return Err(TagError::Incompatible("script 0 must be the identity".into()));
        }
        let mut rng = ml::seeded_rng(seed);
        let mut store = ParamStore::new();
        let encoder = WindowEncoder::create(&mut store, "enc.", config.encoder.clone(), vocab, None, &mut rng)?;
        let h = encoder.output_dim();
        let nt = tags.len();
        let ns = scripts.len();
        store.add("tag.w", nt, h, Init::Uniform(&mut rng))?;
        store.add("tag.b", 1, nt, Init::Zeros)?;
        store.add("lemma.w", ns, h, Init::Uniform(&mut rng))?;
        store.add("lemma.b", 1, ns, Init::Zeros)?;
        store.add("crf.trans", nt, nt, Init::Zeros)?;
        store.add("crf.start", 1, nt, Init::Zeros)?;
        store.add("crf.end", 1, nt, Init::Zeros)?;
        Self::assemble(config, store, encoder, tags, scripts)
    }

    fn assemble(
        config: TagConfig,
        store: ParamStore,
        mut encoder: WindowEncoder,
        tags: Vec<MorphTag>,
        scripts: Vec<EditScript>,
    ) -> Result<Self, TagError> {
        encoder.bind(&store)?;
        let get = |n: &str| store.id(n).ok_or_else(|| TagError::Incompatible(format!("missing parameter {n}")));
        let ids = HeadIds {
            tag_w: get("tag.w")?,
            tag_b: get("tag.b")?,
            lemma_w: get("lemma.w")?,
            lemma_b: get("lemma.b")?,
            trans: get("crf.trans")?,
            start: get("crf.start")?,
            end: get("crf.end")?,
        };
        let nt = tags.len();
        if store.get(ids.trans).rows != nt || store.get(ids.trans).cols != nt || store.get(ids.tag_w).rows != nt {
            return Err(TagError::Incompatible("tag inventory does not match parameters".into()));
        }
        if store.get(ids.lemma_w).rows != scripts.len() {
            return Err(TagError::Incompatible("script inventory does not match parameters".into()));
        }
        let tag_index = tags.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        Ok(TagModel {
            config,
            store,
            encoder,
            ids,
            tags,
            tag_index,
            scripts,
            weights: (1.0, 1.0),
        })
    }

    /// Inventories induced from `corpus` and `lexicon`.
    pub fn for_corpus(corpus: &[TaggedSentence], lexicon: &Lexicon, config: TagConfig, seed: u64) -> Result<Self, TagError> {
        let mut tags = lexicon.tags();
        let mut scripts = BTreeSet::new();
        let mut forms = Vec::new();
        for s in corpus {
            tags.extend(s.tags.iter().copied());
            for (f, l) in s.forms.iter().zip(&s.lemmas) {
                let script = EditScript::induce(f, l).ok_or_else(|| unreachable(f, l))?;
                scripts.insert(script);
                forms.push(f.as_slp1());
            }
        }
        scripts.remove(&EditScript::identity());
        let scripts: Vec<EditScript> = std::iter::once(EditScript::identity()).chain(scripts).collect();
        Self::new(config, tags.into_iter().collect(), scripts, Vocab::new(forms), seed)
    }

    pub fn tags(&self) -> &[MorphTag] {
        &self.tags
    }

    pub fn scripts(&self) -> &[EditScript] {
        &self.scripts
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn set_loss_weights(&mut self, tag: f64, lemma: f64) {
        self.weights = (tag, lemma);
        for name in ["tag.w", "tag.b", "crf.trans", "crf.start", "crf.end"] {
            let id = self.store.id(name).expect("tag head parameter");
            self.store.set_trainable(id, tag > 0.0);
        }
        for name in ["lemma.w", "lemma.b"] {
            let id = self.store.id(name).expect("lemma head parameter");
            self.store.set_trainable(id, lemma > 0.0);
        }
    }

    pub fn input(&self, forms: &[PhonemeString], lexicon: &Lexicon) -> TagInput {
        let nt = self.tags.len();
        let bonus = forms
            .iter()
            .map(|f| {
                let mut row = vec![0.0; nt];
                for t in candidate_tags(f, lexicon) {
                    if let Some(&i) = self.tag_index.get(&t) {
                        row[i] = self.config.beta;
                    }
                }
                row
            })
            .collect();
        TagInput {
            tokens: self.encoder.inputs(forms, None),
            bonus,
        }
    }

    pub fn example(&self, sentence: &TaggedSentence, lexicon: &Lexicon) -> Result<TagExample, TagError> {
        if sentence.forms.is_empty() {
            return Err(TagError::EmptyInput);
        }
        let tags = sentence
            .tags
            .iter()
            .map(|t| self.tag_index.get(t).copied().ok_or_else(|| TagError::UnknownTag(t.to_string())))
            .collect::<Result<_, _>>()?;
        let scripts = sentence
            .forms
            .iter()
            .zip(&sentence.lemmas)
            .map(|(f, l)| {
                let s = EditScript::induce(f, l).ok_or_else(|| unreachable(f, l))?;
                self.scripts.iter().position(|x| *x == s).ok_or_else(|| unreachable(f, l))
            })
            .collect::<Result<_, _>>()?;
        Ok(TagExample {
            input: self.input(&sentence.forms, lexicon),
            tags,
            scripts,
        })
    }

    fn hidden<'a>(&'a self, g: &mut Graph<'a>, input: &TagInput) -> Vec<NodeId> {
        self.encoder.encode(g, &input.tokens)
    }

    fn emissions<'a>(&'a self, g: &mut Graph<'a>, hidden: &[NodeId], input: &TagInput) -> Vec<NodeId> {
        let b = g.param(self.ids.tag_b);
        hidden
            .iter()
            .zip(&input.bonus)
            .map(|(&h, bonus)| {
                let e = g.matvec(self.ids.tag_w, h);
                let e = g.add(e, b);
                let c = g.constant(bonus.clone());
                g.add(e, c)
            })
            .collect()
    }

    fn lemma_logits<'a>(&'a self, g: &mut Graph<'a>, hidden: &[NodeId]) -> Vec<NodeId> {
        let b = g.param(self.ids.lemma_b);
        hidden
            .iter()
            .map(|&h| {
                let l = g.matvec(self.ids.lemma_w, h);
                g.add(l, b)
            })
            .collect()
    }

    /// Emission score table for one input, one row per token.
    pub fn emission_table(&self, input: &TagInput) -> Vec<Vec<f64>> {
        let mut g = Graph::new(&self.store);
        let h = self.hidden(&mut g, input);
        let e = self.emissions(&mut g, &h, input);
        e.iter().map(|&n| g.value(n).to_vec()).collect()
    }

    pub fn transitions(&self) -> (&[f64], &[f64], &[f64]) {
        (
            &self.store.get(self.ids.trans).values,
            &self.store.get(self.ids.start).values,
            &self.store.get(self.ids.end).values,
        )
    }

    pub fn tag_sentence(&self, tokens: &[PhonemeString], lexicon: &Lexicon) -> Result<Vec<TokenAnalysis>, TagError> {
        if tokens.is_empty() {
            return Err(TagError::EmptyInput);
        }
        let input = self.input(tokens, lexicon);
        let mut g = Graph::new(&self.store);
        let h = self.hidden(&mut g, &input);
        let e = self.emissions(&mut g, &h, &input);
        let table: Vec<Vec<f64>> = e.iter().map(|&n| g.value(n).to_vec()).collect();
        let (trans, start, end) = self.transitions();
        let (path, _) = viterbi(&table, trans, start, end);
        let logits = self.lemma_logits(&mut g, &h);
        Ok(tokens
            .iter()
            .zip(path)
            .zip(logits)
            .map(|((tok, t), l)| {
                let tag = self.tags[t];
                let candidates = candidate_tags(tok, lexicon);
                TokenAnalysis {
                    token: tok.clone(),
                    tag,
                    lemma: self.best_lemma(tok, g.value(l)),
                    in_candidates: candidates.contains(&tag),
                    candidates,
                }
            })
            .collect())
    }

    /// Highest-scoring script that applies to `token`; ties go to the
    /// smaller script index.
    fn best_lemma(&self, token: &PhonemeString, logits: &[f64]) -> PhonemeString {
        let mut best: Option<(f64, PhonemeString)> = None;
        for (s, &score) in self.scripts.iter().zip(logits) {
            if best.as_ref().is_some_and(|(b, _)| score <= *b) {
                continue;
            }
            if let Some(lemma) = s.apply(token) {
                best = Some((score, lemma));
            }
        }
        best.map_or_else(|| token.clone(), |(_, l)| l)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let meta = TagMeta {
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            tags: self.tags.clone(),
            scripts: self.scripts.clone(),
        };
        ModelFile {
            module: MODULE_ID.into(),
            params: self.store.clone(),
            meta: serde_json::to_value(meta).expect("serializable"),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, TagError> {
        if file.module != MODULE_ID {
            return Err(TagError::Incompatible(format!("module {}", file.module)));
        }
        let meta: TagMeta = serde_json::from_value(file.meta).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        Self::assemble(meta.config, file.params, meta.encoder, meta.tags, meta.scripts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TagError> {
        Ok(ml::save_model(path, &self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TagError> {
        Self::from_model_file(ml::load_model(path, MODULE_ID)?)
    }
}

fn unreachable(f: &PhonemeString, l: &PhonemeString) -> TagError {
    TagError::UnreachableLemma {
        token: f.as_slp1(),
        lemma: l.as_slp1(),
    }
}

impl Trainable for TagModel {
    type Example = TagExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &TagExample) -> NodeId {
        let (wt, wl) = self.weights;
        let h = self.hidden(g, &ex.input);
        let mut parts = Vec::new();
        if wt > 0.0 {
            let e = self.emissions(g, &h, &ex.input);
            let crf = g.crf_nll(&e, self.ids.trans, self.ids.start, self.ids.end, &ex.tags);
            parts.push(g.scale(crf, wt));
        }
        if wl > 0.0 {
            let logits = self.lemma_logits(g, &h);
            let nll: Vec<NodeId> = logits
                .iter()
                .zip(&ex.scripts)
                .map(|(&l, &s)| g.log_softmax_nll(l, s))
                .collect();
            let s = g.sum_of(&nll);
            parts.push(g.scale(s, wl));
        }
        if parts.is_empty() {
            return g.scalar(0.0);
        }
        g.sum_of(&parts)
    }
}

/// Trains `model` in place; returns the per-epoch mean loss.
pub fn train_tagger(model: &mut TagModel, corpus: &[TaggedSentence], lexicon: &Lexicon, config: &TrainConfig) -> Result<Vec<f64>, TagError> {
    config.validate()?;
    let data = corpus.iter().map(|s| model.example(s, lexicon)).collect::<Result<Vec<_>, _>>()?;
    model.set_loss_weights(config.weight("tag"), config.weight("lemma"));
    Ok(ml::sgd_train(model, &data, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagReport {
    pub sentences: usize,
    pub tokens: usize,
    pub token_accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub lemma_accuracy: f64,
}

pub fn evaluate(model: &TagModel, corpus: &[TaggedSentence], lexicon: &Lexicon) -> Result<TagReport, TagError> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    let mut lemma_ok = 0;
    for s in corpus {
        let out = model.tag_sentence(&s.forms, lexicon)?;
        for ((a, g), l) in out.iter().zip(&s.tags).zip(&s.lemmas) {
            gold.push(*g);
            pred.push(a.tag);
            lemma_ok += usize::from(&a.lemma == l);
        }
    }
    let n = gold.len();
    let correct = gold.iter().zip(&pred).filter(|(g, p)| g == p).count();
    let ratio = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(TagReport {
        sentences: corpus.len(),
        tokens: n,
        token_accuracy: ratio(correct),
        micro_f1: f1(correct, n, n),
        macro_f1: macro_f1(&gold, &pred),
        lemma_accuracy: ratio(lemma_ok),
    })
}
