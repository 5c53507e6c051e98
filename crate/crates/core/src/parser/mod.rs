//! Arc-factored dependency parser.
//!
//! Tokens are encoded by a window encoder over forms and morphological
//! tags. Optionally, frozen auxiliary encoders pretrained on per-token
//! tasks are merged in through a gate:
//!
//! ```text
//! a = P [a_LT; a_MT; a_CT]          (attached encoders only, in this order)
//! g = σ(G [p; a] + b)
//! h = g ⊙ p + (1 − g) ⊙ a
//! ```
//!
//! With nothing attached `h = p`. Arc scores are
//! `s[h][d] = r_hᵀ U r_d + a·r_h` over small head and dependent projections;
//! trees are decoded with Chu-Liu/Edmonds and labeled per arc.

mod augment;
mod mst;
mod pretrain;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{ConlluError, TreeSentence};
use crate::encoder::{EncoderConfig, TokenInput, Vocab, WindowEncoder};
use crate::lexicon::MorphTag;
use crate::ml::{self, Graph, Init, MlError, ModelFile, ModelIoError, NodeId, ParamId, ParamStore, TrainConfig, Trainable};
use crate::text::PhonemeString;

pub use augment::{augment_corpus, augment_sentence};
pub use mst::{brute_force_mst, is_arborescence, mst_decode, tree_score};
pub use pretrain::{aux_gold, pretrain_aux, AuxEncoder, AuxTask, AUX_MODULE_ID};

pub const MODULE_ID: &str = "parser";
const BUILTIN_LABELS: &str = include_str!("../../data/dep_labels.txt");

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("input is empty")]
    EmptyInput,
    #[error("trees differ in length: {pred} vs {gold}")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("label {0:?} is not in the inventory")]
    UnknownLabel(String),
    #[error("corpus has no gold for task {0}")]
    MissingGold(AuxTask),
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Conllu(#[from] ConlluError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Closed, ordered set of dependency relations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LABELS).expect("bundled labels are valid")
    }

    /// One label per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut labels: Vec<String> = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.contains(char::is_whitespace) || labels.iter().any(|l| l == line) {
                return Err(ParseError::UnknownLabel(line.to_string()));
            }
            labels.push(line.to_string());
        }
        if labels.is_empty() {
            return Err(ParseError::Incompatible("empty label inventory".into()));
        }
        Ok(LabelSet { labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParseError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_labels<I: IntoIterator<Item = S>, S: Into<String>>(labels: I) -> Result<Self, ParseError> {
        Self::parse(&labels.into_iter().map(Into::into).collect::<Vec<String>>().join("\n"))
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyTree {
    /// Head of each token, 1-based; 0 is the virtual root.
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

impl DependencyTree {
    pub fn validate(&self) -> Result<(), ParseError> {
        if self.heads.len() != self.labels.len() {
            return Err(ParseError::InvalidTree("heads and labels differ in length".into()));
        }
        if !is_arborescence(&self.heads) {
            return Err(ParseError::InvalidTree(format!("heads {:?} are not a single-root arborescence", self.heads)));
        }
        Ok(())
    }
}

/// Unlabeled and labeled attachment scores.
pub fn uas_las(pred: &DependencyTree, gold: &DependencyTree) -> Result<(f64, f64), ParseError> {
    let n = gold.heads.len();
    if pred.heads.len() != n {
        return Err(ParseError::LengthMismatch {
            pred: pred.heads.len(),
            gold: n,
        });
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let (u, l) = attachment_counts(pred, gold);
    Ok((u as f64 / n as f64, l as f64 / n as f64))
}

fn attachment_counts(pred: &DependencyTree, gold: &DependencyTree) -> (usize, usize) {
    let mut u = 0;
    let mut l = 0;
    for i in 0..gold.heads.len() {
        if pred.heads[i] == gold.heads[i] {
            u += 1;
            if pred.labels.get(i) == gold.labels.get(i) {
                l += 1;
            }
        }
    }
    (u, l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseConfig {
    pub encoder: EncoderConfig,
    pub arc_dim: usize,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            encoder: EncoderConfig::default(),
            arc_dim: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeadIds {
    root: ParamId,
    head_w: ParamId,
    head_b: ParamId,
    dep_w: ParamId,
    dep_b: ParamId,
    u: ParamId,
    a: ParamId,
    label_w: ParamId,
    label_b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GateIds {
    proj: ParamId,
    w: ParamId,
    b: ParamId,
}

/// Encoder inputs for one sentence: the parser's own plus one per attached
/// auxiliary encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseInput {
    pub main: Vec<TokenInput>,
    pub aux: Vec<Vec<TokenInput>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseExample {
    pub input: ParseInput,
    pub heads: Vec<usize>,
    pub labels: Vec<usize>,
}

/// Intermediate vectors of the gated encoder for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTrace {
    pub p: Vec<f64>,
    pub a: Option<Vec<f64>>,
    pub g: Option<Vec<f64>>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParseModel {
    pub config: ParseConfig,
    store: ParamStore,
    encoder: WindowEncoder,
    aux: Vec<(AuxTask, WindowEncoder)>,
    labels: LabelSet,
    ids: HeadIds,
    gate: Option<GateIds>,
    /// Task weights used by `loss`: (arc, label).
    weights: (f64, f64),
}

#[derive(Serialize, Deserialize)]
struct ParseMeta {
    config: ParseConfig,
    encoder: WindowEncoder,
    aux: Vec<(AuxTask, WindowEncoder)>,
    labels: LabelSet,
}

impl ParseModel {
    pub fn new(config: ParseConfig, labels: LabelSet, vocab: Vocab, tag_vocab: Vocab, seed: u64) -> Result<Self, ParseError> {
        let mut rng = ml::seeded_rng(seed);
        let mut store = ParamStore::new();
        let encoder = WindowEncoder::create(&mut store, "enc.", config.encoder.clone(), vocab, Some(tag_vocab), &mut rng)?;
        let h = encoder.output_dim();
        let k = config.arc_dim;
        store.add("arc.root", 1, h, Init::Uniform(&mut rng))?;
        store.add("arc.head_w", k, h, Init::Uniform(&mut rng))?;
        store.add("arc.head_b", 1, k, Init::Zeros)?;
        store.add("arc.dep_w", k, h, Init::Uniform(&mut rng))?;
        store.add("arc.dep_b", 1, k, Init::Zeros)?;
        store.add("arc.u", k, k, Init::Uniform(&mut rng))?;
        store.add("arc.a", 1, k, Init::Uniform(&mut rng))?;
        store.add("label.w", labels.len(), 2 * h, Init::Uniform(&mut rng))?;
        store.add("label.b", 1, labels.len(), Init::Zeros)?;
        Self::assemble(config, store, encoder, Vec::new(), labels)
    }

    /// Vocabularies taken from `corpus`.
    pub fn for_corpus(corpus: &[TreeSentence], labels: LabelSet, config: ParseConfig, seed: u64) -> Result<Self, ParseError> {
        let forms = corpus.iter().flat_map(|s| s.forms.iter().map(|f| f.as_slp1()));
        let mut tags: Vec<String> = corpus.iter().flat_map(|s| s.tags.iter().flatten().map(|t| t.to_string())).collect();
        tags.sort();
        Self::new(config, labels, Vocab::new(forms), Vocab::new(tags), seed)
    }

    fn assemble(
        config: ParseConfig,
        store: ParamStore,
        encoder: WindowEncoder,
        aux: Vec<(AuxTask, WindowEncoder)>,
        labels: LabelSet,
    ) -> Result<Self, ParseError> {
        let mut m = ParseModel {
            config,
            ids: resolve_heads(&store)?,
            store,
            encoder,
            aux,
            labels,
            gate: None,
            weights: (1.0, 1.0),
        };
        m.bind()?;
        if m.store.get(m.ids.label_w).rows != m.labels.len() {
            return Err(ParseError::Incompatible("label inventory does not match parameters".into()));
        }
        Ok(m)
    }

    /// Re-resolves every parameter id after the store changed shape.
    fn bind(&mut self) -> Result<(), ParseError> {
        self.ids = resolve_heads(&self.store)?;
        self.encoder.bind(&self.store)?;
        for (_, e) in &mut self.aux {
            e.bind(&self.store)?;
        }
        self.gate = if self.aux.is_empty() {
            None
        } else {
            let get = |n: &str| self.store.id(n).ok_or_else(|| ParseError::Incompatible(format!("missing parameter {n}")));
            Some(GateIds {
                proj: get("gate.proj")?,
                w: get("gate.w")?,
                b: get("gate.b")?,
            })
        };
        Ok(())
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn attached(&self) -> Vec<AuxTask> {
        self.aux.iter().map(|(t, _)| *t).collect()
    }

    /// Attaches frozen copies of `encoders` and fresh gate parameters,
    /// replacing anything attached before.
    pub fn attach_aux(&mut self, encoders: &[&AuxEncoder], seed: u64) -> Result<(), ParseError> {
        self.detach_aux()?;
        if encoders.is_empty() {
            return Ok(());
        }
        let mut list: Vec<&AuxEncoder> = encoders.to_vec();
        list.sort_by_key(|e| e.task);
        if list.windows(2).any(|w| w[0].task == w[1].task) {
            return Err(ParseError::Incompatible("an auxiliary task is attached twice".into()));
        }
        let mut width = 0;
        for e in &list {
            let prefix = e.task.prefix();
            self.store.absorb(&prefix, &e.encoder_params())?;
            self.store.set_trainable_prefix(&prefix, false);
            self.aux.push((e.task, e.encoder().with_prefix(&prefix)));
            width += e.encoder().output_dim();
        }
        let h = self.encoder.output_dim();
        let mut rng = ml::seeded_rng(seed);
        self.store.add("gate.proj", h, width, Init::Uniform(&mut rng))?;
        self.store.add("gate.w", h, 2 * h, Init::Uniform(&mut rng))?;
        self.store.add("gate.b", 1, h, Init::Zeros)?;
        self.bind()
    }

    pub fn detach_aux(&mut self) -> Result<(), ParseError> {
        self.store.remove_prefix("aux.");
        self.store.remove_prefix("gate.");
        self.aux.clear();
        self.bind()
    }

    pub fn set_loss_weights(&mut self, arc: f64, label: f64) {
        self.weights = (arc, label);
        for name in ["arc.root", "arc.head_w", "arc.head_b", "arc.dep_w", "arc.dep_b", "arc.u", "arc.a"] {
            let id = self.store.id(name).expect("arc parameter");
            self.store.set_trainable(id, arc > 0.0);
        }
        for name in ["label.w", "label.b"] {
            let id = self.store.id(name).expect("label parameter");
            self.store.set_trainable(id, label > 0.0);
        }
    }

    pub fn input(&self, forms: &[PhonemeString], tags: &[Option<MorphTag>]) -> ParseInput {
        let extras: Vec<Option<String>> = tags.iter().map(|t| t.map(|t| t.to_string())).collect();
        ParseInput {
            main: self.encoder.inputs(forms, Some(&extras)),
            aux: self.aux.iter().map(|(_, e)| e.inputs(forms, None)).collect(),
        }
    }

    pub fn example(&self, s: &TreeSentence) -> Result<ParseExample, ParseError> {
        if s.forms.is_empty() {
            return Err(ParseError::EmptyInput);
        }
        let tree = DependencyTree {
            heads: s.heads.clone(),
            labels: s.labels.clone(),
        };
        tree.validate()?;
        let labels = s
            .labels
            .iter()
            .map(|l| self.labels.index(l).ok_or_else(|| ParseError::UnknownLabel(l.clone())))
            .collect::<Result<_, _>>()?;
        Ok(ParseExample {
            input: self.input(&s.forms, &s.tags),
            heads: s.heads.clone(),
            labels,
        })
    }

    fn gated<'a>(&'a self, g: &mut Graph<'a>, input: &ParseInput) -> (Vec<NodeId>, Vec<Option<(NodeId, NodeId)>>) {
        let p = self.encoder.encode(g, &input.main);
        let Some(gate) = self.gate else {
            let none = vec![None; p.len()];
            return (p, none);
        };
        let aux_out: Vec<Vec<NodeId>> = self.aux.iter().zip(&input.aux).map(|((_, e), t)| e.encode(g, t)).collect();
        let b = g.param(gate.b);
        let one = g.constant(vec![1.0; self.encoder.output_dim()]);
        let mut hs = Vec::with_capacity(p.len());
        let mut trace = Vec::with_capacity(p.len());
        for (i, &pi) in p.iter().enumerate() {
            let parts: Vec<NodeId> = aux_out.iter().map(|v| v[i]).collect();
            let cat = g.concat(&parts);
            let a = g.matvec(gate.proj, cat);
            let pa = g.concat(&[pi, a]);
            let z = g.matvec(gate.w, pa);
            let z = g.add(z, b);
            let gt = g.sigmoid(z);
            let gp = g.mul(gt, pi);
            let inv = g.sub(one, gt);
            let ga = g.mul(inv, a);
            hs.push(g.add(gp, ga));
            trace.push(Some((a, gt)));
        }
        (hs, trace)
    }

    /// Gated encoder vectors, for inspection.
    pub fn gate_trace(&self, input: &ParseInput) -> Vec<GateTrace> {
        let mut g = Graph::new(&self.store);
        let p = self.encoder.encode(&mut g, &input.main);
        let (h, tr) = self.gated(&mut g, input);
        p.iter()
            .zip(h)
            .zip(tr)
            .map(|((&p, h), t)| GateTrace {
                p: g.value(p).to_vec(),
                a: t.map(|(a, _)| g.value(a).to_vec()),
                g: t.map(|(_, x)| g.value(x).to_vec()),
                h: g.value(h).to_vec(),
            })
            .collect()
    }

    /// Token representations with the root vector prepended.
    fn reps<'a>(&'a self, g: &mut Graph<'a>, input: &ParseInput) -> Vec<NodeId> {
        let root = g.param(self.ids.root);
        let (hs, _) = self.gated(g, input);
        std::iter::once(root).chain(hs).collect()
    }

    /// `s[h][d]` for every pair with h ≠ d and d ≥ 1; other cells are `None`.
    fn arc_nodes<'a>(&'a self, g: &mut Graph<'a>, reps: &[NodeId]) -> Vec<Vec<Option<NodeId>>> {
        let m = reps.len();
        let ids = self.ids;
        let hb = g.param(ids.head_b);
        let db = g.param(ids.dep_b);
        let a = g.param(ids.a);
        let mut head_bias = Vec::with_capacity(m);
        let mut rh = Vec::with_capacity(m);
        for &x in reps {
            let v = g.matvec(ids.head_w, x);
            let v = g.add(v, hb);
            let v = g.tanh(v);
            head_bias.push(g.dot(a, v));
            rh.push(v);
        }
        let mut urd = vec![None; m];
        for d in 1..m {
            let v = g.matvec(ids.dep_w, reps[d]);
            let v = g.add(v, db);
            let v = g.tanh(v);
            urd[d] = Some(g.matvec(ids.u, v));
        }
        let mut s = vec![vec![None; m]; m];
        for h in 0..m {
            for d in 1..m {
                if h != d {
                    let bil = g.dot(rh[h], urd[d].expect("dependent"));
                    s[h][d] = Some(g.add(bil, head_bias[h]));
                }
            }
        }
        s
    }

    fn label_logits<'a>(&'a self, g: &mut Graph<'a>, reps: &[NodeId], h: usize, d: usize) -> NodeId {
        let x = g.concat(&[reps[h], reps[d]]);
        let l = g.matvec(self.ids.label_w, x);
        let b = g.param(self.ids.label_b);
        g.add(l, b)
    }

    /// (n+1)×(n+1) arc scores; the diagonal and column 0 are 0 and unused.
    pub fn score_arcs(&self, input: &ParseInput) -> Vec<Vec<f64>> {
        let mut g = Graph::new(&self.store);
        let reps = self.reps(&mut g, input);
        let s = self.arc_nodes(&mut g, &reps);
        s.iter().map(|row| row.iter().map(|c| c.map_or(0.0, |n| g.scalar_value(n))).collect()).collect()
    }

    /// Argmax label per arc; ties go to the earlier label.
    pub fn label_arcs(&self, input: &ParseInput, heads: &[usize]) -> Vec<String> {
        let mut g = Graph::new(&self.store);
        let reps = self.reps(&mut g, input);
        heads
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let l = self.label_logits(&mut g, &reps, h, i + 1);
                let v = g.value(l);
                let best = (1..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
                self.labels.labels()[best].clone()
            })
            .collect()
    }

    pub fn parse_input(&self, input: &ParseInput) -> DependencyTree {
        let heads = mst_decode(&self.score_arcs(input));
        let labels = self.label_arcs(input, &heads);
        DependencyTree { heads, labels }
    }

    pub fn parse(&self, forms: &[PhonemeString], tags: &[Option<MorphTag>]) -> Result<DependencyTree, ParseError> {
        if forms.is_empty() {
            return Err(ParseError::EmptyInput);
        }
        if tags.len() != forms.len() {
            return Err(ParseError::LengthMismatch {
                pred: tags.len(),
                gold: forms.len(),
            });
        }
        Ok(self.parse_input(&self.input(forms, tags)))
    }

    pub fn to_model_file(&self) -> ModelFile {
        let meta = ParseMeta {
            config: self.config.clone(),
            encoder: self.encoder.clone(),
            aux: self.aux.clone(),
            labels: self.labels.clone(),
        };
        ModelFile {
            module: MODULE_ID.into(),
            params: self.store.clone(),
            meta: serde_json::to_value(meta).expect("serializable"),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, ParseError> {
        if file.module != MODULE_ID {
            return Err(ParseError::Incompatible(format!("module {}", file.module)));
        }
        let meta: ParseMeta = serde_json::from_value(file.meta).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        Self::assemble(meta.config, file.params, meta.encoder, meta.aux, meta.labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ParseError> {
        Ok(ml::save_model(path, &self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParseError> {
        Self::from_model_file(ml::load_model(path, MODULE_ID)?)
    }
}

fn resolve_heads(store: &ParamStore) -> Result<HeadIds, ParseError> {
    let get = |n: &str| store.id(n).ok_or_else(|| ParseError::Incompatible(format!("missing parameter {n}")));
    Ok(HeadIds {
        root: get("arc.root")?,
        head_w: get("arc.head_w")?,
        head_b: get("arc.head_b")?,
        dep_w: get("arc.dep_w")?,
        dep_b: get("arc.dep_b")?,
        u: get("arc.u")?,
        a: get("arc.a")?,
        label_w: get("label.w")?,
        label_b: get("label.b")?,
    })
}

impl Trainable for ParseModel {
    type Example = ParseExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Softmax over candidate heads for each dependent, plus the gold
    /// arc's label.
    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &ParseExample) -> NodeId {
        let (wa, wl) = self.weights;
        let reps = self.reps(g, &ex.input);
        let mut parts = Vec::new();
        if wa > 0.0 {
            let s = self.arc_nodes(g, &reps);
            let mut nll = Vec::new();
            for (i, &gold) in ex.heads.iter().enumerate() {
                let d = i + 1;
                let cands: Vec<NodeId> = (0..reps.len()).filter_map(|h| s[h][d]).collect();
                let target = if gold < d { gold } else { gold - 1 };
                let logits = g.concat(&cands);
                nll.push(g.log_softmax_nll(logits, target));
            }
            let total = g.sum_of(&nll);
            parts.push(g.scale(total, wa));
        }
        if wl > 0.0 {
            let mut nll = Vec::new();
            for (i, (&h, &l)) in ex.heads.iter().zip(&ex.labels).enumerate() {
                let logits = self.label_logits(g, &reps, h, i + 1);
                nll.push(g.log_softmax_nll(logits, l));
            }
            let total = g.sum_of(&nll);
            parts.push(g.scale(total, wl));
        }
        if parts.is_empty() {
            return g.scalar(0.0);
        }
        g.sum_of(&parts)
    }
}

pub fn train_parser(model: &mut ParseModel, corpus: &[TreeSentence], config: &TrainConfig) -> Result<Vec<f64>, ParseError> {
    config.validate()?;
    let data = corpus.iter().map(|s| model.example(s)).collect::<Result<Vec<_>, _>>()?;
    model.set_loss_weights(config.weight("arc"), config.weight("label"));
    Ok(ml::sgd_train(model, &data, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub sentences: usize,
    pub tokens: usize,
    pub uas: f64,
    pub las: f64,
}

/// Corpus-level attachment scores, parsing with gold tags.
pub fn evaluate(model: &ParseModel, corpus: &[TreeSentence]) -> Result<ParseReport, ParseError> {
    let mut tokens = 0;
    let mut u = 0;
    let mut l = 0;
    for s in corpus {
        let pred = model.parse(&s.forms, &s.tags)?;
        let gold = DependencyTree {
            heads: s.heads.clone(),
            labels: s.labels.clone(),
        };
        let (cu, cl) = attachment_counts(&pred, &gold);
        u += cu;
        l += cl;
        tokens += s.forms.len();
    }
    let ratio = |k: usize| if tokens == 0 { 0.0 } else { k as f64 / tokens as f64 };
    Ok(ParseReport {
        sentences: corpus.len(),
        tokens,
        uas: ratio(u),
        las: ratio(l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu;

    const DOC: &str = "1\tdevaH\tdeva\t_\tNOUN,NOM,SG,M\t_\t2\tkarta\t_\t_\n2\tgacCati\tgam\t_\tVERB,SG,3,PRES\t_\t0\troot\t_\t_\n3\tgfham\tgfha\t_\tNOUN,ACC,SG,N\t_\t2\tkarma\t_\t_\n\n";

    fn small_config() -> ParseConfig {
        ParseConfig {
            encoder: EncoderConfig { radius: 1, word_dim: 3, suffix_dim: 2, suffix_buckets: 8, extra_dim: 2, hidden: 4 },
            arc_dim: 3,
        }
    }

    fn tiny() -> (ParseModel, Vec<TreeSentence>) {
        let corpus = conllu::trees(&conllu::parse(DOC).unwrap()).unwrap();
        let model = ParseModel::for_corpus(&corpus, LabelSet::builtin(), small_config(), 1).unwrap();
        (model, corpus)
    }

    fn tree(heads: &[usize], labels: &[&str]) -> DependencyTree {
        DependencyTree {
            heads: heads.to_vec(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn attachment_scores() {
        let gold = tree(&[2, 0, 2, 3], &["karta", "root", "karma", "viseshana"]);
        assert_eq!(uas_las(&gold, &gold).unwrap(), (1.0, 1.0));
        let wrong = tree(&[2, 0, 2, 3], &["karma", "karta", "karta", "karta"]);
        assert_eq!(uas_las(&wrong, &gold).unwrap(), (1.0, 0.0));
        let partial = tree(&[2, 0, 2, 2], &["karta", "root", "karta", "viseshana"]);
        assert_eq!(uas_las(&partial, &gold).unwrap(), (0.75, 0.5));
        assert!(matches!(uas_las(&tree(&[0], &["root"]), &gold), Err(ParseError::LengthMismatch { .. })));
    }

    #[test]
    fn label_inventory() {
        let l = LabelSet::builtin();
        assert_eq!(l.len(), 8);
        assert_eq!(l.labels()[0], "root");
        assert!(LabelSet::parse("a\na\n").is_err());
    }

    #[test]
    fn zero_parameters_give_zero_scores_and_first_label() {
        let (mut model, corpus) = tiny();
        let names: Vec<String> = model.store().iter().filter(|(_, p)| p.name.starts_with("arc.") || p.name.starts_with("label.")).map(|(_, p)| p.name.clone()).collect();
        for n in names {
            let id = model.store().id(&n).unwrap();
            model.store_mut().get_mut(id).values.fill(0.0);
        }
        let input = model.input(&corpus[0].forms, &corpus[0].tags);
        assert!(model.score_arcs(&input).iter().flatten().all(|&v| v == 0.0));
        assert_eq!(model.label_arcs(&input, &[2, 0, 2]), vec!["root"; 3]);
    }

    #[test]
    fn bilinear_scores_match_hand_computation() {
        let (model, corpus) = tiny();
        let input = model.input(&corpus[0].forms, &corpus[0].tags);
        let s = model.score_arcs(&input);
        let st = model.store();
        let p = |n: &str| &st.by_name(n).unwrap().values;
        let k = model.config.arc_dim;
        let hdim = model.config.encoder.hidden;
        let reps: Vec<Vec<f64>> = std::iter::once(p("arc.root").clone()).chain(model.gate_trace(&input).into_iter().map(|t| t.h)).collect();
        let proj = |w: &[f64], b: &[f64], x: &[f64]| -> Vec<f64> {
            (0..k).map(|r| (b[r] + (0..hdim).map(|c| w[r * hdim + c] * x[c]).sum::<f64>()).tanh()).collect()
        };
        for h in 0..reps.len() {
            for d in 1..reps.len() {
                if h == d {
                    continue;
                }
                let rh = proj(p("arc.head_w"), p("arc.head_b"), &reps[h]);
                let rd = proj(p("arc.dep_w"), p("arc.dep_b"), &reps[d]);
                let u = p("arc.u");
                let bil: f64 = (0..k).map(|i| rh[i] * (0..k).map(|j| u[i * k + j] * rd[j]).sum::<f64>()).sum();
                let lin: f64 = (0..k).map(|i| p("arc.a")[i] * rh[i]).sum();
                assert!((s[h][d] - (bil + lin)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_label_inventory() {
        let corpus = conllu::trees(&conllu::parse(DOC).unwrap()).unwrap();
        let labels = LabelSet::from_labels(["dep"]).unwrap();
        let model = ParseModel::for_corpus(&corpus, labels, small_config(), 1).unwrap();
        let t = model.parse(&corpus[0].forms, &corpus[0].tags).unwrap();
        assert_eq!(t.labels, vec!["dep"; 3]);
        t.validate().unwrap();
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (model, corpus) = tiny();
        let ex = model.example(&corpus[0]).unwrap();
        assert!(ml::grad_check(&model, &ex, 1e-6) < 1e-5);
    }

    #[test]
    fn rejects_unknown_labels_and_bad_trees() {
        let (model, mut corpus) = tiny();
        let mut bad = corpus[0].clone();
        bad.labels[0] = "nsubj".into();
        assert!(matches!(model.example(&bad), Err(ParseError::UnknownLabel(_))));
        corpus[0].heads = vec![0, 0, 2];
        assert!(matches!(model.example(&corpus[0]), Err(ParseError::InvalidTree(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let (model, corpus) = tiny();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.model");
        model.save(&path).unwrap();
        let back = ParseModel::load(&path).unwrap();
        let s = &corpus[0];
        assert_eq!(back.parse(&s.forms, &s.tags).unwrap(), model.parse(&s.forms, &s.tags).unwrap());
    }
}
