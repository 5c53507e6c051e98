//! Word segmentation: candidate lattice, edge scorer with a lexicon prior,
//! k-best decoding and a word-level path re-ranker.

pub mod decode;
pub mod lattice;

use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::ml::{
    self, Graph, Init, MlError, ModelFile, ModelIoError, NodeId, ParamId, ParamStore, TrainConfig, Trainable,
};
use crate::sandhi::RuleTable;
use crate::text::{script_directive, PhonemeString, Script, ScriptTable};

pub use decode::ScoredPath;
pub use lattice::{Edge, Lattice, DEFAULT_MAX_WORD_LEN};

pub const MODULE_ID: &str = "segmenter";
pub const DEFAULT_BEAM: usize = 8;

/// Context phonemes read on each side of both edge boundaries.
const CONTEXT: usize = 2;

#[derive(Debug, Error)]
pub enum SegError {
    #[error("path is not a full path through the lattice")]
    NotAPath,
    #[error("no candidates to rank")]
    NoCandidates,
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("model does not match the rule table: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegConfig {
    pub max_word_len: usize,
    pub beam: usize,
    /// Weight of the in-lexicon bonus.
    pub lambda: f64,
    pub char_dim: usize,
    pub rule_dim: usize,
    pub hidden: usize,
    pub word_dim: usize,
}

impl Default for SegConfig {
    fn default() -> Self {
        SegConfig {
            max_word_len: DEFAULT_MAX_WORD_LEN,
            beam: DEFAULT_BEAM,
            lambda: 1.0,
            char_dim: 8,
            rule_dim: 4,
            hidden: 16,
            word_dim: 8,
        }
    }
}

/// One decoded segmentation of a chunk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub words: Vec<PhonemeString>,
    pub score: f64,
    /// Edge indices into the lattice.
    pub path: Vec<usize>,
    /// Number of path words missing from the lexicon.
    pub oov: usize,
}

/// Phoneme vocabulary shared by the scorer: inventory order, then padding.
fn phoneme_index() -> &'static [usize; 256] {
    static INDEX: OnceLock<[usize; 256]> = OnceLock::new();
    INDEX.get_or_init(|| {
        let inv = ScriptTable::builtin().inventory();
        let mut idx = [inv.len(); 256];
        for (i, p) in inv.iter().enumerate() {
            idx[p.byte() as usize] = i;
        }
        idx
    })
}

fn pad_index() -> usize {
    ScriptTable::builtin().inventory().len()
}

#[derive(Debug, Clone)]
struct EdgeFeatures {
    context: [usize; 4 * CONTEXT],
    chars: Vec<usize>,
    rule_in: usize,
    rule_out: usize,
    oov: f64,
    len: f64,
    bonus: f64,
}

fn edge_features(surface: &PhonemeString, e: &Edge) -> EdgeFeatures {
    let idx = phoneme_index();
    let s = surface.phonemes();
    let at = |pos: isize| -> usize {
        if pos < 0 || pos as usize >= s.len() {
            pad_index()
        } else {
            idx[s[pos as usize].byte() as usize]
        }
    };
    let mut context = [0; 4 * CONTEXT];
    let c = CONTEXT as isize;
    for (k, off) in (-c..c).enumerate() {
        context[k] = at(e.start as isize + off);
        context[2 * CONTEXT + k] = at(e.end as isize + off);
    }
    EdgeFeatures {
        context,
        chars: e.word.iter().map(|p| idx[p.byte() as usize]).collect(),
        rule_in: e.rule_in.map_or(0, |r| r.0 as usize + 1),
        rule_out: e.rule_out.map_or(0, |r| r.0 as usize + 1),
        oov: if e.in_lexicon { 0.0 } else { 1.0 },
        len: e.word.len() as f64,
        bonus: if e.in_lexicon { 1.0 } else { 0.0 },
    }
}

/// Lattice plus precomputed edge features.
#[derive(Debug, Clone)]
pub struct PreparedLattice {
    pub lattice: Lattice,
    feats: Vec<EdgeFeatures>,
}

impl PreparedLattice {
    pub fn new(lattice: Lattice) -> Self {
        let feats = lattice.edges.iter().map(|e| edge_features(&lattice.surface, e)).collect();
        PreparedLattice { lattice, feats }
    }
}

#[derive(Debug, Clone, Copy)]
struct ScorerIds {
    chars: ParamId,
    rules: ParamId,
    w: ParamId,
    b: ParamId,
    u: ParamId,
    /// [oov penalty, length bias]
    scalars: ParamId,
}

/// Edge scorer: a one-hidden-layer network over boundary context, the
/// word's characters and its rules, plus λ for lexicon membership.
#[derive(Debug, Clone)]
pub struct EdgeScorer {
    store: ParamStore,
    ids: ScorerIds,
    pub lambda: f64,
}

/// Training item for the edge scorer.
#[derive(Debug, Clone)]
pub struct SegExample {
    pub lattice: PreparedLattice,
    pub gold: Vec<usize>,
}

impl EdgeScorer {
    fn new(config: &SegConfig, num_rules: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let mut store = ParamStore::new();
        let input = (4 * CONTEXT + 1) * config.char_dim + 2 * config.rule_dim;
        let ids = ScorerIds {
            chars: store.add("chars", pad_index() + 1, config.char_dim, Init::Uniform(rng)).unwrap(),
            rules: store.add("rules", num_rules + 1, config.rule_dim, Init::Uniform(rng)).unwrap(),
            w: store.add("w", config.hidden, input, Init::Uniform(rng)).unwrap(),
            b: store.add("b", 1, config.hidden, Init::Zeros).unwrap(),
            u: store.add("u", 1, config.hidden, Init::Zeros).unwrap(),
            scalars: store.add("scalars", 1, 2, Init::Zeros).unwrap(),
        };
        EdgeScorer {
            store,
            ids,
            lambda: config.lambda,
        }
    }

    fn from_store(store: ParamStore, lambda: f64, num_rules: usize) -> Result<Self, SegError> {
        let get = |n: &str| store.id(n).ok_or_else(|| SegError::Incompatible(format!("missing scorer parameter {n}")));
        let ids = ScorerIds {
            chars: get("chars")?,
            rules: get("rules")?,
            w: get("w")?,
            b: get("b")?,
            u: get("u")?,
            scalars: get("scalars")?,
        };
        if store.get(ids.rules).rows != num_rules + 1 {
            return Err(SegError::Incompatible("rule embedding count".into()));
        }
        Ok(EdgeScorer { store, ids, lambda })
    }

    /// Sets every scorer weight to zero, leaving only the λ prior.
    pub fn zero(&mut self) {
        for id in [self.ids.chars, self.ids.rules, self.ids.w, self.ids.b, self.ids.u, self.ids.scalars] {
            self.store.get_mut(id).values.fill(0.0);
        }
    }

    /// Learned part of the edge score, without the λ prior.
    fn char_score(&self, f: &EdgeFeatures) -> f64 {
        let s = &self.store;
        let mut x: Vec<f64> = Vec::with_capacity(s.get(self.ids.w).cols);
        for &c in &f.context {
            x.extend_from_slice(s.row(self.ids.chars, c));
        }
        let d = s.get(self.ids.chars).cols;
        let mut mean = vec![0.0; d];
        for &c in &f.chars {
            for (m, v) in mean.iter_mut().zip(s.row(self.ids.chars, c)) {
                *m += v;
            }
        }
        let inv = 1.0 / f.chars.len() as f64;
        x.extend(mean.iter().map(|m| m * inv));
        x.extend_from_slice(s.row(self.ids.rules, f.rule_in));
        x.extend_from_slice(s.row(self.ids.rules, f.rule_out));
        let w = s.get(self.ids.w);
        let b = &s.get(self.ids.b).values;
        let u = &s.get(self.ids.u).values;
        let mut out = 0.0;
        for (r, row) in w.values.chunks_exact(w.cols).enumerate() {
            let pre: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + b[r];
            out += u[r] * pre.tanh();
        }
        let sc = &s.get(self.ids.scalars).values;
        out + sc[0] * f.oov + sc[1] * f.len
    }

    fn edge_score(&self, f: &EdgeFeatures) -> f64 {
        self.char_score(f) + self.lambda * f.bonus
    }

    fn edge_node<'a>(&'a self, g: &mut Graph<'a>, f: &EdgeFeatures) -> NodeId {
        let mut parts: Vec<NodeId> = f.context.iter().map(|&c| g.lookup(self.ids.chars, c)).collect();
        let chars: Vec<NodeId> = f.chars.iter().map(|&c| g.lookup(self.ids.chars, c)).collect();
        parts.push(g.mean(&chars));
        parts.push(g.lookup(self.ids.rules, f.rule_in));
        parts.push(g.lookup(self.ids.rules, f.rule_out));
        let x = g.concat(&parts);
        let h = g.matvec(self.ids.w, x);
        let b = g.param(self.ids.b);
        let h = g.add(h, b);
        let h = g.tanh(h);
        let u = g.param(self.ids.u);
        let s = g.dot(u, h);
        let sc = g.param(self.ids.scalars);
        let feats = g.constant(vec![f.oov, f.len]);
        let extra = g.dot(sc, feats);
        let prior = g.scalar(self.lambda * f.bonus);
        g.sum_of(&[s, extra, prior])
    }

    pub fn edge_scores(&self, lattice: &PreparedLattice) -> Vec<f64> {
        lattice.feats.iter().map(|f| self.edge_score(f)).collect()
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }
}

impl Trainable for EdgeScorer {
    type Example = SegExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Structured hinge: max(0, 1 + s(best wrong path) − s(gold)).
    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &SegExample) -> NodeId {
        let scores = self.edge_scores(&ex.lattice);
        let wrong = decode::k_best(&ex.lattice.lattice, &scores, 2)
            .into_iter()
            .find(|p| p.edges != ex.gold);
        let Some(wrong) = wrong else { return g.scalar(0.0) };
        let gold: Vec<NodeId> = ex.gold.iter().map(|&k| self.edge_node(g, &ex.lattice.feats[k])).collect();
        let bad: Vec<NodeId> = wrong.edges.iter().map(|&k| self.edge_node(g, &ex.lattice.feats[k])).collect();
        let sg = g.sum_of(&gold);
        let sw = g.sum_of(&bad);
        let diff = g.sub(sw, sg);
        let one = g.scalar(1.0);
        let m = g.add(diff, one);
        g.relu(m)
    }
}

#[derive(Debug, Clone, Copy)]
struct RankerIds {
    words: ParamId,
    u: ParamId,
    /// Weights on [word count, oov count, decoder score].
    feats: ParamId,
}

/// Linear re-ranker over a decoder's top-k.
#[derive(Debug, Clone)]
pub struct PathRanker {
    store: ParamStore,
    ids: RankerIds,
    vocab: HashMap<PhonemeString, usize>,
}

/// Ranker view of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankFeatures {
    words: Vec<usize>,
    dense: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct RankExample {
    pub candidates: Vec<RankFeatures>,
    pub gold: usize,
}

impl PathRanker {
    fn new(vocab_words: &[PhonemeString], dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let mut vocab = HashMap::new();
        for w in vocab_words {
            let n = vocab.len() + 1;
            vocab.entry(w.clone()).or_insert(n);
        }
        let mut store = ParamStore::new();
        let ids = RankerIds {
            words: store.add("words", vocab.len() + 1, dim, Init::Uniform(rng)).unwrap(),
            u: store.add("u", 1, dim, Init::Zeros).unwrap(),
            feats: store.add("feats", 1, 3, Init::Zeros).unwrap(),
        };
        PathRanker { store, ids, vocab }
    }

    fn from_store(store: ParamStore, vocab: Vec<PhonemeString>) -> Result<Self, SegError> {
        let get = |n: &str| store.id(n).ok_or_else(|| SegError::Incompatible(format!("missing ranker parameter {n}")));
        let ids = RankerIds {
            words: get("words")?,
            u: get("u")?,
            feats: get("feats")?,
        };
        let vocab = vocab.into_iter().enumerate().map(|(i, w)| (w, i + 1)).collect();
        Ok(PathRanker { store, ids, vocab })
    }

    fn vocab_list(&self) -> Vec<PhonemeString> {
        let mut v: Vec<(&PhonemeString, &usize)> = self.vocab.iter().collect();
        v.sort_by_key(|(_, i)| **i);
        v.into_iter().map(|(w, _)| w.clone()).collect()
    }

    pub fn features(&self, seg: &Segmentation) -> RankFeatures {
        RankFeatures {
            words: seg.words.iter().map(|w| self.vocab.get(w).copied().unwrap_or(0)).collect(),
            dense: [seg.words.len() as f64, seg.oov as f64, seg.score],
        }
    }

    pub fn score(&self, f: &RankFeatures) -> f64 {
        let s = &self.store;
        let d = s.get(self.ids.words).cols;
        let mut sum = vec![0.0; d];
        for &w in &f.words {
            for (a, v) in sum.iter_mut().zip(s.row(self.ids.words, w)) {
                *a += v;
            }
        }
        let u = &s.get(self.ids.u).values;
        let fw = &s.get(self.ids.feats).values;
        let lexical: f64 = u.iter().zip(&sum).map(|(a, b)| a * b).sum();
        lexical + fw.iter().zip(&f.dense).map(|(a, b)| a * b).sum::<f64>()
    }

    fn score_node<'a>(&'a self, g: &mut Graph<'a>, f: &RankFeatures) -> NodeId {
        let rows: Vec<NodeId> = f.words.iter().map(|&w| g.lookup(self.ids.words, w)).collect();
        let sum = g.sum_of(&rows);
        let u = g.param(self.ids.u);
        let lexical = g.dot(u, sum);
        let fw = g.param(self.ids.feats);
        let dense = g.constant(f.dense.to_vec());
        let d = g.dot(fw, dense);
        g.add(lexical, d)
    }

    /// Index of the best candidate; ties go to the earliest.
    pub fn best(&self, feats: &[RankFeatures]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, f) in feats.iter().enumerate() {
            let s = self.score(f);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut_for_test(&mut self) -> &mut ParamStore {
        &mut self.store
    }
}

impl Trainable for PathRanker {
    type Example = RankExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &RankExample) -> NodeId {
        let wrong = ex
            .candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ex.gold)
            .map(|(i, f)| (i, self.score(f)))
            .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
                Some((_, b)) if b >= s => acc,
                _ => Some((i, s)),
            });
        let Some((wrong, _)) = wrong else { return g.scalar(0.0) };
        let sg = self.score_node(g, &ex.candidates[ex.gold]);
        let sw = self.score_node(g, &ex.candidates[wrong]);
        let diff = g.sub(sw, sg);
        let one = g.scalar(1.0);
        let m = g.add(diff, one);
        g.relu(m)
    }
}

/// Decoder output for one chunk.
#[derive(Debug, Clone)]
pub struct ChunkAnalysis {
    pub lattice: Lattice,
    /// Decoder top-k, best first.
    pub candidates: Vec<Segmentation>,
    /// Index into `candidates` chosen by the ranker.
    pub chosen: usize,
}

impl ChunkAnalysis {
    pub fn best(&self) -> &Segmentation {
        &self.candidates[self.chosen]
    }
}

#[derive(Debug, Clone)]
pub struct SegModel {
    pub config: SegConfig,
    pub scorer: EdgeScorer,
    pub ranker: PathRanker,
    rule_ids: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SegTrainReport {
    pub scorer_loss: Vec<f64>,
    pub ranker_loss: Vec<f64>,
    /// Sentences whose gold split is not a lattice path.
    pub skipped: usize,
}

#[derive(Serialize, Deserialize)]
struct SegMeta {
    config: SegConfig,
    rule_ids: Vec<String>,
    vocab: Vec<PhonemeString>,
}

impl SegModel {
    /// Fresh model; the ranker vocabulary comes from `vocab`.
    pub fn new(config: SegConfig, rules: &RuleTable, vocab: &[PhonemeString], seed: u64) -> Self {
        let mut rng = ml::seeded_rng(seed);
        let scorer = EdgeScorer::new(&config, rules.len(), &mut rng);
        let ranker = PathRanker::new(vocab, config.word_dim, &mut rng);
        SegModel {
            config,
            scorer,
            ranker,
            rule_ids: rules.iter().map(|(_, r)| r.id.clone()).collect(),
        }
    }

    fn check_rules(&self, rules: &RuleTable) -> Result<(), SegError> {
        if rules.len() != self.rule_ids.len() || rules.iter().zip(&self.rule_ids).any(|((_, r), id)| &r.id != id) {
            return Err(SegError::Incompatible("rule ids differ".into()));
        }
        Ok(())
    }

    pub fn lattice(&self, surface: &PhonemeString, lexicon: &Lexicon, rules: &RuleTable) -> PreparedLattice {
        PreparedLattice::new(Lattice::build(surface, lexicon, rules, self.config.max_word_len))
    }

    /// Sum of edge scores along `path`, in decoder order.
    pub fn score_path(&self, lattice: &PreparedLattice, path: &[usize]) -> Result<f64, SegError> {
        if !lattice.lattice.is_full_path(path) {
            return Err(SegError::NotAPath);
        }
        Ok(decode::path_score(&self.scorer.edge_scores(lattice), path))
    }

    /// Top `k` segmentations of the lattice, best first.
    pub fn decode(&self, lattice: &PreparedLattice, k: usize) -> Vec<Segmentation> {
        let scores = self.scorer.edge_scores(lattice);
        decode::k_best(&lattice.lattice, &scores, k)
            .into_iter()
            .map(|p| to_segmentation(&lattice.lattice, p))
            .collect()
    }

    /// The ranker's choice among `candidates`.
    pub fn rank_paths<'c>(&self, candidates: &'c [Segmentation]) -> Result<&'c Segmentation, SegError> {
        let feats: Vec<RankFeatures> = candidates.iter().map(|c| self.ranker.features(c)).collect();
        let i = self.ranker.best(&feats).ok_or(SegError::NoCandidates)?;
        Ok(&candidates[i])
    }

    pub fn analyze(&self, surface: &PhonemeString, lexicon: &Lexicon, rules: &RuleTable) -> ChunkAnalysis {
        let lattice = self.lattice(surface, lexicon, rules);
        let candidates = self.decode(&lattice, self.config.beam);
        let feats: Vec<RankFeatures> = candidates.iter().map(|c| self.ranker.features(c)).collect();
        let chosen = self.ranker.best(&feats).unwrap_or(0);
        ChunkAnalysis {
            lattice: lattice.lattice,
            candidates,
            chosen,
        }
    }

    pub fn segment(&self, surface: &PhonemeString, lexicon: &Lexicon, rules: &RuleTable) -> Segmentation {
        self.analyze(surface, lexicon, rules).best().clone()
    }

    /// Trains the edge scorer, then the ranker on the scorer's top-k.
    pub fn train(
        &mut self,
        corpus: &[SegSentence],
        lexicon: &Lexicon,
        rules: &RuleTable,
        config: &TrainConfig,
    ) -> Result<SegTrainReport, SegError> {
        self.check_rules(rules)?;
        let mut report = SegTrainReport::default();
        let mut examples = Vec::new();
        for sent in corpus {
            let lattice = self.lattice(&sent.surface, lexicon, rules);
            match lattice.lattice.find_path(&sent.words) {
                Some(gold) => examples.push(SegExample { lattice, gold }),
                None => report.skipped += 1,
            }
        }
        report.scorer_loss = ml::sgd_train(&mut self.scorer, &examples, config)?;

        let mut rank_examples = Vec::new();
        for ex in &examples {
            let cands = self.decode(&ex.lattice, self.config.beam);
            if let Some(gold) = cands.iter().position(|c| c.path == ex.gold) {
                rank_examples.push(RankExample {
                    candidates: cands.iter().map(|c| self.ranker.features(c)).collect(),
                    gold,
                });
            }
        }
        if !rank_examples.is_empty() {
            report.ranker_loss = ml::sgd_train(&mut self.ranker, &rank_examples, config)?;
        }
        Ok(report)
    }

    pub fn to_model_file(&self) -> ModelFile {
        let mut params = ParamStore::new();
        params.absorb("scorer.", self.scorer.params()).expect("fresh store");
        params.absorb("ranker.", self.ranker.params()).expect("fresh store");
        params.version = self.scorer.params().version.max(self.ranker.params().version);
        let meta = SegMeta {
            config: self.config.clone(),
            rule_ids: self.rule_ids.clone(),
            vocab: self.ranker.vocab_list(),
        };
        ModelFile {
            module: MODULE_ID.into(),
            params,
            meta: serde_json::to_value(meta).expect("serializable"),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, SegError> {
        if file.module != MODULE_ID {
            return Err(SegError::Incompatible(format!("module {}", file.module)));
        }
        let meta: SegMeta =
            serde_json::from_value(file.meta).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        let scorer = EdgeScorer::from_store(file.params.extract_prefix("scorer."), meta.config.lambda, meta.rule_ids.len())?;
        let ranker = PathRanker::from_store(file.params.extract_prefix("ranker."), meta.vocab)?;
        Ok(SegModel {
            config: meta.config,
            scorer,
            ranker,
            rule_ids: meta.rule_ids,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SegError> {
        Ok(ml::save_model(path, &self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SegError> {
        Self::from_model_file(ml::load_model(path, MODULE_ID)?)
    }
}

fn to_segmentation(lattice: &Lattice, p: ScoredPath) -> Segmentation {
    Segmentation {
        words: lattice.words(&p.edges),
        oov: p.edges.iter().filter(|&&k| !lattice.edges[k].in_lexicon).count(),
        score: p.score,
        path: p.edges,
    }
}

/// A gold-segmented training sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SegSentence {
    pub surface: PhonemeString,
    pub words: Vec<PhonemeString>,
}

/// Reads `w1_w2_…` lines; the surface is the rule-table join of the words.
pub fn load_corpus(text: &str, rules: &RuleTable) -> Result<Vec<SegSentence>, SegError> {
    let script = script_directive(text)
        .map_err(|e| SegError::Corpus { line: 0, message: e.to_string() })?
        .unwrap_or(Script::Slp1);
    let table = ScriptTable::builtin();
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let words = line
            .split('_')
            .map(|w| {
                let p = table.to_phonemes(w, script).map_err(|e| SegError::Corpus {
                    line: n + 1,
                    message: e.to_string(),
                })?;
                if p.is_empty() {
                    return Err(SegError::Corpus {
                        line: n + 1,
                        message: "empty word".into(),
                    });
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(SegSentence {
            surface: rules.join_all(&words),
            words,
        });
    }
    Ok(out)
}

/// 1 when the word sequences are identical.
pub fn perfect_match(pred: &[PhonemeString], gold: &[PhonemeString]) -> u8 {
    u8::from(pred == gold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub surface: PhonemeString,
    pub gold: Vec<PhonemeString>,
    pub predicted: Vec<PhonemeString>,
    pub pm: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegEvalReport {
    pub sentences: Vec<SentenceResult>,
    /// Mean perfect match.
    pub pm: f64,
}

pub fn evaluate(model: &SegModel, corpus: &[SegSentence], lexicon: &Lexicon, rules: &RuleTable) -> SegEvalReport {
    let sentences: Vec<SentenceResult> = corpus
        .iter()
        .map(|s| {
            let predicted = model.segment(&s.surface, lexicon, rules).words;
            SentenceResult {
                pm: perfect_match(&predicted, &s.words),
                surface: s.surface.clone(),
                gold: s.words.clone(),
                predicted,
            }
        })
        .collect();
    let pm = corpus_pm(sentences.iter().map(|s| s.pm));
    SegEvalReport { sentences, pm }
}

pub fn corpus_pm(matches: impl IntoIterator<Item = u8>) -> f64 {
    let (hit, total) = matches.into_iter().fold((0usize, 0usize), |(h, t), m| (h + m as usize, t + 1));
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::to_phonemes;

    fn iast(s: &str) -> PhonemeString {
        to_phonemes(s, Script::Iast).unwrap()
    }

    fn model(lambda: f64) -> SegModel {
        let config = SegConfig {
            lambda,
            ..SegConfig::default()
        };
        SegModel::new(config, RuleTable::builtin(), &[iast("dāsaḥ"), iast("bhava")], 5)
    }

    #[test]
    fn untrained_score_counts_lexicon_edges() {
        let m = model(1.0);
        let l = m.lattice(&iast("dāsobhava"), Lexicon::builtin(), RuleTable::builtin());
        for p in l.lattice.enumerate_paths(100_000).unwrap() {
            let count = p.iter().filter(|&&k| l.lattice.edges[k].in_lexicon).count();
            assert_eq!(m.score_path(&l, &p).unwrap(), count as f64);
        }
    }

    #[test]
    fn lambda_zero_is_pure_char_score() {
        let mut m = model(0.0);
        m.scorer.store.get_mut(m.scorer.ids.u).values.fill(0.3);
        let l = m.lattice(&iast("dāsobhava"), Lexicon::builtin(), RuleTable::builtin());
        let path = l.lattice.find_path(&[iast("dāsaḥ"), iast("bhava")]).unwrap();
        let by_hand = path.iter().rev().fold(0.0, |acc, &k| m.scorer.char_score(&l.feats[k]) + acc);
        assert_eq!(m.score_path(&l, &path).unwrap(), by_hand);
    }

    #[test]
    fn not_a_path() {
        let m = model(1.0);
        let l = m.lattice(&iast("dāsobhava"), Lexicon::builtin(), RuleTable::builtin());
        assert!(matches!(m.score_path(&l, &[]), Err(SegError::NotAPath)));
    }

    #[test]
    fn graph_and_fast_scores_agree() {
        let mut m = model(0.7);
        let mut rng = ml::seeded_rng(1);
        for id in [m.scorer.ids.u, m.scorer.ids.b, m.scorer.ids.scalars] {
            for v in &mut m.scorer.store.get_mut(id).values {
                *v = rand::Rng::gen_range(&mut rng, -0.5..0.5);
            }
        }
        let l = m.lattice(&iast("pītāmbaram"), Lexicon::builtin(), RuleTable::builtin());
        for f in &l.feats {
            let mut g = Graph::new(m.scorer.params());
            let n = m.scorer.edge_node(&mut g, f);
            assert!((g.scalar_value(n) - m.scorer.edge_score(f)).abs() < 1e-12);
        }
    }

    #[test]
    fn untrained_ranker_keeps_decoder_order() {
        let m = model(1.0);
        let l = m.lattice(&iast("dāsobhava"), Lexicon::builtin(), RuleTable::builtin());
        let cands = m.decode(&l, 8);
        assert_eq!(m.rank_paths(&cands).unwrap(), &cands[0]);
        assert_eq!(m.rank_paths(&cands[..1]).unwrap(), &cands[0]);
        assert!(matches!(m.rank_paths(&[]), Err(SegError::NoCandidates)));
    }

    #[test]
    fn ranker_demotes_oov_paths() {
        let mut m = model(1.0);
        // Only the oov weight is set: each out-of-lexicon word costs 2.
        let feats = m.ranker.ids.feats;
        m.ranker.store.get_mut(feats).values = vec![0.0, -2.0, 0.0];
        let mk = |oov: usize, score: f64| Segmentation {
            words: vec![iast("dāsaḥ")],
            score,
            path: vec![],
            oov,
        };
        let cands = [mk(3, 5.0), mk(0, 1.0)];
        // Hand-computed: −6 for the first, 0 for the second.
        assert_eq!(m.ranker.score(&m.ranker.features(&cands[0])), -6.0);
        assert_eq!(m.ranker.score(&m.ranker.features(&cands[1])), 0.0);
        assert_eq!(m.rank_paths(&cands).unwrap().oov, 0);
    }

    #[test]
    fn perfect_match_metric() {
        let a = vec![iast("dāsaḥ"), iast("bhava")];
        let b = vec![iast("dāsa"), iast("bhava")];
        assert_eq!(perfect_match(&a, &a), 1);
        assert_eq!(perfect_match(&a, &b), 0);
        assert_eq!(corpus_pm([1, 0]), 0.5);
    }

    #[test]
    fn corpus_joins_words() {
        let c = load_corpus("#script=IAST\ndāsaḥ_bhava\n\n", RuleTable::builtin()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].surface, iast("dāsobhava"));
        assert!(matches!(load_corpus("a__b\n", RuleTable::builtin()), Err(SegError::Corpus { line: 1, .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let m = model(1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.bin");
        m.save(&path).unwrap();
        let back = SegModel::load(&path).unwrap();
        assert_eq!(back.scorer.params(), m.scorer.params());
        assert_eq!(back.ranker.params(), m.ranker.params());
        assert_eq!(back.ranker.vocab, m.ranker.vocab);
        assert_eq!(back.config, m.config);
    }
}
