//! Semantic classification of compounds in context.
//!
//! Features are the embeddings of the first and last constituents and of up
//! to three tokens on each side of the compound, passed through one tanh
//! layer. The class head also sees embeddings of the compound token's
//! morphological tag and incoming dependency label when those are known (a
//! zero block otherwise). During training two auxiliary heads predict that
//! tag and label from the shared layer.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{Vocab, PAD};
use crate::lexicon::MorphTag;
use crate::metrics;
use crate::ml::{self, log_sum_exp, Graph, Init, MlError, ModelFile, ModelIoError, NodeId, ParamId, ParamStore, TrainConfig, Trainable};
use crate::sandhi::RuleTable;
use crate::text::{self, PhonemeString, Script, ScriptTable};

pub const MODULE_ID: &str = "compound";
pub const CONTEXT_RADIUS: usize = 3;
const BUILTIN_CLASSES: &str = include_str!("../data/compound_classes.txt");

#[derive(Debug, Error)]
pub enum CompoundError {
    #[error("span {span} is outside a sentence of {len} tokens")]
    SpanOutOfRange { span: usize, len: usize },
    #[error("constituents join to {joined}, but the compound token is {token}")]
    ConstituentJoinMismatch { joined: String, token: String },
    #[error("a compound needs at least two constituents")]
    TooFewConstituents,
    #[error("label {0:?} is not in the class inventory")]
    UnknownLabel(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    ModelIo(#[from] ModelIoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn builtin_classes() -> Vec<String> {
    parse_classes(BUILTIN_CLASSES)
}

/// One class per line; `#` starts a comment line.
pub fn parse_classes(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompoundInstance {
    pub sentence: Vec<PhonemeString>,
    pub span: usize,
    pub constituents: Vec<PhonemeString>,
}

impl CompoundInstance {
    /// Checks the span and that the constituents join to the compound token.
    pub fn validate(&self, rules: &RuleTable) -> Result<(), CompoundError> {
        if self.span >= self.sentence.len() {
            return Err(CompoundError::SpanOutOfRange {
                span: self.span,
                len: self.sentence.len(),
            });
        }
        if self.constituents.len() < 2 {
            return Err(CompoundError::TooFewConstituents);
        }
        let joined = rules.join_all(&self.constituents);
        if joined != self.sentence[self.span] {
            return Err(CompoundError::ConstituentJoinMismatch {
                joined: joined.as_slp1(),
                token: self.sentence[self.span].as_slp1(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCompound {
    pub instance: CompoundInstance,
    pub label: String,
    /// Tag and incoming dependency label of the compound token, when known.
    pub morph: Option<MorphTag>,
    pub dep: Option<String>,
}

/// Reads `sentence<TAB>span<TAB>c1+c2+…<TAB>label` lines. A hyphenated
/// compound token must list exactly the constituents and is replaced by
/// their sandhi join.
pub fn parse_corpus(text: &str, rules: &RuleTable) -> Result<Vec<LabeledCompound>, CompoundError> {
    let table = ScriptTable::builtin();
    let script = text::script_directive(text)
        .map_err(|e| CompoundError::Corpus { line: 0, message: e.to_string() })?
        .unwrap_or(Script::Slp1);
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let err = |message: String| CompoundError::Corpus { line, message };
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        }
        let conv = |s: &str| table.to_phonemes(s, script).map_err(|e| err(e.to_string()));
        let span: usize = cols[1].trim().parse().map_err(|_| err("span is not a number".into()))?;
        let constituents = cols[2].split('+').map(conv).collect::<Result<Vec<_>, _>>()?;
        let mut sentence = Vec::new();
        for (i, tok) in cols[0].split_whitespace().enumerate() {
            if i == span && tok.contains('-') {
                let parts = tok.split('-').map(conv).collect::<Result<Vec<_>, _>>()?;
                if parts != constituents {
                    return Err(err("hyphenated token does not match the constituents".into()));
                }
                sentence.push(rules.join_all(&parts));
            } else {
                sentence.push(conv(tok)?);
            }
        }
        let instance = CompoundInstance {
            sentence,
            span,
            constituents,
        };
        instance.validate(rules).map_err(|e| err(e.to_string()))?;
        out.push(LabeledCompound {
            instance,
            label: cols[3].trim().to_string(),
            morph: None,
            dep: None,
        });
    }
    Ok(out)
}

pub fn load_corpus(path: impl AsRef<Path>, rules: &RuleTable) -> Result<Vec<LabeledCompound>, CompoundError> {
    parse_corpus(&std::fs::read_to_string(path)?, rules)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundConfig {
    pub word_dim: usize,
    pub feat_dim: usize,
    pub hidden: usize,
}

impl Default for CompoundConfig {
    fn default() -> Self {
        CompoundConfig {
            word_dim: 16,
            feat_dim: 8,
            hidden: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ids {
    words: ParamId,
    w: ParamId,
    b: ParamId,
    morph_emb: ParamId,
    dep_emb: ParamId,
    class_w: ParamId,
    class_b: ParamId,
    morph_w: ParamId,
    morph_b: ParamId,
    dep_w: ParamId,
    dep_b: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundExample {
    /// Word rows: first constituent, last constituent, then the context slots.
    pub words: Vec<usize>,
    /// Feature rows; 0 means absent.
    pub morph: usize,
    pub dep: usize,
    pub label: usize,
}

#[derive(Debug, Clone)]
pub struct CompoundModel {
    pub config: CompoundConfig,
    store: ParamStore,
    ids: Ids,
    classes: Vec<String>,
    vocab: Vocab,
    morph_vocab: Vocab,
    dep_vocab: Vocab,
    /// Task weights used by `loss`: (class, morph, dep).
    weights: (f64, f64, f64),
}

#[derive(Serialize, Deserialize)]
struct CompoundMeta {
    config: CompoundConfig,
    classes: Vec<String>,
    vocab: Vocab,
    morph_vocab: Vocab,
    dep_vocab: Vocab,
}

/// Rows of the feature vocabularies: PAD (unused), UNK (absent), items.
fn feature_row(v: &Vocab, s: Option<&str>) -> usize {
    match s {
        None => 0,
        Some(s) => match v.get(s) {
            crate::encoder::UNK => 0,
            r => r,
        },
    }
}

impl CompoundModel {
    pub fn new(
        config: CompoundConfig,
        classes: Vec<String>,
        vocab: Vocab,
        morph_vocab: Vocab,
        dep_vocab: Vocab,
        seed: u64,
    ) -> Result<Self, CompoundError> {
        if classes.is_empty() {
            return Err(CompoundError::Incompatible("empty class inventory".into()));
        }
        let mut rng = ml::seeded_rng(seed);
        let mut store = ParamStore::new();
        let (d, f, h) = (config.word_dim, config.feat_dim, config.hidden);
        let slots = 2 + 2 * CONTEXT_RADIUS;
        store.add("words", vocab.rows(), d, Init::Uniform(&mut rng))?;
        store.add("w", h, slots * d, Init::Uniform(&mut rng))?;
        store.add("b", 1, h, Init::Zeros)?;
        store.add("morph_emb", morph_vocab.rows(), f, Init::Uniform(&mut rng))?;
        store.add("dep_emb", dep_vocab.rows(), f, Init::Uniform(&mut rng))?;
        store.add("class.w", classes.len(), h + 2 * f, Init::Uniform(&mut rng))?;
        store.add("class.b", 1, classes.len(), Init::Zeros)?;
        store.add("morph.w", morph_vocab.rows(), h, Init::Uniform(&mut rng))?;
        store.add("morph.b", 1, morph_vocab.rows(), Init::Zeros)?;
        store.add("dep.w", dep_vocab.rows(), h, Init::Uniform(&mut rng))?;
        store.add("dep.b", 1, dep_vocab.rows(), Init::Zeros)?;
        Self::assemble(config, store, classes, vocab, morph_vocab, dep_vocab)
    }

    /// Vocabularies taken from `corpus`; the morph and dep vocabularies add
    /// whatever `extra_tags` and `extra_labels` list.
    pub fn for_corpus(
        corpus: &[LabeledCompound],
        classes: Vec<String>,
        extra_tags: &[MorphTag],
        extra_labels: &[String],
        config: CompoundConfig,
        seed: u64,
    ) -> Result<Self, CompoundError> {
        let mut words = BTreeSet::new();
        let mut tags: BTreeSet<String> = extra_tags.iter().map(|t| t.to_string()).collect();
        let mut labels: BTreeSet<String> = extra_labels.iter().cloned().collect();
        for c in corpus {
            words.extend(c.instance.sentence.iter().chain(&c.instance.constituents).map(|w| w.as_slp1()));
            tags.extend(c.morph.map(|t| t.to_string()));
            labels.extend(c.dep.clone());
        }
        Self::new(config, classes, Vocab::new(words), Vocab::new(tags), Vocab::new(labels), seed)
    }

    fn assemble(
        config: CompoundConfig,
        store: ParamStore,
        classes: Vec<String>,
        mut vocab: Vocab,
        mut morph_vocab: Vocab,
        mut dep_vocab: Vocab,
    ) -> Result<Self, CompoundError> {
        vocab.reindex();
        morph_vocab.reindex();
        dep_vocab.reindex();
        let get = |n: &str| store.id(n).ok_or_else(|| CompoundError::Incompatible(format!("missing parameter {n}")));
        let ids = Ids {
            words: get("words")?,
            w: get("w")?,
            b: get("b")?,
            morph_emb: get("morph_emb")?,
            dep_emb: get("dep_emb")?,
            class_w: get("class.w")?,
            class_b: get("class.b")?,
            morph_w: get("morph.w")?,
            morph_b: get("morph.b")?,
            dep_w: get("dep.w")?,
            dep_b: get("dep.b")?,
        };
        if store.get(ids.class_w).rows != classes.len() {
            return Err(CompoundError::Incompatible("class inventory does not match parameters".into()));
        }
        Ok(CompoundModel {
            config,
            store,
            ids,
            classes,
            vocab,
            morph_vocab,
            dep_vocab,
            weights: (1.0, 1.0, 1.0),
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn set_loss_weights(&mut self, class: f64, morph: f64, dep: f64) {
        self.weights = (class, morph, dep);
        for (names, w) in [
            (&["class.w", "class.b", "morph_emb", "dep_emb"][..], class),
            (&["morph.w", "morph.b"][..], morph),
            (&["dep.w", "dep.b"][..], dep),
        ] {
            for n in names {
                let id = self.store.id(n).expect("compound parameter");
                self.store.set_trainable(id, w > 0.0);
            }
        }
    }

    fn word_rows(&self, inst: &CompoundInstance) -> Vec<usize> {
        let get = |w: &PhonemeString| self.vocab.get(&w.as_slp1());
        let mut rows = vec![get(&inst.constituents[0]), get(inst.constituents.last().expect("two constituents"))];
        let n = inst.sentence.len() as isize;
        let s = inst.span as isize;
        let r = CONTEXT_RADIUS as isize;
        for j in (s - r..s).chain(s + 1..=s + r) {
            rows.push(if j < 0 || j >= n { PAD } else { get(&inst.sentence[j as usize]) });
        }
        rows
    }

    pub fn example(&self, c: &LabeledCompound, rules: &RuleTable) -> Result<CompoundExample, CompoundError> {
        c.instance.validate(rules)?;
        let label = self
            .classes
            .iter()
            .position(|x| *x == c.label)
            .ok_or_else(|| CompoundError::UnknownLabel(c.label.clone()))?;
        let morph = c.morph.map(|t| t.to_string());
        Ok(CompoundExample {
            words: self.word_rows(&c.instance),
            morph: feature_row(&self.morph_vocab, morph.as_deref()),
            dep: feature_row(&self.dep_vocab, c.dep.as_deref()),
            label,
        })
    }

    fn hidden<'a>(&'a self, g: &mut Graph<'a>, words: &[usize]) -> NodeId {
        let parts: Vec<NodeId> = words.iter().map(|&w| g.lookup(self.ids.words, w)).collect();
        let x = g.concat(&parts);
        let h = g.matvec(self.ids.w, x);
        let b = g.param(self.ids.b);
        let h = g.add(h, b);
        g.tanh(h)
    }

    fn class_logits<'a>(&'a self, g: &mut Graph<'a>, h: NodeId, morph: usize, dep: usize) -> NodeId {
        let f = self.config.feat_dim;
        let m = if morph == 0 { g.constant(vec![0.0; f]) } else { g.lookup(self.ids.morph_emb, morph) };
        let d = if dep == 0 { g.constant(vec![0.0; f]) } else { g.lookup(self.ids.dep_emb, dep) };
        let x = g.concat(&[h, m, d]);
        let l = g.matvec(self.ids.class_w, x);
        let b = g.param(self.ids.class_b);
        g.add(l, b)
    }

    /// Predicted class and the softmax distribution over classes. Argmax
    /// ties go to the earlier class.
    pub fn classify(
        &self,
        instance: &CompoundInstance,
        morph: Option<MorphTag>,
        dep: Option<&str>,
        rules: &RuleTable,
    ) -> Result<(String, Vec<f64>), CompoundError> {
        instance.validate(rules)?;
        let mut g = Graph::new(&self.store);
        let h = self.hidden(&mut g, &self.word_rows(instance));
        let morph = morph.map(|t| t.to_string());
        let l = self.class_logits(&mut g, h, feature_row(&self.morph_vocab, morph.as_deref()), feature_row(&self.dep_vocab, dep));
        let v = g.value(l);
        let lse = log_sum_exp(v);
        let probs: Vec<f64> = v.iter().map(|x| (x - lse).exp()).collect();
        let best = (1..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
        Ok((self.classes[best].clone(), probs))
    }

    pub fn to_model_file(&self) -> ModelFile {
        let meta = CompoundMeta {
            config: self.config.clone(),
            classes: self.classes.clone(),
            vocab: self.vocab.clone(),
            morph_vocab: self.morph_vocab.clone(),
            dep_vocab: self.dep_vocab.clone(),
        };
        ModelFile {
            module: MODULE_ID.into(),
            params: self.store.clone(),
            meta: serde_json::to_value(meta).expect("serializable"),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, CompoundError> {
        if file.module != MODULE_ID {
            return Err(CompoundError::Incompatible(format!("module {}", file.module)));
        }
        let m: CompoundMeta = serde_json::from_value(file.meta).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        Self::assemble(m.config, file.params, m.classes, m.vocab, m.morph_vocab, m.dep_vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CompoundError> {
        Ok(ml::save_model(path, &self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CompoundError> {
        Self::from_model_file(ml::load_model(path, MODULE_ID)?)
    }
}

impl Trainable for CompoundModel {
    type Example = CompoundExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &CompoundExample) -> NodeId {
        let (wc, wm, wd) = self.weights;
        let h = self.hidden(g, &ex.words);
        let mut parts = Vec::new();
        if wc > 0.0 {
            let l = self.class_logits(g, h, ex.morph, ex.dep);
            let nll = g.log_softmax_nll(l, ex.label);
            parts.push(g.scale(nll, wc));
        }
        for (w, target, wt, bt) in [
            (wm, ex.morph, self.ids.morph_w, self.ids.morph_b),
            (wd, ex.dep, self.ids.dep_w, self.ids.dep_b),
        ] {
            if w > 0.0 && target != 0 {
                let l = g.matvec(wt, h);
                let b = g.param(bt);
                let l = g.add(l, b);
                let nll = g.log_softmax_nll(l, target);
                parts.push(g.scale(nll, w));
            }
        }
        if parts.is_empty() {
            return g.scalar(0.0);
        }
        g.sum_of(&parts)
    }
}

/// Loss weights are read from the `class`, `morph` and `dep` keys.
pub fn train_compound(
    model: &mut CompoundModel,
    corpus: &[LabeledCompound],
    rules: &RuleTable,
    config: &TrainConfig,
) -> Result<Vec<f64>, CompoundError> {
    config.validate()?;
    let data = corpus.iter().map(|c| model.example(c, rules)).collect::<Result<Vec<_>, _>>()?;
    model.set_loss_weights(config.weight("class"), config.weight("morph"), config.weight("dep"));
    Ok(ml::sgd_train(model, &data, config)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundReport {
    pub instances: usize,
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub macro_f1: f64,
}

pub fn evaluate(model: &CompoundModel, corpus: &[LabeledCompound], rules: &RuleTable) -> Result<CompoundReport, CompoundError> {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for c in corpus {
        let (p, _) = model.classify(&c.instance, c.morph, c.dep.as_deref(), rules)?;
        gold.push(c.label.clone());
        pred.push(p);
    }
    Ok(CompoundReport {
        instances: corpus.len(),
        classes: model.classes.clone(),
        accuracy: metrics::accuracy(&gold, &pred),
        macro_f1: metrics::macro_f1(&gold, &pred),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> &'static RuleTable {
        RuleTable::builtin()
    }

    fn corpus() -> Vec<LabeledCompound> {
        parse_corpus("aham pIta-ambaram DarAmi\t1\tpIta+ambaram\tTATPURUSHA\nsaH rAjaputraH paSyati\t1\trAja+putraH\tTATPURUSHA\n", rules()).unwrap()
    }

    fn small() -> CompoundConfig {
        CompoundConfig { word_dim: 3, feat_dim: 2, hidden: 4 }
    }

    #[test]
    fn hyphenated_tokens_are_joined() {
        let c = corpus();
        assert_eq!(c[0].instance.sentence[1].as_slp1(), "pItAmbaram");
    }

    #[test]
    fn validation_errors() {
        let mut inst = corpus()[0].instance.clone();
        inst.span = 5;
        assert!(matches!(inst.validate(rules()), Err(CompoundError::SpanOutOfRange { .. })));
        inst.span = 0;
        assert!(matches!(inst.validate(rules()), Err(CompoundError::ConstituentJoinMismatch { .. })));
        assert!(parse_corpus("a b\t0\ta+b+c\tX\n", rules()).is_err());
    }

    #[test]
    fn zero_parameters_are_uniform() {
        let mut m = CompoundModel::for_corpus(&corpus(), builtin_classes(), &[], &[], small(), 0).unwrap();
        let ids: Vec<ParamId> = m.store().iter().map(|(id, _)| id).collect();
        for id in ids {
            m.store_mut().get_mut(id).values.fill(0.0);
        }
        let (c, p) = m.classify(&corpus()[0].instance, None, None, rules()).unwrap();
        assert_eq!(c, "TATPURUSHA");
        assert_eq!(p, vec![0.25; 4]);
    }

    #[test]
    fn single_class_has_probability_one() {
        let m = CompoundModel::for_corpus(&corpus(), vec!["ONLY".into()], &[], &[], small(), 0).unwrap();
        let (c, p) = m.classify(&corpus()[1].instance, None, Some("karma"), rules()).unwrap();
        assert_eq!(c, "ONLY");
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn unknown_label_rejected() {
        let mut c = corpus();
        c[0].label = "KARMADHARAYA".into();
        let mut m = CompoundModel::for_corpus(&c, builtin_classes(), &[], &[], small(), 0).unwrap();
        let err = train_compound(&mut m, &c, rules(), &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, CompoundError::UnknownLabel(_)));
    }

    #[test]
    fn gradients_with_aux_targets() {
        let mut c = corpus();
        c[0].morph = Some("NOUN,ACC,SG,N".parse().unwrap());
        c[0].dep = Some("karma".into());
        let m = CompoundModel::for_corpus(&c, builtin_classes(), &[], &[], small(), 2).unwrap();
        let ex = m.example(&c[0], rules()).unwrap();
        assert!(ml::grad_check(&m, &ex, 1e-6) < 1e-5);
    }

    #[test]
    fn zero_aux_weights_freeze_aux_heads() {
        let mut c = corpus();
        c[0].morph = Some("NOUN,ACC,SG,N".parse().unwrap());
        c[0].dep = Some("karma".into());
        let mut m = CompoundModel::for_corpus(&c, builtin_classes(), &[], &[], small(), 2).unwrap();
        let before: Vec<Vec<f64>> = ["morph.w", "dep.w"].iter().map(|n| m.store().by_name(n).unwrap().values.clone()).collect();
        let cfg = TrainConfig {
            epochs: 5,
            loss_weights: [("class".to_string(), 1.0), ("morph".to_string(), 0.0), ("dep".to_string(), 0.0)].into(),
            ..TrainConfig::default()
        };
        train_compound(&mut m, &c, rules(), &cfg).unwrap();
        let after: Vec<Vec<f64>> = ["morph.w", "dep.w"].iter().map(|n| m.store().by_name(n).unwrap().values.clone()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn save_load_round_trip() {
        let m = CompoundModel::for_corpus(&corpus(), builtin_classes(), &[], &[], small(), 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.model");
        m.save(&path).unwrap();
        let back = CompoundModel::load(&path).unwrap();
        assert_eq!(back.store(), m.store());
        let inst = &corpus()[0].instance;
        assert_eq!(back.classify(inst, None, None, rules()).unwrap(), m.classify(inst, None, None, rules()).unwrap());
    }
}
