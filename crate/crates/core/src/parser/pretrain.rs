//! Auxiliary encoders pretrained as per-token classifiers on treebank
//! annotations: the incoming dependency label (LT), the full morphological
//! tag (MT) and the case value (CT).

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabelSet, ParseError};
use crate::conllu::TreeSentence;
use crate::encoder::{EncoderConfig, TokenInput, Vocab, WindowEncoder};
use crate::lexicon::Case;
use crate::ml::{self, Graph, Init, ModelFile, ModelIoError, NodeId, ParamId, ParamStore, TrainConfig, Trainable};
use crate::text::PhonemeString;

pub const AUX_MODULE_ID: &str = "aux-encoder";

/// Class for tokens without a case value.
pub const NO_CASE: &str = "NONE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuxTask {
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "MT")]
    Mt,
    #[serde(rename = "CT")]
    Ct,
}

impl AuxTask {
    pub const ALL: [AuxTask; 3] = [AuxTask::Lt, AuxTask::Mt, AuxTask::Ct];

    pub fn name(self) -> &'static str {
        match self {
            AuxTask::Lt => "LT",
            AuxTask::Mt => "MT",
            AuxTask::Ct => "CT",
        }
    }

    /// Parameter-name prefix once attached to a parser.
    pub fn prefix(self) -> String {
        format!("aux.{}.", self.name().to_lowercase())
    }
}

impl fmt::Display for AuxTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AuxTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        AuxTask::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown auxiliary task {s:?}"))
    }
}

/// Per-token gold classes of `task` for one sentence.
pub fn aux_gold(task: AuxTask, s: &TreeSentence, labels: &LabelSet) -> Result<Vec<String>, ParseError> {
    match task {
        AuxTask::Lt => s
            .labels
            .iter()
            .map(|l| labels.index(l).map(|_| l.clone()).ok_or_else(|| ParseError::UnknownLabel(l.clone())))
            .collect(),
        AuxTask::Mt => s.tags.iter().map(|t| t.map(|t| t.to_string()).ok_or(ParseError::MissingGold(task))).collect(),
        AuxTask::Ct => s
            .tags
            .iter()
            .map(|t| {
                let t = t.ok_or(ParseError::MissingGold(task))?;
                Ok(t.case.map_or(NO_CASE.to_string(), |c| c.as_str().to_string()))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxExample {
    pub tokens: Vec<TokenInput>,
    pub gold: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct AuxEncoder {
    pub task: AuxTask,
    store: ParamStore,
    encoder: WindowEncoder,
    classes: Vec<String>,
    head_w: ParamId,
    head_b: ParamId,
}

#[derive(Serialize, Deserialize)]
struct AuxMeta {
    task: AuxTask,
    encoder: WindowEncoder,
    classes: Vec<String>,
}

impl AuxEncoder {
    pub fn new(task: AuxTask, config: EncoderConfig, vocab: Vocab, classes: Vec<String>, seed: u64) -> Result<Self, ParseError> {
        let mut rng = ml::seeded_rng(seed);
        let mut store = ParamStore::new();
        let encoder = WindowEncoder::create(&mut store, "enc.", config, vocab, None, &mut rng)?;
        store.add("head.w", classes.len(), encoder.output_dim(), Init::Uniform(&mut rng))?;
        store.add("head.b", 1, classes.len(), Init::Zeros)?;
        Self::assemble(task, store, encoder, classes)
    }

    fn assemble(task: AuxTask, store: ParamStore, mut encoder: WindowEncoder, classes: Vec<String>) -> Result<Self, ParseError> {
        encoder.bind(&store)?;
        let get = |n: &str| store.id(n).ok_or_else(|| ParseError::Incompatible(format!("missing parameter {n}")));
        let (head_w, head_b) = (get("head.w")?, get("head.b")?);
        if store.get(head_w).rows != classes.len() {
            return Err(ParseError::Incompatible("class count does not match parameters".into()));
        }
        Ok(AuxEncoder {
            task,
            store,
            encoder,
            classes,
            head_w,
            head_b,
        })
    }

    pub fn encoder(&self) -> &WindowEncoder {
        &self.encoder
    }

    /// Encoder parameters only, with the `enc.` prefix stripped.
    pub fn encoder_params(&self) -> ParamStore {
        self.store.extract_prefix("enc.")
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn example(&self, s: &TreeSentence, labels: &LabelSet) -> Result<AuxExample, ParseError> {
        let gold = aux_gold(self.task, s, labels)?
            .iter()
            .map(|c| {
                self.classes
                    .iter()
                    .position(|x| x == c)
                    .ok_or_else(|| ParseError::Incompatible(format!("class {c} unseen by the {} encoder", self.task)))
            })
            .collect::<Result<_, _>>()?;
        Ok(AuxExample {
            tokens: self.encoder.inputs(&s.forms, None),
            gold,
        })
    }

    fn logits<'a>(&'a self, g: &mut Graph<'a>, tokens: &[TokenInput]) -> Vec<NodeId> {
        let hs = self.encoder.encode(g, tokens);
        let b = g.param(self.head_b);
        hs.into_iter()
            .map(|h| {
                let l = g.matvec(self.head_w, h);
                g.add(l, b)
            })
            .collect()
    }

    /// Argmax class per token; ties go to the earlier class.
    pub fn predict(&self, forms: &[PhonemeString]) -> Vec<String> {
        let mut g = Graph::new(&self.store);
        let logits = self.logits(&mut g, &self.encoder.inputs(forms, None));
        logits
            .iter()
            .map(|&l| {
                let v = g.value(l);
                let best = (1..v.len()).fold(0, |b, k| if v[k] > v[b] { k } else { b });
                self.classes[best].clone()
            })
            .collect()
    }

    /// Token accuracy of `predict` against the task gold.
    pub fn accuracy(&self, corpus: &[TreeSentence], labels: &LabelSet) -> Result<f64, ParseError> {
        let mut n = 0;
        let mut ok = 0;
        for s in corpus {
            let gold = aux_gold(self.task, s, labels)?;
            for (p, g) in self.predict(&s.forms).iter().zip(&gold) {
                n += 1;
                ok += usize::from(p == g);
            }
        }
        Ok(if n == 0 { 0.0 } else { ok as f64 / n as f64 })
    }

    pub fn to_model_file(&self) -> ModelFile {
        let meta = AuxMeta {
            task: self.task,
            encoder: self.encoder.clone(),
            classes: self.classes.clone(),
        };
        ModelFile {
            module: AUX_MODULE_ID.into(),
            params: self.store.clone(),
            meta: serde_json::to_value(meta).expect("serializable"),
        }
    }

    pub fn from_model_file(file: ModelFile) -> Result<Self, ParseError> {
        if file.module != AUX_MODULE_ID {
            return Err(ParseError::Incompatible(format!("module {}", file.module)));
        }
        let meta: AuxMeta = serde_json::from_value(file.meta).map_err(|e| ModelIoError::CorruptFile(e.to_string()))?;
        Self::assemble(meta.task, file.params, meta.encoder, meta.classes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ParseError> {
        Ok(ml::save_model(path, &self.to_model_file())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ParseError> {
        Self::from_model_file(ml::load_model(path, AUX_MODULE_ID)?)
    }
}

impl Trainable for AuxEncoder {
    type Example = AuxExample;

    fn params(&self) -> &ParamStore {
        &self.store
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, ex: &AuxExample) -> NodeId {
        let logits = self.logits(g, &ex.tokens);
        let nll: Vec<NodeId> = logits.iter().zip(&ex.gold).map(|(&l, &c)| g.log_softmax_nll(l, c)).collect();
        g.sum_of(&nll)
    }
}

/// Trains a fresh encoder for `task` on `corpus`; returns it with its
/// training-set accuracy.
pub fn pretrain_aux(
    task: AuxTask,
    corpus: &[TreeSentence],
    labels: &LabelSet,
    encoder: EncoderConfig,
    config: &TrainConfig,
) -> Result<(AuxEncoder, f64), ParseError> {
    let mut classes: Vec<String> = match task {
        AuxTask::Lt => labels.labels().to_vec(),
        AuxTask::Ct => Case::ALL.iter().map(|c| c.as_str().to_string()).chain([NO_CASE.to_string()]).collect(),
        AuxTask::Mt => Vec::new(),
    };
    let mut forms = Vec::new();
    for s in corpus {
        let gold = aux_gold(task, s, labels)?;
        if task == AuxTask::Mt {
            classes.extend(gold);
        }
        forms.extend(s.forms.iter().map(|f| f.as_slp1()));
    }
    if task == AuxTask::Mt {
        classes.sort();
        classes.dedup();
    }
    let mut model = AuxEncoder::new(task, encoder, Vocab::new(forms), classes, config.seed)?;
    let data = corpus.iter().map(|s| model.example(s, labels)).collect::<Result<Vec<_>, _>>()?;
    ml::sgd_train(&mut model, &data, config)?;
    let acc = model.accuracy(corpus, labels)?;
    Ok((model, acc))
}
