//! Raw text through segmentation, tagging, parsing and compound
//! classification. Each stage reads the previous stage's output: tokens come
//! from the chosen segmentation, the parser sees predicted tags, and the
//! compound classifier sees the predicted tag and incoming label of the
//! compound token.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compound::{CompoundError, CompoundInstance, CompoundModel};
use crate::demo::DemoModels;
use crate::lexicon::{Lexicon, MorphTag};
use crate::parser::{DependencyTree, ParseError, ParseModel};
use crate::sandhi::RuleTable;
use crate::segmenter::{Lattice, SegModel, Segmentation};
use crate::tagger::{TagError, TagModel};
use crate::text::{self, PhonemeString, Script, ScriptTable, TextError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TaskKind {
    Segment,
    Morph,
    Parse,
    Compound,
}

impl TaskKind {
    /// Pipeline order.
    pub const ALL: [TaskKind; 4] = [TaskKind::Segment, TaskKind::Morph, TaskKind::Parse, TaskKind::Compound];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Segment => "SEGMENT",
            TaskKind::Morph => "MORPH",
            TaskKind::Parse => "PARSE",
            TaskKind::Compound => "COMPOUND",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no model loaded for {0}")]
    ModelMissing(TaskKind),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Compound(#[from] CompoundError),
}

/// One whitespace-separated chunk of the input and how it was split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkResult {
    pub surface: PhonemeString,
    /// Constituents of a hyphenated chunk; such a chunk is one token.
    pub parts: Vec<PhonemeString>,
    /// Index of the chunk's first token.
    pub first_token: usize,
    pub words: Vec<PhonemeString>,
    /// Present when the chunk went through the segmenter.
    pub segmentation: Option<ChunkSegmentation>,
}

impl ChunkResult {
    pub fn is_compound(&self) -> bool {
        self.parts.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSegmentation {
    pub lattice: Lattice,
    /// Decoder top-k, best first.
    pub candidates: Vec<Segmentation>,
    /// Edge indices of the selected path.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphResult {
    pub tag: MorphTag,
    pub lemma: PhonemeString,
    pub candidates: Vec<MorphTag>,
    pub in_candidates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundResult {
    pub token: usize,
    pub constituents: Vec<PhonemeString>,
    pub label: String,
    /// Class probabilities in inventory order.
    pub probabilities: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub text: String,
    pub script: Script,
    pub tasks: Vec<TaskKind>,
    pub chunks: Vec<ChunkResult>,
    pub tokens: Vec<PhonemeString>,
    pub morph: Option<Vec<MorphResult>>,
    pub tree: Option<DependencyTree>,
    pub compounds: Option<Vec<CompoundResult>>,
}

impl Analysis {
    pub fn has(&self, task: TaskKind) -> bool {
        self.tasks.contains(&task)
    }
}

/// Models plus the linguistic resources they were built against. Any model
/// may be absent; requesting its task then fails with `ModelMissing`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub lexicon: Lexicon,
    pub rules: RuleTable,
    pub table: ScriptTable,
    pub segmenter: Option<SegModel>,
    pub tagger: Option<TagModel>,
    pub parser: Option<ParseModel>,
    pub compound: Option<CompoundModel>,
}

impl Pipeline {
    /// No models, built-in resources.
    pub fn empty() -> Self {
        Pipeline {
            lexicon: Lexicon::builtin().clone(),
            rules: RuleTable::builtin().clone(),
            table: ScriptTable::builtin().clone(),
            segmenter: None,
            tagger: None,
            parser: None,
            compound: None,
        }
    }

    pub fn with_models(models: DemoModels) -> Self {
        Pipeline {
            segmenter: Some(models.segmenter),
            tagger: Some(models.tagger),
            parser: Some(models.parser),
            compound: Some(models.compound),
            ..Self::empty()
        }
    }

    pub fn loaded(&self) -> Vec<TaskKind> {
        let present = [self.segmenter.is_some(), self.tagger.is_some(), self.parser.is_some(), self.compound.is_some()];
        TaskKind::ALL.into_iter().zip(present).filter(|(_, p)| *p).map(|(t, _)| t).collect()
    }

    fn check(&self, tasks: &[TaskKind]) -> Result<Vec<TaskKind>, PipelineError> {
        if tasks.is_empty() {
            return Err(PipelineError::InvalidRequest("empty task set".into()));
        }
        let mut sorted = tasks.to_vec();
        sorted.sort();
        sorted.dedup();
        let loaded = self.loaded();
        if let Some(t) = sorted.iter().find(|t| !loaded.contains(t)) {
            return Err(PipelineError::ModelMissing(*t));
        }
        Ok(sorted)
    }

    pub fn analyze(&self, text: &str, script: Script, tasks: &[TaskKind]) -> Result<Analysis, PipelineError> {
        self.analyze_with_paths(text, script, tasks, &BTreeMap::new())
    }

    /// Like `analyze`, but chunks listed in `paths` take the given lattice
    /// path instead of the model's choice.
    pub fn analyze_with_paths(
        &self,
        text: &str,
        script: Script,
        tasks: &[TaskKind],
        paths: &BTreeMap<usize, Vec<usize>>,
    ) -> Result<Analysis, PipelineError> {
        let tasks = self.check(tasks)?;
        let raw = text::parse_chunks(&self.table, text, script)?;
        if raw.is_empty() {
            return Err(PipelineError::InvalidRequest("no words in input".into()));
        }
        let segment = tasks.contains(&TaskKind::Segment);
        let mut chunks = Vec::with_capacity(raw.len());
        let mut tokens = Vec::new();
        for (ci, chunk) in raw.into_iter().enumerate() {
            let surface = self.rules.join_all(&chunk.parts);
            let mut result = ChunkResult {
                surface: surface.clone(),
                first_token: tokens.len(),
                words: vec![surface.clone()],
                segmentation: None,
                parts: chunk.parts,
            };
            if segment && !result.is_compound() {
                let seg = self.segmenter.as_ref().expect("checked");
                let a = seg.analyze(&surface, &self.lexicon, &self.rules);
                let path = match paths.get(&ci) {
                    Some(p) if a.lattice.is_full_path(p) => p.clone(),
                    Some(_) => return Err(PipelineError::InvalidRequest(format!("chunk {ci}: not a full lattice path"))),
                    None => a.best().path.clone(),
                };
                result.words = a.lattice.words(&path);
                result.segmentation = Some(ChunkSegmentation {
                    lattice: a.lattice,
                    candidates: a.candidates,
                    path,
                });
            }
            tokens.extend(result.words.iter().cloned());
            chunks.push(result);
        }

        let mut analysis = Analysis {
            text: text.to_string(),
            script,
            tasks: tasks.clone(),
            chunks,
            tokens,
            morph: None,
            tree: None,
            compounds: None,
        };
        if tasks.contains(&TaskKind::Morph) {
            let tagger = self.tagger.as_ref().expect("checked");
            let out = tagger.tag_sentence(&analysis.tokens, &self.lexicon)?;
            analysis.morph = Some(
                out.into_iter()
                    .map(|t| MorphResult {
                        tag: t.tag,
                        lemma: t.lemma,
                        candidates: t.candidates.into_iter().collect(),
                        in_candidates: t.in_candidates,
                    })
                    .collect(),
            );
        }
        if tasks.contains(&TaskKind::Parse) {
            let tags = silver_tags(&analysis);
            analysis.tree = Some(self.parser.as_ref().expect("checked").parse(&analysis.tokens, &tags)?);
        }
        if tasks.contains(&TaskKind::Compound) {
            analysis.compounds = Some(self.classify_compounds(&analysis)?);
        }
        Ok(analysis)
    }

    fn classify_compounds(&self, analysis: &Analysis) -> Result<Vec<CompoundResult>, PipelineError> {
        let model = self.compound.as_ref().expect("checked");
        let tags = silver_tags(analysis);
        let mut out = Vec::new();
        for c in analysis.chunks.iter().filter(|c| c.is_compound()) {
            let instance = CompoundInstance {
                sentence: analysis.tokens.clone(),
                span: c.first_token,
                constituents: c.parts.clone(),
            };
            let dep = analysis.tree.as_ref().map(|t| t.labels[c.first_token].as_str());
            let (label, probs) = model.classify(&instance, tags[c.first_token], dep, &self.rules)?;
            out.push(CompoundResult {
                token: c.first_token,
                constituents: c.parts.clone(),
                label,
                probabilities: model.classes().iter().cloned().zip(probs).collect(),
            });
        }
        Ok(out)
    }

    pub fn render(&self, p: &PhonemeString, script: Script) -> String {
        self.table.render(p, script)
    }
}

fn silver_tags(a: &Analysis) -> Vec<Option<MorphTag>> {
    match &a.morph {
        Some(m) => m.iter().map(|r| Some(r.tag)).collect(),
        None => vec![None; a.tokens.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
    }

    #[test]
    fn request_checks() {
        let p = Pipeline::empty();
        assert!(matches!(p.analyze("rAmaH", Script::Slp1, &[]), Err(PipelineError::InvalidRequest(_))));
        assert!(matches!(
            p.analyze("rAmaH", Script::Slp1, &[TaskKind::Parse]),
            Err(PipelineError::ModelMissing(TaskKind::Parse))
        ));
    }
}
