//! Request handling independent of HTTP: analysis, sessions, corrections,
//! export, chat.

use std::path::PathBuf;
use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use shala_core::compound::CompoundModel;
use shala_core::demo::{self, DemoModels, Recipes};
use shala_core::lexicon::Lexicon;
use shala_core::parser::ParseModel;
use shala_core::pipeline::{Analysis, Pipeline, TaskKind};
use shala_core::sandhi::RuleTable;
use shala_core::segmenter::SegModel;
use shala_core::tagger::TagModel;
use shala_core::text::{Script, ScriptTable};

use crate::chat::{ChatReply, ChatTable};
use crate::config::Config;
use crate::error::ServiceError;
use crate::export::{self, Format};
use crate::session::{tree_problem, Correction, CorrectionRecord, Event, Resolved, Session, Status, SCHEMA_VERSION};
use crate::store::{new_session_id, SessionStore};

const BUILTIN_LEADERBOARD: &str = include_str!("../data/leaderboard.json");

#[derive(Debug, Clone, Deserialize)]
pub struct AnalyzeRequest {
    pub text: String,
    #[serde(default = "default_script")]
    pub script: Script,
    pub tasks: Vec<TaskKind>,
}

fn default_script() -> Script {
    Script::Iast
}

#[derive(Debug, Clone, Deserialize)]
pub struct CorrectionRequest {
    #[serde(flatten)]
    pub correction: Correction,
    #[serde(default)]
    pub note: Option<String>,
}

/// Session as returned by the API.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub schema_version: u32,
    pub id: String,
    pub status: Status,
    pub input_text: String,
    pub script: Script,
    pub tasks: Vec<TaskKind>,
    pub created: chrono::DateTime<Utc>,
    pub updated: chrono::DateTime<Utc>,
    pub predictions: Analysis,
    pub corrections: Vec<CorrectionRecord>,
    /// Predictions with the corrections in effect applied.
    pub current: Resolved,
}

impl SessionView {
    pub fn of(s: &Session) -> Self {
        SessionView {
            schema_version: SCHEMA_VERSION,
            id: s.id.clone(),
            status: s.status,
            input_text: s.input_text.clone(),
            script: s.script,
            tasks: s.tasks.clone(),
            created: s.created,
            updated: s.updated,
            predictions: s.predictions.clone(),
            corrections: s.corrections.clone(),
            current: s.resolve(),
        }
    }
}

pub struct Service {
    pub pipeline: Arc<Pipeline>,
    pub store: SessionStore,
    pub chat: ChatTable,
    pub leaderboard: Value,
    pub static_dir: Option<PathBuf>,
}

fn load_err(what: &str, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Internal(format!("loading {what}: {e}"))
}

/// Resources and models named by `config`; missing models come from the
/// quick demo recipes when `demo_models` is set.
pub fn build_pipeline(config: &Config) -> Result<Pipeline, ServiceError> {
    let mut p = Pipeline::empty();
    if let Some(path) = &config.resources.translit {
        p.table = ScriptTable::load(path).map_err(|e| load_err("transliteration table", e))?;
    }
    if let Some(path) = &config.resources.lexicon {
        p.lexicon = Lexicon::load(path).map_err(|e| load_err("lexicon", e))?;
    }
    if let Some(path) = &config.resources.rules {
        p.rules = RuleTable::load(path).map_err(|e| load_err("sandhi rules", e))?;
    }
    let m = &config.models;
    if let Some(path) = &m.segmenter {
        p.segmenter = Some(SegModel::load(path).map_err(|e| load_err("segmenter", e))?);
    }
    if let Some(path) = &m.tagger {
        p.tagger = Some(TagModel::load(path).map_err(|e| load_err("tagger", e))?);
    }
    if let Some(path) = &m.parser {
        p.parser = Some(ParseModel::load(path).map_err(|e| load_err("parser", e))?);
    }
    if let Some(path) = &m.compound {
        p.compound = Some(CompoundModel::load(path).map_err(|e| load_err("compound classifier", e))?);
    }
    if config.demo_models {
        let r = Recipes::quick(config.demo_seed);
        if p.segmenter.is_none() {
            p.segmenter = Some(demo::train_segmenter(&r.segmenter).map_err(|e| load_err("demo segmenter", e))?);
        }
        if p.tagger.is_none() {
            p.tagger = Some(demo::train_tagger(&r.tagger).map_err(|e| load_err("demo tagger", e))?);
        }
        if p.parser.is_none() {
            p.parser = Some(demo::train_parser(&r.parser).map_err(|e| load_err("demo parser", e))?);
        }
        if p.compound.is_none() {
            p.compound = Some(demo::train_compound(&r.compound).map_err(|e| load_err("demo compound classifier", e))?);
        }
    }
    Ok(p)
}

impl Service {
    pub fn new(pipeline: Pipeline, store: SessionStore) -> Self {
        Service {
            pipeline: Arc::new(pipeline),
            store,
            chat: ChatTable::builtin(),
            leaderboard: serde_json::from_str(BUILTIN_LEADERBOARD).expect("bundled leaderboard is valid"),
            static_dir: None,
        }
    }

    pub fn from_config(config: &Config) -> Result<Self, ServiceError> {
        let mut s = Service::new(build_pipeline(config)?, SessionStore::new(&config.data_dir)?);
        if let Some(path) = &config.chat_rules {
            s.chat = ChatTable::load(path).map_err(|e| load_err("chat rules", e))?;
        }
        if let Some(path) = &config.leaderboard {
            let text = std::fs::read_to_string(path)?;
            s.leaderboard = serde_json::from_str(&text).map_err(|e| load_err("leaderboard", e))?;
        }
        s.static_dir = config.static_dir.clone();
        Ok(s)
    }

    pub fn with_demo_models(models: DemoModels, store: SessionStore) -> Self {
        Service::new(Pipeline::with_models(models), store)
    }

    pub fn analyze(&self, req: &AnalyzeRequest) -> Result<SessionView, ServiceError> {
        let predictions = self.pipeline.analyze(&req.text, req.script, &req.tasks)?;
        let created = Event::Created {
            id: new_session_id(),
            at: Utc::now(),
            text: req.text.clone(),
            script: req.script,
            tasks: predictions.tasks.clone(),
            predictions,
        };
        let handle = self.store.create(created)?;
        let s = handle.lock().expect("session lock");
        Ok(SessionView::of(&s))
    }

    pub fn session(&self, id: &str) -> Result<SessionView, ServiceError> {
        let handle = self.store.get(id)?;
        let s = handle.lock().expect("session lock");
        Ok(SessionView::of(&s))
    }

    pub fn correct(&self, id: &str, req: CorrectionRequest) -> Result<SessionView, ServiceError> {
        let handle = self.store.get(id)?;
        let mut s = handle.lock().expect("session lock");
        if s.status == Status::Finalized {
            return Err(ServiceError::SessionFinalized(s.id.clone()));
        }
        let record = self.check(&s, req)?;
        self.store.append(&mut s, Event::Corrected { record })?;
        Ok(SessionView::of(&s))
    }

    pub fn finalize(&self, id: &str) -> Result<SessionView, ServiceError> {
        let handle = self.store.get(id)?;
        let mut s = handle.lock().expect("session lock");
        self.store.append(&mut s, Event::Finalized { at: Utc::now() })?;
        Ok(SessionView::of(&s))
    }

    pub fn export(&self, id: &str, format: &str) -> Result<(Format, String), ServiceError> {
        let format = Format::parse(format)?;
        let handle = self.store.get(id)?;
        let s = handle.lock().expect("session lock");
        Ok((format, export::export(&s, format)))
    }

    pub fn chat(&self, message: &str) -> ChatReply {
        self.chat.respond(message)
    }

    pub fn health(&self) -> Value {
        serde_json::json!({
            "status": "ok",
            "version": env!("CARGO_PKG_VERSION"),
            "models": self.pipeline.loaded(),
            "lexicon_entries": self.pipeline.lexicon.len(),
            "sandhi_rules": self.pipeline.rules.len(),
        })
    }

    /// Validates a correction against the session's current analysis.
    fn check(&self, s: &Session, req: CorrectionRequest) -> Result<CorrectionRecord, ServiceError> {
        let bad = |m: &str| Err(ServiceError::InvalidCorrection(m.to_string()));
        let current = s.resolve().analysis;
        let mut record = CorrectionRecord {
            correction: req.correction.clone(),
            note: req.note,
            at: Utc::now(),
            in_candidates: None,
            reanalysis: None,
        };
        if !s.tasks.contains(&record.correction.task()) {
            return Err(ServiceError::InvalidCorrection(format!("no {} prediction in this session", record.correction.task())));
        }
        match &req.correction {
            Correction::Segment { chunk, path } => {
                let Some(c) = current.chunks.get(*chunk) else { return bad("chunk out of range") };
                let Some(seg) = &c.segmentation else { return bad("chunk was not segmented") };
                if !seg.lattice.is_full_path(path) {
                    return bad("not a full lattice path");
                }
                if self.pipeline.rules.join_all(&seg.lattice.words(path)) != c.surface {
                    return bad("path does not re-join to the surface");
                }
                let mut paths = s.segment_paths();
                paths.insert(*chunk, path.clone());
                let re = self.pipeline.analyze_with_paths(&s.input_text, s.script, &s.tasks, &paths)?;
                record.reanalysis = Some(re);
            }
            Correction::Morph { token, tag, .. } => {
                let Some(m) = current.morph.as_ref().and_then(|m| m.get(*token)) else { return bad("token out of range") };
                if let Err(e) = tag.validate() {
                    return Err(ServiceError::InvalidCorrection(e.to_string()));
                }
                record.in_candidates = Some(m.candidates.contains(tag));
            }
            Correction::Parse { token, head, label } => {
                let Some(tree) = &current.tree else { return bad("no PARSE prediction in this session") };
                if *token >= tree.heads.len() {
                    return bad("token out of range");
                }
                if head.is_none() && label.is_none() {
                    return bad("nothing to change");
                }
                if let Some(l) = label {
                    let known = self.pipeline.parser.as_ref().is_none_or(|p| p.labels().index(l).is_some());
                    if !known {
                        return Err(ServiceError::InvalidCorrection(format!("unknown label {l:?}")));
                    }
                }
                if let Some(h) = head {
                    let mut heads = tree.heads.clone();
                    heads[*token] = *h;
                    if let Some(problem) = tree_problem(&heads) {
                        return bad(problem);
                    }
                }
            }
            Correction::Compound { token, label } => {
                let found = current.compounds.iter().flatten().any(|c| c.token == *token);
                if !found {
                    return bad("no compound at that token");
                }
                let known = self.pipeline.compound.as_ref().is_none_or(|m| m.classes().contains(label));
                if !known {
                    return Err(ServiceError::InvalidCorrection(format!("unknown compound class {label:?}")));
                }
            }
        }
        Ok(record)
    }
}
