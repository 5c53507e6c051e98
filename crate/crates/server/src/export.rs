//! Session export. Corrections in effect replace the predictions they touch.

use serde::Serialize;
use serde_json::Value;

use shala_core::conllu;
use shala_core::lexicon::MorphTag;
use shala_core::text::{PhonemeString, ScriptTable};

use crate::error::ServiceError;
use crate::session::{Correction, Session, Status, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Conllu,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Format, ServiceError> {
        match s.to_ascii_lowercase().as_str() {
            "conllu" => Ok(Format::Conllu),
            "json" => Ok(Format::Json),
            _ => Err(ServiceError::FormatUnsupported(s.to_string())),
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            Format::Conllu => "text/plain; charset=utf-8",
            Format::Json => "application/json",
        }
    }
}

pub fn export(session: &Session, format: Format) -> String {
    match format {
        Format::Conllu => to_conllu(session),
        Format::Json => serde_json::to_string_pretty(&to_json(session)).expect("serializable") + "\n",
    }
}

/// One sentence; compounds go to MISC as `Compound=CLASS|Constituents=a+b`.
pub fn to_conllu(session: &Session) -> String {
    let a = session.resolve().analysis;
    let text: Vec<&str> = session.input_text.split_whitespace().collect();
    let comments = vec![format!(" sent_id = {}", session.id), format!(" text = {}", text.join(" "))];
    let lemmas: Option<Vec<PhonemeString>> = a.morph.as_ref().map(|m| m.iter().map(|r| r.lemma.clone()).collect());
    let tags: Option<Vec<Option<MorphTag>>> = a.morph.as_ref().map(|m| m.iter().map(|r| Some(r.tag)).collect());
    let mut sentence = conllu::build_sentence(
        comments,
        session.script,
        &a.tokens,
        lemmas.as_deref(),
        tags.as_deref(),
        a.tree.as_ref().map(|t| (t.heads.as_slice(), t.labels.as_slice())),
    );
    let table = ScriptTable::builtin();
    for c in a.compounds.iter().flatten() {
        let parts: Vec<String> = c.constituents.iter().map(|p| table.render(p, session.script)).collect();
        sentence.tokens[c.token].cols[9] = format!("Compound={}|Constituents={}", c.label, parts.join("+"));
    }
    conllu::write(&[sentence])
}

#[derive(Serialize)]
struct TokenOut {
    id: usize,
    form: String,
    slp1: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lemma: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag: Option<MorphTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    in_candidates: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    head: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deprel: Option<String>,
    corrected: Vec<&'static str>,
}

pub fn to_json(session: &Session) -> Value {
    let resolved = session.resolve();
    let a = &resolved.analysis;
    let table = ScriptTable::builtin();
    let render = |p: &PhonemeString| table.render(p, session.script);

    let mut corrected: Vec<Vec<&'static str>> = vec![Vec::new(); a.tokens.len()];
    let mut corrected_chunks = Vec::new();
    for &i in &resolved.applied {
        match &session.corrections[i].correction {
            Correction::Segment { chunk, .. } => corrected_chunks.push(*chunk),
            Correction::Morph { token, .. } => corrected[*token].push("MORPH"),
            Correction::Parse { token, .. } => corrected[*token].push("PARSE"),
            Correction::Compound { token, .. } => corrected[*token].push("COMPOUND"),
        }
    }
    for (k, c) in a.chunks.iter().enumerate() {
        if corrected_chunks.contains(&k) {
            for flags in &mut corrected[c.first_token..c.first_token + c.words.len()] {
                flags.push("SEGMENT");
            }
        }
    }
    for c in corrected.iter_mut() {
        c.sort_unstable();
        c.dedup();
    }

    let tokens: Vec<TokenOut> = a
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let m = a.morph.as_ref().map(|m| &m[i]);
            TokenOut {
                id: i + 1,
                form: render(t),
                slp1: t.as_slp1(),
                lemma: m.map(|m| render(&m.lemma)),
                tag: m.map(|m| m.tag),
                in_candidates: m.map(|m| m.in_candidates),
                head: a.tree.as_ref().map(|tr| tr.heads[i]),
                deprel: a.tree.as_ref().map(|tr| tr.labels[i].clone()),
                corrected: std::mem::take(&mut corrected[i]),
            }
        })
        .collect();
    let chunks: Vec<Value> = a
        .chunks
        .iter()
        .enumerate()
        .map(|(k, c)| {
            serde_json::json!({
                "surface": render(&c.surface),
                "words": c.words.iter().map(render).collect::<Vec<_>>(),
                "segmented": c.segmentation.is_some(),
                "corrected": corrected_chunks.contains(&k),
            })
        })
        .collect();
    let compounds: Option<Vec<Value>> = a.compounds.as_ref().map(|cs| {
        cs.iter()
            .map(|c| {
                serde_json::json!({
                    "token": c.token,
                    "constituents": c.constituents.iter().map(render).collect::<Vec<_>>(),
                    "label": c.label,
                })
            })
            .collect()
    });
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "id": session.id,
        "status": session.status,
        "finalized": session.status == Status::Finalized,
        "text": session.input_text,
        "script": session.script,
        "tasks": session.tasks,
        "created": session.created,
        "updated": session.updated,
        "chunks": chunks,
        "tokens": tokens,
        "compounds": compounds,
        "corrections": session.corrections.len(),
        "superseded_corrections": resolved.superseded,
    })
}
