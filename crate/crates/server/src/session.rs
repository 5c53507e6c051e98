//! Annotation sessions as a fold over their event log.
//!
//! A session never loses its original predictions. Corrections are stored
//! next to them and `resolve` overlays the ones still in effect: a SEGMENT
//! correction carries a fresh downstream analysis over the corrected split,
//! which supersedes every earlier MORPH, PARSE or COMPOUND correction.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use shala_core::lexicon::MorphTag;
use shala_core::pipeline::{Analysis, TaskKind};
use shala_core::text::{PhonemeString, Script};

use crate::error::ServiceError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Open,
    Finalized,
}

/// A user override. Token indices are 0-based; `head` uses CoNLL-U
/// numbering (0 is the root, otherwise the 1-based token id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "UPPERCASE")]
pub enum Correction {
    Segment {
        chunk: usize,
        path: Vec<usize>,
    },
    Morph {
        token: usize,
        tag: MorphTag,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lemma: Option<PhonemeString>,
    },
    Parse {
        token: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        head: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Compound {
        token: usize,
        label: String,
    },
}

impl Correction {
    pub fn task(&self) -> TaskKind {
        match self {
            Correction::Segment { .. } => TaskKind::Segment,
            Correction::Morph { .. } => TaskKind::Morph,
            Correction::Parse { .. } => TaskKind::Parse,
            Correction::Compound { .. } => TaskKind::Compound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    #[serde(flatten)]
    pub correction: Correction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub at: DateTime<Utc>,
    /// MORPH only: whether the new tag is in the token's candidate set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_candidates: Option<bool>,
    /// SEGMENT only: the requested tasks re-run over the corrected split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reanalysis: Option<Analysis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "UPPERCASE")]
pub enum Event {
    Created {
        id: String,
        at: DateTime<Utc>,
        text: String,
        script: Script,
        tasks: Vec<TaskKind>,
        predictions: Analysis,
    },
    Corrected {
        record: CorrectionRecord,
    },
    Finalized {
        at: DateTime<Utc>,
    },
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    pub seq: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub input_text: String,
    pub script: Script,
    pub tasks: Vec<TaskKind>,
    pub predictions: Analysis,
    pub corrections: Vec<CorrectionRecord>,
    pub status: Status,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    /// Number of events folded so far.
    pub events: u64,
}

/// The analysis with the corrections in effect applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub analysis: Analysis,
    /// Indices into `corrections` that shape `analysis`.
    pub applied: Vec<usize>,
    /// Indices overridden by a later SEGMENT correction.
    pub superseded: Vec<usize>,
}

impl Session {
    pub fn from_created(event: &Event) -> Result<Session, ServiceError> {
        let Event::Created {
            id,
            at,
            text,
            script,
            tasks,
            predictions,
        } = event
        else {
            return Err(ServiceError::Internal("a session log must start with CREATED".into()));
        };
        Ok(Session {
            id: id.clone(),
            input_text: text.clone(),
            script: *script,
            tasks: tasks.clone(),
            predictions: predictions.clone(),
            corrections: Vec::new(),
            status: Status::Open,
            created: *at,
            updated: *at,
            events: 1,
        })
    }

    /// Folds one event in. Events on a finalized session are refused.
    pub fn apply(&mut self, event: &Event) -> Result<(), ServiceError> {
        if self.status == Status::Finalized {
            return Err(ServiceError::SessionFinalized(self.id.clone()));
        }
        match event {
            Event::Created { .. } => return Err(ServiceError::Internal("duplicate CREATED event".into())),
            Event::Corrected { record } => {
                self.updated = record.at;
                self.corrections.push(record.clone());
            }
            Event::Finalized { at } => {
                self.updated = *at;
                self.status = Status::Finalized;
            }
        }
        self.events += 1;
        Ok(())
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Session, ServiceError> {
        let mut it = events.into_iter();
        let first = it.next().ok_or_else(|| ServiceError::Internal("empty session log".into()))?;
        let mut s = Session::from_created(first)?;
        for e in it {
            s.apply(e)?;
        }
        Ok(s)
    }

    /// Lattice paths chosen by SEGMENT corrections, latest per chunk.
    pub fn segment_paths(&self) -> std::collections::BTreeMap<usize, Vec<usize>> {
        self.corrections
            .iter()
            .filter_map(|r| match &r.correction {
                Correction::Segment { chunk, path } => Some((*chunk, path.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn resolve(&self) -> Resolved {
        let last_segment = self.corrections.iter().rposition(|r| r.reanalysis.is_some());
        let mut analysis = match last_segment {
            Some(i) => self.corrections[i].reanalysis.clone().expect("checked"),
            None => self.predictions.clone(),
        };
        let start = last_segment.map_or(0, |i| i + 1);
        let mut applied: Vec<usize> = (0..self.corrections.len())
            .filter(|&i| matches!(self.corrections[i].correction, Correction::Segment { .. }))
            .collect();
        let superseded: Vec<usize> = (0..start).filter(|i| !applied.contains(i)).collect();
        for (i, r) in self.corrections.iter().enumerate().skip(start) {
            if overlay(&mut analysis, r) {
                applied.push(i);
            }
        }
        applied.sort_unstable();
        Resolved {
            analysis,
            applied,
            superseded,
        }
    }
}

/// Applies a non-SEGMENT correction; false when it no longer fits.
fn overlay(a: &mut Analysis, r: &CorrectionRecord) -> bool {
    match &r.correction {
        Correction::Segment { .. } => false,
        Correction::Morph { token, tag, lemma } => {
            let Some(m) = a.morph.as_mut().and_then(|m| m.get_mut(*token)) else { return false };
            m.tag = *tag;
            m.in_candidates = r.in_candidates.unwrap_or_else(|| m.candidates.contains(tag));
            if let Some(l) = lemma {
                m.lemma = l.clone();
            }
            true
        }
        Correction::Parse { token, head, label } => {
            let Some(t) = a.tree.as_mut() else { return false };
            if *token >= t.heads.len() {
                return false;
            }
            if let Some(h) = head {
                t.heads[*token] = *h;
            }
            if let Some(l) = label {
                t.labels[*token] = l.clone();
            }
            true
        }
        Correction::Compound { token, label } => {
            let Some(c) = a.compounds.as_mut().and_then(|cs| cs.iter_mut().find(|c| c.token == *token)) else {
                return false;
            };
            c.label = label.clone();
            true
        }
    }
}

/// Why `heads` is not a single-root arborescence, if it is not.
pub fn tree_problem(heads: &[usize]) -> Option<&'static str> {
    let n = heads.len();
    if heads.iter().any(|&h| h > n) {
        return Some("head out of range");
    }
    for start in 0..n {
        let mut seen = vec![false; n];
        let mut cur = start;
        loop {
            if seen[cur] {
                return Some("cycle");
            }
            seen[cur] = true;
            match heads[cur] {
                0 => break,
                h => cur = h - 1,
            }
        }
    }
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return Some("tree must have exactly one root");
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_problems() {
        assert_eq!(tree_problem(&[2, 0, 2]), None);
        assert_eq!(tree_problem(&[2, 1, 0]), Some("cycle"));
        assert_eq!(tree_problem(&[1]), Some("cycle"));
        assert_eq!(tree_problem(&[0, 0]), Some("tree must have exactly one root"));
        assert_eq!(tree_problem(&[3, 0]), Some("head out of range"));
    }

    #[test]
    fn corrections_serialize_flat() {
        let c = Correction::Parse {
            token: 1,
            head: Some(0),
            label: None,
        };
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v, serde_json::json!({"task": "PARSE", "token": 1, "head": 0}));
        let back: Correction = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
        let m: Correction = serde_json::from_str(r#"{"task":"MORPH","token":0,"tag":"NOUN,NOM,SG,M"}"#).unwrap();
        assert_eq!(m.task(), TaskKind::Morph);
    }
}
