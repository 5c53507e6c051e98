//! External sandhi: joining two words at a junction and enumerating the
//! splits that could have produced a surface junction.
//!
//! Rules come from a TSV table (`id, left_final, right_initial, surface`).
//! Priority is file order: when joining, the first rule whose left pattern
//! is a suffix of the left word and whose right pattern is a prefix of the
//! right word fires. When no rule matches the words are concatenated.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{Phoneme, PhonemeString, TextError};

const BUILTIN_RULES: &str = include_str!("../data/sandhi_rules.tsv");

/// Longest left or right pattern a rule may carry.
pub const MAX_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SandhiError {
    #[error("rule table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("junction {junction} out of range for surface of length {len}")]
    IndexOutOfRange { junction: usize, len: usize },
    #[error(transparent)]
    Text(#[from] TextError),
}

/// Index of a rule within its table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleRef(pub u16);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SandhiRule {
    pub id: String,
    pub left_final: PhonemeString,
    pub right_initial: PhonemeString,
    pub surface: PhonemeString,
}

impl fmt::Display for SandhiRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}+{} -> {}", self.id, self.left_final, self.right_initial, self.surface)
    }
}

/// One way of undoing sandhi at a junction of a surface string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SplitCandidate {
    pub left: PhonemeString,
    pub right: PhonemeString,
    /// `None` for plain concatenation.
    pub rule: Option<RuleRef>,
    pub junction: usize,
}

#[derive(Debug, Clone)]
pub struct RuleTable {
    rules: Vec<SandhiRule>,
}

impl RuleTable {
    pub fn builtin() -> &'static RuleTable {
        static TABLE: OnceLock<RuleTable> = OnceLock::new();
        TABLE.get_or_init(|| RuleTable::parse(BUILTIN_RULES).expect("bundled rules are valid"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SandhiError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| SandhiError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SandhiError> {
        let mut rules = Vec::new();
        let mut ids = HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |message: String| SandhiError::Parse { line, message };
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let field = |s: &str| -> Result<PhonemeString, SandhiError> {
                if s == "-" {
                    Ok(PhonemeString::new())
                } else {
                    PhonemeString::from_slp1(s).map_err(|e| err(e.to_string()))
                }
            };
            let rule = SandhiRule {
                id: cols[0].to_string(),
                left_final: field(cols[1])?,
                right_initial: field(cols[2])?,
                surface: field(cols[3])?,
            };
            if rule.id.is_empty() || !ids.insert(rule.id.clone()) {
                return Err(err(format!("duplicate or empty rule id {:?}", rule.id)));
            }
            if rule.left_final.is_empty() && rule.right_initial.is_empty() {
                return Err(err("left_final and right_initial are both empty".into()));
            }
            if rule.left_final.len() > MAX_WINDOW || rule.right_initial.len() > MAX_WINDOW {
                return Err(err(format!("pattern longer than {MAX_WINDOW} phonemes")));
            }
            rules.push(rule);
        }
        if rules.len() > u16::MAX as usize {
            return Err(SandhiError::Parse { line: 0, message: "too many rules".into() });
        }
        Ok(RuleTable { rules })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, r: RuleRef) -> &SandhiRule {
        &self.rules[r.0 as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (RuleRef, &SandhiRule)> {
        self.rules.iter().enumerate().map(|(i, r)| (RuleRef(i as u16), r))
    }

    pub fn find(&self, id: &str) -> Option<RuleRef> {
        self.rules.iter().position(|r| r.id == id).map(|i| RuleRef(i as u16))
    }

    pub fn id_of(&self, r: Option<RuleRef>) -> Option<&str> {
        r.map(|r| self.get(r).id.as_str())
    }

    /// The rule that fires between `left` and `right`, if any. Joining with
    /// an empty operand never fires a rule.
    pub fn select(&self, left: &[Phoneme], right: &[Phoneme]) -> Option<RuleRef> {
        if left.is_empty() || right.is_empty() {
            return None;
        }
        self.rules
            .iter()
            .position(|r| left.ends_with(r.left_final.phonemes()) && right.starts_with(r.right_initial.phonemes()))
            .map(|i| RuleRef(i as u16))
    }

    /// Rewrites the junction of `left` and `right` with `rule`, or
    /// concatenates when `rule` is `None`. The caller guarantees the patterns match.
    pub fn join_with(&self, left: &[Phoneme], right: &[Phoneme], rule: Option<RuleRef>) -> PhonemeString {
        match rule {
            None => PhonemeString::concat(&[left, right]),
            Some(r) => {
                let r = self.get(r);
                let keep = left.len() - r.left_final.len();
                PhonemeString::concat(&[&left[..keep], r.surface.phonemes(), &right[r.right_initial.len()..]])
            }
        }
    }

    /// Surface form of `left` followed by `right`.
    pub fn apply_join(&self, left: &PhonemeString, right: &PhonemeString) -> PhonemeString {
        let rule = self.select(left.phonemes(), right.phonemes());
        self.join_with(left.phonemes(), right.phonemes(), rule)
    }

    /// Joins a word sequence left to right; each junction sees the surface
    /// accumulated so far.
    pub fn join_all<'a>(&self, words: impl IntoIterator<Item = &'a PhonemeString>) -> PhonemeString {
        let mut acc = PhonemeString::new();
        for w in words {
            acc = self.apply_join(&acc, w);
        }
        acc
    }

    /// All splits of `surface` whose rewritten window starts at `junction`.
    ///
    /// Candidates come in canonical order: the plain split first, then rule
    /// splits in table order. Each candidate re-joins to `surface` under the
    /// table's priority, so a rule split is only emitted when that rule is the
    /// one `apply_join` would pick for the reconstructed pair.
    pub fn split_candidates(&self, surface: &PhonemeString, junction: usize) -> Result<Vec<SplitCandidate>, SandhiError> {
        let s = surface.phonemes();
        if junction == 0 || junction > s.len() {
            return Err(SandhiError::IndexOutOfRange { junction, len: s.len() });
        }
        let mut out = Vec::new();
        let (head, tail) = s.split_at(junction);
        if self.select(head, tail).is_none() {
            out.push(SplitCandidate {
                left: head.into(),
                right: tail.into(),
                rule: None,
                junction,
            });
        }
        for (r, rule) in self.iter() {
            if !tail.starts_with(rule.surface.phonemes()) {
                continue;
            }
            let left = PhonemeString::concat(&[head, rule.left_final.phonemes()]);
            let right = PhonemeString::concat(&[rule.right_initial.phonemes(), &tail[rule.surface.len()..]]);
            if self.select(left.phonemes(), right.phonemes()) == Some(r) {
                out.push(SplitCandidate {
                    left,
                    right,
                    rule: Some(r),
                    junction,
                });
            }
        }
        Ok(out)
    }
}
