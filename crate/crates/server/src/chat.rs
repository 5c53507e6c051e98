//! Rule-based help bot: the first rule in file order with a matching
//! pattern answers; otherwise the fallback does.

use std::path::Path;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUILTIN_RULES: &str = include_str!("../data/chat_rules.json");

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("rule {0}: no patterns")]
    NoPatterns(String),
    #[error("rule {rule}: bad pattern {pattern:?}: {message}")]
    BadPattern { rule: String, pattern: String, message: String },
    #[error("chat rules: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRule {
    pub id: String,
    /// Case-insensitive regular expressions; a plain keyword works as one.
    pub patterns: Vec<String>,
    pub response: String,
    #[serde(default)]
    pub links: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RuleFile {
    fallback: String,
    rules: Vec<ChatRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatReply {
    /// Id of the rule that answered; absent for the fallback.
    pub rule: Option<String>,
    pub response: String,
    pub links: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ChatTable {
    rules: Vec<(ChatRule, Vec<Regex>)>,
    fallback: String,
}

impl ChatTable {
    pub fn new(rules: Vec<ChatRule>, fallback: String) -> Result<Self, ChatError> {
        let compiled = rules
            .into_iter()
            .map(|r| {
                if r.patterns.is_empty() {
                    return Err(ChatError::NoPatterns(r.id.clone()));
                }
                let res = r
                    .patterns
                    .iter()
                    .map(|p| {
                        RegexBuilder::new(p).case_insensitive(true).build().map_err(|e| ChatError::BadPattern {
                            rule: r.id.clone(),
                            pattern: p.clone(),
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((r, res))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ChatTable {
            rules: compiled,
            fallback,
        })
    }

    pub fn parse(json: &str) -> Result<Self, ChatError> {
        let f: RuleFile = serde_json::from_str(json).map_err(|e| ChatError::Format(e.to_string()))?;
        Self::new(f.rules, f.fallback)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ChatError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_RULES).expect("bundled chat rules are valid")
    }

    pub fn rules(&self) -> impl Iterator<Item = &ChatRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    pub fn respond(&self, message: &str) -> ChatReply {
        if !message.trim().is_empty() {
            for (rule, res) in &self.rules {
                if res.iter().any(|re| re.is_match(message)) {
                    return ChatReply {
                        rule: Some(rule.id.clone()),
                        response: rule.response.clone(),
                        links: rule.links.clone(),
                    };
                }
            }
        }
        ChatReply {
            rule: None,
            response: self.fallback.clone(),
            links: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(id: &str, pats: &[&str]) -> ChatRule {
        ChatRule {
            id: id.into(),
            patterns: pats.iter().map(|p| p.to_string()).collect(),
            response: format!("{id} answer"),
            links: vec![],
        }
    }

    #[test]
    fn first_match_wins() {
        let t = ChatTable::new(vec![rule("seg", &["segment"]), rule("any", &["verse", "segment"])], "sorry".into()).unwrap();
        let r = t.respond("How do I segment a verse?");
        assert_eq!(r.rule.as_deref(), Some("seg"));
        assert_eq!(t.respond("a VERSE").rule.as_deref(), Some("any"));
    }

    #[test]
    fn empty_and_unmatched_fall_back() {
        let t = ChatTable::new(vec![rule("x", &[".*"])], "sorry".into()).unwrap();
        assert_eq!(t.respond("   ").response, "sorry");
        assert_eq!(t.respond("").rule, None);
        let t = ChatTable::new(vec![rule("seg", &["segment"])], "sorry".into()).unwrap();
        assert_eq!(t.respond("hello").response, "sorry");
    }

    #[test]
    fn rules_need_patterns() {
        assert!(matches!(ChatTable::new(vec![rule("e", &[])], "f".into()), Err(ChatError::NoPatterns(_))));
        assert!(matches!(ChatTable::new(vec![rule("b", &["("])], "f".into()), Err(ChatError::BadPattern { .. })));
    }

    #[test]
    fn builtin_table_loads() {
        let t = ChatTable::builtin();
        assert!(t.rules().count() > 3);
        assert!(t.respond("how to export my annotations").rule.is_some());
    }
}
