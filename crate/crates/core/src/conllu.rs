//! CoNLL-U reading and writing.
//!
//! Sentences keep their comment lines and all ten columns verbatim, so a
//! parse followed by a write reproduces the input byte for byte when the
//! input is in canonical form (LF line ends, one blank line after every
//! sentence). Typed views interpret FORM and LEMMA in the script named by a
//! `# script = NAME` comment, SLP1 by default.

use std::fmt::Write as _;

use thiserror::Error;

use crate::lexicon::MorphTag;
use crate::text::{PhonemeString, Script, ScriptTable};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConlluError {
    #[error("CoNLL-U line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence}, token {token}: {message}")]
    Field { sentence: usize, token: usize, message: String },
}

pub const COLUMNS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub cols: [String; COLUMNS],
}

impl Token {
    pub fn new(cols: [String; COLUMNS]) -> Self {
        Token { cols }
    }

    pub fn id(&self) -> &str {
        &self.cols[0]
    }
    pub fn form(&self) -> &str {
        &self.cols[1]
    }
    pub fn lemma(&self) -> &str {
        &self.cols[2]
    }
    pub fn xpos(&self) -> &str {
        &self.cols[4]
    }
    pub fn head(&self) -> &str {
        &self.cols[6]
    }
    pub fn deprel(&self) -> &str {
        &self.cols[7]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    /// Comment lines without the leading `#`.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Value of a `# key = value` comment.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.comments.iter().find_map(|c| {
            let (k, v) = c.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }

    pub fn script(&self) -> Result<Script, ConlluError> {
        match self.meta("script") {
            None => Ok(Script::Slp1),
            Some(s) => s.parse().map_err(|e: crate::text::TextError| ConlluError::Field {
                sentence: 0,
                token: 0,
                message: e.to_string(),
            }),
        }
    }
}

pub fn parse(text: &str) -> Result<Vec<Sentence>, ConlluError> {
    let mut out = Vec::new();
    let mut cur = Sentence::default();
    for (n, line) in text.split('\n').enumerate() {
        let line_no = n + 1;
        if line.is_empty() {
            if !cur.tokens.is_empty() {
                out.push(std::mem::take(&mut cur));
            } else if !cur.comments.is_empty() {
                return Err(ConlluError::Parse {
                    line: line_no,
                    message: "comments without tokens".into(),
                });
            }
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if !cur.tokens.is_empty() {
                return Err(ConlluError::Parse {
                    line: line_no,
                    message: "comment inside a sentence".into(),
                });
            }
            cur.comments.push(c.to_string());
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let cols: [String; COLUMNS] = cols
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|_| ConlluError::Parse {
                line: line_no,
                message: format!("expected {COLUMNS} columns, found {}", cols.len()),
            })?;
        if cols.iter().any(|c| c.is_empty()) {
            return Err(ConlluError::Parse {
                line: line_no,
                message: "empty column".into(),
            });
        }
        cur.tokens.push(Token { cols });
    }
    if !cur.tokens.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn write(sentences: &[Sentence]) -> String {
    let mut s = String::new();
    for sent in sentences {
        for c in &sent.comments {
            let _ = writeln!(s, "#{c}");
        }
        for t in &sent.tokens {
            s.push_str(&t.cols.join("\t"));
            s.push('\n');
        }
        s.push('\n');
    }
    s
}

/// Tokens with gold tags and lemmas, for the tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSentence {
    pub forms: Vec<PhonemeString>,
    pub tags: Vec<MorphTag>,
    pub lemmas: Vec<PhonemeString>,
}

/// Tokens with tags (when given) and a labeled tree, for the parser.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSentence {
    pub forms: Vec<PhonemeString>,
    pub tags: Vec<Option<MorphTag>>,
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

fn field_err(sentence: usize, token: usize, message: impl Into<String>) -> ConlluError {
    ConlluError::Field {
        sentence,
        token,
        message: message.into(),
    }
}

fn check_ids(k: usize, sent: &Sentence) -> Result<(), ConlluError> {
    for (i, t) in sent.tokens.iter().enumerate() {
        if t.id() != (i + 1).to_string() {
            return Err(field_err(k, i + 1, format!("expected ID {}, found {}", i + 1, t.id())));
        }
    }
    Ok(())
}

fn forms(k: usize, sent: &Sentence, table: &ScriptTable, col: usize) -> Result<Vec<PhonemeString>, ConlluError> {
    let script = sent.script().map_err(|_| field_err(k, 0, "bad script comment"))?;
    sent.tokens
        .iter()
        .enumerate()
        .map(|(i, t)| table.to_phonemes(&t.cols[col], script).map_err(|e| field_err(k, i + 1, e.to_string())))
        .collect()
}

pub fn tagged(sentences: &[Sentence]) -> Result<Vec<TaggedSentence>, ConlluError> {
    let table = ScriptTable::builtin();
    sentences
        .iter()
        .enumerate()
        .map(|(k, s)| {
            check_ids(k, s)?;
            let tags = s
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| t.xpos().parse::<MorphTag>().map_err(|e| field_err(k, i + 1, e.to_string())))
                .collect::<Result<_, _>>()?;
            Ok(TaggedSentence {
                forms: forms(k, s, table, 1)?,
                lemmas: forms(k, s, table, 2)?,
                tags,
            })
        })
        .collect()
}

pub fn trees(sentences: &[Sentence]) -> Result<Vec<TreeSentence>, ConlluError> {
    let table = ScriptTable::builtin();
    sentences
        .iter()
        .enumerate()
        .map(|(k, s)| {
            check_ids(k, s)?;
            let n = s.tokens.len();
            let mut tags = Vec::with_capacity(n);
            let mut heads = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (i, t) in s.tokens.iter().enumerate() {
                tags.push(match t.xpos() {
                    "_" => None,
                    x => Some(x.parse::<MorphTag>().map_err(|e| field_err(k, i + 1, e.to_string()))?),
                });
                let h: usize = t.head().parse().map_err(|_| field_err(k, i + 1, "HEAD is not a number"))?;
                if h > n {
                    return Err(field_err(k, i + 1, "HEAD out of range"));
                }
                heads.push(h);
                if t.deprel() == "_" {
                    return Err(field_err(k, i + 1, "missing DEPREL"));
                }
                labels.push(t.deprel().to_string());
            }
            Ok(TreeSentence {
                forms: forms(k, s, table, 1)?,
                tags,
                heads,
                labels,
            })
        })
        .collect()
}

/// Renders one analyzed sentence; absent fields are written as `_`.
pub fn build_sentence(
    comments: Vec<String>,
    script: Script,
    forms: &[PhonemeString],
    lemmas: Option<&[PhonemeString]>,
    tags: Option<&[Option<MorphTag>]>,
    tree: Option<(&[usize], &[String])>,
) -> Sentence {
    let table = ScriptTable::builtin();
    let mut comments = comments;
    if script != Script::Slp1 && !comments.iter().any(|c| c.trim_start().starts_with("script")) {
        comments.push(format!(" script = {}", script.name()));
    }
    let tokens = forms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let u = || "_".to_string();
            Token {
                cols: [
                    (i + 1).to_string(),
                    table.render(f, script),
                    lemmas.map_or_else(u, |l| table.render(&l[i], script)),
                    u(),
                    tags.and_then(|t| t[i]).map_or_else(u, |t| t.to_string()),
                    u(),
                    tree.map_or_else(u, |(h, _)| h[i].to_string()),
                    tree.map_or_else(u, |(_, l)| l[i].clone()),
                    u(),
                    u(),
                ],
            }
        })
        .collect();
    Sentence { comments, tokens }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "# sent_id = 1\n# text = dAsaH Bava\n1\tdAsaH\tdAsa\t_\tNOUN,NOM,SG,M\t_\t2\tkarta\t_\t_\n2\tBava\tBU\t_\tVERB,SG,2,IMPV\t_\t0\troot\t_\t_\n\n";

    #[test]
    fn round_trip_is_identical() {
        let s = parse(DOC).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].meta("sent_id"), Some("1"));
        assert_eq!(write(&s), DOC);
    }

    #[test]
    fn typed_views() {
        let s = parse(DOC).unwrap();
        let t = trees(&s).unwrap();
        assert_eq!(t[0].heads, vec![2, 0]);
        assert_eq!(t[0].labels, vec!["karta", "root"]);
        let g = tagged(&s).unwrap();
        assert_eq!(g[0].lemmas[1].as_slp1(), "BU");
        assert_eq!(g[0].tags[0].to_string(), "NOUN,NOM,SG,M");
    }

    #[test]
    fn script_comment_controls_forms() {
        let doc = "# script = IAST\n1\tdāsaḥ\tdāsa\t_\t_\t_\t0\troot\t_\t_\n\n";
        let t = trees(&parse(doc).unwrap()).unwrap();
        assert_eq!(t[0].forms[0].as_slp1(), "dAsaH");
        assert_eq!(t[0].tags, vec![None]);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(parse("1\tx\n"), Err(ConlluError::Parse { line: 1, .. })));
        let bad_head = "1\ta\ta\t_\t_\t_\t5\troot\t_\t_\n\n";
        assert!(trees(&parse(bad_head).unwrap()).is_err());
        let bad_id = "2\ta\ta\t_\t_\t_\t0\troot\t_\t_\n\n";
        assert!(trees(&parse(bad_id).unwrap()).is_err());
    }

    #[test]
    fn built_sentence_round_trips() {
        let forms = vec![PhonemeString::from_slp1("dAsaH").unwrap(), PhonemeString::from_slp1("Bava").unwrap()];
        let heads = vec![2, 0];
        let labels = vec!["karta".to_string(), "root".to_string()];
        let s = build_sentence(vec![" sent_id = x".into()], Script::Iast, &forms, None, None, Some((&heads, &labels)));
        let text = write(&[s]);
        assert!(text.contains("# script = IAST"));
        assert_eq!(write(&parse(&text).unwrap()), text);
        assert_eq!(trees(&parse(&text).unwrap()).unwrap()[0].forms, forms);
    }
}
