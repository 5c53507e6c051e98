//! Static word embeddings: a skip-gram trainer with negative sampling, the
//! plain-text vector file format and intrinsic evaluations.

mod eval;
mod skipgram;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::ml::MlError;

pub use eval::{
    analogy_answer, average_ranks, cosine, eval_analogy, eval_categorization, eval_pair_scores, eval_synonym, evaluate, kmeans, spearman, Inventory, Item, Task,
    TaskReport,
};
pub use skipgram::{train_skipgram, SkipGram, SkipGramConfig, SkipGramExample};

#[derive(Debug, Error)]
pub enum EmbError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("inventory holds {found} items, expected {expected}")]
    TaskMismatch { expected: Task, found: Task },
    #[error("need at least 2 in-vocabulary pairs, found {0}")]
    InsufficientPairs(usize),
    #[error("need at least 2 categories with in-vocabulary words, found {0}")]
    InsufficientCategories(usize),
    #[error("scores are constant; rank correlation is undefined")]
    ConstantScores,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense |V|×d matrix with a word index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    dim: usize,
    values: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(words: Vec<String>, dim: usize, values: Vec<f64>) -> Result<Self, EmbError> {
        if values.len() != words.len() * dim {
            return Err(EmbError::InvalidConfig(format!("{} values for {}×{}", values.len(), words.len(), dim)));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbError::InvalidConfig("non-finite vector value".into()));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(EmbError::InvalidConfig(format!("duplicate word {w:?}")));
            }
        }
        Ok(EmbeddingTable { words, dim, values, index })
    }

    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self, EmbError> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        if rows.iter().any(|r| r.1.len() != dim) {
            return Err(EmbError::InvalidConfig("rows differ in dimension".into()));
        }
        let (words, vecs): (Vec<String>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        Self::new(words, dim, vecs.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index_of(word).map(|i| self.row(i))
    }

    /// `|V| d` header, then one `word v1 … vd` line per word.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            s.push_str(w);
            for v in self.row(i) {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, EmbError> {
        let err = |line: usize, message: &str| EmbError::Parse {
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let mut h = header.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(n)), Some(Ok(dim)), None) = (h.next(), h.next(), h.next()) else {
            return Err(err(1, "header must be `count dim`"));
        };
        let mut words = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n * dim);
        for (k, line) in lines {
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            let row: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|_| err(k + 1, "bad number")))
                .collect::<Result<_, _>>()?;
            if row.len() != dim {
                return Err(err(k + 1, "wrong number of values"));
            }
            words.push(word.to_string());
            values.extend(row);
        }
        if words.len() != n {
            return Err(err(0, "word count does not match the header"));
        }
        Self::new(words, dim, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbError> {
        Ok(std::fs::write(path, self.to_text())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let t = EmbeddingTable::from_rows(vec![("a".into(), vec![0.1, -2.5e-7]), ("b".into(), vec![1.0 / 3.0, 0.0])]).unwrap();
        let text = t.to_text();
        assert!(text.starts_with("2 2\n"));
        let back = EmbeddingTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get("b"), Some(&[1.0 / 3.0, 0.0][..]));
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(EmbeddingTable::parse("").is_err());
        assert!(EmbeddingTable::parse("1 2\na 1\n").is_err());
        assert!(EmbeddingTable::parse("2 1\na 1\n").is_err());
        assert!(EmbeddingTable::parse("1 1\na NaN\n").is_err());
        assert!(EmbeddingTable::from_rows(vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]).is_err());
    }
}
