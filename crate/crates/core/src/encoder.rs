//! Windowed feed-forward token encoder shared by the tagger, parser and
//! auxiliary encoders.
//!
//! Each token is represented by a word embedding, the summed embeddings of
//! its hashed 1-, 2- and 3-phoneme suffixes and, optionally, an extra
//! categorical feature. The encoder output at position i is
//! `tanh(W [x_{i-r}; …; x_{i+r}] + b)` with padding beyond the edges.

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ml::{Graph, Init, MlError, NodeId, ParamId, ParamStore};
use crate::text::PhonemeString;

pub const PAD: usize = 0;
pub const UNK: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub radius: usize,
    pub word_dim: usize,
    pub suffix_dim: usize,
    pub suffix_buckets: usize,
    pub extra_dim: usize,
    pub hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            radius: 2,
            word_dim: 16,
            suffix_dim: 8,
            suffix_buckets: 64,
            extra_dim: 8,
            hidden: 32,
        }
    }
}

/// String-to-index map with reserved PAD and UNK slots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    items: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new<I: IntoIterator<Item = String>>(items: I) -> Self {
        let mut v = Vocab::default();
        for it in items {
            if !v.index.contains_key(&it) {
                v.index.insert(it.clone(), v.items.len() + 2);
                v.items.push(it);
            }
        }
        v
    }

    /// Rebuilds the lookup map after deserializing.
    pub fn reindex(&mut self) {
        self.index = self.items.iter().enumerate().map(|(i, s)| (s.clone(), i + 2)).collect();
    }

    /// Number of embedding rows, including PAD and UNK.
    pub fn rows(&self) -> usize {
        self.items.len() + 2
    }

    pub fn get(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(UNK)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

/// Per-token input to the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenInput {
    pub word: usize,
    pub suffixes: [usize; 3],
    pub extra: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEncoder {
    pub config: EncoderConfig,
    pub vocab: Vocab,
    pub extra_vocab: Option<Vocab>,
    prefix: String,
    #[serde(skip)]
    ids: Option<EncoderIds>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct EncoderIds {
    words: ParamId,
    suffixes: ParamId,
    extra: Option<ParamId>,
    w: ParamId,
    b: ParamId,
}

fn hash_suffix(s: &[u8], buckets: usize) -> usize {
    // FNV-1a; bucket 0 is padding.
    let mut h: u32 = 0x811c9dc5;
    for b in s {
        h ^= *b as u32;
        h = h.wrapping_mul(0x01000193);
    }
    1 + (h as usize) % (buckets - 1)
}

impl WindowEncoder {
    /// Adds fresh encoder parameters named `{prefix}…` to `store`.
    pub fn create(
        store: &mut ParamStore,
        prefix: &str,
        config: EncoderConfig,
        vocab: Vocab,
        extra_vocab: Option<Vocab>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, MlError> {
        let per_token = config.word_dim + config.suffix_dim + extra_vocab.as_ref().map_or(0, |_| config.extra_dim);
        let width = (2 * config.radius + 1) * per_token;
        store.add(&format!("{prefix}words"), vocab.rows(), config.word_dim, Init::Uniform(rng))?;
        store.add(&format!("{prefix}suffixes"), config.suffix_buckets, config.suffix_dim, Init::Uniform(rng))?;
        if let Some(ev) = &extra_vocab {
            store.add(&format!("{prefix}extra"), ev.rows(), config.extra_dim, Init::Uniform(rng))?;
        }
        store.add(&format!("{prefix}w"), config.hidden, width, Init::Uniform(rng))?;
        store.add(&format!("{prefix}b"), 1, config.hidden, Init::Zeros)?;
        let mut enc = WindowEncoder {
            config,
            vocab,
            extra_vocab,
            prefix: prefix.to_string(),
            ids: None,
        };
        enc.bind(store)?;
        Ok(enc)
    }

    /// Resolves parameter ids in `store`; call after loading or moving.
    pub fn bind(&mut self, store: &ParamStore) -> Result<(), MlError> {
        let get = |n: &str| {
            store
                .id(&format!("{}{n}", self.prefix))
                .ok_or_else(|| MlError::InvalidConfig(format!("missing parameter {}{n}", self.prefix)))
        };
        self.ids = Some(EncoderIds {
            words: get("words")?,
            suffixes: get("suffixes")?,
            extra: if self.extra_vocab.is_some() { Some(get("extra")?) } else { None },
            w: get("w")?,
            b: get("b")?,
        });
        self.vocab.reindex();
        if let Some(v) = &mut self.extra_vocab {
            v.reindex();
        }
        Ok(())
    }

    /// Same encoder, renamed under `prefix` (parameters must be copied separately).
    pub fn with_prefix(&self, prefix: &str) -> Self {
        WindowEncoder {
            prefix: prefix.to_string(),
            ids: None,
            ..self.clone()
        }
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn output_dim(&self) -> usize {
        self.config.hidden
    }

    fn ids(&self) -> EncoderIds {
        self.ids.expect("encoder is bound to a parameter store")
    }

    pub fn inputs(&self, forms: &[PhonemeString], extras: Option<&[Option<String>]>) -> Vec<TokenInput> {
        forms
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let bytes: Vec<u8> = f.iter().map(|p| p.byte()).collect();
                let mut suffixes = [PAD; 3];
                for (k, s) in suffixes.iter_mut().enumerate() {
                    let len = k + 1;
                    if bytes.len() >= len {
                        *s = hash_suffix(&bytes[bytes.len() - len..], self.config.suffix_buckets);
                    }
                }
                let extra = match (&self.extra_vocab, extras) {
                    (Some(v), Some(x)) => x[i].as_deref().map_or(UNK, |s| v.get(s)),
                    _ => UNK,
                };
                TokenInput {
                    word: self.vocab.get(&f.as_slp1()),
                    suffixes,
                    extra,
                }
            })
            .collect()
    }

    /// One output vector per token.
    pub fn encode<'a>(&self, g: &mut Graph<'a>, tokens: &[TokenInput]) -> Vec<NodeId> {
        let ids = self.ids();
        let token_vec = |g: &mut Graph<'a>, t: Option<&TokenInput>| -> Vec<NodeId> {
            let (word, suffixes, extra) = match t {
                Some(t) => (t.word, t.suffixes, t.extra),
                None => (PAD, [PAD; 3], PAD),
            };
            let w = g.lookup(ids.words, word);
            let s: Vec<NodeId> = suffixes.iter().map(|&s| g.lookup(ids.suffixes, s)).collect();
            let s = g.sum_of(&s);
            let mut parts = vec![w, s];
            if let Some(x) = ids.extra {
                parts.push(g.lookup(x, extra));
            }
            parts
        };
        let pad = token_vec(g, None);
        let base: Vec<Vec<NodeId>> = tokens.iter().map(|t| token_vec(g, Some(t))).collect();
        let r = self.config.radius as isize;
        let b = g.param(ids.b);
        (0..tokens.len() as isize)
            .map(|i| {
                let mut parts = Vec::new();
                for j in i - r..=i + r {
                    let v = if j < 0 || j >= tokens.len() as isize { &pad } else { &base[j as usize] };
                    parts.extend_from_slice(v);
                }
                let x = g.concat(&parts);
                let h = g.matvec(ids.w, x);
                let h = g.add(h, b);
                g.tanh(h)
            })
            .collect()
    }
}
