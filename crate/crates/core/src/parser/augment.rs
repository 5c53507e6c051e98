//! Treebank augmentation by lexicon substitution: a token may be replaced
//! with another lexicon form carrying the same morphological tag. Heads and
//! labels are never touched.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::conllu::TreeSentence;
use crate::lexicon::Lexicon;
use crate::ml;

/// Copy of `s` where each tagged token is swapped with probability `rate`.
pub fn augment_sentence(s: &TreeSentence, lexicon: &Lexicon, rate: f64, rng: &mut ChaCha8Rng) -> TreeSentence {
    let mut out = s.clone();
    for (form, tag) in out.forms.iter_mut().zip(&s.tags) {
        let Some(tag) = tag else { continue };
        if !rng.gen_bool(rate.clamp(0.0, 1.0)) {
            continue;
        }
        let options = lexicon.forms_with_tag(tag);
        if !options.is_empty() {
            *form = options[rng.gen_range(0..options.len())].clone();
        }
    }
    assert_eq!(out.heads, s.heads, "augmentation changed heads");
    assert_eq!(out.labels, s.labels, "augmentation changed labels");
    assert_eq!(out.tags, s.tags, "augmentation changed tags");
    out
}

/// The corpus followed by `copies` augmented passes over it.
pub fn augment_corpus(corpus: &[TreeSentence], lexicon: &Lexicon, copies: usize, rate: f64, seed: u64) -> Vec<TreeSentence> {
    let mut rng = ml::seeded_rng(seed);
    let mut out = corpus.to_vec();
    for _ in 0..copies {
        for s in corpus {
            out.push(augment_sentence(s, lexicon, rate, &mut rng));
        }
    }
    out
}
