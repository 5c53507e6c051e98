#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use shala_core::encoder::EncoderConfig;
use shala_core::lexicon::Lexicon;
use shala_core::ml::{self, ParamStore};
use shala_core::sandhi::RuleTable;
use shala_core::text::{PhonemeString, ScriptTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ml::seeded_rng(seed)
}

pub fn rules() -> &'static RuleTable {
    RuleTable::builtin()
}

pub fn lexicon() -> &'static Lexicon {
    Lexicon::builtin()
}

pub fn lexicon_words(rng: &mut ChaCha8Rng, k: usize) -> Vec<PhonemeString> {
    let entries = lexicon().entries();
    (0..k).map(|_| entries.choose(rng).expect("non-empty lexicon").surface.clone()).collect()
}

pub fn random_phonemes(rng: &mut ChaCha8Rng, max_len: usize) -> PhonemeString {
    let inv = ScriptTable::builtin().inventory();
    let n = rng.gen_range(0..=max_len);
    PhonemeString::from_phonemes((0..n).map(|_| *inv.choose(rng).unwrap()).collect())
}

/// Overwrites every parameter with uniform noise in [−0.5, 0.5].
pub fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        for v in store.get_mut(id).values.iter_mut() {
            *v = rng.gen_range(-0.5..=0.5);
        }
    }
}

pub fn small_encoder() -> EncoderConfig {
    EncoderConfig {
        radius: 1,
        word_dim: 3,
        suffix_dim: 2,
        suffix_buckets: 8,
        extra_dim: 2,
        hidden: 4,
    }
}

/// Lexicon restricted to the given forms.
pub fn sub_lexicon(forms: &[PhonemeString]) -> Lexicon {
    Lexicon::from_entries(lexicon().entries().iter().filter(|e| forms.contains(&e.surface)).cloned().collect())
}
