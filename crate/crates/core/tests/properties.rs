//! Property tests for the invariants each module promises.

mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::sample::select;

use shala_core::compound::{self, CompoundConfig, CompoundInstance, CompoundModel};
use shala_core::demo;
use shala_core::embeddings::{self, EmbeddingTable, Inventory, Item};
use shala_core::ml::{self, Graph, Init, NodeId, ParamStore, TrainConfig, Trainable};
use shala_core::parser::{self, augment_sentence, DependencyTree, LabelSet, ParseConfig, ParseModel};
use shala_core::segmenter::{self, decode, Lattice, SegConfig, SegModel};
use shala_core::tagger::{self, EditScript, TagConfig, TagModel};
use shala_core::text::{self, PhonemeString, Script, ScriptTable};

use common::*;

fn phonemes(max: usize) -> impl Strategy<Value = PhonemeString> {
    let inv = ScriptTable::builtin().inventory();
    prop::collection::vec(select(inv), 0..=max).prop_map(PhonemeString::from_phonemes)
}

fn lexicon_word() -> impl Strategy<Value = PhonemeString> {
    (0..lexicon().entries().len()).prop_map(|i| lexicon().entries()[i].surface.clone())
}

fn sentence(max_words: usize) -> impl Strategy<Value = Vec<PhonemeString>> {
    prop::collection::vec(lexicon_word(), 1..=max_words)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn script_round_trip(p in phonemes(12)) {
        for from in Script::ALL {
            let shown = text::render(&p, from);
            for to in Script::ALL {
                let moved = text::transliterate(&shown, from, to).unwrap();
                prop_assert_eq!(text::to_phonemes(&moved, to).unwrap(), p.clone());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phonemization_is_deterministic(p in phonemes(12), s in select(Script::ALL.to_vec())) {
        let shown = text::render(&p, s);
        prop_assert_eq!(text::to_phonemes(&shown, s).unwrap(), text::to_phonemes(&shown, s).unwrap());
    }

    #[test]
    fn split_candidates_rejoin_and_cover(l in phonemes(6), r in phonemes(6)) {
        prop_assume!(!l.is_empty());
        let rules = rules();
        let s = rules.apply_join(&l, &r);
        for j in 1..=s.len() {
            let cands = rules.split_candidates(&s, j).unwrap();
            prop_assert_eq!(&cands, &rules.split_candidates(&s, j).unwrap());
            for c in cands {
                prop_assert_eq!(rules.apply_join(&c.left, &c.right), s.clone());
            }
        }
        let rule = rules.select(l.phonemes(), r.phonemes());
        let junction = l.len() - rule.map_or(0, |x| rules.get(x).left_final.len());
        if junction > 0 {
            let cands = rules.split_candidates(&s, junction).unwrap();
            prop_assert!(cands.iter().any(|c| c.left == l && c.right == r && c.rule == rule));
        }
    }

    #[test]
    fn lexicon_lookup_only_returns_loaded_entries(w in prop_oneof![lexicon_word(), phonemes(8)]) {
        for e in lexicon().lookup(&w) {
            prop_assert_eq!(&e.surface, &w);
            prop_assert!(lexicon().entries().contains(e));
            prop_assert!(e.tag.validate().is_ok());
        }
    }

    #[test]
    fn lattice_paths_rejoin(words in sentence(3)) {
        let surface = rules().join_all(&words);
        let l = Lattice::build(&surface, lexicon(), rules(), segmenter::DEFAULT_MAX_WORD_LEN);
        prop_assert!(l.find_path(&words).is_some());
        if let Some(paths) = l.enumerate_paths(2000) {
            for p in paths {
                prop_assert_eq!(rules().join_all(&l.words(&p)), surface.clone());
            }
        }
    }

    #[test]
    fn decode_stays_in_lattice(words in sentence(3), seed in 0u64..4) {
        let m = seg_model(seed);
        let prepared = m.lattice(&rules().join_all(&words), lexicon(), rules());
        for seg in m.decode(&prepared, 8) {
            prop_assert!(prepared.lattice.is_full_path(&seg.path));
            prop_assert_eq!(seg.words.clone(), prepared.lattice.words(&seg.path));
            prop_assert_eq!(rules().join_all(&seg.words), prepared.lattice.surface.clone());
        }
    }

    #[test]
    fn raising_lambda_never_demotes_the_lexicon_path(words in sentence(3), seed in 0u64..4, l1 in 0.0f64..2.0, dl in 0.0f64..3.0) {
        let mut m = seg_model(seed);
        let prepared = m.lattice(&rules().join_all(&words), lexicon(), rules());
        let l = &prepared.lattice;
        let Some(paths) = l.enumerate_paths(500) else { return Ok(()) };
        let inlex = |p: &[usize]| p.iter().filter(|&&k| l.edges[k].in_lexicon).count();
        let Some(best) = paths.iter().find(|p| inlex(p) == p.len()) else { return Ok(()) };
        let mut rank = |lambda: f64| {
            m.scorer.lambda = lambda;
            let s = m.scorer.edge_scores(&prepared);
            let mine = decode::path_score(&s, best);
            paths.iter().filter(|q| inlex(q) < inlex(best) && decode::path_score(&s, q) > mine).count()
        };
        let before = rank(l1);
        let after = rank(l1 + dl);
        prop_assert!(after <= before);
    }

    #[test]
    fn viterbi_matches_brute_force(n in 1usize..=5, nt in 1usize..=5, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let mut v = |k: usize| -> Vec<f64> { (0..k).map(|_| r.gen_range(-2..=2) as f64 * 0.5).collect() };
        let em: Vec<Vec<f64>> = (0..n).map(|_| v(nt)).collect();
        let (trans, start, end) = (v(nt * nt), v(nt), v(nt));
        prop_assert_eq!(tagger::viterbi(&em, &trans, &start, &end), tagger::brute_force_tags(&em, &trans, &start, &end));
    }

    #[test]
    fn in_candidates_is_set_membership(words in sentence(4)) {
        for a in tag_model().tag_sentence(&words, lexicon()).unwrap() {
            prop_assert_eq!(a.in_candidates, a.candidates.contains(&a.tag));
            prop_assert_eq!(a.candidates.clone(), tagger::candidate_tags(&a.token, lexicon()));
        }
    }

    #[test]
    fn edit_scripts_invert(token in phonemes(8), lemma in phonemes(8)) {
        prop_assume!(!lemma.is_empty());
        let s = EditScript::induce(&token, &lemma).unwrap();
        prop_assert_eq!(s.apply(&token), Some(lemma));
    }

    #[test]
    fn mst_is_always_an_arborescence(n in 1usize..=7, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let scores: Vec<Vec<f64>> = (0..=n).map(|_| (0..=n).map(|_| r.gen_range(-3..=3) as f64).collect()).collect();
        let heads = parser::mst_decode(&scores);
        prop_assert!(parser::is_arborescence(&heads));
        prop_assert_eq!(heads.clone(), parser::mst_decode(&scores));
    }

    #[test]
    fn las_never_exceeds_uas(n in 1usize..=6, seed in any::<u64>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let labels = ["a", "b", "c"];
        let tree = |r: &mut rand_chacha::ChaCha8Rng| {
            let scores: Vec<Vec<f64>> = (0..=n).map(|_| (0..=n).map(|_| r.gen_range(-3.0..3.0)).collect()).collect();
            DependencyTree {
                heads: parser::mst_decode(&scores),
                labels: (0..n).map(|_| labels[r.gen_range(0..3)].to_string()).collect(),
            }
        };
        let (p, g) = (tree(&mut r), tree(&mut r));
        let (uas, las) = parser::uas_las(&p, &g).unwrap();
        prop_assert!(las <= uas);
    }

    #[test]
    fn augmentation_keeps_trees(k in 0usize..50, seed in any::<u64>(), rate in 0.0f64..=1.0) {
        let bank = treebank();
        let s = &bank[k % bank.len()];
        let a = augment_sentence(s, lexicon(), rate, &mut rng(seed));
        prop_assert_eq!(&a.heads, &s.heads);
        prop_assert_eq!(&a.labels, &s.labels);
        prop_assert_eq!(&a.tags, &s.tags);
    }

    #[test]
    fn compound_distribution_sums_to_one(k in 0usize..30, context in sentence(4), feats in any::<(bool, bool)>()) {
        let corpus = demo::compound_corpus();
        let c = &corpus[k % corpus.len()];
        let mut sent = context.clone();
        let span = sent.len() / 2;
        sent.insert(span, c.instance.sentence[c.instance.span].clone());
        let inst = CompoundInstance { sentence: sent, span, constituents: c.instance.constituents.clone() };
        let morph = feats.0.then(|| lexicon().entries()[k].tag);
        let dep = feats.1.then_some("karta");
        let (label, probs) = compound_model().classify(&inst, morph, dep, rules()).unwrap();
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(compound_model().classes().contains(&label));
    }

    #[test]
    fn analogy_never_returns_a_query_word(seed in any::<u64>(), n in 4usize..8, q in any::<(usize, usize, usize)>()) {
        use rand::Rng;
        let mut r = rng(seed);
        let rows = (0..n).map(|i| (format!("w{i}"), (0..3).map(|_| r.gen_range(-1.0..1.0)).collect())).collect();
        let t = EmbeddingTable::from_rows(rows).unwrap();
        let (a, b, c) = (format!("w{}", q.0 % n), format!("w{}", q.1 % n), format!("w{}", q.2 % n));
        if let Some(ans) = embeddings::analogy_answer(&t, &a, &b, &c) {
            prop_assert!(ans != a && ans != b && ans != c);
        }
    }

    #[test]
    fn spearman_identity_and_reversal(xs in prop::collection::vec(-5i32..5, 2..12), ys in prop::collection::vec(-5i32..5, 2..12)) {
        let n = xs.len().min(ys.len());
        let xs: Vec<f64> = xs[..n].iter().map(|&v| v as f64).collect();
        let ys: Vec<f64> = ys[..n].iter().map(|&v| v as f64).collect();
        prop_assume!(xs.iter().any(|v| *v != xs[0]) && ys.iter().any(|v| *v != ys[0]));
        prop_assert!((embeddings::spearman(&xs, &xs).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = ys.iter().map(|v| -v).collect();
        let rho = embeddings::spearman(&xs, &ys).unwrap();
        prop_assert!((embeddings::spearman(&xs, &neg).unwrap() + rho).abs() < 1e-12);
    }

    #[test]
    fn purity_is_bounded(seed in any::<u64>(), n in 2usize..12, k in 2usize..4) {
        use rand::Rng;
        let mut r = rng(seed);
        let rows: Vec<(String, Vec<f64>)> = (0..n).map(|i| (format!("w{i}"), (0..2).map(|_| r.gen_range(-1.0..1.0)).collect())).collect();
        let t = EmbeddingTable::from_rows(rows).unwrap();
        let cats: Vec<usize> = (0..n).map(|i| if i < k { i } else { r.gen_range(0..k) }).collect();
        let inv = Inventory::new((0..n).map(|i| Item::Categorization { word: format!("w{i}"), category: format!("c{}", cats[i]) }).collect()).unwrap();
        let p = embeddings::eval_categorization(&t, &inv).unwrap().score.unwrap();
        let share = (0..k).map(|c| cats.iter().filter(|&&x| x == c).count()).max().unwrap() as f64 / n as f64;
        prop_assert!(p >= share - 1e-12 && p <= 1.0 + 1e-12);
    }
}

/// A loss with zero gradient everywhere, for the L2 property.
#[derive(Clone)]
struct Flat(ParamStore);

impl Trainable for Flat {
    type Example = ();

    fn params(&self) -> &ParamStore {
        &self.0
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.0
    }

    fn loss<'a>(&'a self, g: &mut Graph<'a>, _: &()) -> NodeId {
        g.scalar(0.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l2_shrinks_the_norm(values in prop::collection::vec(-1.0f64..1.0, 1..10), l2 in 0.01f64..1.0) {
        prop_assume!(values.iter().any(|v| *v != 0.0));
        let mut store = ParamStore::new();
        store.add("w", 1, values.len(), Init::Values(values)).unwrap();
        let mut m = Flat(store);
        let before = m.0.trainable_sq_norm();
        ml::sgd_train(&mut m, &[()], &TrainConfig { learning_rate: 0.1, epochs: 1, l2, ..TrainConfig::default() }).unwrap();
        prop_assert!(m.0.trainable_sq_norm() < before);
    }

    #[test]
    fn training_is_deterministic(seed in 0u64..1000) {
        let bank = treebank();
        let cfg = ParseConfig { encoder: small_encoder(), arc_dim: 3 };
        let train = || {
            let mut m = ParseModel::for_corpus(&bank[..5], LabelSet::builtin(), cfg.clone(), seed).unwrap();
            let trace = parser::train_parser(&mut m, &bank[..5], &TrainConfig { epochs: 2, seed, ..TrainConfig::default() }).unwrap();
            (m.store().clone(), trace)
        };
        prop_assert_eq!(train(), train());
    }

    #[test]
    fn both_heads_move(k in 0usize..50, seed in 0u64..100) {
        let corpus = demo::tagger_corpus();
        let s = &corpus[k % corpus.len()];
        let lex = sub_lexicon(&s.forms);
        let one = std::slice::from_ref(s);
        let mut m = TagModel::for_corpus(one, &lex, TagConfig { encoder: small_encoder(), ..TagConfig::default() }, seed).unwrap();
        let before = m.store().clone();
        tagger::train_tagger(&mut m, one, &lex, &TrainConfig { epochs: 1, seed, ..TrainConfig::default() }).unwrap();
        for head in ["tag.w", "lemma.w"] {
            prop_assert_ne!(&before.by_name(head).unwrap().values, &m.store().by_name(head).unwrap().values);
        }
    }
}

fn seg_model(seed: u64) -> SegModel {
    let vocab: Vec<PhonemeString> = demo::seg_corpus().iter().flat_map(|s| s.words.clone()).collect();
    let mut m = SegModel::new(SegConfig::default(), rules(), &vocab, seed);
    randomize(ml::Trainable::params_mut(&mut m.scorer), &mut rng(seed));
    m
}

fn treebank() -> &'static [shala_core::conllu::TreeSentence] {
    static BANK: OnceLock<Vec<shala_core::conllu::TreeSentence>> = OnceLock::new();
    BANK.get_or_init(demo::treebank)
}

fn tag_model() -> &'static TagModel {
    static MODEL: OnceLock<TagModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let config = TagConfig { encoder: small_encoder(), ..TagConfig::default() };
        TagModel::for_corpus(&demo::tagger_corpus(), lexicon(), config, 0).unwrap()
    })
}

fn compound_model() -> &'static CompoundModel {
    static MODEL: OnceLock<CompoundModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let corpus = demo::compound_corpus();
        let tags: Vec<_> = lexicon().entries().iter().take(40).map(|e| e.tag).collect();
        let mut m = CompoundModel::for_corpus(&corpus, compound::builtin_classes(), &tags, &["karta".into()], CompoundConfig::default(), 0).unwrap();
        compound::train_compound(&mut m, &corpus, rules(), &TrainConfig { epochs: 5, ..TrainConfig::default() }).unwrap();
        m
    })
}
