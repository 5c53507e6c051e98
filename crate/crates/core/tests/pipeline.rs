use std::collections::BTreeMap;
use std::sync::OnceLock;

use shala_core::demo::{DemoModels, Recipes};
use shala_core::parser::is_arborescence;
use shala_core::pipeline::{Analysis, Pipeline, PipelineError, TaskKind};
use shala_core::segmenter::decode;
use shala_core::segmenter::{Lattice, PreparedLattice, DEFAULT_MAX_WORD_LEN};
use shala_core::text::{PhonemeString, Script};

fn pipeline() -> &'static Pipeline {
    static P: OnceLock<Pipeline> = OnceLock::new();
    P.get_or_init(|| Pipeline::with_models(DemoModels::train(&Recipes::quick(7)).expect("demo models train")))
}

fn slp1(words: &[PhonemeString]) -> Vec<String> {
    words.iter().map(|w| w.as_slp1()).collect()
}

#[test]
fn dasobhava_segments_with_full_lattice() {
    let p = pipeline();
    let a = p.analyze("dāsobhava", Script::Iast, &[TaskKind::Segment]).unwrap();
    assert_eq!(slp1(&a.tokens), ["dAsaH", "Bava"]);
    let seg = a.chunks[0].segmentation.as_ref().expect("segmented");

    let surface = PhonemeString::from_slp1("dAsoBava").unwrap();
    let lattice = Lattice::build(&surface, &p.lexicon, &p.rules, DEFAULT_MAX_WORD_LEN);
    assert_eq!(seg.lattice.edges, lattice.edges);
    assert_eq!(seg.lattice.count_paths(), lattice.count_paths());

    // Decoder candidates agree with exhaustive ranking under the same scores.
    let model = p.segmenter.as_ref().unwrap();
    let scores = model.scorer.edge_scores(&PreparedLattice::new(lattice.clone()));
    let all = decode::brute_force(&lattice, &scores, 10_000).unwrap();
    assert_eq!(seg.candidates.len(), model.config.beam.min(all.len()));
    for (c, b) in seg.candidates.iter().zip(&all) {
        assert_eq!(c.path, b.edges);
        assert!((c.score - b.score).abs() < 1e-12);
    }
    assert!(seg.candidates.iter().any(|c| c.path == seg.path));
}

#[test]
fn morph_tokens_are_the_segmentation() {
    let a = pipeline()
        .analyze("rāmo vanaṃ gacchati", Script::Iast, &[TaskKind::Segment, TaskKind::Morph])
        .unwrap();
    let from_chunks: Vec<PhonemeString> = a.chunks.iter().flat_map(|c| c.words.iter().cloned()).collect();
    assert_eq!(a.tokens, from_chunks);
    let morph = a.morph.as_ref().unwrap();
    assert_eq!(morph.len(), a.tokens.len());
    for m in morph {
        assert_eq!(m.in_candidates, m.candidates.contains(&m.tag));
    }
    assert!(a.tree.is_none() && a.compounds.is_none());
}

#[test]
fn parse_returns_a_tree_over_the_tokens() {
    let a = pipeline()
        .analyze("rāmo vanaṃ gacchati", Script::Iast, &[TaskKind::Segment, TaskKind::Morph, TaskKind::Parse])
        .unwrap();
    let tree = a.tree.as_ref().unwrap();
    assert_eq!(tree.heads.len(), a.tokens.len());
    assert_eq!(tree.labels.len(), a.tokens.len());
    assert!(is_arborescence(&tree.heads));
}

#[test]
fn compound_example_is_tatpurusha() {
    let a = pipeline()
        .analyze("aham pīta-ambaram dharāmi", Script::Iast, &[TaskKind::Compound])
        .unwrap();
    assert_eq!(slp1(&a.tokens), ["aham", "pItAmbaram", "DarAmi"]);
    let c = &a.compounds.as_ref().unwrap()[0];
    assert_eq!(c.token, 1);
    assert_eq!(slp1(&c.constituents), ["pIta", "ambaram"]);
    assert_eq!(c.label, "TATPURUSHA");
    let total: f64 = c.probabilities.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn hyphenated_chunks_skip_the_segmenter() {
    let a = pipeline()
        .analyze("aham pīta-ambaram dharāmi", Script::Iast, &[TaskKind::Segment])
        .unwrap();
    assert!(a.chunks[1].is_compound());
    assert!(a.chunks[1].segmentation.is_none());
    assert!(a.chunks[0].segmentation.is_some());
}

#[test]
fn forced_path_drives_downstream_tasks() {
    let p = pipeline();
    let tasks = [TaskKind::Segment, TaskKind::Morph];
    let a = p.analyze("dāsobhava", Script::Iast, &tasks).unwrap();
    let seg = a.chunks[0].segmentation.as_ref().unwrap();
    let other = seg.lattice.enumerate_paths(10_000).unwrap().into_iter().find(|q| *q != seg.path).unwrap();
    let forced = p
        .analyze_with_paths("dāsobhava", Script::Iast, &tasks, &BTreeMap::from([(0, other.clone())]))
        .unwrap();
    assert_eq!(forced.tokens, seg.lattice.words(&other));
    assert_eq!(forced.morph.unwrap().len(), forced.tokens.len());

    let bad = p.analyze_with_paths("dāsobhava", Script::Iast, &tasks, &BTreeMap::from([(0, vec![])]));
    assert!(matches!(bad, Err(PipelineError::InvalidRequest(_))));
}

#[test]
fn request_errors() {
    let p = pipeline();
    assert!(matches!(p.analyze("rāmaḥ", Script::Iast, &[]), Err(PipelineError::InvalidRequest(_))));
    assert!(matches!(p.analyze("   ", Script::Iast, &[TaskKind::Segment]), Err(PipelineError::InvalidRequest(_))));
    assert!(matches!(
        Pipeline::empty().analyze("rāmaḥ", Script::Iast, &[TaskKind::Parse]),
        Err(PipelineError::ModelMissing(TaskKind::Parse))
    ));
    assert!(matches!(p.analyze("rāmaḥ", Script::Slp1, &[TaskKind::Segment]), Err(PipelineError::Text(_))));
}

#[test]
fn analysis_survives_json() {
    let a = pipeline().analyze("रामो वनं गच्छति", Script::Devanagari, &TaskKind::ALL).unwrap();
    let back: Analysis = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(back, a);
}
