//! Acceptance lines for the criteria the bindings can reach, driven from
//! an embedded interpreter through the Python-visible functions.

use std::time::Instant;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use shala_core::demo::{DemoModels, Recipes};
use shala_core::lexicon::Lexicon;
use shala_core::parser;
use shala_core::pipeline::{Analysis, Pipeline, TaskKind};
use shala_core::sandhi::RuleTable;
use shala_core::text::{PhonemeString, Script, ScriptTable};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "shala").unwrap();
    shala::shala(&m).unwrap();
    m
}

fn mst_oracle(m: &Bound<'_, PyModule>) -> Outcome {
    let t = Instant::now();
    let decode = m.getattr("mst_decode").unwrap();
    let mut r = StdRng::seed_from_u64(21);
    let (mut mismatches, mut invalid) = (0, 0);
    for case in 0..500 {
        let n = r.gen_range(1..=5);
        let scores: Vec<Vec<f64>> = (0..=n)
            .map(|_| {
                (0..=n)
                    .map(|_| if case % 2 == 0 { r.gen_range(-5.0..5.0) } else { r.gen_range(-2..=2) as f64 })
                    .collect()
            })
            .collect();
        let heads: Vec<usize> = decode.call1((scores.clone(),)).unwrap().extract().unwrap();
        invalid += usize::from(!parser::is_arborescence(&heads));
        let (_, best) = parser::brute_force_mst(&scores);
        mismatches += usize::from(parser::tree_score(&scores, &heads) != best);
    }
    let e = t.elapsed();
    outcome(
        mismatches == 0 && invalid == 0 && e.as_secs_f64() < 10.0,
        format!("500 matrices (n <= 6) via shala.mst_decode, {mismatches} score mismatches (exact), {invalid} invalid trees, {e:.2?} (limit < 10 s)"),
    )
}

fn sandhi_round_trips(m: &Bound<'_, PyModule>) -> Outcome {
    let t = Instant::now();
    let (join, split) = (m.getattr("join").unwrap(), m.getattr("split").unwrap());
    let rules = RuleTable::builtin();
    let entries = Lexicon::builtin().entries();
    let inv = ScriptTable::builtin().inventory();
    let mut r = StdRng::seed_from_u64(22);
    let (mut failures, mut candidates) = (0, 0);
    for trial in 0..1000 {
        let pick = |r: &mut StdRng| -> PhonemeString {
            if trial % 2 == 0 {
                entries.choose(r).unwrap().surface.clone()
            } else {
                let n = r.gen_range(1..=6);
                PhonemeString::from_phonemes((0..n).map(|_| *inv.choose(r).unwrap()).collect())
            }
        };
        let (l, rt) = (pick(&mut r), pick(&mut r));
        let s: String = join.call1((vec![l.as_slp1(), rt.as_slp1()],)).unwrap().extract().unwrap();
        let rule = rules.select(l.phonemes(), rt.phonemes());
        let junction = l.len() - rule.map_or(0, |x| rules.get(x).left_final.len());
        let mut sound = true;
        let mut found = junction == 0;
        for j in 1..=s.chars().count() {
            let cands: Vec<(String, String, Option<String>)> = split.call1((s.as_str(), j)).unwrap().extract().unwrap();
            for (a, b, id) in cands {
                candidates += 1;
                let back: String = join.call1((vec![a.clone(), b.clone()],)).unwrap().extract().unwrap();
                sound &= back == s;
                found |= j == junction && a == l.as_slp1() && b == rt.as_slp1() && id.as_deref() == rules.id_of(rule);
            }
        }
        failures += usize::from(!(sound && found));
    }
    let e = t.elapsed();
    outcome(
        failures == 0 && e.as_secs_f64() < 5.0,
        format!("1000 joins via shala.join/split, {candidates} candidates re-joined, {failures} failures, {e:.2?} (limit 0 failures, < 5 s)"),
    )
}

fn format_round_trips(py: Python<'_>, m: &Bound<'_, PyModule>, models: &DemoModels) -> Outcome {
    let g = PyDict::new(py);
    g.set_item("shala", m).unwrap();
    let code = c"
import json
sents = [l.split() for l in ['rAmaH vanam gacCati', 'sItA vanam gacCati', 'rAmaH gfham gacCati'] * 5]
e = shala.Embeddings.train(sents, dim=8, epochs=3, seed=4)
text = e.to_text()
vectors_same = shala.Embeddings.from_text(text).to_text() == text
p = shala.Pipeline.load(model_dir)
analysis = json.dumps(p.analyze('aham pīta-ambaram dharāmi'))
";
    let dir = tempfile::tempdir().unwrap();
    models.save(dir.path()).unwrap();
    g.set_item("model_dir", dir.path().to_str().unwrap()).unwrap();
    if let Err(e) = py.run(code, Some(&g), None) {
        return outcome(false, format!("python raised: {e}"));
    }
    let vectors_same: bool = g.get_item("vectors_same").unwrap().unwrap().extract().unwrap();
    let text: String = g.get_item("analysis").unwrap().unwrap().extract().unwrap();
    let from_py: Analysis = serde_json::from_str(&text).unwrap();
    let direct = Pipeline::with_models(models.clone()).analyze("aham pīta-ambaram dharāmi", Script::Iast, &TaskKind::ALL).unwrap();
    outcome(
        vectors_same && from_py == direct,
        format!(
            "vector text round trip identical: {vectors_same}; model files saved, loaded in Python, analysis equals in-process: {}",
            from_py == direct
        ),
    )
}

fn main() {
    let models = DemoModels::train(&Recipes::quick(5)).expect("demo models train");
    let lines = Python::attach(|py| {
        let m = module(py);
        vec![
            ("mst oracle (bindings)", mst_oracle(&m)),
            ("sandhi inverse soundness/completeness (bindings)", sandhi_round_trips(&m)),
            ("format round trips (bindings)", format_round_trips(py, &m, &models)),
        ]
    });
    let mut failed = 0;
    for (name, o) in lines {
        failed += usize::from(!o.pass);
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
