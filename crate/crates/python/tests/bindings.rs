use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(code: &str) {
    Python::attach(|py| {
        let m = PyModule::new(py, "shala").unwrap();
        shala::shala(&m).unwrap();
        let g = PyDict::new(py);
        g.set_item("shala", m).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&g), None) {
            e.display(py);
            panic!("python raised: {e}");
        }
    });
}

#[test]
fn text_and_sandhi() {
    run(r#"
assert shala.transliterate("rāmaḥ", "IAST", "SLP1") == "rAmaH"
assert shala.transliterate("rAmaH", "slp1", "DEVANAGARI") == "रामः"
assert shala.join(["dAsaH", "Bava"]) == "dAsoBava"
assert any(l == "dAsaH" and r == "Bava" and rule for l, r, rule in shala.split("dAsoBava", 3))
for j in range(1, 9):
    for left, right, _ in shala.split("dAsoBava", j):
        assert shala.join([left, right]) == "dAsoBava"
try:
    shala.transliterate("x", "IAST", "KLINGON")
    raise AssertionError("unknown script accepted")
except ValueError:
    pass
"#);
}

#[test]
fn lexicon_and_trees() {
    run(r#"
hits = shala.lookup("rAmaH")
assert hits and all(lemma == "rAma" for lemma, _ in hits), hits
assert shala.lookup("rāmaḥ", script="IAST") == [("rāma", tag) for _, tag in hits]
assert shala.lookup("zzz") == []
heads = shala.mst_decode([[0, 5, 1], [0, 0, 4], [0, 1, 0]])
assert heads == [0, 1], heads
assert shala.is_arborescence(heads)
assert not shala.is_arborescence([2, 1])
for bad in ([[0.0]], [[0, 1], [0]], [[0, float("nan")], [0, 0]]):
    try:
        shala.mst_decode(bad)
        raise AssertionError(bad)
    except ValueError:
        pass
"#);
}

#[test]
fn pipeline_runs_all_tasks() {
    run(r#"
empty = shala.Pipeline()
assert empty.loaded == []
try:
    empty.analyze("rāmaḥ", tasks=["PARSE"])
    raise AssertionError("no parser loaded")
except ValueError as e:
    assert "PARSE" in str(e)

p = shala.Pipeline.demo(seed=7)
assert p.loaded == ["SEGMENT", "MORPH", "PARSE", "COMPOUND"]
assert p.segment("dāsobhava") == ["dāsaḥ", "bhava"]
a = p.analyze("aham pīta-ambaram dharāmi")
assert a["tasks"] == p.loaded
assert len(a["morph"]) == len(a["tokens"]) == len(a["tree"]["heads"]) == 3
assert a["compounds"][0]["label"] == "TATPURUSHA"
assert abs(sum(pr for _, pr in a["compounds"][0]["probabilities"]) - 1.0) < 1e-9
seg = shala.Pipeline.demo(seed=7).analyze("dāsobhava", tasks=["SEGMENT"])
assert seg["chunks"][0]["segmentation"]["lattice"]["edges"]
try:
    p.analyze("rāmaḥ", tasks=[])
    raise AssertionError("empty task set")
except ValueError:
    pass
try:
    p.analyze("rāmaḥ", tasks=["SEGMENT"], script="SLP1")
    raise AssertionError("IAST diacritics are not SLP1")
except ValueError:
    pass
"#);
}

#[test]
fn embeddings() {
    run(r#"
import os, tempfile
sents = [s.split() for s in ["rAmaH vanam gacCati", "sItA vanam gacCati", "rAmaH gfham gacCati"] * 10]
e = shala.Embeddings.train(sents, dim=6, window=1, epochs=2, seed=1)
assert len(e) == 5 and e.dim == 6
assert "vanam" in e and "xyz" not in e
assert len(e.vector("rAmaH")) == 6 and e.vector("xyz") is None
assert abs(e.similarity("rAmaH", "rAmaH") - 1.0) < 1e-12
assert e.similarity("rAmaH", "xyz") is None
assert e.analogy("rAmaH", "sItA", "vanam") in e.words
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "v.txt")
    e.save(path)
    assert shala.Embeddings.load(path).to_text() == e.to_text()
assert len(shala.embedding_corpus()) > 10
names = [n for n, _ in shala.eval_inventories()]
assert len(names) == 4, names
forced = shala.Embeddings.from_text("4 2\na 1 0\nb 0 1\nc 1 0.1\nd 0.1 1\n")
r = forced.evaluate("ANALOGY\ta\tb\tc\td\n")
assert r["score"] == 1.0 and r["oov"] == 0, r
"#);
}
