//! Python bindings. Structured results (analyses, reports) cross over as
//! plain dicts and lists with the same shape as the service's JSON.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use shala_core::demo::{self, DemoModels, Recipes};
use shala_core::embeddings::{self, EmbeddingTable, Inventory, SkipGramConfig};
use shala_core::lexicon::Lexicon;
use shala_core::parser;
use shala_core::pipeline::{self, TaskKind};
use shala_core::sandhi::RuleTable;
use shala_core::text::{self, PhonemeString, Script};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn script(s: &str) -> PyResult<Script> {
    s.parse().map_err(err)
}

fn slp1(s: &str) -> PyResult<PhonemeString> {
    PhonemeString::from_slp1(s).map_err(err)
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Converts between SLP1, IAST and DEVANAGARI.
#[pyfunction]
fn transliterate(text: &str, source: &str, target: &str) -> PyResult<String> {
    text::transliterate(text, script(source)?, script(target)?).map_err(err)
}

/// Joins SLP1 words left to right under the built-in sandhi rules.
#[pyfunction]
fn join(words: Vec<String>) -> PyResult<String> {
    let words = words.iter().map(|w| slp1(w)).collect::<PyResult<Vec<_>>>()?;
    Ok(RuleTable::builtin().join_all(&words).as_slp1())
}

/// `(left, right, rule_id)` splits of an SLP1 surface at `junction`.
#[pyfunction]
fn split(surface: &str, junction: usize) -> PyResult<Vec<(String, String, Option<String>)>> {
    let rules = RuleTable::builtin();
    let cands = rules.split_candidates(&slp1(surface)?, junction).map_err(err)?;
    Ok(cands
        .into_iter()
        .map(|c| (c.left.as_slp1(), c.right.as_slp1(), rules.id_of(c.rule).map(String::from)))
        .collect())
}

/// `(lemma, tag)` analyses of a form in the built-in lexicon.
#[pyfunction]
#[pyo3(signature = (form, script = "SLP1"))]
fn lookup(form: &str, script: &str) -> PyResult<Vec<(String, String)>> {
    let s = self::script(script)?;
    let form = text::to_phonemes(form, s).map_err(err)?;
    Ok(Lexicon::builtin()
        .lookup(&form)
        .iter()
        .map(|e| (text::render(&e.lemma, s), e.tag.to_string()))
        .collect())
}

/// Maximum spanning arborescence. `scores[h][d]` scores head `h` for
/// dependent `d`, row 0 being the root; returns 1-based heads per word.
#[pyfunction]
fn mst_decode(scores: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    let n = scores.len();
    if n < 2 || scores.iter().any(|r| r.len() != n) {
        return Err(err("scores must be a square matrix with at least 2 rows"));
    }
    if scores.iter().flatten().any(|x| !x.is_finite()) {
        return Err(err("scores must be finite"));
    }
    Ok(parser::mst_decode(&scores))
}

#[pyfunction]
fn is_arborescence(heads: Vec<usize>) -> bool {
    parser::is_arborescence(&heads)
}

/// Names and TSV contents of the bundled embedding evaluation inventories.
#[pyfunction]
fn eval_inventories() -> Vec<(&'static str, &'static str)> {
    demo::EVAL_INVENTORIES.to_vec()
}

/// The bundled toy corpus for embedding training, one token list per line.
#[pyfunction]
fn embedding_corpus() -> Vec<Vec<String>> {
    demo::embedding_corpus()
}

#[pyclass(module = "shala", frozen)]
struct Pipeline {
    inner: Arc<pipeline::Pipeline>,
}

#[pymethods]
impl Pipeline {
    /// Resources only; no models.
    #[new]
    fn new() -> Self {
        Pipeline {
            inner: Arc::new(pipeline::Pipeline::empty()),
        }
    }

    /// Models trained on the bundled toy corpora.
    #[staticmethod]
    #[pyo3(signature = (seed = 0, quick = true))]
    fn demo(py: Python<'_>, seed: u64, quick: bool) -> PyResult<Self> {
        let recipes = if quick { Recipes::quick(seed) } else { Recipes::new(seed) };
        let models = py.detach(|| DemoModels::train(&recipes)).map_err(err)?;
        Ok(Pipeline {
            inner: Arc::new(pipeline::Pipeline::with_models(models)),
        })
    }

    /// The four model files written by `shala train all`.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let models = DemoModels::load(dir).map_err(err)?;
        Ok(Pipeline {
            inner: Arc::new(pipeline::Pipeline::with_models(models)),
        })
    }

    #[getter]
    fn loaded(&self) -> Vec<&'static str> {
        self.inner.loaded().into_iter().map(TaskKind::name).collect()
    }

    /// Runs `tasks` (default: every loaded task) and returns the analysis.
    #[pyo3(signature = (text, tasks = None, script = "IAST"))]
    fn analyze<'py>(&self, py: Python<'py>, text: &str, tasks: Option<Vec<String>>, script: &str) -> PyResult<Bound<'py, PyAny>> {
        let tasks = match tasks {
            Some(ts) => ts.iter().map(|t| t.parse::<TaskKind>()).collect::<Result<Vec<_>, _>>().map_err(err)?,
            None => self.inner.loaded(),
        };
        let s = self::script(script)?;
        let p = Arc::clone(&self.inner);
        let a = py.detach(|| p.analyze(text, s, &tasks)).map_err(err)?;
        to_py(py, &a)
    }

    /// Top segmentation as words in the input script.
    #[pyo3(signature = (text, script = "IAST"))]
    fn segment(&self, py: Python<'_>, text: &str, script: &str) -> PyResult<Vec<String>> {
        let s = self::script(script)?;
        let p = Arc::clone(&self.inner);
        let a = py.detach(|| p.analyze(text, s, &[TaskKind::Segment])).map_err(err)?;
        Ok(a.tokens.iter().map(|t| text::render(t, s)).collect())
    }

    fn __repr__(&self) -> String {
        let names: Vec<String> = self.loaded().iter().map(|t| format!("'{t}'")).collect();
        format!("Pipeline(loaded=[{}])", names.join(", "))
    }
}

#[pyclass(module = "shala", frozen)]
struct Embeddings {
    table: EmbeddingTable,
}

#[pymethods]
impl Embeddings {
    /// Skip-gram with negative sampling over tokenized sentences.
    #[staticmethod]
    #[pyo3(signature = (sentences, dim = 16, window = 2, negatives = 5, epochs = 5, seed = 0, learning_rate = 0.05))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        sentences: Vec<Vec<String>>,
        dim: usize,
        window: usize,
        negatives: usize,
        epochs: usize,
        seed: u64,
        learning_rate: f64,
    ) -> PyResult<Self> {
        let config = SkipGramConfig {
            dim,
            window,
            negatives,
            epochs,
            seed,
            learning_rate,
            extra_vocab: Vec::new(),
        };
        let (table, _) = py.detach(|| embeddings::train_skipgram(&sentences, &config)).map_err(err)?;
        Ok(Embeddings { table })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Embeddings {
            table: EmbeddingTable::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Embeddings {
            table: EmbeddingTable::parse(text).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.table.save(path).map_err(err)
    }

    fn to_text(&self) -> String {
        self.table.to_text()
    }

    fn __len__(&self) -> usize {
        self.table.len()
    }

    fn __contains__(&self, word: &str) -> bool {
        self.table.index_of(word).is_some()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.table.dim()
    }

    #[getter]
    fn words(&self) -> Vec<String> {
        self.table.words().to_vec()
    }

    fn vector(&self, word: &str) -> Option<Vec<f64>> {
        self.table.get(word).map(<[f64]>::to_vec)
    }

    fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(embeddings::cosine(self.table.get(a)?, self.table.get(b)?))
    }

    /// 3CosAdd answer to `a : b :: c : ?`.
    fn analogy(&self, a: &str, b: &str, c: &str) -> Option<String> {
        embeddings::analogy_answer(&self.table, a, b, c)
    }

    /// Scores one inventory given as TSV text.
    fn evaluate<'py>(&self, py: Python<'py>, inventory: &str) -> PyResult<Bound<'py, PyAny>> {
        let inv = Inventory::parse(inventory).map_err(err)?;
        to_py(py, &embeddings::evaluate(&self.table, &inv).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("Embeddings(words={}, dim={})", self.table.len(), self.table.dim())
    }
}

#[pymodule]
pub fn shala(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(transliterate, m)?)?;
    m.add_function(wrap_pyfunction!(join, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(lookup, m)?)?;
    m.add_function(wrap_pyfunction!(mst_decode, m)?)?;
    m.add_function(wrap_pyfunction!(is_arborescence, m)?)?;
    m.add_function(wrap_pyfunction!(eval_inventories, m)?)?;
    m.add_function(wrap_pyfunction!(embedding_corpus, m)?)?;
    m.add_class::<Pipeline>()?;
    m.add_class::<Embeddings>()?;
    Ok(())
}
