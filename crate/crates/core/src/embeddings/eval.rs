//! Intrinsic evaluations over query inventories.
//!
//! Inventory files are TSV with the task name in the first column:
//!
//! ```text
//! ANALOGY         a  b  c  d
//! SYNONYM         query  opt1|opt2|…  answer-index
//! RELATEDNESS     w1  w2  score
//! CATEGORIZATION  word  category
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbError, EmbeddingTable};

pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Task {
    Analogy,
    Synonym,
    Relatedness,
    Categorization,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Analogy => "ANALOGY",
            Task::Synonym => "SYNONYM",
            Task::Relatedness => "RELATEDNESS",
            Task::Categorization => "CATEGORIZATION",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Task::Analogy, Task::Synonym, Task::Relatedness, Task::Categorization]
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown task {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Item {
    Analogy([String; 4]),
    Synonym { query: String, options: Vec<String>, answer: usize },
    Relatedness { a: String, b: String, score: f64 },
    Categorization { word: String, category: String },
}

impl Item {
    pub fn task(&self) -> Task {
        match self {
            Item::Analogy(_) => Task::Analogy,
            Item::Synonym { .. } => Task::Synonym,
            Item::Relatedness { .. } => Task::Relatedness,
            Item::Categorization { .. } => Task::Categorization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub task: Task,
    pub items: Vec<Item>,
}

impl Inventory {
    pub fn new(items: Vec<Item>) -> Result<Self, EmbError> {
        let task = items
            .first()
            .map(Item::task)
            .ok_or(EmbError::Parse { line: 0, message: "inventory is empty".into() })?;
        if let Some(other) = items.iter().map(Item::task).find(|t| *t != task) {
            return Err(EmbError::TaskMismatch { expected: task, found: other });
        }
        Ok(Inventory { task, items })
    }

    pub fn parse(text: &str) -> Result<Self, EmbError> {
        let mut items = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim_end_matches('\r');
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |m: &str| EmbError::Parse { line, message: m.to_string() };
            let cols: Vec<&str> = raw.split('\t').map(str::trim).collect();
            let task: Task = cols[0].parse().map_err(|e: String| err(&e))?;
            let want = match task {
                Task::Analogy => 5,
                Task::Synonym | Task::Relatedness => 4,
                Task::Categorization => 3,
            };
            if cols.len() != want || cols.iter().any(|c| c.is_empty()) {
                return Err(err(&format!("{task} records have {want} columns")));
            }
            let s = |i: usize| cols[i].to_string();
            items.push(match task {
                Task::Analogy => Item::Analogy([s(1), s(2), s(3), s(4)]),
                Task::Synonym => {
                    let options: Vec<String> = cols[2].split('|').map(String::from).collect();
                    let answer: usize = cols[3].parse().map_err(|_| err("answer index is not a number"))?;
                    if answer >= options.len() {
                        return Err(err("answer index out of range"));
                    }
                    Item::Synonym { query: s(1), options, answer }
                }
                Task::Relatedness => {
                    let score: f64 = cols[3].parse().map_err(|_| err("score is not a number"))?;
                    if !score.is_finite() {
                        return Err(err("score is not finite"));
                    }
                    Item::Relatedness { a: s(1), b: s(2), score }
                }
                Task::Categorization => Item::Categorization { word: s(1), category: s(2) },
            });
        }
        Self::new(items)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn expect(&self, task: Task) -> Result<(), EmbError> {
        if self.task != task {
            return Err(EmbError::TaskMismatch { expected: task, found: self.task });
        }
        Ok(())
    }
}

/// Score of one task. `score` is `None` when nothing could be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub score: Option<f64>,
    pub items: usize,
    pub evaluated: usize,
    pub oov: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / d
}

/// 3CosAdd: the vocabulary word other than a, b, c closest in cosine to
/// `v_b − v_a + v_c`; ties go to the earlier word in the table.
pub fn analogy_answer(table: &EmbeddingTable, a: &str, b: &str, c: &str) -> Option<String> {
    let (va, vb, vc) = (table.get(a)?, table.get(b)?, table.get(c)?);
    let target: Vec<f64> = (0..table.dim()).map(|k| vb[k] - va[k] + vc[k]).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, w) in table.words().iter().enumerate() {
        if w == a || w == b || w == c {
            continue;
        }
        let s = cosine(table.row(i), &target);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| table.words()[i].clone())
}

pub fn eval_analogy(table: &EmbeddingTable, inv: &Inventory) -> Result<TaskReport, EmbError> {
    inv.expect(Task::Analogy)?;
    let mut oov = 0;
    let mut evaluated = 0;
    let mut correct = 0;
    for item in &inv.items {
        let Item::Analogy([a, b, c, d]) = item else { unreachable!("checked task") };
        if [a, b, c, d].iter().any(|w| table.get(w).is_none()) {
            oov += 1;
            continue;
        }
        evaluated += 1;
        if analogy_answer(table, a, b, c).as_deref() == Some(d.as_str()) {
            correct += 1;
        }
    }
    Ok(TaskReport {
        task: Task::Analogy,
        score: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        items: inv.items.len(),
        evaluated,
        oov,
    })
}

pub fn eval_synonym(table: &EmbeddingTable, inv: &Inventory) -> Result<TaskReport, EmbError> {
    inv.expect(Task::Synonym)?;
    let mut oov = 0;
    let mut evaluated = 0;
    let mut correct = 0;
    for item in &inv.items {
        let Item::Synonym { query, options, answer } = item else { unreachable!("checked task") };
        let Some(q) = table.get(query) else {
            oov += 1;
            continue;
        };
        let scores: Vec<f64> = options
            .iter()
            .map(|o| table.get(o).map_or(f64::NEG_INFINITY, |v| cosine(q, v)))
            .collect();
        if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
            oov += 1;
            continue;
        }
        evaluated += 1;
        let best = (1..scores.len()).fold(0, |b, k| if scores[k] > scores[b] { k } else { b });
        correct += usize::from(best == *answer);
    }
    Ok(TaskReport {
        task: Task::Synonym,
        score: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        items: inv.items.len(),
        evaluated,
        oov,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EmbError> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return Err(EmbError::InsufficientPairs(xs.len()));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EmbError::ConstantScores);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

pub fn eval_pair_scores(table: &EmbeddingTable, inv: &Inventory) -> Result<TaskReport, EmbError> {
    inv.expect(Task::Relatedness)?;
    let mut oov = 0;
    let mut model = Vec::new();
    let mut human = Vec::new();
    for item in &inv.items {
        let Item::Relatedness { a, b, score } = item else { unreachable!("checked task") };
        match (table.get(a), table.get(b)) {
            (Some(va), Some(vb)) => {
                model.push(cosine(va, vb));
                human.push(*score);
            }
            _ => oov += 1,
        }
    }
    let rho = spearman(&model, &human)?;
    Ok(TaskReport {
        task: Task::Relatedness,
        score: Some(rho),
        items: inv.items.len(),
        evaluated: model.len(),
        oov,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's k-means from the given centroids. Points go to the nearest
/// centroid, ties to the lower index; an empty cluster keeps its centroid.
/// Stops when assignments repeat or after `max_iter` rounds.
pub fn kmeans(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Vec<usize> {
    let assign = |cs: &[Vec<f64>]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let d: Vec<f64> = cs.iter().map(|c| sq_dist(p, c)).collect();
                (1..d.len()).fold(0, |b, k| if d[k] < d[b] { k } else { b })
            })
            .collect()
    };
    let mut labels = assign(&centroids);
    for _ in 0..max_iter {
        for (k, c) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == k).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (j, v) in c.iter_mut().enumerate() {
                *v = members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64;
            }
        }
        let next = assign(&centroids);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Purity of k-means clusters over unit-normalized vectors, with k the
/// number of categories and each category's first word as its seed.
/// Runs the evaluation matching the inventory's task.
pub fn evaluate(table: &EmbeddingTable, inv: &Inventory) -> Result<TaskReport, EmbError> {
    match inv.task {
        Task::Analogy => eval_analogy(table, inv),
        Task::Synonym => eval_synonym(table, inv),
        Task::Relatedness => eval_pair_scores(table, inv),
        Task::Categorization => eval_categorization(table, inv),
    }
}

pub fn eval_categorization(table: &EmbeddingTable, inv: &Inventory) -> Result<TaskReport, EmbError> {
    inv.expect(Task::Categorization)?;
    let mut oov = 0;
    let mut points = Vec::new();
    let mut cats: Vec<usize> = Vec::new();
    let mut names: Vec<&str> = Vec::new();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for item in &inv.items {
        let Item::Categorization { word, category } = item else { unreachable!("checked task") };
        let Some(v) = table.get(word) else {
            oov += 1;
            continue;
        };
        let n = norm(v);
        let unit: Vec<f64> = if n == 0.0 { v.to_vec() } else { v.iter().map(|x| x / n).collect() };
        let c = match names.iter().position(|x| *x == category) {
            Some(c) => c,
            None => {
                names.push(category);
                seeds.push(unit.clone());
                names.len() - 1
            }
        };
        points.push(unit);
        cats.push(c);
    }
    if names.len() < 2 {
        return Err(EmbError::InsufficientCategories(names.len()));
    }
    let labels = kmeans(&points, seeds, KMEANS_MAX_ITER);
    let k = names.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (&l, &c) in labels.iter().zip(&cats) {
        counts[l][c] += 1;
    }
    let hits: usize = counts.iter().map(|row| row.iter().copied().max().unwrap_or(0)).sum();
    Ok(TaskReport {
        task: Task::Categorization,
        score: Some(hits as f64 / points.len() as f64),
        items: inv.items.len(),
        evaluated: points.len(),
        oov,
    })
}
