//! k-best path search over a lattice with fixed per-edge scores.
//!
//! Path scores are folded right to left, `e1 + (e2 + (… + (em + 0)))`, and
//! ranked by score descending, then word sequence ascending, then edge
//! indices. Keeping the k best suffixes per state is exact for this order:
//! two suffixes leaving the same state share every prefix, so prepending one
//! preserves both the score order and the lexicographic order (up to two
//! distinct float sums rounding to the same value).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::lattice::{Lattice, State};
use crate::text::PhonemeString;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPath {
    pub edges: Vec<usize>,
    pub score: f64,
}

/// Score of `path` under the decoder's summation order.
pub fn path_score(edge_scores: &[f64], path: &[usize]) -> f64 {
    path.iter().rev().fold(0.0, |acc, &k| edge_scores[k] + acc)
}

/// Canonical ranking order between two paths of one lattice.
pub fn compare(lattice: &Lattice, a: &ScoredPath, b: &ScoredPath) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| word_cmp(lattice, &a.edges, &b.edges))
        .then_with(|| a.edges.cmp(&b.edges))
}

fn word_cmp(lattice: &Lattice, a: &[usize], b: &[usize]) -> Ordering {
    let wa = a.iter().map(|&k| &lattice.edges[k].word);
    let wb = b.iter().map(|&k| &lattice.edges[k].word);
    wa.cmp(wb)
}

/// The `k` best full paths, best first.
pub fn k_best(lattice: &Lattice, edge_scores: &[f64], k: usize) -> Vec<ScoredPath> {
    assert_eq!(edge_scores.len(), lattice.edges.len());
    if k == 0 {
        return Vec::new();
    }
    let fin = lattice.final_state();
    let mut best: BTreeMap<State, Vec<ScoredPath>> = BTreeMap::new();
    best.insert(fin, vec![ScoredPath { edges: Vec::new(), score: 0.0 }]);
    for st in lattice.states().into_iter().rev() {
        if st == fin {
            continue;
        }
        let mut cands = Vec::new();
        for &e in lattice.outgoing(st) {
            let Some(tails) = best.get(&lattice.edges[e].to_state()) else { continue };
            for t in tails {
                let mut edges = Vec::with_capacity(t.edges.len() + 1);
                edges.push(e);
                edges.extend_from_slice(&t.edges);
                cands.push(ScoredPath {
                    edges,
                    score: edge_scores[e] + t.score,
                });
            }
        }
        cands.sort_by(|a, b| compare(lattice, a, b));
        cands.truncate(k);
        if !cands.is_empty() {
            best.insert(st, cands);
        }
    }
    best.remove(&lattice.start_state()).unwrap_or_default()
}

/// Ranks every full path by brute force; the reference for `k_best`.
pub fn brute_force(lattice: &Lattice, edge_scores: &[f64], limit: usize) -> Option<Vec<ScoredPath>> {
    let mut all: Vec<ScoredPath> = lattice
        .enumerate_paths(limit)?
        .into_iter()
        .map(|edges| ScoredPath {
            score: path_score(edge_scores, &edges),
            edges,
        })
        .collect();
    all.sort_by(|a, b| compare(lattice, a, b));
    Some(all)
}

pub fn words_of(lattice: &Lattice, path: &[usize]) -> Vec<PhonemeString> {
    lattice.words(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::lattice::Edge;

    fn ps(s: &str) -> PhonemeString {
        PhonemeString::from_slp1(s).unwrap()
    }

    fn edge(start: usize, end: usize, w: &str) -> Edge {
        Edge {
            start,
            end,
            word: ps(w),
            rule_in: None,
            rule_out: None,
            in_lexicon: true,
        }
    }

    /// "abc" covered by a|b|c, ab|c, a|bc.
    fn small() -> Lattice {
        Lattice::from_edges(
            ps("abc"),
            vec![edge(0, 1, "a"), edge(1, 2, "b"), edge(2, 3, "c"), edge(0, 2, "ab"), edge(1, 3, "bc")],
        )
    }

    #[test]
    fn ranks_all_paths() {
        let l = small();
        let scores = [1.0, 1.0, 1.0, 0.5, 3.0];
        let top = k_best(&l, &scores, 10);
        let words: Vec<Vec<PhonemeString>> = top.iter().map(|p| l.words(&p.edges)).collect();
        assert_eq!(words, vec![vec![ps("a"), ps("bc")], vec![ps("a"), ps("b"), ps("c")], vec![ps("ab"), ps("c")]]);
        assert_eq!(top, brute_force(&l, &scores, 100).unwrap());
    }

    #[test]
    fn ties_prefer_smaller_word_sequence() {
        let l = small();
        let top = k_best(&l, &[0.0; 5], 3);
        let words: Vec<Vec<PhonemeString>> = top.iter().map(|p| l.words(&p.edges)).collect();
        assert_eq!(words[0], vec![ps("a"), ps("b"), ps("c")]);
        assert_eq!(words[1], vec![ps("a"), ps("bc")]);
        assert_eq!(words[2], vec![ps("ab"), ps("c")]);
    }

    #[test]
    fn k_limits_output() {
        let l = small();
        assert_eq!(k_best(&l, &[0.0; 5], 1).len(), 1);
        assert!(k_best(&l, &[0.0; 5], 0).is_empty());
    }
}
