//! Candidate word-split graph over one surface chunk.
//!
//! A path is a word sequence `w1 … wm` that the rule table folds back into
//! the surface: `join(join(join(w1, w2), w3) …)`. Junction k rewrites a
//! window starting at surface position `p_k`; edges connect consecutive
//! junction positions. Because the rule firing at a junction depends on the
//! text accumulated so far, each node is a (position, pending rule) state:
//! an edge ending in state (j, r) leaves the left pattern of `r` hanging
//! past `j`, and the next edge must start with the matching right pattern.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::lexicon::Lexicon;
use crate::sandhi::{RuleRef, RuleTable};
use crate::text::PhonemeString;

pub const DEFAULT_MAX_WORD_LEN: usize = 20;

/// (position, rule pending at that position).
pub type State = (usize, Option<RuleRef>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub start: usize,
    pub end: usize,
    pub word: PhonemeString,
    /// Rule joining this word to the text before it.
    pub rule_in: Option<RuleRef>,
    /// Rule joining the next word to this one.
    pub rule_out: Option<RuleRef>,
    pub in_lexicon: bool,
}

impl Edge {
    pub fn from_state(&self) -> State {
        (self.start, self.rule_in)
    }

    pub fn to_state(&self) -> State {
        (self.end, self.rule_out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawLattice")]
pub struct Lattice {
    pub surface: PhonemeString,
    pub edges: Vec<Edge>,
    /// Set when nothing but the whole chunk as one word could cover it.
    pub whole_fallback: bool,
    #[serde(skip)]
    outgoing: BTreeMap<State, Vec<usize>>,
}

/// Serialized form; the state index is rebuilt on load.
#[derive(Deserialize)]
struct RawLattice {
    surface: PhonemeString,
    edges: Vec<Edge>,
    whole_fallback: bool,
}

impl From<RawLattice> for Lattice {
    fn from(raw: RawLattice) -> Self {
        let mut lattice = Lattice {
            surface: raw.surface,
            edges: raw.edges,
            whole_fallback: raw.whole_fallback,
            outgoing: BTreeMap::new(),
        };
        lattice.index();
        lattice
    }
}

impl Lattice {
    pub fn build(surface: &PhonemeString, lexicon: &Lexicon, rules: &RuleTable, max_word_len: usize) -> Lattice {
        assert!(max_word_len >= 1);
        let s = surface.phonemes();
        let n = s.len();
        let mut edges = Vec::new();
        if n > 0 {
            let mut seen = BTreeSet::new();
            let mut queue = VecDeque::from([(0usize, None::<RuleRef>)]);
            seen.insert((0, None));
            while let Some((i, rin)) = queue.pop_front() {
                let (lf_in, rf_in, s_in) = match rin {
                    Some(r) => {
                        let r = rules.get(r);
                        (r.left_final.phonemes(), r.right_initial.phonemes(), r.surface.phonemes())
                    }
                    None => (&[][..], &[][..], &[][..]),
                };
                let left_ctx = PhonemeString::concat(&[&s[..i], lf_in]);
                for j in i + 1..=n.min(i + max_word_len) {
                    let outs = std::iter::once(None).chain(
                        rules
                            .iter()
                            .filter(|(_, r)| j < n && s[j..].starts_with(r.surface.phonemes()))
                            .map(|(r, _)| Some(r)),
                    );
                    for rout in outs {
                        let lf_out = rout.map(|r| rules.get(r).left_final.phonemes()).unwrap_or(&[]);
                        let x = PhonemeString::concat(&[&s[i..j], lf_out]);
                        if !x.starts_with(s_in) {
                            continue;
                        }
                        let word = PhonemeString::concat(&[rf_in, &x.phonemes()[s_in.len()..]]);
                        if word.is_empty() {
                            continue;
                        }
                        let in_lexicon = lexicon.contains(&word);
                        if !in_lexicon && word.len() != 1 {
                            continue;
                        }
                        if rules.select(left_ctx.phonemes(), word.phonemes()) != rin {
                            continue;
                        }
                        if seen.insert((j, rout)) {
                            queue.push_back((j, rout));
                        }
                        edges.push(Edge {
                            start: i,
                            end: j,
                            word,
                            rule_in: rin,
                            rule_out: rout,
                            in_lexicon,
                        });
                    }
                }
            }
        }
        let edges = prune(edges, n);
        let mut lattice = if edges.is_empty() {
            Lattice {
                surface: surface.clone(),
                edges: vec![Edge {
                    start: 0,
                    end: n,
                    word: surface.clone(),
                    rule_in: None,
                    rule_out: None,
                    in_lexicon: lexicon.contains(surface),
                }],
                whole_fallback: true,
                outgoing: BTreeMap::new(),
            }
        } else {
            Lattice {
                surface: surface.clone(),
                edges,
                whole_fallback: false,
                outgoing: BTreeMap::new(),
            }
        };
        lattice.index();
        lattice
    }

    /// Lattice with the given edges, in the given order.
    pub fn from_edges(surface: PhonemeString, edges: Vec<Edge>) -> Lattice {
        let mut l = Lattice {
            surface,
            edges,
            whole_fallback: false,
            outgoing: BTreeMap::new(),
        };
        l.index();
        l
    }

    /// Rebuilds the adjacency index; needed after deserializing.
    pub fn index(&mut self) {
        self.outgoing.clear();
        for (k, e) in self.edges.iter().enumerate() {
            self.outgoing.entry(e.from_state()).or_default().push(k);
        }
    }

    pub fn len(&self) -> usize {
        self.surface.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface.is_empty()
    }

    pub fn start_state(&self) -> State {
        (0, None)
    }

    pub fn final_state(&self) -> State {
        (self.surface.len(), None)
    }

    pub fn outgoing(&self, state: State) -> &[usize] {
        self.outgoing.get(&state).map(Vec::as_slice).unwrap_or(&[])
    }

    /// States in an order where every edge goes forward.
    pub fn states(&self) -> Vec<State> {
        let mut st: BTreeSet<State> = self.edges.iter().flat_map(|e| [e.from_state(), e.to_state()]).collect();
        st.insert(self.start_state());
        st.into_iter().collect()
    }

    pub fn is_full_path(&self, path: &[usize]) -> bool {
        let mut state = self.start_state();
        for &k in path {
            match self.edges.get(k) {
                Some(e) if e.from_state() == state => state = e.to_state(),
                _ => return false,
            }
        }
        !path.is_empty() && state == self.final_state()
    }

    pub fn words(&self, path: &[usize]) -> Vec<PhonemeString> {
        path.iter().map(|&k| self.edges[k].word.clone()).collect()
    }

    /// The path spelling out `words`, if the lattice has one.
    ///
    /// The same word can leave a state under different pending rules; the
    /// following word decides which, so this backtracks.
    pub fn find_path(&self, words: &[PhonemeString]) -> Option<Vec<usize>> {
        fn go(l: &Lattice, state: State, words: &[PhonemeString], path: &mut Vec<usize>) -> bool {
            let Some((w, rest)) = words.split_first() else {
                return state == l.final_state();
            };
            for &k in l.outgoing(state) {
                if &l.edges[k].word == w {
                    path.push(k);
                    if go(l, l.edges[k].to_state(), rest, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }
        let mut path = Vec::with_capacity(words.len());
        (!words.is_empty() && go(self, self.start_state(), words, &mut path)).then_some(path)
    }

    /// Number of full paths, saturating.
    pub fn count_paths(&self) -> u128 {
        let mut count: BTreeMap<State, u128> = BTreeMap::new();
        count.insert(self.final_state(), 1);
        for st in self.states().into_iter().rev() {
            if st == self.final_state() {
                continue;
            }
            let c = self
                .outgoing(st)
                .iter()
                .map(|&k| count.get(&self.edges[k].to_state()).copied().unwrap_or(0))
                .fold(0u128, u128::saturating_add);
            count.insert(st, c);
        }
        count.get(&self.start_state()).copied().unwrap_or(0)
    }

    /// Every full path, or `None` when there are more than `limit`.
    pub fn enumerate_paths(&self, limit: usize) -> Option<Vec<Vec<usize>>> {
        if self.count_paths() > limit as u128 {
            return None;
        }
        let mut out = Vec::new();
        let mut stack = vec![(self.start_state(), Vec::new())];
        while let Some((st, path)) = stack.pop() {
            if st == self.final_state() && !path.is_empty() {
                out.push(path);
                continue;
            }
            for &k in self.outgoing(st).iter().rev() {
                let mut p = path.clone();
                p.push(k);
                stack.push((self.edges[k].to_state(), p));
            }
        }
        Some(out)
    }
}

/// Keeps only edges on some path from (0, NONE) to (n, NONE).
fn prune(edges: Vec<Edge>, n: usize) -> Vec<Edge> {
    let mut forward: BTreeSet<State> = BTreeSet::from([(0, None)]);
    let mut sorted: Vec<&Edge> = edges.iter().collect();
    sorted.sort_by_key(|e| e.start);
    for e in &sorted {
        if forward.contains(&e.from_state()) {
            forward.insert(e.to_state());
        }
    }
    let mut backward: BTreeSet<State> = BTreeSet::from([(n, None)]);
    for e in sorted.iter().rev() {
        if backward.contains(&e.to_state()) {
            backward.insert(e.from_state());
        }
    }
    let mut kept: Vec<Edge> = edges
        .into_iter()
        .filter(|e| forward.contains(&e.from_state()) && backward.contains(&e.to_state()))
        .collect();
    kept.sort_by(|a, b| {
        (a.start, a.rule_in, a.end, a.rule_out, &a.word).cmp(&(b.start, b.rule_in, b.end, b.rule_out, &b.word))
    });
    kept
}
