//! Eager reverse-mode differentiation over small dense vectors.
//!
//! A `Graph` records every intermediate while the forward pass runs, so the
//! value of any node is available immediately. `backward` then walks the
//! tape in reverse and accumulates parameter gradients into `Grads`.

use std::collections::BTreeSet;

use super::{Grads, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Const,
    Param(ParamId),
    Lookup(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    LogSigmoid(NodeId),
    Dot(NodeId, NodeId),
    Sum(NodeId),
    SumOf(Vec<NodeId>),
    Concat(Vec<NodeId>),
    Pick(NodeId, usize),
    LogSoftmaxNll(NodeId, usize),
    Crf(Box<CrfTape>),
}

#[derive(Debug, Clone)]
struct CrfTape {
    emissions: Vec<NodeId>,
    trans: ParamId,
    start: ParamId,
    end: ParamId,
    /// Gradient of the loss w.r.t. each emission vector.
    d_emit: Vec<Vec<f64>>,
    d_trans: Vec<f64>,
    d_start: Vec<f64>,
    d_end: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    dense_reads: BTreeSet<ParamId>,
    row_reads: BTreeSet<(ParamId, usize)>,
}

impl<'a> Graph<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            dense_reads: BTreeSet::new(),
            row_reads: BTreeSet::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn value(&self, n: NodeId) -> &[f64] {
        &self.nodes[n.0].value
    }

    /// Value of a one-element node.
    pub fn scalar_value(&self, n: NodeId) -> f64 {
        let v = self.value(n);
        debug_assert_eq!(v.len(), 1);
        v[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Parameter entries the forward pass has read, as flat (param, index)
    /// ranges. Entries outside this set cannot influence any node value.
    pub(crate) fn read_entries(&self) -> Vec<(ParamId, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        for &p in &self.dense_reads {
            out.push((p, 0..self.store.get(p).values.len()));
        }
        for &(p, row) in &self.row_reads {
            if self.dense_reads.contains(&p) {
                continue;
            }
            let cols = self.store.get(p).cols;
            out.push((p, row * cols..(row + 1) * cols));
        }
        out
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Const)
    }

    pub fn scalar(&mut self, value: f64) -> NodeId {
        self.push(vec![value], Op::Const)
    }

    /// The whole parameter, flattened row-major.
    pub fn param(&mut self, p: ParamId) -> NodeId {
        self.dense_reads.insert(p);
        let v = self.store.get(p).values.clone();
        self.push(v, Op::Param(p))
    }

    pub fn lookup(&mut self, p: ParamId, row: usize) -> NodeId {
        self.row_reads.insert((p, row));
        let v = self.store.row(p, row).to_vec();
        self.push(v, Op::Lookup(p, row))
    }

    pub fn matvec(&mut self, w: ParamId, x: NodeId) -> NodeId {
        self.dense_reads.insert(w);
        let param = self.store.get(w);
        let xv = &self.nodes[x.0].value;
        assert_eq!(param.cols, xv.len(), "matvec shape mismatch for {}", param.name);
        let out = param
            .values
            .chunks_exact(param.cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(out, Op::MatVec(w, x))
    }

    fn zip_with(&self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.len(), bv.len(), "elementwise shape mismatch");
        av.iter().zip(bv).map(|(x, y)| f(*x, *y)).collect()
    }

    fn map(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes[a.0].value.iter().map(|x| f(*x)).collect()
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip_with(a, b, |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip_with(a, b, |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.zip_with(a, b, |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.map(a, |x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, |x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    /// Elementwise log σ(x), computed without overflow.
    pub fn log_sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.map(a, log_sigmoid);
        self.push(v, Op::LogSigmoid(a))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: f64 = self.zip_with(a, b, |x, y| x * y).iter().sum();
        self.push(vec![v], Op::Dot(a, b))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = self.nodes[a.0].value.iter().sum();
        self.push(vec![v], Op::Sum(a))
    }

    /// Elementwise sum of equally shaped nodes, added in the order given.
    pub fn sum_of(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "sum_of needs at least one node");
        let mut v = vec![0.0; self.nodes[parts[0].0].value.len()];
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.len(), v.len(), "sum_of shape mismatch");
            for (acc, x) in v.iter_mut().zip(pv) {
                *acc += x;
            }
        }
        self.push(v, Op::SumOf(parts.to_vec()))
    }

    pub fn mean(&mut self, parts: &[NodeId]) -> NodeId {
        let s = self.sum_of(parts);
        self.scale(s, 1.0 / parts.len() as f64)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts.iter().flat_map(|p| self.nodes[p.0].value.iter().copied()).collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    pub fn pick(&mut self, a: NodeId, i: usize) -> NodeId {
        let v = self.nodes[a.0].value[i];
        self.push(vec![v], Op::Pick(a, i))
    }

    /// −log softmax(logits)[target].
    pub fn log_softmax_nll(&mut self, logits: NodeId, target: usize) -> NodeId {
        let v = &self.nodes[logits.0].value;
        let loss = log_sum_exp(v) - v[target];
        self.push(vec![loss], Op::LogSoftmaxNll(logits, target))
    }

    /// Negative log-likelihood of `gold` under a linear-chain CRF.
    ///
    /// `emissions[t]` scores each tag at position t; `trans` is a T×T matrix
    /// indexed (previous, next); `start` and `end` are length-T vectors.
    pub fn crf_nll(&mut self, emissions: &[NodeId], trans: ParamId, start: ParamId, end: ParamId, gold: &[usize]) -> NodeId {
        assert_eq!(emissions.len(), gold.len());
        assert!(!emissions.is_empty(), "crf over an empty sequence");
        self.dense_reads.extend([trans, start, end]);
        let tr = &self.store.get(trans).values;
        let st = &self.store.get(start).values;
        let en = &self.store.get(end).values;
        let nt = st.len();
        let em: Vec<&[f64]> = emissions.iter().map(|e| self.nodes[e.0].value.as_slice()).collect();
        let n = em.len();

        let mut alpha = vec![vec![0.0; nt]; n];
        for j in 0..nt {
            alpha[0][j] = st[j] + em[0][j];
        }
        let mut buf = vec![0.0; nt];
        for t in 1..n {
            for j in 0..nt {
                for i in 0..nt {
                    buf[i] = alpha[t - 1][i] + tr[i * nt + j];
                }
                alpha[t][j] = log_sum_exp(&buf) + em[t][j];
            }
        }
        let mut beta = vec![vec![0.0; nt]; n];
        beta[n - 1].copy_from_slice(en);
        for t in (0..n - 1).rev() {
            for i in 0..nt {
                for j in 0..nt {
                    buf[j] = tr[i * nt + j] + em[t + 1][j] + beta[t + 1][j];
                }
                beta[t][i] = log_sum_exp(&buf);
            }
        }
        let fin: Vec<f64> = (0..nt).map(|j| alpha[n - 1][j] + en[j]).collect();
        let log_z = log_sum_exp(&fin);

        let mut gold_score = st[gold[0]] + en[gold[n - 1]];
        for t in 0..n {
            gold_score += em[t][gold[t]];
            if t > 0 {
                gold_score += tr[gold[t - 1] * nt + gold[t]];
            }
        }

        // Expected counts minus gold counts.
        let mut d_emit = vec![vec![0.0; nt]; n];
        let mut d_trans = vec![0.0; nt * nt];
        let mut d_start = vec![0.0; nt];
        let mut d_end = vec![0.0; nt];
        for t in 0..n {
            for j in 0..nt {
                d_emit[t][j] = (alpha[t][j] + beta[t][j] - log_z).exp();
            }
            d_emit[t][gold[t]] -= 1.0;
        }
        for j in 0..nt {
            d_start[j] = d_emit[0][j] + if j == gold[0] { 1.0 } else { 0.0 };
            d_end[j] = d_emit[n - 1][j] + if j == gold[n - 1] { 1.0 } else { 0.0 };
        }
        d_start[gold[0]] -= 1.0;
        d_end[gold[n - 1]] -= 1.0;
        for t in 1..n {
            for i in 0..nt {
                for j in 0..nt {
                    d_trans[i * nt + j] += (alpha[t - 1][i] + tr[i * nt + j] + em[t][j] + beta[t][j] - log_z).exp();
                }
            }
            d_trans[gold[t - 1] * nt + gold[t]] -= 1.0;
        }

        let tape = CrfTape {
            emissions: emissions.to_vec(),
            trans,
            start,
            end,
            d_emit,
            d_trans,
            d_start,
            d_end,
        };
        self.push(vec![log_z - gold_score], Op::Crf(Box::new(tape)))
    }

    /// Accumulates d(root)/d(param) into `grads`, scaled by `weight`.
    pub fn backward(&self, root: NodeId, weight: f64, grads: &mut Grads) {
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![weight; self.nodes[root.0].value.len()]);
        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut send = |to: NodeId, delta: &dyn Fn(usize) -> f64| {
                let len = self.nodes[to.0].value.len();
                let slot = adj[to.0].get_or_insert_with(|| vec![0.0; len]);
                for (k, s) in slot.iter_mut().enumerate() {
                    *s += delta(k);
                }
            };
            match &node.op {
                Op::Const => {}
                Op::Param(p) => grads.add_slice(*p, 0, &g),
                Op::Lookup(p, row) => {
                    let cols = self.store.get(*p).cols;
                    grads.add_slice(*p, row * cols, &g);
                }
                Op::MatVec(w, x) => {
                    let param = self.store.get(*w);
                    let xv = &self.nodes[x.0].value;
                    let gw = grads.slice_mut(*w);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr == 0.0 {
                            continue;
                        }
                        for (c, xc) in xv.iter().enumerate() {
                            gw[r * param.cols + c] += gr * xc;
                        }
                    }
                    let vals = &param.values;
                    let cols = param.cols;
                    send(*x, &|c| g.iter().enumerate().map(|(r, gr)| gr * vals[r * cols + c]).sum());
                }
                Op::Add(a, b) => {
                    send(*a, &|k| g[k]);
                    send(*b, &|k| g[k]);
                }
                Op::Sub(a, b) => {
                    send(*a, &|k| g[k]);
                    send(*b, &|k| -g[k]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    send(*a, &|k| g[k] * bv[k]);
                    send(*b, &|k| g[k] * av[k]);
                }
                Op::Scale(a, c) => send(*a, &|k| g[k] * c),
                Op::Tanh(a) => {
                    let y = &node.value;
                    send(*a, &|k| g[k] * (1.0 - y[k] * y[k]));
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    send(*a, &|k| g[k] * y[k] * (1.0 - y[k]));
                }
                Op::Relu(a) => {
                    let x = &self.nodes[a.0].value;
                    send(*a, &|k| if x[k] > 0.0 { g[k] } else { 0.0 });
                }
                Op::LogSigmoid(a) => {
                    let x = &self.nodes[a.0].value;
                    send(*a, &|k| g[k] * sigmoid(-x[k]));
                }
                Op::Dot(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    send(*a, &|k| g[0] * bv[k]);
                    send(*b, &|k| g[0] * av[k]);
                }
                Op::Sum(a) => send(*a, &|_| g[0]),
                Op::SumOf(parts) => {
                    for p in parts {
                        send(*p, &|k| g[k]);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.nodes[p.0].value.len();
                        send(*p, &|k| g[off + k]);
                        off += len;
                    }
                }
                Op::Pick(a, i) => send(*a, &|k| if k == *i { g[0] } else { 0.0 }),
                Op::LogSoftmaxNll(a, target) => {
                    let v = &self.nodes[a.0].value;
                    let lse = log_sum_exp(v);
                    send(*a, &|k| g[0] * ((v[k] - lse).exp() - if k == *target { 1.0 } else { 0.0 }));
                }
                Op::Crf(tape) => {
                    for (t, e) in tape.emissions.iter().enumerate() {
                        send(*e, &|k| g[0] * tape.d_emit[t][k]);
                    }
                    let scaled = |v: &[f64]| v.iter().map(|x| x * g[0]).collect::<Vec<_>>();
                    grads.add_slice(tape.trans, 0, &scaled(&tape.d_trans));
                    grads.add_slice(tape.start, 0, &scaled(&tape.d_start));
                    grads.add_slice(tape.end, 0, &scaled(&tape.d_end));
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
