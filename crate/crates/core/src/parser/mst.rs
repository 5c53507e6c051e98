//! Maximum spanning arborescence decoding (Chu-Liu/Edmonds) with a single
//! root child, and an exhaustive reference decoder for small inputs.
//!
//! Scores are an (n+1)×(n+1) matrix indexed `[head][dependent]`; row 0 is
//! the virtual root and column 0 is ignored. Returned heads are 1-based
//! per dependent: `heads[d-1]` is the head of token d.

/// Sum of arc scores of `heads`, added in dependent order.
pub fn tree_score(scores: &[Vec<f64>], heads: &[usize]) -> f64 {
    heads.iter().enumerate().fold(0.0, |acc, (i, &h)| acc + scores[h][i + 1])
}

/// Exactly one root child and no cycles.
pub fn is_arborescence(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().any(|&h| h > n) || heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    for (i, &h) in heads.iter().enumerate() {
        if h == i + 1 {
            return false;
        }
        // Walking up from any token must reach the root within n steps.
        let mut cur = i + 1;
        let mut steps = 0;
        while cur != 0 {
            cur = heads[cur - 1];
            steps += 1;
            if steps > n {
                return false;
            }
        }
    }
    true
}

/// Highest-scoring single-root arborescence.
pub fn mst_decode(scores: &[Vec<f64>]) -> Vec<usize> {
    let n = scores.len() - 1;
    assert!(n >= 1, "no tokens");
    let free = cle(scores);
    if free[1..].iter().filter(|&&h| h == 0).count() == 1 {
        return free[1..].to_vec();
    }
    // Force each root child in turn; the first best wins.
    let mut best: Option<(Vec<usize>, f64)> = None;
    for c in 1..=n {
        let mut s = scores.to_vec();
        for (d, x) in s[0].iter_mut().enumerate().skip(1) {
            if d != c {
                *x = f64::NEG_INFINITY;
            }
        }
        let heads = cle(&s)[1..].to_vec();
        let total = tree_score(scores, &heads);
        if best.as_ref().is_none_or(|(_, b)| total > *b) {
            best = Some((heads, total));
        }
    }
    best.expect("n >= 1").0
}

/// Unconstrained Chu-Liu/Edmonds. Returns heads indexed by node, with
/// entry 0 unused.
fn cle(scores: &[Vec<f64>]) -> Vec<usize> {
    let m = scores.len();
    let mut heads = vec![0usize; m];
    for d in 1..m {
        let mut best = (0, f64::NEG_INFINITY);
        for (h, row) in scores.iter().enumerate() {
            if h != d && row[d] > best.1 {
                best = (h, row[d]);
            }
        }
        heads[d] = best.0;
    }
    let Some(cycle) = find_cycle(&heads) else { return heads };

    let in_cycle: Vec<bool> = (0..m).map(|v| cycle.contains(&v)).collect();
    // Old index of each surviving node; the contracted node goes last.
    let keep: Vec<usize> = (0..m).filter(|&v| !in_cycle[v]).collect();
    let c = keep.len();
    let mut new_of = vec![usize::MAX; m];
    for (i, &v) in keep.iter().enumerate() {
        new_of[v] = i;
    }
    let mut sub = vec![vec![f64::NEG_INFINITY; c + 1]; c + 1];
    // Best original endpoints for arcs touching the cycle.
    let mut enter_to = vec![0usize; c + 1];
    let mut leave_from = vec![0usize; c + 1];
    for (i, &u) in keep.iter().enumerate() {
        for (j, &v) in keep.iter().enumerate() {
            if u != v {
                sub[i][j] = scores[u][v];
            }
        }
        // u → cycle: enter at the cycle node whose head swap costs least.
        let mut best = (0, f64::NEG_INFINITY);
        for &v in &cycle {
            let s = scores[u][v] - scores[heads[v]][v];
            if s > best.1 {
                best = (v, s);
            }
        }
        sub[i][c] = best.1;
        enter_to[i] = best.0;
        // cycle → u, skipping the root which takes no head.
        if u != 0 {
            let mut best = (0, f64::NEG_INFINITY);
            for &w in &cycle {
                if scores[w][u] > best.1 {
                    best = (w, scores[w][u]);
                }
            }
            sub[c][i] = best.1;
            leave_from[i] = best.0;
        }
    }
    let sub_heads = cle(&sub);
    let mut out = heads.clone();
    for (i, &v) in keep.iter().enumerate().skip(1) {
        let h = sub_heads[i];
        out[v] = if h == c { leave_from[i] } else { keep[h] };
    }
    let entering = keep[sub_heads[c]];
    out[enter_to[sub_heads[c]]] = entering;
    out
}

/// Some cycle among non-root nodes, in order of discovery.
fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let m = heads.len();
    let mut color = vec![0u8; m]; // 0 new, 1 on current walk, 2 done
    color[0] = 2;
    for s in 1..m {
        let mut walk = Vec::new();
        let mut v = s;
        while color[v] == 0 {
            color[v] = 1;
            walk.push(v);
            v = heads[v];
        }
        if color[v] == 1 {
            let pos = walk.iter().position(|&x| x == v).expect("on walk");
            let mut cyc = walk[pos..].to_vec();
            cyc.sort_unstable();
            return Some(cyc);
        }
        for w in walk {
            color[w] = 2;
        }
    }
    None
}

/// Exhaustive search over all single-root arborescences; ties keep the
/// first tree in lexicographic head order.
pub fn brute_force_mst(scores: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = scores.len() - 1;
    let mut heads = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        if is_arborescence(&heads) {
            let s = tree_score(scores, &heads);
            if best.as_ref().is_none_or(|(_, b)| s > *b) {
                best = Some((heads.clone(), s));
            }
        }
        let mut k = n;
        loop {
            if k == 0 {
                return best.expect("a chain is always valid");
            }
            k -= 1;
            heads[k] += 1;
            if heads[k] <= n {
                break;
            }
            heads[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NEG: f64 = f64::NEG_INFINITY;

    #[test]
    fn single_token() {
        assert_eq!(mst_decode(&[vec![NEG, 3.0], vec![NEG, NEG]]), vec![0]);
    }

    #[test]
    fn two_tokens_chain() {
        // Arborescences: 0→1,0→2 (2, but two root children), 0→1→2 (6), 0→2→1 (1).
        let s = vec![vec![NEG, 1.0, 1.0], vec![NEG, NEG, 5.0], vec![NEG, 0.0, NEG]];
        assert_eq!(mst_decode(&s), vec![0, 1]);
        assert_eq!(brute_force_mst(&s), (vec![0, 1], 6.0));
    }

    #[test]
    fn contraction() {
        // 1 and 2 prefer each other; the root must break the cycle.
        let s = vec![
            vec![NEG, 2.0, 1.0, 0.0],
            vec![NEG, NEG, 10.0, 1.0],
            vec![NEG, 10.0, NEG, 3.0],
            vec![NEG, 0.0, 0.0, NEG],
        ];
        let heads = mst_decode(&s);
        assert!(is_arborescence(&heads));
        assert_eq!(tree_score(&s, &heads), brute_force_mst(&s).1);
        assert_eq!(heads, vec![0, 1, 2]);
    }

    #[test]
    fn single_root_enforced() {
        let s = vec![vec![NEG, 5.0, 5.0], vec![NEG, NEG, 0.0], vec![NEG, 0.0, NEG]];
        let heads = mst_decode(&s);
        assert!(is_arborescence(&heads));
        assert_eq!(heads, vec![0, 1]);
    }

    #[test]
    fn arborescence_check() {
        assert!(is_arborescence(&[0, 1, 1]));
        assert!(!is_arborescence(&[0, 0]));
        assert!(!is_arborescence(&[0, 3, 2]));
        assert!(!is_arborescence(&[2, 1]));
        assert!(!is_arborescence(&[0, 2]));
    }
}
