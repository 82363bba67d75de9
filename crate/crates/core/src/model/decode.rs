//! Tree decoding from arc scores.

use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    /// Maximum spanning arborescence (Chu-Liu/Edmonds).
    #[default]
    Mst,
    /// Independent best head per token; may produce cycles.
    Greedy,
}

/// `arc_scores[[i, h]]` scores head `h` (0 = ROOT) for dependent `i + 1`.
/// Returns one head per dependent.
pub fn decode_heads(arc_scores: &Matrix, decoder: Decoder) -> Vec<usize> {
    match decoder {
        Decoder::Mst => chu_liu_edmonds(arc_scores),
        Decoder::Greedy => greedy(arc_scores),
    }
}

fn greedy(arc_scores: &Matrix) -> Vec<usize> {
    (0..arc_scores.nrows())
        .map(|i| best_head(|h| arc_scores[[i, h]], i + 1, arc_scores.ncols()))
        .collect()
}

/// Highest-scoring head other than `dep`, lowest index on ties.
fn best_head(score: impl Fn(usize) -> f64, dep: usize, n_heads: usize) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for h in (0..n_heads).filter(|&h| h != dep) {
        let s = score(h);
        if best == usize::MAX || s > best_score {
            best = h;
            best_score = s;
        }
    }
    best
}

/// Maximum spanning arborescence rooted at 0 over an `n × (n + 1)` score
/// matrix laid out as in [`decode_heads`].
pub fn chu_liu_edmonds(arc_scores: &Matrix) -> Vec<usize> {
    let n = arc_scores.nrows();
    if n == 0 {
        return Vec::new();
    }
    // weights[d][h] over nodes 0..=n; row 0 (the root) is never used.
    let mut weights = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for d in 1..=n {
        for h in 0..=n {
            if h != d {
                weights[d][h] = arc_scores[[d - 1, h]];
            }
        }
    }
    let heads = contract(&weights);
    heads[1..].to_vec()
}

fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let m = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; m];
    state[0] = 2;
    for start in 1..m {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v];
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&p| p == v).expect("on path");
            let cycle = path[pos..].to_vec();
            return Some(cycle);
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

fn contract(weights: &[Vec<f64>]) -> Vec<usize> {
    let m = weights.len();
    let mut best = vec![usize::MAX; m];
    for d in 1..m {
        best[d] = best_head(|h| weights[d][h], d, m);
    }
    let Some(cycle) = find_cycle(&best) else {
        return best;
    };

    let mut in_cycle = vec![false; m];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    // Nodes outside the cycle keep their relative order; the cycle is last.
    let outside: Vec<usize> = (0..m).filter(|&v| !in_cycle[v]).collect();
    let c = outside.len();

    let mut sub = vec![vec![f64::NEG_INFINITY; c + 1]; c + 1];
    let mut enter = vec![usize::MAX; m];
    let mut leave = vec![usize::MAX; m];
    for (nd, &d) in outside.iter().enumerate().skip(1) {
        for (nh, &h) in outside.iter().enumerate() {
            sub[nd][nh] = weights[d][h];
        }
        let mut best_v = usize::MAX;
        let mut best_s = f64::NEG_INFINITY;
        for &v in &cycle {
            let s = weights[d][v];
            if best_v == usize::MAX || s > best_s || (s == best_s && v < best_v) {
                best_v = v;
                best_s = s;
            }
        }
        sub[nd][c] = best_s;
        leave[d] = best_v;
    }
    for (nh, &h) in outside.iter().enumerate() {
        let mut best_v = usize::MAX;
        let mut best_s = f64::NEG_INFINITY;
        for &v in &cycle {
            let s = weights[v][h] - weights[v][best[v]];
            if best_v == usize::MAX || s > best_s || (s == best_s && v < best_v) {
                best_v = v;
                best_s = s;
            }
        }
        sub[c][nh] = best_s;
        enter[h] = best_v;
    }

    let sub_heads = contract(&sub);
    let mut heads = vec![usize::MAX; m];
    for (nd, &d) in outside.iter().enumerate().skip(1) {
        let nh = sub_heads[nd];
        heads[d] = if nh == c { leave[d] } else { outside[nh] };
    }
    let entering_from = outside[sub_heads[c]];
    let v = enter[entering_from];
    for &u in &cycle {
        heads[u] = best[u];
    }
    heads[v] = entering_from;
    heads
}

/// Whether `heads` (one per dependent, 1-based dependents) forms a tree
/// rooted at 0.
pub fn is_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().enumerate().any(|(i, &h)| h > n || h == i + 1) {
        return false;
    }
    let mut full = vec![0];
    full.extend_from_slice(heads);
    find_cycle(&full).is_none()
}

/// Sum of the selected arc scores, in dependent order.
pub fn tree_score(arc_scores: &Matrix, heads: &[usize]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(i, &h)| arc_scores[[i, h]])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn greedy_tree_returned_unchanged() {
        // token 1 -> 2, token 2 -> root, token 3 -> 2
        let s = array![
            [0.0, 0.1, 5.0, 0.2],
            [5.0, 0.3, 0.0, 0.1],
            [0.0, 0.1, 5.0, 0.0],
        ];
        assert_eq!(greedy(&s), vec![2, 0, 2]);
        assert_eq!(chu_liu_edmonds(&s), vec![2, 0, 2]);
    }

    #[test]
    fn two_token_cycle_broken() {
        // Greedy: 1 <- 2 and 2 <- 1. Candidate trees:
        //   {1<-0, 2<-1}: 1 + 9 = 10
        //   {2<-0, 1<-2}: 3 + 10 = 13
        //   {1<-0, 2<-0}: 1 + 3 = 4
        let s = array![[1.0, 0.0, 10.0], [3.0, 9.0, 0.0]];
        assert_eq!(greedy(&s), vec![2, 1]);
        assert!(!is_tree(&greedy(&s)));
        let heads = chu_liu_edmonds(&s);
        assert_eq!(heads, vec![2, 0]);
        assert!(is_tree(&heads));
        assert_eq!(tree_score(&s, &heads), 13.0);
    }

    #[test]
    fn ties_prefer_lower_head() {
        let s = array![[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        assert_eq!(chu_liu_edmonds(&s), vec![0, 0]);
    }

    #[test]
    fn tree_check() {
        assert!(is_tree(&[2, 0, 2]));
        assert!(is_tree(&[0, 0]));
        assert!(!is_tree(&[2, 1]));
        assert!(!is_tree(&[1]));
        assert!(!is_tree(&[4, 0]));
    }
}
