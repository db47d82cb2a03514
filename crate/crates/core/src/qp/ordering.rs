//! Minimum-degree fill-reducing ordering on an explicit elimination graph.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::sparse::CscMatrix;

/// Merges two sorted index lists, dropping `skip_a` and `skip_b`.
fn merge_without(a: &[usize], b: &[usize], skip_a: usize, skip_b: usize, out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        if next != skip_a && next != skip_b {
            out.push(next);
        }
    }
}

/// Returns `perm` with `perm[k]` the original index placed at position `k`.
/// Ties in degree go to the smallest index, so the result is deterministic.
pub fn minimum_degree(pattern: &CscMatrix) -> Vec<usize> {
    let n = pattern.ncols;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in pattern.entries() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }

    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut eliminated = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    let mut scratch = Vec::new();

    while let Some(Reverse((deg, p))) = heap.pop() {
        if eliminated[p] || deg != adj[p].len() {
            continue;
        }
        eliminated[p] = true;
        perm.push(p);
        let nbrs = core::mem::take(&mut adj[p]);
        for &u in &nbrs {
            merge_without(&adj[u], &nbrs, u, p, &mut scratch);
            core::mem::swap(&mut adj[u], &mut scratch);
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    perm
}

pub fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::sparse::Triplets;

    #[test]
    fn arrow_matrix_puts_hub_last() {
        // hub 0 connected to everything; eliminating it first fills the graph
        let n = 6;
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
            if i > 0 {
                t.push(0, i, 1.0);
            }
        }
        let perm = minimum_degree(&t.to_csc());
        assert_eq!(perm.len(), n);
        // the hub goes once at most one leaf is left
        assert!(perm.iter().position(|&p| p == 0).unwrap() >= n - 2);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        let inv = inverse(&perm);
        assert!(perm.iter().enumerate().all(|(k, &p)| inv[p] == k));
    }

    #[test]
    fn merge_drops_self_and_pivot() {
        let mut out = Vec::new();
        merge_without(&[1, 3, 5], &[2, 3, 4, 7], 4, 5, &mut out);
        assert_eq!(out, [1, 2, 3, 7]);
    }
}
