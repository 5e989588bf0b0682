//! Fill-reducing orderings.

use std::collections::BTreeSet;

use super::sparse::SparseMatrix;

/// Minimum-degree ordering of the symmetrized pattern `A + Aᵀ`.
///
/// Runs on the explicit elimination graph; ties go to the smallest vertex
/// index, so the ordering is a deterministic function of the pattern.
/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn minimum_degree(a: &SparseMatrix) -> Vec<usize> {
    assert!(a.is_square(), "ordering needs a square matrix");
    let n = a.n_rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|i| (adj[i].len(), i)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let clique = std::mem::take(&mut adj[v]);
        for &u in &clique {
            queue.remove(&(adj[u].len(), u));
            let merged = merge_without(&adj[u], &clique, u, v);
            adj[u] = merged;
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

/// Sorted union of `a` and `b`, dropping `skip_a` and `skip_b`.
fn merge_without(a: &[usize], b: &[usize], skip_a: usize, skip_b: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
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
    out
}

/// Inverse of a permutation vector.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
