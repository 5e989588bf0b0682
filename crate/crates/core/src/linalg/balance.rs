//! Diagonal similarity balancing of sparse matrices.
//!
//! For every structurally symmetric pair `a_ij, a_ji` the scaled entries
//! `a_ij d_j / d_i` and `a_ji d_i / d_j` have equal magnitude exactly when
//! `log d_j - log d_i = (log|a_ji| - log|a_ij|) / 2`. The scaling solves this
//! in the least-squares sense (a graph Laplacian system) and rounds to powers
//! of two, so applying it is exact in floating point.

use super::lu::LuFactors;
use super::sparse::SparseMatrix;
use crate::error::Result;

/// Pairs with `min(|a_ij|, |a_ji|)` below this fraction of the larger entry
/// carry no usable ratio and are skipped.
pub const PAIR_RATIO_FLOOR: f64 = 1e-8;
/// Relative pull of `log d` towards zero; fixes the free constant per
/// connected component.
const ANCHOR: f64 = 1e-8;
/// Keeps scaled vectors clear of underflow.
const MIN_EXPONENT: i32 = -1000;

/// Power-of-two diagonal `d` equalizing `|a_ij|` and `|a_ji|` in `D^{-1} A D`
/// as far as a single diagonal can. The largest entry is 1.
pub fn balance_scaling(a: &SparseMatrix) -> Result<Vec<f64>> {
    assert!(a.is_square(), "balancing needs a square matrix");
    let n = a.n_rows();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; n];
    let mut degree = vec![0.0_f64; n];
    for (i, j, aij) in a.iter() {
        if j <= i {
            continue;
        }
        let aji = a.get(j, i);
        let (lo, hi) = (aij.abs().min(aji.abs()), aij.abs().max(aji.abs()));
        if hi == 0.0 || lo < PAIR_RATIO_FLOOR * hi {
            continue;
        }
        // target t = log d_j - log d_i
        let t = 0.5 * (aji.abs().ln() - aij.abs().ln());
        triplets.push((i, j, -1.0));
        triplets.push((j, i, -1.0));
        degree[i] += 1.0;
        degree[j] += 1.0;
        rhs[i] -= t;
        rhs[j] += t;
    }
    if triplets.is_empty() {
        return Ok(vec![1.0; n]);
    }
    for (i, &g) in degree.iter().enumerate() {
        triplets.push((i, i, g + ANCHOR * g.max(1.0)));
    }
    let laplacian = SparseMatrix::from_triplets(n, n, &triplets)?;
    let log_d = LuFactors::factor(&laplacian)?.solve(&rhs);
    let top = log_d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(log_d
        .into_iter()
        .map(|x| 2f64.powi((((x - top) / std::f64::consts::LN_2).round() as i32).max(MIN_EXPONENT)))
        .collect())
}

/// `D^{-1} A D` for a diagonal `d`.
pub fn similarity_scale(a: &SparseMatrix, d: &[f64]) -> SparseMatrix {
    let mut out = a.clone();
    out.map_entries(|i, j, v| v * d[j] / d[i]);
    out
}
