//! Sparse LU factorization (left-looking, Gilbert–Peierls) with a
//! minimum-degree column pre-ordering and threshold partial pivoting.

use super::dense::DenseMatrix;
use super::ordering::minimum_degree;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Relative pivot magnitude (against the largest entry of the pivot row in
/// the input matrix) below which the matrix is declared singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-12;

/// Pivot selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotPolicy {
    /// Largest-magnitude candidate in the column, except that the diagonal
    /// entry is kept whenever it is at least `threshold` times that maximum.
    Partial { threshold: f64 },
    /// Always pivot on the (symmetrically permuted) diagonal. Used for the
    /// symmetric positive-definiteness test; no row exchanges.
    Diagonal,
}

impl Default for PivotPolicy {
    fn default() -> Self {
        PivotPolicy::Partial { threshold: 0.1 }
    }
}

/// Compressed-column triangular factor.
#[derive(Debug, Clone)]
struct CscFactor {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// `P A Q = L U` with unit-lower `L` and upper `U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// `pinv[i]` = pivot position of original row `i`.
    pinv: Vec<usize>,
    /// `q[k]` = original column eliminated at step `k`.
    q: Vec<usize>,
    l: CscFactor,
    u: CscFactor,
    pivots: Vec<f64>,
}

impl LuFactors {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        Self::factor_with(a, PivotPolicy::default())
    }

    pub fn factor_with(a: &SparseMatrix, policy: PivotPolicy) -> Result<Self> {
        let q = if a.is_square() { minimum_degree(a) } else { Vec::new() };
        Self::factor_ordered(a, q, policy)
    }

    /// Factorization with a caller-supplied column ordering.
    pub fn factor_ordered(a: &SparseMatrix, q: Vec<usize>, policy: PivotPolicy) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput(format!("{}x{} matrix is not square", a.n_rows(), a.n_cols())));
        }
        let n = a.n_rows();
        assert_eq!(q.len(), n, "ordering length mismatch");

        let mut row_max = vec![0.0_f64; n];
        for (i, _, v) in a.iter() {
            row_max[i] = row_max[i].max(v.abs());
        }
        if let Some(i) = row_max.iter().position(|&m| m == 0.0) {
            return Err(Error::Singular(format!("row {i} is identically zero")));
        }

        // column access to A
        let at = a.transpose();
        let (ap, ai, ax) = (at.row_offsets(), at.col_indices(), at.values());

        const UNSET: usize = usize::MAX;
        let mut pinv = vec![UNSET; n];
        let mut l = CscFactor { col_ptr: vec![0; n + 1], row_idx: Vec::new(), values: Vec::new() };
        let mut u = CscFactor { col_ptr: vec![0; n + 1], row_idx: Vec::new(), values: Vec::new() };
        let mut pivots = Vec::with_capacity(n);

        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut marked = vec![false; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];

        for k in 0..n {
            l.col_ptr[k] = l.row_idx.len();
            u.col_ptr[k] = u.row_idx.len();
            let col = q[k];
            let (bs, be) = (ap[col], ap[col + 1]);

            // pattern of x = L \ A(:, col), in topological order xi[top..n]
            let mut top = n;
            for p in bs..be {
                let start = ai[p];
                if marked[start] {
                    continue;
                }
                top = dfs(start, &l, &pinv, &mut marked, &mut stack, &mut pstack, &mut xi, top);
            }
            for &j in &xi[top..n] {
                marked[j] = false;
                x[j] = 0.0;
            }
            for p in bs..be {
                x[ai[p]] = ax[p];
            }
            for px in top..n {
                let j = xi[px];
                let jl = pinv[j];
                if jl == UNSET {
                    continue;
                }
                let (s, e) = (l.col_ptr[jl], l.col_ptr[jl + 1]);
                let xj = x[j];
                for p in s + 1..e {
                    x[l.row_idx[p]] -= l.values[p] * xj;
                }
            }

            // pivot selection
            let mut ipiv = UNSET;
            let mut amax = -1.0_f64;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    if x[i].abs() > amax {
                        amax = x[i].abs();
                        ipiv = i;
                    }
                } else {
                    u.row_idx.push(pinv[i]);
                    u.values.push(x[i]);
                }
            }
            match policy {
                PivotPolicy::Partial { threshold } => {
                    if pinv[col] == UNSET && x[col].abs() >= amax * threshold && x[col] != 0.0 {
                        ipiv = col;
                    }
                }
                PivotPolicy::Diagonal => {
                    if pinv[col] != UNSET {
                        return Err(Error::Singular(format!("diagonal {col} already pivotal")));
                    }
                    ipiv = col;
                }
            }
            if ipiv == UNSET {
                return Err(Error::Singular(format!("no pivot candidate at step {k} (column {col})")));
            }
            let pivot = x[ipiv];
            if pivot.abs() <= SINGULARITY_THRESHOLD * row_max[ipiv] {
                return Err(Error::Singular(format!(
                    "pivot {pivot:e} at step {k} below threshold (row max {:e})",
                    row_max[ipiv]
                )));
            }
            u.row_idx.push(k);
            u.values.push(pivot);
            pivots.push(pivot);
            pinv[ipiv] = k;
            l.row_idx.push(ipiv);
            l.values.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    l.row_idx.push(i);
                    l.values.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l.col_ptr[n] = l.row_idx.len();
        u.col_ptr[n] = u.row_idx.len();
        for r in &mut l.row_idx {
            *r = pinv[*r];
        }
        Ok(Self { n, pinv, q, l, u, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal of `U` in elimination order.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// `pinv[i]` = pivot position of original row `i`.
    pub fn row_permutation_inverse(&self) -> &[usize] {
        &self.pinv
    }

    pub fn column_permutation(&self) -> &[usize] {
        &self.q
    }

    /// Number of stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l.values.len() + self.u.values.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.solve_into(b, &mut out);
        out
    }

    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert_eq!(out.len(), n);
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.pinv[i]] = b[i];
        }
        let l = &self.l;
        for j in 0..n {
            let (s, e) = (l.col_ptr[j], l.col_ptr[j + 1]);
            let xj = x[j];
            if xj != 0.0 {
                for p in s + 1..e {
                    x[l.row_idx[p]] -= l.values[p] * xj;
                }
            }
        }
        let u = &self.u;
        for j in (0..n).rev() {
            let (s, e) = (u.col_ptr[j], u.col_ptr[j + 1]);
            x[j] /= u.values[e - 1];
            let xj = x[j];
            if xj != 0.0 {
                for p in s..e - 1 {
                    x[u.row_idx[p]] -= u.values[p] * xj;
                }
            }
        }
        for k in 0..n {
            out[self.q[k]] = x[k];
        }
    }

    /// Dense `(L, U)`; for testing small factorizations.
    pub fn dense_factors(&self) -> (DenseMatrix, DenseMatrix) {
        let n = self.n;
        let mut l = DenseMatrix::zeros(n, n);
        let mut u = DenseMatrix::zeros(n, n);
        for j in 0..n {
            for p in self.l.col_ptr[j]..self.l.col_ptr[j + 1] {
                l[(self.l.row_idx[p], j)] = self.l.values[p];
            }
            for p in self.u.col_ptr[j]..self.u.col_ptr[j + 1] {
                u[(self.u.row_idx[p], j)] = self.u.values[p];
            }
        }
        (l, u)
    }
}

/// Iterative depth-first search from `start` over the graph of `L`;
/// pushes finished vertices onto `xi` below `top` and returns the new top.
#[allow(clippy::too_many_arguments)]
fn dfs(
    start: usize,
    l: &CscFactor,
    pinv: &[usize],
    marked: &mut [bool],
    stack: &mut [usize],
    pstack: &mut [usize],
    xi: &mut [usize],
    mut top: usize,
) -> usize {
    let mut head = 0usize;
    stack[0] = start;
    loop {
        let j = stack[head];
        let jl = pinv[j];
        if !marked[j] {
            marked[j] = true;
            pstack[head] = if jl == usize::MAX { 0 } else { l.col_ptr[jl] };
        }
        let end = if jl == usize::MAX { 0 } else { l.col_ptr[jl + 1] };
        let mut descended = false;
        let mut p = pstack[head];
        while p < end {
            let i = l.row_idx[p];
            p += 1;
            if !marked[i] {
                pstack[head] = p;
                head += 1;
                stack[head] = i;
                descended = true;
                break;
            }
        }
        if !descended {
            top -= 1;
            xi[top] = j;
            if head == 0 {
                return top;
            }
            head -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn tridiagonal_against_dense_solve() {
        let a = tridiag(10);
        let b: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
        let x = LuFactors::factor(&a).unwrap().solve(&b);
        let oracle = a.to_dense().inverse().unwrap().matvec(&b);
        let r = a.matvec(&x);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res / bn < 1e-12);
        for (p, q) in x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_factors_are_identity() {
        let lu = LuFactors::factor(&SparseMatrix::identity(5)).unwrap();
        let (l, u) = lu.dense_factors();
        assert_eq!(l, DenseMatrix::identity(5));
        assert_eq!(u, DenseMatrix::identity(5));
    }

    #[test]
    fn zero_row_is_singular() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (2, 2, 1.0), (2, 1, 1.0)]).unwrap();
        assert!(matches!(LuFactors::factor(&a), Err(Error::Singular(_))));
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = LuFactors::factor(&a).unwrap().solve(&[2.0, 3.0]);
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn factors_reconstruct_permuted_matrix() {
        let a = SparseMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 1.0), (0, 2, 5.0), (1, 1, -2.0), (1, 3, 1.0), (2, 0, 4.0), (2, 2, 1.0), (3, 1, 3.0), (3, 3, 7.0)],
        )
        .unwrap();
        let lu = LuFactors::factor(&a).unwrap();
        let (l, u) = lu.dense_factors();
        let lu_prod = l.matmul(&u);
        let d = a.to_dense();
        let pinv = lu.row_permutation_inverse();
        let q = lu.column_permutation();
        for i in 0..4 {
            for k in 0..4 {
                assert!((lu_prod[(pinv[i], k)] - d[(i, q[k])]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_policy_reports_indefinite_pivots() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let lu = LuFactors::factor_with(&a, PivotPolicy::Diagonal).unwrap();
        assert!(lu.pivots().iter().any(|&p| p < 0.0));
    }
}
