//! Compressed sparse row matrices and MatrixMarket I/O.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Real sparse matrix in compressed-row form.
///
/// Column indices are strictly increasing within each row; there are no
/// duplicate entries. Explicit zeros may be stored (e.g. cancelled stiffness
/// couplings) and are kept so that the pattern reflects mesh adjacency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from raw CSR arrays, validating the structural invariants.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 || row_offsets[0] != 0 {
            return Err(Error::InvalidInput("row offsets have wrong length or start".into()));
        }
        if *row_offsets.last().unwrap() != col_indices.len() || col_indices.len() != values.len() {
            return Err(Error::InvalidInput("row offsets disagree with entry count".into()));
        }
        for i in 0..n_rows {
            let (s, e) = (row_offsets[i], row_offsets[i + 1]);
            if s > e {
                return Err(Error::InvalidInput(format!("row offsets decrease at row {i}")));
            }
            let cols = &col_indices[s..e];
            if cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::InvalidInput(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("row {i} columns not strictly increasing")));
            }
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed in the
    /// order they appear, so the result is bitwise reproducible.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidInput(format!("triplet ({r}, {c}) out of range")));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for i in 0..n_rows {
            let mut entries: Vec<(usize, f64)> =
                (counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])).collect();
            // stable: duplicates keep insertion order
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                if col_indices.len() > row_offsets[i] && *col_indices.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_indices.push(c);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Zero-valued matrix with the given per-row sorted column pattern.
    pub fn from_pattern(n_cols: usize, pattern: &[Vec<usize>]) -> Result<Self> {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        for row in pattern {
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Self::from_csr(pattern.len(), n_cols, row_offsets, col_indices, vec![0.0; nnz])
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    /// Copies the nonzero entries of a dense matrix.
    pub fn from_dense(d: &DenseMatrix) -> Self {
        let mut trip = Vec::new();
        for i in 0..d.rows() {
            for j in 0..d.cols() {
                if d[(i, j)] != 0.0 {
                    trip.push((i, j, d[(i, j)]));
                }
            }
        }
        Self::from_triplets(d.rows(), d.cols(), &trip).expect("indices in range")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[s..e], &self.values[s..e])
    }

    /// Iterator over `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    /// Position of entry `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to a stored entry. Panics if `(i, j)` is outside the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) not in pattern"));
        self.values[k] += v;
    }

    /// Replaces every stored value `v` at `(i, j)` by `f(i, j, v)`.
    pub fn map_entries(&mut self, f: impl Fn(usize, usize, f64) -> f64) {
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                self.values[k] = f(i, self.col_indices[k], self.values[k]);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    /// `xᵀ M y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let trip: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.n_cols, self.n_rows, &trip).expect("indices in range")
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetric_part(&self) -> Self {
        let mut trip: Vec<_> = self.iter().map(|(i, j, v)| (i, j, 0.5 * v)).collect();
        trip.extend(self.iter().map(|(i, j, v)| (j, i, 0.5 * v)));
        Self::from_triplets(self.n_rows, self.n_cols, &trip).expect("indices in range")
    }

    /// Largest |m_ij − m_ji|.
    pub fn asymmetry(&self) -> f64 {
        self.iter().fold(0.0_f64, |w, (i, j, v)| w.max((v - self.get(j, i)).abs()))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    /// Coordinate-format MatrixMarket text (`real general`, 1-based).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.n_rows, self.n_cols, self.nnz());
        for (i, j, v) in self.iter() {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
        s
    }

    /// Parses coordinate MatrixMarket text (`real`/`integer`, `general` or `symmetric`).
    pub fn from_matrix_market(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))?;
        let h = header.to_ascii_lowercase();
        let tokens: Vec<&str> = h.split_whitespace().collect();
        if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
            return Err(Error::Parse(format!("unsupported MatrixMarket header `{header}`")));
        }
        if tokens[3] != "real" && tokens[3] != "integer" {
            return Err(Error::Parse(format!("unsupported field `{}`", tokens[3])));
        }
        let symmetric = match tokens[4] {
            "general" => false,
            "symmetric" => true,
            other => return Err(Error::Parse(format!("unsupported symmetry `{other}`"))),
        };
        let mut body = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
        let size = body.next().ok_or_else(|| Error::Parse("missing size line".into()))?;
        let dims: Vec<usize> = size
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad size line `{size}`"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Parse(format!("bad size line `{size}`")));
        }
        let (nr, nc, nnz) = (dims[0], dims[1], dims[2]);
        let mut trip = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
        for _ in 0..nnz {
            let line = body.next().ok_or_else(|| Error::Parse("truncated entry list".into()))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() < 3 {
                return Err(Error::Parse(format!("bad entry line `{line}`")));
            }
            let parse_idx = |s: &str| -> Result<usize> {
                let v: usize = s.parse().map_err(|_| Error::Parse(format!("bad index `{s}`")))?;
                v.checked_sub(1).ok_or_else(|| Error::Parse("index 0 in 1-based file".into()))
            };
            let (i, j) = (parse_idx(t[0])?, parse_idx(t[1])?);
            let v: f64 = t[2].parse().map_err(|_| Error::Parse(format!("bad value `{}`", t[2])))?;
            trip.push((i, j, v));
            if symmetric && i != j {
                trip.push((j, i, v));
            }
        }
        Self::from_triplets(nr, nc, &trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0)]).unwrap();
        assert_eq!(m.row_offsets(), &[0, 1, 3]);
        assert_eq!(m.col_indices(), &[1, 0, 2]);
        assert_eq!(m.values(), &[2.0, 3.0, 5.0]);
    }

    #[test]
    fn rejects_unsorted_rows() {
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let m = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.5), (2, 1, -0.1), (1, 2, 1e-300)]).unwrap();
        let back = SparseMatrix::from_matrix_market(&m.to_matrix_market()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn matrix_market_symmetric_expands() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2\n2 1 -1\n";
        let m = SparseMatrix::from_matrix_market(text).unwrap();
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
    }

    #[test]
    fn symmetric_part_is_symmetric() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (1, 0, 1.0), (0, 0, 2.0)]).unwrap();
        let s = m.symmetric_part();
        assert_eq!(s.get(0, 1), 2.0);
        assert_eq!(s.asymmetry(), 0.0);
    }
}
