//! Matrix-level certificates: Z-matrix sign pattern, irreducibility,
//! positive definiteness of the symmetric part, and a dense
//! inverse-positivity / Perron oracle for small systems.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ordering::minimum_degree;
use crate::linalg::{DenseLu, DenseMatrix, LuFactors, PivotPolicy, SparseMatrix};

/// Relative tolerance for sign tests and graph edges.
pub const ENTRY_TOLERANCE: f64 = 1e-14;
/// Default size limit for the dense oracle.
pub const DEFAULT_ORACLE_LIMIT: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZCheck {
    pub pass: bool,
    /// `(row, col, value)` of offending entries in row-major order.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Nonpositive off-diagonal and nonnegative diagonal, both up to
/// `1e-14 max|a|`.
pub fn z_matrix_check(a: &SparseMatrix) -> ZCheck {
    let tol = ENTRY_TOLERANCE * a.max_abs();
    let violations: Vec<_> = a
        .iter()
        .filter(|&(i, j, v)| if i == j { v < -tol } else { v > tol })
        .collect();
    ZCheck { pass: violations.is_empty(), violations }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Irreducibility {
    pub irreducible: bool,
    pub strongly_connected_components: usize,
}

/// Strong connectivity of the graph with an arc `j -> k` for every
/// `|a_jk| > 1e-14 max|a|`.
pub fn irreducibility(a: &SparseMatrix) -> Irreducibility {
    let n = a.n_rows();
    let tol = ENTRY_TOLERANCE * a.max_abs();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let (cols, vals) = a.row(i);
            cols.iter().zip(vals).filter(|&(&j, v)| j != i && v.abs() > tol).map(|(&j, _)| j).collect()
        })
        .collect();
    let count = tarjan_components(&adj);
    Irreducibility { irreducible: n <= 1 || count == 1, strongly_connected_components: count }
}

/// Number of strongly connected components (iterative Tarjan).
fn tarjan_components(adj: &[Vec<usize>]) -> usize {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut count = 0;
    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge == 0 && index[v] == UNVISITED {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*edge) {
                *edge += 1;
                if index[w] == UNVISITED {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                count += 1;
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    if w == v {
                        break;
                    }
                }
            }
        }
    }
    count
}

/// Outcome of the M-matrix certification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCertificate {
    pub is_z_matrix: bool,
    pub z_violation_count: usize,
    pub first_z_violation: Option<(usize, usize, f64)>,
    pub is_irreducible: bool,
    pub strongly_connected_components: usize,
    pub spd_symmetric_part: bool,
    /// Why positive definiteness failed, if it did.
    pub spd_failure: Option<String>,
    pub is_m_matrix: bool,
    pub method: String,
}

impl MatrixCertificate {
    /// Irreducible M-matrix.
    pub fn passes(&self) -> bool {
        self.is_m_matrix && self.is_irreducible
    }
}

/// Positive definiteness of `(A + A^T)/2` by pivot signs of a symmetric
/// minimum-degree ordered elimination.
pub fn symmetric_part_positive_definite(a: &SparseMatrix) -> std::result::Result<(), String> {
    let s = a.symmetric_part();
    if s.n_rows() == 0 {
        return Ok(());
    }
    let q = minimum_degree(&s);
    match LuFactors::factor_ordered(&s, q, PivotPolicy::Diagonal) {
        Ok(f) => match f.pivots().iter().position(|&p| !(p > 0.0)) {
            None => Ok(()),
            Some(k) => Err(format!("indefinite: pivot {} at step {k} is not positive", f.pivots()[k])),
        },
        Err(e) => Err(format!("indefinite or singular: {e}")),
    }
}

/// Z-matrix with positive definite symmetric part, plus irreducibility.
pub fn m_matrix_certificate(a: &SparseMatrix) -> Result<MatrixCertificate> {
    if !a.is_square() {
        return Err(Error::InvalidInput("certificate needs a square matrix".into()));
    }
    let z = z_matrix_check(a);
    let irr = irreducibility(a);
    let spd = symmetric_part_positive_definite(a);
    Ok(MatrixCertificate {
        is_z_matrix: z.pass,
        z_violation_count: z.violations.len(),
        first_z_violation: z.violations.first().copied(),
        is_irreducible: irr.irreducible,
        strongly_connected_components: irr.strongly_connected_components,
        spd_symmetric_part: spd.is_ok(),
        is_m_matrix: z.pass && spd.is_ok(),
        spd_failure: spd.err(),
        method: "Z-matrix sign pattern + LDL-type pivot positivity of (A+A^T)/2 under minimum-degree ordering"
            .to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerronOracle {
    pub inverse_positive: bool,
    pub min_inverse_entry: f64,
    /// Dominant eigenvalue of `A^{-1} B` from power iteration.
    pub perron_value: f64,
    pub perron_vector: Vec<f64>,
    pub perron_vector_positive: bool,
    pub power_iterations: usize,
    pub power_converged: bool,
}

const POWER_MAX_ITER: usize = 50_000;
const POWER_TOL: f64 = 1e-13;

/// Dense brute-force check of `A^{-1} > 0` and power iteration on `A^{-1} B`.
pub fn perron_oracle(a: &SparseMatrix, b: &SparseMatrix, n_limit: usize) -> Result<PerronOracle> {
    let n = a.n_rows();
    if n > n_limit {
        return Err(Error::SizeLimit { size: n, limit: n_limit });
    }
    if n == 0 || !a.is_square() || b.n_rows() != n || !b.is_square() {
        return Err(Error::InvalidInput("oracle needs nonempty square A and B of equal size".into()));
    }
    let inv = DenseLu::factor(&a.to_dense())?.inverse()?;
    let scale = inv.max_abs();
    let min_inverse_entry = inv.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let inverse_positive = min_inverse_entry > ENTRY_TOLERANCE * scale;
    let op: DenseMatrix = inv.matmul(&b.to_dense());

    let mut x = vec![1.0; n];
    let mut value = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < POWER_MAX_ITER {
        iterations += 1;
        let y = op.matvec(&x);
        let imax = (0..n).max_by(|&i, &j| y[i].abs().total_cmp(&y[j].abs())).unwrap();
        let peak = y[imax];
        if peak == 0.0 {
            return Err(Error::NumericalFailure("power iteration hit the zero vector".into()));
        }
        let next: Vec<f64> = y.iter().map(|v| v / peak).collect();
        let change = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        value = peak / x[imax];
        x = next;
        if change < POWER_TOL {
            converged = true;
            break;
        }
    }
    // one-signed check after flipping to a positive maximum
    let imax = (0..n).max_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs())).unwrap();
    if x[imax] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let perron_vector_positive = x.iter().all(|&v| v > 0.0);
    Ok(PerronOracle {
        inverse_positive,
        min_inverse_entry,
        perron_value: value,
        perron_vector: x,
        perron_vector_positive,
        power_iterations: iterations,
        power_converged: converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::coefficients::catalog;
    use crate::mesh::{SimplicialMesh, StructuredKind};

    fn stiffness(name: &str, kind: StructuredKind, j: usize) -> (SparseMatrix, SparseMatrix) {
        let m = SimplicialMesh::generate_structured(kind, j).unwrap();
        let s = assemble(&m, &catalog(name).unwrap()).unwrap();
        (s.a, s.b)
    }

    #[test]
    fn laplace_is_irreducible_m_matrix() {
        let (a, _) = stiffness("laplace", StructuredKind::Mesh45, 7);
        let c = m_matrix_certificate(&a).unwrap();
        assert!(c.is_z_matrix && c.spd_symmetric_part && c.is_m_matrix && c.is_irreducible);
        assert!(c.passes());
    }

    #[test]
    fn mesh135_anisotropic_is_not_z() {
        let (a, _) = stiffness("ex5_1", StructuredKind::Mesh135, 9);
        let c = m_matrix_certificate(&a).unwrap();
        assert!(!c.is_z_matrix && !c.is_m_matrix);
        let (i, j, v) = c.first_z_violation.unwrap();
        assert!(i != j && v > 0.0);
    }

    #[test]
    fn identity_and_negative_identity() {
        let c = m_matrix_certificate(&SparseMatrix::identity(4)).unwrap();
        assert!(c.is_m_matrix && !c.is_irreducible);
        assert_eq!(c.strongly_connected_components, 4);
        let neg = SparseMatrix::from_diagonal(&[-1.0, -1.0]);
        let c = m_matrix_certificate(&neg).unwrap();
        assert!(!c.is_z_matrix && !c.spd_symmetric_part && !c.is_m_matrix);
        assert!(c.spd_failure.is_some());
    }

    #[test]
    fn block_diagonal_has_two_components() {
        let d = DenseMatrix::from_row_slice(
            4,
            4,
            &[2.0, -1.0, 0.0, 0.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0, -1.0, 0.0, 0.0, -1.0, 2.0],
        );
        let r = irreducibility(&SparseMatrix::from_dense(&d));
        assert!(!r.irreducible);
        assert_eq!(r.strongly_connected_components, 2);
        assert!(irreducibility(&SparseMatrix::identity(1)).irreducible);
    }

    #[test]
    fn directed_cycle_versus_chain() {
        // 0 -> 1 -> 2 -> 0 is strongly connected; dropping 2 -> 0 leaves three components
        let cycle = SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 1, -1.0), (1, 2, -1.0), (2, 0, -1.0)]).unwrap();
        assert!(irreducibility(&cycle).irreducible);
        let chain = SparseMatrix::from_triplets(3, 3, &[(0, 1, -1.0), (1, 2, -1.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(irreducibility(&chain).strongly_connected_components, 3);
    }

    #[test]
    fn cancellation_zeros_are_not_edges() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1e-20), (1, 0, 1e-20), (1, 1, 1.0)]).unwrap();
        assert!(!irreducibility(&a).irreducible);
    }

    #[test]
    fn oracle_laplace_and_mesh135() {
        let (a, b) = stiffness("laplace", StructuredKind::Mesh45, 5);
        let o = perron_oracle(&a, &b, DEFAULT_ORACLE_LIMIT).unwrap();
        assert!(o.inverse_positive && o.perron_vector_positive && o.power_converged);
        let (a, b) = stiffness("ex5_1", StructuredKind::Mesh135, 5);
        let o = perron_oracle(&a, &b, DEFAULT_ORACLE_LIMIT).unwrap();
        assert!(!o.inverse_positive);
    }

    #[test]
    fn oracle_identity() {
        let i = SparseMatrix::identity(3);
        let o = perron_oracle(&i, &i, 10).unwrap();
        assert!((o.perron_value - 1.0).abs() < 1e-15 && o.perron_vector_positive);
        assert!(matches!(perron_oracle(&SparseMatrix::identity(11), &SparseMatrix::identity(11), 10), Err(Error::SizeLimit { .. })));
    }
}
