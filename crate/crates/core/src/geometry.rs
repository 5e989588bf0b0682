//! Per-element geometry: basis gradients, face normals, altitudes in the
//! Euclidean and `D^{-1}` metrics, metric dihedral angles and the affine map
//! from the equilateral reference simplex.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::mesh::SimplicialMesh;

/// Angles are kept inside `[ANGLE_CLAMP, pi - ANGLE_CLAMP]`.
pub const ANGLE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementGeometry {
    pub dim: usize,
    pub volume: f64,
    /// Largest Euclidean edge length.
    pub diameter: f64,
    /// `grad phi_j` for each local vertex `j`.
    pub grad_basis: Vec<Vec<f64>>,
    /// Unit normals of the faces opposite each vertex, signed so that
    /// `grad phi_j = -q_j / h_j`.
    pub inner_normals: Vec<Vec<f64>>,
    /// Euclidean altitude from vertex `j` to its opposite face.
    pub altitudes: Vec<f64>,
    /// Jacobian of the affine map from the unit-edge equilateral simplex.
    pub jacobian: DenseMatrix,
}

fn reference_edges(dim: usize) -> DenseMatrix {
    let s3 = 3f64.sqrt();
    match dim {
        2 => DenseMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, s3 / 2.0]),
        _ => DenseMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.5, 0.5, 0.0, s3 / 2.0, s3 / 6.0, 0.0, 0.0, (2.0f64 / 3.0).sqrt()],
        ),
    }
}

impl ElementGeometry {
    pub fn from_points(points: &[&[f64]]) -> Result<Self> {
        let dim = points[0].len();
        if points.len() != dim + 1 {
            return Err(Error::InvalidInput(format!("{} points do not form a {dim}-simplex", points.len())));
        }
        // columns are p_i - p_0
        let mut e = DenseMatrix::zeros(dim, dim);
        for i in 0..dim {
            for r in 0..dim {
                e[(r, i)] = points[i + 1][r] - points[0][r];
            }
        }
        let det = e.determinant();
        let fact: f64 = (1..=dim).map(|i| i as f64).product();
        let volume = det.abs() / fact;
        let einv = e.inverse().map_err(|_| Error::InvalidInput("degenerate simplex".into()))?;
        let mut grad_basis = vec![vec![0.0; dim]; dim + 1];
        for i in 0..dim {
            for c in 0..dim {
                grad_basis[i + 1][c] = einv[(i, c)];
                grad_basis[0][c] -= einv[(i, c)];
            }
        }
        let mut inner_normals = Vec::with_capacity(dim + 1);
        let mut altitudes = Vec::with_capacity(dim + 1);
        for g in &grad_basis {
            let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            inner_normals.push(g.iter().map(|x| -x / n).collect());
            altitudes.push(1.0 / n);
        }
        let mut diameter = 0.0_f64;
        for a in 0..=dim {
            for b in a + 1..=dim {
                let d2: f64 = points[a].iter().zip(points[b]).map(|(x, y)| (x - y) * (x - y)).sum();
                diameter = diameter.max(d2.sqrt());
            }
        }
        let jacobian = e.matmul(&reference_edges(dim).inverse().expect("reference simplex is regular"));
        Ok(Self { dim, volume, diameter, grad_basis, inner_normals, altitudes, jacobian })
    }

    pub fn of_element(mesh: &SimplicialMesh, k: usize) -> Self {
        Self::from_points(&mesh.element_points(k)).expect("mesh elements are nondegenerate")
    }

    /// `(grad phi_j)^T D grad phi_k` from the gradients.
    pub fn stiffness_kernel(&self, d_k: &DenseMatrix, j: usize, k: usize) -> f64 {
        d_k.bilinear(&self.grad_basis[j], &self.grad_basis[k])
    }

    /// Altitudes measured in the metric `D^{-1}`.
    pub fn metric_altitudes(&self, d_k: &DenseMatrix) -> Vec<f64> {
        (0..=self.dim).map(|j| 1.0 / self.stiffness_kernel(d_k, j, j).sqrt()).collect()
    }

    /// Dihedral angle in the metric `D^{-1}` between the faces opposite local
    /// vertices `j` and `k`. In 2D this is the angle at the third vertex,
    /// i.e. the angle facing edge `(j, k)`.
    pub fn metric_angle(&self, d_k: &DenseMatrix, j: usize, k: usize) -> Result<f64> {
        if j == k {
            return Err(Error::InvalidInput("dihedral angle needs two distinct faces".into()));
        }
        let (qj, qk) = (&self.inner_normals[j], &self.inner_normals[k]);
        let jj = d_k.bilinear(qj, qj);
        let kk = d_k.bilinear(qk, qk);
        if !(jj > 0.0 && kk > 0.0) {
            return Err(Error::CoefficientValidity("D_K is not positive definite".into()));
        }
        let cos = (-d_k.bilinear(qj, qk) / (jj * kk).sqrt()).clamp(-1.0, 1.0);
        Ok(cos.acos().clamp(ANGLE_CLAMP, std::f64::consts::PI - ANGLE_CLAMP))
    }

    pub fn max_metric_angle(&self, d_k: &DenseMatrix) -> Result<f64> {
        let mut best = 0.0_f64;
        for j in 0..=self.dim {
            for k in j + 1..=self.dim {
                best = best.max(self.metric_angle(d_k, j, k)?);
            }
        }
        Ok(best)
    }

    /// `-cos(alpha_jk) / (h_j h_k)` in the metric `D^{-1}`; equals
    /// [`Self::stiffness_kernel`] for `j != k`.
    pub fn stiffness_from_angle(&self, d_k: &DenseMatrix, j: usize, k: usize) -> Result<f64> {
        let h = self.metric_altitudes(d_k);
        let (qj, qk) = (&self.inner_normals[j], &self.inner_normals[k]);
        // unclamped cosine so the identity is exact
        let cos = -d_k.bilinear(qj, qk) / (d_k.bilinear(qj, qj) * d_k.bilinear(qk, qk)).sqrt();
        if j == k {
            return Err(Error::InvalidInput("identity holds for distinct faces only".into()));
        }
        Ok(-cos / (h[j] * h[k]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_right() -> ElementGeometry {
        ElementGeometry::from_points(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]).unwrap()
    }

    #[test]
    fn right_triangle_angles() {
        let g = unit_right();
        let id = DenseMatrix::identity(2);
        // faces opposite (1,0) and (0,1) are the legs: angle at the origin
        assert!((g.metric_angle(&id, 1, 2).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((g.metric_angle(&id, 0, 1).unwrap() - PI / 4.0).abs() < 1e-12);
        assert!((g.metric_angle(&id, 0, 2).unwrap() - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn right_triangle_gradients_by_hand() {
        let g = unit_right();
        assert_eq!(g.grad_basis, vec![vec![-1.0, -1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let id = DenseMatrix::identity(2);
        assert_eq!(g.stiffness_kernel(&id, 1, 2), 0.0);
        assert_eq!(g.stiffness_kernel(&id, 0, 1), -1.0);
        assert!((g.volume - 0.5).abs() < 1e-15);
    }

    #[test]
    fn equilateral_is_sixty_degrees() {
        let g = ElementGeometry::from_points(&[&[0.0, 0.0], &[1.0, 0.0], &[0.5, 3f64.sqrt() / 2.0]]).unwrap();
        assert!((g.max_metric_angle(&DenseMatrix::identity(2)).unwrap() - PI / 3.0).abs() < 1e-12);
        // reference map is a rigid motion here
        let jtj = g.jacobian.transpose().matmul(&g.jacobian);
        assert!(jtj.sub(&DenseMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn normals_follow_gradient_convention() {
        let g = ElementGeometry::from_points(&[&[0.1, 0.2], &[0.9, 0.3], &[0.4, 1.1]]).unwrap();
        for j in 0..3 {
            for c in 0..2 {
                assert!((g.grad_basis[j][c] + g.inner_normals[j][c] / g.altitudes[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn tetrahedron_partition_of_unity() {
        let g = ElementGeometry::from_points(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]])
            .unwrap();
        for c in 0..3 {
            assert!(g.grad_basis.iter().map(|v| v[c]).sum::<f64>().abs() < 1e-15);
        }
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-15);
        // dihedral angle between two coordinate faces is pi/2
        assert!((g.metric_angle(&DenseMatrix::identity(3), 1, 2).unwrap() - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_points_are_rejected() {
        assert!(ElementGeometry::from_points(&[&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]]).is_err());
    }
}
