//! Operator data `D`, `b`, `c`, the built-in problem catalog and per-element
//! coefficient statistics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense::symmetric_eigenvalues, DenseMatrix};
use crate::mesh::SimplicialMesh;
use crate::quadrature;

/// Symmetry tolerance for sampled diffusion tensors.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Slack allowed in `c - div(b)/2 >= 0`.
pub const ASSUMPTION_TOLERANCE: f64 = 1e-12;

pub type MatrixField = Arc<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Coefficients of `-div(D grad u) + b.grad u + c u`.
#[derive(Clone)]
pub struct ProblemCoefficients {
    pub label: String,
    pub dim: usize,
    pub diffusion: MatrixField,
    pub convection: VectorField,
    pub reaction: ScalarField,
    /// Analytic divergence of `convection`.
    pub convection_divergence: ScalarField,
    /// True when `convection` is identically zero; enables symmetric-only checks.
    pub convection_free: bool,
    /// Published principal eigenvalue, where one is known.
    pub reference_eigenvalue: Option<f64>,
}

impl fmt::Debug for ProblemCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemCoefficients")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("convection_free", &self.convection_free)
            .field("reference_eigenvalue", &self.reference_eigenvalue)
            .finish_non_exhaustive()
    }
}

/// Per-element averages and sampled sup-norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementCoefficientStats {
    pub d_k: DenseMatrix,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub b_sup: f64,
    pub c_sup: f64,
}

/// Names accepted by [`catalog`].
pub const CATALOG_NAMES: [&str; 7] = ["ex5_1", "ex5_2", "ex5_3", "ex5_4", "ex5_5k10", "ex5_5k100", "laplace"];

/// User problem with constant coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantProblem {
    #[serde(default = "default_label")]
    pub label: String,
    pub diffusion: Vec<Vec<f64>>,
    #[serde(default)]
    pub convection: Option<Vec<f64>>,
    #[serde(default)]
    pub reaction: Option<f64>,
}

fn default_label() -> String {
    "custom".to_string()
}

impl ProblemCoefficients {
    /// Constant-coefficient problem. `D` must be symmetric positive definite.
    pub fn constant(label: &str, d: DenseMatrix, b: Vec<f64>, c: f64) -> Result<Self> {
        let dim = d.rows();
        if !d.is_square() || !(2..=3).contains(&dim) {
            return Err(Error::CoefficientValidity(format!(
                "diffusion must be 2x2 or 3x3, got {}x{}",
                d.rows(),
                d.cols()
            )));
        }
        if b.len() != dim {
            return Err(Error::CoefficientValidity(format!("convection has {} components, expected {dim}", b.len())));
        }
        if !c.is_finite() || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::CoefficientValidity("non-finite coefficient".into()));
        }
        validate_diffusion(&d, &[0.0; 3][..dim])?;
        let convection_free = b.iter().all(|&x| x == 0.0);
        Ok(Self {
            label: label.to_string(),
            dim,
            diffusion: Arc::new(move |_| d.clone()),
            convection: Arc::new(move |_| b.clone()),
            reaction: Arc::new(move |_| c),
            convection_divergence: Arc::new(|_| 0.0),
            convection_free,
            reference_eigenvalue: None,
        })
    }

    /// Parses a JSON descriptor `{label, diffusion, convection, reaction}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ConstantProblem = serde_json::from_str(text)?;
        let dim = p.diffusion.len();
        if p.diffusion.iter().any(|r| r.len() != dim) {
            return Err(Error::CoefficientValidity("diffusion must be a square matrix".into()));
        }
        let d = DenseMatrix::from_rows(&p.diffusion);
        let b = p.convection.unwrap_or_else(|| vec![0.0; dim]);
        Self::constant(&p.label, d, b, p.reaction.unwrap_or(0.0))
    }

    /// Checks `c - div(b)/2 >= -1e-12` at the given points; returns the
    /// smallest value seen.
    pub fn assumption_check(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst = f64::INFINITY;
        for x in points {
            let v = (self.reaction)(x) - 0.5 * (self.convection_divergence)(x);
            if v < -ASSUMPTION_TOLERANCE {
                return Err(Error::CoefficientValidity(format!(
                    "c - div(b)/2 = {v:e} < 0 at {x:?}"
                )));
            }
            worst = worst.min(v);
        }
        Ok(worst)
    }

    /// `D_K`, its eigenvalue extremes and sampled sup-norms of `b` and `c`.
    pub fn element_stats(&self, mesh: &SimplicialMesh, k: usize) -> Result<ElementCoefficientStats> {
        let dim = mesh.dim();
        if dim != self.dim {
            return Err(Error::InvalidParameter(format!(
                "problem `{}` is {}-dimensional but the mesh is {dim}-dimensional",
                self.label, self.dim
            )));
        }
        let pts = mesh.element_points(k);
        let rule = quadrature::degree_two(dim);
        let mut d_k = DenseMatrix::zeros(dim, dim);
        let mut b_sup = 0.0_f64;
        let mut c_sup = 0.0_f64;
        for (bary, &w) in rule.barycentric.iter().zip(&rule.weights) {
            let x = quadrature::map_point(&pts, bary);
            let d = (self.diffusion)(&x);
            validate_diffusion(&d, &x)?;
            d_k = d_k.add(&d.scale(w));
            b_sup = b_sup.max(euclid(&(self.convection)(&x)));
            c_sup = c_sup.max((self.reaction)(&x).abs());
        }
        for p in &pts {
            b_sup = b_sup.max(euclid(&(self.convection)(p)));
            c_sup = c_sup.max((self.reaction)(p).abs());
        }
        let eig = symmetric_eigenvalues(&d_k);
        let (lambda_min, lambda_max) = (eig[0], eig[eig.len() - 1]);
        if lambda_min <= 0.0 {
            return Err(Error::CoefficientValidity(format!("D_K of element {k} is not positive definite")));
        }
        Ok(ElementCoefficientStats { d_k, lambda_min, lambda_max, b_sup, c_sup })
    }
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn validate_diffusion(d: &DenseMatrix, x: &[f64]) -> Result<()> {
    if d.asymmetry() > SYMMETRY_TOLERANCE * d.max_abs().max(1.0) {
        return Err(Error::CoefficientValidity(format!("diffusion is not symmetric at {x:?}")));
    }
    let eig = symmetric_eigenvalues(d);
    if !(eig[0] > 0.0) {
        return Err(Error::CoefficientValidity(format!(
            "diffusion is not positive definite at {x:?} (min eigenvalue {:e})",
            eig[0]
        )));
    }
    Ok(())
}

/// `D = I`, `b = 0`, `c = 0` in `dim` dimensions.
pub fn laplace(dim: usize) -> ProblemCoefficients {
    let mut p = ProblemCoefficients::constant("laplace", DenseMatrix::identity(dim), vec![0.0; dim], 0.0)
        .expect("identity is a valid diffusion");
    if dim == 2 {
        p.reference_eigenvalue = Some(2.0 * PI * PI);
    }
    p
}

fn zero_vector() -> VectorField {
    Arc::new(|_| vec![0.0, 0.0])
}

fn scalar(c: f64) -> ScalarField {
    Arc::new(move |_| c)
}

/// `R(t) diag(l1, l2) R(t)^T` with `R` the counterclockwise rotation.
pub fn rotated_diagonal(theta: f64, l1: f64, l2: f64) -> DenseMatrix {
    let (s, c) = theta.sin_cos();
    let xy = (l1 - l2) * c * s;
    DenseMatrix::from_row_slice(2, 2, &[l1 * c * c + l2 * s * s, xy, xy, l1 * s * s + l2 * c * c])
}

fn ex5_5(k: f64, reference: f64) -> ProblemCoefficients {
    ProblemCoefficients {
        label: format!("ex5_5k{k}"),
        dim: 2,
        diffusion: Arc::new(move |x| {
            let (sx, sy) = (x[0].sin(), x[1].sin());
            let theta = PI * sx * sy;
            rotated_diagonal(theta, k * (1.0 - 0.5 * sx * sy), 1.0 + 0.5 * x[0].cos() * x[1].cos())
        }),
        convection: zero_vector(),
        reaction: scalar(0.0),
        convection_divergence: scalar(0.0),
        convection_free: true,
        reference_eigenvalue: Some(reference),
    }
}

/// Built-in problems on the unit square.
pub fn catalog(name: &str) -> Result<ProblemCoefficients> {
    let aniso = DenseMatrix::from_row_slice(2, 2, &[10.0, 9.0, 9.0, 10.0]);
    let p = match name {
        "laplace" => laplace(2),
        "ex5_1" => {
            let mut p = ProblemCoefficients::constant("ex5_1", aniso, vec![0.0, 0.0], 0.0)?;
            p.reference_eigenvalue = Some(150.288);
            p
        }
        "ex5_2" => {
            let mut p = ProblemCoefficients::constant("ex5_2", aniso, vec![50.0, -50.0], 1.0)?;
            p.reference_eigenvalue = Some(1401.39);
            p
        }
        "ex5_3" => ProblemCoefficients {
            label: "ex5_3".into(),
            dim: 2,
            diffusion: Arc::new(|x| {
                DenseMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0 + 0.05 * (PI * x[0]).cos(), 0.0, 0.0, 1.0 + 0.05 * (PI * x[1]).sin()],
                )
            }),
            convection: Arc::new(|x| vec![20.0 * (x[1] - 0.5), -20.0 * (x[0] - 0.5)]),
            reaction: scalar(1.0),
            convection_divergence: scalar(0.0),
            convection_free: false,
            reference_eigenvalue: Some(21.0714),
        },
        "ex5_4" => ProblemCoefficients {
            label: "ex5_4".into(),
            dim: 2,
            diffusion: Arc::new(|x| {
                let t = PI * x[0] * x[1];
                DenseMatrix::from_row_slice(2, 2, &[100.0 * (1.0 - 0.5 * t.sin()), 0.0, 0.0, 1.0 + 0.5 * t.cos()])
            }),
            convection: zero_vector(),
            reaction: scalar(0.0),
            convection_divergence: scalar(0.0),
            convection_free: true,
            reference_eigenvalue: Some(687.666),
        },
        "ex5_5k10" => ex5_5(10.0, 170.422),
        "ex5_5k100" => ex5_5(100.0, 1020.15),
        _ => {
            return Err(Error::UnknownProblem(format!(
                "`{name}` (known: {})",
                CATALOG_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::StructuredKind;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push(vec![i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]);
            }
        }
        v
    }

    #[test]
    fn ex5_1_stats() {
        let p = catalog("ex5_1").unwrap();
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 5).unwrap();
        for k in 0..m.n_elements() {
            let s = p.element_stats(&m, k).unwrap();
            assert!((s.d_k[(0, 0)] - 10.0).abs() < 1e-13 && (s.d_k[(0, 1)] - 9.0).abs() < 1e-13);
            assert!((s.lambda_min - 1.0).abs() < 1e-12 && (s.lambda_max - 19.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ex5_2_b_sup() {
        let p = catalog("ex5_2").unwrap();
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 3).unwrap();
        let s = p.element_stats(&m, 0).unwrap();
        assert!((s.b_sup - 50.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.c_sup, 1.0);
        assert_eq!((p.reaction)(&[0.3, 0.7]), 1.0);
    }

    #[test]
    fn identity_stats() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh135, 3).unwrap();
        let s = laplace(2).element_stats(&m, 3).unwrap();
        assert_eq!((s.lambda_min, s.lambda_max), (1.0, 1.0));
        assert_eq!(((laplace(2).convection_divergence)(&[0.2, 0.1])), 0.0);
    }

    #[test]
    fn ex5_3_diffusion_at_origin() {
        let d = (catalog("ex5_3").unwrap().diffusion)(&[0.0, 0.0]);
        assert_eq!(d, DenseMatrix::from_row_slice(2, 2, &[1.05, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn element_average_of_affine_field_is_centroid_value() {
        // D affine in x: the degree-2 average equals D at the centroid
        let p = ProblemCoefficients {
            diffusion: Arc::new(|x| DenseMatrix::from_row_slice(2, 2, &[1.0 + x[0], 0.0, 0.0, 2.0 + x[1]])),
            ..laplace(2)
        };
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 4).unwrap();
        for k in 0..m.n_elements() {
            let pts = m.element_points(k);
            let cx = (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0;
            let cy = (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0;
            let s = p.element_stats(&m, k).unwrap();
            assert!((s.d_k[(0, 0)] - 1.0 - cx).abs() < 1e-14 && (s.d_k[(1, 1)] - 2.0 - cy).abs() < 1e-14);
        }
    }

    #[test]
    fn catalog_satisfies_assumption() {
        let pts = grid(100);
        for name in CATALOG_NAMES {
            let p = catalog(name).unwrap();
            assert!(p.assumption_check(&pts).unwrap() >= 0.0, "{name}");
        }
    }

    #[test]
    fn ex5_5_spectrum_is_preserved_by_rotation() {
        for (name, k) in [("ex5_5k10", 10.0), ("ex5_5k100", 100.0)] {
            let p = catalog(name).unwrap();
            for x in grid(25) {
                let ev = symmetric_eigenvalues(&(p.diffusion)(&x));
                let (sx, sy) = (x[0].sin(), x[1].sin());
                let mut want = [k * (1.0 - 0.5 * sx * sy), 1.0 + 0.5 * x[0].cos() * x[1].cos()];
                want.sort_by(f64::total_cmp);
                assert!((ev[0] - want[0]).abs() < 1e-10 * k && (ev[1] - want[1]).abs() < 1e-10 * k);
            }
        }
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(catalog("ex9"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn json_descriptor() {
        let p = ProblemCoefficients::from_json(
            r#"{"label":"aniso","diffusion":[[2,1],[1,2]],"convection":[1,0],"reaction":0.5}"#,
        )
        .unwrap();
        assert_eq!(p.label, "aniso");
        assert!(!p.convection_free);
        assert_eq!((p.reaction)(&[0.0, 0.0]), 0.5);
        let bad = ProblemCoefficients::from_json(r#"{"diffusion":[[1,2],[2,1]]}"#);
        assert!(matches!(bad, Err(Error::CoefficientValidity(_))));
        let asym = ProblemCoefficients::from_json(r#"{"diffusion":[[1,0.5],[0,1]]}"#);
        assert!(matches!(asym, Err(Error::CoefficientValidity(_))));
    }

    #[test]
    fn negative_reaction_fails_assumption() {
        let p = ProblemCoefficients::constant("neg", DenseMatrix::identity(2), vec![0.0, 0.0], -1.0).unwrap();
        assert!(p.assumption_check(&grid(3)).is_err());
    }
}
