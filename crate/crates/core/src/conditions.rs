//! Sufficient mesh conditions for an (irreducible) M-matrix stiffness
//! matrix: the nonobtuse metric-angle condition, the 2D Delaunay-type
//! condition, angle aggregates, entry bounds and M-uniformity scores.

use std::f64::consts::PI;

use serde::Serialize;

use crate::assembly::{AssembledSystem, ElementData};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::ElementGeometry;
use crate::linalg::DenseMatrix;
use crate::mesh::SimplicialMesh;
use crate::quadrature;

/// A value passes strictly when it is below its bound by more than this,
/// and weakly when it exceeds the bound by at most this.
pub const STRICT_MARGIN: f64 = 1e-10;

/// `arccot` with range `(0, pi)`.
pub fn arccot(x: f64) -> f64 {
    PI / 2.0 - x.atan()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Strict,
    Weak,
    Fail,
}

fn classify(value: f64, bound: f64) -> (bool, bool) {
    (value < bound - STRICT_MARGIN, value <= bound + STRICT_MARGIN)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElementCondition {
    pub element: usize,
    pub alpha_max: f64,
    /// Argument of the arccos in the bound.
    pub bound_argument: f64,
    /// `None` when the argument exceeds 1.
    pub bound: Option<f64>,
    pub pass_strict: bool,
    pub pass_weak: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCondition {
    pub vertices: (usize, usize),
    pub elements: (usize, usize),
    /// Facing angles in the two elements.
    pub alpha_k: f64,
    pub alpha_k_prime: f64,
    pub theta: f64,
    /// Left-hand side with the convection/reaction perturbation.
    pub lhs: f64,
    /// Left-hand side with `Theta = 0`.
    pub lhs_unperturbed: f64,
    /// Both endpoints are interior vertices (edge enters the verdict).
    pub interior: bool,
    pub pass_strict: bool,
    pub pass_weak: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub alpha_max: f64,
    pub alpha_max_over_pi: f64,
    /// Max over edges shared by two elements of the `Theta = 0` sum (2D only).
    pub alpha_sum: Option<f64>,
    pub alpha_sum_over_pi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub nonobtuse_weak: bool,
    pub nonobtuse_strict: bool,
    /// `None` outside 2D.
    pub delaunay_weak: Option<bool>,
    pub delaunay_strict: Option<bool>,
    pub interiorly_connected: bool,
    pub interior_components: usize,
    pub no_interior_vertices: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub per_element: Vec<ElementCondition>,
    pub per_edge: Vec<EdgeCondition>,
    pub aggregates: Aggregates,
    pub verdicts: Verdicts,
}

impl ConditionReport {
    /// Strict: a strict condition holds and the interior is connected.
    /// Weak: some condition holds at least weakly.
    pub fn level(&self) -> Level {
        let v = &self.verdicts;
        let strict = v.nonobtuse_strict || v.delaunay_strict == Some(true);
        let weak = v.nonobtuse_weak || v.delaunay_weak == Some(true);
        if strict && v.interiorly_connected {
            Level::Strict
        } else if weak || strict {
            Level::Weak
        } else {
            Level::Fail
        }
    }
}

/// `h_K |b| / (d+1) + h_K^2 |c| / ((d+1)(d+2))` for one element's norms.
fn perturbation(h: f64, b_sup: f64, c_sup: f64, dim: usize) -> f64 {
    let d = dim as f64;
    h * b_sup / (d + 1.0) + h * h * c_sup / ((d + 1.0) * (d + 2.0))
}

/// Nonobtuse metric-angle condition for every element.
pub fn check_nonobtuse(mesh: &SimplicialMesh, data: &[ElementData], exec: Execution) -> Result<Vec<ElementCondition>> {
    let dim = mesh.dim();
    exec::try_map_indexed(mesh.n_elements(), exec, |k| {
        let ElementData { geometry: g, stats: s } = &data[k];
        let alpha_max = g.max_metric_angle(&s.d_k)?;
        let bound_argument = perturbation(g.diameter, s.b_sup, s.c_sup, dim) / s.lambda_min;
        if bound_argument > 1.0 {
            return Ok(ElementCondition {
                element: k,
                alpha_max,
                bound_argument,
                bound: None,
                pass_strict: false,
                pass_weak: false,
                reason: Some("convection/reaction dominates at this h".into()),
            });
        }
        let bound = bound_argument.acos();
        let (pass_strict, pass_weak) = classify(alpha_max, bound);
        Ok(ElementCondition { element: k, alpha_max, bound_argument, bound: Some(bound), pass_strict, pass_weak, reason: None })
    })
}

fn local_position(mesh: &SimplicialMesh, k: usize, v: usize) -> usize {
    mesh.element(k).iter().position(|&x| x == v).expect("edge vertex belongs to element")
}

/// Half-sum of the four angle terms for one edge.
pub fn delaunay_lhs(alpha_k: f64, alpha_kp: f64, det_k: f64, det_kp: f64, theta: f64) -> f64 {
    let t1 = arccot((det_kp / det_k).sqrt() / alpha_kp.tan() - 2.0 * theta / det_k.sqrt());
    let t2 = arccot((det_k / det_kp).sqrt() / alpha_k.tan() - 2.0 * theta / det_kp.sqrt());
    0.5 * (alpha_k + alpha_kp + t1 + t2)
}

/// Delaunay-type condition on every edge shared by two elements (2D only).
pub fn check_delaunay_type(mesh: &SimplicialMesh, data: &[ElementData], exec: Execution) -> Result<Vec<EdgeCondition>> {
    if mesh.dim() != 2 {
        return Err(Error::Unsupported("the Delaunay-type condition is two-dimensional".into()));
    }
    let edges: Vec<_> = mesh.edges().into_iter().filter(|e| e.elements.len() == 2).collect();
    exec::try_map_indexed(edges.len(), exec, |i| {
        let e = &edges[i];
        let (j, k) = e.vertices;
        let (ka, kb) = (e.elements[0], e.elements[1]);
        let angle = |el: usize| -> Result<f64> {
            let d = &data[el];
            d.geometry.metric_angle(&d.stats.d_k, local_position(mesh, el, j), local_position(mesh, el, k))
        };
        let (alpha_k, alpha_k_prime) = (angle(ka)?, angle(kb)?);
        let (sk, skp) = (&data[ka].stats, &data[kb].stats);
        let (hk, hkp) = (data[ka].geometry.diameter, data[kb].geometry.diameter);
        // norms of K for both diameters
        let theta = perturbation(hk, sk.b_sup, sk.c_sup, 2) + perturbation(hkp, sk.b_sup, sk.c_sup, 2);
        let (det_k, det_kp) = (sk.d_k.determinant(), skp.d_k.determinant());
        let lhs = delaunay_lhs(alpha_k, alpha_k_prime, det_k, det_kp, theta);
        let lhs_unperturbed = delaunay_lhs(alpha_k, alpha_k_prime, det_k, det_kp, 0.0);
        let (pass_strict, pass_weak) = classify(lhs, PI);
        Ok(EdgeCondition {
            vertices: (j, k),
            elements: (ka, kb),
            alpha_k,
            alpha_k_prime,
            theta,
            lhs,
            lhs_unperturbed,
            interior: !mesh.is_boundary(j) && !mesh.is_boundary(k),
            pass_strict,
            pass_weak,
        })
    })
}

/// Runs every condition check and aggregates the verdicts.
pub fn analyze(mesh: &SimplicialMesh, data: &[ElementData], exec: Execution) -> Result<ConditionReport> {
    let per_element = check_nonobtuse(mesh, data, exec)?;
    let per_edge = if mesh.dim() == 2 { check_delaunay_type(mesh, data, exec)? } else { Vec::new() };
    let conn = mesh.interior_connectivity();
    let alpha_max = per_element.iter().map(|e| e.alpha_max).fold(0.0, f64::max);
    let alpha_sum = (mesh.dim() == 2 && !per_edge.is_empty())
        .then(|| per_edge.iter().map(|e| e.lhs_unperturbed).fold(0.0, f64::max));
    let verdict_edges: Vec<&EdgeCondition> = per_edge.iter().filter(|e| e.interior).collect();
    let verdicts = Verdicts {
        nonobtuse_weak: per_element.iter().all(|e| e.pass_weak),
        nonobtuse_strict: per_element.iter().all(|e| e.pass_strict),
        delaunay_weak: (mesh.dim() == 2).then(|| verdict_edges.iter().all(|e| e.pass_weak)),
        delaunay_strict: (mesh.dim() == 2).then(|| verdict_edges.iter().all(|e| e.pass_strict)),
        interiorly_connected: conn.connected,
        interior_components: conn.components.len(),
        no_interior_vertices: conn.no_interior_vertices,
    };
    Ok(ConditionReport {
        per_element,
        per_edge,
        aggregates: Aggregates {
            alpha_max,
            alpha_max_over_pi: alpha_max / PI,
            alpha_sum,
            alpha_sum_over_pi: alpha_sum.map(|a| a / PI),
        },
        verdicts,
    })
}

/// Assembled entries of an interior edge against the two upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryBound {
    pub vertices: (usize, usize),
    pub a_jk: f64,
    pub a_kj: f64,
    /// Bound through the maximum metric angle of each element of the patch.
    pub bound_general: f64,
    /// Bound through the two facing angles (2D only).
    pub bound_planar: Option<f64>,
    pub violated: bool,
}

/// Compares `a_jk`, `a_kj` with their upper bounds on every edge joining
/// two interior vertices.
pub fn entry_bound_report(
    mesh: &SimplicialMesh,
    data: &[ElementData],
    system: &AssembledSystem,
) -> Result<Vec<EntryBound>> {
    let dim = mesh.dim();
    let scale = system.a.max_abs().max(f64::MIN_POSITIVE);
    let mut out = Vec::new();
    for e in mesh.interior_edges() {
        let (j, k) = e.vertices;
        let (ij, ik) = (mesh.interior_index(j).unwrap(), mesh.interior_index(k).unwrap());
        let mut bound_general = 0.0;
        for &el in &e.elements {
            let ElementData { geometry: g, stats: s } = &data[el];
            let h = g.metric_altitudes(&s.d_k);
            let (lj, lk) = (local_position(mesh, el, j), local_position(mesh, el, k));
            let amax = g.max_metric_angle(&s.d_k)?;
            bound_general += g.volume / (h[lj] * h[lk])
                * (-amax.cos() + perturbation(g.diameter, s.b_sup, s.c_sup, dim) / s.lambda_min);
        }
        let bound_planar = if dim == 2 && e.elements.len() == 2 {
            let mut b = 0.0;
            for &el in &e.elements {
                let ElementData { geometry: g, stats: s } = &data[el];
                let alpha = g.metric_angle(&s.d_k, local_position(mesh, el, j), local_position(mesh, el, k))?;
                b += -0.5 * s.d_k.determinant().sqrt() / alpha.tan() + perturbation(g.diameter, s.b_sup, s.c_sup, 2);
            }
            Some(b)
        } else {
            None
        };
        let (a_jk, a_kj) = (system.a.get(ij, ik), system.a.get(ik, ij));
        let worst = a_jk.max(a_kj);
        let tol = 1e-10 * scale;
        let violated = worst > bound_general + tol || bound_planar.is_some_and(|b| worst > b + tol);
        out.push(EntryBound { vertices: (j, k), a_jk, a_kj, bound_general, bound_planar, violated });
    }
    Ok(out)
}

/// Equidistribution and alignment scores of each element for a metric `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MUniformity {
    pub equidistribution: Vec<f64>,
    pub alignment: Vec<f64>,
}

/// Scores `e_K = |K| sqrt(det M_K) N / sigma_h` and
/// `a_K = tr(F'^T M_K F') / (d det(F'^T M_K F')^(1/d))`, with `F'` mapping
/// the unit-edge equilateral simplex onto `K`. Both are 1 for an
/// `M`-uniform mesh.
pub fn m_uniformity<F>(mesh: &SimplicialMesh, metric: F, exec: Execution) -> Result<MUniformity>
where
    F: Fn(&[f64]) -> DenseMatrix + Sync + Send,
{
    let dim = mesh.dim();
    let rule = quadrature::degree_two(dim);
    let per: Vec<(f64, f64)> = exec::try_map_indexed(mesh.n_elements(), exec, |k| {
        let pts = mesh.element_points(k);
        let mut mk = DenseMatrix::zeros(dim, dim);
        for (bary, &w) in rule.barycentric.iter().zip(&rule.weights) {
            mk = mk.add(&metric(&quadrature::map_point(&pts, bary)).scale(w));
        }
        let det_m = mk.determinant();
        if !(det_m > 0.0) {
            return Err(Error::InvalidInput(format!("metric is not positive definite on element {k}")));
        }
        let g = ElementGeometry::of_element(mesh, k);
        let jf = &g.jacobian;
        let t = jf.transpose().matmul(&mk).matmul(jf);
        let align = t.trace() / (dim as f64 * t.determinant().powf(1.0 / dim as f64));
        Ok((g.volume * det_m.sqrt(), align))
    })?;
    let sigma: f64 = per.iter().map(|p| p.0).sum();
    let n = mesh.n_elements() as f64;
    Ok(MUniformity {
        equidistribution: per.iter().map(|p| p.0 * n / sigma).collect(),
        alignment: per.iter().map(|p| p.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_with, element_data};
    use crate::coefficients::{catalog, laplace};
    use crate::mesh::StructuredKind;

    fn report(name: &str, kind: StructuredKind, j: usize) -> ConditionReport {
        let m = SimplicialMesh::generate_structured(kind, j).unwrap();
        let d = element_data(&m, &catalog(name).unwrap(), Execution::Sequential).unwrap();
        analyze(&m, &d, Execution::Sequential).unwrap()
    }

    #[test]
    fn arccot_range_and_branch() {
        assert!((arccot(0.0) - PI / 2.0).abs() < 1e-15);
        assert!((arccot(1.0) - PI / 4.0).abs() < 1e-15);
        assert!((arccot(-1.0) - 3.0 * PI / 4.0).abs() < 1e-15);
        for t in [0.1f64, 0.7, 1.5, 2.0, 3.0] {
            assert!((arccot(1.0 / t.tan()) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn ex5_1_structured_aggregates() {
        let r45 = report("ex5_1", StructuredKind::Mesh45, 11);
        assert!((r45.aggregates.alpha_max_over_pi - 0.43).abs() < 5e-3);
        assert!((r45.aggregates.alpha_sum_over_pi.unwrap() - 0.86).abs() < 5e-3);
        assert!(r45.verdicts.nonobtuse_strict && r45.verdicts.delaunay_strict == Some(true));
        assert_eq!(r45.level(), Level::Strict);
        let r135 = report("ex5_1", StructuredKind::Mesh135, 11);
        assert!((r135.aggregates.alpha_max_over_pi - 0.86).abs() < 5e-3);
        assert!((r135.aggregates.alpha_sum_over_pi.unwrap() - 1.71).abs() < 5e-3);
        assert_eq!(r135.level(), Level::Fail);
    }

    #[test]
    fn identity_delaunay_reduces_to_angle_sum() {
        let r = report("laplace", StructuredKind::Mesh135, 7);
        for e in &r.per_edge {
            assert!((e.lhs - (e.alpha_k + e.alpha_k_prime)).abs() < 1e-10);
        }
    }

    #[test]
    fn laplace_right_angles_are_weak_only() {
        let r = report("laplace", StructuredKind::Mesh45, 6);
        assert!(r.verdicts.nonobtuse_weak && !r.verdicts.nonobtuse_strict);
        assert_eq!(r.level(), Level::Weak);
        // one interior vertex: no edge joins two interior vertices
        assert_eq!(report("laplace", StructuredKind::Mesh45, 3).level(), Level::Strict);
    }

    #[test]
    fn large_perturbation_fails_without_clamping() {
        let r = report("ex5_2", StructuredKind::Mesh45, 5);
        let e = &r.per_element[0];
        assert!(e.bound_argument > 1.0 && e.bound.is_none() && !e.pass_weak);
        assert!(e.reason.is_some());
    }

    #[test]
    fn strict_implies_weak() {
        for name in ["ex5_2", "ex5_3", "ex5_4"] {
            let r = report(name, StructuredKind::Mesh45, 21);
            assert!(r.per_element.iter().all(|e| !e.pass_strict || e.pass_weak));
            assert!(r.per_edge.iter().all(|e| !e.pass_strict || e.pass_weak));
        }
    }

    #[test]
    fn delaunay_rejected_in_3d() {
        let m = SimplicialMesh::new(
            3,
            vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![vec![0, 1, 2, 3]],
            vec![true; 4],
        )
        .unwrap();
        let d = element_data(&m, &laplace(3), Execution::Sequential).unwrap();
        assert!(matches!(check_delaunay_type(&m, &d, Execution::Sequential), Err(Error::Unsupported(_))));
        let r = analyze(&m, &d, Execution::Sequential).unwrap();
        assert_eq!(r.verdicts.delaunay_strict, None);
    }

    fn bounds(name: &str, kind: StructuredKind, j: usize) -> Vec<EntryBound> {
        let m = SimplicialMesh::generate_structured(kind, j).unwrap();
        let p = catalog(name).unwrap();
        let d = element_data(&m, &p, Execution::Sequential).unwrap();
        let s = assemble_with(&m, &p, &d, Execution::Sequential).unwrap();
        entry_bound_report(&m, &d, &s).unwrap()
    }

    #[test]
    fn entry_bounds() {
        let b = bounds("ex5_1", StructuredKind::Mesh45, 9);
        assert!(b.iter().all(|e| e.a_jk <= 1e-12 && e.bound_general <= 1e-12 && !e.violated));
        let b = bounds("ex5_1", StructuredKind::Mesh135, 9);
        assert!(b.iter().any(|e| e.a_jk > 0.0));
        assert!(b.iter().all(|e| !e.violated));
        let b = bounds("laplace", StructuredKind::Mesh45, 6);
        for e in &b {
            assert!(e.bound_general.abs() < 1e-12 && !e.violated);
            assert!(e.a_jk.abs() < 1e-12 || (e.a_jk + 1.0).abs() < 1e-12);
        }
        assert!(bounds("ex5_3", StructuredKind::Mesh45, 21).iter().all(|e| !e.violated));
    }

    #[test]
    fn m_uniformity_on_right_triangles() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 5).unwrap();
        let u = m_uniformity(&m, |_| DenseMatrix::identity(2), Execution::Sequential).unwrap();
        // sum of squared edges over 4 sqrt(3) |K|, with legs h: 4h^2 / (2 sqrt 3 h^2)
        for (&e, &a) in u.equidistribution.iter().zip(&u.alignment) {
            assert!((e - 1.0).abs() < 1e-12);
            assert!((a - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn m_uniformity_equilateral_is_ideal() {
        let s3 = 3f64.sqrt();
        let m = SimplicialMesh::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s3 / 2.0], vec![1.5, s3 / 2.0]],
            vec![vec![0, 1, 2], vec![1, 3, 2]],
            vec![true; 4],
        )
        .unwrap();
        let u = m_uniformity(&m, |_| DenseMatrix::identity(2), Execution::Sequential).unwrap();
        for (&e, &a) in u.equidistribution.iter().zip(&u.alignment) {
            assert!((e - 1.0).abs() < 1e-12 && (a - 1.0).abs() < 1e-12);
        }
    }
}
