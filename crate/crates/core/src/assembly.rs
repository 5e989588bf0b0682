//! Interior-node stiffness and mass matrices and the Rayleigh functional.

use serde::{Deserialize, Serialize};

use crate::coefficients::{ElementCoefficientStats, ProblemCoefficients};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::geometry::ElementGeometry;
use crate::linalg::SparseMatrix;
use crate::mesh::SimplicialMesh;
use crate::quadrature;

/// Consistent or row-sum lumped mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

impl std::str::FromStr for MassKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(MassKind::Consistent),
            "lumped" => Ok(MassKind::Lumped),
            _ => Err(Error::InvalidParameter(format!("unknown mass treatment `{s}`"))),
        }
    }
}

/// Geometry and coefficient statistics of one element.
#[derive(Debug, Clone)]
pub struct ElementData {
    pub geometry: ElementGeometry,
    pub stats: ElementCoefficientStats,
}

/// Computes [`ElementData`] for every element.
pub fn element_data(mesh: &SimplicialMesh, coeffs: &ProblemCoefficients, exec: Execution) -> Result<Vec<ElementData>> {
    exec::try_map_indexed(mesh.n_elements(), exec, |k| {
        Ok(ElementData { geometry: ElementGeometry::of_element(mesh, k), stats: coeffs.element_stats(mesh, k)? })
    })
}

/// The assembled interior-node system `A u = lambda B u`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    /// Full stiffness matrix (diffusion, convection, reaction).
    pub a: SparseMatrix,
    /// Diffusion part of `a`.
    pub a_diffusion: SparseMatrix,
    /// `sum_K int_K (c - div(b)/2) phi_j phi_k`.
    pub reaction_like: SparseMatrix,
    /// Consistent mass.
    pub b: SparseMatrix,
    /// Row-sum lumped mass.
    pub b_lumped: Vec<f64>,
    pub mesh_label: String,
    pub problem_label: String,
    pub convection_free: bool,
}

struct LocalMatrices {
    diffusion: Vec<f64>,
    convection: Vec<f64>,
    reaction: Vec<f64>,
    reaction_like: Vec<f64>,
    mass: Vec<f64>,
}

fn local_matrices(mesh: &SimplicialMesh, coeffs: &ProblemCoefficients, data: &ElementData, k: usize) -> LocalMatrices {
    let dim = mesh.dim();
    let n = dim + 1;
    let g = &data.geometry;
    let vol = g.volume;
    let rule = quadrature::degree_two(dim);
    let pts = mesh.element_points(k);
    let mut lm = LocalMatrices {
        diffusion: vec![0.0; n * n],
        convection: vec![0.0; n * n],
        reaction: vec![0.0; n * n],
        reaction_like: vec![0.0; n * n],
        mass: vec![0.0; n * n],
    };
    let mass_scale = vol / ((dim + 1) * (dim + 2)) as f64;
    for a in 0..n {
        for b in 0..n {
            lm.diffusion[a * n + b] = vol * g.stiffness_kernel(&data.stats.d_k, a, b);
            lm.mass[a * n + b] = mass_scale * if a == b { 2.0 } else { 1.0 };
        }
    }
    for (bary, &w) in rule.barycentric.iter().zip(&rule.weights) {
        let x = quadrature::map_point(&pts, bary);
        let wk = w * vol;
        let c = (coeffs.reaction)(&x);
        let rl = c - 0.5 * (coeffs.convection_divergence)(&x);
        let bx = if coeffs.convection_free { None } else { Some((coeffs.convection)(&x)) };
        for a in 0..n {
            for b in 0..n {
                let pp = wk * bary[a] * bary[b];
                lm.reaction[a * n + b] += c * pp;
                lm.reaction_like[a * n + b] += rl * pp;
                if let Some(bv) = &bx {
                    let adv: f64 = bv.iter().zip(&g.grad_basis[b]).map(|(p, q)| p * q).sum();
                    lm.convection[a * n + b] += wk * bary[a] * adv;
                }
            }
        }
    }
    lm
}

/// Assembles with the default (parallel) execution policy.
pub fn assemble(mesh: &SimplicialMesh, coeffs: &ProblemCoefficients) -> Result<AssembledSystem> {
    let data = element_data(mesh, coeffs, Execution::default())?;
    assemble_with(mesh, coeffs, &data, Execution::default())
}

/// Assembles from precomputed element data. Local matrices are computed under
/// `exec`; accumulation is serial in element order.
pub fn assemble_with(
    mesh: &SimplicialMesh,
    coeffs: &ProblemCoefficients,
    data: &[ElementData],
    exec: Execution,
) -> Result<AssembledSystem> {
    let nv = mesh.n_interior();
    let n = mesh.dim() + 1;
    let locals = exec::map_indexed(mesh.n_elements(), exec, |k| local_matrices(mesh, coeffs, &data[k], k));

    let mut t_a = Vec::new();
    let mut t_ad = Vec::new();
    let mut t_rl = Vec::new();
    let mut t_b = Vec::new();
    let mut lumped = vec![0.0; nv];
    for (k, lm) in locals.iter().enumerate() {
        let el = mesh.element(k);
        for a in 0..n {
            let Some(i) = mesh.interior_index(el[a]) else { continue };
            lumped[i] += data[k].geometry.volume / n as f64;
            for b in 0..n {
                let Some(j) = mesh.interior_index(el[b]) else { continue };
                let idx = a * n + b;
                t_a.push((i, j, lm.diffusion[idx] + lm.convection[idx] + lm.reaction[idx]));
                t_ad.push((i, j, lm.diffusion[idx]));
                t_rl.push((i, j, lm.reaction_like[idx]));
                t_b.push((i, j, lm.mass[idx]));
            }
        }
    }
    Ok(AssembledSystem {
        a: SparseMatrix::from_triplets(nv, nv, &t_a)?,
        a_diffusion: SparseMatrix::from_triplets(nv, nv, &t_ad)?,
        reaction_like: SparseMatrix::from_triplets(nv, nv, &t_rl)?,
        b: SparseMatrix::from_triplets(nv, nv, &t_b)?,
        b_lumped: lumped,
        mesh_label: String::new(),
        problem_label: coeffs.label.clone(),
        convection_free: coeffs.convection_free,
    })
}

impl AssembledSystem {
    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    /// Mass matrix for the requested treatment.
    pub fn mass(&self, kind: MassKind) -> SparseMatrix {
        match kind {
            MassKind::Consistent => self.b.clone(),
            MassKind::Lumped => SparseMatrix::from_diagonal(&self.b_lumped),
        }
    }

    /// Numerator of the Rayleigh functional.
    pub fn energy(&self, v: &[f64]) -> f64 {
        self.a_diffusion.bilinear(v, v) + self.reaction_like.bilinear(v, v)
    }

    /// Rayleigh functional with the consistent mass in the denominator.
    pub fn rayleigh(&self, v: &[f64]) -> Result<f64> {
        self.rayleigh_with(v, MassKind::Consistent)
    }

    pub fn rayleigh_with(&self, v: &[f64], kind: MassKind) -> Result<f64> {
        if v.len() != self.n() {
            return Err(Error::InvalidInput(format!("vector of length {} for {} unknowns", v.len(), self.n())));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidInput("Rayleigh functional of the zero vector".into()));
        }
        let den = match kind {
            MassKind::Consistent => self.b.bilinear(v, v),
            MassKind::Lumped => v.iter().zip(&self.b_lumped).map(|(x, m)| m * x * x).sum(),
        };
        Ok(self.energy(v) / den)
    }
}
