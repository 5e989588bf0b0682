//! Smallest-modulus eigenpairs of `A u = lambda B u` by implicitly restarted
//! Arnoldi on `A^{-1} B`, the principal-eigenpair property suite and the
//! convergence study.

use std::cmp::Ordering;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble, AssembledSystem, MassKind};
use crate::coefficients::ProblemCoefficients;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::hessenberg::{double_shift_qr_step, shifted_qr_step, MAX_HESSENBERG_ORDER};
use crate::linalg::{
    balance_scaling, dot, hessenberg_eigen, norm2, similarity_scale, DenseMatrix, LuFactors, SparseMatrix,
};
use crate::matrix_analysis::MatrixCertificate;
use crate::mesh::{SimplicialMesh, StructuredKind};

/// Relative modulus gap below which `lambda_1` is not simple.
pub const GAP_TOLERANCE: f64 = 1e-8;
/// Relative imaginary part below which `lambda_1` counts as real.
pub const REALNESS_TOLERANCE: f64 = 1e-8;
/// Most negative entry of a max-normalized vector still counted as one-signed.
pub const SIGN_TOLERANCE: f64 = 1e-10;
/// Relative tolerance of the Rayleigh identity.
pub const RAYLEIGH_TOLERANCE: f64 = 1e-6;
/// Number of random trial vectors for the variational check.
pub const VARIATIONAL_TRIALS: usize = 200;
/// Default seed for start vectors and trial vectors.
pub const DEFAULT_SEED: u64 = 0x5eed_f00d;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOptions {
    pub k: usize,
    pub mass: MassKind,
    pub tol: f64,
    /// Krylov dimension; defaults to `max(60, 4k)`.
    pub max_krylov: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { k: 1, mass: MassKind::Consistent, tol: 1e-10, max_krylov: None, max_restarts: 500, seed: DEFAULT_SEED }
    }
}

impl SolverOptions {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }
}

/// Eigenvector in real form; `im` is empty for real eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSolution {
    /// Sorted by modulus; conjugate pairs adjacent with the positive
    /// imaginary part first.
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<EigenVector>,
    /// `|A v - lambda B v| / |v|` per pair.
    pub ritz_residuals: Vec<f64>,
    /// `|A v - lambda B v| <= tol (|A|_max + |lambda| |B|_max) |v|` per pair.
    pub residual_contract: Vec<bool>,
    /// Max-normalized principal eigenvector with its largest entry at +1
    /// (only when `lambda_1` is real).
    pub principal_vector: Option<Vec<f64>>,
    pub k_requested: usize,
    pub k_converged: usize,
    pub converged: bool,
    pub restarts: usize,
    pub krylov_dim: usize,
    pub operator_applications: usize,
    /// A nontrivial diagonal similarity was applied before the iteration.
    pub balanced: bool,
    pub mass: MassKind,
    pub tol: f64,
}

impl EigenSolution {
    pub fn lambda1(&self) -> Complex64 {
        self.eigenvalues[0]
    }

    pub fn max_residual(&self) -> f64 {
        self.ritz_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Outcome of the Arnoldi iteration on a generic operator.
#[derive(Debug, Clone)]
pub struct ArnoldiResult {
    /// Ritz values sorted by decreasing modulus.
    pub values: Vec<Complex64>,
    pub vectors: Vec<EigenVector>,
    pub estimates: Vec<f64>,
    pub converged: Vec<bool>,
    pub restarts: usize,
    pub applications: usize,
    pub krylov_dim: usize,
}

fn modulus_desc(a: &Complex64, b: &Complex64) -> Ordering {
    b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im))
}

/// `vals[idx-1], vals[idx]` form a conjugate pair.
fn splits_pair(vals: &[Complex64], idx: usize) -> bool {
    idx > 0 && idx < vals.len() && vals[idx - 1].im > 0.0 && vals[idx] == vals[idx - 1].conj()
}

/// Solves `(H - theta I) y = rhs` by Gaussian elimination with partial
/// pivoting in complex arithmetic; tiny pivots are replaced by `floor`.
fn complex_shifted_solve(h: &DenseMatrix, theta: Complex64, rhs: &[Complex64], floor: f64) -> Vec<Complex64> {
    let m = h.rows();
    let mut a: Vec<Complex64> = (0..m * m).map(|i| Complex64::new(h[(i / m, i % m)], 0.0)).collect();
    for i in 0..m {
        a[i * m + i] -= theta;
    }
    let mut x = rhs.to_vec();
    for k in 0..m {
        let p = (k..m).max_by(|&i, &j| a[i * m + k].norm().total_cmp(&a[j * m + k].norm())).unwrap();
        if p != k {
            for j in 0..m {
                a.swap(k * m + j, p * m + j);
            }
            x.swap(k, p);
        }
        if a[k * m + k].norm() < floor {
            a[k * m + k] = Complex64::new(floor, 0.0);
        }
        let piv = a[k * m + k];
        for i in k + 1..m {
            let f = a[i * m + k] / piv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k..m {
                let t = a[k * m + j];
                a[i * m + j] -= f * t;
            }
            let t = x[k];
            x[i] -= f * t;
        }
    }
    for k in (0..m).rev() {
        let mut s = x[k];
        for j in k + 1..m {
            s -= a[k * m + j] * x[j];
        }
        x[k] = s / a[k * m + k];
    }
    x
}

/// Unit eigenvector of the small Hessenberg matrix for `theta` by two
/// steps of inverse iteration.
fn hessenberg_eigenvector(h: &DenseMatrix, theta: Complex64) -> Vec<Complex64> {
    let m = h.rows();
    let scale = h.max_abs().max(f64::MIN_POSITIVE);
    let floor = 1e-14 * scale;
    let mut y = vec![Complex64::new(1.0, 0.0); m];
    for _ in 0..3 {
        y = complex_shifted_solve(h, theta, &y, floor);
        let nrm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return vec![Complex64::new(1.0, 0.0); m];
        }
        y.iter_mut().for_each(|z| *z /= nrm);
    }
    y
}

struct Factorization {
    v: Vec<Vec<f64>>,
    h: DenseMatrix,
    f: Vec<f64>,
}

/// Extends an Arnoldi factorization from `start` to `m` columns with
/// classical Gram–Schmidt and one reorthogonalization pass.
fn arnoldi_extend<F>(fac: &mut Factorization, op: &F, start: usize, m: usize, rng: &mut ChaCha8Rng, apps: &mut usize)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = fac.f.len();
    for j in start..m {
        if j > 0 && j == start {
            // continue from the residual left by the restart
            let beta = norm2(&fac.f);
            if beta > 0.0 {
                fac.h[(j, j - 1)] = beta;
                fac.v.push(fac.f.iter().map(|x| x / beta).collect());
            } else {
                fac.h[(j, j - 1)] = 0.0;
                fac.v.push(random_orthonormal(&fac.v, n, rng));
            }
        }
        let mut w = op(&fac.v[j]);
        *apps += 1;
        let w_norm = norm2(&w);
        let mut coeffs = vec![0.0; j + 1];
        for _pass in 0..2 {
            let c: Vec<f64> = fac.v.iter().map(|vi| dot(vi, &w)).collect();
            for (vi, &ci) in fac.v.iter().zip(&c) {
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= ci * vk;
                }
            }
            for (a, b) in coeffs.iter_mut().zip(&c) {
                *a += b;
            }
        }
        for (i, &c) in coeffs.iter().enumerate() {
            fac.h[(i, j)] = c;
        }
        let beta = norm2(&w);
        let breakdown = !(beta > 1e-12 * w_norm);
        if j + 1 < m {
            if breakdown {
                fac.h[(j + 1, j)] = 0.0;
                fac.v.push(random_orthonormal(&fac.v, n, rng));
            } else {
                fac.h[(j + 1, j)] = beta;
                fac.v.push(w.iter().map(|x| x / beta).collect());
            }
        } else {
            fac.f = if breakdown { vec![0.0; n] } else { w };
        }
    }
}

fn random_orthonormal(basis: &[Vec<f64>], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nrm = norm2(&w);
        if nrm > 1e-8 {
            return w.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// Implicitly restarted Arnoldi for the `k` largest-modulus eigenvalues of
/// a real operator of order `n`, with exact shifts.
pub fn arnoldi_largest<F>(
    n: usize,
    op: F,
    k: usize,
    krylov: usize,
    tol: f64,
    max_restarts: usize,
    start: Vec<f64>,
    seed: u64,
) -> Result<ArnoldiResult>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={n}")));
    }
    let m = krylov.max(2 * k + 2).min(n);
    if m > MAX_HESSENBERG_ORDER {
        return Err(Error::Unsupported(format!(
            "Krylov dimension {m} exceeds the projected-problem limit {MAX_HESSENBERG_ORDER}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nrm = norm2(&start);
    if !(nrm > 0.0) {
        return Err(Error::InvalidInput("zero start vector".into()));
    }
    let mut fac = Factorization {
        v: vec![start.iter().map(|x| x / nrm).collect()],
        h: DenseMatrix::zeros(m, m),
        f: vec![0.0; n],
    };
    let mut apps = 0;
    arnoldi_extend(&mut fac, &op, 0, m, &mut rng, &mut apps);
    let mut restarts = 0;
    loop {
        let schur = hessenberg_eigen(&fac.h)?;
        let mut vals = schur.eigenvalues.clone();
        vals.sort_by(modulus_desc);
        let kk = if splits_pair(&vals, k) { k + 1 } else { k };
        let beta = norm2(&fac.f);
        let vecs: Vec<Vec<Complex64>> = vals[..kk].iter().map(|&t| hessenberg_eigenvector(&fac.h, t)).collect();
        let estimates: Vec<f64> = vecs.iter().map(|y| beta * y[m - 1].norm()).collect();
        let converged: Vec<bool> =
            estimates.iter().zip(&vals).map(|(&e, t)| e <= 0.1 * tol * t.norm() || m == n).collect();
        let all = converged.iter().all(|&c| c);
        if all || restarts >= max_restarts || m == n {
            let vectors = vecs
                .iter()
                .zip(&vals)
                .map(|(y, t)| ritz_vector(&fac.v, y, t.im != 0.0))
                .collect();
            return Ok(ArnoldiResult {
                values: vals[..kk].to_vec(),
                vectors,
                estimates,
                converged,
                restarts,
                applications: apps,
                krylov_dim: m,
            });
        }

        // keep p Ritz values, filter the rest with exact shifts
        let mut p = kk + (m - kk) / 2;
        if splits_pair(&vals, p) {
            p = if p + 1 < m { p + 1 } else { p - 1 };
        }
        let mut h = fac.h.clone();
        let mut q = DenseMatrix::identity(m);
        let mut i = p;
        while i < m {
            let s = vals[i];
            if s.im != 0.0 && i + 1 < m && vals[i + 1] == s.conj() {
                double_shift_qr_step(&mut h, &mut q, 2.0 * s.re, s.norm_sqr());
                i += 2;
            } else {
                shifted_qr_step(&mut h, &mut q, s.re);
                i += 1;
            }
        }
        let mut v_new = vec![vec![0.0; n]; p + 1];
        for (c, col) in v_new.iter_mut().enumerate() {
            for (r, vr) in fac.v.iter().enumerate() {
                let w = q[(r, c)];
                if w != 0.0 {
                    col.iter_mut().zip(vr).for_each(|(x, y)| *x += w * y);
                }
            }
        }
        let sigma = q[(m - 1, p - 1)];
        let hp = h[(p, p - 1)];
        let vp = v_new.pop().expect("p + 1 columns");
        let f_new: Vec<f64> = vp.iter().zip(&fac.f).map(|(a, b)| a * hp + b * sigma).collect();
        let mut h_new = DenseMatrix::zeros(m, m);
        for r in 0..p {
            for c in 0..p {
                h_new[(r, c)] = h[(r, c)];
            }
        }
        fac = Factorization { v: v_new, h: h_new, f: f_new };
        arnoldi_extend(&mut fac, &op, p, m, &mut rng, &mut apps);
        restarts += 1;
    }
}

fn ritz_vector(v: &[Vec<f64>], y: &[Complex64], complex: bool) -> EigenVector {
    let n = v[0].len();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; if complex { n } else { 0 }];
    for (vi, yi) in v.iter().zip(y) {
        re.iter_mut().zip(vi).for_each(|(x, a)| *x += yi.re * a);
        if complex {
            im.iter_mut().zip(vi).for_each(|(x, a)| *x += yi.im * a);
        }
    }
    EigenVector { re, im }
}

/// Rotates and scales `v` so that its largest-modulus entry is `+1`.
fn normalize_max(v: &mut EigenVector) {
    let n = v.re.len();
    let modulus = |i: usize| if v.im.is_empty() { v.re[i].abs() } else { v.re[i].hypot(v.im[i]) };
    let imax = (0..n).max_by(|&a, &b| modulus(a).total_cmp(&modulus(b))).unwrap_or(0);
    let z = if v.im.is_empty() { Complex64::new(v.re[imax], 0.0) } else { Complex64::new(v.re[imax], v.im[imax]) };
    if z.norm() == 0.0 {
        return;
    }
    let s = z.inv();
    if v.im.is_empty() {
        v.re.iter_mut().for_each(|x| *x *= s.re);
    } else {
        for i in 0..n {
            let w = Complex64::new(v.re[i], v.im[i]) * s;
            v.re[i] = w.re;
            v.im[i] = w.im;
        }
    }
}

/// Deterministic positive start vector: ones plus a small seeded positive
/// perturbation that breaks mesh symmetries.
pub fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 1.0 + 0.1 * rng.random::<f64>()).collect()
}

/// The `k` smallest-modulus eigenpairs of `A u = lambda B u` (or the lumped
/// mass variant).
pub fn solve_smallest(system: &AssembledSystem, opts: &SolverOptions) -> Result<EigenSolution> {
    let n = system.n();
    if n == 0 {
        return Err(Error::InvalidInput("the mesh has no interior vertices".into()));
    }
    if opts.k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    let k = opts.k.min(n);
    let b = system.mass(opts.mass);
    // balanced pencil D^{-1} A D, D^{-1} B D: same spectrum, eigenvectors
    // v = D y; removes the exponential grading of convection-dominated modes
    let d = balance_scaling(&system.a)?;
    let balanced = d.iter().any(|&x| x != 1.0);
    let (a_s, b_s) = if balanced {
        (similarity_scale(&system.a, &d), similarity_scale(&b, &d))
    } else {
        (system.a.clone(), b.clone())
    };
    let lu = LuFactors::factor(&a_s)?;
    let op = |x: &[f64]| lu.solve(&b_s.matvec(x));
    let krylov = opts.max_krylov.unwrap_or(60.max(4 * k)).min(MAX_HESSENBERG_ORDER);
    let res = arnoldi_largest(n, op, k, krylov, opts.tol, opts.max_restarts, start_vector(n, opts.seed), opts.seed)?;

    let (a_max, b_max) = (system.a.max_abs(), b.max_abs());
    let (as_max, bs_max) = (a_s.max_abs(), b_s.max_abs());
    let mut pairs: Vec<(Complex64, EigenVector, bool)> = res
        .values
        .iter()
        .zip(res.vectors)
        .zip(&res.converged)
        .map(|((&theta, v), &c)| {
            // + 0.0 turns a negative zero into a positive one
            let l = theta.inv();
            (Complex64::new(l.re, l.im + 0.0), v, c)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.norm().total_cmp(&b.0.norm()).then(b.0.im.total_cmp(&a.0.im)));

    let mut eigenvalues = Vec::new();
    let mut eigenvectors = Vec::new();
    let mut ritz_residuals = Vec::new();
    let mut residual_contract = Vec::new();
    let mut k_converged = 0;
    let mut refined: Option<(Complex64, EigenVector)> = None;
    for (lambda, v, conv) in pairs {
        // the conjugate partner of a refined pair is its conjugate
        let (lambda, y) = match refined.take() {
            Some((l, w)) if lambda.im < 0.0 && (l.conj() - lambda).norm() <= 1e-6 * lambda.norm() => {
                (l.conj(), EigenVector { re: w.re, im: w.im.iter().map(|x| -x).collect() })
            }
            _ => {
                let r0 = pair_residual(&a_s, &b_s, lambda, &v);
                let needs_refinement = r0 > opts.tol * (as_max + lambda.norm() * bs_max) * vector_norm(&v);
                // keep whichever candidate pair has the smallest residual
                let mut best = (r0 / vector_norm(&v), lambda, v);
                let candidate = if needs_refinement { refine_pair(&a_s, &b_s, lambda, &best.2) } else { None };
                if let Some((sigma, corrected, w)) = candidate {
                    for l in [corrected, sigma] {
                        let r = pair_residual(&a_s, &b_s, l, &w) / vector_norm(&w);
                        if r < best.0 {
                            best = (r, l, w.clone());
                        }
                    }
                }
                let (_, l, w) = best;
                if l.im > 0.0 {
                    refined = Some((l, w.clone()));
                }
                (l, w)
            }
        };
        let mut v = EigenVector {
            re: y.re.iter().zip(&d).map(|(x, s)| x * s).collect(),
            im: y.im.iter().zip(&d).map(|(x, s)| x * s).collect(),
        };
        normalize_max(&mut v);
        let mut lambda = lambda;
        let mut r = pair_residual(&system.a, &b, lambda, &v) / vector_norm(&v);
        let bound = |l: Complex64| opts.tol * (a_max + l.norm() * b_max);
        if balanced && r > bound(lambda) {
            if let Some((sigma, corrected, mut w)) = refine_pair(&system.a, &b, lambda, &v) {
                normalize_max(&mut w);
                for l in [corrected, sigma] {
                    let rw = pair_residual(&system.a, &b, l, &w) / vector_norm(&w);
                    if rw < r {
                        (lambda, r) = (l, rw);
                        v = w.clone();
                    }
                }
            }
        }
        let ok = r <= bound(lambda);
        if conv && ok {
            k_converged += 1;
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
        ritz_residuals.push(r);
        residual_contract.push(ok);
    }
    let principal_vector = (eigenvalues[0].im == 0.0).then(|| eigenvectors[0].re.clone());
    Ok(EigenSolution {
        converged: k_converged == eigenvalues.len(),
        eigenvalues,
        eigenvectors,
        ritz_residuals,
        residual_contract,
        principal_vector,
        k_requested: opts.k,
        k_converged,
        restarts: res.restarts,
        krylov_dim: res.krylov_dim,
        operator_applications: res.applications,
        balanced,
        mass: opts.mass,
        tol: opts.tol,
    })
}

/// Relative offsets of the inverse-iteration shift from the Ritz value,
/// tried in order until `A - sigma B` factors.
const REFINE_SHIFT_OFFSETS: [f64; 3] = [1e-8, 1e-6, 1e-4];
const REFINE_STEPS: usize = 3;

/// Inverse iteration on the pencil itself with a shift next to the Ritz
/// value; returns the shift, the corrected eigenvalue and the vector.
///
/// The shift-invert operator is only as accurate as `A` is well
/// conditioned; a backward-stable solve with a nearly singular `A - sigma B`
/// recovers small residuals regardless. Complex shifts use the equivalent
/// real system of order `2n`.
fn refine_pair(a: &SparseMatrix, b: &SparseMatrix, lambda: Complex64, v: &EigenVector) -> Option<(Complex64, Complex64, EigenVector)> {
    REFINE_SHIFT_OFFSETS.iter().find_map(|&offset| refine_with_shift(a, b, lambda * (1.0 + offset), v))
}

fn refine_with_shift(
    a: &SparseMatrix,
    b: &SparseMatrix,
    sigma: Complex64,
    v: &EigenVector,
) -> Option<(Complex64, Complex64, EigenVector)> {
    let n = a.n_rows();
    let complex = !v.im.is_empty();
    let mut t = Vec::with_capacity(if complex { 4 } else { 1 } * (a.nnz() + b.nnz()));
    for (i, j, x) in a.iter() {
        t.push((i, j, x));
        if complex {
            t.push((i + n, j + n, x));
        }
    }
    for (i, j, x) in b.iter() {
        t.push((i, j, -sigma.re * x));
        if complex {
            t.push((i + n, j + n, -sigma.re * x));
            t.push((i, j + n, sigma.im * x));
            t.push((i + n, j, -sigma.im * x));
        }
    }
    let size = if complex { 2 * n } else { n };
    let m = SparseMatrix::from_triplets(size, size, &t).ok()?;
    let lu = LuFactors::factor(&m).ok()?;
    let mut x: Vec<f64> = if complex { v.re.iter().chain(&v.im).copied().collect() } else { v.re.clone() };
    let nx = norm2(&x);
    x.iter_mut().for_each(|e| *e /= nx);
    let mut value = sigma;
    for _ in 0..REFINE_STEPS {
        let mut rhs = b.matvec(&x[..n]);
        if complex {
            rhs.extend(b.matvec(&x[n..]));
        }
        let z = lu.solve(&rhs);
        if z.iter().any(|e| !e.is_finite()) {
            return None;
        }
        // z ~ x / (lambda - sigma): correct the eigenvalue through x^H z
        let xz = if complex {
            Complex64::new(
                dot(&x[..n], &z[..n]) + dot(&x[n..], &z[n..]),
                dot(&x[..n], &z[n..]) - dot(&x[n..], &z[..n]),
            )
        } else {
            Complex64::new(dot(&x, &z), 0.0)
        };
        if xz.norm() == 0.0 {
            return None;
        }
        value = sigma + xz.inv();
        let nz = norm2(&z);
        x = z.into_iter().map(|e| e / nz).collect();
    }
    let vec = if complex {
        EigenVector { re: x[..n].to_vec(), im: x[n..].to_vec() }
    } else {
        EigenVector { re: x, im: Vec::new() }
    };
    Some((sigma, value, vec))
}

fn vector_norm(v: &EigenVector) -> f64 {
    (norm2(&v.re).powi(2) + norm2(&v.im).powi(2)).sqrt()
}

/// `|A v - lambda B v|` in complex arithmetic.
fn pair_residual(a: &SparseMatrix, b: &SparseMatrix, lambda: Complex64, v: &EigenVector) -> f64 {
    let axr = a.matvec(&v.re);
    let bxr = b.matvec(&v.re);
    if v.im.is_empty() {
        return axr.iter().zip(&bxr).map(|(a, b)| (a - lambda.re * b).powi(2)).sum::<f64>().sqrt()
            + lambda.im.abs() * norm2(&bxr);
    }
    let axi = a.matvec(&v.im);
    let bxi = b.matvec(&v.im);
    let mut s = 0.0;
    for i in 0..v.re.len() {
        let re = axr[i] - lambda.re * bxr[i] + lambda.im * bxi[i];
        let im = axi[i] - lambda.re * bxi[i] - lambda.im * bxr[i];
        s += re * re + im * im;
    }
    s.sqrt()
}

/// Realness, simplicity, sign, Rayleigh and spectral-location checks for
/// the principal eigenpair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub lambda1_re: f64,
    pub lambda1_im: f64,
    pub principal_real: bool,
    /// `None` when fewer than two pairs were computed.
    pub principal_simple: Option<bool>,
    pub relative_gap: Option<f64>,
    pub sign_preserving: bool,
    /// `min(0, min_i u_i)` of the max-normalized principal vector.
    pub undershoot: Option<f64>,
    pub re_positive_all: bool,
    pub modulus_bound_all: bool,
    /// Observed only; not guaranteed with the consistent mass.
    pub re_at_least_lambda1: bool,
    /// `None` for problems with convection.
    pub variational_min_ok: Option<bool>,
    pub min_trial_rayleigh: Option<f64>,
    pub rayleigh_value: Option<f64>,
    pub rayleigh_identity_ok: bool,
    pub certificate_passes: Option<bool>,
    /// Set when the certificate passes; realness, simplicity and sign all hold.
    pub certified_guarantee_holds: Option<bool>,
    pub flags: Vec<String>,
}

pub fn property_suite(
    solution: &EigenSolution,
    system: &AssembledSystem,
    certificate: Option<&MatrixCertificate>,
    seed: u64,
) -> Result<PropertyReport> {
    let mut flags = Vec::new();
    let l1 = solution.lambda1();
    let m1 = l1.norm();
    let principal_real = l1.im.abs() <= REALNESS_TOLERANCE * m1;
    let (principal_simple, relative_gap) = if solution.eigenvalues.len() >= 2 {
        let gap = (solution.eigenvalues[1].norm() - m1) / m1;
        (Some(gap > GAP_TOLERANCE), Some(gap))
    } else {
        flags.push("fewer than two eigenpairs: simplicity gap undefined".into());
        (None, None)
    };
    if !solution.converged {
        flags.push(format!(
            "only {} of {} eigenpairs converged",
            solution.k_converged,
            solution.eigenvalues.len()
        ));
    }
    let undershoot = solution
        .principal_vector
        .as_ref()
        .map(|u| u.iter().copied().fold(f64::INFINITY, f64::min).min(0.0) + 0.0);
    let sign_preserving = principal_real && undershoot.is_some_and(|u| u > -SIGN_TOLERANCE);
    let re_positive_all = solution.eigenvalues.iter().all(|l| l.re > 0.0);
    let modulus_bound_all = solution.eigenvalues.iter().all(|l| l.norm() >= m1);
    let re_at_least_lambda1 = solution.eigenvalues.iter().all(|l| l.re >= l1.re - 1e-8 * l1.re.abs());

    let rayleigh_value = match &solution.principal_vector {
        Some(u) => Some(system.rayleigh_with(u, solution.mass)?),
        None => None,
    };
    let rayleigh_identity_ok = rayleigh_value.is_some_and(|f| (f - l1.re).abs() <= RAYLEIGH_TOLERANCE * l1.re.abs());

    let (variational_min_ok, min_trial_rayleigh) = match (&solution.principal_vector, system.convection_free) {
        (Some(u), true) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst = f64::INFINITY;
            for t in 0..VARIATIONAL_TRIALS {
                // half independent vectors, half perturbations of u_1
                let v: Vec<f64> = if t % 2 == 0 {
                    (0..u.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
                } else {
                    let eps = 10f64.powf(-3.0 * rng.random::<f64>());
                    u.iter().map(|x| x + eps * (rng.random::<f64>() * 2.0 - 1.0)).collect()
                };
                if v.iter().all(|&x| x == 0.0) {
                    continue;
                }
                worst = worst.min(system.rayleigh_with(&v, solution.mass)?);
            }
            (Some(worst >= l1.re - 1e-8), Some(worst))
        }
        _ => (None, None),
    };

    let certificate_passes = certificate.map(MatrixCertificate::passes);
    let certified_guarantee_holds = (certificate_passes == Some(true))
        .then(|| principal_real && sign_preserving && principal_simple == Some(true));
    if certified_guarantee_holds == Some(false) {
        flags.push("certificate passes but the principal eigenpair lacks a guaranteed property".into());
    }
    Ok(PropertyReport {
        lambda1_re: l1.re,
        lambda1_im: l1.im,
        principal_real,
        principal_simple,
        relative_gap,
        sign_preserving,
        undershoot,
        re_positive_all,
        modulus_bound_all,
        re_at_least_lambda1,
        variational_min_ok,
        min_trial_rayleigh,
        rayleigh_value,
        rayleigh_identity_ok,
        certificate_passes,
        certified_guarantee_holds,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub j: usize,
    pub n_interior: usize,
    pub lambda1_re: f64,
    pub lambda1_im: f64,
    pub error: f64,
    pub undershoot: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub reference: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log(error)` against `log(J)`.
    pub slope: f64,
    /// `-slope`.
    pub observed_order: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Principal eigenvalue on a sequence of meshes labelled by `J`.
pub fn convergence_on_meshes(
    coeffs: &ProblemCoefficients,
    meshes: &[(usize, SimplicialMesh)],
    reference: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<ConvergenceTable> {
    if meshes.len() < 3 {
        return Err(Error::InvalidParameter("a convergence study needs at least three meshes".into()));
    }
    if meshes.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidParameter("J values must be strictly increasing".into()));
    }
    let rows = exec::try_map_indexed(meshes.len(), exec, |i| {
        let (j, mesh) = &meshes[i];
        let system = assemble(mesh, coeffs)?;
        let sol = solve_smallest(&system, opts)?;
        let l1 = sol.lambda1();
        let undershoot = sol
            .principal_vector
            .as_ref()
            .map(|u| u.iter().copied().fold(f64::INFINITY, f64::min).min(0.0) + 0.0);
        Ok::<_, Error>(ConvergenceRow {
            j: *j,
            n_interior: system.n(),
            lambda1_re: l1.re,
            lambda1_im: l1.im,
            error: (l1 - reference).norm(),
            undershoot,
        })
    })?;
    let js: Vec<f64> = rows.iter().map(|r| r.j as f64).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let slope = log_log_slope(&js, &errs);
    Ok(ConvergenceTable { reference, rows, slope, observed_order: -slope })
}

/// Convergence study on structured meshes.
pub fn convergence_study(
    coeffs: &ProblemCoefficients,
    kind: StructuredKind,
    j_list: &[usize],
    reference: f64,
    opts: &SolverOptions,
    exec: Execution,
) -> Result<ConvergenceTable> {
    let meshes = j_list
        .iter()
        .map(|&j| SimplicialMesh::generate_structured(kind, j).map(|m| (j, m)))
        .collect::<Result<Vec<_>>>()?;
    convergence_on_meshes(coeffs, &meshes, reference, opts, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{catalog, laplace};
    use std::f64::consts::PI;

    #[test]
    fn arnoldi_on_diagonal_operator() {
        let d: Vec<f64> = (1..=300).map(|i| 1.0 / i as f64).collect();
        let op = |x: &[f64]| x.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<_>>();
        let r = arnoldi_largest(300, op, 5, 20, 1e-12, 500, vec![1.0; 300], 1).unwrap();
        assert!(r.converged.iter().all(|&c| c));
        for (i, v) in r.values.iter().enumerate() {
            assert!((v.re - 1.0 / (i + 1) as f64).abs() < 1e-11 && v.im == 0.0);
        }
    }

    #[test]
    fn arnoldi_finds_rotation_pair() {
        // block diag(rotation scaled by 2, diag of small values): dominant pair 2(cos t +- i sin t)
        let n = 40;
        let (c, s) = (0.6f64, 0.8f64);
        let op = move |x: &[f64]| {
            let mut y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v / (i + 2) as f64).collect();
            y[0] = 2.0 * (c * x[0] - s * x[1]);
            y[1] = 2.0 * (s * x[0] + c * x[1]);
            y
        };
        let r = arnoldi_largest(n, op, 1, 12, 1e-12, 500, vec![1.0; n], 3).unwrap();
        // k = 1 would split the pair, so both are returned
        assert_eq!(r.values.len(), 2);
        assert!((r.values[0] - Complex64::new(1.2, 1.6)).norm() < 1e-10);
        assert!((r.values[1] - Complex64::new(1.2, -1.6)).norm() < 1e-10);
    }

    #[test]
    fn laplace_mesh45_principal() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 41).unwrap();
        let s = assemble(&m, &laplace(2)).unwrap();
        let sol = solve_smallest(&s, &SolverOptions::with_k(1)).unwrap();
        assert!(sol.converged);
        let l1 = sol.lambda1();
        assert!((l1.re - 2.0 * PI * PI).abs() < 0.01 * 2.0 * PI * PI && l1.im == 0.0);
        let u = sol.principal_vector.unwrap();
        assert!(u.iter().all(|&x| x > 0.0));
        assert_eq!(u.iter().copied().fold(f64::MIN, f64::max), 1.0);
    }

    #[test]
    fn mesh45_symmetry_does_not_hide_modes() {
        // lambda_2 = lambda_3 = 5 pi^2 in the continuum; both must appear
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 21).unwrap();
        let s = assemble(&m, &laplace(2)).unwrap();
        let sol = solve_smallest(&s, &SolverOptions::with_k(3)).unwrap();
        let l = &sol.eigenvalues;
        assert!((l[1].re - 5.0 * PI * PI).abs() < 0.05 * 5.0 * PI * PI);
        assert!((l[2].re - 5.0 * PI * PI).abs() < 0.05 * 5.0 * PI * PI);
    }

    #[test]
    fn residual_contract_holds() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh135, 17).unwrap();
        let s = assemble(&m, &catalog("ex5_2").unwrap()).unwrap();
        let sol = solve_smallest(&s, &SolverOptions::with_k(8)).unwrap();
        assert!(sol.converged, "{:?}", sol.ritz_residuals);
        assert!(sol.residual_contract.iter().all(|&c| c));
        for w in sol.eigenvalues.windows(2) {
            assert!(w[0].norm() <= w[1].norm());
        }
    }

    #[test]
    fn single_unknown() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 3).unwrap();
        let s = assemble(&m, &laplace(2)).unwrap();
        let sol = solve_smallest(&s, &SolverOptions::with_k(3)).unwrap();
        assert_eq!(sol.eigenvalues.len(), 1);
        let want = s.a.get(0, 0) / s.b.get(0, 0);
        assert!((sol.lambda1().re - want).abs() < 1e-12 * want);
    }

    #[test]
    fn no_interior_is_an_error() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 2).unwrap();
        let s = assemble(&m, &laplace(2)).unwrap();
        assert!(matches!(solve_smallest(&s, &SolverOptions::default()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn properties_on_certified_path() {
        let m = SimplicialMesh::generate_structured(StructuredKind::Mesh45, 17).unwrap();
        let s = assemble(&m, &catalog("ex5_1").unwrap()).unwrap();
        let cert = crate::matrix_analysis::m_matrix_certificate(&s.a).unwrap();
        let sol = solve_smallest(&s, &SolverOptions::with_k(4)).unwrap();
        let p = property_suite(&sol, &s, Some(&cert), 7).unwrap();
        assert!(p.principal_real && p.principal_simple == Some(true) && p.sign_preserving);
        assert!(p.rayleigh_identity_ok && p.variational_min_ok == Some(true));
        assert_eq!(p.undershoot, Some(0.0));
        assert_eq!(p.certified_guarantee_holds, Some(true));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x = [10.0, 20.0, 40.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((log_log_slope(&x, &y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn convergence_needs_three_increasing() {
        let p = laplace(2);
        let o = SolverOptions::default();
        assert!(convergence_study(&p, StructuredKind::Mesh45, &[5, 9], 1.0, &o, Execution::Sequential).is_err());
        assert!(convergence_study(&p, StructuredKind::Mesh45, &[9, 5, 17], 1.0, &o, Execution::Sequential).is_err());
    }
}
