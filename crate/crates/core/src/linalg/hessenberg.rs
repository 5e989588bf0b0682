//! Householder reduction to upper Hessenberg form and the Francis
//! double-shift QR iteration to real Schur form.

use num_complex::Complex64;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Largest order accepted by [`hessenberg_eigen`].
pub const MAX_HESSENBERG_ORDER: usize = 200;

/// Real Schur decomposition `Qᵀ H Q = T` with `T` quasi upper triangular.
#[derive(Debug, Clone)]
pub struct RealSchur {
    /// Quasi-triangular factor; 2×2 diagonal blocks carry complex pairs.
    pub t: DenseMatrix,
    /// Orthogonal Schur vectors.
    pub q: DenseMatrix,
    /// Eigenvalues in diagonal order; conjugate pairs are adjacent with the
    /// positive imaginary part first.
    pub eigenvalues: Vec<Complex64>,
}

/// Reduces a square matrix to upper Hessenberg form: returns `(H, Q)` with
/// `A = Q H Qᵀ`.
pub fn hessenberg_reduce(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    assert!(a.is_square(), "Hessenberg reduction needs a square matrix");
    let n = a.rows();
    let mut h = a.clone();
    let mut q = DenseMatrix::identity(n);
    let mut v = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let alpha: f64 = (k + 1..n).map(|i| h[(i, k)] * h[(i, k)]).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let beta = if x0 >= 0.0 { -alpha } else { alpha };
        for i in 0..n {
            v[i] = 0.0;
        }
        v[k + 1] = x0 - beta;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vnorm2: f64 = v[k + 1..].iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm2;
        // H <- P H P with P = I - tau v vᵀ
        for j in 0..n {
            let s: f64 = (k + 1..n).map(|i| v[i] * h[(i, j)]).sum::<f64>() * tau;
            for i in k + 1..n {
                h[(i, j)] -= s * v[i];
            }
        }
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| h[(i, j)] * v[j]).sum::<f64>() * tau;
            for j in k + 1..n {
                h[(i, j)] -= s * v[j];
            }
        }
        for i in 0..n {
            let s: f64 = (k + 1..n).map(|j| q[(i, j)] * v[j]).sum::<f64>() * tau;
            for j in k + 1..n {
                q[(i, j)] -= s * v[j];
            }
        }
        h[(k + 1, k)] = beta;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    (h, q)
}

/// Eigenvalues and real Schur form of an upper Hessenberg matrix.
///
/// Entries below the first subdiagonal are ignored. Fails with
/// [`Error::NumericalFailure`] if the iteration needs more than `30 m`
/// double-shift sweeps in total.
pub fn hessenberg_eigen(h: &DenseMatrix) -> Result<RealSchur> {
    if !h.is_square() {
        return Err(Error::InvalidInput("Hessenberg matrix must be square".into()));
    }
    let nn = h.rows();
    if nn > MAX_HESSENBERG_ORDER {
        return Err(Error::SizeLimit { size: nn, limit: MAX_HESSENBERG_ORDER });
    }
    let mut t = h.clone();
    for i in 0..nn {
        for j in 0..i.saturating_sub(1) {
            t[(i, j)] = 0.0;
        }
    }
    let mut v = DenseMatrix::identity(nn);
    let mut re = vec![0.0; nn];
    let mut im = vec![0.0; nn];
    if nn == 0 {
        return Ok(RealSchur { t, q: v, eigenvalues: vec![] });
    }

    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let norm: f64 = (0..nn).map(|i| (i.saturating_sub(1)..nn).map(|j| t[(i, j)].abs()).sum::<f64>()).sum();
    let max_sweeps = 30 * nn;
    let mut sweeps = 0usize;

    let mut n = nn as isize - 1;
    let mut iter = 0;
    let (mut p, mut q, mut r, mut s, mut z, mut w, mut x, mut y);
    while n >= 0 {
        let nu = n as usize;
        // single small subdiagonal
        let mut l = nu;
        while l > 0 {
            s = t[(l - 1, l - 1)].abs() + t[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if t[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // one root
            t[(nu, nu)] += exshift;
            re[nu] = t[(nu, nu)];
            im[nu] = 0.0;
            if nu > 0 {
                t[(nu, nu - 1)] = 0.0;
            }
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // two roots
            w = t[(nu, nu - 1)] * t[(nu - 1, nu)];
            p = (t[(nu - 1, nu - 1)] - t[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            t[(nu, nu)] += exshift;
            t[(nu - 1, nu - 1)] += exshift;
            x = t[(nu, nu)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                re[nu - 1] = x + z;
                re[nu] = re[nu - 1];
                if z != 0.0 {
                    re[nu] = x - w / z;
                }
                im[nu - 1] = 0.0;
                im[nu] = 0.0;
                x = t[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = t[(nu - 1, j)];
                    t[(nu - 1, j)] = q * z + p * t[(nu, j)];
                    t[(nu, j)] = q * t[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = t[(i, nu - 1)];
                    t[(i, nu - 1)] = q * z + p * t[(i, nu)];
                    t[(i, nu)] = q * t[(i, nu)] - p * z;
                }
                for i in 0..nn {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
                t[(nu, nu - 1)] = 0.0;
            } else {
                re[nu - 1] = x + p;
                re[nu] = x + p;
                im[nu - 1] = z;
                im[nu] = -z;
            }
            if nu >= 2 {
                t[(nu - 1, nu - 2)] = 0.0;
            }
            n -= 2;
            iter = 0;
        } else {
            sweeps += 1;
            if sweeps > max_sweeps {
                return Err(Error::NumericalFailure(format!(
                    "QR iteration did not converge within {max_sweeps} sweeps"
                )));
            }
            // shift
            x = t[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = t[(nu - 1, nu - 1)];
                w = t[(nu, nu - 1)] * t[(nu - 1, nu)];
            }
            if iter == 10 {
                exshift += x;
                for i in 0..=nu {
                    t[(i, i)] -= x;
                }
                s = t[(nu, nu - 1)].abs() + t[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        t[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;

            // two consecutive small subdiagonals
            let mut m = nu - 2;
            loop {
                z = t[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / t[(m + 1, m)] + t[(m, m + 1)];
                q = t[(m + 1, m + 1)] - z - r - s;
                r = t[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if t[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (t[(m - 1, m - 1)].abs() + z.abs() + t[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                t[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    t[(i, i - 3)] = 0.0;
                }
            }

            // double QR step on rows l..=n, columns m..=n
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = t[(k, k - 1)];
                    q = t[(k + 1, k - 1)];
                    r = if notlast { t[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        t[(k, k - 1)] = -s * x;
                    } else if l != m {
                        t[(k, k - 1)] = -t[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..nn {
                        p = t[(k, j)] + q * t[(k + 1, j)];
                        if notlast {
                            p += r * t[(k + 2, j)];
                            t[(k + 2, j)] -= p * z;
                        }
                        t[(k, j)] -= p * x;
                        t[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * t[(i, k)] + y * t[(i, k + 1)];
                        if notlast {
                            p += z * t[(i, k + 2)];
                            t[(i, k + 2)] -= p * r;
                        }
                        t[(i, k)] -= p;
                        t[(i, k + 1)] -= p * q;
                    }
                    for i in 0..nn {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                    if notlast {
                        // the reflector annihilates the bulge entry exactly
                        if k != m {
                            t[(k + 2, k - 1)] = 0.0;
                        }
                    }
                    if k != m {
                        t[(k + 1, k - 1)] = 0.0;
                    }
                }
                k += 1;
            }
        }
    }
    for i in 0..nn {
        for j in 0..i.saturating_sub(1) {
            t[(i, j)] = 0.0;
        }
    }
    let eigenvalues = re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    Ok(RealSchur { t, q: v, eigenvalues })
}

/// One explicit single-shift QR step `H − σI = QR`, `H ← RQ + σI`, on a
/// Hessenberg matrix, accumulating the rotations into `acc` (`acc ← acc·Q`).
pub(crate) fn shifted_qr_step(h: &mut DenseMatrix, acc: &mut DenseMatrix, sigma: f64) {
    let m = h.rows();
    if m < 2 {
        return;
    }
    let mut rot = Vec::with_capacity(m - 1);
    for i in 0..m {
        h[(i, i)] -= sigma;
    }
    for k in 0..m - 1 {
        let (a, b) = (h[(k, k)], h[(k + 1, k)]);
        let r = a.hypot(b);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
        for j in 0..m {
            let (x, y) = (h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = c * x + s * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rot.push((c, s));
    }
    for (k, &(c, s)) in rot.iter().enumerate() {
        for i in 0..m {
            let (x, y) = (h[(i, k)], h[(i, k + 1)]);
            h[(i, k)] = c * x + s * y;
            h[(i, k + 1)] = -s * x + c * y;
        }
        for i in 0..acc.rows() {
            let (x, y) = (acc[(i, k)], acc[(i, k + 1)]);
            acc[(i, k)] = c * x + s * y;
            acc[(i, k + 1)] = -s * x + c * y;
        }
    }
    for i in 0..m {
        h[(i, i)] += sigma;
    }
    for i in 0..m {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
}

/// One implicit double-shift (Francis) step with shifts `σ, σ̄`, given as
/// `trace = 2 Re σ` and `det = |σ|²`. Accumulates into `acc`.
pub(crate) fn double_shift_qr_step(h: &mut DenseMatrix, acc: &mut DenseMatrix, trace: f64, det: f64) {
    let m = h.rows();
    if m < 3 {
        // the full 2×2 (or smaller) problem: the double shift annihilates it
        if m == 2 {
            let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
            // M = H² − trace·H + det·I; its first column drives the rotation
            let x = a * a + b * c - trace * a + det;
            let y = c * (a + d - trace);
            let r = x.hypot(y);
            if r > 0.0 {
                let (cs, sn) = (x / r, y / r);
                apply_left_rotation(h, 0, cs, sn);
                apply_right_rotation(h, 0, cs, sn);
                apply_right_rotation(acc, 0, cs, sn);
            }
        }
        return;
    }
    let mut x = h[(0, 0)] * h[(0, 0)] + h[(0, 1)] * h[(1, 0)] - trace * h[(0, 0)] + det;
    let mut y = h[(1, 0)] * (h[(0, 0)] + h[(1, 1)] - trace);
    let mut z = h[(1, 0)] * h[(2, 1)];
    for k in 0..m - 2 {
        let v = householder3(x, y, z);
        if let Some((v, tau)) = v {
            let q = k.saturating_sub(1);
            // left: rows k..k+3, columns q..m
            for j in q..m {
                let s = tau * (v[0] * h[(k, j)] + v[1] * h[(k + 1, j)] + v[2] * h[(k + 2, j)]);
                h[(k, j)] -= s * v[0];
                h[(k + 1, j)] -= s * v[1];
                h[(k + 2, j)] -= s * v[2];
            }
            let r = (k + 3).min(m - 1);
            for i in 0..=r {
                let s = tau * (v[0] * h[(i, k)] + v[1] * h[(i, k + 1)] + v[2] * h[(i, k + 2)]);
                h[(i, k)] -= s * v[0];
                h[(i, k + 1)] -= s * v[1];
                h[(i, k + 2)] -= s * v[2];
            }
            for i in 0..acc.rows() {
                let s = tau * (v[0] * acc[(i, k)] + v[1] * acc[(i, k + 1)] + v[2] * acc[(i, k + 2)]);
                acc[(i, k)] -= s * v[0];
                acc[(i, k + 1)] -= s * v[1];
                acc[(i, k + 2)] -= s * v[2];
            }
        }
        x = h[(k + 1, k)];
        y = h[(k + 2, k)];
        if k < m - 3 {
            z = h[(k + 3, k)];
        }
    }
    // final 2-vector Givens rotation
    let r = x.hypot(y);
    if r > 0.0 {
        let (cs, sn) = (x / r, y / r);
        apply_left_rotation(h, m - 2, cs, sn);
        apply_right_rotation(h, m - 2, cs, sn);
        apply_right_rotation(acc, m - 2, cs, sn);
    }
    for i in 0..m {
        for j in 0..i.saturating_sub(1) {
            h[(i, j)] = 0.0;
        }
    }
}

fn householder3(x: f64, y: f64, z: f64) -> Option<([f64; 3], f64)> {
    let alpha = (x * x + y * y + z * z).sqrt();
    if alpha == 0.0 {
        return None;
    }
    let beta = if x >= 0.0 { -alpha } else { alpha };
    let v = [x - beta, y, z];
    let vn = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if vn == 0.0 {
        return None;
    }
    Some((v, 2.0 / vn))
}

fn apply_left_rotation(h: &mut DenseMatrix, k: usize, c: f64, s: f64) {
    for j in 0..h.cols() {
        let (x, y) = (h[(k, j)], h[(k + 1, j)]);
        h[(k, j)] = c * x + s * y;
        h[(k + 1, j)] = -s * x + c * y;
    }
}

fn apply_right_rotation(h: &mut DenseMatrix, k: usize, c: f64, s: f64) {
    for i in 0..h.rows() {
        let (x, y) = (h[(i, k)], h[(i, k + 1)]);
        h[(i, k)] = c * x + s * y;
        h[(i, k + 1)] = -s * x + c * y;
    }
}
