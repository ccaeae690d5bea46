//! Dense 64-bit linear algebra at desk scale.
//!
//! Everything here targets small matrices (agents N ≤ 64, state dimension
//! K ≤ 10, noise states below a few hundred), so the implementations favor
//! clarity and determinism over blocking or SIMD: row-major storage, LU with
//! partial pivoting, cyclic Jacobi for symmetric eigenvalues, and a
//! Hessenberg + Francis double-shift QR iteration for general real
//! eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinalgError {
    /// Operand shapes do not agree.
    Dimension {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Pivot below tolerance during factorization.
    Singular,
    /// Iterative eigenvalue scheme failed to deflate.
    NoConvergence,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::Dimension { expected, got } => {
                write!(
                    f,
                    "dimension mismatch: expected {}x{}, got {}x{}",
                    expected.0, expected.1, got.0, got.1
                )
            }
            LinalgError::Singular => write!(f, "matrix is singular to working precision"),
            LinalgError::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LinalgError {}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    /// Column vector from a slice.
    pub fn col_vec(v: &[f64]) -> Self {
        Mat {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.at(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.add_at(i, j, a * rhs.at(k, j));
                }
            }
        }
        out
    }

    /// `self * v` for a vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += self.at(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `vᵀ * self` for a vector `v`.
    pub fn vecmat(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                out[j] += vi * self.at(i, j);
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, rhs: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|a| a * a).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(
            0.0,
            |m, a| if math::abs(*a) > m { math::abs(*a) } else { m },
        )
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

/// Vector helpers used throughout the crate.
pub mod vec_ops {
    use super::*;

    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm2(a: &[f64]) -> f64 {
        math::sqrt(dot(a, a))
    }

    pub fn norm1(a: &[f64]) -> f64 {
        a.iter().map(|x| math::abs(*x)).sum()
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
        norm2(&sub(a, b))
    }

    pub fn dist1(a: &[f64], b: &[f64]) -> f64 {
        norm1(&sub(a, b))
    }

    pub fn sum(a: &[f64]) -> f64 {
        a.iter().sum()
    }
}

/// LU factorization with partial pivoting.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Lu, LinalgError> {
        if a.rows != a.cols {
            return Err(LinalgError::Dimension {
                expected: (a.rows, a.rows),
                got: (a.rows, a.cols),
            });
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = math::abs(lu.at(k, k));
            for i in (k + 1)..n {
                let v = math::abs(lu.at(i, k));
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < 1e-300 {
                return Err(LinalgError::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu.at(k, j);
                    lu.set(k, j, lu.at(p, j));
                    lu.set(p, j, tmp);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu.at(k, k);
            for i in (k + 1)..n {
                let factor = lu.at(i, k) / pivot;
                lu.set(i, k, factor);
                for j in (k + 1)..n {
                    let v = lu.at(i, j) - factor * lu.at(k, j);
                    lu.set(i, j, v);
                }
            }
        }
        Ok(Lu { lu, perm, sign })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu.at(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu.at(i, j) * x[j];
            }
            x[i] = acc / self.lu.at(i, i);
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let n = self.lu.rows;
        assert_eq!(b.rows, n);
        let mut out = Mat::zeros(n, b.cols);
        for j in 0..b.cols {
            let col: Vec<f64> = (0..n).map(|i| b.at(i, j)).collect();
            let x = self.solve_vec(&col);
            for i in 0..n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let mut d = self.sign;
        for i in 0..self.lu.rows {
            d *= self.lu.at(i, i);
        }
        d
    }
}

/// Solve `a x = b` by LU with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(Lu::factor(a)?.solve_vec(b))
}

pub fn inverse(a: &Mat) -> Result<Mat, LinalgError> {
    let lu = Lu::factor(a)?;
    Ok(lu.solve_mat(&Mat::eye(a.rows())))
}

/// Eigenvalues of a symmetric matrix via cyclic Jacobi, ascending order.
///
/// Symmetry is the caller's responsibility; only the lower triangle is
/// trusted as far as averaging `(a_ij + a_ji)/2` on input.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.at(i, j) + m.at(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let off = |m: &Mat| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += m.at(i, j) * m.at(i, j);
            }
        }
        s
    };
    for _sweep in 0..200 {
        if off(&m) < 1e-28 * (1.0 + m.frobenius_norm()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                if math::abs(apq) < 1e-300 {
                    continue;
                }
                let app = m.at(p, p);
                let aqq = m.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (math::abs(theta) + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = m.at(k, p);
                    let akq = m.at(k, q);
                    m.set(k, p, c * akp - s * akq);
                    m.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = m.at(p, k);
                    let aqk = m.at(q, k);
                    m.set(p, k, c * apk - s * aqk);
                    m.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m.at(i, i)).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Spectral norm `‖M‖₂` via the largest eigenvalue of `MᵀM`.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.rows == 0 || a.cols == 0 {
        return 0.0;
    }
    let gram = a.transpose().matmul(a);
    let eigs = sym_eigenvalues(&gram);
    let lam = eigs.last().copied().unwrap_or(0.0).max(0.0);
    math::sqrt(lam)
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
///
/// Reduction to upper Hessenberg form by stabilized elementary
/// transformations, then Francis double-shift QR with deflation.
pub fn eigenvalues(a: &Mat) -> Result<Vec<(f64, f64)>, LinalgError> {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(a.at(0, 0), 0.0)]);
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    hqr(&mut h)
}

fn hessenberg_in_place(a: &mut Mat) {
    let n = a.rows();
    for m in 1..n.saturating_sub(1) {
        // pivot: largest entry in column m-1 below row m
        let mut x = 0.0;
        let mut i_piv = m;
        for j in m..n {
            if math::abs(a.at(j, m - 1)) > math::abs(x) {
                x = a.at(j, m - 1);
                i_piv = j;
            }
        }
        if i_piv != m {
            for j in (m - 1)..n {
                let tmp = a.at(i_piv, j);
                a.set(i_piv, j, a.at(m, j));
                a.set(m, j, tmp);
            }
            for j in 0..n {
                let tmp = a.at(j, i_piv);
                a.set(j, i_piv, a.at(j, m));
                a.set(j, m, tmp);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a.at(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    a.set(i, m - 1, y);
                    for j in m..n {
                        let v = a.at(i, j) - y * a.at(m, j);
                        a.set(i, j, v);
                    }
                    for j in 0..n {
                        let v = a.at(j, m) + y * a.at(j, i);
                        a.set(j, m, v);
                    }
                }
            }
        }
    }
    // zero out the junk below the subdiagonal left by the elimination
    for i in 2..n {
        for j in 0..(i - 1) {
            a.set(i, j, 0.0);
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
fn hqr(h: &mut Mat) -> Result<Vec<(f64, f64)>, LinalgError> {
    let n = h.rows();
    let mut eigs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += math::abs(h.at(i, j));
        }
    }
    if anorm == 0.0 {
        for _ in 0..n {
            eigs.push((0.0, 0.0));
        }
        return Ok(eigs);
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    while nn >= 0 {
        let mut its = 0;
        loop {
            // search for a small subdiagonal element
            let mut l = nn;
            while l >= 1 {
                let s = math::abs(h.at((l - 1) as usize, (l - 1) as usize))
                    + math::abs(h.at(l as usize, l as usize));
                let s = if s == 0.0 { anorm } else { s };
                if math::abs(h.at(l as usize, (l - 1) as usize)) + s == s {
                    h.set(l as usize, (l - 1) as usize, 0.0);
                    break;
                }
                l -= 1;
            }
            let x = h.at(nn as usize, nn as usize);
            if l == nn {
                eigs.push((x + t, 0.0));
                nn -= 1;
                break;
            }
            let y = h.at((nn - 1) as usize, (nn - 1) as usize);
            let w = h.at(nn as usize, (nn - 1) as usize) * h.at((nn - 1) as usize, nn as usize);
            if l == nn - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = math::sqrt(math::abs(q));
                let x_shift = x + t;
                if q >= 0.0 {
                    let z = p + if p >= 0.0 { z } else { -z };
                    eigs.push((x_shift + z, 0.0));
                    if z != 0.0 {
                        eigs.push((x_shift - w / z, 0.0));
                    } else {
                        eigs.push((x_shift, 0.0));
                    }
                } else {
                    eigs.push((x_shift + p, z));
                    eigs.push((x_shift + p, -z));
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(LinalgError::NoConvergence);
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 {
                // exceptional shift
                t += x;
                for i in 0..=(nn as usize) {
                    let v = h.at(i, i) - x;
                    h.set(i, i, v);
                }
                let s = math::abs(h.at(nn as usize, (nn - 1) as usize))
                    + math::abs(h.at((nn - 1) as usize, (nn - 2) as usize));
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }
            its += 1;
            // look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (0.0, 0.0, 0.0);
            while m >= l {
                let z = h.at(m as usize, m as usize);
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / h.at((m + 1) as usize, m as usize)
                    + h.at(m as usize, (m + 1) as usize);
                q = h.at((m + 1) as usize, (m + 1) as usize) - z - rr - ss;
                r = h.at((m + 2) as usize, (m + 1) as usize);
                let s = math::abs(p) + math::abs(q) + math::abs(r);
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u =
                    math::abs(h.at(m as usize, (m - 1) as usize)) * (math::abs(q) + math::abs(r));
                let v = math::abs(p)
                    * (math::abs(h.at((m - 1) as usize, (m - 1) as usize))
                        + math::abs(h.at(m as usize, m as usize))
                        + math::abs(h.at((m + 1) as usize, (m + 1) as usize)));
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                h.set(i as usize, (i - 2) as usize, 0.0);
                if i != m + 2 {
                    h.set(i as usize, (i - 3) as usize, 0.0);
                }
            }
            // double QR step on rows l..nn and columns m..nn
            let mut k = m;
            while k < nn {
                if k != m {
                    p = h.at(k as usize, (k - 1) as usize);
                    q = h.at((k + 1) as usize, (k - 1) as usize);
                    r = if k != nn - 1 {
                        h.at((k + 2) as usize, (k - 1) as usize)
                    } else {
                        0.0
                    };
                    x = math::abs(p) + math::abs(q) + math::abs(r);
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = {
                    let mag = math::sqrt(p * p + q * q + r * r);
                    if p >= 0.0 {
                        mag
                    } else {
                        -mag
                    }
                };
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            let v = -h.at(k as usize, (k - 1) as usize);
                            h.set(k as usize, (k - 1) as usize, v);
                        }
                    } else {
                        h.set(k as usize, (k - 1) as usize, -s * x);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in (k as usize)..=(nn as usize) {
                        let mut pp = h.at(k as usize, j) + q * h.at((k + 1) as usize, j);
                        if k != nn - 1 {
                            pp += r * h.at((k + 2) as usize, j);
                            let v = h.at((k + 2) as usize, j) - pp * z;
                            h.set((k + 2) as usize, j, v);
                        }
                        let v1 = h.at((k + 1) as usize, j) - pp * y;
                        h.set((k + 1) as usize, j, v1);
                        let v0 = h.at(k as usize, j) - pp * x;
                        h.set(k as usize, j, v0);
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in (l as usize)..=(mmin as usize) {
                        let mut pp = x * h.at(i, k as usize) + y * h.at(i, (k + 1) as usize);
                        if k != nn - 1 {
                            pp += z * h.at(i, (k + 2) as usize);
                            let v = h.at(i, (k + 2) as usize) - pp * r;
                            h.set(i, (k + 2) as usize, v);
                        }
                        let v1 = h.at(i, (k + 1) as usize) - pp * q;
                        h.set(i, (k + 1) as usize, v1);
                        let v0 = h.at(i, k as usize) - pp;
                        h.set(i, k as usize, v0);
                    }
                }
                k += 1;
            }
        }
    }
    Ok(eigs)
}

/// Largest real part among the eigenvalues of `a`.
pub fn max_eigenvalue_real_part(a: &Mat) -> Result<f64, LinalgError> {
    let eigs = eigenvalues(a)?;
    Ok(eigs.iter().fold(f64::NEG_INFINITY, |m, (re, _)| m.max(*re)))
}
