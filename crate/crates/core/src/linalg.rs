//! Dense complex matrices and the Hermitian spectral routines the rest of the
//! crate is built on.
//!
//! Everything here is small and dense (dimension up to a few thousand at the
//! very most), so matrices are plain row-major `Vec<C64>` buffers.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Eigenvalues below this (in absolute value) are treated as zero when
/// inverting or taking square roots of positive semidefinite operators.
pub const PSD_TOLERANCE: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from nested rows; panics on ragged input, so keep this for literals.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged matrix literal");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// `|u><v|`
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    /// `|v><v|`
    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if let Some(bad) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: bad.len(),
            });
        }
        Ok(Self::from_fn(rows, columns.len(), |r, c| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &Self, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Average with the adjoint; removes rounding asymmetry before eigensolves.
    pub fn hermitian_part(&self) -> Self {
        let n = self.rows;
        Self::from_fn(n, n, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        Ok(self.matmul_unchecked(other))
    }

    fn matmul_unchecked(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * m];
        for r in 0..n {
            let out_row = &mut out[r * m..(r + 1) * m];
            for j in 0..k {
                let a = self.data[r * k + j];
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[j * m..(j + 1) * m];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        Self {
            rows: n,
            cols: m,
            data: out,
        }
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self * rho * self^dagger`
    pub fn conjugate(&self, rho: &Self) -> Result<Self> {
        self.matmul(rho)?.matmul(&self.dagger())
    }

    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut data = vec![ZERO; rows * cols];
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self.data[ar * self.cols + ac];
                if a == ZERO {
                    continue;
                }
                for br in 0..other.rows {
                    let base = (ar * other.rows + br) * cols + ac * other.cols;
                    let brow = other.row(br);
                    for (bc, b) in brow.iter().enumerate() {
                        data[base + bc] = a * b;
                    }
                }
            }
        }
        Self { rows, cols, data }
    }

    /// `self^{⊗n}`; the 1x1 identity for `n = 0`.
    pub fn kron_power(&self, n: usize) -> Self {
        let mut out = Self::identity(1);
        for _ in 0..n {
            out = out.kron(self);
        }
        out
    }

    /// Extract the submatrix on the given row/column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        self.matmul_unchecked(rhs)
    }
}

pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace out every subsystem not listed in `keep`.
///
/// `dims` are the subsystem dimensions in tensor order, `keep` must be
/// strictly increasing.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: m.rows(),
        });
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "kept subsystems {keep:?} must be increasing indices below {}",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let offsets = |subsystems: &[usize]| -> Vec<usize> {
        let count: usize = subsystems.iter().map(|&s| dims[s]).product();
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for &s in subsystems.iter().rev() {
                    off += (idx % dims[s]) * strides[s];
                    idx /= dims[s];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(keep);
    let traced_off = offsets(&traced);

    let d = kept_off.len();
    let mut out = ComplexMatrix::zeros(d, d);
    for (r, &kr) in kept_off.iter().enumerate() {
        for (c, &kc) in kept_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_off {
                acc += m[(kr + t, kc + t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order. Each eigenvector's first
/// component with modulus above `1e-10` is made real and positive, so the
/// output is deterministic for a given input.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl Spectrum {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// Rebuild `sum_k g(lambda_k) |v_k><v_k|`.
    pub fn apply(&self, mut g: impl FnMut(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = g(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vector(k);
            for r in 0..n {
                let vr = v[r] * w;
                if vr == ZERO {
                    continue;
                }
                for c in 0..n {
                    out[(r, c)] += vr * v[c].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|x| x)
    }
}

/// Reduce a Hermitian matrix to real symmetric tridiagonal form.
///
/// Returns `(diag, offdiag, q)` with `A = Q T Q^dagger`; the phases needed to
/// make the off-diagonal real are folded into `q`.
fn tridiagonalize(m: &ComplexMatrix, want_q: bool) -> (Vec<f64>, Vec<f64>, Option<ComplexMatrix>) {
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut reflectors: Vec<(usize, Vec<C64>)> = Vec::new();
    let mut sub = vec![ZERO; n.saturating_sub(1)];

    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = norm(&x);
        let x0 = x[0];
        if x.iter().skip(1).all(|z| *z == ZERO) {
            sub[k] = x0;
            continue;
        }
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { ONE };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = norm(&v);
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // Trailing block B <- H B H with H = I - 2 v v^dagger.
        let len = n - k - 1;
        let mut p = vec![ZERO; len];
        for (i, pi) in p.iter_mut().enumerate() {
            let row = &a.data[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            *pi = row.iter().zip(&v).map(|(b, vj)| b * vj).sum();
        }
        let kappa: C64 = inner(&v, &p);
        let w: Vec<C64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kappa).collect();
        for i in 0..len {
            let vi2 = v[i] * 2.0;
            let wi2 = w[i] * 2.0;
            let row = &mut a.data[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            for (j, b) in row.iter_mut().enumerate() {
                *b -= vi2 * w[j].conj() + wi2 * v[j].conj();
            }
        }
        for i in k + 1..n {
            a[(i, k)] = ZERO;
            a[(k, i)] = ZERO;
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha.conj();
        sub[k] = alpha;
        reflectors.push((k, v));
    }
    if n >= 2 {
        sub[n - 2] = a[(n - 1, n - 2)];
    }

    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut off = vec![0.0; n];
    // T = D T_r D^dagger with d_{k+1} = d_k e_k / |e_k|.
    let mut phases = vec![ONE; n];
    for k in 0..n.saturating_sub(1) {
        let e = sub[k];
        off[k] = e.norm();
        phases[k + 1] = if e.norm() > 0.0 {
            phases[k] * (e / e.norm())
        } else {
            phases[k]
        };
    }

    let q = want_q.then(|| {
        // Q = H_0 H_1 ... applied to D; accumulate right-to-left on D.
        let mut q = ComplexMatrix::diagonal(&phases);
        for (k, v) in reflectors.iter().rev() {
            let k = *k;
            for c in 0..n {
                let dot: C64 = (0..v.len()).map(|i| v[i].conj() * q[(k + 1 + i, c)]).sum();
                if dot == ZERO {
                    continue;
                }
                for i in 0..v.len() {
                    q[(k + 1 + i, c)] -= v[i] * dot * 2.0;
                }
            }
        }
        q
    });
    (diag, off, q)
}

/// Implicit QL on a real symmetric tridiagonal matrix; rotations are applied
/// to the columns of `z` when given.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut ComplexMatrix>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    // Deflate against the whole matrix scale as well, so blocks of
    // (near-)zero eigenvalues still split.
    let scale = d
        .iter()
        .zip(e.iter())
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0, f64::max);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(scale * 1e-3) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 200 {
                return Err(Error::NoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let cols = z.cols();
                    let rows = z.rows();
                    let data = z.as_mut_slice();
                    for k in 0..rows {
                        let base = k * cols;
                        let zi = data[base + i];
                        let zi1 = data[base + i + 1];
                        data[base + i + 1] = zi * s + zi1 * c;
                        data[base + i] = zi * c - zi1 * s;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    Ok(())
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    check_square(m)?;
    let scale = m.as_slice().iter().map(|z| z.norm()).fold(1.0, f64::max);
    let defect = m.hermiticity_defect();
    if defect > 1e-9 * scale {
        return Err(Error::NotHermitian { deviation: defect });
    }
    Ok(())
}

/// Full eigen-decomposition of a Hermitian matrix.
pub fn eigh(m: &ComplexMatrix) -> Result<Spectrum> {
    check_hermitian(m)?;
    let n = m.rows();
    let (mut d, mut e, q) = tridiagonalize(m, true);
    let mut q = q.expect("requested");
    tridiagonal_ql(&mut d, &mut e, Some(&mut q))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let mut v = q.column(old);
        let nv = norm(&v);
        if let Some(lead) = v.iter().find(|z| z.norm() > 1e-10 * nv).copied() {
            let fix = lead.conj() / lead.norm();
            for z in v.iter_mut() {
                *z *= fix;
            }
        }
        for (r, z) in v.into_iter().enumerate() {
            vectors[(r, new)] = z / nv;
        }
    }
    Ok(Spectrum { values, vectors })
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let (mut d, mut e, _) = tridiagonalize(m, false);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Eigenvalues of a real symmetric matrix given as a row-major buffer.
///
/// Used on the larger real-basis problems where the complex path would double
/// the memory traffic.
pub fn eigvals_real_symmetric(n: usize, data: &[f64]) -> Result<Vec<f64>> {
    if data.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: data.len(),
        });
    }
    let mut a = data.to_vec();
    let mut off = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        let xnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            off[k] = 0.0;
            continue;
        }
        let alpha = if v[0] > 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            off[k] = alpha.abs();
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        let len = n - k - 1;
        let mut p = vec![0.0; len];
        for (i, pi) in p.iter_mut().enumerate() {
            let row = &a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            *pi = row.iter().zip(&v).map(|(b, vj)| b * vj).sum();
        }
        let kappa: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
        let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kappa).collect();
        for i in 0..len {
            let vi2 = 2.0 * v[i];
            let wi2 = 2.0 * w[i];
            let row = &mut a[(k + 1 + i) * n + k + 1..(k + 1 + i) * n + n];
            for ((b, wj), vj) in row.iter_mut().zip(&w).zip(&v) {
                *b -= vi2 * wj + wi2 * vj;
            }
        }
        off[k] = alpha;
    }
    if n >= 2 {
        off[n - 2] = a[(n - 1) * n + n - 2];
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    for x in off.iter_mut() {
        *x = x.abs();
    }
    tridiagonal_ql(&mut d, &mut off, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// `||H||_1` for Hermitian `H`.
pub fn trace_norm_hermitian(h: &ComplexMatrix) -> Result<f64> {
    Ok(eigvalsh(h)?.iter().map(|x| x.abs()).sum())
}

/// `1/2 ||a - b||_1` for Hermitian operators of equal shape.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.rows(),
        });
    }
    Ok(0.5 * trace_norm_hermitian(&(a - b))?)
}

fn check_psd(spec: &Spectrum) -> Result<()> {
    let min = spec.values.last().copied().unwrap_or(0.0);
    if min < -PSD_TOLERANCE {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    Ok(())
}

/// Eigenvalues this close to zero are rounding noise; their square roots
/// would otherwise contribute `sqrt(eps)` each.
fn resolution(values: &[f64]) -> f64 {
    let max = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    values.len() as f64 * f64::EPSILON * max
}

/// `sum_k sqrt(max(l_k, 0))`, ignoring eigenvalues below the numerical resolution.
pub fn sum_sqrt_eigenvalues(values: &[f64]) -> f64 {
    let cut = resolution(values);
    values.iter().filter(|&&x| x > cut).map(|x| x.sqrt()).sum()
}

/// Square root of a positive semidefinite operator.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spec = eigh(m)?;
    check_psd(&spec)?;
    let cut = resolution(&spec.values);
    Ok(spec.apply(|x| if x > cut { x.sqrt() } else { 0.0 }))
}

/// `M^{-1/2}` on the support of `M` (eigenvalues below [`PSD_TOLERANCE`] are
/// treated as kernel), together with the projector onto that support.
pub fn pseudo_inverse_sqrt(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let spec = eigh(m)?;
    check_psd(&spec)?;
    let inv = spec.apply(|x| if x > PSD_TOLERANCE { 1.0 / x.sqrt() } else { 0.0 });
    let support = spec.apply(|x| if x > PSD_TOLERANCE { 1.0 } else { 0.0 });
    Ok((inv, support))
}

/// `(Tr sqrt(sqrt(a) b sqrt(a)))^2` for positive semidefinite `a`, `b`.
pub fn fidelity(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.rows(),
        });
    }
    let sa = sqrt_psd(a)?;
    let inner = (&(&sa * b) * &sa).hermitian_part();
    let root = sum_sqrt_eigenvalues(&eigvalsh(&inner)?);
    Ok(root * root)
}

/// Singular values by one-sided Jacobi, accurate to `eps * ||x||` even for
/// the small ones (the Gram route loses half the digits there).
pub fn singular_values(x: &ComplexMatrix) -> Result<Vec<f64>> {
    let (rows, cols) = (x.rows(), x.cols());
    let mut a: Vec<Vec<C64>> = (0..cols).map(|c| x.column(c)).collect();
    // A rotation moves singular values by about |gamma| / ||a_big||, so
    // pairs whose coupling is below eps * ||x|| * ||a_small|| are left alone.
    // Columns below eps * ||x|| are rounding noise; rotating against them
    // only stirs that noise around and never settles.
    let frob = x.frobenius_norm();
    let floor = (f64::EPSILON * frob).powi(2);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                if alpha.min(beta) <= floor {
                    continue;
                }
                let gamma = inner(&a[p], &a[q]);
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt().max(frob * alpha.min(beta).sqrt()) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                for r in 0..rows {
                    let ap = a[p][r];
                    let aq = a[q][r] * phase.conj();
                    a[p][r] = ap * c - aq * s;
                    a[q][r] = ap * s + aq * c;
                }
            }
        }
        if !rotated {
            let mut s: Vec<f64> = a.iter().map(|col| norm(col)).collect();
            s.sort_by(|a, b| b.total_cmp(a));
            return Ok(s);
        }
    }
    Err(Error::NoConvergence)
}

/// `||x||_1`, the sum of singular values.
pub fn nuclear_norm(x: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(x)?.iter().sum())
}

/// Singular value decomposition of a square matrix, `x = U diag(s) V^dagger`.
///
/// Computed through the eigenvectors of `x^dagger x`; left vectors for
/// vanishing singular values are completed by Gram-Schmidt so `U` is always
/// unitary.
pub fn svd_square(x: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    check_square(x)?;
    let n = x.rows();
    let gram = (&x.dagger() * x).hermitian_part();
    let spec = eigh(&gram)?;
    let v = spec.vectors.clone();
    let sigma: Vec<f64> = spec.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);

    let mut us: Vec<Vec<C64>> = Vec::with_capacity(n);
    for k in 0..n {
        if sigma[k] > 1e-12 * smax.max(1e-300) {
            let u = x.matvec(&v.column(k))?;
            us.push(u);
        } else {
            break;
        }
    }
    // Re-orthonormalize the images (they are orthogonal in exact arithmetic).
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    for u in us {
        push_orthonormal(&mut basis, u);
    }
    let mut e = 0;
    while basis.len() < n {
        let mut cand = vec![ZERO; n];
        cand[e % n] = ONE;
        push_orthonormal(&mut basis, cand);
        e += 1;
        if e > 2 * n {
            return Err(Error::NoConvergence);
        }
    }
    let u = ComplexMatrix::from_columns(&basis)?;
    Ok((u, sigma, v))
}

fn push_orthonormal(basis: &mut Vec<Vec<C64>>, mut v: Vec<C64>) {
    for _ in 0..2 {
        for b in basis.iter() {
            let c = inner(b, &v);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
    }
    let nv = norm(&v);
    if nv > 1e-8 {
        for z in v.iter_mut() {
            *z /= nv;
        }
        basis.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_y_spectrum() {
        let y = ComplexMatrix::from_rows(&[&[ZERO, c(0.0, -1.0)], &[c(0.0, 1.0), ZERO]]);
        let s = eigh(&y).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-14);
        assert!((s.values[1] + 1.0).abs() < 1e-14);
        let v = s.vector(0);
        // leading component real positive
        assert!(v[0].im.abs() < 1e-14 && v[0].re > 0.0);
        assert!((v[1] - c(0.0, 1.0) * v[0]).norm() < 1e-12);
    }

    #[test]
    fn reconstructs_random_hermitian() {
        let n = 7;
        let m = ComplexMatrix::from_fn(n, n, |r, col| {
            let (a, b) = (r.min(col) as f64, r.max(col) as f64);
            let im = if r < col {
                (a + 2.0 * b).cos()
            } else if r > col {
                -(a + 2.0 * b).cos()
            } else {
                0.0
            };
            c((a * 1.3 + b * 0.7).sin(), im)
        });
        let s = eigh(&m).unwrap();
        assert!(s.reconstruct().max_abs_diff(&m) < 1e-12);
        let vv = &s.vectors.dagger() * &s.vectors;
        assert!(vv.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = ComplexMatrix::from_rows(&[&[c(0.25, 0.0), c(0.1, 0.2)], &[c(0.1, -0.2), c(0.75, 0.0)]]);
        let b = ComplexMatrix::diagonal(&[c(0.5, 0.0), c(0.3, 0.0), c(0.2, 0.0)]);
        let ab = a.kron(&b);
        assert!(partial_trace(&ab, &[2, 3], &[0]).unwrap().max_abs_diff(&a) < 1e-15);
        assert!(partial_trace(&ab, &[2, 3], &[1]).unwrap().max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn real_symmetric_path_agrees() {
        let n = 9;
        let data: Vec<f64> = (0..n * n)
            .map(|k| {
                let (r, col) = (k / n, k % n);
                let (a, b) = (r.min(col) as f64, r.max(col) as f64);
                (a * 0.37 + b * 1.91).sin()
            })
            .collect();
        let m = ComplexMatrix::from_real(n, n, &data).unwrap();
        let x = eigvalsh(&m).unwrap();
        let y = eigvals_real_symmetric(n, &data).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_singular_values_match_gram_route_and_keep_small_ones() {
        let x = ComplexMatrix::from_fn(5, 5, |r, col| {
            c((r as f64 * 0.9 + col as f64).sin(), (r * col) as f64 * 0.1)
        });
        let jacobi = singular_values(&x).unwrap();
        let (_, gram, _) = svd_square(&x).unwrap();
        // x has rank 3; the Gram route only resolves sigma^2 to machine
        // precision, so compare squares
        for (a, b) in jacobi.iter().zip(&gram) {
            assert!((a * a - b * b).abs() < 1e-12, "{jacobi:?} vs {gram:?}");
        }
        let tiny = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(0.0, 1e-12), ZERO]);
        let s = singular_values(&(&tiny * &x.select(&[0, 1, 2], &[0, 1, 2]))).unwrap();
        let (_, g, _) = svd_square(&x.select(&[0, 1, 2], &[0, 1, 2])).unwrap();
        assert!(s[2].abs() < 1e-15);
        assert!(g.iter().all(|v| *v > 1e-6));
    }
}
