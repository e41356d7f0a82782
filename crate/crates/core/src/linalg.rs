//! Dense complex linear algebra.
//!
//! Everything here is sized for the registers the toolkit works with
//! (`D ≤ 16` for unitaries, `D² ≤ 256` for superoperators), so plain
//! row-major storage and unblocked algorithms are used throughout.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::tolerances::TOL;
use crate::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = num_complex::Complex64;

/// Largest dimension accepted by any dense constructor.
pub const MAX_DIM: usize = 4096;

/// Largest dimension accepted by [`eig_general`].
pub const MAX_EIG_DIM: usize = 256;

const ZERO: c64 = c64::new(0.0, 0.0);
const ONE: c64 = c64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<c64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<c64>) -> Result<ComplexMatrix> {
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::Overflow(format!("{rows}x{cols} exceeds {MAX_DIM}")));
        }
        if rows * cols != data.len() {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Builds a matrix from real parts only.
    pub fn from_real(rows: usize, cols: usize, re: &[f64]) -> Result<ComplexMatrix> {
        ComplexMatrix::from_vec(rows, cols, re.iter().map(|&r| c64::new(r, 0.0)).collect())
    }

    pub fn from_rows(rows: &[Vec<c64>]) -> Result<ComplexMatrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        ComplexMatrix::from_vec(r, c, rows.concat())
    }

    pub fn diag(entries: &[c64]) -> ComplexMatrix {
        let n = entries.len();
        let mut m = ComplexMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
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

    pub fn data(&self) -> &[c64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [c64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<c64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[c64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn same_shape(&self, other: &ComplexMatrix, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(ComplexMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(ComplexMatrix { rows: self.rows, cols: self.cols, data })
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: c64, other: &ComplexMatrix) -> Result<()> {
        self.same_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn scale(&self, s: c64) -> ComplexMatrix {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a * s).collect() }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul: {}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[c64]) -> Result<Vec<c64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!("matvec: {} columns vs vector {}", self.cols, v.len())));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn kron(&self, other: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (r, c) = (self.rows * other.rows, self.cols * other.cols);
        if r > MAX_DIM || c > MAX_DIM {
            return Err(Error::Overflow(format!("kron result {r}x{c} exceeds {MAX_DIM}")));
        }
        let mut out = ComplexMatrix::zeros(r, c);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.data[i * self.cols + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    let dst = (i * other.rows + k) * c + j * other.cols;
                    let src = &other.data[k * other.cols..(k + 1) * other.cols];
                    for (o, b) in out.data[dst..dst + other.cols].iter_mut().zip(src) {
                        *o = a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn conj(&self) -> ComplexMatrix {
        ComplexMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.conj()).collect() }
    }

    pub fn trace(&self) -> c64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// `Tr(self† · other)` without forming the product.
    pub fn inner(&self, other: &ComplexMatrix) -> Result<c64> {
        self.same_shape(other, "inner")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.data[i * self.cols + j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Frobenius norm of `U†U - I`.
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let p = self.adjoint().matmul(self).expect("square");
        p.sub(&ComplexMatrix::identity(self.rows)).expect("same shape").frobenius_norm()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// `(H + H†)/2`.
    pub fn hermitian_part(&self) -> Result<ComplexMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("hermitian part of non-square matrix".into()));
        }
        let a = self.adjoint();
        let mut out = self.add(&a)?;
        out.data.iter_mut().for_each(|x| *x *= 0.5);
        Ok(out)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = c64;
    fn index(&self, (r, c): (usize, usize)) -> &c64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut c64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(|z| format!("{:+.4}{:+.4}i", z.re, z.im)).collect();
            writeln!(f, "  {}", cells.join(" "))?;
        }
        write!(f, "]")
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRepr {
            rows: self.rows,
            cols: self.cols,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = MatrixRepr::deserialize(d)?;
        if m.re.len() != m.im.len() {
            return Err(serde::de::Error::custom("re and im lengths differ"));
        }
        let data = m.re.iter().zip(&m.im).map(|(&r, &i)| c64::new(r, i)).collect();
        ComplexMatrix::from_vec(m.rows, m.cols, data).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns real eigenvalues in ascending order and the unitary whose columns
/// are the matching eigenvectors.
pub fn eigh(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !h.is_square() {
        return Err(Error::Dimension(format!("eigh on {}x{}", h.rows, h.cols)));
    }
    let herm_err = h.hermiticity_error();
    let scale = h.max_abs().max(1.0);
    if herm_err > TOL.hermitian * scale {
        return Err(Error::Contract(format!("matrix is not Hermitian (deviation {herm_err:.3e})")));
    }
    let n = h.rows;
    let mut a = h.hermitian_part()?;
    let mut v = ComplexMatrix::identity(n);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.data[i * n + j].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.data[p * n + q];
                let m = apq.norm();
                if m <= 1e-300 {
                    continue;
                }
                let phase = apq / m;
                let app = a.data[p * n + p].re;
                let aqq = a.data[q * n + q].re;
                let theta = (aqq - app) / (2.0 * m);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // G acts on the (p, q) plane: G = diag(1, e^{-iφ}) · [[c, s], [-s, c]].
                let gpp = c64::new(c, 0.0);
                let gpq = c64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                // A <- A G
                for r in 0..n {
                    let (x, y) = (a.data[r * n + p], a.data[r * n + q]);
                    a.data[r * n + p] = x * gpp + y * gqp;
                    a.data[r * n + q] = x * gpq + y * gqq;
                }
                // A <- G† A
                for col in 0..n {
                    let (x, y) = (a.data[p * n + col], a.data[q * n + col]);
                    a.data[p * n + col] = gpp.conj() * x + gqp.conj() * y;
                    a.data[q * n + col] = gpq.conj() * x + gqq.conj() * y;
                }
                a.data[p * n + q] = ZERO;
                a.data[q * n + p] = ZERO;
                a.data[p * n + p].im = 0.0;
                a.data[q * n + q].im = 0.0;
                for r in 0..n {
                    let (x, y) = (v.data[r * n + p], v.data[r * n + q]);
                    v.data[r * n + p] = x * gpp + y * gqp;
                    v.data[r * n + q] = x * gpq + y * gqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.data[i * n + i].re.total_cmp(&a.data[j * n + j].re));
    let values = order.iter().map(|&i| a.data[i * n + i].re).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs.data[r * n + dst] = v.data[r * n + src];
        }
    }
    Ok((values, vecs))
}

/// `exp(-i · scale · h)` for Hermitian `h`.
pub fn expm_hermitian(h: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix> {
    let (vals, v) = eigh(h)?;
    let n = h.rows;
    let phases: Vec<c64> = vals.iter().map(|&l| c64::from_polar(1.0, -scale * l)).collect();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += v.data[i * n + k] * phases[k] * v.data[j * n + k].conj();
            }
            out.data[i * n + j] = acc;
        }
    }
    Ok(out)
}

/// All eigenvalues of a general square matrix.
///
/// Householder reduction to upper Hessenberg form followed by single-shift
/// complex QR iterations with Wilkinson shifts and deflation. Eigenvalues are
/// returned in deflation order.
pub fn eig_general(a: &ComplexMatrix) -> Result<Vec<c64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("eig_general on {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    if n > MAX_EIG_DIM {
        return Err(Error::Overflow(format!("eig_general dimension {n} exceeds {MAX_EIG_DIM}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    hessenberg_in_place(&mut h);
    let mut eig = vec![ZERO; n];
    let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    loop {
        if hi == 0 {
            eig[0] = h.data[0];
            break;
        }
        let mut l = hi;
        while l > 0 {
            let sub = h.data[l * n + l - 1].norm();
            let diag = h.data[(l - 1) * n + l - 1].norm() + h.data[l * n + l].norm();
            let reference = if diag == 0.0 { norm } else { diag };
            if sub <= f64::EPSILON * reference {
                h.data[l * n + l - 1] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            eig[hi] = h.data[hi * n + hi];
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 100 * n {
            return Err(Error::Contract("QR iteration failed to converge".into()));
        }
        let mu = if iter % 11 == 0 {
            // exceptional shift to break cycles
            h.data[hi * n + hi] + h.data[hi * n + hi - 1].norm() * c64::new(0.75, 0.43)
        } else {
            wilkinson_shift(
                h.data[(hi - 1) * n + hi - 1],
                h.data[(hi - 1) * n + hi],
                h.data[hi * n + hi - 1],
                h.data[hi * n + hi],
            )
        };
        qr_step(&mut h, l, hi, mu);
    }

    let tr = a.trace();
    let sum: c64 = eig.iter().sum();
    if (sum - tr).norm() > TOL.eig_trace * norm.max(1.0) {
        return Err(Error::Contract(format!(
            "eigenvalue sum deviates from trace by {:.3e}",
            (sum - tr).norm()
        )));
    }
    Ok(eig)
}

fn wilkinson_shift(a: c64, b: c64, c: c64, d: c64) -> c64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// One shifted QR sweep on the active Hessenberg block `lo..=hi`.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, mu: c64) {
    let n = h.rows;
    for k in lo..=hi {
        h.data[k * n + k] -= mu;
    }
    let mut rots: Vec<(c64, c64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let x = h.data[k * n + k];
        let y = h.data[(k + 1) * n + k];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 { (ONE, ZERO) } else { (x / r, y / r) };
        for col in k..=hi {
            let (u, w) = (h.data[k * n + col], h.data[(k + 1) * n + col]);
            h.data[k * n + col] = c.conj() * u + s.conj() * w;
            h.data[(k + 1) * n + col] = -s * u + c * w;
        }
        rots.push((c, s));
    }
    for (idx, &(c, s)) in rots.iter().enumerate() {
        let k = lo + idx;
        let last = (k + 2).min(hi);
        for r in lo..=last {
            let (u, w) = (h.data[r * n + k], h.data[r * n + k + 1]);
            h.data[r * n + k] = u * c + w * s;
            h.data[r * n + k + 1] = -u * s.conj() + w * c.conj();
        }
    }
    for k in lo..=hi {
        h.data[k * n + k] += mu;
    }
}

fn hessenberg_in_place(h: &mut ComplexMatrix) {
    let n = h.rows;
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<c64> = (k + 1..n).map(|i| h.data[i * n + k]).collect();
        let xnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * xnorm;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        // H <- (I - 2vv†) H on rows k+1..n
        for col in 0..n {
            let dot: c64 = v.iter().enumerate().map(|(i, vi)| vi.conj() * h.data[(k + 1 + i) * n + col]).sum();
            for (i, vi) in v.iter().enumerate() {
                h.data[(k + 1 + i) * n + col] -= 2.0 * vi * dot;
            }
        }
        // H <- H (I - 2vv†) on columns k+1..n
        for row in 0..n {
            let dot: c64 = v.iter().enumerate().map(|(i, vi)| h.data[row * n + k + 1 + i] * vi).sum();
            for (i, vi) in v.iter().enumerate() {
                h.data[row * n + k + 1 + i] -= 2.0 * dot * vi.conj();
            }
        }
        for i in k + 2..n {
            h.data[i * n + k] = ZERO;
        }
    }
}

/// LU factorization with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<c64>,
    perm: Vec<usize>,
}

impl Lu {
    fn new(a: &ComplexMatrix) -> Option<Lu> {
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Some(Lu { n, lu, perm })
    }

    fn solve(&self, b: &[c64]) -> Vec<c64> {
        let n = self.n;
        let mut x: Vec<c64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    /// `‖A⁻¹‖₁` by explicit column solves.
    fn inverse_norm_one(&self) -> f64 {
        let n = self.n;
        let mut best = 0.0f64;
        let mut e = vec![ZERO; n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = ZERO);
            e[j] = ONE;
            let col = self.solve(&e);
            best = best.max(col.iter().map(|z| z.norm()).sum());
        }
        best
    }
}

/// Condition number `‖A‖₁ ‖A⁻¹‖₁`, infinite for exactly singular input.
pub fn condition_number(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("condition number of {}x{}", a.rows, a.cols)));
    }
    Ok(match Lu::new(a) {
        Some(lu) => a.norm_one() * lu.inverse_norm_one(),
        None => f64::INFINITY,
    })
}

/// Solves `a · x = b`.
///
/// Fails with [`Error::Singular`] when the 1-norm condition estimate exceeds
/// the configured bound or the residual check fails.
pub fn solve(a: &ComplexMatrix, b: &[c64]) -> Result<Vec<c64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("solve with {}x{} matrix", a.rows, a.cols)));
    }
    if b.len() != a.rows {
        return Err(Error::Dimension(format!("solve: matrix {} rows, rhs {}", a.rows, b.len())));
    }
    let lu = Lu::new(a).ok_or(Error::Singular { condition: f64::INFINITY })?;
    let condition = a.norm_one() * lu.inverse_norm_one();
    if !condition.is_finite() || condition > TOL.max_condition {
        return Err(Error::Singular { condition });
    }
    let x = lu.solve(b);
    let ax = a.matvec(&x)?;
    let resid = ax.iter().zip(b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let bnorm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if resid > TOL.solve_residual * bnorm.max(f64::MIN_POSITIVE) {
        return Err(Error::Singular { condition });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let data = (0..n * n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        ComplexMatrix::from_vec(n, n, data).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        random_matrix(rng, n).hermitian_part().unwrap()
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        expm_hermitian(&random_hermitian(rng, n), 1.3).unwrap()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]).unwrap()
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::diag(&[c(1., 0.), c(-1., 0.)])
    }

    fn sorted(mut v: Vec<c64>) -> Vec<c64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn kron_basics() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(i2.kron(&i2).unwrap(), ComplexMatrix::identity(4));
        let xz = pauli_x().kron(&pauli_z()).unwrap();
        assert_eq!(xz[(0, 2)], c(1., 0.));
        assert_eq!(xz[(1, 3)], c(-1., 0.));
        assert_eq!(xz[(0, 0)], c(0., 0.));
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (a, b, cc, d) = (
                random_matrix(&mut rng, 2),
                random_matrix(&mut rng, 2),
                random_matrix(&mut rng, 2),
                random_matrix(&mut rng, 2),
            );
            let lhs = a.kron(&b).unwrap().matmul(&cc.kron(&d).unwrap()).unwrap();
            let rhs = a.matmul(&cc).unwrap().kron(&b.matmul(&d).unwrap()).unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn kron_overflow() {
        let big = ComplexMatrix::zeros(128, 1);
        assert!(matches!(big.kron(&big), Err(Error::Overflow(_))));
    }

    #[test]
    fn expm_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(&mut rng, 4);
        let u0 = expm_hermitian(&h, 0.0).unwrap();
        assert!(u0.sub(&ComplexMatrix::identity(4)).unwrap().max_abs() < 1e-12);

        let u = expm_hermitian(&pauli_x(), std::f64::consts::FRAC_PI_2).unwrap();
        let expect = pauli_x().scale(c(0., -1.));
        assert!(u.sub(&expect).unwrap().max_abs() < 1e-12);

        // two-site Heisenberg with S = σ/2: singlet -3/4, triplet +1/4
        let sx = pauli_x();
        let sy = ComplexMatrix::from_rows(&[vec![c(0., 0.), c(0., -1.)], vec![c(0., 1.), c(0., 0.)]]).unwrap();
        let sz = pauli_z();
        let mut hh = ComplexMatrix::zeros(4, 4);
        for s in [&sx, &sy, &sz] {
            hh.axpy(c(0.25, 0.), &s.kron(s).unwrap()).unwrap();
        }
        let (vals, _) = eigh(&hh).unwrap();
        for (v, e) in vals.iter().zip([-0.75, 0.25, 0.25, 0.25]) {
            assert!((v - e).abs() < 1e-12);
        }
        let t = 0.7;
        let u = expm_hermitian(&hh, t).unwrap();
        // H = P_triplet/4 - 3 P_singlet/4, P_singlet = (I - σ·σ)/4
        let p_s = ComplexMatrix::identity(4).sub(&hh.scale_real(4.0)).unwrap().scale_real(0.25);
        let p_t = ComplexMatrix::identity(4).sub(&p_s).unwrap();
        let mut expect = p_t.scale(c64::from_polar(1.0, -0.25 * t));
        expect.axpy(c64::from_polar(1.0, 0.75 * t), &p_s).unwrap();
        assert!(u.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(expm_hermitian(&m, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn expm_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 4, 8, 16] {
            let u = expm_hermitian(&random_hermitian(&mut rng, n), rng.random_range(-3.0..3.0)).unwrap();
            assert!(u.unitarity_error() <= TOL.unitary);
        }
    }

    #[test]
    fn eig_trivial() {
        let e = eig_general(&ComplexMatrix::identity(4)).unwrap();
        assert!(e.iter().all(|z| (z - ONE).norm() < 1e-14));
        let e = sorted(eig_general(&ComplexMatrix::diag(&[c(2., 0.), c(0., 3.)])).unwrap());
        assert!((e[0] - c(0., 3.)).norm() < 1e-14 && (e[1] - c(2., 0.)).norm() < 1e-14);
        assert!(eig_general(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    /// Greedy multiset comparison, robust to degenerate eigenvalues.
    fn multiset_close(got: &[c64], expect: &[c64], tol: f64) -> bool {
        let mut used = vec![false; expect.len()];
        got.len() == expect.len()
            && got.iter().all(|g| {
                let best = (0..expect.len())
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| (expect[a] - g).norm().total_cmp(&(expect[b] - g).norm()));
                match best {
                    Some(j) if (expect[j] - g).norm() < tol => {
                        used[j] = true;
                        true
                    }
                    _ => false,
                }
            })
    }

    #[test]
    fn eig_superoperator_of_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let h = random_hermitian(&mut rng, 2);
            let u = expm_hermitian(&h, 1.3).unwrap();
            // eigenphases of U straight from the generator's spectrum
            let (vals, _) = eigh(&h).unwrap();
            let phases: Vec<c64> = vals.iter().map(|&l| c64::from_polar(1.0, -1.3 * l)).collect();
            let expect: Vec<c64> = phases.iter().flat_map(|a| phases.iter().map(move |b| a.conj() * b)).collect();
            let got = eig_general(&u.conj().kron(&u).unwrap()).unwrap();
            assert!(multiset_close(&got, &expect, 1e-10), "{got:?} vs {expect:?}");
            assert!(got.iter().all(|g| (g.norm() - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn eig_hermitian_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = random_hermitian(&mut rng, 32);
        let e = eig_general(&h).unwrap();
        assert!(e.iter().all(|z| z.im.abs() <= 1e-9));
        let (vals, _) = eigh(&h).unwrap();
        let mut re: Vec<f64> = e.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (a, b) in re.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn eig_matches_nalgebra_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [3, 7, 16, 64] {
            let a = random_matrix(&mut rng, n);
            let na = nalgebra::DMatrix::from_fn(n, n, |i, j| a[(i, j)]);
            let oracle = sorted(na.schur().eigenvalues().expect("complex schur").iter().cloned().collect());
            let got = sorted(eig_general(&a).unwrap());
            for (g, o) in got.iter().zip(&oracle) {
                assert!((g - o).norm() < 1e-8 * (n as f64), "n={n}: {g} vs {o}");
            }
        }
    }

    #[test]
    fn eig_similarity_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let a = random_matrix(&mut rng, 16);
        let u = random_unitary(&mut rng, 16);
        let b = u.adjoint().matmul(&a).unwrap().matmul(&u).unwrap();
        let ea = sorted(eig_general(&a).unwrap());
        let eb = sorted(eig_general(&b).unwrap());
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn eig_256_superoperator() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_unitary(&mut rng, 16);
        let sup = u.conj().kron(&u).unwrap();
        let e = eig_general(&sup).unwrap();
        assert_eq!(e.len(), 256);
        assert!(e.iter().all(|z| (z.norm() - 1.0).abs() < 1e-8));
    }

    #[test]
    fn solve_small_systems() {
        let x = solve(&ComplexMatrix::identity(3), &[c(1., 2.), c(3., 0.), c(0., -1.)]).unwrap();
        assert_eq!(x, vec![c(1., 2.), c(3., 0.), c(0., -1.)]);
        let a = ComplexMatrix::diag(&[c(2., 0.), c(4., 0.)]);
        let x = solve(&a, &[c(2., 0.), c(4., 0.)]).unwrap();
        assert!((x[0] - ONE).norm() < 1e-15 && (x[1] - ONE).norm() < 1e-15);
    }

    #[test]
    fn solve_random_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut a = random_matrix(&mut rng, 64);
        for i in 0..64 {
            a[(i, i)] += c(8.0, 0.0);
        }
        let b: Vec<c64> = (0..64).map(|_| c(rng.random(), rng.random())).collect();
        let x = solve(&a, &b).unwrap();
        let ax = a.matvec(&x).unwrap();
        let r: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(r <= 1e-8 * bn);
    }

    #[test]
    fn solve_singular_reports_condition() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(solve(&a, &[ONE, ONE]), Err(Error::Singular { .. })));
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-15]).unwrap();
        match solve(&a, &[ONE, ONE]) {
            Err(Error::Singular { condition }) => assert!(condition > 1e13),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn serde_roundtrip() {
        let m = ComplexMatrix::from_rows(&[vec![c(1., 2.), c(3., 4.)]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"rows":1,"cols":2,"re":[1.0,3.0],"im":[2.0,4.0]}"#);
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ComplexMatrix>(r#"{"rows":2,"cols":2,"re":[1.0],"im":[0.0]}"#).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(ComplexMatrix::from_vec(2, 2, vec![ONE; 3]).is_err());
        assert!(ComplexMatrix::from_vec(5000, 1, vec![ONE; 5000]).is_err());
    }
}
