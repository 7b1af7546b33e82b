//! Dense column-major matrices and the numeric kernels the decompositions
//! rely on.
//!
//! `Matrix` shares its memory layout with an order-2 [`DenseTensor`]
//! (row index fastest), so the two convert into each other by moving the
//! buffer. SVD, QR and symmetric eigen-decompositions are delegated to
//! `nalgebra` through the functions in this module; no other module touches
//! `nalgebra` directly. Its Golub-Kahan SVD and Householder QR are backward
//! stable: the computed factors are exact for a perturbation of the input of
//! relative size O(eps).
//!
//! [`DenseTensor`]: crate::tensor::DenseTensor

use nalgebra::{DMatrix, DMatrixView};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result, TensorError};

/// Real matrix stored column by column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Thin singular value decomposition `A = U diag(s) V^T`, singular values
/// in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return shape_err(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices, the way matrices are written on paper.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return shape_err("ragged rows");
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let r = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != r) {
            return shape_err("columns of unequal length");
        }
        let data = cols.iter().flatten().copied().collect();
        Ok(Self { rows: r, cols: cols.len(), data })
    }

    pub fn column_vector(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// Matrix with i.i.d. standard normal entries.
    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { rows, cols, data }
    }

    /// Random matrix with orthonormal columns (`rows >= cols`).
    pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        assert!(cols <= rows, "cannot fit {cols} orthonormal columns in R^{rows}");
        let g = Self::random_normal(rows, cols, rng);
        g.qr_thin().0
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub(crate) fn view(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.rows, self.cols)
    }

    pub(crate) fn from_na(m: DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        Self { rows, cols, data: m.data.into() }
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return shape_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        Ok(Self::from_na(self.view() * other.view()))
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return shape_err(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        Ok(Self::from_na(self.view().tr_mul(&other.view())))
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return shape_err(format!(
                "cannot multiply {}x{} by ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        Ok(Self::from_na(self.view() * other.view().transpose()))
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return shape_err(format!("matvec: {} columns vs vector of {}", self.cols, v.len()));
        }
        let mut out = vec![0.0; self.rows];
        for (j, &x) in v.iter().enumerate() {
            if x != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.col(j)) {
                    *o += a * x;
                }
            }
        }
        Ok(out)
    }

    /// `self^T v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return shape_err(format!("t_matvec: {} rows vs vector of {}", self.rows, v.len()));
        }
        Ok(self.columns().map(|c| dot(c, v)).collect())
    }

    /// `self^T self`.
    pub fn gram(&self) -> Matrix {
        Self::from_na(self.view().tr_mul(&self.view()))
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return shape_err("hadamard product of unequal shapes");
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return shape_err("sum of unequal shapes");
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return shape_err("difference of unequal shapes");
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Columns `idx` of `self`, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self { rows: self.rows, cols: idx.len(), data }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        Self::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Self { rows: self.rows, cols: k, data: self.data[..k * self.rows].to_vec() }
    }

    /// Horizontal concatenation `[a | b | ...]`.
    pub fn hcat(blocks: &[&Matrix]) -> Result<Matrix> {
        let rows = blocks.first().map_or(0, |b| b.rows);
        if blocks.iter().any(|b| b.rows != rows) {
            return shape_err("hcat: blocks differ in row count");
        }
        let mut data = Vec::new();
        let mut cols = 0;
        for b in blocks {
            data.extend_from_slice(&b.data);
            cols += b.cols;
        }
        Ok(Self { rows, cols, data })
    }

    /// Vertical concatenation.
    pub fn vcat(blocks: &[&Matrix]) -> Result<Matrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return shape_err("vcat: blocks differ in column count");
        }
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut out = Self::zeros(rows, cols);
        let mut off = 0;
        for b in blocks {
            for j in 0..cols {
                out.col_mut(j)[off..off + b.rows].copy_from_slice(b.col(j));
            }
            off += b.rows;
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Thin SVD. Singular vectors follow the sign convention of
    /// [`fix_column_signs`] applied to `u` (compensated in `v`).
    pub fn svd(&self) -> Svd {
        let k = self.rows.min(self.cols);
        if k == 0 {
            return Svd { u: Matrix::zeros(self.rows, 0), s: vec![], v: Matrix::zeros(self.cols, 0) };
        }
        let svd = faer::MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
            .thin_svd()
            .expect("SVD of a finite matrix converges");
        let (fu, fv) = (svd.U(), svd.V());
        let mut u = Matrix::from_fn(self.rows, k, |i, j| fu[(i, j)]);
        let mut v = Matrix::from_fn(self.cols, k, |i, j| fv[(i, j)]);
        let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        for j in 0..k {
            if leading_sign(u.col(j)) < 0.0 {
                u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
                v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            }
        }
        Svd { u, s, v }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        if self.rows.min(self.cols) == 0 {
            return vec![];
        }
        faer::MatRef::from_column_major_slice(&self.data, self.rows, self.cols)
            .singular_values()
            .expect("SVD of a finite matrix converges")
    }

    /// Leading `k` left singular vectors. When `k` exceeds the number of
    /// singular vectors the thin SVD provides, the basis is completed with
    /// an orthonormal complement (associated singular value 0).
    pub fn left_singular_vectors(&self, k: usize) -> Result<(Matrix, Vec<f64>)> {
        if k > self.rows {
            return invalid(format!("requested {k} left singular vectors of a {}-row matrix", self.rows));
        }
        let svd = self.svd();
        let mut s = svd.s;
        let u = if k <= svd.u.cols {
            svd.u.leading_columns(k)
        } else {
            s.resize(k, 0.0);
            complete_orthonormal(&svd.u, k)
        };
        s.truncate(k);
        Ok((u, s))
    }

    /// Thin QR via Householder reflections: `self = Q R` with `Q` having
    /// `min(rows, cols)` orthonormal columns.
    pub fn qr_thin(&self) -> (Matrix, Matrix) {
        let qr = nalgebra::linalg::QR::new(self.to_na());
        (Self::from_na(qr.q()), Self::from_na(qr.r()))
    }

    /// Numerical rank with tolerance relative to the largest singular value.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let s = self.singular_values();
        match s.first() {
            Some(&s0) if s0 > 0.0 => s.iter().filter(|&&x| x > rel_tol * s0).count(),
            _ => 0,
        }
    }

    /// Moore-Penrose pseudo-inverse; singular values below
    /// `max(rows, cols) * eps * s_max` are treated as zero.
    pub fn pinv(&self) -> Matrix {
        let svd = self.svd();
        let tol = self.rows.max(self.cols) as f64 * f64::EPSILON * svd.s.first().copied().unwrap_or(0.0);
        let mut vs = svd.v.clone();
        for (j, &sj) in svd.s.iter().enumerate() {
            let inv = if sj > tol { 1.0 / sj } else { 0.0 };
            vs.col_mut(j).iter_mut().for_each(|x| *x *= inv);
        }
        vs.matmul_t(&svd.u).expect("conforming by construction")
    }

    /// 2-norm condition number `s_max / s_min` (infinite when singular).
    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        match (s.first(), s.last()) {
            (Some(&a), Some(&b)) if b > 0.0 => a / b,
            _ => f64::INFINITY,
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

/// Least-squares solution of `a x = b` for every column of `b`.
///
/// Uses Householder QR when `a` is tall with well-conditioned `R`, and the
/// minimum-norm pseudo-inverse solution otherwise.
pub fn lstsq(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return shape_err(format!("lstsq: {} equations vs rhs with {} rows", a.rows, b.rows));
    }
    if a.cols == 0 {
        return Ok(Matrix::zeros(0, b.cols));
    }
    if a.rows >= a.cols {
        let qr = nalgebra::linalg::QR::new(a.to_na());
        let r = qr.r();
        let diag_max = (0..a.cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let diag_min = (0..a.cols).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if diag_max > 0.0 && diag_min > 1e-12 * diag_max {
            let qtb = qr.q().tr_mul(&b.view());
            if let Some(x) = r.solve_upper_triangular(&qtb) {
                let x = Matrix::from_na(x);
                if x.is_finite() {
                    return Ok(x);
                }
            }
        }
    }
    a.pinv().matmul(b)
}

/// Solves the symmetric positive (semi)definite system `g x = rhs` via a
/// Cholesky factorization, falling back to the pseudo-inverse when `g` is
/// numerically singular.
pub fn solve_spd(g: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if g.rows != g.cols || g.rows != rhs.rows {
        return shape_err("solve_spd: nonconforming system");
    }
    if let Some(ch) = nalgebra::linalg::Cholesky::new(g.to_na()) {
        let x = Matrix::from_na(ch.solve(&rhs.to_na()));
        if x.is_finite() {
            return Ok(x);
        }
    }
    g.pinv().matmul(rhs)
}

/// Eigenvalues of a symmetric matrix, descending.
pub fn symmetric_eigenvalues(g: &Matrix) -> Vec<f64> {
    let e = nalgebra::linalg::SymmetricEigen::new(g.to_na());
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Extends the orthonormal columns of `q` to `k` orthonormal columns.
pub fn complete_orthonormal(q: &Matrix, k: usize) -> Matrix {
    let n = q.rows;
    assert!(k <= n && q.cols <= k);
    if q.cols == k {
        return q.clone();
    }
    let aug = Matrix::hcat(&[q, &Matrix::identity(n)]).expect("same row count");
    let (full_q, _) = aug.qr_thin();
    let mut out = q.clone();
    // columns of the QR of [q | I] past q.cols span the complement
    let extra = full_q.select_columns(&(q.cols..k).collect::<Vec<_>>());
    out = Matrix::hcat(&[&out, &extra]).expect("same row count");
    out
}

/// Sign of the largest-magnitude entry (first one on ties); `1.0` for zero vectors.
pub fn leading_sign(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &x in v {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Flips columns so that each column's largest-magnitude entry is positive.
/// Returns the applied signs.
pub fn fix_column_signs(m: &mut Matrix) -> Vec<f64> {
    (0..m.cols)
        .map(|j| {
            let s = leading_sign(m.col(j));
            if s < 0.0 {
                m.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            }
            s
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large entries
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return if scale.is_finite() { 0.0 } else { f64::INFINITY };
    }
    scale * a.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// Pearson correlation of two equal-length vectors.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// `|a.b| / (|a| |b|)`, the cosine of the angle between two lines.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        (dot(a, b) / d).abs().min(1.0)
    }
}

/// Principal angles (radians, ascending) between the column spaces of two
/// matrices with orthonormal columns.
pub fn principal_angles(q1: &Matrix, q2: &Matrix) -> Result<Vec<f64>> {
    let c = q1.t_matmul(q2)?;
    let mut s = c.singular_values();
    s.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
    // acos loses accuracy near 0; recover small angles from the sine
    let proj = q2.sub(&q1.matmul(&q1.t_matmul(q2)?)?)?;
    let mut sines = proj.singular_values();
    sines.reverse();
    Ok(s.iter()
        .enumerate()
        .map(|(i, &cos)| {
            if cos > 0.9 {
                sines.get(i).copied().unwrap_or(0.0).clamp(0.0, 1.0).asin()
            } else {
                cos.acos()
            }
        })
        .collect())
}

/// Orthonormal basis of the column space (thin QR followed by rank check).
pub fn orthonormal_basis(m: &Matrix) -> Matrix {
    let svd = m.svd();
    let s0 = svd.s.first().copied().unwrap_or(0.0);
    let r = svd.s.iter().filter(|&&x| x > 1e-12 * s0 && s0 > 0.0).count();
    svd.u.leading_columns(r)
}

pub(crate) fn check_finite(data: &[f64]) -> Result<()> {
    if data.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(TensorError::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(r, c) in &[(5, 3), (3, 5), (4, 4)] {
            let a = Matrix::random_normal(r, c, &mut rng);
            let svd = a.svd();
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let mut us = svd.u.clone();
            for (j, &s) in svd.s.iter().enumerate() {
                us.col_mut(j).iter_mut().for_each(|x| *x *= s);
            }
            let back = us.matmul_t(&svd.v).unwrap();
            assert!(back.max_abs_diff(&a) < 1e-12);
            for j in 0..svd.u.cols() {
                assert!(leading_sign(svd.u.col(j)) > 0.0);
            }
        }
    }

    #[test]
    fn completed_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = Matrix::random_orthonormal(6, 2, &mut rng);
        let full = complete_orthonormal(&q, 5);
        assert!(full.gram().max_abs_diff(&Matrix::identity(5)) < 1e-12);
        assert_eq!(full.leading_columns(2), q);
    }

    #[test]
    fn lstsq_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::random_normal(8, 3, &mut rng);
        let b = Matrix::random_normal(8, 2, &mut rng);
        let x = lstsq(&a, &b).unwrap();
        let x2 = solve_spd(&a.gram(), &a.t_matmul(&b).unwrap()).unwrap();
        assert!(x.max_abs_diff(&x2) < 1e-10);
    }

    #[test]
    fn pinv_of_rank_deficient_matrix() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]]).unwrap();
        let p = a.pinv();
        let apa = a.matmul(&p).unwrap().matmul(&a).unwrap();
        assert!(apa.max_abs_diff(&a) < 1e-12);
        assert_eq!(a.rank(1e-10), 1);
    }

    #[test]
    fn principal_angles_small_and_right() {
        let e = Matrix::identity(3);
        let a = e.select_columns(&[0]);
        let b = Matrix::column_vector(&[1.0, 1e-9, 0.0]);
        let b = orthonormal_basis(&b);
        let ang = principal_angles(&a, &b).unwrap();
        assert!((ang[0] - 1e-9).abs() < 1e-15);
        let c = e.select_columns(&[1]);
        let ang = principal_angles(&a, &c).unwrap();
        assert!((ang[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
