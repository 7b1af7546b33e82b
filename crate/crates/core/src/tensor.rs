//! Dense tensors and multilinear primitives: matricization, mode-n and
//! multilinear products, Kronecker/Khatri-Rao/outer products, and
//! tensorization by Hankel embedding or quantization.
//!
//! Modes are 0-based. The mode-`n` unfolding of an `I_0 x .. x I_{N-1}`
//! tensor is `I_n x prod_{k != n} I_k`, with the remaining modes ordered so
//! that lower modes vary fastest. With this ordering a CP model satisfies
//! `X_(n) = B_n D (B_{N-1} ⊙ .. ⊙ B_{n+1} ⊙ B_{n-1} ⊙ .. ⊙ B_0)^T` and
//! `vec(X) = (B_{N-1} ⊙ .. ⊙ B_0) λ` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result, TensorError};
use crate::index;
use crate::linalg::{self, Matrix};

/// Order-N real array in canonical (first-mode-fastest) layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() {
            return invalid("tensor order must be at least 1");
        }
        if shape.contains(&0) {
            return invalid(format!("zero extent in shape {shape:?}"));
        }
        if index::numel(&shape) != data.len() {
            return shape_err(format!(
                "shape {shape:?} needs {} values, got {}",
                index::numel(&shape),
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), vec![0.0; index::numel(shape)])
    }

    /// Fills a tensor by evaluating `f` at every 0-based multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        let mut idx = vec![0; shape.len()];
        for x in t.data.iter_mut() {
            *x = f(&idx);
            index::increment(shape, &mut idx);
        }
        Ok(t)
    }

    /// `diag_N(λ)`: an `R x .. x R` tensor with `λ` on the superdiagonal.
    pub fn diagonal(weights: &[f64], order: usize) -> Result<Self> {
        let r = weights.len();
        let mut t = Self::zeros(&vec![r; order])?;
        let stride: usize = (0..order).map(|k| r.pow(k as u32)).sum();
        for (i, &w) in weights.iter().enumerate() {
            t.data[i * stride] = w;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// `vec(X)`; a view of the underlying buffer.
    pub fn vectorize(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        Ok(self.data[index::linear_index(&self.shape, idx)])
    }

    pub fn set(&mut self, idx: &[usize], value: f64) -> Result<()> {
        self.check_index(idx)?;
        let p = index::linear_index(&self.shape, idx);
        self.data[p] = value;
        Ok(())
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order() || idx.iter().zip(&self.shape).any(|(i, e)| i >= e) {
            return Err(TensorError::IndexOutOfRange { index: idx.to_vec(), shape: self.shape.clone() });
        }
        Ok(())
    }

    fn check_mode(&self, n: usize) -> Result<()> {
        if n >= self.order() {
            return Err(TensorError::ModeOutOfRange { mode: n, order: self.order() });
        }
        Ok(())
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        if self.shape != other.shape {
            return shape_err(format!("inner product of {:?} and {:?}", self.shape, other.shape));
        }
        Ok(linalg::dot(&self.data, &other.data))
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return shape_err(format!("difference of {:?} and {:?}", self.shape, other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return shape_err(format!("sum of {:?} and {:?}", self.shape, other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    pub fn add_assign(&mut self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return shape_err(format!("sum of {:?} and {:?}", self.shape, other.shape));
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> DenseTensor {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Splits the shape around mode `n` into (left, I_n, right) element counts.
    fn split(&self, n: usize) -> (usize, usize, usize) {
        let left = self.shape[..n].iter().product();
        let right = self.shape[n + 1..].iter().product();
        (left, self.shape[n], right)
    }

    /// Mode-`n` matricization.
    pub fn unfold(&self, n: usize) -> Result<Matrix> {
        self.check_mode(n)?;
        let (left, mid, right) = self.split(n);
        let mut out = vec![0.0; self.data.len()];
        for r in 0..right {
            for i in 0..mid {
                let src = &self.data[(r * mid + i) * left..(r * mid + i + 1) * left];
                for (l, &x) in src.iter().enumerate() {
                    out[i + mid * (l + r * left)] = x;
                }
            }
        }
        Matrix::new(mid, left * right, out)
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, n: usize, shape: &[usize]) -> Result<DenseTensor> {
        if n >= shape.len() {
            return Err(TensorError::ModeOutOfRange { mode: n, order: shape.len() });
        }
        let total = index::numel(shape);
        if m.rows() != shape[n] || m.rows() * m.cols() != total {
            return shape_err(format!(
                "cannot fold {}x{} matrix into {shape:?} along mode {n}",
                m.rows(),
                m.cols()
            ));
        }
        let left: usize = shape[..n].iter().product();
        let mid = shape[n];
        let right: usize = shape[n + 1..].iter().product();
        let src = m.data();
        let mut data = vec![0.0; total];
        for r in 0..right {
            for i in 0..mid {
                let dst = &mut data[(r * mid + i) * left..(r * mid + i + 1) * left];
                for (l, x) in dst.iter_mut().enumerate() {
                    *x = src[i + mid * (l + r * left)];
                }
            }
        }
        DenseTensor::new(shape.to_vec(), data)
    }

    /// Mode-`n` product `X ×_n M`, where `M` is `J x I_n`.
    pub fn mode_n_product(&self, m: &Matrix, n: usize) -> Result<DenseTensor> {
        self.check_mode(n)?;
        if m.cols() != self.shape[n] {
            return shape_err(format!(
                "mode-{n} product: matrix has {} columns, tensor extent is {}",
                m.cols(),
                self.shape[n]
            ));
        }
        let (left, mid, right) = self.split(n);
        let j = m.rows();
        let mut shape = self.shape.clone();
        shape[n] = j;
        if j == 0 {
            return shape_err("mode product with zero-row matrix");
        }
        let mut out = vec![0.0; left * j * right];
        if left == 1 {
            // data is I_n x right column-major: result = M * data
            let x = Matrix::new(mid, right, self.data.clone())?;
            out = m.matmul(&x)?.into_data();
        } else {
            // each right-slab is a left x I_n matrix S_r; result slab = S_r M^T
            for r in 0..right {
                let slab = Matrix::new(left, mid, self.data[r * left * mid..(r + 1) * left * mid].to_vec())?;
                let res = slab.matmul_t(m)?;
                out[r * left * j..(r + 1) * left * j].copy_from_slice(res.data());
            }
        }
        DenseTensor::new(shape, out)
    }

    /// Full multilinear product `⟦X; M_0, .., M_{N-1}⟧`.
    pub fn multilinear_product(&self, factors: &[Matrix]) -> Result<DenseTensor> {
        if factors.len() != self.order() {
            return shape_err(format!(
                "multilinear product needs {} factors, got {}",
                self.order(),
                factors.len()
            ));
        }
        let mut out = self.clone();
        for (n, f) in factors.iter().enumerate() {
            out = out.mode_n_product(f, n)?;
        }
        Ok(out)
    }

    /// Multilinear product applying `M_n^T` along every mode.
    pub fn multilinear_product_t(&self, factors: &[Matrix]) -> Result<DenseTensor> {
        let t: Vec<Matrix> = factors.iter().map(Matrix::transpose).collect();
        self.multilinear_product(&t)
    }

    /// Frontal slice `k` of an order-3 tensor as an `I x J` matrix.
    pub fn frontal_slice(&self, k: usize) -> Result<Matrix> {
        if self.order() != 3 || k >= self.shape[2] {
            return invalid(format!("no frontal slice {k} in shape {:?}", self.shape));
        }
        let sz = self.shape[0] * self.shape[1];
        Matrix::new(self.shape[0], self.shape[1], self.data[k * sz..(k + 1) * sz].to_vec())
    }

    /// Slice with mode `n` fixed at index `i`, flattened in canonical order.
    pub fn mode_slice(&self, n: usize, i: usize) -> Result<Vec<f64>> {
        let m = self.unfold(n)?;
        if i >= m.rows() {
            return Err(TensorError::IndexOutOfRange { index: vec![i], shape: self.shape.clone() });
        }
        Ok(m.row(i))
    }
}

impl From<Matrix> for DenseTensor {
    fn from(m: Matrix) -> Self {
        let (r, c) = m.shape();
        DenseTensor { shape: vec![r, c], data: m.into_data() }
    }
}

impl TryFrom<DenseTensor> for Matrix {
    type Error = TensorError;
    fn try_from(t: DenseTensor) -> Result<Matrix> {
        if t.order() != 2 {
            return invalid(format!("order-{} tensor is not a matrix", t.order()));
        }
        Matrix::new(t.shape[0], t.shape[1], t.data)
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kronecker(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j1 in 0..ac {
        for j2 in 0..bc {
            let col = out.col_mut(j1 * bc + j2);
            for i1 in 0..ar {
                let x = a[(i1, j1)];
                for (i2, &y) in b.col(j2).iter().enumerate() {
                    col[i1 * br + i2] = x * y;
                }
            }
        }
    }
    out
}

/// Khatri-Rao (column-wise Kronecker) product `A ⊙ B`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return shape_err(format!("Khatri-Rao of {} and {} columns", a.cols(), b.cols()));
    }
    let (ar, br) = (a.rows(), b.rows());
    let mut out = Matrix::zeros(ar * br, a.cols());
    for r in 0..a.cols() {
        let (ac, bcol) = (a.col(r), b.col(r));
        let col = out.col_mut(r);
        for (i, &x) in ac.iter().enumerate() {
            for (j, &y) in bcol.iter().enumerate() {
                col[i * br + j] = x * y;
            }
        }
    }
    Ok(out)
}

/// `B_{last} ⊙ .. ⊙ B_0` over all factors except `skip` (pass `None` to
/// keep every factor). This is the matrix whose rows are indexed by the
/// unfolding columns of the corresponding mode.
pub fn khatri_rao_except(factors: &[Matrix], skip: Option<usize>) -> Result<Matrix> {
    let r = factors.first().map_or(0, Matrix::cols);
    let mut acc = Matrix::new(1, r, vec![1.0; r])?;
    for (n, f) in factors.iter().enumerate() {
        if Some(n) == skip {
            continue;
        }
        acc = khatri_rao(f, &acc)?;
    }
    Ok(acc)
}

/// `B_{last} ⊗ .. ⊗ B_0` over all factors except `skip`.
pub fn kronecker_except(factors: &[Matrix], skip: Option<usize>) -> Matrix {
    let mut acc = Matrix::identity(1);
    for (n, f) in factors.iter().enumerate() {
        if Some(n) == skip {
            continue;
        }
        acc = kronecker(f, &acc);
    }
    acc
}

/// Outer product `a_0 ∘ a_1 ∘ ..`: a rank-1 tensor.
pub fn outer(vectors: &[&[f64]]) -> Result<DenseTensor> {
    if vectors.is_empty() || vectors.iter().any(|v| v.is_empty()) {
        return invalid("outer product needs at least one non-empty vector");
    }
    let mut data = vec![1.0];
    for v in vectors {
        let mut next = Vec::with_capacity(data.len() * v.len());
        for &x in *v {
            next.extend(data.iter().map(|d| d * x));
        }
        data = next;
    }
    DenseTensor::new(vectors.iter().map(|v| v.len()).collect(), data)
}

/// Hankel matrix `H[i, j] = signal[i + j]` of size `I x J`.
pub fn hankelize(signal: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return invalid("Hankel extents must be positive");
    }
    if signal.len() != rows + cols - 1 {
        return shape_err(format!(
            "a {rows}x{cols} Hankel matrix needs {} samples, got {}",
            rows + cols - 1,
            signal.len()
        ));
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| signal[i + j]))
}

/// Stacks the Hankel matrices of `signals` as frontal slices: an
/// `I x J x K` tensor with `X[i, j, k] = signals[k][i + j]`.
pub fn hankel_tensorize(signals: &[Vec<f64>], rows: usize, cols: usize) -> Result<DenseTensor> {
    if signals.is_empty() {
        return invalid("no signals to tensorize");
    }
    let mut data = Vec::with_capacity(rows * cols * signals.len());
    for s in signals {
        data.extend_from_slice(hankelize(s, rows, cols)?.data());
    }
    DenseTensor::new(vec![rows, cols, signals.len()], data)
}

/// Averages the anti-diagonals of a Hankel-structured matrix back into a
/// signal of length `I + J - 1`.
pub fn dehankelize(h: &Matrix) -> Vec<f64> {
    let (r, c) = h.shape();
    let mut sum = vec![0.0; r + c - 1];
    let mut cnt = vec![0usize; r + c - 1];
    for j in 0..c {
        for i in 0..r {
            sum[i + j] += h[(i, j)];
            cnt[i + j] += 1;
        }
    }
    sum.iter().zip(cnt).map(|(s, n)| s / n as f64).collect()
}

/// Reshapes a length-`q^L` vector into an order-`L` tensor with extents `q`.
/// Mode 0 carries the least significant base-`q` digit of the index.
pub fn quantize(v: &[f64], q: usize) -> Result<DenseTensor> {
    if q < 2 {
        if q == 1 && v.len() == 1 {
            return DenseTensor::new(vec![1], v.to_vec());
        }
        return invalid(format!("quantization base must be at least 2, got {q}"));
    }
    let mut levels = 0;
    let mut n = v.len();
    while n > 1 && n % q == 0 {
        n /= q;
        levels += 1;
    }
    if n != 1 || levels == 0 {
        return invalid(format!("length {} is not a positive power of {q}", v.len()));
    }
    DenseTensor::new(vec![q; levels], v.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(shape: &[usize]) -> DenseTensor {
        let n = index::numel(shape);
        DenseTensor::new(shape.to_vec(), (1..=n).map(|x| x as f64).collect()).unwrap()
    }

    #[test]
    fn unfold_eight_element_cube() {
        let t = seq(&[2, 2, 2]);
        let u = t.unfold(0).unwrap();
        assert_eq!(u, Matrix::from_rows(&[&[1., 3., 5., 7.], &[2., 4., 6., 8.]]).unwrap());
    }

    #[test]
    fn unfold_matches_brute_force_index_map() {
        let t = seq(&[2, 3, 4]);
        for n in 0..3 {
            let u = t.unfold(n).unwrap();
            let mut idx = vec![0; 3];
            loop {
                let col = index::unfolding_column(t.shape(), n, &idx);
                assert_eq!(u[(idx[n], col)], t.get(&idx).unwrap());
                if !index::increment(t.shape(), &mut idx) {
                    break;
                }
            }
        }
    }

    #[test]
    fn order_two_unfold_is_identity() {
        let t = seq(&[3, 2]);
        assert_eq!(t.unfold(0).unwrap().data(), t.data());
    }

    #[test]
    fn rank_one_unfolding() {
        let (a, b, c) = ([1.0, 2.0], [1.0, 0.0], [1.0, 1.0]);
        let t = outer(&[&a, &b, &c]).unwrap();
        let cb = kronecker(&Matrix::column_vector(&c), &Matrix::column_vector(&b));
        let expect = Matrix::column_vector(&a).matmul_t(&cb).unwrap();
        assert_eq!(t.unfold(0).unwrap(), expect);
    }

    #[test]
    fn fold_round_trip() {
        let t = seq(&[2, 2, 2]);
        for n in 0..3 {
            assert_eq!(DenseTensor::fold(&t.unfold(n).unwrap(), n, t.shape()).unwrap(), t);
        }
        let row = Matrix::new(1, 4, vec![1., 2., 3., 4.]).unwrap();
        let f = DenseTensor::fold(&row, 0, &[1, 2, 2]).unwrap();
        assert_eq!(f.data(), &[1., 2., 3., 4.]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = DenseTensor::new(vec![3, 4, 5], Matrix::random_normal(60, 1, &mut rng).into_data()).unwrap();
        assert_eq!(DenseTensor::fold(&r.unfold(1).unwrap(), 1, &[3, 4, 5]).unwrap(), r);
    }

    #[test]
    fn fold_rejects_bad_extents() {
        let m = Matrix::zeros(3, 4);
        assert!(DenseTensor::fold(&m, 0, &[2, 6]).is_err());
        assert!(DenseTensor::fold(&m, 2, &[3, 4]).is_err());
    }

    #[test]
    fn vec_of_outer_is_reversed_kronecker() {
        let t = outer(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(t.vectorize(), &[3.0, 6.0, 4.0, 8.0]);
    }

    #[test]
    fn mode_product_identity_and_sum() {
        let t = seq(&[2, 3, 4]);
        assert_eq!(t.mode_n_product(&Matrix::identity(3), 1).unwrap(), t);
        let ones = Matrix::new(1, 3, vec![1.0; 3]).unwrap();
        let s = t.mode_n_product(&ones, 1).unwrap();
        assert_eq!(s.shape(), &[2, 1, 4]);
        for i in 0..2 {
            for k in 0..4 {
                let expect: f64 = (0..3).map(|j| t.get(&[i, j, k]).unwrap()).sum();
                assert_eq!(s.get(&[i, 0, k]).unwrap(), expect);
            }
        }
    }

    #[test]
    fn mode_product_dimension_mismatch() {
        let t = seq(&[2, 3]);
        assert!(t.mode_n_product(&Matrix::identity(2), 1).is_err());
        assert!(t.mode_n_product(&Matrix::identity(2), 2).is_err());
    }

    #[test]
    fn kronecker_entry_rule() {
        let a = Matrix::from_rows(&[&[1., 2.], &[3., 4.]]).unwrap();
        let b = Matrix::from_rows(&[&[0., 1.], &[1., 0.]]).unwrap();
        let k = kronecker(&a, &b);
        let expect = Matrix::from_rows(&[
            &[0., 1., 0., 2.],
            &[1., 0., 2., 0.],
            &[0., 3., 0., 4.],
            &[3., 0., 4., 0.],
        ])
        .unwrap();
        assert_eq!(k, expect);
        assert_eq!(kronecker(&Matrix::identity(2), &Matrix::identity(3)), Matrix::identity(6));
    }

    #[test]
    fn khatri_rao_single_column_is_kronecker() {
        let a = Matrix::column_vector(&[1., 2.]);
        let b = Matrix::column_vector(&[3., 4., 5.]);
        assert_eq!(khatri_rao(&a, &b).unwrap(), kronecker(&a, &b));
        let a2 = Matrix::from_rows(&[&[1., 1.], &[2., 2.]]).unwrap();
        let kr = khatri_rao(&a2, &a2).unwrap();
        for r in 0..2 {
            assert_eq!(kr.col(r), &[1., 2., 2., 4.]);
        }
        assert!(khatri_rao(&a, &a2).is_err());
    }

    #[test]
    fn outer_entries_and_errors() {
        let t = outer(&[&[1., 2.], &[1., 3.]]).unwrap();
        assert_eq!(Matrix::try_from(t).unwrap(), Matrix::from_rows(&[&[1., 3.], &[2., 6.]]).unwrap());
        let e = outer(&[&[1., 0.], &[1., 0.], &[1., 0.]]).unwrap();
        assert_eq!(e.data().iter().sum::<f64>(), 1.0);
        assert_eq!(e.get(&[0, 0, 0]).unwrap(), 1.0);
        assert!(outer(&[]).is_err());
    }

    #[test]
    fn hankel_of_powers_of_two() {
        let h = hankelize(&[1., 2., 4.], 2, 2).unwrap();
        assert_eq!(h, Matrix::from_rows(&[&[1., 2.], &[2., 4.]]).unwrap());
        let c = hankelize(&[3.0; 5], 3, 3).unwrap();
        assert_eq!(c.rank(1e-12), 1);
        assert!(hankelize(&[1., 2.], 2, 2).is_err());
        let sigs: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64; 60]).collect();
        let t = hankel_tensorize(&sigs, 24, 37).unwrap();
        assert_eq!(t.shape(), &[24, 37, 5]);
        assert_eq!(dehankelize(&hankelize(&[1., 2., 3., 4.], 2, 3).unwrap()), vec![1., 2., 3., 4.]);
    }

    #[test]
    fn quantize_is_reshape() {
        let v: Vec<f64> = (1..=8).map(f64::from).collect();
        assert_eq!(quantize(&v, 2).unwrap(), seq(&[2, 2, 2]));
        assert_eq!(quantize(&[1., 2., 3.], 3).unwrap().shape(), &[3]);
        assert!(quantize(&[1., 2., 3.], 2).is_err());
        assert!(quantize(&[1.; 6], 2).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(DenseTensor::zeros(&[2, 2]).unwrap().frobenius_norm(), 0.0);
        assert!((seq(&[2, 2, 2]).frobenius_norm() - 204f64.sqrt()).abs() < 1e-14);
        assert!(seq(&[2]).inner(&seq(&[2, 1])).is_err());
    }

    #[test]
    fn diagonal_tensor() {
        let d = DenseTensor::diagonal(&[3.0, 2.0], 3).unwrap();
        assert_eq!(d.get(&[0, 0, 0]).unwrap(), 3.0);
        assert_eq!(d.get(&[1, 1, 1]).unwrap(), 2.0);
        assert_eq!(d.data().iter().sum::<f64>(), 5.0);
    }
}
