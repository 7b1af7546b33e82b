//! Tensor Train decomposition: TT-SVD, element evaluation by carriage
//! contraction, and storage accounting for the common tensor formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result, TensorError};
use crate::linalg::Matrix;
use crate::par;
use crate::tensor::DenseTensor;

/// Largest tensor [`tt_reconstruct`] will materialize.
pub const MAX_DENSE_ELEMENTS: usize = 100_000_000;

/// Chain of order-3 carriages `G_n` of shape `R_{n-1} x I_n x R_n` with
/// `R_0 = R_N = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTModel {
    carriages: Vec<DenseTensor>,
}

impl TTModel {
    pub fn new(carriages: Vec<DenseTensor>) -> Result<Self> {
        if carriages.is_empty() {
            return invalid("a TT model needs at least one carriage");
        }
        for (n, g) in carriages.iter().enumerate() {
            if g.order() != 3 {
                return shape_err(format!("carriage {n} has order {}, expected 3", g.order()));
            }
        }
        if carriages[0].shape()[0] != 1 || carriages[carriages.len() - 1].shape()[2] != 1 {
            return shape_err("boundary TT-ranks must be 1");
        }
        for (n, w) in carriages.windows(2).enumerate() {
            if w[0].shape()[2] != w[1].shape()[0] {
                return shape_err(format!(
                    "rank mismatch between carriages {n} and {}: {} vs {}",
                    n + 1,
                    w[0].shape()[2],
                    w[1].shape()[0]
                ));
            }
        }
        Ok(Self { carriages })
    }

    pub fn carriages(&self) -> &[DenseTensor] {
        &self.carriages
    }

    pub fn order(&self) -> usize {
        self.carriages.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.carriages.iter().map(|g| g.shape()[1]).collect()
    }

    /// Interior ranks `(R_1, ..., R_{N-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.carriages[..self.order() - 1].iter().map(|g| g.shape()[2]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.carriages.iter().map(DenseTensor::len).sum()
    }

    /// Carriage `n` viewed as an `(R_{n-1} I_n) x R_n` matrix.
    pub fn left_unfolding(&self, n: usize) -> Matrix {
        let s = self.carriages[n].shape();
        Matrix::new(s[0] * s[1], s[2], self.carriages[n].data().to_vec()).expect("sizes agree")
    }

    /// Largest deviation of `U^T U` from the identity over all left-unfolded
    /// carriages except the last.
    pub fn left_orthogonality_error(&self) -> f64 {
        (0..self.order() - 1)
            .map(|n| {
                let u = self.left_unfolding(n);
                u.gram().max_abs_diff(&Matrix::identity(u.cols()))
            })
            .fold(0.0, f64::max)
    }

    /// Equivalent model whose carriages, except the last, have orthonormal
    /// left unfoldings.
    pub fn left_orthogonalize(&self) -> TTModel {
        let mut carriages = self.carriages.clone();
        for n in 0..carriages.len() - 1 {
            let s = carriages[n].shape().to_vec();
            let u = Matrix::new(s[0] * s[1], s[2], carriages[n].data().to_vec()).expect("sizes agree");
            let (q, r) = u.qr_thin();
            let k = q.cols();
            carriages[n] = DenseTensor::new(vec![s[0], s[1], k], q.into_data()).expect("sizes agree");
            let next = &carriages[n + 1];
            let ns = next.shape().to_vec();
            let right = Matrix::new(ns[0], ns[1] * ns[2], next.data().to_vec()).expect("sizes agree");
            let merged = r.matmul(&right).expect("inner sizes agree");
            carriages[n + 1] = DenseTensor::new(vec![k, ns[1], ns[2]], merged.into_data()).expect("sizes agree");
        }
        TTModel { carriages }
    }
}

/// TT-SVD: left-to-right sequence of truncated SVDs. Each step discards the
/// largest tail of singular values whose norm stays within
/// `tol * ||t|| / sqrt(N - 1)`, so `||t - model|| <= tol * ||t||`.
pub fn tt_svd(t: &DenseTensor, tol: f64) -> Result<TTModel> {
    if !(tol > 0.0 && tol < 1.0) {
        return invalid(format!("TT-SVD tolerance must lie in (0, 1), got {tol}"));
    }
    crate::linalg::check_finite(t.data())?;
    let shape = t.shape().to_vec();
    let n_modes = shape.len();
    if n_modes == 1 {
        return TTModel::new(vec![DenseTensor::new(vec![1, shape[0], 1], t.data().to_vec())?]);
    }
    let delta = tol * t.frobenius_norm() / ((n_modes - 1) as f64).sqrt();
    let mut carriages = Vec::with_capacity(n_modes);
    let mut rank = 1;
    let mut rest = t.data().to_vec();
    for (n, &extent) in shape[..n_modes - 1].iter().enumerate() {
        let rows = rank * extent;
        let cols = rest.len() / rows;
        let svd = Matrix::new(rows, cols, rest)?.svd();
        let keep = truncation_rank(&svd.s, delta);
        log::trace!("tt_svd step {n}: {} singular values, keeping {keep}", svd.s.len());
        let u = svd.u.leading_columns(keep);
        carriages.push(DenseTensor::new(vec![rank, extent, keep], u.into_data())?);
        // remainder diag(s) V^T, keep x cols
        let mut sv = Matrix::zeros(keep, cols);
        for j in 0..cols {
            for r in 0..keep {
                sv[(r, j)] = svd.s[r] * svd.v[(j, r)];
            }
        }
        rest = sv.into_data();
        rank = keep;
    }
    carriages.push(DenseTensor::new(vec![rank, shape[n_modes - 1], 1], rest)?);
    TTModel::new(carriages)
}

/// Smallest `r >= 1` with `sqrt(sum_{k >= r} s_k^2) <= delta`.
fn truncation_rank(s: &[f64], delta: f64) -> usize {
    let mut tail = 0.0;
    let mut r = s.len();
    while r > 1 {
        let next = tail + s[r - 1] * s[r - 1];
        if next.sqrt() > delta {
            break;
        }
        tail = next;
        r -= 1;
    }
    r.max(1)
}

/// One entry of the represented tensor, by contracting the selected slices
/// of each carriage. Cost is `O(sum R_{n-1} R_n)`.
pub fn tt_element(m: &TTModel, idx: &[usize]) -> Result<f64> {
    let shape = m.shape();
    if idx.len() != shape.len() || idx.iter().zip(&shape).any(|(i, s)| i >= s) {
        return Err(TensorError::IndexOutOfRange { index: idx.to_vec(), shape });
    }
    let mut v = vec![1.0];
    for (g, &i) in m.carriages.iter().zip(idx) {
        let s = g.shape();
        let (r0, ext, r1) = (s[0], s[1], s[2]);
        let d = g.data();
        v = (0..r1)
            .map(|b| v.iter().enumerate().map(|(a, x)| x * d[a + r0 * (i + ext * b)]).sum())
            .collect();
    }
    Ok(v[0])
}

/// [`tt_element`] over many indices, evaluated in parallel.
pub fn tt_elements(m: &TTModel, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
    par::map_slice(indices, |idx| tt_element(m, idx)).into_iter().collect()
}

/// Dense tensor represented by the chain; refuses results larger than
/// [`MAX_DENSE_ELEMENTS`].
pub fn tt_reconstruct(m: &TTModel) -> Result<DenseTensor> {
    let shape = m.shape();
    let total = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    match total {
        Some(n) if n <= MAX_DENSE_ELEMENTS => {}
        _ => return invalid(format!("refusing to materialize a tensor of shape {shape:?}")),
    }
    // running product stored as (prod I_1..I_n) x R_n, column-major
    let mut acc = Matrix::new(1, 1, vec![1.0])?;
    for g in &m.carriages {
        let s = g.shape();
        let right = Matrix::new(s[0], s[1] * s[2], g.data().to_vec())?;
        let p = acc.matmul(&right)?;
        acc = Matrix::new(p.rows() * s[1], s[2], p.into_data())?;
    }
    DenseTensor::new(shape, acc.into_data())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Cpd,
    Tucker,
    Tt,
    Qtt,
}

impl FromStr for StorageKind {
    type Err = TensorError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpd" | "cp" => Ok(Self::Cpd),
            "tucker" => Ok(Self::Tucker),
            "tt" => Ok(Self::Tt),
            "qtt" => Ok(Self::Qtt),
            other => Err(TensorError::InvalidArgument(format!("unknown storage kind {other:?}"))),
        }
    }
}

impl fmt::Display for StorageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Cpd => "cpd",
            Self::Tucker => "tucker",
            Self::Tt => "tt",
            Self::Qtt => "qtt",
        })
    }
}

/// Parameter count of an order-`n` tensor with all extents `i` stored in the
/// given format with all ranks `r`. For QTT each mode is quantized with base
/// `q` (so `i` must be a power of `q`) and the resulting `n log_q(i)`
/// carriages are counted like a TT.
pub fn storage_cost(kind: StorageKind, n: usize, i: usize, r: usize, q: usize) -> Result<usize> {
    if n == 0 || i == 0 {
        return invalid("order and extent must be positive");
    }
    if r == 0 {
        return Ok(0);
    }
    let tt = |order: usize, ext: usize| -> usize {
        match order {
            1 => ext,
            _ => 2 * ext * r + (order - 2) * ext * r * r,
        }
    };
    Ok(match kind {
        StorageKind::Cpd => n * i * r,
        StorageKind::Tucker => n * i * r + r.pow(n as u32),
        StorageKind::Tt => tt(n, i),
        StorageKind::Qtt => {
            if q < 2 {
                return invalid("quantization base must be at least 2");
            }
            let mut levels = 0;
            let mut rem = i;
            while rem > 1 && rem % q == 0 {
                rem /= q;
                levels += 1;
            }
            if rem != 1 || levels == 0 {
                return invalid(format!("extent {i} is not a positive power of {q}"));
            }
            tt(n * levels, q)
        }
    })
}

/// Generator `z` and scale `a` of a quantized exponential `x(k) = a z^k`
/// (base 2) read back from a rank-1 TT model. The first carriage holds
/// `z = g_0(1) / g_0(0)`; `a` is taken from whichever end of the signal has
/// the larger magnitude, where the carriage products are most accurate.
pub fn qtt_exponential_parameters(m: &TTModel) -> Result<(f64, f64)> {
    if m.ranks().iter().any(|&r| r != 1) || m.shape().iter().any(|&s| s != 2) {
        return invalid("expected a rank-1 TT model with extents 2");
    }
    let g0 = m.carriages[0].data();
    if g0[0] == 0.0 {
        return invalid("zero leading sample");
    }
    let z = g0[1] / g0[0];
    let a = if z.abs() > 1.0 {
        let last: f64 = m.carriages.iter().map(|g| g.data()[1]).product();
        let k = (1u64 << m.order()) - 1;
        last / z.powf(k as f64)
    } else {
        m.carriages.iter().map(|g| g.data()[0]).product()
    };
    Ok((a, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{outer, quantize};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_tensor(shape: &[usize], seed: u64) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(shape, |_| StandardNormal.sample(&mut rng)).unwrap()
    }

    #[test]
    fn rank_one_tensor_has_unit_ranks() {
        let t = outer(&[&[1.0, 2.0, -1.0], &[0.5, 3.0], &[2.0, 1.0, 1.0, 4.0]]).unwrap();
        let m = tt_svd(&t, 1e-10).unwrap();
        assert_eq!(m.ranks(), vec![1, 1]);
        assert!(tt_reconstruct(&m).unwrap().max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn quantized_exponential() {
        let v: Vec<f64> = (0..64).map(|k| 3.0 * 2f64.powi(k)).collect();
        let t = quantize(&v, 2).unwrap();
        // the entries span 2^63, so the rank-2 remainders sit near 1e-11
        let m = tt_svd(&t, 1e-10).unwrap();
        assert_eq!(m.ranks(), vec![1; 5]);
        let rec = tt_reconstruct(&m).unwrap();
        let rel = rec.sub(&t).unwrap().frobenius_norm() / t.frobenius_norm();
        assert!(rel <= 1e-12, "{rel}");
        let (a, z) = qtt_exponential_parameters(&m).unwrap();
        assert!((a - 3.0).abs() < 1e-10 && (z - 2.0).abs() < 1e-12, "a={a} z={z}");
    }

    #[test]
    fn lossless_regime_on_random_tensor() {
        let t = random_tensor(&[4, 4, 4, 4], 1);
        let m = tt_svd(&t, 1e-15).unwrap();
        let r = m.ranks();
        assert!(r[0] <= 4 && r[1] <= 16 && r[2] <= 4, "{r:?}");
        assert!(tt_reconstruct(&m).unwrap().max_abs_diff(&t) < 1e-12);
        assert!(m.left_orthogonality_error() < 1e-10);
    }

    #[test]
    fn elements_agree_with_dense() {
        let t = random_tensor(&[3, 5, 4, 2], 2);
        let m = tt_svd(&t, 1e-2).unwrap();
        let dense = tt_reconstruct(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx: Vec<Vec<usize>> = (0..100)
            .map(|_| t.shape().iter().map(|&s| rand::Rng::random_range(&mut rng, 0..s)).collect())
            .collect();
        for (i, v) in idx.iter().zip(tt_elements(&m, &idx).unwrap()) {
            assert!((dense.get(i).unwrap() - v).abs() < 1e-12);
        }
        assert!(tt_element(&m, &[3, 0, 0, 0]).is_err());
    }

    #[test]
    fn order_two_model_is_matrix_factorization() {
        let a = DenseTensor::new(vec![1, 3, 2], vec![1.0, 2.0, 3.0, 0.0, 1.0, -1.0]).unwrap();
        let b = DenseTensor::new(vec![2, 2, 1], vec![4.0, 5.0, 6.0, 7.0]).unwrap();
        let m = TTModel::new(vec![a, b]).unwrap();
        // row i of A = (a[i], a[3+i]), column j of B = (b[2j], b[2j+1])
        assert_eq!(tt_element(&m, &[2, 1]).unwrap(), 3.0 * 6.0 + -1.0 * 7.0);
    }

    #[test]
    fn left_orthogonalize_preserves_tensor() {
        let g0 = random_tensor(&[1, 3, 2], 4);
        let g1 = random_tensor(&[2, 4, 3], 5);
        let g2 = random_tensor(&[3, 2, 1], 6);
        let m = TTModel::new(vec![g0, g1, g2]).unwrap();
        let o = m.left_orthogonalize();
        assert!(o.left_orthogonality_error() < 1e-10);
        assert!(tt_reconstruct(&o).unwrap().max_abs_diff(&tt_reconstruct(&m).unwrap()) < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_ranks() {
        let g0 = DenseTensor::zeros(&[1, 2, 2]).unwrap();
        let g1 = DenseTensor::zeros(&[3, 2, 1]).unwrap();
        assert!(TTModel::new(vec![g0, g1]).is_err());
        assert!(tt_svd(&random_tensor(&[2, 2], 0), 1.0).is_err());
    }

    #[test]
    fn storage_costs() {
        assert_eq!(storage_cost(StorageKind::Cpd, 3, 10, 2, 2).unwrap(), 60);
        assert_eq!(storage_cost(StorageKind::Tucker, 3, 10, 2, 2).unwrap(), 68);
        assert_eq!(storage_cost(StorageKind::Tt, 3, 10, 2, 2).unwrap(), 80);
        assert_eq!(storage_cost(StorageKind::Qtt, 1, 1 << 14, 1, 2).unwrap(), 28);
        for kind in [StorageKind::Cpd, StorageKind::Tucker, StorageKind::Tt, StorageKind::Qtt] {
            assert_eq!(storage_cost(kind, 3, 8, 0, 2).unwrap(), 0);
        }
        assert!(storage_cost(StorageKind::Qtt, 1, 10, 1, 2).is_err());
        assert!("hss".parse::<StorageKind>().is_err());
    }

    #[test]
    fn tt_cost_matches_measured_parameters() {
        let t = random_tensor(&[3, 3, 3, 3], 7);
        let m = tt_svd(&t, 1e-15).unwrap();
        // ranks (3, 9, 3): boundary 9 + 9 + interior 81 + 81
        assert_eq!(m.parameter_count(), 3 * 3 + 3 * 3 * 9 + 9 * 3 * 3 + 3 * 3);
    }
}
