//! Latent-variable regression: matrix PLS (NIPALS) and higher-order PLS
//! with block-term models on both predictor and response tensors.
//!
//! The first mode of every tensor indexes samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::tensor::DenseTensor;
use crate::tucker::truncated_mlsvd;

const NIPALS_MAX_ITERS: usize = 500;
const NIPALS_TOL: f64 = 1e-14;

/// Column means of `x` and the centered copy.
fn center_columns(x: &Matrix) -> (Vec<f64>, Matrix) {
    let means: Vec<f64> = x.columns().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let mut c = x.clone();
    for (j, m) in means.iter().enumerate() {
        c.col_mut(j).iter_mut().for_each(|v| *v -= m);
    }
    (means, c)
}

fn outer_update(x: &mut Matrix, t: &[f64], p: &[f64], sign: f64) {
    for (j, &pj) in p.iter().enumerate() {
        x.col_mut(j).iter_mut().zip(t).for_each(|(v, &ti)| *v += sign * ti * pj);
    }
}

/// PLS regression model `X = T P^T + E`, `Y = U Q^T + F` with unit-norm
/// score columns in `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLSModel {
    pub t: Matrix,
    pub u: Matrix,
    pub p: Matrix,
    pub q: Matrix,
    /// X-weights `w_r`, with `t_r ∝ E_r w_r`.
    pub w: Matrix,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

impl PLSModel {
    pub fn components(&self) -> usize {
        self.t.cols()
    }

    /// Coefficients `B` with `Y_hat = (X - mean) B + mean`.
    pub fn coefficients(&self) -> Result<Matrix> {
        if self.components() == 0 {
            return Ok(Matrix::zeros(self.x_mean.len(), self.y_mean.len()));
        }
        let ptw = self.p.t_matmul(&self.w)?;
        self.w.matmul(&ptw.pinv())?.matmul_t(&self.q)
    }
}

/// NIPALS PLS with X-only deflation and column centering. Stops early (with
/// a warning) once the X residual is exhausted.
pub fn pls_fit(x: &Matrix, y: &Matrix, r: usize) -> Result<PLSModel> {
    if x.rows() != y.rows() {
        return shape_err(format!("X has {} rows, Y has {}", x.rows(), y.rows()));
    }
    crate::linalg::check_finite(x.data())?;
    crate::linalg::check_finite(y.data())?;
    let (x_mean, mut e) = center_columns(x);
    let (y_mean, f) = center_columns(y);
    let x_norm = e.frobenius_norm();
    let (mut ts, mut us, mut ps, mut qs, mut ws) = (vec![], vec![], vec![], vec![], vec![]);
    for comp in 0..r {
        if e.frobenius_norm() <= 1e-12 * x_norm.max(f64::MIN_POSITIVE) {
            log::warn!("PLS: X residual exhausted after {comp} of {r} components");
            break;
        }
        let start = (0..f.cols()).max_by(|&a, &b| norm(f.col(a)).total_cmp(&norm(f.col(b))));
        let mut u = start.map(|j| f.col(j).to_vec()).unwrap_or_else(|| vec![0.0; f.rows()]);
        let mut w = e.t_matvec(&u)?;
        if norm(&w) == 0.0 {
            // no covariance left with Y: take the dominant X direction
            w = e.svd().v.col(0).to_vec();
        }
        let mut t_prev: Vec<f64> = vec![];
        let mut t = vec![];
        for _ in 0..NIPALS_MAX_ITERS {
            let nw = norm(&w);
            w.iter_mut().for_each(|v| *v /= nw);
            t = e.matvec(&w)?;
            let tt = dot(&t, &t);
            let q = f.t_matvec(&t)?.into_iter().map(|v| v / tt).collect::<Vec<_>>();
            let qq = dot(&q, &q);
            if qq == 0.0 {
                break;
            }
            u = f.matvec(&q)?.into_iter().map(|v| v / qq).collect();
            if !t_prev.is_empty() {
                let diff: f64 = t.iter().zip(&t_prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if diff <= NIPALS_TOL * norm(&t) {
                    break;
                }
            }
            t_prev = t.clone();
            w = e.t_matvec(&u)?;
            if norm(&w) == 0.0 {
                break;
            }
        }
        let tn = norm(&t);
        if tn <= 1e-12 * x_norm {
            log::warn!("PLS: X rank exhausted after {comp} of {r} components");
            break;
        }
        let t_unit: Vec<f64> = t.iter().map(|v| v / tn).collect();
        let p = e.t_matvec(&t_unit)?;
        let q = f.t_matvec(&t_unit)?;
        outer_update(&mut e, &t_unit, &p, -1.0);
        // w rescaled so that t_unit = E w
        ws.push(w.iter().map(|v| v / tn).collect::<Vec<_>>());
        let qq = dot(&q, &q);
        us.push(if qq > 0.0 { f.matvec(&q)?.into_iter().map(|v| v / qq).collect() } else { vec![0.0; f.rows()] });
        ts.push(t_unit);
        ps.push(p);
        qs.push(q);
    }
    let mat = |cols: Vec<Vec<f64>>, rows: usize| -> Result<Matrix> {
        if cols.is_empty() {
            Ok(Matrix::zeros(rows, 0))
        } else {
            Matrix::from_columns(&cols)
        }
    };
    Ok(PLSModel {
        t: mat(ts, x.rows())?,
        u: mat(us, x.rows())?,
        p: mat(ps, x.cols())?,
        q: mat(qs, y.cols())?,
        w: mat(ws, x.cols())?,
        x_mean,
        y_mean,
    })
}

/// `Y_hat = (X_new - x_mean) B + y_mean`.
pub fn pls_predict(m: &PLSModel, x_new: &Matrix) -> Result<Matrix> {
    if x_new.cols() != m.x_mean.len() {
        return shape_err(format!("model expects {} columns, got {}", m.x_mean.len(), x_new.cols()));
    }
    let mut xc = x_new.clone();
    for (j, mu) in m.x_mean.iter().enumerate() {
        xc.col_mut(j).iter_mut().for_each(|v| *v -= mu);
    }
    let mut y = xc.matmul(&m.coefficients()?)?;
    for (j, mu) in m.y_mean.iter().enumerate() {
        y.col_mut(j).iter_mut().for_each(|v| *v += mu);
    }
    Ok(y)
}

/// One latent block of a [`HOPLSModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoplsBlock {
    /// Unit-norm X score.
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    /// Orthonormal loadings for X modes 1.. and Y modes 1..
    pub p: Vec<Matrix>,
    pub q: Vec<Matrix>,
    /// Cores of shape `1 x L x .. x L`.
    pub g_x: DenseTensor,
    pub g_y: DenseTensor,
    /// Weights with `t = E_(1) w` on the current X residual.
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HOPLSModel {
    pub blocks: Vec<HoplsBlock>,
    /// Sample means (shape `1 x I_2 x ..`), zero when centering is off.
    pub x_mean: DenseTensor,
    pub y_mean: DenseTensor,
    /// X residual norm after each block.
    pub residual_norms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoplsOptions {
    pub center: bool,
}

impl Default for HoplsOptions {
    fn default() -> Self {
        Self { center: true }
    }
}

fn sample_shape(t: &DenseTensor) -> Vec<usize> {
    let mut s = t.shape().to_vec();
    s[0] = 1;
    s
}

/// Mean over the sample mode, as a `1 x ..` tensor.
fn sample_mean(t: &DenseTensor) -> DenseTensor {
    let n = t.shape()[0];
    let rest = t.len() / n;
    let data = (0..rest).map(|k| t.data()[k * n..(k + 1) * n].iter().sum::<f64>() / n as f64).collect();
    DenseTensor::new(sample_shape(t), data).expect("sizes agree")
}

/// Adds `sign * mean` to every sample.
fn shift_samples(t: &mut DenseTensor, mean: &DenseTensor, sign: f64) {
    let n = t.shape()[0];
    for (k, m) in mean.data().iter().enumerate() {
        t.data_mut()[k * n..(k + 1) * n].iter_mut().for_each(|v| *v += sign * m);
    }
}

/// `G ×_1 t ×_2 F_1 .. ` with `t` a column.
fn block_term(g: &DenseTensor, t: &[f64], loadings: &[Matrix]) -> Result<DenseTensor> {
    let mut factors = vec![Matrix::column_vector(t)];
    factors.extend(loadings.iter().cloned());
    g.multilinear_product(&factors)
}

/// `E ×_2 F_1^T ×_3 F_2^T ..` leaving the sample mode.
fn project_rest(e: &DenseTensor, loadings: &[Matrix]) -> Result<DenseTensor> {
    let mut out = e.clone();
    for (n, f) in loadings.iter().enumerate() {
        out = out.mode_n_product(&f.transpose(), n + 1)?;
    }
    Ok(out)
}

/// `E_(1) w`.
fn scores_from(e: &DenseTensor, weights: &[f64]) -> Result<Vec<f64>> {
    e.unfold(0)?.matvec(weights)
}

/// Loadings of one block: leading rank-`L` subspaces of each non-sample
/// mode of the cross-covariance tensor `<E, F>_1`.
/// Also returns the leading X-side singular vector of the projected
/// cross-covariance core, the covariance-maximizing combination of the
/// projected X residual.
fn block_loadings(e: &DenseTensor, f: &DenseTensor, l: usize) -> Result<(Vec<Matrix>, Vec<Matrix>, Vec<f64>)> {
    let ex = &e.shape()[1..];
    let fy = &f.shape()[1..];
    let cross = e.unfold(0)?.t_matmul(&f.unfold(0)?)?;
    let shape: Vec<usize> = ex.iter().chain(fy).copied().collect();
    let c = DenseTensor::new(shape, cross.into_data())?;
    let ranks = vec![l; c.order()];
    let model = truncated_mlsvd(&c, &ranks)?;
    let x_dim = l.pow(ex.len() as u32);
    let core = Matrix::new(x_dim, model.core.len() / x_dim, model.core.into_data())?;
    let a = core.svd().u.col(0).to_vec();
    let (p, q) = model.factors.split_at(ex.len());
    Ok((p.to_vec(), q.to_vec(), a))
}

/// Higher-order PLS with `r` blocks of multilinear rank `(1, L, .., L)` on
/// both sides. Block loadings come from a truncated MLSVD of the residual
/// cross-covariance; the block score combines the projected X residual
/// along the direction of largest covariance with Y and is shared by both
/// sides.
pub fn hopls_fit(x: &DenseTensor, y: &DenseTensor, r: usize, l: usize, opts: &HoplsOptions) -> Result<HOPLSModel> {
    if x.order() < 2 || y.order() < 2 {
        return shape_err("HOPLS needs tensors of order at least 2");
    }
    if x.shape()[0] != y.shape()[0] {
        return shape_err(format!("sample counts differ: {} vs {}", x.shape()[0], y.shape()[0]));
    }
    if l == 0 || x.shape()[1..].iter().chain(&y.shape()[1..]).any(|&s| l > s) {
        return invalid(format!("block rank {l} must lie in 1..=min non-sample extent"));
    }
    crate::linalg::check_finite(x.data())?;
    crate::linalg::check_finite(y.data())?;
    let (x_mean, y_mean) = if opts.center {
        (sample_mean(x), sample_mean(y))
    } else {
        (DenseTensor::zeros(&sample_shape(x))?, DenseTensor::zeros(&sample_shape(y))?)
    };
    let mut e = x.clone();
    let mut f = y.clone();
    shift_samples(&mut e, &x_mean, -1.0);
    shift_samples(&mut f, &y_mean, -1.0);
    let x_norm = e.frobenius_norm();
    let mut blocks = Vec::with_capacity(r);
    let mut residual_norms = Vec::with_capacity(r);
    for comp in 0..r {
        if e.frobenius_norm() <= 1e-12 * x_norm.max(f64::MIN_POSITIVE) {
            log::warn!("HOPLS: X residual exhausted after {comp} of {r} blocks");
            break;
        }
        let (p, q, a) = block_loadings(&e, &f, l)?;
        let z = project_rest(&e, &p)?.unfold(0)?;
        let t0 = z.matvec(&a)?;
        let tn = norm(&t0);
        if tn <= 1e-12 * x_norm {
            log::warn!("HOPLS: empty projection after {comp} of {r} blocks");
            break;
        }
        let t: Vec<f64> = t0.iter().map(|v| v / tn).collect();
        let mut gx_shape = vec![1];
        gx_shape.extend(std::iter::repeat(l).take(x.order() - 1));
        let g_x = DenseTensor::new(gx_shape.clone(), z.t_matvec(&t)?)?;
        let w_t = block_term(&DenseTensor::new(gx_shape, a)?, &[1.0 / tn], &p)?.into_data();
        let g_y = project_rest(&f, &q)?.mode_n_product(&Matrix::new(1, t.len(), t.clone())?, 0)?;
        let gyy = g_y.frobenius_norm().powi(2);
        let u = if gyy > 0.0 {
            scores_from(&f, &block_term(&g_y, &[1.0], &q)?.scaled(1.0 / gyy).into_data())?
        } else {
            vec![0.0; t.len()]
        };
        e = e.sub(&block_term(&g_x, &t, &p)?)?;
        f = f.sub(&block_term(&g_y, &t, &q)?)?;
        residual_norms.push(e.frobenius_norm());
        blocks.push(HoplsBlock { t, u, p, q, g_x, g_y, w: w_t });
    }
    Ok(HOPLSModel { blocks, x_mean, y_mean, residual_norms })
}

/// Scores `t*_r` for new samples, deflating with the stored X-side blocks.
pub fn hopls_scores(m: &HOPLSModel, x_new: &DenseTensor) -> Result<Vec<Vec<f64>>> {
    if x_new.shape()[1..] != m.x_mean.shape()[1..] {
        return shape_err(format!("X extents {:?} do not match the model {:?}", x_new.shape(), m.x_mean.shape()));
    }
    let mut e = x_new.clone();
    shift_samples(&mut e, &m.x_mean, -1.0);
    let mut scores = Vec::with_capacity(m.blocks.len());
    for b in &m.blocks {
        let t = scores_from(&e, &b.w)?;
        e = e.sub(&block_term(&b.g_x, &t, &b.p)?)?;
        scores.push(t);
    }
    Ok(scores)
}

/// `Y* = sum_r G_Y^(r) ×_1 t*_r ×_2 Q_r^(1) ..` plus the response mean.
pub fn hopls_predict(m: &HOPLSModel, x_new: &DenseTensor) -> Result<DenseTensor> {
    let scores = hopls_scores(m, x_new)?;
    let mut shape = m.y_mean.shape().to_vec();
    shape[0] = x_new.shape()[0];
    let mut y = DenseTensor::zeros(&shape)?;
    for (b, t) in m.blocks.iter().zip(&scores) {
        y.add_assign(&block_term(&b.g_y, t, &b.q)?)?;
    }
    shift_samples(&mut y, &m.y_mean, 1.0);
    Ok(y)
}

/// PLS on sample-mode unfoldings, returning predictions as tensors.
pub fn unfolded_pls_predict(
    x_train: &DenseTensor,
    y_train: &DenseTensor,
    x_test: &DenseTensor,
    r: usize,
) -> Result<DenseTensor> {
    let m = pls_fit(&x_train.unfold(0)?, &y_train.unfold(0)?, r)?;
    let pred = pls_predict(&m, &x_test.unfold(0)?)?;
    let mut shape = y_train.shape().to_vec();
    shape[0] = x_test.shape()[0];
    DenseTensor::fold(&pred, 0, &shape)
}

/// Pearson correlation between two tensors' entries.
pub fn prediction_correlation(truth: &DenseTensor, pred: &DenseTensor) -> f64 {
    crate::linalg::correlation(truth.data(), pred.data())
}

/// Planted regression task: predictors `samples x I_2 x ..` and responses
/// `samples x J_2 x ..` generated from `blocks` latent blocks of rank
/// `(1, L, .., L)`, with Gaussian noise of standard deviation `noise` added
/// after scaling both signals to unit RMS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTask {
    pub x_shape: Vec<usize>,
    pub y_shape: Vec<usize>,
    pub blocks: usize,
    pub block_rank: usize,
    pub noise: f64,
}

impl Default for RegressionTask {
    /// Time x channel x epoch x frequency predictors and
    /// time x coordinate x marker responses.
    fn default() -> Self {
        Self { x_shape: vec![40, 10, 8, 6], y_shape: vec![40, 3, 4], blocks: 1, block_rank: 2, noise: 0.1 }
    }
}

/// Generated data plus the latent scores that produced it.
#[derive(Clone, Debug)]
pub struct RegressionData {
    pub x: DenseTensor,
    pub y: DenseTensor,
    pub scores: Vec<Vec<f64>>,
}

impl RegressionTask {
    pub fn generate(&self, seed: u64) -> Result<RegressionData> {
        if self.x_shape.len() < 2 || self.y_shape.len() < 2 || self.x_shape[0] != self.y_shape[0] {
            return shape_err("predictor and response shapes must share a leading sample extent");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.x_shape[0];
        let l = self.block_rank;
        let mut x = DenseTensor::zeros(&self.x_shape)?;
        let mut y = DenseTensor::zeros(&self.y_shape)?;
        let mut scores = Vec::new();
        for _ in 0..self.blocks {
            let t = Matrix::random_normal(n, 1, &mut rng).into_data();
            let loads = |shape: &[usize], rng: &mut ChaCha8Rng| -> Vec<Matrix> {
                shape[1..].iter().map(|&s| Matrix::random_orthonormal(s, l.min(s), rng)).collect()
            };
            let p = loads(&self.x_shape, &mut rng);
            let q = loads(&self.y_shape, &mut rng);
            let core = |f: &[Matrix], rng: &mut ChaCha8Rng| -> Result<DenseTensor> {
                let mut s = vec![1];
                s.extend(f.iter().map(Matrix::cols));
                let normal = Normal::new(0.0, 1.0).expect("valid");
                DenseTensor::from_fn(&s, |_| normal.sample(rng))
            };
            let gx = core(&p, &mut rng)?;
            let gy = core(&q, &mut rng)?;
            x.add_assign(&block_term(&gx, &t, &p)?)?;
            y.add_assign(&block_term(&gy, &t, &q)?)?;
            scores.push(t);
        }
        let normal = Normal::new(0.0, 1.0).expect("valid");
        for t in [&mut x, &mut y] {
            let rms = t.frobenius_norm() / (t.len() as f64).sqrt();
            let s = if rms > 0.0 { 1.0 / rms } else { 1.0 };
            t.data_mut().iter_mut().for_each(|v| *v = *v * s + self.noise * normal.sample(&mut rng));
        }
        Ok(RegressionData { x, y, scores })
    }
}

/// Splits along the sample mode into the first `n_train` samples and the rest.
pub fn split_samples(t: &DenseTensor, n_train: usize) -> Result<(DenseTensor, DenseTensor)> {
    let n = t.shape()[0];
    if n_train == 0 || n_train >= n {
        return invalid(format!("cannot split {n} samples at {n_train}"));
    }
    let unf = t.unfold(0)?;
    let rows_a: Vec<usize> = (0..n_train).collect();
    let rows_b: Vec<usize> = (n_train..n).collect();
    let mut sa = t.shape().to_vec();
    sa[0] = n_train;
    let mut sb = t.shape().to_vec();
    sb[0] = n - n_train;
    Ok((DenseTensor::fold(&unf.select_rows(&rows_a), 0, &sa)?, DenseTensor::fold(&unf.select_rows(&rows_b), 0, &sb)?))
}

/// Test-set correlations of HOPLS and unfolded PLS at matched `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionComparison {
    pub hopls: f64,
    pub pls: f64,
}

/// Trains on the first half of the samples and scores on the second half.
/// With `r = 0` neither model has a component and both correlations are 0.
pub fn compare_on_task(task: &RegressionTask, seed: u64, r: usize, l: usize) -> Result<RegressionComparison> {
    let data = task.generate(seed)?;
    if r == 0 {
        return Ok(RegressionComparison { hopls: 0.0, pls: 0.0 });
    }
    let n_train = task.x_shape[0] / 2;
    let (x_tr, x_te) = split_samples(&data.x, n_train)?;
    let (y_tr, y_te) = split_samples(&data.y, n_train)?;
    let model = hopls_fit(&x_tr, &y_tr, r, l, &HoplsOptions::default())?;
    let hopls = prediction_correlation(&y_te, &hopls_predict(&model, &x_te)?);
    let pls = prediction_correlation(&y_te, &unfolded_pls_predict(&x_tr, &y_tr, &x_te, r)?);
    Ok(RegressionComparison { hopls, pls })
}
