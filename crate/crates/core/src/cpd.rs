//! Canonical polyadic decomposition: `X ≈ Σ_r λ_r b_r^(0) ∘ .. ∘ b_r^(N-1)`.
//!
//! [`cpd_als`] fits a model by alternating least squares, one factor at a
//! time. Each conditional update solves `B_n V = X_(n) K` where `K` is the
//! Khatri-Rao product of the other factors and `V` the Hadamard product of
//! their Gramians; when `V` is badly conditioned the update switches to a QR
//! solve against `K` itself.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{self, check_finite, leading_sign, lstsq, norm, solve_spd, Matrix};
use crate::metrics::{relative_fit_from, FitTrace};
use crate::tensor::{khatri_rao_except, DenseTensor};

/// Condition estimate of the Gramian above which ALS updates use QR.
const GRAM_CONDITION_LIMIT: f64 = 1e8;

/// Weights plus unit-norm factor matrices, kept in canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CPModel {
    weights: Vec<f64>,
    factors: Vec<Matrix>,
}

impl CPModel {
    /// Builds a model from arbitrary weights and factors and canonicalizes it.
    pub fn new(weights: Vec<f64>, factors: Vec<Matrix>) -> Result<Self> {
        if factors.is_empty() {
            return invalid("CP model needs at least one factor");
        }
        let r = weights.len();
        if factors.iter().any(|f| f.cols() != r) {
            return shape_err(format!("every factor needs {r} columns"));
        }
        if factors.iter().any(|f| f.rows() == 0) {
            return invalid("factor with zero rows");
        }
        Ok(Self { weights, factors }.canonical())
    }

    /// Model with unit weights and the given (not necessarily normalized) factors.
    pub fn from_factors(factors: Vec<Matrix>) -> Result<Self> {
        let r = factors.first().map_or(0, Matrix::cols);
        Self::new(vec![1.0; r], factors)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    /// Canonical form: unit-norm columns, non-negative weights sorted in
    /// descending order, and the largest-magnitude entry of each first-mode
    /// column positive. Columns already within 1e-14 of unit norm are left
    /// untouched, which makes the operation idempotent bit for bit.
    pub fn canonical(&self) -> CPModel {
        let n_modes = self.factors.len();
        let mut weights = self.weights.clone();
        let mut factors = self.factors.clone();
        for r in 0..weights.len() {
            for f in factors.iter_mut() {
                let nrm = norm(f.col(r));
                if nrm > 0.0 && (nrm - 1.0).abs() > 1e-14 {
                    f.col_mut(r).iter_mut().for_each(|x| *x /= nrm);
                    weights[r] *= nrm;
                } else if nrm == 0.0 {
                    weights[r] = 0.0;
                }
            }
            if weights[r] < 0.0 {
                weights[r] = -weights[r];
                factors[n_modes - 1].col_mut(r).iter_mut().for_each(|x| *x = -*x);
            }
            if n_modes > 1 && leading_sign(factors[0].col(r)) < 0.0 {
                for f in factors.iter_mut().take(2) {
                    f.col_mut(r).iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            weights[b].total_cmp(&weights[a]).then_with(|| {
                let (ca, cb) = (factors[0].col(a), factors[0].col(b));
                cb.iter().zip(ca).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        CPModel {
            weights: order.iter().map(|&i| weights[i]).collect(),
            factors: factors.iter().map(|f| f.select_columns(&order)).collect(),
        }
    }

    /// Dense tensor `Σ_r λ_r b_r^(0) ∘ .. ∘ b_r^(N-1)`.
    pub fn reconstruct(&self) -> DenseTensor {
        let kr = khatri_rao_except(&self.factors, None).expect("factors share column count");
        let data = kr.matvec(&self.weights).expect("weights match rank");
        DenseTensor::new(self.shape(), data).expect("consistent shape")
    }
}

/// Dense reconstruction of a CP model.
pub fn cpd_reconstruct(model: &CPModel) -> DenseTensor {
    model.reconstruct()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CpInit {
    /// Leading left singular vectors of each unfolding (random columns pad
    /// modes whose extent is below the rank).
    Mlsvd,
    /// Seeded standard normal factors.
    Random,
    /// Caller-supplied factors.
    Given(Vec<Matrix>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    pub max_iters: usize,
    /// Stop when the fit changes by less than this between sweeps.
    pub tol: f64,
    pub init: CpInit,
    pub seed: u64,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-10, init: CpInit::Mlsvd, seed: 0 }
    }
}

fn initial_factors(t: &DenseTensor, rank: usize, opts: &CpOptions) -> Result<Vec<Matrix>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    match &opts.init {
        CpInit::Given(f) => {
            if f.len() != t.order() || f.iter().zip(t.shape()).any(|(m, &e)| m.shape() != (e, rank)) {
                return shape_err("initial factors do not match tensor shape and rank");
            }
            Ok(f.clone())
        }
        CpInit::Random => Ok(t.shape().iter().map(|&e| Matrix::random_normal(e, rank, &mut rng)).collect()),
        CpInit::Mlsvd => (0..t.order())
            .map(|n| {
                let e = t.shape()[n];
                let k = rank.min(e);
                let (u, _) = t.unfold(n)?.left_singular_vectors(k)?;
                if k == rank {
                    Ok(u)
                } else {
                    Matrix::hcat(&[&u, &Matrix::random_normal(e, rank - k, &mut rng)])
                }
            })
            .collect(),
    }
}

/// Solves one conditional least-squares update for mode `n`.
fn als_update(t: &DenseTensor, factors: &[Matrix], n: usize) -> Result<Matrix> {
    let rank = factors[0].cols();
    let kr = khatri_rao_except(factors, Some(n))?;
    let unfolded = t.unfold(n)?;
    let mut gram = Matrix::from_fn(rank, rank, |_, _| 1.0);
    for (k, f) in factors.iter().enumerate() {
        if k != n {
            gram = gram.hadamard(&f.gram())?;
        }
    }
    let eig = linalg::symmetric_eigenvalues(&gram);
    let cond = match (eig.first(), eig.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    };
    if cond <= GRAM_CONDITION_LIMIT {
        let mttkrp = unfolded.matmul(&kr)?;
        Ok(solve_spd(&gram, &mttkrp.transpose())?.transpose())
    } else {
        Ok(lstsq(&kr, &unfolded.transpose())?.transpose())
    }
}

/// Splits column norms of `f` off into weights.
fn normalize_columns(f: &mut Matrix) -> Vec<f64> {
    (0..f.cols())
        .map(|r| {
            let nrm = norm(f.col(r));
            if nrm > 0.0 {
                f.col_mut(r).iter_mut().for_each(|x| *x /= nrm);
            }
            nrm
        })
        .collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

/// Detects diverging components: either one weight dwarfs the median weight
/// (`> 1e6` times), or the weights sum to more than twice the data norm while
/// some pair of components nearly cancels (product of column cosines below
/// -0.8). The second rule is what fires for two-term swamps, where both
/// weights grow together and the median test cannot trigger.
pub fn diverging_components(weights: &[f64], factors: &[Matrix], data_norm: f64) -> bool {
    if weights.is_empty() {
        return false;
    }
    let max_w = weights.iter().fold(0.0f64, |m, &w| m.max(w));
    if max_w > 1e6 * median(weights) {
        return true;
    }
    let total: f64 = weights.iter().sum();
    if data_norm == 0.0 || total <= 2.0 * data_norm {
        return false;
    }
    let r = weights.len();
    (0..r).any(|a| {
        (a + 1..r).any(|b| {
            let congruence: f64 = factors.iter().map(|f| linalg::dot(f.col(a), f.col(b))).product();
            congruence < -0.8
        })
    })
}

/// Fits a rank-`rank` CP model by alternating least squares.
///
/// The trace records the relative fit after every sweep; it is non-decreasing
/// up to rounding because each update is an exact least-squares solve.
pub fn cpd_als(t: &DenseTensor, rank: usize, opts: &CpOptions) -> Result<(CPModel, FitTrace)> {
    if rank == 0 {
        return invalid("CP rank must be at least 1");
    }
    check_finite(t.data())?;
    if t.order() < 2 {
        return invalid("CP decomposition needs a tensor of order at least 2");
    }
    let norm_x = t.frobenius_norm();
    let mut factors = initial_factors(t, rank, opts)?;
    let mut weights = vec![1.0; rank];
    for f in factors.iter_mut() {
        normalize_columns(f);
    }
    let mut trace = FitTrace::default();
    if norm_x == 0.0 {
        let model = CPModel::new(vec![0.0; rank], factors)?;
        trace.fits.push(1.0);
        trace.converged = true;
        return Ok((model, trace));
    }
    for _ in 0..opts.max_iters {
        for n in 0..t.order() {
            let mut updated = als_update(t, &factors, n)?;
            weights = normalize_columns(&mut updated);
            factors[n] = updated;
        }
        let model = CPModel { weights: weights.clone(), factors: factors.clone() };
        let residual = t.sub(&model.reconstruct())?.frobenius_norm();
        let fit = relative_fit_from(residual, norm_x);
        let prev = trace.fits.last().copied();
        trace.fits.push(fit);
        if let Some(p) = prev {
            if fit > p && diverging_components(&weights, &factors, norm_x) {
                trace.degenerate = true;
            }
            if (fit - p).abs() < opts.tol {
                trace.converged = true;
                break;
            }
        }
    }
    if trace.degenerate {
        warn!("CP-ALS: diverging components detected (degenerate fit)");
    }
    Ok((CPModel::new(weights, factors)?, trace))
}

/// Largest `k` such that every set of `k` columns is linearly independent.
///
/// Columns are normalized first (the k-rank is scale invariant); a subset
/// counts as independent when its smallest singular value exceeds `1e-10`
/// times its largest. Subsets are checked by increasing size and the search
/// stops at the first dependent one, after shortcuts for zero columns, full
/// column rank and parallel column pairs.
pub fn k_rank(m: &Matrix) -> usize {
    let r = m.cols();
    if r == 0 || m.columns().any(|c| norm(c) == 0.0) {
        return 0;
    }
    let mut normed = m.clone();
    normalize_columns(&mut normed);
    if normed.rank(1e-10) == r {
        return r;
    }
    let mut subset: Vec<usize> = Vec::new();
    for k in 2..=r.min(m.rows()) {
        subset.clear();
        subset.extend(0..k);
        loop {
            if !columns_independent(&normed, &subset) {
                return k - 1;
            }
            if !next_combination(&mut subset, r) {
                break;
            }
        }
    }
    r.min(m.rows())
}

fn columns_independent(m: &Matrix, subset: &[usize]) -> bool {
    let s = m.select_columns(subset).singular_values();
    s.len() == subset.len() && s[0] > 0.0 && *s.last().unwrap() > 1e-10 * s[0]
}

/// Advances `c` to the next `k`-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Outcome of the Kruskal / Sidiropoulos-Bro sufficient condition
/// `Σ_n k(B_n) >= 2R + N - 1`. A failed check means uniqueness is not
/// certified; it does not prove non-uniqueness. Rank-1 models never pass
/// (sum `N` vs threshold `N + 1`) although they are trivially unique.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub krank_sum: usize,
    pub threshold: usize,
    pub satisfied: bool,
    pub per_factor_kranks: Vec<usize>,
}

pub fn kruskal_uniqueness(model: &CPModel) -> UniquenessVerdict {
    let per_factor_kranks: Vec<usize> = model.factors.iter().map(k_rank).collect();
    let krank_sum = per_factor_kranks.iter().sum();
    let threshold = 2 * model.rank() + model.order() - 1;
    UniquenessVerdict { krank_sum, threshold, satisfied: krank_sum >= threshold, per_factor_kranks }
}

/// Core consistency diagnostic, in percent.
///
/// Computes the least-squares Tucker core of `t` given the model's factors,
/// `G = t ×_0 B_0^+ .. ×_{N-1} B_{N-1}^+`, and compares it with the ideal
/// superdiagonal core of weights: `100 (1 - ||G - D||² / ||D||²)`. Values
/// near 100 indicate an appropriate rank.
pub fn corcondia(t: &DenseTensor, model: &CPModel) -> Result<f64> {
    if t.shape() != model.shape().as_slice() {
        return shape_err("model shape differs from tensor shape");
    }
    let pinvs: Vec<Matrix> = model
        .factors
        .iter()
        .map(|f| {
            if f.rank(1e-12) < f.cols() {
                warn!("corcondia: rank-deficient factor, using pseudo-inverse");
            }
            f.pinv()
        })
        .collect();
    let core = t.multilinear_product(&pinvs)?;
    let ideal = DenseTensor::diagonal(&model.weights, model.order())?;
    let denom = ideal.frobenius_norm().powi(2);
    if denom == 0.0 {
        return invalid("corcondia of a model with all-zero weights");
    }
    Ok(100.0 * (1.0 - core.sub(&ideal)?.frobenius_norm().powi(2) / denom))
}
