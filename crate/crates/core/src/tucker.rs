//! Tucker decomposition `X ≈ G ×_0 B_0 ×_1 B_1 .. ×_{N-1} B_{N-1}`:
//! multilinear SVD, truncation, higher-order orthogonal iteration and
//! multilinear rank estimation.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{check_finite, fix_column_signs, Matrix};
use crate::metrics::{relative_fit_from, FitTrace};
use crate::par;
use crate::tensor::{kronecker_except, DenseTensor};

/// Core tensor plus one factor matrix per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    /// Per-factor flag: columns are orthonormal.
    pub orthonormal: Vec<bool>,
}

impl TuckerModel {
    pub fn new(core: DenseTensor, factors: Vec<Matrix>) -> Result<Self> {
        if factors.len() != core.order() {
            return shape_err(format!("{} factors for an order-{} core", factors.len(), core.order()));
        }
        for (n, (f, &r)) in factors.iter().zip(core.shape()).enumerate() {
            if f.cols() != r {
                return shape_err(format!("factor {n} has {} columns, core extent is {r}", f.cols()));
            }
        }
        let orthonormal = factors
            .iter()
            .map(|f| f.gram().max_abs_diff(&Matrix::identity(f.cols())) <= 1e-10)
            .collect();
        Ok(Self { core, factors, orthonormal })
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.core.shape().to_vec()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(Matrix::rows).collect()
    }

    pub fn reconstruct(&self) -> DenseTensor {
        self.core.multilinear_product(&self.factors).expect("validated shapes")
    }

    /// Number of stored parameters.
    pub fn parameter_count(&self) -> usize {
        self.core.len() + self.factors.iter().map(|f| f.rows() * f.cols()).sum::<usize>()
    }
}

/// Multilinear singular values, one descending sequence per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultilinearSpectrum {
    pub values: Vec<Vec<f64>>,
}

/// Leading `k` left singular vectors (signs fixed) and all singular values
/// of the mode-`n` unfolding.
fn mode_basis(t: &DenseTensor, n: usize, k: usize) -> Result<(Matrix, Vec<f64>)> {
    let unfolded = t.unfold(n)?;
    let (mut u, _) = unfolded.left_singular_vectors(k)?;
    fix_column_signs(&mut u);
    let mut all = unfolded.singular_values();
    all.resize(t.shape()[n], 0.0);
    Ok((u, all))
}

/// Full multilinear SVD. Factors are square orthogonal matrices whose
/// columns are the left singular vectors of each unfolding (largest-magnitude
/// entry positive); the core is `X ×_0 U_0^T .. ×_{N-1} U_{N-1}^T`.
///
/// The core is all-orthogonal and its mode-`n` slice norms are the mode-`n`
/// multilinear singular values. Per-mode SVDs run in parallel.
pub fn mlsvd(t: &DenseTensor) -> Result<(TuckerModel, MultilinearSpectrum)> {
    check_finite(t.data())?;
    let per_mode: Vec<Result<(Matrix, Vec<f64>)>> =
        par::map_indices(t.order(), |n| mode_basis(t, n, t.shape()[n]));
    let mut factors = Vec::with_capacity(t.order());
    let mut values = Vec::with_capacity(t.order());
    for r in per_mode {
        let (u, s) = r?;
        factors.push(u);
        values.push(s);
    }
    let core = t.multilinear_product_t(&factors)?;
    let orthonormal = vec![true; factors.len()];
    Ok((TuckerModel { core, factors, orthonormal }, MultilinearSpectrum { values }))
}

fn check_ranks(t: &DenseTensor, ranks: &[usize]) -> Result<()> {
    if ranks.len() != t.order() {
        return shape_err(format!("{} ranks for an order-{} tensor", ranks.len(), t.order()));
    }
    for (n, (&r, &e)) in ranks.iter().zip(t.shape()).enumerate() {
        if r > e {
            return invalid(format!("rank {r} exceeds extent {e} in mode {n}"));
        }
        if r == 0 {
            return invalid(format!("rank 0 in mode {n}"));
        }
    }
    Ok(())
}

/// MLSVD truncated to multilinear rank `ranks`. The error obeys
/// `||X - X̂||² <= Σ_n Σ_{r >= R_n} σ_{n,r}²` but is not in general the best
/// rank-`ranks` approximation (see [`hooi`]).
pub fn truncated_mlsvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    check_finite(t.data())?;
    check_ranks(t, ranks)?;
    let per_mode = par::map_indices(t.order(), |n| mode_basis(t, n, ranks[n]).map(|(u, _)| u));
    let factors = per_mode.into_iter().collect::<Result<Vec<_>>>()?;
    let core = t.multilinear_product_t(&factors)?;
    let orthonormal = vec![true; factors.len()];
    Ok(TuckerModel { core, factors, orthonormal })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HooiOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HooiOptions {
    fn default() -> Self {
        Self { max_iters: 100, tol: 1e-12 }
    }
}

/// Higher-order orthogonal iteration from a truncated-MLSVD start. Each
/// mode update takes the leading left singular vectors of the tensor
/// projected on all other factors, which maximizes the core norm given the
/// other factors; the fit is therefore non-decreasing per sweep.
pub fn hooi(t: &DenseTensor, ranks: &[usize], opts: &HooiOptions) -> Result<(TuckerModel, FitTrace)> {
    let init = truncated_mlsvd(t, ranks)?;
    hooi_from(t, init, opts)
}

/// HOOI starting from a given model with orthonormal factors.
pub fn hooi_from(t: &DenseTensor, init: TuckerModel, opts: &HooiOptions) -> Result<(TuckerModel, FitTrace)> {
    let ranks = init.ranks();
    let norm_x = t.frobenius_norm();
    let mut factors = init.factors;
    let mut trace = FitTrace::default();
    let fit_of = |core: &DenseTensor, factors: &[Matrix]| -> Result<f64> {
        let recon = core.multilinear_product(factors)?;
        Ok(relative_fit_from(t.sub(&recon)?.frobenius_norm(), norm_x))
    };
    let mut core = init.core;
    trace.fits.push(fit_of(&core, &factors)?);
    for _ in 0..opts.max_iters {
        for n in 0..t.order() {
            let mut y = t.clone();
            for (k, f) in factors.iter().enumerate() {
                if k != n {
                    y = y.mode_n_product(&f.transpose(), k)?;
                }
            }
            let (mut u, _) = y.unfold(n)?.left_singular_vectors(ranks[n])?;
            fix_column_signs(&mut u);
            factors[n] = u;
        }
        core = t.multilinear_product_t(&factors)?;
        let fit = fit_of(&core, &factors)?;
        let prev = *trace.fits.last().expect("initial fit recorded");
        trace.fits.push(fit);
        if (fit - prev).abs() < opts.tol {
            trace.converged = true;
            break;
        }
    }
    let orthonormal = vec![true; factors.len()];
    Ok((TuckerModel { core, factors, orthonormal }, trace))
}

/// Counts, per mode, multilinear singular values above `tol * σ_{n,1}`.
/// A zero tensor has multilinear rank all zeros.
pub fn multilinear_rank(t: &DenseTensor, tol: f64) -> Result<Vec<usize>> {
    if !(tol > 0.0 && tol < 1.0) {
        return invalid(format!("rank tolerance must lie in (0, 1), got {tol}"));
    }
    check_finite(t.data())?;
    let per_mode = par::map_indices(t.order(), |n| t.unfold(n).map(|m| m.singular_values()));
    per_mode
        .into_iter()
        .map(|s| {
            let s = s?;
            Ok(match s.first() {
                Some(&s0) if s0 > 0.0 => s.iter().filter(|&&x| x > tol * s0).count(),
                _ => 0,
            })
        })
        .collect()
}

/// Default relative tolerance for [`multilinear_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Replaces the mode-`n` factor by a nonnegative one fitted with projected
/// gradient steps on `min ||X_(n) - B W||` where `W = G_(n) (⊗_{k≠n} B_k)^T`
/// is held fixed. Step size `1 / ||W W^T||_2` keeps the objective
/// non-increasing. The refined factor is no longer orthonormal.
pub fn refine_nonnegative(t: &DenseTensor, model: &TuckerModel, n: usize, iters: usize) -> Result<TuckerModel> {
    if n >= model.factors.len() {
        return invalid(format!("mode {n} out of range"));
    }
    let w = model.core.unfold(n)?.matmul_t(&kronecker_except(&model.factors, Some(n)))?;
    let x = t.unfold(n)?;
    let wwt = w.matmul_t(&w)?;
    let lipschitz = wwt.singular_values().first().copied().unwrap_or(0.0);
    let mut b = model.factors[n].clone();
    b.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    if lipschitz > 0.0 {
        let xwt = x.matmul_t(&w)?;
        let step = 1.0 / lipschitz;
        for _ in 0..iters {
            let grad = b.matmul(&wwt)?.sub(&xwt)?;
            for (v, g) in b.data_mut().iter_mut().zip(grad.data()) {
                *v = (*v - step * g).max(0.0);
            }
        }
    }
    let mut factors = model.factors.clone();
    factors[n] = b;
    let mut orthonormal = model.orthonormal.clone();
    orthonormal[n] = false;
    Ok(TuckerModel { core: model.core.clone(), factors, orthonormal })
}
