//! Fit and quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{abs_cosine, dot, norm, Matrix};
use crate::tensor::DenseTensor;

/// Floor reported for SAE when estimates are exact.
pub const SAE_FLOOR_DB: f64 = -300.0;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `1 - ||E|| / ||X||`.
    pub relative_fit: f64,
    pub residual_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sae_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
}

impl MetricsReport {
    pub fn from_residual(reference: &DenseTensor, estimate: &DenseTensor) -> Result<Self> {
        let residual_norm = reference.sub(estimate)?.frobenius_norm();
        Ok(Self {
            relative_fit: relative_fit_from(residual_norm, reference.frobenius_norm()),
            residual_norm,
            sae_db: None,
            psnr_db: None,
        })
    }
}

/// Per-sweep record of an iterative fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// Relative fit after each completed sweep.
    pub fits: Vec<f64>,
    pub converged: bool,
    /// Set when diverging, mutually cancelling components were detected.
    pub degenerate: bool,
}

impl FitTrace {
    pub fn final_fit(&self) -> f64 {
        self.fits.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn iterations(&self) -> usize {
        self.fits.len()
    }

    /// True when no sweep lowered the fit by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.fits.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

pub(crate) fn relative_fit_from(residual_norm: f64, reference_norm: f64) -> f64 {
    if reference_norm == 0.0 {
        if residual_norm == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - residual_norm / reference_norm
    }
}

/// `1 - ||reference - estimate|| / ||reference||`.
pub fn relative_fit(reference: &DenseTensor, estimate: &DenseTensor) -> Result<f64> {
    Ok(MetricsReport::from_residual(reference, estimate)?.relative_fit)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Matches estimated columns to reference columns, maximizing the total
/// squared absolute cosine. Exhaustive for up to 8 columns, greedy beyond.
/// Returns `perm` with `estimated[:, perm[r]]` paired to `reference[:, r]`.
pub fn best_column_matching(reference: &Matrix, estimated: &Matrix) -> Vec<usize> {
    let r = reference.cols();
    let cos: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..estimated.cols()).map(|j| abs_cosine(reference.col(i), estimated.col(j))).collect())
        .collect();
    if r <= 8 && estimated.cols() == r {
        let mut best = (f64::NEG_INFINITY, vec![]);
        for p in permutations(r) {
            let score: f64 = p.iter().enumerate().map(|(i, &j)| cos[i][j].powi(2)).sum();
            if score > best.0 {
                best = (score, p);
            }
        }
        return best.1;
    }
    let mut used = vec![false; estimated.cols()];
    (0..r)
        .map(|i| {
            let j = (0..estimated.cols())
                .filter(|&j| !used[j])
                .max_by(|&a, &b| cos[i][a].total_cmp(&cos[i][b]))
                .expect("enough estimated columns");
            used[j] = true;
            j
        })
        .collect()
}

/// Squared sines of the angles between matched column pairs.
pub fn squared_sines(reference: &Matrix, estimated: &Matrix) -> Result<Vec<f64>> {
    if reference.rows() != estimated.rows() || reference.cols() != estimated.cols() {
        return shape_err("SAE needs matching vector sets");
    }
    for m in [reference, estimated] {
        if m.columns().any(|c| norm(c) == 0.0) {
            return invalid("zero-norm vector in SAE input");
        }
    }
    let perm = best_column_matching(reference, estimated);
    Ok(perm
        .iter()
        .enumerate()
        .map(|(i, &j)| squared_sine(reference.col(i), estimated.col(j)))
        .collect())
}

/// `sin²` of the angle between two lines, from the component of `b`
/// orthogonal to `a` (accurate for small angles).
fn squared_sine(a: &[f64], b: &[f64]) -> f64 {
    let coef = dot(a, b) / dot(a, a);
    let perp: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - coef * x).collect();
    (dot(&perp, &perp) / dot(b, b)).clamp(0.0, 1.0)
}

/// Average squared angular error in dB between the columns of two matrices,
/// after optimal permutation. Sign is irrelevant (squared sine).
pub fn compute_sae(true_vectors: &Matrix, estimated_vectors: &Matrix) -> Result<f64> {
    let s = squared_sines(true_vectors, estimated_vectors)?;
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    Ok(to_db(mean))
}

fn to_db(x: f64) -> f64 {
    if x <= 0.0 {
        SAE_FLOOR_DB
    } else {
        (10.0 * x.log10()).max(SAE_FLOOR_DB)
    }
}

/// `10 log10(max(reference)^2 * count / residual sum of squares)`.
/// Infinite when the estimate is exact.
pub fn compute_psnr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() || reference.is_empty() {
        return shape_err("PSNR needs equal-length non-empty inputs");
    }
    let peak = reference.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let rss: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    if rss == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak * reference.len() as f64 / rss).log10())
}
