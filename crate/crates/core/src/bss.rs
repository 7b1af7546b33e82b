//! Blind separation of two short, correlated sources from five noisy linear
//! mixtures, comparing matrix methods (PCA, a cumulant-based ICA) with
//! tensor methods applied to the Hankel tensor of the mixtures (rank-2 CPD,
//! Tucker, rank-(2,2,1) BTD).
//!
//! Sources are `sin(6πt)` and `exp(10t) sin(20πt)` sampled at
//! `t_k = k / rate` (default 240 Hz); the mixing vectors have unit norm and
//! inner product 0.1.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::btd::{btd_ll1_als, BtdOptions, Ll1Term};
use crate::cpd::{cpd_als, CpInit, CpOptions};
use crate::error::{invalid, Result};
use crate::linalg::{self, orthonormal_basis, principal_angles, Matrix};
use crate::metrics::{best_column_matching, compute_sae};
use crate::tensor::{dehankelize, hankel_tensorize, DenseTensor};
use crate::tucker::{hooi, HooiOptions};

/// Default sampling rate. Over 60 samples the 3 Hz sine covers about three
/// quarters of a period and the two sources have correlation near 0.31.
pub const DEFAULT_SAMPLE_RATE: f64 = 240.0;

/// Inner product between the two unit-norm mixing vectors.
pub const MIXING_INNER_PRODUCT: f64 = 0.1;

/// Where measurement noise enters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseStage {
    /// Noise is added to the mixtures, which are then Hankelized.
    BeforeHankel,
    /// Clean mixtures are Hankelized and i.i.d. noise is added to the tensor
    /// (matrix methods see the de-Hankelized noisy tensor).
    AfterHankel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BssConfig {
    pub samples: usize,
    /// Samples per unit time.
    pub sample_rate: f64,
    pub channels: usize,
    /// Signal-to-noise ratio in dB; `None` for noise-free mixtures.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub noise_stage: NoiseStage,
}

impl Default for BssConfig {
    fn default() -> Self {
        Self { samples: 60, sample_rate: DEFAULT_SAMPLE_RATE, channels: 5, snr_db: None, seed: 42, noise_stage: NoiseStage::BeforeHankel }
    }
}

/// Hankel extents for a signal of `samples` points: `I = max(3, round(0.4 T))`,
/// `J = T - I + 1` (24 x 37 for 60 samples, 3 x 4 for 6).
pub fn hankel_extents(samples: usize) -> (usize, usize) {
    let i = ((0.4 * samples as f64).round() as usize).max(3).min(samples);
    (i, samples + 1 - i)
}

/// `2 x T` source matrix.
pub fn sources(samples: usize, sample_rate: f64) -> Matrix {
    Matrix::from_fn(2, samples, |r, k| {
        let t = k as f64 / sample_rate;
        match r {
            0 => (6.0 * std::f64::consts::PI * t).sin(),
            _ => (10.0 * t).exp() * (20.0 * std::f64::consts::PI * t).sin(),
        }
    })
}

/// `|s_1 . s_2| / (|s_1| |s_2|)`.
pub fn source_correlation(samples: usize, sample_rate: f64) -> f64 {
    let s = sources(samples, sample_rate);
    linalg::abs_cosine(&s.row(0), &s.row(1))
}

/// Random `channels x 2` mixing matrix with unit-norm columns whose inner
/// product is [`MIXING_INNER_PRODUCT`].
pub fn mixing_matrix(channels: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let q = Matrix::random_orthonormal(channels, 2, rng);
    let a1 = q.col(0).to_vec();
    let c = MIXING_INNER_PRODUCT;
    let s = (1.0 - c * c).sqrt();
    let a2: Vec<f64> = q.col(0).iter().zip(q.col(1)).map(|(x, y)| c * x + s * y).collect();
    Matrix::from_columns(&[a1, a2]).expect("equal lengths")
}

/// One synthetic separation problem.
#[derive(Clone, Debug)]
pub struct BssProblem {
    pub mixing: Matrix,
    pub sources: Matrix,
    /// Noisy mixtures, `channels x samples`.
    pub mixtures: Matrix,
    /// Hankel tensor used by the tensor methods, `I x J x channels`.
    pub tensor: DenseTensor,
}

impl BssProblem {
    pub fn generate(cfg: &BssConfig) -> Result<Self> {
        if cfg.samples < 4 || cfg.channels < 2 || !(cfg.sample_rate > 0.0) {
            return invalid("need at least 4 samples, 2 channels and a positive sample rate");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mixing = mixing_matrix(cfg.channels, &mut rng);
        let sources = sources(cfg.samples, cfg.sample_rate);
        let clean = mixing.matmul(&sources)?;
        let (i, j) = hankel_extents(cfg.samples);
        let sigma = cfg.snr_db.map(|snr| {
            let power = clean.frobenius_norm().powi(2) / clean.data().len() as f64;
            (power / 10f64.powf(snr / 10.0)).sqrt()
        });
        let normal = Normal::new(0.0, 1.0).expect("valid");
        let rows = |m: &Matrix| -> Vec<Vec<f64>> { (0..m.rows()).map(|r| m.row(r)).collect() };
        let (mixtures, tensor) = match (sigma, cfg.noise_stage) {
            (None, _) => {
                let t = hankel_tensorize(&rows(&clean), i, j)?;
                (clean, t)
            }
            (Some(sd), NoiseStage::BeforeHankel) => {
                let mut noisy = clean;
                noisy.data_mut().iter_mut().for_each(|x| *x += sd * normal.sample(&mut rng));
                let t = hankel_tensorize(&rows(&noisy), i, j)?;
                (noisy, t)
            }
            (Some(sd), NoiseStage::AfterHankel) => {
                let mut t = hankel_tensorize(&rows(&clean), i, j)?;
                t.data_mut().iter_mut().for_each(|x| *x += sd * normal.sample(&mut rng));
                let mut noisy = Matrix::zeros(cfg.channels, cfg.samples);
                for k in 0..cfg.channels {
                    for (p, v) in dehankelize(&t.frontal_slice(k)?).into_iter().enumerate() {
                        noisy[(k, p)] = v;
                    }
                }
                (noisy, t)
            }
        };
        Ok(Self { mixing, sources, mixtures, tensor })
    }
}

fn centered(x: &Matrix) -> Matrix {
    let mut c = x.clone();
    for r in 0..x.rows() {
        let mean = x.row(r).iter().sum::<f64>() / x.cols() as f64;
        for k in 0..x.cols() {
            c[(r, k)] -= mean;
        }
    }
    c
}

/// Mixing vectors estimated as the leading principal directions of the
/// (row-centered) mixtures.
pub fn pca_mixing(x: &Matrix, n_sources: usize) -> Matrix {
    centered(x).svd().u.leading_columns(n_sources)
}

/// Mixing estimate from a fourth-order cumulant ICA: the mixtures are
/// whitened onto `n_sources` principal directions and the cumulant
/// matrices `Q(e_p e_q^T)` are jointly diagonalized by Jacobi rotations.
/// This is a compact stand-in for JADE, not a reimplementation of it.
pub fn cumulant_ica_mixing(x: &Matrix, n_sources: usize) -> Result<Matrix> {
    let xc = centered(x);
    let t = xc.cols() as f64;
    let svd = xc.svd();
    let m = n_sources.min(svd.s.len());
    // whitening: z = D^{-1} U^T x sqrt(T)
    let u = svd.u.leading_columns(m);
    let scales: Vec<f64> = svd.s[..m].iter().map(|s| s / t.sqrt()).collect();
    if scales.iter().any(|&s| s <= 0.0) {
        return invalid("mixtures have fewer than n_sources nonzero principal components");
    }
    let mut z = u.t_matmul(&xc)?;
    for r in 0..m {
        for k in 0..xc.cols() {
            z[(r, k)] /= scales[r];
        }
    }
    // cumulant matrices for the symmetric basis e_p e_q^T + e_q e_p^T
    let mut cumulants = Vec::new();
    for p in 0..m {
        for q in p..m {
            let mut mat = Matrix::zeros(m, m);
            for k in 0..xc.cols() {
                let w = z[(p, k)] * z[(q, k)];
                for i in 0..m {
                    for j in 0..m {
                        mat[(i, j)] += w * z[(i, k)] * z[(j, k)] / t;
                    }
                }
            }
            // subtract Gaussian part: E[z_p z_q] I + E[z_p z_i] E[z_q z_j] + E[z_p z_j] E[z_q z_i]
            let delta = if p == q { 1.0 } else { 0.0 };
            for i in 0..m {
                mat[(i, i)] -= delta;
            }
            mat[(p, q)] -= 1.0;
            mat[(q, p)] -= 1.0;
            cumulants.push(mat);
        }
    }
    let v = joint_diagonalize(&mut cumulants, m);
    let mut dewhite = u.clone();
    for r in 0..m {
        dewhite.col_mut(r).iter_mut().for_each(|x| *x *= scales[r]);
    }
    dewhite.matmul(&v)
}

/// Jacobi joint diagonalization of symmetric matrices; returns the
/// accumulated rotation `V` (the matrices are replaced by `V^T M V`).
fn joint_diagonalize(mats: &mut [Matrix], m: usize) -> Matrix {
    let mut v = Matrix::identity(m);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
                for a in mats.iter() {
                    let h1 = a[(p, p)] - a[(q, q)];
                    let h2 = a[(p, q)] + a[(q, p)];
                    g11 += h1 * h1;
                    g12 += h1 * h2;
                    g22 += h2 * h2;
                }
                let ton = g11 - g22;
                let toff = 2.0 * g12;
                let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                let (s, c) = theta.sin_cos();
                if s.abs() > 1e-12 {
                    rotated = true;
                    let rot = |mat: &mut Matrix| {
                        for k in 0..mat.rows() {
                            let (x, y) = (mat[(k, p)], mat[(k, q)]);
                            mat[(k, p)] = c * x + s * y;
                            mat[(k, q)] = -s * x + c * y;
                        }
                    };
                    for a in mats.iter_mut() {
                        rot(a);
                        let mut at = a.transpose();
                        rot(&mut at);
                        *a = at.transpose();
                    }
                    rot(&mut v);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

/// Estimated mixing vectors (columns of C) from a rank-2 CPD of the tensor.
pub fn cpd_mixing(t: &DenseTensor, n_sources: usize, seed: u64) -> Result<(Matrix, f64)> {
    // best of the deterministic start and a few seeded random ones
    let mut best: Option<(Matrix, f64)> = None;
    for s in 0..4u64 {
        let init = if s == 0 { CpInit::Mlsvd } else { CpInit::Random };
        let opts = CpOptions { max_iters: 1000, tol: 1e-12, init, seed: seed.wrapping_add(s) };
        let (m, trace) = cpd_als(t, n_sources, &opts)?;
        if best.as_ref().map_or(true, |b| trace.final_fit() > b.1) {
            best = Some((m.factors()[2].clone(), trace.final_fit()));
        }
    }
    Ok(best.expect("at least one start"))
}

/// Rank-(2,2,1) BTD of the tensor: terms, fit.
pub fn btd_terms(t: &DenseTensor, n_sources: usize, seed: u64) -> Result<(Vec<Ll1Term>, f64)> {
    let opts = BtdOptions { seed, ..Default::default() };
    let (terms, trace) = btd_ll1_als(t, n_sources, 2, &opts)?;
    Ok((terms, trace.final_fit()))
}

/// Columns `c_r` of BTD terms as a mixing estimate.
pub fn btd_mixing(terms: &[Ll1Term]) -> Matrix {
    Matrix::from_columns(&terms.iter().map(|t| t.c.clone()).collect::<Vec<_>>()).expect("equal lengths")
}

/// Source estimates from a mixing estimate: `X ×_3 C^+` followed by
/// anti-diagonal averaging of each resulting Hankel slice.
pub fn recover_sources(t: &DenseTensor, mixing: &Matrix) -> Result<Matrix> {
    let unmixed = t.mode_n_product(&mixing.pinv(), 2)?;
    let rows: Vec<Vec<f64>> =
        (0..mixing.cols()).map(|r| unmixed.frontal_slice(r).map(|s| dehankelize(&s))).collect::<Result<_>>()?;
    let samples = rows[0].len();
    Ok(Matrix::from_fn(rows.len(), samples, |r, k| rows[r][k]))
}

/// Absolute correlation between each true source and its matched estimate.
pub fn matched_source_correlations(truth: &Matrix, estimate: &Matrix) -> Vec<f64> {
    let perm = best_column_matching(&truth.transpose(), &estimate.transpose());
    perm.iter()
        .enumerate()
        .map(|(i, &j)| linalg::abs_cosine(&truth.row(i), &estimate.row(j)))
        .collect()
}

/// Per-method results of one separation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BssOutcome {
    pub sae_pca_db: f64,
    pub sae_ica_db: f64,
    pub sae_cpd_db: f64,
    pub sae_btd_db: f64,
    /// Largest principal angle (radians) between the Tucker mode-3 subspace
    /// and the true mixing subspace.
    pub tucker_subspace_angle: f64,
    pub cpd_fit: f64,
    pub btd_fit: f64,
    /// Correlations of BTD source estimates with the true sources.
    pub btd_source_correlation: Vec<f64>,
}

/// Runs all five methods on one problem.
pub fn run_bss(cfg: &BssConfig) -> Result<BssOutcome> {
    let p = BssProblem::generate(cfg)?;
    let a = &p.mixing;
    let pca = pca_mixing(&p.mixtures, 2);
    let ica = cumulant_ica_mixing(&p.mixtures, 2)?;
    let (cpd_c, cpd_fit) = cpd_mixing(&p.tensor, 2, cfg.seed)?;
    let (terms, btd_fit) = btd_terms(&p.tensor, 2, cfg.seed)?;
    let btd_c = btd_mixing(&terms);
    let shape = p.tensor.shape();
    let ranks = [4.min(shape[0]), 4.min(shape[1]), 2];
    let (tk, _) = hooi(&p.tensor, &ranks, &HooiOptions::default())?;
    let angles = principal_angles(&orthonormal_basis(a), &orthonormal_basis(&tk.factors[2]))?;
    let est_sources = recover_sources(&p.tensor, &btd_c)?;
    Ok(BssOutcome {
        sae_pca_db: compute_sae(a, &pca)?,
        sae_ica_db: compute_sae(a, &ica)?,
        sae_cpd_db: compute_sae(a, &cpd_c)?,
        sae_btd_db: compute_sae(a, &btd_c)?,
        tucker_subspace_angle: angles.into_iter().fold(0.0, f64::max),
        cpd_fit,
        btd_fit,
        btd_source_correlation: matched_source_correlations(&p.sources, &est_sources),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};

    #[test]
    fn default_grid_source_correlation() {
        let c = source_correlation(60, DEFAULT_SAMPLE_RATE);
        assert!((c - 0.35).abs() <= 0.1, "correlation {c}");
        // the sine stays short of one full period
        assert!(3.0 * 59.0 / DEFAULT_SAMPLE_RATE < 1.0);
    }

    #[test]
    fn hankel_geometry() {
        assert_eq!(hankel_extents(60), (24, 37));
        assert_eq!(hankel_extents(6), (3, 4));
        let p = BssProblem::generate(&BssConfig::default()).unwrap();
        assert_eq!(p.tensor.shape(), &[24, 37, 5]);
    }

    #[test]
    fn mixing_vectors_have_prescribed_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = mixing_matrix(5, &mut rng);
        assert!((norm(a.col(0)) - 1.0).abs() < 1e-12);
        assert!((norm(a.col(1)) - 1.0).abs() < 1e-12);
        assert!((dot(a.col(0), a.col(1)) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ica_separates_independent_nongaussian_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4000;
        let s = Matrix::from_fn(2, n, |r, k| {
            if r == 0 {
                ((k * 7919 % 1000) as f64 / 1000.0) - 0.5
            } else {
                (k as f64 * 0.37).sin().signum()
            }
        });
        let a = mixing_matrix(5, &mut rng);
        let x = a.matmul(&s).unwrap();
        let est = cumulant_ica_mixing(&x, 2).unwrap();
        assert!(compute_sae(&a, &est).unwrap() < -30.0);
    }

    #[test]
    fn noise_free_btd_recovers_mixing() {
        let out = run_bss(&BssConfig::default()).unwrap();
        assert!(out.sae_btd_db <= -50.0, "{out:?}");
        assert!(out.btd_source_correlation.iter().all(|&c| c >= 0.99));
        assert!(out.tucker_subspace_angle < 1e-6);
    }

    #[test]
    fn six_samples_suffice_without_noise() {
        for seed in 0..5 {
            let cfg = BssConfig { samples: 6, seed, ..Default::default() };
            let out = run_bss(&cfg).unwrap();
            assert!(out.btd_source_correlation.iter().all(|&c| c >= 0.99), "seed {seed}: {out:?}");
        }
    }
}
