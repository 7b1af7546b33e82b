//! Block term decomposition in multilinear rank-(L, L, 1) terms,
//! `X = Σ_r (A_r B_r^T) ∘ c_r`, plus reconstruction of general
//! rank-(L_r, M_r, N_r) terms given as small Tucker models.
//!
//! The ALS fitter cycles A, B, C. With the crate's unfolding convention
//! the three conditional problems are
//!
//! ```text
//! X_(0) = [A_1 .. A_R] [c_1 ⊗ B_1 .. c_R ⊗ B_R]^T
//! X_(1) = [B_1 .. B_R] [c_1 ⊗ A_1 .. c_R ⊗ A_R]^T
//! X_(2) = C [(B_1 ⊙ A_1) 1 .. (B_R ⊙ A_R) 1]^T
//! ```
//!
//! and each is solved exactly, so the fit never decreases within a run.
//! Updates are Gauss-Seidel: blocks are never updated concurrently.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{check_finite, fix_column_signs, leading_sign, lstsq, norm, Matrix};
use crate::metrics::{relative_fit_from, FitTrace};
use crate::par;
use crate::tensor::{kronecker, DenseTensor};
use crate::tucker::TuckerModel;

/// One rank-(L, L, 1) term `(A B^T) ∘ c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ll1Term {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vec<f64>,
}

impl Ll1Term {
    pub fn new(a: Matrix, b: Matrix, c: Vec<f64>) -> Result<Self> {
        if a.cols() != b.cols() || a.cols() == 0 {
            return shape_err(format!("block sizes differ: A has {} columns, B has {}", a.cols(), b.cols()));
        }
        if c.is_empty() {
            return invalid("empty mode-3 vector");
        }
        Ok(Self { a, b, c })
    }

    pub fn block_size(&self) -> usize {
        self.a.cols()
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.a.rows(), self.b.rows(), self.c.len()]
    }

    /// `A B^T`: the (unscaled) matrix carried by this term.
    pub fn matrix(&self) -> Matrix {
        self.a.matmul_t(&self.b).expect("equal block sizes")
    }

    pub fn tensor(&self) -> DenseTensor {
        let m = self.matrix();
        let data = kronecker(&Matrix::column_vector(&self.c), &Matrix::column_vector(m.data())).into_data();
        DenseTensor::new(self.shape().to_vec(), data).expect("consistent shape")
    }

    /// Moves the norm of `c` into `A` and makes the largest entry of `c`
    /// positive.
    pub fn canonical(&self) -> Ll1Term {
        let nc = norm(&self.c);
        if nc == 0.0 {
            return self.clone();
        }
        let s = leading_sign(&self.c);
        Ll1Term {
            a: self.a.scaled(nc * s),
            b: self.b.clone(),
            c: self.c.iter().map(|x| x * s / nc).collect(),
        }
    }
}

/// A block term: either rank-(L, L, 1) or a general Tucker block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BtdTerm {
    Ll1(Ll1Term),
    General(TuckerModel),
}

impl BtdTerm {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            BtdTerm::Ll1(t) => t.shape().to_vec(),
            BtdTerm::General(m) => m.shape(),
        }
    }

    pub fn tensor(&self) -> DenseTensor {
        match self {
            BtdTerm::Ll1(t) => t.tensor(),
            BtdTerm::General(m) => m.reconstruct(),
        }
    }
}

/// Sum of the terms' tensors.
pub fn btd_reconstruct(terms: &[BtdTerm]) -> Result<DenseTensor> {
    let first = terms.first().ok_or_else(|| crate::TensorError::InvalidArgument("no terms".into()))?;
    let shape = first.shape();
    let mut out = DenseTensor::zeros(&shape)?;
    for t in terms {
        if t.shape() != shape {
            return shape_err(format!("term of shape {:?} in a {:?} decomposition", t.shape(), shape));
        }
        out.add_assign(&t.tensor())?;
    }
    Ok(out)
}

/// Sum of rank-(L, L, 1) terms.
pub fn ll1_reconstruct(terms: &[Ll1Term]) -> Result<DenseTensor> {
    let wrapped: Vec<BtdTerm> = terms.iter().cloned().map(BtdTerm::Ll1).collect();
    btd_reconstruct(&wrapped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BtdOptions {
    pub max_iters: usize,
    /// Stop when the fit changes by less than this between sweeps.
    pub tol: f64,
    pub seed: u64,
    /// Independent starts; the first uses the truncated-MLSVD init, the rest
    /// seeded random factors. The best final fit wins.
    pub restarts: usize,
}

impl Default for BtdOptions {
    fn default() -> Self {
        Self { max_iters: 2000, tol: 1e-14, seed: 0, restarts: 4 }
    }
}

struct Ll1State {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

fn block_columns(r: usize, l: usize) -> Vec<usize> {
    (r * l..(r + 1) * l).collect()
}

impl Ll1State {
    fn terms(&self, l: usize) -> Vec<Ll1Term> {
        (0..self.c.cols())
            .map(|r| Ll1Term {
                a: self.a.select_columns(&block_columns(r, l)),
                b: self.b.select_columns(&block_columns(r, l)),
                c: self.c.col(r).to_vec(),
            })
            .collect()
    }

    /// `[c_1 ⊗ M_1 .. c_R ⊗ M_R]` for block matrix `m`.
    fn block_kron(c: &Matrix, m: &Matrix, l: usize) -> Matrix {
        let blocks: Vec<Matrix> = (0..c.cols())
            .map(|r| kronecker(&Matrix::column_vector(c.col(r)), &m.select_columns(&block_columns(r, l))))
            .collect();
        let refs: Vec<&Matrix> = blocks.iter().collect();
        Matrix::hcat(&refs).expect("equal row counts")
    }

    /// Columns `vec(A_r B_r^T)`.
    fn term_matrices(&self, l: usize) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..self.c.cols())
            .map(|r| {
                let a = self.a.select_columns(&block_columns(r, l));
                let b = self.b.select_columns(&block_columns(r, l));
                a.matmul_t(&b).expect("equal blocks").into_data()
            })
            .collect();
        Matrix::from_columns(&cols).expect("equal lengths")
    }

    fn sweep(&mut self, unfoldings: &[Matrix; 3], l: usize) -> Result<()> {
        let w = Self::block_kron(&self.c, &self.b, l);
        self.a = lstsq(&w, &unfoldings[0].transpose())?.transpose();
        let v = Self::block_kron(&self.c, &self.a, l);
        self.b = lstsq(&v, &unfoldings[1].transpose())?.transpose();
        let m = self.term_matrices(l);
        self.c = lstsq(&m, &unfoldings[2].transpose())?.transpose();
        // keep C's columns at unit norm to stop scale drifting into A
        for r in 0..self.c.cols() {
            let n = norm(self.c.col(r));
            if n > 0.0 {
                self.c.col_mut(r).iter_mut().for_each(|x| *x /= n);
                for j in block_columns(r, l) {
                    self.a.col_mut(j).iter_mut().for_each(|x| *x *= n);
                }
            }
        }
        Ok(())
    }
}

fn mlsvd_init(t: &DenseTensor, r: usize, l: usize, rng: &mut ChaCha8Rng) -> Result<Ll1State> {
    let basis = |n: usize, k: usize, rng: &mut ChaCha8Rng| -> Result<Matrix> {
        let e = t.shape()[n];
        let kk = k.min(e);
        let (mut u, _) = t.unfold(n)?.left_singular_vectors(kk)?;
        fix_column_signs(&mut u);
        if kk < k {
            u = Matrix::hcat(&[&u, &Matrix::random_normal(e, k - kk, rng)])?;
        }
        Ok(u)
    };
    let mut a = basis(0, r * l, rng)?;
    let mut b = basis(1, r * l, rng)?;
    let c = basis(2, r, rng)?;
    // random partition of the leading singular vectors into blocks
    let mut perm: Vec<usize> = (0..r * l).collect();
    perm.shuffle(rng);
    a = a.select_columns(&perm);
    perm.shuffle(rng);
    b = b.select_columns(&perm);
    Ok(Ll1State { a, b, c })
}

fn run_ll1(
    t: &DenseTensor,
    unfoldings: &[Matrix; 3],
    r: usize,
    l: usize,
    opts: &BtdOptions,
    start: usize,
) -> Result<(Vec<Ll1Term>, FitTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(start as u64));
    let [i, j, k] = [t.shape()[0], t.shape()[1], t.shape()[2]];
    let mut state = if start == 0 {
        mlsvd_init(t, r, l, &mut rng)?
    } else {
        Ll1State {
            a: Matrix::random_normal(i, r * l, &mut rng),
            b: Matrix::random_normal(j, r * l, &mut rng),
            c: Matrix::random_normal(k, r, &mut rng),
        }
    };
    let norm_x = t.frobenius_norm();
    let mut trace = FitTrace::default();
    for _ in 0..opts.max_iters {
        state.sweep(unfoldings, l)?;
        let recon = ll1_reconstruct(&state.terms(l))?;
        let fit = relative_fit_from(t.sub(&recon)?.frobenius_norm(), norm_x);
        let prev = trace.fits.last().copied();
        trace.fits.push(fit);
        if let Some(p) = prev {
            if (fit - p).abs() < opts.tol || fit >= 1.0 - 1e-15 {
                trace.converged = true;
                break;
            }
        }
    }
    Ok((state.terms(l), trace))
}

/// Fits `r` rank-(l, l, 1) terms to an order-3 tensor by ALS.
///
/// Returned terms are canonical (unit-norm `c_r`, scale in `A_r`) and
/// sorted by decreasing term norm. The trace belongs to the winning start.
pub fn btd_ll1_als(t: &DenseTensor, r: usize, l: usize, opts: &BtdOptions) -> Result<(Vec<Ll1Term>, FitTrace)> {
    if t.order() != 3 {
        return invalid(format!("rank-(L,L,1) BTD needs an order-3 tensor, got order {}", t.order()));
    }
    if r == 0 || l == 0 {
        return invalid("number of terms and block size must be positive");
    }
    check_finite(t.data())?;
    let unfoldings = [t.unfold(0)?, t.unfold(1)?, t.unfold(2)?];
    let runs = par::map_indices(opts.restarts.max(1), |s| run_ll1(t, &unfoldings, r, l, opts, s));
    let mut best: Option<(Vec<Ll1Term>, FitTrace)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().map_or(true, |b| run.1.final_fit() > b.1.final_fit()) {
            best = Some(run);
        }
    }
    let (terms, trace) = best.expect("at least one start");
    let mut terms: Vec<Ll1Term> = terms.iter().map(Ll1Term::canonical).collect();
    terms.sort_by(|x, y| y.matrix().frobenius_norm().total_cmp(&x.matrix().frobenius_norm()));
    Ok((terms, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormal_basis, principal_angles};
    use crate::tensor::outer;

    fn random_terms(shape: [usize; 3], r: usize, l: usize, seed: u64) -> Vec<Ll1Term> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..r)
            .map(|_| {
                Ll1Term::new(
                    Matrix::random_normal(shape[0], l, &mut rng),
                    Matrix::random_normal(shape[1], l, &mut rng),
                    Matrix::random_normal(shape[2], 1, &mut rng).into_data(),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn single_l1_term_is_rank_one() {
        let t = Ll1Term::new(
            Matrix::column_vector(&[1., 2.]),
            Matrix::column_vector(&[3., 4., 5.]),
            vec![1., -1.],
        )
        .unwrap();
        assert_eq!(t.tensor(), outer(&[&[1., 2.], &[3., 4., 5.], &[1., -1.]]).unwrap());
    }

    #[test]
    fn frontal_slices_scale_the_term_matrix() {
        let term = &random_terms([4, 5, 3], 1, 2, 1)[0];
        let t = term.tensor();
        let m = term.matrix();
        for k in 0..3 {
            assert!(t.frontal_slice(k).unwrap().max_abs_diff(&m.scaled(term.c[k])) < 1e-14);
        }
    }

    #[test]
    fn general_term_with_block_diagonal_core_matches_ll1() {
        let term = random_terms([4, 5, 3], 1, 2, 2).remove(0);
        let mut core = DenseTensor::zeros(&[2, 2, 1]).unwrap();
        core.set(&[0, 0, 0], 1.0).unwrap();
        core.set(&[1, 1, 0], 1.0).unwrap();
        let g = TuckerModel::new(core, vec![term.a.clone(), term.b.clone(), Matrix::column_vector(&term.c)]).unwrap();
        let d = btd_reconstruct(&[BtdTerm::General(g)]).unwrap();
        assert!(d.max_abs_diff(&term.tensor()) < 1e-12);
    }

    #[test]
    fn reconstruction_is_permutation_invariant() {
        let terms = random_terms([3, 4, 5], 3, 2, 3);
        let a = ll1_reconstruct(&terms).unwrap();
        let mut rev = terms.clone();
        rev.reverse();
        assert!(a.max_abs_diff(&ll1_reconstruct(&rev).unwrap()) < 1e-12);
    }

    #[test]
    fn als_recovers_two_ll1_terms() {
        let truth = random_terms([6, 7, 5], 2, 2, 4);
        let t = ll1_reconstruct(&truth).unwrap();
        let (est, trace) = btd_ll1_als(&t, 2, 2, &BtdOptions::default()).unwrap();
        assert!(trace.final_fit() >= 1.0 - 1e-8, "fit {}", trace.final_fit());
        assert!(trace.is_monotone(1e-10));
        for tr in &truth {
            let qt = orthonormal_basis(&tr.a);
            let best = est
                .iter()
                .map(|e| principal_angles(&qt, &orthonormal_basis(&e.a)).unwrap().into_iter().fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-4, "subspace angle {best}");
        }
        for e in &est {
            assert!((norm(&e.c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn block_size_one_is_cpd() {
        let truth = random_terms([5, 5, 5], 3, 1, 5);
        let t = ll1_reconstruct(&truth).unwrap();
        let (_, trace) = btd_ll1_als(&t, 3, 1, &BtdOptions::default()).unwrap();
        assert!(trace.final_fit() >= 1.0 - 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        let t = DenseTensor::zeros(&[2, 2]).unwrap();
        assert!(btd_ll1_als(&t, 1, 1, &BtdOptions::default()).is_err());
        let t3 = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        assert!(btd_ll1_als(&t3, 0, 1, &BtdOptions::default()).is_err());
        let mut bad = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        bad.data_mut()[3] = f64::INFINITY;
        assert!(btd_ll1_als(&bad, 1, 1, &BtdOptions::default()).is_err());
    }
}
