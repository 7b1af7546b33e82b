//! Linked multiway component analysis: a family of Tucker models
//! `X_k ≈ G_k ×_1 B^(1,k) ⋯ ×_N B^(N,k)` whose factors split as
//! `B^(n,k) = [B_C^(n) | B_I^(n,k)]`, with the common block `B_C^(n)` shared
//! by every dataset.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result};
use crate::linalg::{check_finite, fix_column_signs, norm, Matrix};
use crate::tensor::DenseTensor;

/// Canonical-correlation level above which a direction counts as common
/// in [`detect_common`].
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.9;

/// Fraction of the per-class sample count used as the number of common
/// features by the classifier.
pub const DEFAULT_COMMON_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedModel {
    common: Vec<Matrix>,
    individual: Vec<Vec<Matrix>>,
    cores: Vec<DenseTensor>,
}

impl LinkedModel {
    pub fn datasets(&self) -> usize {
        self.cores.len()
    }

    pub fn order(&self) -> usize {
        self.common.len()
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.order()).map(|n| self.common[n].cols() + self.individual[0][n].cols()).collect()
    }

    pub fn common_counts(&self) -> Vec<usize> {
        self.common.iter().map(Matrix::cols).collect()
    }

    /// Shared block of mode `n`.
    pub fn common(&self, n: usize) -> &Matrix {
        &self.common[n]
    }

    /// Individual block of dataset `k`, mode `n`.
    pub fn individual(&self, k: usize, n: usize) -> &Matrix {
        &self.individual[k][n]
    }

    pub fn core(&self, k: usize) -> &DenseTensor {
        &self.cores[k]
    }

    /// Full factor `[B_C | B_I]` of dataset `k`, mode `n`.
    pub fn factor(&self, k: usize, n: usize) -> Matrix {
        Matrix::hcat(&[&self.common[n], &self.individual[k][n]]).expect("blocks share the row count")
    }

    pub fn factors(&self, k: usize) -> Vec<Matrix> {
        (0..self.order()).map(|n| self.factor(k, n)).collect()
    }

    pub fn reconstruct(&self, k: usize) -> Result<DenseTensor> {
        self.cores[k].multilinear_product(&self.factors(k))
    }

    /// `1 - sqrt(Σ_k ||X_k - X̂_k||²) / sqrt(Σ_k ||X_k||²)`.
    pub fn relative_fit(&self, tensors: &[DenseTensor]) -> Result<f64> {
        if tensors.len() != self.datasets() {
            return shape_err(format!("model has {} datasets, got {}", self.datasets(), tensors.len()));
        }
        let (mut err, mut total) = (0.0, 0.0);
        for (k, x) in tensors.iter().enumerate() {
            err += x.sub(&self.reconstruct(k)?)?.frobenius_norm().powi(2);
            total += x.frobenius_norm().powi(2);
        }
        Ok(if total == 0.0 { 1.0 } else { 1.0 - (err / total).sqrt() })
    }

    /// Largest deviation of any factor block from orthonormality.
    pub fn orthonormality_error(&self) -> f64 {
        let dev = |m: &Matrix| m.gram().max_abs_diff(&Matrix::identity(m.cols()));
        let mut worst = self.common.iter().map(dev).fold(0.0, f64::max);
        for k in 0..self.datasets() {
            for n in 0..self.order() {
                worst = worst.max(dev(&self.factor(k, n)));
            }
        }
        worst
    }

    /// Replaces `B_I^(n,k)` by `B_I^(n,k) Q` for an orthogonal `Q` and
    /// counter-rotates the core so the reconstruction is unchanged.
    pub fn rotate_individual(&mut self, k: usize, n: usize, q: &Matrix) -> Result<()> {
        let block = &self.individual[k][n];
        if q.shape() != (block.cols(), block.cols()) {
            return shape_err(format!("rotation must be {0}x{0}", block.cols()));
        }
        let c = self.common[n].cols();
        let rank = c + block.cols();
        let mut full = Matrix::identity(rank);
        for i in 0..q.rows() {
            for j in 0..q.cols() {
                full[(c + i, c + j)] = q[(i, j)];
            }
        }
        self.individual[k][n] = block.matmul(q)?;
        self.cores[k] = self.cores[k].mode_n_product(&full.transpose(), n)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmwcaOptions {
    /// Alternating refinement sweeps after initialization.
    pub sweeps: usize,
}

impl Default for LmwcaOptions {
    fn default() -> Self {
        Self { sweeps: 2 }
    }
}

fn check_inputs(tensors: &[DenseTensor], ranks: &[usize], common: &[usize]) -> Result<()> {
    if tensors.len() < 2 {
        return invalid(format!("linked analysis needs at least 2 datasets, got {}", tensors.len()));
    }
    let shape = tensors[0].shape();
    for (k, t) in tensors.iter().enumerate() {
        if t.shape() != shape {
            return shape_err(format!("dataset {k} has shape {:?}, expected {shape:?}", t.shape()));
        }
        check_finite(t.data())?;
    }
    if ranks.len() != shape.len() || common.len() != shape.len() {
        return shape_err(format!(
            "order-{} data needs {0} ranks and {0} common counts, got {} and {}",
            shape.len(),
            ranks.len(),
            common.len()
        ));
    }
    for n in 0..shape.len() {
        if ranks[n] == 0 || ranks[n] > shape[n] {
            return invalid(format!("rank {} in mode {n} must lie in 1..={}", ranks[n], shape[n]));
        }
        if common[n] > ranks[n] {
            return invalid(format!("common count {} exceeds rank {} in mode {n}", common[n], ranks[n]));
        }
    }
    Ok(())
}

fn leading_basis(m: &Matrix, k: usize) -> Result<Matrix> {
    let (mut u, _) = m.left_singular_vectors(k)?;
    fix_column_signs(&mut u);
    Ok(u)
}

/// `(I - Q Qᵀ) M` for `Q` with orthonormal columns.
fn project_out(q: &Matrix, m: &Matrix) -> Result<Matrix> {
    if q.cols() == 0 {
        return Ok(m.clone());
    }
    m.sub(&q.matmul(&q.t_matmul(m)?)?)
}

/// Singular values of the stacked per-dataset orthonormal bases. A
/// direction lying in all `K` subspaces has singular value `sqrt(K)`.
fn stacked_bases(bases: &[Matrix], c: usize) -> Result<(Matrix, Vec<f64>)> {
    let refs: Vec<&Matrix> = bases.iter().collect();
    let stacked = Matrix::hcat(&refs)?;
    let (mut u, s) = stacked.left_singular_vectors(c)?;
    fix_column_signs(&mut u);
    Ok((u, s))
}

fn individual_blocks(common: &Matrix, unfoldings: &[Matrix], r: usize) -> Result<Vec<Matrix>> {
    let rows = common.rows();
    unfoldings
        .iter()
        .map(|w| {
            if r == common.cols() {
                Ok(Matrix::zeros(rows, 0))
            } else {
                let resid = project_out(common, w)?;
                let u = leading_basis(&resid, r - common.cols())?;
                // re-project to keep the block orthogonal to B_C at rounding level
                orthonormal_columns(&project_out(common, &u)?)
            }
        })
        .collect()
}

fn orthonormal_columns(m: &Matrix) -> Result<Matrix> {
    let (q, r) = m.qr_thin();
    let mut q = q.leading_columns(m.cols());
    // keep the column signs of the input
    for j in 0..q.cols() {
        if r[(j, j)] < 0.0 {
            q.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(q)
}

/// Fits a linked model with the default number of refinement sweeps.
pub fn lmwca_fit(tensors: &[DenseTensor], ranks: &[usize], common: &[usize]) -> Result<LinkedModel> {
    lmwca_fit_with(tensors, ranks, common, &LmwcaOptions::default())
}

/// Initialization: per mode, each dataset's rank-`R_n` dominant subspace
/// is computed; the common block is the leading `C_n` directions of the
/// stacked bases (the directions closest to all subspaces at once), and
/// each individual block spans the dominant part of that dataset's
/// unfolding orthogonal to the common block.
///
/// Refinement sweeps mirror HOOI: mode `n` is updated from the data
/// projected on all other current factors. The common block is taken from
/// the stacked projected unfoldings with each dataset's individual part
/// removed, then the individual blocks are recomputed against it. With
/// `C = 0` this is independent HOOI on each dataset; with `C = R` it is HOOI
/// on the datasets concatenated along a new mode.
pub fn lmwca_fit_with(
    tensors: &[DenseTensor],
    ranks: &[usize],
    common: &[usize],
    opts: &LmwcaOptions,
) -> Result<LinkedModel> {
    check_inputs(tensors, ranks, common)?;
    let order = ranks.len();
    let kk = tensors.len();
    let mut shared = Vec::with_capacity(order);
    let mut individual = vec![Vec::with_capacity(order); kk];
    for n in 0..order {
        let unfoldings = tensors.iter().map(|t| t.unfold(n)).collect::<Result<Vec<_>>>()?;
        let rows = unfoldings[0].rows();
        let b_c = if common[n] == 0 {
            Matrix::zeros(rows, 0)
        } else if common[n] == ranks[n] {
            let refs: Vec<&Matrix> = unfoldings.iter().collect();
            leading_basis(&Matrix::hcat(&refs)?, common[n])?
        } else {
            let bases = unfoldings.iter().map(|w| leading_basis(w, ranks[n])).collect::<Result<Vec<_>>>()?;
            stacked_bases(&bases, common[n])?.0
        };
        for (k, b) in individual_blocks(&b_c, &unfoldings, ranks[n])?.into_iter().enumerate() {
            individual[k].push(b);
        }
        shared.push(b_c);
    }
    let mut model = LinkedModel { common: shared, individual, cores: Vec::new() };

    for _ in 0..opts.sweeps {
        for n in 0..order {
            let projected = (0..kk)
                .map(|k| {
                    let mut y = tensors[k].clone();
                    for m in 0..order {
                        if m != n {
                            y = y.mode_n_product(&model.factor(k, m).transpose(), m)?;
                        }
                    }
                    y.unfold(n)
                })
                .collect::<Result<Vec<_>>>()?;
            if common[n] > 0 {
                let cleaned = (0..kk)
                    .map(|k| project_out(&model.individual[k][n], &projected[k]))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&Matrix> = cleaned.iter().collect();
                model.common[n] = leading_basis(&Matrix::hcat(&refs)?, common[n])?;
            }
            let blocks = individual_blocks(&model.common[n], &projected, ranks[n])?;
            for (k, b) in blocks.into_iter().enumerate() {
                model.individual[k][n] = b;
            }
        }
    }
    model.cores = (0..kk)
        .map(|k| tensors[k].multilinear_product_t(&model.factors(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(model)
}

/// Canonical correlations, per mode, between the datasets' rank-`R_n`
/// dominant subspaces, averaged over dataset pairs: the `i`-th value is
/// `(σ_i² - 1) / (K - 1)` with `σ_i` the singular values of the stacked
/// bases. For two datasets these are exactly the cosines of the principal
/// angles.
pub fn mode_correlations(tensors: &[DenseTensor], ranks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let zeros = vec![0; ranks.len()];
    check_inputs(tensors, ranks, &zeros)?;
    let kk = tensors.len() as f64;
    (0..ranks.len())
        .map(|n| {
            let bases = tensors
                .iter()
                .map(|t| leading_basis(&t.unfold(n)?, ranks[n]))
                .collect::<Result<Vec<_>>>()?;
            let (_, s) = stacked_bases(&bases, ranks[n])?;
            Ok(s.iter().map(|x| ((x * x - 1.0) / (kk - 1.0)).clamp(0.0, 1.0)).collect())
        })
        .collect()
}

/// Number of common components per mode: directions whose canonical
/// correlation reaches `threshold`.
pub fn detect_common(tensors: &[DenseTensor], ranks: &[usize], threshold: f64) -> Result<Vec<usize>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return invalid(format!("correlation threshold must lie in (0, 1], got {threshold}"));
    }
    Ok(mode_correlations(tensors, ranks)?
        .iter()
        .map(|c| c.iter().filter(|&&x| x >= threshold - 1e-12).count())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: usize,
    /// Per-class canonical correlation between the test sample and the
    /// class's common subspace.
    pub scores: Vec<f64>,
}

/// Common feature subspaces, one per class. Training tensors carry samples
/// along their last mode; all other modes are features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkedClassifier {
    feature_shape: Vec<usize>,
    bases: Vec<Matrix>,
}

fn as_feature_matrix(t: &DenseTensor) -> Result<DenseTensor> {
    let shape = t.shape();
    if shape.len() < 2 {
        return shape_err("training tensors need a feature mode and a sample mode");
    }
    let samples = shape[shape.len() - 1];
    let features = t.len() / samples.max(1);
    t.clone().reshape(vec![features, samples])
}

impl LinkedClassifier {
    pub fn train(groups: &[Vec<DenseTensor>], common_fraction: f64) -> Result<Self> {
        if groups.len() < 2 {
            return invalid(format!("classification needs at least 2 classes, got {}", groups.len()));
        }
        if !(common_fraction > 0.0 && common_fraction <= 1.0) {
            return invalid(format!("common fraction must lie in (0, 1], got {common_fraction}"));
        }
        let first = groups[0].first().ok_or_else(|| crate::TensorError::InvalidArgument("class 0 is empty".into()))?;
        let shape = first.shape().to_vec();
        if shape.len() < 2 {
            return shape_err("training tensors need a feature mode and a sample mode");
        }
        let feature_shape = shape[..shape.len() - 1].to_vec();
        let bases = groups
            .iter()
            .enumerate()
            .map(|(c, group)| {
                if group.len() < 2 {
                    return invalid(format!("class {c} has {} training tensor(s), need at least 2", group.len()));
                }
                if let Some(t) = group.iter().find(|t| t.shape()[..t.order().saturating_sub(1)] != feature_shape[..]) {
                    return shape_err(format!("class {c} tensor has shape {:?}, features must be {feature_shape:?}", t.shape()));
                }
                let mats = group.iter().map(as_feature_matrix).collect::<Result<Vec<_>>>()?;
                let [d, s] = [mats[0].shape()[0], mats[0].shape()[1]];
                let rank = d.min(s);
                let c_n = ((common_fraction * s as f64).round() as usize).clamp(1, rank);
                let model = lmwca_fit(&mats, &[rank, s], &[c_n, 0])?;
                Ok(model.common(0).clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { feature_shape, bases })
    }

    /// Classifier from precomputed per-class bases with orthonormal columns,
    /// each with `prod(feature_shape)` rows.
    pub fn from_bases(feature_shape: Vec<usize>, bases: Vec<Matrix>) -> Result<Self> {
        let d: usize = feature_shape.iter().product();
        if bases.len() < 2 {
            return invalid(format!("classification needs at least 2 classes, got {}", bases.len()));
        }
        if let Some(b) = bases.iter().find(|b| b.rows() != d || b.cols() == 0) {
            return shape_err(format!("basis is {}x{}, expected {d} rows", b.rows(), b.cols()));
        }
        Ok(Self { feature_shape, bases })
    }

    pub fn classes(&self) -> usize {
        self.bases.len()
    }

    pub fn common_basis(&self, class: usize) -> &Matrix {
        &self.bases[class]
    }

    /// Scores a sample (feature-shaped tensor) against every class; the
    /// label is the highest score, ties going to the lowest class index.
    pub fn classify(&self, test: &DenseTensor) -> Result<Classification> {
        if test.shape() != self.feature_shape.as_slice() {
            return shape_err(format!("test sample has shape {:?}, expected {:?}", test.shape(), self.feature_shape));
        }
        check_finite(test.data())?;
        let x = test.data();
        let nx = norm(x);
        if nx == 0.0 {
            return invalid("test sample is zero");
        }
        let scores = self
            .bases
            .iter()
            .map(|b| Ok((norm(&b.t_matvec(x)?) / nx).min(1.0)))
            .collect::<Result<Vec<f64>>>()?;
        let mut label = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[label] {
                label = c;
            }
        }
        Ok(Classification { label, scores })
    }
}

pub fn lmwca_classify(groups: &[Vec<DenseTensor>], test: &DenseTensor, common_fraction: f64) -> Result<Classification> {
    LinkedClassifier::train(groups, common_fraction)?.classify(test)
}

/// Synthetic classes: each class owns a random common feature subspace,
/// every training tensor adds its own individual directions, and test
/// samples mix the class subspace with fresh random directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTask {
    pub feature_shape: Vec<usize>,
    pub samples: usize,
    pub classes: usize,
    pub tensors_per_class: usize,
    pub common_dims: usize,
    pub tests_per_class: usize,
    pub noise: f64,
}

impl Default for ClassificationTask {
    fn default() -> Self {
        Self {
            feature_shape: vec![8, 8],
            samples: 10,
            classes: 2,
            tensors_per_class: 2,
            common_dims: 8,
            tests_per_class: 5,
            noise: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassificationData {
    pub train: Vec<Vec<DenseTensor>>,
    pub test: Vec<(DenseTensor, usize)>,
}

impl ClassificationTask {
    fn check(&self) -> Result<usize> {
        let d: usize = self.feature_shape.iter().product();
        if self.feature_shape.is_empty() || d == 0 || self.samples == 0 {
            return invalid("feature shape and sample count must be nonzero");
        }
        if self.common_dims > self.samples || self.common_dims == 0 || self.common_dims > d {
            return invalid(format!("common dims {} must lie in 1..={}", self.common_dims, self.samples.min(d)));
        }
        if self.classes < 2 || self.tensors_per_class < 2 {
            return invalid("need at least 2 classes with 2 tensors each");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return invalid(format!("noise must be nonnegative, got {}", self.noise));
        }
        Ok(d)
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ClassificationData> {
        let d = self.check()?;
        let indiv = self.samples - self.common_dims;
        let mut shape = self.feature_shape.clone();
        shape.push(self.samples);
        let gauss = |rng: &mut R, r: usize, c: usize| Matrix::random_normal(r, c, rng);
        let mut train = Vec::with_capacity(self.classes);
        let mut test = Vec::new();
        for class in 0..self.classes {
            let a_c = Matrix::random_orthonormal(d, self.common_dims, rng);
            let mut group = Vec::with_capacity(self.tensors_per_class);
            for _ in 0..self.tensors_per_class {
                let mut x = a_c.matmul(&gauss(rng, self.common_dims, self.samples))?;
                if indiv > 0 {
                    let a_i = Matrix::random_orthonormal(d, indiv, rng);
                    x = x.add(&a_i.matmul(&gauss(rng, indiv, self.samples))?)?;
                }
                x = x.add(&gauss(rng, d, self.samples).scaled(self.noise))?;
                group.push(DenseTensor::new(shape.clone(), x.into_data())?);
            }
            train.push(group);
            for _ in 0..self.tests_per_class {
                let mut x = a_c.matvec(&gauss(rng, self.common_dims, 1).into_data())?;
                if indiv > 0 {
                    let extra = Matrix::random_orthonormal(d, indiv, rng);
                    let part = extra.matvec(&gauss(rng, indiv, 1).into_data())?;
                    x.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                }
                for v in x.iter_mut() {
                    let e: f64 = StandardNormal.sample(rng);
                    *v += self.noise * e;
                }
                test.push((DenseTensor::new(self.feature_shape.clone(), x)?, class));
            }
        }
        Ok(ClassificationData { train, test })
    }
}

/// Fraction of correctly labeled test samples over `trials` independent
/// draws of `task`.
pub fn classification_accuracy(task: &ClassificationTask, trials: usize, seed: u64, common_fraction: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut hits, mut total) = (0usize, 0usize);
    for _ in 0..trials {
        let data = task.generate(&mut rng)?;
        let clf = LinkedClassifier::train(&data.train, common_fraction)?;
        for (x, label) in &data.test {
            hits += usize::from(clf.classify(x)?.label == *label);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hits as f64 / total as f64 })
}
