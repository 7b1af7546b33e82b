//! Kronecker-structured compressed sensing. Measurements follow
//! `Y = G ×_1 W_1 ×_2 W_2 ... ×_N W_N` with per-mode dictionaries
//! `W_n = Φ_n B_n` and a sparse core `G`; the global operator
//! `W_N ⊗ ... ⊗ W_1` is never formed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape_err, Result, TensorError};
use crate::index::{increment, linear_index, multi_index, numel};
use crate::linalg::{dot, Matrix};
use crate::metrics::compute_psnr;
use crate::tensor::{outer, DenseTensor};

/// Per-mode dictionaries with their sensing and basis factors kept apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KronDictionary {
    sensing: Vec<Matrix>,
    bases: Vec<Matrix>,
    composite: Vec<Matrix>,
}

impl KronDictionary {
    /// `W_n = sensing[n] * bases[n]`.
    pub fn new(sensing: Vec<Matrix>, bases: Vec<Matrix>) -> Result<Self> {
        if sensing.is_empty() || sensing.len() != bases.len() {
            return shape_err("need one sensing matrix and one basis per mode");
        }
        let composite = sensing
            .iter()
            .zip(&bases)
            .map(|(p, b)| p.matmul(b))
            .collect::<Result<Vec<_>>>()?;
        for (n, w) in composite.iter().enumerate() {
            if w.rows() > w.cols() {
                return shape_err(format!("mode {n}: {} measurements exceed {} atoms", w.rows(), w.cols()));
            }
            if !w.is_finite() {
                return Err(TensorError::NonFinite);
            }
        }
        Ok(Self { sensing, bases, composite })
    }

    /// Dictionary with identity bases.
    pub fn from_matrices(w: Vec<Matrix>) -> Result<Self> {
        let bases = w.iter().map(|m| Matrix::identity(m.cols())).collect();
        Self::new(w, bases)
    }

    pub fn order(&self) -> usize {
        self.composite.len()
    }

    pub fn modes(&self) -> &[Matrix] {
        &self.composite
    }

    pub fn sensing(&self) -> &[Matrix] {
        &self.sensing
    }

    pub fn bases(&self) -> &[Matrix] {
        &self.bases
    }

    /// Core extents `(I_1, .., I_N)`.
    pub fn core_shape(&self) -> Vec<usize> {
        self.composite.iter().map(Matrix::cols).collect()
    }

    /// Measurement extents `(M_1, .., M_N)`.
    pub fn measurement_shape(&self) -> Vec<usize> {
        self.composite.iter().map(Matrix::rows).collect()
    }

    /// Global column for the core multi-index `idx`, as a vectorized
    /// outer product of per-mode columns.
    fn atom(&self, idx: &[usize]) -> Vec<f64> {
        let cols: Vec<&[f64]> = self.composite.iter().zip(idx).map(|(w, &i)| w.col(i)).collect();
        outer(&cols).expect("non-empty columns").into_data()
    }
}

/// Sparse core: explicit nonzero entries keyed by multi-index.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseCore {
    shape: Vec<usize>,
    entries: BTreeMap<Vec<usize>, f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseCoreDoc {
    shape: Vec<usize>,
    indices: Vec<Vec<usize>>,
    values: Vec<f64>,
}

impl Serialize for SparseCore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SparseCoreDoc {
            shape: self.shape.clone(),
            indices: self.entries.keys().cloned().collect(),
            values: self.entries.values().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SparseCore {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SparseCoreDoc::deserialize(d)?;
        if doc.indices.len() != doc.values.len() {
            return Err(serde::de::Error::custom("indices and values differ in length"));
        }
        let mut core = SparseCore::new(doc.shape).map_err(serde::de::Error::custom)?;
        for (i, v) in doc.indices.into_iter().zip(doc.values) {
            core.insert(i, v).map_err(serde::de::Error::custom)?;
        }
        Ok(core)
    }
}

impl SparseCore {
    pub fn new(shape: Vec<usize>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return shape_err(format!("invalid core shape {shape:?}"));
        }
        Ok(Self { shape, entries: BTreeMap::new() })
    }

    /// Nonzero entries of a dense tensor.
    pub fn from_dense(t: &DenseTensor) -> Self {
        let shape = t.shape().to_vec();
        let entries = t
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (multi_index(&shape, k), v))
            .collect();
        Self { shape, entries }
    }

    /// Sets an entry; zero values remove it.
    pub fn insert(&mut self, idx: Vec<usize>, value: f64) -> Result<()> {
        if idx.len() != self.shape.len() || idx.iter().zip(&self.shape).any(|(i, s)| i >= s) {
            return Err(TensorError::IndexOutOfRange { index: idx, shape: self.shape.clone() });
        }
        if !value.is_finite() {
            return Err(TensorError::NonFinite);
        }
        if value == 0.0 {
            self.entries.remove(&idx);
        } else {
            self.entries.insert(idx, value);
        }
        Ok(())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of stored nonzeros.
    pub fn sparsity(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries.get(idx).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn to_dense(&self) -> DenseTensor {
        let mut t = DenseTensor::zeros(&self.shape).expect("validated shape");
        for (idx, v) in &self.entries {
            t.data_mut()[linear_index(&self.shape, idx)] = *v;
        }
        t
    }
}

fn check_core(d: &KronDictionary, shape: &[usize]) -> Result<()> {
    if shape != d.core_shape().as_slice() {
        return shape_err(format!("core shape {shape:?} does not match dictionary {:?}", d.core_shape()));
    }
    Ok(())
}

/// Measurements `G ×_1 W_1 ... ×_N W_N` of a sparse core.
pub fn kron_apply(d: &KronDictionary, g: &SparseCore) -> Result<DenseTensor> {
    kron_apply_dense(d, &g.to_dense())
}

/// Same as [`kron_apply`] for a dense core.
pub fn kron_apply_dense(d: &KronDictionary, g: &DenseTensor) -> Result<DenseTensor> {
    check_core(d, g.shape())?;
    g.multilinear_product(&d.composite)
}

/// `Y ×_1 W_1^T ... ×_N W_N^T`.
pub fn kron_adjoint_apply(d: &KronDictionary, y: &DenseTensor) -> Result<DenseTensor> {
    if y.shape() != d.measurement_shape().as_slice() {
        return shape_err(format!(
            "measurement shape {:?} does not match dictionary {:?}",
            y.shape(),
            d.measurement_shape()
        ));
    }
    y.multilinear_product_t(&d.composite)
}

/// Largest absolute cosine between two distinct columns.
pub fn mutual_coherence(m: &Matrix) -> Result<f64> {
    let norms: Vec<f64> = m.columns().map(|c| dot(c, c).sqrt()).collect();
    if norms.iter().any(|&n| n == 0.0) {
        return invalid("mutual coherence of a matrix with a zero column");
    }
    let g = m.gram();
    let mut mu: f64 = 0.0;
    for j in 0..m.cols() {
        for i in 0..j {
            mu = mu.max((g[(i, j)] / (norms[i] * norms[j])).abs());
        }
    }
    Ok(mu.min(1.0))
}

/// Outcome of a greedy recovery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub core: SparseCore,
    /// Residual norm after each iteration.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
}

impl Recovery {
    pub fn final_residual(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(f64::NAN)
    }
}

/// Incrementally maintained thin QR of the active atoms.
struct ActiveQr {
    q: Vec<Vec<f64>>,
    /// Upper-triangular `R`, stored by column.
    r: Vec<Vec<f64>>,
}

impl ActiveQr {
    /// Appends an atom; returns `false` when it is numerically dependent on
    /// the existing ones.
    fn push(&mut self, atom: &[f64]) -> bool {
        let mut v = atom.to_vec();
        let mut coef = vec![0.0; self.q.len()];
        // Gram-Schmidt, twice
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, &v);
                coef[k] += c;
                v.iter_mut().zip(qk).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv <= 1e-12 * dot(atom, atom).sqrt() {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        coef.push(nv);
        self.q.push(v);
        self.r.push(coef);
        true
    }

    /// Solves `R x = Q^T y`.
    fn solve(&self, y: &[f64]) -> Vec<f64> {
        let k = self.q.len();
        let mut x: Vec<f64> = self.q.iter().map(|q| dot(q, y)).collect();
        for j in (0..k).rev() {
            x[j] /= self.r[j][j];
            for i in 0..j {
                x[i] -= self.r[j][i] * x[j];
            }
        }
        x
    }
}

/// Index of the largest `|c|`, lowest linear index on ties, skipping `taken`.
fn argmax_abs(c: &[f64], taken: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in c.iter().enumerate() {
        if taken.contains(&k) {
            continue;
        }
        if best.map_or(true, |(_, b)| v.abs() > b) {
            best = Some((k, v.abs()));
        }
    }
    best.map(|(k, _)| k)
}

/// Kronecker-OMP: `k` greedy iterations, each selecting the core entry
/// whose atom best correlates with the residual and refitting all selected
/// coefficients by least squares. Stops early only if the residual becomes
/// exactly zero or no admissible atom remains.
pub fn kronecker_omp(y: &DenseTensor, d: &KronDictionary, k: usize) -> Result<Recovery> {
    kronecker_omp_until(y, d, k, 0.0)
}

/// [`kronecker_omp`] that also stops once `||r|| <= rel_tol * ||y||`.
pub fn kronecker_omp_until(y: &DenseTensor, d: &KronDictionary, k: usize, rel_tol: f64) -> Result<Recovery> {
    let m = numel(&d.measurement_shape());
    if k > m {
        return invalid(format!("sparsity {k} exceeds the {m} available measurements"));
    }
    let core_shape = d.core_shape();
    let y_norm = y.frobenius_norm();
    if y.shape() != d.measurement_shape().as_slice() {
        return shape_err(format!("measurement shape {:?} does not match dictionary", y.shape()));
    }
    let mut residual = y.clone();
    let mut qr = ActiveQr { q: Vec::new(), r: Vec::new() };
    let mut selected: Vec<usize> = Vec::new();
    let mut rejected: Vec<usize> = Vec::new();
    let mut norms = Vec::with_capacity(k);
    while selected.len() < k {
        let rn = residual.frobenius_norm();
        if rn == 0.0 || rn <= rel_tol * y_norm {
            break;
        }
        let corr = kron_adjoint_apply(d, &residual)?;
        let taken: Vec<usize> = selected.iter().chain(&rejected).copied().collect();
        let Some(best) = argmax_abs(corr.data(), &taken) else { break };
        let atom = d.atom(&multi_index(&core_shape, best));
        if !qr.push(&atom) {
            rejected.push(best);
            continue;
        }
        selected.push(best);
        let q = qr.q.last().expect("just pushed");
        let c = dot(q, residual.data());
        residual.data_mut().iter_mut().zip(q).for_each(|(x, v)| *x -= c * v);
        norms.push(residual.frobenius_norm());
        log::debug!("komp iteration {}: atom {best}, residual {:.3e}", selected.len(), norms[norms.len() - 1]);
    }
    let coef = qr.solve(y.data());
    let mut core = SparseCore::new(core_shape.clone())?;
    for (&lin, v) in selected.iter().zip(coef) {
        core.insert(multi_index(&core_shape, lin), v)?;
    }
    Ok(Recovery { core, iterations: selected.len(), residual_norms: norms })
}

/// Options for [`n_bomp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NBompOptions {
    /// Stop once `||r|| <= tol * ||y||`.
    pub tol: f64,
    /// Iteration cap; `None` means `N * L`.
    pub max_iters: Option<usize>,
}

impl Default for NBompOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: None }
    }
}

/// Result of [`n_bomp`]: the recovered core plus per-mode index sets in the
/// order they were grown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecovery {
    pub recovery: Recovery,
    pub supports: Vec<Vec<usize>>,
}

/// Least-squares core on `S_1 x .. x S_N` and the resulting residual.
fn block_refit(y: &DenseTensor, d: &KronDictionary, sets: &[Vec<usize>]) -> Result<(DenseTensor, DenseTensor)> {
    let sub: Vec<Matrix> = d.composite.iter().zip(sets).map(|(w, s)| w.select_columns(s)).collect();
    let pinvs: Vec<Matrix> = sub.iter().map(Matrix::pinv).collect();
    let g = y.multilinear_product(&pinvs)?;
    let fitted = g.multilinear_product(&sub)?;
    Ok((g, y.sub(&fitted)?))
}

/// N-way block OMP for cores whose nonzeros sit inside an `L x .. x L`
/// subtensor. Each iteration picks the core entry whose atom correlates best
/// with the residual among entries that would enlarge the current block
/// `S_1 x .. x S_N` without pushing any mode set past `L`, adds its indices
/// to the mode sets, and refits the whole block by least squares. Every
/// iteration grows at least one set, so at most `N * L` iterations run.
pub fn n_bomp(y: &DenseTensor, d: &KronDictionary, l: usize, opts: &NBompOptions) -> Result<BlockRecovery> {
    if l == 0 {
        return invalid("block budget must be at least 1");
    }
    let core_shape = d.core_shape();
    let order = d.order();
    let budget: Vec<usize> = core_shape.iter().map(|&s| s.min(l)).collect();
    let max_iters = opts.max_iters.unwrap_or(order * l).min(budget.iter().sum());
    if numel(&budget) > numel(&d.measurement_shape()) {
        return invalid("block budget exceeds the available measurements");
    }
    if y.shape() != d.measurement_shape().as_slice() {
        return shape_err(format!("measurement shape {:?} does not match dictionary", y.shape()));
    }
    let y_norm = y.frobenius_norm();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); order];
    let mut residual = y.clone();
    let mut block: Option<DenseTensor> = None;
    let mut norms = Vec::new();
    while norms.len() < max_iters {
        let rn = residual.frobenius_norm();
        if rn == 0.0 || rn <= opts.tol * y_norm {
            break;
        }
        let corr = kron_adjoint_apply(d, &residual)?;
        let mut idx = vec![0; order];
        let mut best: Option<(Vec<usize>, f64)> = None;
        for &c in corr.data() {
            let admissible = idx.iter().zip(&sets).zip(&budget).all(|((i, s), &b)| s.contains(i) || s.len() < b);
            let grows = idx.iter().zip(&sets).any(|(i, s)| !s.contains(i));
            if admissible && grows && best.as_ref().map_or(true, |(_, v)| c.abs() > *v) {
                best = Some((idx.clone(), c.abs()));
            }
            increment(&core_shape, &mut idx);
        }
        let Some((pick, _)) = best else { break };
        for (s, i) in sets.iter_mut().zip(&pick) {
            if !s.contains(i) {
                s.push(*i);
            }
        }
        let (g, r) = block_refit(y, d, &sets)?;
        block = Some(g);
        residual = r;
        norms.push(residual.frobenius_norm());
        log::debug!("nbomp iteration {}: entry {pick:?}, residual {:.3e}", norms.len(), norms[norms.len() - 1]);
    }
    let mut core = SparseCore::new(core_shape)?;
    if let Some(g) = block {
        let lens: Vec<usize> = sets.iter().map(Vec::len).collect();
        let mut pos = vec![0; order];
        loop {
            let idx: Vec<usize> = pos.iter().enumerate().map(|(m, &p)| sets[m][p]).collect();
            core.insert(idx, g.data()[linear_index(&lens, &pos)])?;
            if !increment(&lens, &mut pos) {
                break;
            }
        }
    }
    Ok(BlockRecovery { recovery: Recovery { core, iterations: norms.len(), residual_norms: norms }, supports: sets })
}

/// Orthonormal DCT-II basis of size `n`; column `k` is the `k`-th cosine.
pub fn dct_basis(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, k| {
        let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        c * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos()
    })
}

/// Gaussian sensing matrix with columns scaled to unit norm, so that atoms
/// built from it compete on correlation alone.
pub fn gaussian_sensing(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut m = Matrix::random_normal(rows, cols, rng);
    for j in 0..cols {
        let c = m.col_mut(j);
        let n = dot(c, c).sqrt();
        if n > 0.0 {
            c.iter_mut().for_each(|x| *x /= n);
        }
    }
    m
}

/// Synthetic piecewise-smooth cube: three materials with smooth spectra
/// over smooth spatial abundance maps, one of them cut by a sharp edge.
pub fn synthetic_cube(rows: usize, cols: usize, bands: usize) -> Result<DenseTensor> {
    let blob = |cx: f64, cy: f64, w: f64| {
        move |i: usize, j: usize| {
            let (x, y) = (i as f64 / rows as f64 - cx, j as f64 / cols as f64 - cy);
            (-(x * x + y * y) / (2.0 * w * w)).exp()
        }
    };
    let b1 = blob(0.3, 0.35, 0.18);
    let b2 = blob(0.7, 0.6, 0.22);
    let spectrum = |a: f64, b: f64| move |k: usize| a + b * (k as f64 / bands.max(2) as f64 * 2.5).sin();
    let (s1, s2, s3) = (spectrum(0.6, 0.4), spectrum(0.9, -0.3), spectrum(0.3, 0.5));
    DenseTensor::from_fn(&[rows, cols, bands], |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let edge = if (j as f64) < 0.55 * cols as f64 { 1.0 } else { 0.4 };
        let ramp = 0.2 + 0.3 * i as f64 / rows as f64;
        b1(i, j) * s1(k) + b2(i, j) * s2(k) + edge * ramp * s3(k)
    })
}

/// Compressive acquisition of a cube in a DCT basis, followed by recovery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsExperiment {
    pub sampling_ratio: f64,
    pub measurement_shape: Vec<usize>,
    pub nbomp_iterations: usize,
    pub nbomp_psnr_db: f64,
    pub komp_iterations: usize,
    pub komp_psnr_db: f64,
    /// Whether Kronecker-OMP reached the N-BOMP residual within its cap.
    pub komp_reached_target: bool,
}

/// Per-mode measurement counts: sensing acts on the first two modes only
/// (identity on the rest) with `M_n = round(sqrt(ratio) I_n)`.
pub fn measurement_counts(shape: &[usize], sampling_ratio: f64) -> Result<Vec<usize>> {
    if !(sampling_ratio > 0.0 && sampling_ratio <= 1.0) {
        return invalid(format!("sampling ratio must lie in (0, 1], got {sampling_ratio}"));
    }
    let sensed = shape.len().min(2);
    let per_mode = sampling_ratio.powf(1.0 / sensed as f64);
    Ok(shape
        .iter()
        .enumerate()
        .map(|(n, &s)| if n < sensed { ((per_mode * s as f64).round() as usize).clamp(1, s) } else { s })
        .collect())
}

/// Dictionary for [`measurement_counts`]: Gaussian sensing on the first two
/// modes, identity elsewhere, DCT bases everywhere.
pub fn dct_dictionary(shape: &[usize], sampling_ratio: f64, seed: u64) -> Result<KronDictionary> {
    let counts = measurement_counts(shape, sampling_ratio)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sensing = shape
        .iter()
        .zip(&counts)
        .map(|(&s, &m)| if m < s { gaussian_sensing(m, s, &mut rng) } else { Matrix::identity(s) })
        .collect();
    KronDictionary::new(sensing, shape.iter().map(|&s| dct_basis(s)).collect())
}

/// Signal estimate `G ×_n B_n` from a recovered core.
pub fn synthesize(d: &KronDictionary, core: &SparseCore) -> Result<DenseTensor> {
    core.to_dense().multilinear_product(d.bases())
}

/// Runs N-BOMP with block budget `l` on a DCT-sparse cube, then
/// Kronecker-OMP until it matches the N-BOMP residual (capped at
/// `komp_cap` iterations). Reports PSNR of both reconstructions.
pub fn dct_cs_experiment(
    cube: &DenseTensor,
    sampling_ratio: f64,
    l: usize,
    komp_cap: usize,
    seed: u64,
) -> Result<CsExperiment> {
    let d = dct_dictionary(cube.shape(), sampling_ratio, seed)?;
    let y = cube.multilinear_product(d.sensing())?;
    let nb = n_bomp(&y, &d, l, &NBompOptions::default())?;
    let target = nb.recovery.final_residual() / y.frobenius_norm();
    let cap = komp_cap.min(numel(&d.measurement_shape()));
    let ko = kronecker_omp_until(&y, &d, cap, target)?;
    let psnr = |c: &SparseCore| -> Result<f64> { compute_psnr(cube.data(), synthesize(&d, c)?.data()) };
    Ok(CsExperiment {
        sampling_ratio,
        measurement_shape: d.measurement_shape(),
        nbomp_iterations: nb.recovery.iterations,
        nbomp_psnr_db: psnr(&nb.recovery.core)?,
        komp_iterations: ko.iterations,
        komp_psnr_db: psnr(&ko.core)?,
        komp_reached_target: ko.final_residual() <= target * y.frobenius_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::kronecker;

    fn orthonormal_dict(n: usize, extent: usize, seed: u64) -> KronDictionary {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KronDictionary::from_matrices((0..n).map(|_| Matrix::random_orthonormal(extent, extent, &mut rng)).collect())
            .unwrap()
    }

    #[test]
    fn identity_dictionary_is_transparent() {
        let d = KronDictionary::from_matrices(vec![Matrix::identity(3), Matrix::identity(2)]).unwrap();
        let mut g = SparseCore::new(vec![3, 2]).unwrap();
        g.insert(vec![1, 1], 2.5).unwrap();
        g.insert(vec![2, 0], -1.0).unwrap();
        let y = kron_apply(&d, &g).unwrap();
        assert_eq!(y, g.to_dense());
        assert_eq!(kron_adjoint_apply(&d, &y).unwrap(), y);
    }

    #[test]
    fn two_mode_apply_matches_global_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w1 = Matrix::random_normal(3, 5, &mut rng);
        let w2 = Matrix::random_normal(2, 4, &mut rng);
        let d = KronDictionary::from_matrices(vec![w1.clone(), w2.clone()]).unwrap();
        let g = DenseTensor::from_fn(&[5, 4], |i| (i[0] * 4 + i[1]) as f64 * 0.1 - 0.7).unwrap();
        let global = kronecker(&w2, &w1);
        let expect = global.matvec(g.data()).unwrap();
        let got = kron_apply_dense(&d, &g).unwrap();
        assert!(got.data().iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn single_entry_gives_rank_one_measurement() {
        let d = orthonormal_dict(3, 4, 2);
        let mut g = SparseCore::new(vec![4, 4, 4]).unwrap();
        g.insert(vec![1, 3, 0], 2.0).unwrap();
        let y = kron_apply(&d, &g).unwrap();
        let cols: Vec<&[f64]> = vec![d.modes()[0].col(1), d.modes()[1].col(3), d.modes()[2].col(0)];
        let expect = outer(&cols).unwrap().scaled(2.0);
        assert!(y.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn coherence_values() {
        assert_eq!(mutual_coherence(&Matrix::identity(3)).unwrap(), 0.0);
        let dup = Matrix::from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!((mutual_coherence(&dup).unwrap() - 1.0).abs() < 1e-15);
        assert!(mutual_coherence(&Matrix::zeros(2, 2)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Matrix::random_normal(3, 4, &mut rng);
        let b = Matrix::random_normal(2, 3, &mut rng);
        let kron = mutual_coherence(&kronecker(&a, &b)).unwrap();
        let expect = mutual_coherence(&a).unwrap().max(mutual_coherence(&b).unwrap());
        assert!((kron - expect).abs() < 1e-12);
    }

    #[test]
    fn komp_with_zero_sparsity() {
        let d = orthonormal_dict(2, 3, 4);
        let y = DenseTensor::from_fn(&[3, 3], |i| i[0] as f64 + 1.0).unwrap();
        let r = kronecker_omp(&y, &d, 0).unwrap();
        assert_eq!(r.core.sparsity(), 0);
        assert!(r.residual_norms.is_empty());
        assert!(kronecker_omp(&y, &d, 10).is_err());
    }

    #[test]
    fn komp_recovers_planted_core() {
        let d = orthonormal_dict(3, 5, 5);
        let mut g = SparseCore::new(vec![5, 5, 5]).unwrap();
        g.insert(vec![0, 2, 4], 1.5).unwrap();
        g.insert(vec![3, 1, 1], -2.0).unwrap();
        g.insert(vec![4, 4, 0], 0.7).unwrap();
        let y = kron_apply(&d, &g).unwrap();
        let r = kronecker_omp(&y, &d, 3).unwrap();
        assert_eq!(r.iterations, 3);
        assert_eq!(r.core.entries().map(|(k, _)| k.clone()).collect::<Vec<_>>(), g.entries().map(|(k, _)| k.clone()).collect::<Vec<_>>());
        assert!(r.core.to_dense().max_abs_diff(&g.to_dense()) < 1e-10);
    }

    #[test]
    fn komp_on_coherent_dictionary_misses_but_residual_decreases() {
        // column 1 nearly duplicates column 0 plus a bit of column 2
        let w = Matrix::from_columns(&[
            vec![1.0, 0.0, 0.0],
            vec![0.9, 0.1, 0.42],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        let d = KronDictionary::from_matrices(vec![w]).unwrap();
        let mut g = SparseCore::new(vec![4]).unwrap();
        g.insert(vec![0], 1.0).unwrap();
        g.insert(vec![2], 1.0).unwrap();
        let y = kron_apply(&d, &g).unwrap();
        let r = kronecker_omp(&y, &d, 2).unwrap();
        let found: Vec<usize> = r.core.entries().map(|(k, _)| k[0]).collect();
        assert_ne!(found, vec![0, 2]);
        let mut prev = y.frobenius_norm();
        for &n in &r.residual_norms {
            assert!(n <= prev + 1e-12);
            prev = n;
        }
    }

    #[test]
    fn nbomp_recovers_block_within_bound() {
        let d = orthonormal_dict(3, 6, 6);
        let block = [[1usize, 4], [0, 2], [3, 5]];
        let mut g = SparseCore::new(vec![6, 6, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &i in &block[0] {
            for &j in &block[1] {
                for &k in &block[2] {
                    let v: f64 = rand::Rng::random_range(&mut rng, 0.5..1.5);
                    g.insert(vec![i, j, k], v).unwrap();
                }
            }
        }
        let y = kron_apply(&d, &g).unwrap();
        let nb = n_bomp(&y, &d, 2, &NBompOptions::default()).unwrap();
        assert!(nb.recovery.iterations <= 6);
        assert!(nb.recovery.core.to_dense().max_abs_diff(&g.to_dense()) < 1e-10);
        let ko = kronecker_omp(&y, &d, 8).unwrap();
        assert_eq!(ko.iterations, 8);
        assert!(ko.core.to_dense().max_abs_diff(&g.to_dense()) < 1e-10);
    }

    #[test]
    fn nbomp_with_full_budget_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = vec![Matrix::random_normal(3, 3, &mut rng), Matrix::random_normal(4, 4, &mut rng)];
        let d = KronDictionary::from_matrices(w.clone()).unwrap();
        let y = DenseTensor::from_fn(&[3, 4], |i| ((i[0] + 2 * i[1]) as f64).sin()).unwrap();
        let nb = n_bomp(&y, &d, 4, &NBompOptions { tol: 0.0, max_iters: None }).unwrap();
        let ls = y.multilinear_product(&w.iter().map(Matrix::pinv).collect::<Vec<_>>()).unwrap();
        assert!(nb.recovery.core.to_dense().max_abs_diff(&ls) < 1e-10);
        assert!(nb.recovery.iterations <= 7);
    }

    #[test]
    fn sparse_core_json_round_trip() {
        let mut g = SparseCore::new(vec![2, 3]).unwrap();
        g.insert(vec![1, 2], 0.25).unwrap();
        g.insert(vec![0, 0], -1.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: SparseCore = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<SparseCore>(r#"{"shape":[2],"indices":[[5]],"values":[1.0]}"#).is_err());
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        let b = dct_basis(8);
        assert!(b.gram().max_abs_diff(&Matrix::identity(8)) < 1e-13);
    }

    #[test]
    fn measurement_counts_follow_ratio() {
        assert_eq!(measurement_counts(&[1024, 1024, 32], 0.33).unwrap(), vec![588, 588, 32]);
        assert!(measurement_counts(&[4, 4], 0.0).is_err());
    }
}
