use std::time::{Duration, Instant};

use multiway::bss::{run_bss, BssConfig};
use multiway::btd::{btd_ll1_als, BtdOptions};
use multiway::cpd::{cpd_als, k_rank, kruskal_uniqueness, CPModel, CpInit, CpOptions};
use multiway::experiments::{bss_sweep, regression_means, regression_sweep};
use multiway::index::{increment, numel};
use multiway::kron_cs::{
    dct_cs_experiment, kron_adjoint_apply, kron_apply, kron_apply_dense, kronecker_omp, n_bomp, synthetic_cube,
    KronDictionary, NBompOptions, SparseCore,
};
use multiway::lmwca::{classification_accuracy, ClassificationTask, DEFAULT_COMMON_FRACTION};
use multiway::regress::{compare_on_task, RegressionTask};
use multiway::tensor::{khatri_rao_except, quantize};
use multiway::tt::{tt_reconstruct, tt_svd};
use multiway::tucker::{hooi_from, mlsvd, HooiOptions, TuckerModel};
use multiway::{DenseTensor, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| r.sample(StandardNormal)).unwrap()
}

fn random_shape(r: &mut ChaCha8Rng, order: usize, lo: usize, hi: usize) -> Vec<usize> {
    (0..order).map(|_| r.random_range(lo..=hi)).collect()
}

fn diag(w: &[f64]) -> Matrix {
    Matrix::from_fn(w.len(), w.len(), |i, j| if i == j { w[i] } else { 0.0 })
}

/// Entrywise sum of rank-1 terms, no unfolding involved.
fn brute_force_cp(m: &CPModel) -> DenseTensor {
    let shape = m.shape();
    DenseTensor::from_fn(&shape, |idx| {
        (0..m.rank())
            .map(|r| m.weights()[r] * idx.iter().enumerate().map(|(n, &i)| m.factors()[n][(i, r)]).product::<f64>())
            .sum()
    })
    .unwrap()
}

fn convention_consistency() -> Verdict {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let order = r.random_range(3..=4);
        let shape = random_shape(&mut r, order, 1, 6);
        let rank = r.random_range(1..=3);
        let factors = shape.iter().map(|&i| Matrix::random_normal(i, rank, &mut r)).collect();
        let weights: Vec<f64> = (0..rank).map(|_| r.random_range(0.5..2.0)).collect();
        let m = CPModel::new(weights, factors).unwrap();
        let weights = m.weights();
        let dense = brute_force_cp(&m);
        for n in 0..order {
            let kr = khatri_rao_except(m.factors(), Some(n)).unwrap();
            let unfolded = m.factors()[n].matmul(&diag(weights)).unwrap().matmul_t(&kr).unwrap();
            worst = worst.max(DenseTensor::fold(&unfolded, n, &shape).unwrap().max_abs_diff(&dense));
        }
        let full_kr = khatri_rao_except(m.factors(), None).unwrap();
        let vec = full_kr.matvec(weights).unwrap();
        worst = worst.max(vec.iter().zip(dense.vectorize()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    verdict(worst <= 1e-12, format!("1000 models, max abs diff {worst:.2e}"))
}

fn slice_inner(s: &DenseTensor, n: usize, a: usize, b: usize) -> f64 {
    let x = s.mode_slice(n, a).unwrap();
    let y = s.mode_slice(n, b).unwrap();
    x.iter().zip(&y).map(|(p, q)| p * q).sum()
}

fn mlsvd_structure() -> Verdict {
    let mut r = rng(2);
    let (mut value_err, mut orth_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let order = r.random_range(3..=4);
        let shape = random_shape(&mut r, order, 2, 6);
        let t = random_tensor(&shape, &mut r);
        let scale = t.frobenius_norm();
        let (model, spectrum) = mlsvd(&t).unwrap();
        for n in 0..order {
            for a in 0..shape[n] {
                let norm = slice_inner(&model.core, n, a, a).sqrt();
                value_err = value_err.max((norm - spectrum.values[n][a]).abs() / scale);
                for b in 0..a {
                    orth_err = orth_err.max(slice_inner(&model.core, n, a, b).abs() / (scale * scale));
                }
            }
        }
    }
    verdict(
        value_err <= 1e-10 && orth_err <= 1e-10,
        format!("100 tensors, singular value vs slice norm {value_err:.2e}, slice inner products {orth_err:.2e} (relative)"),
    )
}

fn separation() -> Verdict {
    let tiny = BssConfig { samples: 6, snr_db: None, ..BssConfig::default() };
    let out = run_bss(&tiny).unwrap();
    let tiny_ok = out.btd_source_correlation.iter().all(|&c| c >= 0.99);
    let base = BssConfig { seed: 0, ..BssConfig::default() };
    let row = &bss_sweep(&base, &[Some(20.0)], 50).unwrap()[0];
    let ordering = row.btd < row.cpd && row.cpd < row.ica && row.cpd < row.pca;
    verdict(
        tiny_ok && ordering,
        format!(
            "6 samples noise-free: BTD source correlations {:?}; 20 dB medians over 50 seeds: BTD {:.1}, CPD {:.1}, ICA {:.1}, PCA {:.1} dB (ordering BTD < CPD < ICA/PCA {})",
            out.btd_source_correlation.iter().map(|c| format!("{c:.4}")).collect::<Vec<_>>(),
            row.btd,
            row.cpd,
            row.ica,
            row.pca,
            if ordering { "holds" } else { "does not hold" }
        ),
    )
}

/// Rank by Gram-Schmidt with a relative drop tolerance.
fn gs_rank(cols: &[Vec<f64>]) -> usize {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in cols {
        let scale = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = c.clone();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = b.iter().zip(&v).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-10 * scale.max(1e-300) {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    basis.len()
}

/// Largest k such that every k-subset of columns is independent.
fn exhaustive_k_rank(m: &Matrix) -> usize {
    let c = m.cols();
    let mut k = 0;
    'size: for size in 1..=c {
        for mask in 0u32..(1 << c) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let cols: Vec<Vec<f64>> = (0..c).filter(|j| mask >> j & 1 == 1).map(|j| m.col(j).to_vec()).collect();
            if gs_rank(&cols) < size {
                break 'size;
            }
        }
        k = size;
    }
    k
}

fn kruskal() -> Verdict {
    let mut r = rng(4);
    let mut generic_pass = 0;
    let mut collinear_fail = 0;
    let trials = 200;
    for t in 0..trials {
        let rank = 2 + t % 3;
        let shape = random_shape(&mut r, 3, rank + 1, rank + 3);
        let factors: Vec<Matrix> = shape.iter().map(|&i| Matrix::random_normal(i, rank, &mut r)).collect();
        if kruskal_uniqueness(&CPModel::from_factors(factors.clone()).unwrap()).satisfied {
            generic_pass += 1;
        }
        let mut bad = factors;
        for m in bad.iter_mut().take(2) {
            let first = m.col(0).to_vec();
            m.col_mut(1).iter_mut().zip(&first).for_each(|(x, y)| *x = 3.0 * y);
        }
        if !kruskal_uniqueness(&CPModel::from_factors(bad).unwrap()).satisfied {
            collinear_fail += 1;
        }
    }
    let mut oracle_mismatch = 0;
    let mut cases = 0;
    for rank in 1usize..=8 {
        for rows in [rank.saturating_sub(2).max(1), rank, rank + 2] {
            for variant in 0..4 {
                let mut m = Matrix::random_normal(rows, rank, &mut r);
                if variant >= 1 && rank >= 2 {
                    let first = m.col(0).to_vec();
                    m.col_mut(rank - 1).iter_mut().zip(&first).for_each(|(x, y)| *x = -2.0 * y);
                }
                if variant >= 2 && rank >= 4 {
                    let (a, b) = (m.col(1).to_vec(), m.col(2).to_vec());
                    m.col_mut(3).iter_mut().enumerate().for_each(|(i, x)| *x = a[i] + 0.5 * b[i]);
                }
                if variant == 3 {
                    m.col_mut(0).iter_mut().for_each(|x| *x = 0.0);
                }
                cases += 1;
                if k_rank(&m) != exhaustive_k_rank(&m) {
                    oracle_mismatch += 1;
                }
            }
        }
    }
    verdict(
        generic_pass == trials && collinear_fail == trials && oracle_mismatch == 0,
        format!(
            "generic certified {generic_pass}/{trials}, collinear rejected {collinear_fail}/{trials}, k-rank oracle mismatches {oracle_mismatch}/{cases}"
        ),
    )
}

fn qtt() -> Verdict {
    let (a, z) = (3.0, 0.9995f64);
    let v: Vec<f64> = (0..1usize << 14).map(|k| a * z.powi(k as i32)).collect();
    let q = quantize(&v, 2).unwrap();
    let m = tt_svd(&q, 1e-12).unwrap();
    let back = tt_reconstruct(&m).unwrap();
    let err = back.sub(&q).unwrap().frobenius_norm() / q.frobenius_norm();
    let params = m.parameter_count();
    let ranks_one = m.ranks().iter().all(|&r| r == 1);
    verdict(
        ranks_one && params <= 2 * 14 * 2 && err <= 1e-10,
        format!("ranks {:?}, {params} parameters (limit 56), relative error {err:.2e}", m.ranks()),
    )
}

fn block_omp() -> Verdict {
    let (extent, l) = (8, 2);
    let mut within_bound = 0;
    let mut komp_exact_eight = 0;
    let mut worst_iters = 0;
    for trial in 0..100u64 {
        let mut r = rng(600 + trial);
        let w: Vec<Matrix> = (0..3).map(|_| Matrix::random_orthonormal(extent, extent, &mut r)).collect();
        let d = KronDictionary::from_matrices(w).unwrap();
        let mut truth = SparseCore::new(vec![extent; 3]).unwrap();
        let sets: Vec<Vec<usize>> = (0..3)
            .map(|_| {
                let a = r.random_range(0..extent);
                let b = (a + r.random_range(1..extent)) % extent;
                vec![a, b]
            })
            .collect();
        for (i, j, k) in (0..8).map(|p| (p & 1, p >> 1 & 1, p >> 2 & 1)) {
            let v: f64 = r.sample(StandardNormal);
            truth.insert(vec![sets[0][i], sets[1][j], sets[2][k]], v.signum() * (0.5 + v.abs())).unwrap();
        }
        let y = kron_apply(&d, &truth).unwrap();
        let nb = n_bomp(&y, &d, l, &NBompOptions::default()).unwrap();
        let nb_err = nb.recovery.core.to_dense().max_abs_diff(&truth.to_dense());
        worst_iters = worst_iters.max(nb.recovery.iterations);
        if nb.recovery.iterations <= 3 * l && nb_err <= 1e-10 {
            within_bound += 1;
        }
        let ko = kronecker_omp(&y, &d, 8).unwrap();
        if ko.iterations == 8 && ko.core.to_dense().max_abs_diff(&truth.to_dense()) <= 1e-10 {
            komp_exact_eight += 1;
        }
    }
    let cube = synthetic_cube(64, 64, 8).unwrap();
    let cs = dct_cs_experiment(&cube, 0.33, 8, 4000, 42).unwrap();
    let ordering = cs.nbomp_iterations < cs.komp_iterations && cs.komp_reached_target;
    verdict(
        within_bound == 100 && komp_exact_eight == 100 && ordering,
        format!(
            "N-BOMP exact within 6 iterations {within_bound}/100 (max {worst_iters}), Kronecker-OMP exact in 8 {komp_exact_eight}/100; DCT cube at 33%: N-BOMP {} iterations {:.2} dB, Kronecker-OMP {} iterations {:.2} dB",
            cs.nbomp_iterations, cs.nbomp_psnr_db, cs.komp_iterations, cs.komp_psnr_db
        ),
    )
}

fn hopls_vs_pls() -> Verdict {
    let task = RegressionTask::default();
    let rows = regression_sweep(&task, 42, 20, 1, 2).unwrap();
    let (hopls, pls) = regression_means(&rows);
    let clean = compare_on_task(&RegressionTask { noise: 0.0, ..task }, 42, 1, 2).unwrap();
    verdict(
        hopls > pls && clean.hopls >= 0.999,
        format!("mean test correlation over 20 seeds: HOPLS {hopls:.6}, PLS {pls:.6}; noise-free HOPLS {:.6}", clean.hopls),
    )
}

fn linked_classification() -> Verdict {
    let acc = classification_accuracy(&ClassificationTask::default(), 50, 7, DEFAULT_COMMON_FRACTION).unwrap();
    verdict(acc >= 0.95, format!("accuracy {acc:.3} over 50 trials"))
}

fn property_suites() -> Verdict {
    let mut r = rng(9);
    let mut violations = Vec::new();
    let count = |name: &str, ok: bool, v: &mut Vec<String>| {
        if !ok {
            v.push(name.to_string());
        }
    };
    for t in 0..100 {
        let shape = random_shape(&mut r, 3, 2, 5);
        let x = random_tensor(&shape, &mut r);
        let rank = 1 + t % 3;
        let cp = CpOptions { max_iters: 50, tol: 0.0, init: CpInit::Random, seed: t as u64 };
        count("als", cpd_als(&x, rank, &cp).unwrap().1.is_monotone(1e-10), &mut violations);

        let ranks: Vec<usize> = shape.iter().map(|&i| r.random_range(1..=i)).collect();
        let factors: Vec<Matrix> = shape.iter().zip(&ranks).map(|(&i, &k)| Matrix::random_orthonormal(i, k, &mut r)).collect();
        let init = TuckerModel::new(x.multilinear_product_t(&factors).unwrap(), factors).unwrap();
        count("hooi", hooi_from(&x, init, &HooiOptions { max_iters: 20, tol: 0.0 }).unwrap().1.is_monotone(1e-10), &mut violations);

        if t < 40 {
            let opts = BtdOptions { max_iters: 30, tol: 0.0, seed: t as u64, restarts: 1 };
            count("btd", btd_ll1_als(&x, 2, 1, &opts).unwrap().1.is_monotone(1e-10), &mut violations);
        }

        for n in 0..3 {
            count("fold", DenseTensor::fold(&x.unfold(n).unwrap(), n, &shape).unwrap() == x, &mut violations);
        }

        let w: Vec<Matrix> = shape.iter().map(|&i| Matrix::random_normal(r.random_range(1..=i), i, &mut r)).collect();
        let d = KronDictionary::from_matrices(w).unwrap();
        let y = random_tensor(&d.measurement_shape(), &mut r);
        let lhs = kron_apply_dense(&d, &x).unwrap().inner(&y).unwrap();
        let rhs = x.inner(&kron_adjoint_apply(&d, &y).unwrap()).unwrap();
        count("adjoint", (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), &mut violations);
    }
    let mut tt_cases = 0;
    for _ in 0..200 {
        let order = r.random_range(2..=5);
        let shape = random_shape(&mut r, order, 1, 5);
        let x = random_tensor(&shape, &mut r);
        for tol in [1e-2, 1e-6, 1e-12] {
            let m = tt_svd(&x, tol).unwrap();
            let err = tt_reconstruct(&m).unwrap().sub(&x).unwrap().frobenius_norm();
            count("tt", err <= tol * x.frobenius_norm(), &mut violations);
            tt_cases += 1;
        }
    }
    let mut idx_checked = 0;
    for shape in [vec![2, 3, 4], vec![4, 1, 3, 2], vec![5, 6]] {
        let x = DenseTensor::from_fn(&shape, |i| i.iter().map(|&k| k as f64).sum()).unwrap();
        let mut idx = vec![0; shape.len()];
        for pos in 0..numel(&shape) {
            count("vec", x.vectorize()[pos] == idx.iter().map(|&k| k as f64).sum::<f64>(), &mut violations);
            increment(&shape, &mut idx);
            idx_checked += 1;
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "100 ALS/HOOI/fold/adjoint cases, 40 BTD, {tt_cases} TT, {idx_checked} vec positions; violations: {}",
            if violations.is_empty() { "none".to_string() } else { violations.join(",") }
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, Option<Duration>); 9] = [
        ("convention consistency", convention_consistency, Some(Duration::from_secs(10))),
        ("MLSVD structure", mlsvd_structure, Some(Duration::from_secs(30))),
        ("Hankel separation", separation, Some(Duration::from_secs(120))),
        ("Kruskal certification", kruskal, None),
        ("QTT super-compression", qtt, Some(Duration::from_secs(5))),
        ("N-BOMP iteration bound", block_omp, None),
        ("HOPLS vs PLS", hopls_vs_pls, Some(Duration::from_secs(60))),
        ("linked classification", linked_classification, None),
        ("property suites", property_suites, None),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / limit {}s", l.as_secs()));
        println!(
            "criterion {} {name}: {} | {} | {:.2}s{budget}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
