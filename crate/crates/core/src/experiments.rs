//! Seeded sweeps behind the CLI demos: blind source separation across
//! noise levels, HOPLS vs PLS across seeds, linked-MWCA classification.

use serde::{Deserialize, Serialize};

use crate::bss::{run_bss, BssConfig, BssOutcome};
use crate::error::{invalid, Result};
use crate::lmwca::{classification_accuracy, ClassificationTask};
use crate::par;
use crate::regress::{compare_on_task, RegressionComparison, RegressionTask};

/// Noise levels of the separation sweep; `None` is noise-free.
pub const SNR_LEVELS_DB: [Option<f64>; 5] = [Some(0.0), Some(10.0), Some(20.0), Some(30.0), None];

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median SAE (dB) per method at one noise level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BssSweepRow {
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub pca: f64,
    pub ica: f64,
    pub cpd: f64,
    pub btd: f64,
    pub tucker_angle: f64,
    pub btd_min_correlation: f64,
}

impl BssSweepRow {
    fn from_outcomes(snr_db: Option<f64>, outcomes: &[BssOutcome]) -> Self {
        let pick = |f: fn(&BssOutcome) -> f64| median(&mut outcomes.iter().map(f).collect::<Vec<_>>());
        Self {
            snr_db,
            trials: outcomes.len(),
            pca: pick(|o| o.sae_pca_db),
            ica: pick(|o| o.sae_ica_db),
            cpd: pick(|o| o.sae_cpd_db),
            btd: pick(|o| o.sae_btd_db),
            tucker_angle: pick(|o| o.tucker_subspace_angle),
            btd_min_correlation: pick(|o| o.btd_source_correlation.iter().copied().fold(f64::INFINITY, f64::min)),
        }
    }
}

/// Runs `trials` problems (seeds `base.seed + t`) at each level.
pub fn bss_sweep(base: &BssConfig, levels: &[Option<f64>], trials: usize) -> Result<Vec<BssSweepRow>> {
    if trials == 0 {
        return invalid("separation sweep needs at least one trial");
    }
    levels
        .iter()
        .map(|&snr_db| {
            let outcomes = par::map_indices(trials, |t| {
                run_bss(&BssConfig { snr_db, seed: base.seed.wrapping_add(t as u64), ..base.clone() })
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            Ok(BssSweepRow::from_outcomes(snr_db, &outcomes))
        })
        .collect()
}

fn fmt_snr(snr: Option<f64>) -> String {
    snr.map_or_else(|| "inf".to_string(), |s| format!("{s}"))
}

pub fn bss_sweep_csv(rows: &[BssSweepRow]) -> String {
    let mut out = String::from("snr_db,trials,sae_pca_db,sae_ica_cumulant_db,sae_cpd_db,sae_btd_db,tucker_angle_rad,btd_min_correlation\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6}\n",
            fmt_snr(r.snr_db),
            r.trials,
            r.pca,
            r.ica,
            r.cpd,
            r.btd,
            r.tucker_angle,
            r.btd_min_correlation
        ));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionRow {
    pub seed: u64,
    pub hopls: f64,
    pub pls: f64,
}

/// HOPLS vs unfolded PLS on `seeds` consecutive seeds from `seed`.
pub fn regression_sweep(task: &RegressionTask, seed: u64, seeds: usize, r: usize, l: usize) -> Result<Vec<RegressionRow>> {
    par::map_indices(seeds, |i| {
        let s = seed.wrapping_add(i as u64);
        compare_on_task(task, s, r, l).map(|RegressionComparison { hopls, pls }| RegressionRow { seed: s, hopls, pls })
    })
    .into_iter()
    .collect()
}

pub fn regression_csv(rows: &[RegressionRow]) -> String {
    let mut out = String::from("seed,hopls_correlation,pls_correlation\n");
    for r in rows {
        out.push_str(&format!("{},{:.9},{:.9}\n", r.seed, r.hopls, r.pls));
    }
    out
}

/// Mean of the HOPLS and PLS columns.
pub fn regression_means(rows: &[RegressionRow]) -> (f64, f64) {
    let n = rows.len().max(1) as f64;
    (rows.iter().map(|r| r.hopls).sum::<f64>() / n, rows.iter().map(|r| r.pls).sum::<f64>() / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRow {
    pub noise: f64,
    pub trials: usize,
    pub accuracy: f64,
}

/// Classification accuracy of `task` at each noise level.
pub fn lmwca_sweep(task: &ClassificationTask, noises: &[f64], trials: usize, seed: u64, common_fraction: f64) -> Result<Vec<ClassificationRow>> {
    noises
        .iter()
        .map(|&noise| {
            let t = ClassificationTask { noise, ..task.clone() };
            Ok(ClassificationRow { noise, trials, accuracy: classification_accuracy(&t, trials, seed, common_fraction)? })
        })
        .collect()
}

pub fn lmwca_csv(rows: &[ClassificationRow]) -> String {
    let mut out = String::from("noise,trials,accuracy\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.6}\n", r.noise, r.trials, r.accuracy));
    }
    out
}
