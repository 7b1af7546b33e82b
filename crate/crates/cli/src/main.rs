mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use multiway::bss::{self, BssConfig, NoiseStage};
use multiway::cpd::{cpd_als, CpOptions};
use multiway::experiments;
use multiway::io::{self, BtdDoc, CpDoc, KronDictionaryDoc, TuckerDoc};
use multiway::kron_cs::{self, KronDictionary, NBompOptions, SparseCore};
use multiway::lmwca::{ClassificationTask, DEFAULT_COMMON_FRACTION};
use multiway::metrics::{compute_psnr, MetricsReport};
use multiway::regress::RegressionTask;
use multiway::tensor::{hankel_tensorize, hankelize, quantize};
use multiway::tt::tt_svd;
use multiway::tucker::{hooi, truncated_mlsvd, HooiOptions};
use multiway::{btd, DenseTensor, Matrix};

use manifest::{finite_or_string, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "multiway", version, about = "Tensor decompositions, tensorization, Kronecker compressed sensing and multiway demos")]
struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory receiving models, CSV files and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Emit log records as JSON lines on stderr.
    #[arg(long, global = true)]
    json_logs: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose an MWT1 (or CSV) tensor and write the model as JSON.
    Decompose(DecomposeArgs),
    /// Turn a signal into a Hankel or quantized tensor (MWT1 output).
    Tensorize(TensorizeArgs),
    /// Sparse recovery with a Kronecker dictionary.
    CsRecover(CsArgs),
    /// Blind source separation shootout on Hankelized mixtures.
    BssDemo(BssArgs),
    /// HOPLS vs unfolded PLS on planted multilinear data.
    RegressDemo(RegressArgs),
    /// Linked-MWCA classification on synthetic classes.
    LmwcaDemo(LmwcaArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Cpd,
    Tucker,
    Hooi,
    Btd,
    Tt,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Input tensor: MWT1, or CSV (order 2) when the extension is .csv.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// CP rank, or number of block terms for btd.
    #[arg(long, default_value_t = 2)]
    rank: usize,
    /// Multilinear ranks for tucker/hooi, comma separated.
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<usize>,
    /// Block size L of the (L, L, 1) terms for btd.
    #[arg(long, default_value_t = 2)]
    block: usize,
    /// Relative accuracy for tt.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Exit with status 2 when the relative fit ends below this value.
    #[arg(long)]
    min_fit: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scheme {
    Hankel,
    Quantize,
}

#[derive(Args, Debug)]
struct TensorizeArgs {
    /// Signal file (MWT1 or CSV). A matrix with several columns is read as
    /// one channel per column.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Hankel row count; defaults to ceil((T + 1) / 2).
    #[arg(long)]
    rows: Option<usize>,
    /// Quantization base.
    #[arg(long, default_value_t = 2)]
    base: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Algorithm {
    Komp,
    Nbomp,
}

#[derive(Args, Debug)]
struct CsArgs {
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Measurement tensor (MWT1). Without it a planted problem is generated.
    #[arg(long, requires = "dictionary")]
    measurements: Option<PathBuf>,
    /// Dictionary document (JSON) for --measurements.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Sparsity budget K for komp; defaults to block^order.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Per-mode block size L for nbomp and for the planted core.
    #[arg(long, default_value_t = 2)]
    block: usize,
    /// Relative residual target; exit status 3 when it is not met.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Fraction of samples kept by the generated sensing operator.
    #[arg(long, default_value_t = 0.33)]
    sampling_ratio: f64,
    /// Core shape of the generated problem.
    #[arg(long, value_delimiter = ',', default_value = "64,64,4")]
    shape: Vec<usize>,
}

fn parse_snr(s: &str) -> std::result::Result<Option<f64>, String> {
    match s.trim() {
        "inf" | "Inf" | "none" => Ok(None),
        v => v.parse::<f64>().map(Some).map_err(|e| format!("{v:?}: {e}")),
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stage {
    Before,
    After,
}

#[derive(Args, Debug)]
struct BssArgs {
    #[arg(long, default_value_t = 60)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    channels: usize,
    /// SNR levels in dB; `inf` is noise-free.
    #[arg(long, value_delimiter = ',', value_parser = parse_snr, default_value = "0,10,20,30,inf")]
    snr: Vec<Option<f64>>,
    /// Seeds per level (seed, seed + 1, ...); medians are reported.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = bss::DEFAULT_SAMPLE_RATE)]
    sample_rate: f64,
    /// Add noise to the mixtures before Hankelization, or to the tensor after.
    #[arg(long, value_enum, default_value = "before")]
    noise_stage: Stage,
}

#[derive(Args, Debug)]
struct RegressArgs {
    /// Latent components R for both models.
    #[arg(long, default_value_t = 1)]
    components: usize,
    /// HOPLS loading rank L.
    #[arg(long, default_value_t = 2)]
    block_rank: usize,
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
}

#[derive(Args, Debug)]
struct LmwcaArgs {
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    noise: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_COMMON_FRACTION)]
    common_fraction: f64,
}

/// Status reported through the exit code after outputs are written.
#[derive(Debug, PartialEq, Eq)]
enum Status {
    Ok,
    FitBelowMinimum,
    ResidualUnmet,
}

impl Status {
    fn code(&self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::FitBelowMinimum => 2,
            Status::ResidualUnmet => 3,
        }
    }
}

fn init_logging(json: bool) {
    let mut b = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"));
    if json {
        b.format(|buf, rec| {
            let line = serde_json::json!({
                "level": rec.level().as_str(),
                "target": rec.target(),
                "message": rec.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    }
    b.target(env_logger::Target::Stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.json_logs);
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<Status> {
    std::fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let start = Instant::now();
    let (mut m, status) = match &cli.command {
        Command::Decompose(a) => decompose(cli, a)?,
        Command::Tensorize(a) => tensorize(cli, a)?,
        Command::CsRecover(a) => cs_recover(cli, a)?,
        Command::BssDemo(a) => bss_demo(cli, a)?,
        Command::RegressDemo(a) => regress_demo(cli, a)?,
        Command::LmwcaDemo(a) => lmwca_demo(cli, a)?,
    };
    m.wall_seconds = start.elapsed().as_secs_f64();
    let path = cli.out_dir.join(format!("{}.manifest.json", manifest_stem(&m)));
    io::write_json(&path, &m)?;
    info!("manifest written to {}", path.display());
    Ok(status)
}

/// Manifest file name: the primary output's stem, or the command name.
fn manifest_stem(m: &RunManifest) -> String {
    match m.command.as_str() {
        "decompose" | "tensorize" | "cs-recover" => m
            .parameters
            .get("stem")
            .and_then(|v| v.as_str())
            .map_or_else(|| m.command.clone(), str::to_string),
        _ => m.command.clone(),
    }
}

fn input_stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn read_tensor(p: &Path) -> Result<DenseTensor> {
    let is_csv = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let t = if is_csv { io::read_csv_matrix_file(p) } else { io::read_mwt1_file(p) };
    t.with_context(|| format!("reading {}", p.display()))
}

fn check_min_fit(fit: f64, min_fit: Option<f64>) -> Status {
    match min_fit {
        Some(f) if !(fit >= f) => {
            warn!("fit {fit} is below --min-fit {f}");
            Status::FitBelowMinimum
        }
        _ => Status::Ok,
    }
}

fn decompose(cli: &Cli, a: &DecomposeArgs) -> Result<(RunManifest, Status)> {
    let t = read_tensor(&a.input)?;
    let method = format!("{:?}", a.method).to_lowercase();
    let stem = format!("{}.{method}", input_stem(&a.input));
    let mut m = RunManifest::new("decompose", cli.seed);
    m.param("method", &method).param("stem", &stem).param("shape", t.shape()).input(&a.input);
    let model_path = cli.out_dir.join(format!("{stem}.json"));
    let report = match a.method {
        Method::Cpd => {
            let mut opts = CpOptions { seed: cli.seed, ..Default::default() };
            if let Some(it) = a.max_iters {
                opts.max_iters = it;
            }
            m.param("rank", a.rank).param("max_iters", opts.max_iters);
            let (model, trace) = cpd_als(&t, a.rank, &opts)?;
            io::write_json(&model_path, &CpDoc::from_model(&model))?;
            m.metric("iterations", trace.iterations()).metric("converged", trace.converged);
            MetricsReport::from_residual(&t, &model.reconstruct())?
        }
        Method::Tucker | Method::Hooi => {
            let ranks = if a.ranks.is_empty() { t.shape().iter().map(|&s| s.min(2)).collect() } else { a.ranks.clone() };
            m.param("ranks", &ranks);
            let model = if matches!(a.method, Method::Tucker) {
                truncated_mlsvd(&t, &ranks)?
            } else {
                let mut opts = HooiOptions::default();
                if let Some(it) = a.max_iters {
                    opts.max_iters = it;
                }
                m.param("max_iters", opts.max_iters);
                let (model, trace) = hooi(&t, &ranks, &opts)?;
                m.metric("iterations", trace.iterations()).metric("converged", trace.converged);
                model
            };
            io::write_json(&model_path, &TuckerDoc::from_model(&model))?;
            MetricsReport::from_residual(&t, &model.reconstruct())?
        }
        Method::Btd => {
            let mut opts = btd::BtdOptions { seed: cli.seed, ..Default::default() };
            if let Some(it) = a.max_iters {
                opts.max_iters = it;
            }
            m.param("terms", a.rank).param("block", a.block).param("max_iters", opts.max_iters);
            let (terms, trace) = btd::btd_ll1_als(&t, a.rank, a.block, &opts)?;
            io::write_json(&model_path, &BtdDoc::from_terms(&terms)?)?;
            m.metric("iterations", trace.iterations()).metric("converged", trace.converged);
            MetricsReport::from_residual(&t, &btd::ll1_reconstruct(&terms)?)?
        }
        Method::Tt => {
            m.param("tol", a.tol);
            let model = tt_svd(&t, a.tol)?;
            for p in io::write_tt(&model_path, &model)? {
                if p != model_path {
                    m.output(&p);
                }
            }
            let recon = multiway::tt::tt_reconstruct(&model)?;
            let report = MetricsReport::from_residual(&t, &recon)?;
            let norm = t.frobenius_norm();
            let rel = if norm > 0.0 { report.residual_norm / norm } else { 0.0 };
            m.metric("relative_error", rel).metric("tt_ranks", model.ranks()).metric("parameters", model.parameter_count());
            report
        }
    };
    let status = check_min_fit(report.relative_fit, a.min_fit);
    if let Some(f) = a.min_fit {
        m.param("min_fit", f);
    }
    m.output(&model_path);
    m.metrics_from(&report);
    info!("{method}: relative fit {:.12}", report.relative_fit);
    Ok((m, status))
}

/// Channels of a signal file: an order-1 tensor, a single row or column, or
/// the columns of a matrix.
fn signal_channels(t: &DenseTensor) -> Result<Vec<Vec<f64>>> {
    let nontrivial: Vec<usize> = t.shape().iter().copied().filter(|&s| s > 1).collect();
    match (t.order(), nontrivial.len()) {
        (_, 0 | 1) => Ok(vec![t.data().to_vec()]),
        (2, 2) => {
            let mat = Matrix::try_from(t.clone())?;
            Ok(mat.columns().map(<[f64]>::to_vec).collect())
        }
        _ => bail!("expected a vector or a samples x channels matrix, got shape {:?}", t.shape()),
    }
}

fn tensorize(cli: &Cli, a: &TensorizeArgs) -> Result<(RunManifest, Status)> {
    let t = read_tensor(&a.input)?;
    let scheme = format!("{:?}", a.scheme).to_lowercase();
    let stem = format!("{}.{scheme}", input_stem(&a.input));
    let out = cli.out_dir.join(format!("{stem}.mwt"));
    let mut m = RunManifest::new("tensorize", cli.seed);
    m.param("scheme", &scheme).param("stem", &stem).input(&a.input);
    let channels = signal_channels(&t)?;
    let len = channels[0].len();
    let result = match a.scheme {
        Scheme::Hankel => {
            let rows = a.rows.unwrap_or(len / 2 + 1);
            if rows == 0 || rows > len {
                bail!("Hankel rows {rows} must lie in 1..={len}");
            }
            let cols = len + 1 - rows;
            m.param("rows", rows).param("cols", cols).param("channels", channels.len());
            let s = hankelize(&channels[0], rows, cols)?.singular_values();
            let ratio = match (s.first(), s.get(1)) {
                (Some(&s0), Some(&s1)) if s0 > 0.0 => s1 / s0,
                _ => 0.0,
            };
            m.metric("singular_value_ratio", ratio).metric("numerical_rank", s.iter().filter(|&&x| x > 1e-10 * s[0]).count());
            let h = hankel_tensorize(&channels, rows, cols)?;
            if channels.len() == 1 {
                h.reshape(vec![rows, cols])?
            } else {
                h
            }
        }
        Scheme::Quantize => {
            if channels.len() != 1 {
                bail!("quantization takes a single signal, got {} channels", channels.len());
            }
            m.param("base", a.base);
            let q = quantize(&channels[0], a.base)?;
            m.metric("order", q.order());
            q
        }
    };
    io::write_mwt1_file(&out, &result)?;
    let back = io::read_mwt1_file(&out)?;
    m.metric("shape", result.shape()).metric("round_trip_max_abs_diff", back.max_abs_diff(&result));
    m.output(&out);
    info!("{scheme}: wrote {:?} tensor to {}", result.shape(), out.display());
    Ok((m, Status::Ok))
}

/// Planted block-sparse core: `block` random indices per mode, Gaussian
/// values on their product.
fn planted_core(shape: &[usize], block: usize, rng: &mut ChaCha8Rng) -> Result<SparseCore> {
    if shape.iter().any(|&s| block > s) {
        bail!("block size {block} exceeds core shape {shape:?}");
    }
    let sets: Vec<Vec<usize>> = shape
        .iter()
        .map(|&s| {
            let mut v = sample(rng, s, block).into_vec();
            v.sort_unstable();
            v
        })
        .collect();
    let mut core = SparseCore::new(shape.to_vec())?;
    let lens = vec![block; shape.len()];
    let mut pos = vec![0; shape.len()];
    loop {
        let idx: Vec<usize> = pos.iter().enumerate().map(|(n, &p)| sets[n][p]).collect();
        let v: f64 = StandardNormal.sample(rng);
        core.insert(idx, v + v.signum())?;
        if !multiway::index::increment(&lens, &mut pos) {
            break;
        }
    }
    Ok(core)
}

fn cs_recover(cli: &Cli, a: &CsArgs) -> Result<(RunManifest, Status)> {
    let alg = format!("{:?}", a.algorithm).to_lowercase();
    let mut m = RunManifest::new("cs-recover", cli.seed);
    let (y, d, truth, stem): (DenseTensor, KronDictionary, Option<SparseCore>, String) = match &a.measurements {
        Some(p) => {
            let dict_path = a.dictionary.as_ref().expect("clap enforces --dictionary");
            let doc: KronDictionaryDoc = serde_json::from_slice(
                &std::fs::read(dict_path).with_context(|| format!("reading {}", dict_path.display()))?,
            )
            .with_context(|| format!("parsing {}", dict_path.display()))?;
            m.input(p).input(dict_path);
            (read_tensor(p)?, doc.to_dictionary()?, None, format!("{}.{alg}", input_stem(p)))
        }
        None => {
            m.param("shape", &a.shape).param("sampling_ratio", a.sampling_ratio);
            let d = kron_cs::dct_dictionary(&a.shape, a.sampling_ratio, cli.seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.wrapping_add(1));
            let core = planted_core(&a.shape, a.block, &mut rng)?;
            let y = kron_cs::kron_apply(&d, &core)?;
            let meas = cli.out_dir.join("planted.measurements.mwt");
            let dict = cli.out_dir.join("planted.dictionary.json");
            let truth_path = cli.out_dir.join("planted.core.json");
            io::write_mwt1_file(&meas, &y)?;
            io::write_json(&dict, &KronDictionaryDoc::from_dictionary(&d))?;
            io::write_json(&truth_path, &core)?;
            m.output(&meas).output(&dict).output(&truth_path);
            (y, d, Some(core), format!("planted.{alg}"))
        }
    };
    m.param("algorithm", &alg).param("stem", &stem).param("tol", a.tol).param("measurement_shape", y.shape());
    let y_norm = y.frobenius_norm();
    let (rec, budget) = match a.algorithm {
        Algorithm::Komp => {
            let k = a.sparsity.unwrap_or_else(|| a.block.pow(d.order() as u32));
            m.param("sparsity", k);
            (kron_cs::kronecker_omp_until(&y, &d, k, a.tol)?, k)
        }
        Algorithm::Nbomp => {
            m.param("block", a.block);
            let br = kron_cs::n_bomp(&y, &d, a.block, &NBompOptions { tol: a.tol, max_iters: None })?;
            m.metric("supports", &br.supports);
            (br.recovery, a.block)
        }
    };
    let residual = if rec.residual_norms.is_empty() { y_norm } else { rec.final_residual() };
    let relative = if y_norm > 0.0 { residual / y_norm } else { 0.0 };
    m.metric("iterations", rec.iterations)
        .metric("relative_residual", relative)
        .metric("nonzeros", rec.core.sparsity());
    info!("{alg}: {} iterations, relative residual {relative:.3e}", rec.iterations);
    if let Some(truth) = &truth {
        let est = rec.core.to_dense();
        m.metric("core_max_abs_error", est.max_abs_diff(&truth.to_dense()));
        let signal = kron_cs::synthesize(&d, truth)?;
        let psnr = compute_psnr(signal.data(), kron_cs::synthesize(&d, &rec.core)?.data())?;
        m.metric("psnr_db", finite_or_string(psnr));
    }
    let out = cli.out_dir.join(format!("{stem}.core.json"));
    io::write_json(&out, &rec.core)?;
    m.output(&out);
    let status = if budget > 0 && !(relative <= a.tol) {
        warn!("relative residual {relative:.3e} above --tol {:.3e}", a.tol);
        Status::ResidualUnmet
    } else {
        Status::Ok
    };
    Ok((m, status))
}

fn bss_demo(cli: &Cli, a: &BssArgs) -> Result<(RunManifest, Status)> {
    let noise_stage = match a.noise_stage {
        Stage::Before => NoiseStage::BeforeHankel,
        Stage::After => NoiseStage::AfterHankel,
    };
    let base = BssConfig { samples: a.samples, sample_rate: a.sample_rate, channels: a.channels, snr_db: None, seed: cli.seed, noise_stage };
    let rows = experiments::bss_sweep(&base, &a.snr, a.trials)?;
    let out = cli.out_dir.join("bss_sae.csv");
    io::write_atomic(&out, experiments::bss_sweep_csv(&rows).as_bytes())?;
    let snr: Vec<serde_json::Value> = a.snr.iter().map(|s| s.map_or_else(|| "inf".into(), serde_json::Value::from)).collect();
    let mut m = RunManifest::new("bss-demo", cli.seed);
    m.param("samples", a.samples)
        .param("channels", a.channels)
        .param("snr_db", snr)
        .param("trials", a.trials)
        .param("sample_rate", a.sample_rate)
        .param("noise_stage", format!("{:?}", a.noise_stage).to_lowercase())
        .metric("source_correlation", bss::source_correlation(a.samples, a.sample_rate))
        .metric("hankel_shape", {
            let (i, j) = bss::hankel_extents(a.samples);
            vec![i, j, a.channels]
        })
        .output(&out);
    for r in &rows {
        let label = r.snr_db.map_or_else(|| "inf".to_string(), |s| format!("{s}"));
        m.metric(
            &format!("median_sae_db@{label}"),
            serde_json::json!({"pca": finite_or_string(r.pca), "ica_cumulant": finite_or_string(r.ica), "cpd": finite_or_string(r.cpd), "btd": finite_or_string(r.btd)}),
        );
        info!("snr {label}: median SAE pca {:.2} ica {:.2} cpd {:.2} btd {:.2} dB", r.pca, r.ica, r.cpd, r.btd);
    }
    Ok((m, Status::Ok))
}

fn regress_demo(cli: &Cli, a: &RegressArgs) -> Result<(RunManifest, Status)> {
    let task = RegressionTask { noise: a.noise, ..Default::default() };
    let rows = experiments::regression_sweep(&task, cli.seed, a.seeds, a.components, a.block_rank)?;
    let out = cli.out_dir.join("regress.csv");
    io::write_atomic(&out, experiments::regression_csv(&rows).as_bytes())?;
    let (hopls, pls) = experiments::regression_means(&rows);
    let mut m = RunManifest::new("regress-demo", cli.seed);
    m.param("components", a.components)
        .param("block_rank", a.block_rank)
        .param("seeds", a.seeds)
        .param("noise", a.noise)
        .param("x_shape", &task.x_shape)
        .param("y_shape", &task.y_shape)
        .metric("mean_hopls_correlation", hopls)
        .metric("mean_pls_correlation", pls)
        .metric("hopls_wins", rows.iter().filter(|r| r.hopls > r.pls).count())
        .output(&out);
    info!("mean test correlation: HOPLS {hopls:.6}, PLS {pls:.6}");
    Ok((m, Status::Ok))
}

fn lmwca_demo(cli: &Cli, a: &LmwcaArgs) -> Result<(RunManifest, Status)> {
    let task = ClassificationTask::default();
    let rows = experiments::lmwca_sweep(&task, &a.noise, a.trials, cli.seed, a.common_fraction)?;
    let out = cli.out_dir.join("lmwca.csv");
    io::write_atomic(&out, experiments::lmwca_csv(&rows).as_bytes())?;
    let mut m = RunManifest::new("lmwca-demo", cli.seed);
    m.param("trials", a.trials)
        .param("noise", &a.noise)
        .param("common_fraction", a.common_fraction)
        .param("task", &task)
        .output(&out);
    for r in &rows {
        m.metric(&format!("accuracy@{}", r.noise), r.accuracy);
        info!("noise {}: accuracy {:.4}", r.noise, r.accuracy);
    }
    Ok((m, Status::Ok))
}
