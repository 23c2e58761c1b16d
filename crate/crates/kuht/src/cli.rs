//! Argument parsing, spec-string parsers, and subcommand dispatch.

use clap::{Args, Parser, Subcommand, ValueEnum};
use kuht::changepoint::{scan, ScanConfig};
use kuht::distributions::{gaussian_target, standard_gaussian_target, DiscretePmf, TargetDensity};
use kuht::experiments::{
    blobs_bandwidth_sweep, default_bandwidth_grid, median_heuristic_bandwidth, median_heuristic_of,
};
use kuht::exponents::{
    estimate_type2_exponent, DiscreteOneSampleMmd, DiscreteTwoSampleMmd, ExponentEstimate,
    KsdTrial, Normalizer, TrialTest,
};
use kuht::io::{emit_bandwidth_csv, emit_exponent_csv, emit_json, load_csv};
use kuht::ksd::{run_ksd_test, KsdThresholdMethod, KsdVariant, SteinKernelCtx};
use kuht::mmd::{
    run_one_sample_test, run_one_sample_via_two_sample, run_two_sample_test, Estimator,
    ThresholdMethod, ThresholdSpec,
};
use kuht::{Error, Kernel, Result, Sample};
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kuht", version, about = "Kernel-based hypothesis tests")]
struct Cli {
    /// Worker threads for Monte Carlo loops (0 = auto); results are
    /// identical for any value
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Biased,
    Unbiased,
}

impl From<EstimatorArg> for Estimator {
    fn from(v: EstimatorArg) -> Self {
        match v {
            EstimatorArg::Biased => Estimator::Biased,
            EstimatorArg::Unbiased => Estimator::Unbiased,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KsdVariantArg {
    V,
    U,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    OneMmd,
    TwoMmd,
    Ksd,
}

#[derive(Args)]
struct TwoSampleArgs {
    /// CSV with the first sample, one observation per row
    #[arg(long)]
    x: PathBuf,
    /// CSV with the second sample
    #[arg(long)]
    y: PathBuf,
    /// Skip the first row of each CSV
    #[arg(long)]
    header: bool,
    /// Kernel spec (gaussian:gamma=G | laplace:gamma=G | imq:c=C,eta=E);
    /// default: Gaussian with the median-heuristic bandwidth
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Biased)]
    variant: EstimatorArg,
    /// df | perm:B=<count> | min:B=<count>
    #[arg(long, default_value = "min:B=500")]
    threshold: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OneSampleMmdArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    header: bool,
    /// Target spec; the plug-in statistic needs closed-form kernel
    /// integrals, shipped for gauss:d=1 with gaussian:gamma=2
    #[arg(long, default_value = "gauss:d=1")]
    target: String,
    #[arg(long, default_value = "gaussian:gamma=2")]
    kernel: String,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Biased)]
    variant: EstimatorArg,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OneSampleDrawArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    header: bool,
    /// Target spec (must provide a sampler), e.g. gauss:d=1,
    /// gauss:mean=1,sd=2, blobs:eps=6
    #[arg(long, default_value = "gauss:d=1")]
    target: String,
    #[arg(long)]
    kernel: Option<String>,
    /// Points drawn from the target (default 10 * m)
    #[arg(long)]
    n_draws: Option<usize>,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Biased)]
    variant: EstimatorArg,
    #[arg(long, default_value = "min:B=500")]
    threshold: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KsdArgs {
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long, default_value = "gauss:d=1")]
    target: String,
    /// Twice-differentiable kernel (gaussian or imq)
    #[arg(long, default_value = "gaussian:gamma=2")]
    kernel: String,
    #[arg(long, value_enum, default_value_t = KsdVariantArg::V)]
    variant: KsdVariantArg,
    /// df | wild:B=<count> | min:B=<count>
    #[arg(long, default_value = "min:B=500")]
    threshold: String,
    /// Upper bound on the Stein kernel, required by the U-statistic variant
    #[arg(long)]
    hp: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ChangepointArgs {
    /// CSV with the observation sequence in time order
    #[arg(long)]
    z: PathBuf,
    #[arg(long)]
    header: bool,
    #[arg(long, default_value_t = 0.1)]
    u: f64,
    #[arg(long, default_value_t = 0.9)]
    v: f64,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long, value_enum)]
    test: TestKind,
    /// Null-side distribution: bern:p=P or discrete:p1,p2,... for the MMD
    /// tests, a target spec for ksd
    #[arg(long)]
    p: String,
    /// Alternative distribution, same spec language as --p
    #[arg(long)]
    q: String,
    #[arg(long, default_value = "gaussian:gamma=2")]
    kernel: String,
    /// Comma-separated strictly increasing sample sizes
    #[arg(long, default_value = "100,200,300,400")]
    sizes: String,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Report rates in bits instead of nats
    #[arg(long)]
    bits: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV path for the curve (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BlobsArgs {
    /// Correlation parameter of the alternative; must be > 1
    #[arg(long, default_value_t = 6.0)]
    eps: f64,
    /// Points per sample (n = m)
    #[arg(long, default_value_t = 720)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// Permutation replicates for the bootstrap threshold
    #[arg(long, default_value_t = 500)]
    perm: usize,
    /// Comma-separated strictly increasing bandwidth grid
    /// (default: 15 log-spaced values in [1e-2, 1e5])
    #[arg(long)]
    bandwidths: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Bandwidth sweep of the two-sample test on the Blobs benchmark
    Blobs(BlobsArgs),
}

#[derive(Subcommand)]
enum Command {
    /// MMD two-sample test
    TwoSample(TwoSampleArgs),
    /// One-sample MMD plug-in test against a known target
    OneSampleMmd(OneSampleMmdArgs),
    /// One-sample testing by drawing from the target and running two-sample
    OneSampleDraw(OneSampleDrawArgs),
    /// Kernel Stein discrepancy goodness-of-fit test
    Ksd(KsdArgs),
    /// Off-line change-point scan
    Changepoint(ChangepointArgs),
    /// Monte Carlo type-II error exponent curve
    Exponent(ExponentArgs),
    /// Canned experiment suites
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

fn parse_param_map(params: &str, what: &str) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for part in params.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("{what} parameter '{part}' missing '='")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::InvalidParam(format!("{what} parameter '{part}' not numeric")))?;
        map.insert(k.to_string(), v);
    }
    Ok(map)
}

/// `gauss:d=1` (optionally mean=,sd=) or `blobs:eps=<f>` (the correlated
/// alternative side).
fn parse_target(spec: &str) -> Result<TargetDensity> {
    let (family, params) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidParam(format!("target spec '{spec}' missing ':'")))?;
    let map = parse_param_map(params, "target")?;
    match family {
        "gauss" => {
            if let Some(&d) = map.get("d") {
                if d != 1.0 {
                    return Err(Error::InvalidParam(
                        "only d=1 Gaussian targets are shipped".into(),
                    ));
                }
            }
            let mean = map.get("mean").copied().unwrap_or(0.0);
            let sd = map.get("sd").copied().unwrap_or(1.0);
            if mean == 0.0 && sd == 1.0 {
                Ok(standard_gaussian_target())
            } else {
                gaussian_target(mean, sd)
            }
        }
        "blobs" => {
            let eps = *map
                .get("eps")
                .ok_or_else(|| Error::InvalidParam("blobs target needs eps=".into()))?;
            kuht::distributions::blobs_target(kuht::distributions::BlobsSide::Q, eps)
        }
        other => Err(Error::InvalidParam(format!("unknown target family '{other}'"))),
    }
}

/// `bern:p=<f>` or `discrete:p1,p2,...`.
fn parse_pmf(spec: &str) -> Result<DiscretePmf> {
    let (family, params) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidParam(format!("distribution spec '{spec}' missing ':'")))?;
    match family {
        "bern" => {
            let map = parse_param_map(params, "distribution")?;
            let p = *map
                .get("p")
                .ok_or_else(|| Error::InvalidParam("bern needs p=".into()))?;
            DiscretePmf::bernoulli(p)
        }
        "discrete" => {
            let probs: Vec<f64> = params
                .split(',')
                .map(|v| {
                    v.parse::<f64>().map_err(|_| {
                        Error::InvalidParam(format!("discrete entry '{v}' not numeric"))
                    })
                })
                .collect::<Result<_>>()?;
            DiscretePmf::new(probs)
        }
        other => Err(Error::InvalidParam(format!(
            "unknown distribution family '{other}'"
        ))),
    }
}

fn parse_b(params: &str, method: &str) -> Result<usize> {
    let (k, v) = params
        .split_once('=')
        .ok_or_else(|| Error::InvalidParam(format!("{method} needs B=<count>")))?;
    if k != "B" {
        return Err(Error::InvalidParam(format!("{method} needs B=<count>")));
    }
    v.parse()
        .map_err(|_| Error::InvalidParam(format!("{method} count '{v}' not an integer")))
}

fn parse_mmd_threshold(spec: &str) -> Result<ThresholdMethod> {
    match spec.split_once(':') {
        None if spec == "df" => Ok(ThresholdMethod::DistributionFree),
        Some(("perm", rest)) => Ok(ThresholdMethod::Permutation { b: parse_b(rest, "perm")? }),
        Some(("min", rest)) => Ok(ThresholdMethod::MinOfBoth { b: parse_b(rest, "min")? }),
        _ => Err(Error::InvalidParam(format!(
            "threshold '{spec}' is not df, perm:B=<count>, or min:B=<count>"
        ))),
    }
}

fn parse_ksd_threshold(spec: &str) -> Result<KsdThresholdMethod> {
    match spec.split_once(':') {
        None if spec == "df" => Ok(KsdThresholdMethod::DistributionFree),
        Some(("wild", rest)) => Ok(KsdThresholdMethod::WildBootstrap { b: parse_b(rest, "wild")? }),
        Some(("min", rest)) => Ok(KsdThresholdMethod::MinOfBoth { b: parse_b(rest, "min")? }),
        _ => Err(Error::InvalidParam(format!(
            "threshold '{spec}' is not df, wild:B=<count>, or min:B=<count>"
        ))),
    }
}

fn parse_usize_list(spec: &str, what: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidParam(format!("{what} entry '{v}' not an integer")))
        })
        .collect()
}

fn parse_f64_list(spec: &str, what: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParam(format!("{what} entry '{v}' not numeric")))
        })
        .collect()
}

fn kernel_from_spec_or_median(spec: &Option<String>, median_of: &Sample) -> Result<Kernel> {
    match spec {
        Some(s) => Kernel::parse_spec(s),
        None => Kernel::gaussian(median_heuristic_of(median_of)?),
    }
}

fn exponent_in_bits(mut est: ExponentEstimate) -> ExponentEstimate {
    let ln2 = std::f64::consts::LN_2;
    for p in &mut est.points {
        if let Some(r) = &mut p.minus_log_beta_over_size {
            *r /= ln2;
        }
    }
    if let Some(s) = &mut est.slope {
        *s /= ln2;
    }
    if let Some(s) = &mut est.slope_se {
        *s /= ln2;
    }
    est
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TwoSample(a) => {
            let x = load_csv(&a.x, a.header)?;
            let y = load_csv(&a.y, a.header)?;
            let kernel = match &a.kernel {
                Some(s) => Kernel::parse_spec(s)?,
                None => Kernel::gaussian(median_heuristic_bandwidth(&x, &y)?)?,
            };
            let spec = ThresholdSpec {
                method: parse_mmd_threshold(&a.threshold)?,
                alpha: a.alpha,
            };
            let report = run_two_sample_test(&x, &y, &kernel, a.variant.into(), spec, a.seed)?;
            emit_json(&report, a.out.as_deref())
        }
        Command::OneSampleMmd(a) => {
            let y = load_csv(&a.y, a.header)?;
            let target = parse_target(&a.target)?;
            let kernel = Kernel::parse_spec(&a.kernel)?;
            let report =
                run_one_sample_test(&target, &y, &kernel, a.variant.into(), a.alpha, a.seed)?;
            emit_json(&report, a.out.as_deref())
        }
        Command::OneSampleDraw(a) => {
            let y = load_csv(&a.y, a.header)?;
            let target = parse_target(&a.target)?;
            let kernel = kernel_from_spec_or_median(&a.kernel, &y)?;
            let n_draws = a.n_draws.unwrap_or(10 * y.len());
            let spec = ThresholdSpec {
                method: parse_mmd_threshold(&a.threshold)?,
                alpha: a.alpha,
            };
            let report = run_one_sample_via_two_sample(
                &target,
                &y,
                &kernel,
                n_draws,
                a.variant.into(),
                spec,
                a.seed,
            )?;
            emit_json(&report, a.out.as_deref())
        }
        Command::Ksd(a) => {
            let y = load_csv(&a.y, a.header)?;
            let ctx = SteinKernelCtx::new(parse_target(&a.target)?, Kernel::parse_spec(&a.kernel)?)?;
            let variant = match a.variant {
                KsdVariantArg::V => KsdVariant::V,
                KsdVariantArg::U => KsdVariant::U,
            };
            let report = run_ksd_test(
                &ctx,
                &y,
                variant,
                parse_ksd_threshold(&a.threshold)?,
                a.alpha,
                a.hp,
                a.seed,
            )?;
            emit_json(&report, a.out.as_deref())
        }
        Command::Changepoint(a) => {
            let z = load_csv(&a.z, a.header)?;
            let kernel = kernel_from_spec_or_median(&a.kernel, &z)?;
            let config = ScanConfig {
                u: a.u,
                v: a.v,
                alpha: a.alpha,
                kernel,
                seed: a.seed,
            };
            let result = scan(&z, &config)?;
            emit_json(&result, a.out.as_deref())
        }
        Command::Exponent(a) => {
            let sizes = parse_usize_list(&a.sizes, "sizes")?;
            let kernel = Kernel::parse_spec(&a.kernel)?;
            let (test, normalizer): (Box<dyn TrialTest>, Normalizer) = match a.test {
                TestKind::OneMmd => (
                    Box::new(DiscreteOneSampleMmd::new(
                        parse_pmf(&a.p)?,
                        parse_pmf(&a.q)?,
                        kernel,
                        a.alpha,
                    )?),
                    Normalizer::M,
                ),
                TestKind::TwoMmd => (
                    Box::new(DiscreteTwoSampleMmd::new(
                        parse_pmf(&a.p)?,
                        parse_pmf(&a.q)?,
                        kernel,
                        a.alpha,
                    )?),
                    Normalizer::NPlusM,
                ),
                TestKind::Ksd => {
                    let q = parse_target(&a.q)?;
                    if !q.has_sampler() {
                        return Err(Error::UnsupportedTarget("a sampler"));
                    }
                    (
                        Box::new(KsdTrial {
                            ctx: SteinKernelCtx::new(parse_target(&a.p)?, kernel)?,
                            q,
                            alpha: a.alpha,
                        }),
                        Normalizer::M,
                    )
                }
            };
            let mut est = estimate_type2_exponent(&*test, &sizes, a.trials, normalizer, a.seed)?;
            if a.bits {
                est = exponent_in_bits(est);
            }
            emit_exponent_csv(&est, a.out.as_deref())
        }
        Command::Experiment(ExperimentCmd::Blobs(a)) => {
            let bandwidths = match &a.bandwidths {
                Some(s) => parse_f64_list(s, "bandwidths")?,
                None => default_bandwidth_grid(),
            };
            let curve = blobs_bandwidth_sweep(
                a.n, a.eps, &bandwidths, a.trials, a.alpha, a.perm, a.seed,
            )?;
            emit_bandwidth_csv(&curve, a.out.as_deref())
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 3,
        Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 3,
        _ => 2,
    }
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { 0 } else { 2 };
        }
    };
    if cli.threads > 0 {
        // harmless if a pool already exists (e.g. repeated calls in tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "{{\"error\":{}}}",
                serde_json::to_string(&e.to_string()).unwrap_or_else(|_| "\"unknown\"".into())
            );
            exit_code(&e)
        }
    }
}
