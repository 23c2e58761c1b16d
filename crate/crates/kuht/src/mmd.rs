//! MMD statistics (one- and two-sample, biased and unbiased), their
//! distribution-free and permutation thresholds, and the resulting tests.

use crate::distributions::TargetDensity;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::real::Real;
use crate::report::TestReport;
use crate::rng::stream_rng;
use crate::sample::{Matrix, Sample};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MmdVariant {
    BiasedOneSample,
    BiasedTwoSample,
    UnbiasedOneSample,
    UnbiasedTwoSample,
}

impl MmdVariant {
    pub fn is_biased(self) -> bool {
        matches!(self, MmdVariant::BiasedOneSample | MmdVariant::BiasedTwoSample)
    }
}

/// Which estimator a two-sample test uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Biased,
    Unbiased,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Biased => "biased",
            Estimator::Unbiased => "unbiased",
        }
    }
}

/// A squared-MMD estimate with its provenance.
#[derive(Clone, Copy, Debug)]
pub struct MmdStat<T = f64> {
    pub value: T,
    pub variant: MmdVariant,
    pub n: usize,
    pub m: usize,
}

/// How a test threshold is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMethod {
    DistributionFree,
    Permutation { b: usize },
    /// min(distribution-free, permutation), the recommended practical fix.
    MinOfBoth { b: usize },
}

impl ThresholdMethod {
    pub fn name(self) -> String {
        match self {
            ThresholdMethod::DistributionFree => "df".into(),
            ThresholdMethod::Permutation { b } => format!("perm:B={b}"),
            ThresholdMethod::MinOfBoth { b } => format!("min:B={b}"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ThresholdSpec {
    pub method: ThresholdMethod,
    pub alpha: f64,
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
        }
        match self.method {
            ThresholdMethod::Permutation { b } | ThresholdMethod::MinOfBoth { b } if b < 100 => {
                Err(Error::InvalidParam("permutation B must be >= 100".into()))
            }
            _ => Ok(()),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam("alpha must lie in (0, 1)".into()))
    }
}

/// Eq. (8) estimator: (1/n^2) sum k(x,x) + (1/m^2) sum k(y,y) - (2/nm) sum k(x,y).
pub fn mmd2_biased_two_sample<T: Real>(
    x: &Sample<T>,
    y: &Sample<T>,
    kernel: &Kernel<T>,
) -> Result<MmdStat<T>> {
    let gxx = kernel.gram(x, x)?;
    let gyy = kernel.gram(y, y)?;
    let gxy = kernel.gram(x, y)?;
    let n = T::c(x.len() as f64);
    let m = T::c(y.len() as f64);
    let two = T::c(2.0);
    let value = gxx.sum() / (n * n) + gyy.sum() / (m * m) - two * gxy.sum() / (n * m);
    Ok(MmdStat {
        value,
        variant: MmdVariant::BiasedTwoSample,
        n: x.len(),
        m: y.len(),
    })
}

/// Diagonal-free estimator with 1/(n(n-1)) and 1/(m(m-1)) normalizers;
/// unbiased for the population squared MMD, may be negative.
pub fn mmd2_unbiased_two_sample<T: Real>(
    x: &Sample<T>,
    y: &Sample<T>,
    kernel: &Kernel<T>,
) -> Result<MmdStat<T>> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidParam(
            "unbiased two-sample statistic needs n >= 2 and m >= 2".into(),
        ));
    }
    let gxx = kernel.gram(x, x)?;
    let gyy = kernel.gram(y, y)?;
    let gxy = kernel.gram(x, y)?;
    let n = T::c(x.len() as f64);
    let m = T::c(y.len() as f64);
    let two = T::c(2.0);
    let one = T::one();
    let value = (gxx.sum() - gxx.diag_sum()) / (n * (n - one))
        + (gyy.sum() - gyy.diag_sum()) / (m * (m - one))
        - two * gxy.sum() / (n * m);
    Ok(MmdStat {
        value,
        variant: MmdVariant::UnbiasedTwoSample,
        n: x.len(),
        m: y.len(),
    })
}

/// Eq. (7) plug-in estimator against a target with closed-form kernel integrals.
pub fn mmd2_biased_one_sample(
    target: &TargetDensity,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
) -> Result<MmdStat<f64>> {
    let ki = target.kernel_integrals(kernel)?;
    let gyy = kernel.gram(y, y)?;
    let m = y.len() as f64;
    let embed_sum: f64 = y.rows_iter().map(|r| (ki.embedding)(r)).sum();
    let value = ki.double_integral + gyy.sum() / (m * m) - 2.0 * embed_sum / m;
    Ok(MmdStat {
        value,
        variant: MmdVariant::BiasedOneSample,
        n: 0,
        m: y.len(),
    })
}

/// One-sample estimator with the sample-sample diagonal removed.
pub fn mmd2_unbiased_one_sample(
    target: &TargetDensity,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
) -> Result<MmdStat<f64>> {
    if y.len() < 2 {
        return Err(Error::InvalidParam(
            "unbiased one-sample statistic needs m >= 2".into(),
        ));
    }
    let ki = target.kernel_integrals(kernel)?;
    let gyy = kernel.gram(y, y)?;
    let m = y.len() as f64;
    let embed_sum: f64 = y.rows_iter().map(|r| (ki.embedding)(r)).sum();
    let value =
        ki.double_integral + (gyy.sum() - gyy.diag_sum()) / (m * (m - 1.0)) - 2.0 * embed_sum / m;
    Ok(MmdStat {
        value,
        variant: MmdVariant::UnbiasedOneSample,
        n: 0,
        m: y.len(),
    })
}

/// sqrt of a squared statistic, floored at zero against rounding cancellation.
pub fn root_statistic<T: Real>(squared: T) -> T {
    if squared > T::zero() {
        squared.sqrt()
    } else {
        T::zero()
    }
}

/// One-sample distribution-free threshold:
/// gamma_m = sqrt(2K/m) (1 + sqrt(ln(1/alpha))), compared with the root statistic.
pub fn threshold_one_sample<T: Real>(k_bound: T, m: usize, alpha: f64) -> Result<T> {
    check_alpha(alpha)?;
    if !(k_bound > T::zero()) || m == 0 {
        return Err(Error::InvalidParam("need K > 0 and m >= 1".into()));
    }
    let mf = T::c(m as f64);
    let a = T::c(alpha);
    Ok((T::c(2.0) * k_bound / mf).sqrt() * (T::one() + (a.recip().ln()).sqrt()))
}

/// Two-sample distribution-free threshold:
/// gamma_{n,m} = 2 sqrt(K/n) + 2 sqrt(K/m) + sqrt(2 ln(2/alpha) (K/m + K/n)).
pub fn threshold_two_sample<T: Real>(k_bound: T, n: usize, m: usize, alpha: f64) -> Result<T> {
    check_alpha(alpha)?;
    if !(k_bound > T::zero()) || n == 0 || m == 0 {
        return Err(Error::InvalidParam("need K > 0, n >= 1, m >= 1".into()));
    }
    let nf = T::c(n as f64);
    let mf = T::c(m as f64);
    let two = T::c(2.0);
    let a = T::c(alpha);
    Ok(two * (k_bound / nf).sqrt()
        + two * (k_bound / mf).sqrt()
        + (two * (two / a).ln() * (k_bound / mf + k_bound / nf)).sqrt())
}

/// Threshold for the unbiased two-sample test: gamma_{n,m}^2 + K/n + K/m.
pub fn threshold_two_sample_unbiased<T: Real>(
    k_bound: T,
    n: usize,
    m: usize,
    alpha: f64,
) -> Result<T> {
    let g = threshold_two_sample(k_bound, n, m, alpha)?;
    let nf = T::c(n as f64);
    let mf = T::c(m as f64);
    Ok(g * g + k_bound / nf + k_bound / mf)
}

/// Pooled Gram matrix of (X, Y) with the running sums needed to recompute
/// either statistic on arbitrary relabelings in O((n+m)^2 / 2) per relabeling.
pub struct PooledGram {
    gram: Matrix<f64>,
    row_sums: Vec<f64>,
    total: f64,
    diag_total: f64,
    pub n: usize,
    pub m: usize,
}

impl PooledGram {
    pub fn new(x: &Sample<f64>, y: &Sample<f64>, kernel: &Kernel<f64>) -> Result<Self> {
        let pooled = x.concat(y)?;
        Self::from_pooled(&pooled, x.len(), y.len(), kernel)
    }

    pub fn from_pooled(
        pooled: &Sample<f64>,
        n: usize,
        m: usize,
        kernel: &Kernel<f64>,
    ) -> Result<Self> {
        if n + m != pooled.len() {
            return Err(Error::InvalidParam("pooled size must equal n + m".into()));
        }
        Self::from_gram(kernel.gram(pooled, pooled)?, n, m)
    }

    /// Wraps an already-built pooled Gram matrix (rows 0..n are X).
    pub fn from_gram(gram: Matrix<f64>, n: usize, m: usize) -> Result<Self> {
        if gram.rows() != n + m || gram.cols() != n + m {
            return Err(Error::InvalidParam("gram must be (n+m) x (n+m)".into()));
        }
        let row_sums = gram.row_sums();
        let total = row_sums.iter().sum();
        let diag_total = gram.diag_sum();
        Ok(Self {
            gram,
            row_sums,
            total,
            diag_total,
            n,
            m,
        })
    }

    /// Squared statistic when `sel` (sorted, length n) indexes the X block.
    pub fn stat_for_selection(&self, sel: &[usize], estimator: Estimator) -> f64 {
        debug_assert_eq!(sel.len(), self.n);
        let mut s_xx = 0.0;
        let mut d_xx = 0.0;
        let mut s_x1 = 0.0;
        for &i in sel {
            let row = self.gram.row(i);
            let mut acc = 0.0;
            for &j in sel {
                acc += row[j];
            }
            s_xx += acc;
            d_xx += row[i];
            s_x1 += self.row_sums[i];
        }
        let s_xy = s_x1 - s_xx;
        let s_yy = self.total - 2.0 * s_x1 + s_xx;
        let n = self.n as f64;
        let m = self.m as f64;
        match estimator {
            Estimator::Biased => s_xx / (n * n) + s_yy / (m * m) - 2.0 * s_xy / (n * m),
            Estimator::Unbiased => {
                let d_yy = self.diag_total - d_xx;
                (s_xx - d_xx) / (n * (n - 1.0)) + (s_yy - d_yy) / (m * (m - 1.0))
                    - 2.0 * s_xy / (n * m)
            }
        }
    }

    /// Squared statistic of the original (X, Y) labeling.
    pub fn observed(&self, estimator: Estimator) -> f64 {
        let sel: Vec<usize> = (0..self.n).collect();
        self.stat_for_selection(&sel, estimator)
    }
}

/// Index of the order statistic used as a permutation/bootstrap quantile:
/// the ceil((1-alpha)(B+1))-th smallest of B replicates (clamped to B).
pub fn quantile_order_index(b: usize, alpha: f64) -> usize {
    let k = ((1.0 - alpha) * (b as f64 + 1.0)).ceil() as usize;
    k.clamp(1, b)
}

fn permutation_replicates(
    pooled: &PooledGram,
    estimator: Estimator,
    b: usize,
    seed: u64,
    root_scale: bool,
) -> Vec<f64> {
    use rayon::prelude::*;
    (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, &[0x7065726d, rep]);
            let mut sel =
                rand::seq::index::sample(&mut rng, pooled.n + pooled.m, pooled.n).into_vec();
            sel.sort_unstable();
            let sq = pooled.stat_for_selection(&sel, estimator);
            if root_scale {
                root_statistic(sq)
            } else {
                sq
            }
        })
        .collect()
}

/// Permutation threshold on the scale of the compared statistic
/// (root MMD for the biased estimator, squared for the unbiased one).
pub fn threshold_permutation(
    x: &Sample<f64>,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
    estimator: Estimator,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if x.len() + y.len() < 4 {
        return Err(Error::InvalidParam("pooled size must be >= 4".into()));
    }
    if b < 100 {
        return Err(Error::InvalidParam("permutation B must be >= 100".into()));
    }
    let pooled = PooledGram::new(x, y, kernel)?;
    Ok(threshold_permutation_pooled(&pooled, estimator, b, alpha, seed))
}

/// Same as [`threshold_permutation`] with a precomputed pooled Gram.
pub fn threshold_permutation_pooled(
    pooled: &PooledGram,
    estimator: Estimator,
    b: usize,
    alpha: f64,
    seed: u64,
) -> f64 {
    let root_scale = estimator == Estimator::Biased;
    let mut reps = permutation_replicates(pooled, estimator, b, seed, root_scale);
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    reps[quantile_order_index(b, alpha) - 1]
}

/// Whether `observed` stays at or below the permutation threshold, without
/// materializing all B replicates: the threshold is the k-th smallest of B,
/// so the observed value passes iff at least B + 1 - k replicates reach it.
/// Stops as soon as either outcome is certain; the decision is identical to
/// comparing against [`threshold_permutation_pooled`].
pub fn permutation_accepts_pooled(
    pooled: &PooledGram,
    estimator: Estimator,
    b: usize,
    alpha: f64,
    seed: u64,
    observed: f64,
) -> bool {
    let root_scale = estimator == Estimator::Biased;
    let k = quantile_order_index(b, alpha);
    let needed_at_or_above = b + 1 - k;
    let mut at_or_above = 0usize;
    for rep in 0..b as u64 {
        let mut rng = stream_rng(seed, &[0x7065726d, rep]);
        let mut sel =
            rand::seq::index::sample(&mut rng, pooled.n + pooled.m, pooled.n).into_vec();
        sel.sort_unstable();
        let sq = pooled.stat_for_selection(&sel, estimator);
        let value = if root_scale { root_statistic(sq) } else { sq };
        if value >= observed {
            at_or_above += 1;
            if at_or_above >= needed_at_or_above {
                return true;
            }
        }
        let below = rep as usize + 1 - at_or_above;
        if below > b - needed_at_or_above {
            return false;
        }
    }
    at_or_above >= needed_at_or_above
}

/// Level-alpha two-sample test. The biased estimator compares the root
/// statistic with gamma_{n,m}; the unbiased one compares the squared
/// statistic with gamma_{n,m}^2 + K/n + K/m.
pub fn run_two_sample_test(
    x: &Sample<f64>,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
    estimator: Estimator,
    spec: ThresholdSpec,
    seed: u64,
) -> Result<TestReport> {
    spec.validate()?;
    if estimator == Estimator::Unbiased && (x.len() < 2 || y.len() < 2) {
        return Err(Error::InvalidParam("unbiased estimator needs n, m >= 2".into()));
    }
    let pooled = PooledGram::new(x, y, kernel)?;
    run_two_sample_test_pooled(&pooled, kernel, estimator, spec, seed, "two-sample")
}

pub(crate) fn run_two_sample_test_pooled(
    pooled: &PooledGram,
    kernel: &Kernel<f64>,
    estimator: Estimator,
    spec: ThresholdSpec,
    seed: u64,
    test_name: &str,
) -> Result<TestReport> {
    let (n, m) = (pooled.n, pooled.m);
    let k_bound = kernel.bound();
    let statistic = match estimator {
        Estimator::Biased => root_statistic(pooled.observed(Estimator::Biased)),
        Estimator::Unbiased => pooled.observed(Estimator::Unbiased),
    };
    let df = || -> Result<f64> {
        match estimator {
            Estimator::Biased => threshold_two_sample(k_bound, n, m, spec.alpha),
            Estimator::Unbiased => threshold_two_sample_unbiased(k_bound, n, m, spec.alpha),
        }
    };
    let perm = |b: usize| -> Result<f64> {
        if n + m < 4 {
            return Err(Error::InvalidParam("pooled size must be >= 4".into()));
        }
        Ok(threshold_permutation_pooled(pooled, estimator, b, spec.alpha, seed))
    };
    let threshold = match spec.method {
        ThresholdMethod::DistributionFree => df()?,
        ThresholdMethod::Permutation { b } => perm(b)?,
        ThresholdMethod::MinOfBoth { b } => df()?.min(perm(b)?),
    };
    Ok(TestReport::new(
        test_name,
        statistic,
        threshold,
        spec.alpha,
        spec.method.name(),
        estimator.name(),
        kernel.to_string(),
        n,
        m,
        seed,
    ))
}

/// Plug-in one-sample test (Eq. (7) statistic vs the distribution-free
/// threshold); needs closed-form integrals on the target.
pub fn run_one_sample_test(
    target: &TargetDensity,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
    estimator: Estimator,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    let k_bound = kernel.bound();
    let m = y.len();
    let (statistic, threshold, variant) = match estimator {
        Estimator::Biased => {
            let stat = mmd2_biased_one_sample(target, y, kernel)?;
            (
                root_statistic(stat.value),
                threshold_one_sample(k_bound, m, alpha)?,
                "biased",
            )
        }
        Estimator::Unbiased => {
            let stat = mmd2_unbiased_one_sample(target, y, kernel)?;
            let g = threshold_one_sample(k_bound, m, alpha)?;
            (stat.value, g * g + k_bound / m as f64, "unbiased")
        }
    };
    Ok(TestReport::new(
        "one-sample-mmd",
        statistic,
        threshold,
        alpha,
        "df".into(),
        variant,
        kernel.to_string(),
        0,
        m,
        seed,
    ))
}

/// One-sample testing via the two-sample route: draw `n_draws` points from the
/// target, then run the two-sample test.
pub fn run_one_sample_via_two_sample(
    target: &TargetDensity,
    y: &Sample<f64>,
    kernel: &Kernel<f64>,
    n_draws: usize,
    estimator: Estimator,
    spec: ThresholdSpec,
    seed: u64,
) -> Result<TestReport> {
    spec.validate()?;
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    if n_draws == 0 {
        return Err(Error::InvalidParam("n_draws must be >= 1".into()));
    }
    let mut rng = stream_rng(seed, &[0x64726177]);
    let x = target.sample(n_draws, &mut rng)?;
    let pooled = PooledGram::new(&x, y, kernel)?;
    run_two_sample_test_pooled(&pooled, kernel, estimator, spec, seed, "one-sample-draw")
}
