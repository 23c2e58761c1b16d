//! KL divergence, the two-sample exponent D* on finite alphabets, and a Monte
//! Carlo harness estimating empirical type-II error exponents.

use crate::distributions::{DiscretePmf, TargetDensity};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::ksd::{ksd2_v, threshold_ksd, SteinKernelCtx};
use crate::mmd::{root_statistic, threshold_one_sample, threshold_two_sample};
use crate::rng::stream_rng;
use crate::sample::Matrix;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// D(P || Q) in nats; +infinity when P charges a point Q does not.
pub fn kld(p: &DiscretePmf, q: &DiscretePmf) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    let mut d = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs().iter()) {
        if pi > 0.0 {
            if qi == 0.0 {
                return Ok(f64::INFINITY);
            }
            d += pi * (pi / qi).ln();
        }
    }
    Ok(d.max(0.0))
}

/// D*(P, Q, c) = inf_R c D(R||P) + (1-c) D(R||Q) = -ln sum_x P(x)^c Q(x)^{1-c}.
pub fn dstar(p: &DiscretePmf, q: &DiscretePmf, c: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParam("c must lie in (0, 1)".into()));
    }
    let z: f64 = p
        .probs()
        .iter()
        .zip(q.probs().iter())
        .map(|(&pi, &qi)| pi.powf(c) * qi.powf(1.0 - c))
        .sum();
    if z <= 0.0 {
        return Err(Error::DegenerateMixture);
    }
    Ok((-z.ln()).max(0.0))
}

/// The minimizer of D*'s objective: R*(x) = P(x)^c Q(x)^{1-c} / Z.
pub fn geometric_mixture(p: &DiscretePmf, q: &DiscretePmf, c: f64) -> Result<DiscretePmf> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParam("c must lie in (0, 1)".into()));
    }
    let raw: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs().iter())
        .map(|(&pi, &qi)| pi.powf(c) * qi.powf(1.0 - c))
        .collect();
    let z: f64 = raw.iter().sum();
    if z <= 0.0 {
        return Err(Error::DegenerateMixture);
    }
    let probs: Vec<f64> = raw.iter().map(|v| v / z).collect();
    // renormalize away the last rounding ulp so DiscretePmf's sum check passes
    let total: f64 = probs.iter().sum();
    DiscretePmf::new(probs.into_iter().map(|v| v / total).collect())
}

/// Objective c D(r||P) + (1-c) D(r||Q) for a point r on the simplex.
fn dstar_objective(r: &[f64], p: &[f64], q: &[f64], c: f64) -> f64 {
    let mut v = 0.0;
    for i in 0..r.len() {
        if r[i] > 0.0 {
            if p[i] == 0.0 || q[i] == 0.0 {
                return f64::INFINITY;
            }
            v += r[i] * (c * (r[i] / p[i]).ln() + (1.0 - c) * (r[i] / q[i]).ln());
        }
    }
    v
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for v in 0..=total {
        prefix.push(v);
        compositions(total - v, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Direct numerical minimization of D*'s objective over the probability
/// simplex: a coarse composition grid followed by pattern search with
/// halving step sizes. Serves as an oracle for [`dstar`]; it never uses the
/// closed form.
pub fn dstar_by_simplex_search(p: &DiscretePmf, q: &DiscretePmf, c: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidParam("c must lie in (0, 1)".into()));
    }
    let t = p.len();
    let (pp, qq) = (p.probs(), q.probs());
    let grid = 8usize;
    let mut all = Vec::new();
    compositions(grid, t, &mut Vec::new(), &mut all);
    let mut best = vec![0.0; t];
    let mut best_val = f64::INFINITY;
    for comp in &all {
        let r: Vec<f64> = comp.iter().map(|&k| k as f64 / grid as f64).collect();
        let v = dstar_objective(&r, pp, qq, c);
        if v < best_val {
            best_val = v;
            best = r;
        }
    }
    if !best_val.is_finite() {
        return Err(Error::DegenerateMixture);
    }
    let mut h = 1.0 / grid as f64;
    while h > 1e-10 {
        let mut improved = false;
        for i in 0..t {
            for j in 0..t {
                if i == j {
                    continue;
                }
                if best[j] < h {
                    continue;
                }
                let mut cand = best.clone();
                cand[i] += h;
                cand[j] -= h;
                let v = dstar_objective(&cand, pp, qq, c);
                if v < best_val {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    Ok(best_val.max(0.0))
}

/// A hypothesis test run repeatedly by the exponent harness. Each call draws
/// fresh data (null side per the test's contract, alternative side from Q)
/// and reports whether H0 was accepted — a type-II error.
pub trait TrialTest: Sync {
    fn accepts(&self, size: usize, rng: &mut ChaCha8Rng) -> bool;
    fn name(&self) -> &'static str;
}

fn discrete_mmd2(gram: &Matrix<f64>, diff: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (i, &di) in diff.iter().enumerate() {
        let row = gram.row(i);
        let mut acc = 0.0;
        for (j, &dj) in diff.iter().enumerate() {
            acc += row[j] * dj;
        }
        d2 += di * acc;
    }
    d2
}

/// One-sample plug-in MMD test on a finite alphabet with known null P;
/// each trial draws size-m data from Q and computes d_k(P, Q_hat) via
/// kernel sums over the support.
pub struct DiscreteOneSampleMmd {
    p: DiscretePmf,
    q: DiscretePmf,
    gram: Matrix<f64>,
    k_bound: f64,
    alpha: f64,
}

impl DiscreteOneSampleMmd {
    pub fn new(p: DiscretePmf, q: DiscretePmf, kernel: Kernel<f64>, alpha: f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::AlphabetMismatch(p.len(), q.len()));
        }
        let support = p.support_points();
        let gram = kernel.gram(&support, &support)?;
        Ok(Self {
            p,
            q,
            gram,
            k_bound: kernel.bound(),
            alpha,
        })
    }
}

impl TrialTest for DiscreteOneSampleMmd {
    fn accepts(&self, size: usize, rng: &mut ChaCha8Rng) -> bool {
        let counts = self.q.sample_counts(size, rng);
        let m = size as f64;
        let diff: Vec<f64> = self
            .p
            .probs()
            .iter()
            .zip(counts.iter())
            .map(|(&pi, &ci)| pi - ci as f64 / m)
            .collect();
        let stat = root_statistic(discrete_mmd2(&self.gram, &diff));
        let gamma = threshold_one_sample(self.k_bound, size, self.alpha).expect("valid threshold");
        stat <= gamma
    }

    fn name(&self) -> &'static str {
        "one-mmd"
    }
}

/// Two-sample MMD test on a finite alphabet with n = m = size per trial;
/// X from P, Y from Q, compared against the distribution-free threshold.
pub struct DiscreteTwoSampleMmd {
    p: DiscretePmf,
    q: DiscretePmf,
    gram: Matrix<f64>,
    k_bound: f64,
    alpha: f64,
}

impl DiscreteTwoSampleMmd {
    pub fn new(p: DiscretePmf, q: DiscretePmf, kernel: Kernel<f64>, alpha: f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::AlphabetMismatch(p.len(), q.len()));
        }
        let support = p.support_points();
        let gram = kernel.gram(&support, &support)?;
        Ok(Self {
            p,
            q,
            gram,
            k_bound: kernel.bound(),
            alpha,
        })
    }
}

impl TrialTest for DiscreteTwoSampleMmd {
    fn accepts(&self, size: usize, rng: &mut ChaCha8Rng) -> bool {
        let pc = self.p.sample_counts(size, rng);
        let qc = self.q.sample_counts(size, rng);
        let n = size as f64;
        let diff: Vec<f64> = pc
            .iter()
            .zip(qc.iter())
            .map(|(&a, &b)| (a as f64 - b as f64) / n)
            .collect();
        let stat = root_statistic(discrete_mmd2(&self.gram, &diff));
        let gamma =
            threshold_two_sample(self.k_bound, size, size, self.alpha).expect("valid threshold");
        stat <= gamma
    }

    fn name(&self) -> &'static str {
        "two-mmd"
    }
}

/// KSD goodness-of-fit trial: data of each size drawn from `q`, tested
/// against the score of `ctx.target` with the vanishing threshold.
pub struct KsdTrial {
    pub ctx: SteinKernelCtx,
    pub q: TargetDensity,
    pub alpha: f64,
}

impl TrialTest for KsdTrial {
    fn accepts(&self, size: usize, rng: &mut ChaCha8Rng) -> bool {
        let y = self.q.sample(size, rng).expect("q must have a sampler");
        let stat = ksd2_v(&self.ctx, &y).expect("dimensions fixed by construction");
        stat <= threshold_ksd(size, self.alpha).expect("valid threshold")
    }

    fn name(&self) -> &'static str {
        "ksd"
    }
}

/// Divisor used when converting -ln(beta_hat) into a per-observation rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    M,
    NPlusM,
}

impl Normalizer {
    /// Total observation count for one trial at the given size.
    pub fn divisor(self, size: usize) -> f64 {
        match self {
            Normalizer::M => size as f64,
            Normalizer::NPlusM => 2.0 * size as f64,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentPoint {
    pub size: usize,
    pub beta_hat: f64,
    /// binomial standard error sqrt(beta (1 - beta) / trials)
    pub se: f64,
    pub censored: bool,
    pub minus_log_beta_over_size: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentEstimate {
    pub test: String,
    pub points: Vec<ExponentPoint>,
    pub trials: usize,
    pub normalizer: Normalizer,
    /// least-squares slope of -ln(beta_hat) vs the normalized size over the
    /// largest 3 uncensored points; None with fewer than 2 such points
    pub slope: Option<f64>,
    /// delta-method standard error of the slope
    pub slope_se: Option<f64>,
    pub seed: u64,
}

/// Runs `trials` independent replications of `test` at every size and fits
/// the terminal decay rate of the type-II error probability.
pub fn estimate_type2_exponent(
    test: &dyn TrialTest,
    sizes: &[usize],
    trials: usize,
    normalizer: Normalizer,
    seed: u64,
) -> Result<ExponentEstimate> {
    use rayon::prelude::*;
    if trials < 1000 {
        return Err(Error::InvalidParam("trials must be >= 1000".into()));
    }
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(Error::InvalidParam(
            "sizes must be non-empty, positive, strictly increasing".into(),
        ));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        let acceptances: u64 = (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let mut rng = stream_rng(seed, &[0x657870, si as u64, trial]);
                test.accepts(size, &mut rng) as u64
            })
            .sum();
        let beta_hat = acceptances as f64 / trials as f64;
        let se = (beta_hat * (1.0 - beta_hat) / trials as f64).sqrt();
        let censored = acceptances == 0;
        points.push(ExponentPoint {
            size,
            beta_hat,
            se,
            censored,
            minus_log_beta_over_size: if censored {
                None
            } else {
                Some(-beta_hat.ln() / normalizer.divisor(size))
            },
        });
    }
    if points.iter().all(|p| p.censored) {
        return Err(Error::Estimation(
            "every size was censored (beta_hat = 0); use smaller sizes or closer distributions"
                .into(),
        ));
    }
    let tail: Vec<&ExponentPoint> = {
        let mut uncensored: Vec<&ExponentPoint> = points.iter().filter(|p| !p.censored).collect();
        let keep = uncensored.len().min(3);
        uncensored.split_off(uncensored.len() - keep)
    };
    let (slope, slope_se) = if tail.len() < 2 {
        (None, None)
    } else {
        let xs: Vec<f64> = tail.iter().map(|p| normalizer.divisor(p.size)).collect();
        let ys: Vec<f64> = tail.iter().map(|p| -p.beta_hat.ln()).collect();
        // var of y = -ln(beta) by the delta method
        let vars: Vec<f64> = tail.iter().map(|p| (p.se / p.beta_hat).powi(2)).collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let slope = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| (x - xbar) * y)
            .sum::<f64>()
            / sxx;
        let var = xs
            .iter()
            .zip(vars.iter())
            .map(|(x, v)| ((x - xbar) / sxx).powi(2) * v)
            .sum::<f64>();
        (Some(slope), Some(var.sqrt()))
    };
    Ok(ExponentEstimate {
        test: test.name().to_string(),
        points,
        trials,
        normalizer,
        slope,
        slope_se,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern(p: f64) -> DiscretePmf {
        DiscretePmf::bernoulli(p).unwrap()
    }

    #[test]
    fn kld_identity_and_hand_values() {
        assert_eq!(kld(&bern(0.5), &bern(0.5)).unwrap(), 0.0);
        let v = kld(&bern(0.5), &bern(0.25)).unwrap();
        let expected = 0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.14384).abs() < 1e-4);
        let w = kld(&bern(0.5), &bern(0.6)).unwrap();
        assert!((w - 0.020411).abs() < 1e-5, "got {w}");
    }

    #[test]
    fn kld_infinite_on_support_failure() {
        assert!(kld(&bern(0.5), &bern(0.0)).unwrap().is_infinite());
        assert_eq!(kld(&bern(0.0), &bern(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn kld_alphabet_mismatch() {
        let p3 = DiscretePmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(matches!(kld(&p3, &bern(0.5)), Err(Error::AlphabetMismatch(..))));
    }

    #[test]
    fn dstar_identity_and_hand_value() {
        assert!(dstar(&bern(0.3), &bern(0.3), 0.5).unwrap().abs() < 1e-14);
        let v = dstar(&bern(0.5), &bern(0.9), 0.5).unwrap();
        let expected = -(0.45f64.sqrt() + 0.05f64.sqrt()).ln();
        assert!((v - expected).abs() < 1e-14);
        assert!((v - 0.11157).abs() < 1e-5);
    }

    #[test]
    fn dstar_swap_symmetry() {
        let cases = [
            (bern(0.2), bern(0.7), 0.3),
            (bern(0.55), bern(0.1), 0.8),
            (
                DiscretePmf::new(vec![0.1, 0.2, 0.7]).unwrap(),
                DiscretePmf::new(vec![0.4, 0.4, 0.2]).unwrap(),
                0.45,
            ),
        ];
        for (p, q, c) in cases {
            let a = dstar(&p, &q, c).unwrap();
            let b = dstar(&q, &p, 1.0 - c).unwrap();
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dstar_upper_bounds_from_endpoints() {
        let p = DiscretePmf::new(vec![0.1, 0.3, 0.6]).unwrap();
        let q = DiscretePmf::new(vec![0.5, 0.25, 0.25]).unwrap();
        for c in [0.2, 0.5, 0.8] {
            let d = dstar(&p, &q, c).unwrap();
            assert!(d <= c * kld(&q, &p).unwrap() + 1e-12);
            assert!(d <= (1.0 - c) * kld(&p, &q).unwrap() + 1e-12);
        }
    }

    #[test]
    fn geometric_mixture_properties() {
        let p = bern(0.5);
        let q = bern(0.9);
        let r = geometric_mixture(&p, &q, 0.5).unwrap();
        let expected = 0.45f64.sqrt() / (0.45f64.sqrt() + 0.05f64.sqrt());
        assert!((r.probs()[1] - expected).abs() < 1e-12);
        assert!((r.probs()[1] - 0.75).abs() < 0.01);
        // plugging the minimizer back in reproduces dstar
        let obj = 0.5 * kld(&r, &p).unwrap() + 0.5 * kld(&r, &q).unwrap();
        assert!((obj - dstar(&p, &q, 0.5).unwrap()).abs() < 1e-10);
        // c -> 1 recovers P
        let r1 = geometric_mixture(&p, &q, 1.0 - 1e-9).unwrap();
        assert!((r1.probs()[1] - 0.5).abs() < 1e-6);
        // identical inputs give the input back
        let rp = geometric_mixture(&p, &p, 0.3).unwrap();
        assert!((rp.probs()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn geometric_mixture_disjoint_supports() {
        let p = bern(0.0);
        let q = bern(1.0);
        assert!(matches!(
            geometric_mixture(&p, &q, 0.5),
            Err(Error::DegenerateMixture)
        ));
    }

    #[test]
    fn simplex_search_matches_closed_form() {
        let cases = [
            (bern(0.5), bern(0.9), 0.5),
            (bern(0.2), bern(0.6), 0.3),
            (
                DiscretePmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
                DiscretePmf::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap(),
                0.7,
            ),
        ];
        for (p, q, c) in cases {
            let closed = dstar(&p, &q, c).unwrap();
            let searched = dstar_by_simplex_search(&p, &q, c).unwrap();
            assert!((closed - searched).abs() < 1e-6, "closed {closed} searched {searched}");
        }
    }

    #[test]
    fn exponent_under_null_has_near_zero_slope() {
        let test =
            DiscreteOneSampleMmd::new(bern(0.5), bern(0.5), Kernel::gaussian(2.0).unwrap(), 0.05)
                .unwrap();
        let est = estimate_type2_exponent(&test, &[50, 100, 150], 2000, Normalizer::M, 1).unwrap();
        for p in &est.points {
            assert!(p.beta_hat > 0.95, "size {} beta {}", p.size, p.beta_hat);
        }
        assert!(est.slope.unwrap().abs() < 1e-3);
    }

    #[test]
    fn beta_decreases_for_separated_alternative() {
        let test =
            DiscreteOneSampleMmd::new(bern(0.5), bern(0.95), Kernel::gaussian(2.0).unwrap(), 0.05)
                .unwrap();
        let est =
            estimate_type2_exponent(&test, &[50, 100, 200], 2000, Normalizer::M, 2).unwrap();
        let betas: Vec<f64> = est.points.iter().map(|p| p.beta_hat).collect();
        assert!(betas[0] > betas[2], "betas {betas:?}");
    }

    #[test]
    fn all_censored_reported_as_estimation_error() {
        // P vs a point mass at the other symbol: rejection is immediate at these sizes
        let test =
            DiscreteOneSampleMmd::new(bern(0.0), bern(1.0), Kernel::gaussian(2.0).unwrap(), 0.05)
                .unwrap();
        let r = estimate_type2_exponent(&test, &[400, 500], 1000, Normalizer::M, 3);
        assert!(matches!(r, Err(Error::Estimation(_))));
    }

    #[test]
    fn harness_rejects_bad_arguments() {
        let test =
            DiscreteOneSampleMmd::new(bern(0.5), bern(0.6), Kernel::gaussian(2.0).unwrap(), 0.05)
                .unwrap();
        assert!(estimate_type2_exponent(&test, &[100], 10, Normalizer::M, 0).is_err());
        assert!(estimate_type2_exponent(&test, &[100, 100], 1000, Normalizer::M, 0).is_err());
        assert!(estimate_type2_exponent(&test, &[], 1000, Normalizer::M, 0).is_err());
    }

    #[test]
    fn kld_stable_under_small_total_variation_moves() {
        let p = DiscretePmf::new(vec![0.3, 0.3, 0.4]).unwrap();
        let q = DiscretePmf::new(vec![0.5, 0.2, 0.3]).unwrap();
        let base = kld(&p, &q).unwrap();
        for step in 1..=8 {
            let delta = step as f64 * 0.005;
            let moved = DiscretePmf::new(vec![0.3 + delta, 0.3 - delta, 0.4]).unwrap();
            let drop = base - kld(&moved, &q).unwrap();
            // the possible decrease vanishes linearly with the TV radius
            assert!(drop <= 3.0 * delta, "delta {delta} drop {drop}");
        }
    }
}
