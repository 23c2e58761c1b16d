//! Stein kernel, KSD V- and U-statistics, and the one-sample
//! goodness-of-fit tests built on them.

use crate::distributions::TargetDensity;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::report::TestReport;
use crate::rng::stream_rng;
use crate::sample::{Matrix, Sample};
use rand::Rng;

/// A target density paired with a twice-differentiable kernel, giving the
/// Stein kernel h_p(x, y).
pub struct SteinKernelCtx {
    pub target: TargetDensity,
    pub kernel: Kernel<f64>,
}

impl SteinKernelCtx {
    pub fn new(target: TargetDensity, kernel: Kernel<f64>) -> Result<Self> {
        if !kernel.is_c2() {
            return Err(Error::UnsupportedKernel(
                kernel.family_name(),
                "the Stein kernel needs a twice-differentiable kernel",
            ));
        }
        Ok(Self { target, kernel })
    }

    pub fn dim(&self) -> usize {
        self.target.dim
    }

    /// h_p(x,y) = s(x)'s(y) k + s(y)'grad_x k + s(x)'grad_y k + tr(grad_{x,y} k).
    ///
    /// For radial kernels grad_y k = -grad_x k.
    pub fn h_p(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: if x.len() != self.dim() { x.len() } else { y.len() },
            });
        }
        let sx = self.target.score(x);
        let sy = self.target.score(y);
        let k = self.kernel.eval(x, y)?;
        let gx = self.kernel.grad_x(x, y)?;
        let mut v = self.kernel.mixed_hessian_trace(x, y)?;
        for i in 0..x.len() {
            v += sx[i] * sy[i] * k + sy[i] * gx[i] - sx[i] * gx[i];
        }
        Ok(v)
    }

    fn h_with_scores(&self, x: &[f64], y: &[f64], sx: &[f64], sy: &[f64]) -> Result<f64> {
        let k = self.kernel.eval(x, y)?;
        let gx = self.kernel.grad_x(x, y)?;
        let mut v = self.kernel.mixed_hessian_trace(x, y)?;
        for i in 0..x.len() {
            v += sx[i] * sy[i] * k + sy[i] * gx[i] - sx[i] * gx[i];
        }
        Ok(v)
    }

    /// The m x m symmetric matrix of h_p over the rows of `y`.
    pub fn h_matrix(&self, y: &Sample<f64>) -> Result<Matrix<f64>> {
        if y.is_empty() {
            return Err(Error::EmptySample);
        }
        let scores: Vec<Vec<f64>> = y.rows_iter().map(|r| self.target.score(r)).collect();
        let m = y.len();
        let mut h = Matrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.h_with_scores(y.row(i), y.row(j), &scores[i], &scores[j])?;
                h.set(i, j, v);
                h.set(j, i, v);
            }
        }
        Ok(h)
    }
}

/// V-statistic (1/m^2) sum_ij h_p(y_i, y_j).
pub fn ksd2_v(ctx: &SteinKernelCtx, y: &Sample<f64>) -> Result<f64> {
    let h = ctx.h_matrix(y)?;
    let m = y.len() as f64;
    Ok(h.sum() / (m * m))
}

/// U-statistic: off-diagonal mean, unbiased for the squared KSD.
pub fn ksd2_u(ctx: &SteinKernelCtx, y: &Sample<f64>) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::InvalidParam("ksd2_u needs m >= 2".into()));
    }
    let h = ctx.h_matrix(y)?;
    let m = y.len() as f64;
    Ok((h.sum() - h.diag_sum()) / (m * (m - 1.0)))
}

/// Vanishing threshold gamma_m = sqrt(1/m) (1 + sqrt(ln(1/alpha))), compared
/// directly with the squared V-statistic.
pub fn threshold_ksd(m: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
    }
    if m == 0 {
        return Err(Error::InvalidParam("m must be >= 1".into()));
    }
    Ok((1.0 / m as f64).sqrt() * (1.0 + (1.0 / alpha).ln().sqrt()))
}

/// Wild-bootstrap threshold from a precomputed Stein-kernel matrix:
/// the order-statistic quantile of B replicates of (1/m^2) v' H v, where
/// v is a centered vector of Rademacher signs.
pub fn wild_bootstrap_threshold_from_h(
    h: &Matrix<f64>,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    use rayon::prelude::*;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
    }
    if b < 100 {
        return Err(Error::InvalidParam("bootstrap B must be >= 100".into()));
    }
    let m = h.rows();
    if m < 2 {
        return Err(Error::InvalidParam("bootstrap needs m >= 2".into()));
    }
    let row_sums = h.row_sums();
    let total: f64 = row_sums.iter().sum();
    let mut reps: Vec<f64> = (0..b as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, &[0x77696c64, rep]);
            let w: Vec<f64> = (0..m)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let mean = w.iter().sum::<f64>() / m as f64;
            let mut quad = 0.0;
            let mut lin = 0.0;
            for i in 0..m {
                let row = h.row(i);
                let mut acc = 0.0;
                for j in 0..m {
                    acc += row[j] * w[j];
                }
                quad += w[i] * acc;
                lin += w[i] * row_sums[i];
            }
            // (w - mean)' H (w - mean)
            (quad - 2.0 * mean * lin + mean * mean * total) / (m * m) as f64
        })
        .collect();
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(reps[crate::mmd::quantile_order_index(b, alpha) - 1])
}

/// Wild-bootstrap threshold for the V-statistic on sample `y`.
pub fn threshold_ksd_wild_bootstrap(
    ctx: &SteinKernelCtx,
    y: &Sample<f64>,
    b: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    let h = ctx.h_matrix(y)?;
    wild_bootstrap_threshold_from_h(&h, b, alpha, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsdVariant {
    V,
    U,
}

impl KsdVariant {
    pub fn name(self) -> &'static str {
        match self {
            KsdVariant::V => "v",
            KsdVariant::U => "u",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KsdThresholdMethod {
    DistributionFree,
    WildBootstrap { b: usize },
    MinOfBoth { b: usize },
}

impl KsdThresholdMethod {
    pub fn name(self) -> String {
        match self {
            KsdThresholdMethod::DistributionFree => "df".into(),
            KsdThresholdMethod::WildBootstrap { b } => format!("wild:B={b}"),
            KsdThresholdMethod::MinOfBoth { b } => format!("min:B={b}"),
        }
    }
}

/// Goodness-of-fit test. The V-statistic is compared with gamma_m (or the
/// wild-bootstrap quantile, or the min of both). The U-statistic path needs a
/// caller-supplied bound `hp` on h_p and compares with gamma_m + hp/m.
///
/// The level guarantee is asymptotic in m for every method here.
pub fn run_ksd_test(
    ctx: &SteinKernelCtx,
    y: &Sample<f64>,
    variant: KsdVariant,
    method: KsdThresholdMethod,
    alpha: f64,
    hp: Option<f64>,
    seed: u64,
) -> Result<TestReport> {
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    let m = y.len();
    let (statistic, threshold) = match variant {
        KsdVariant::V => {
            let stat = ksd2_v(ctx, y)?;
            let threshold = match method {
                KsdThresholdMethod::DistributionFree => threshold_ksd(m, alpha)?,
                KsdThresholdMethod::WildBootstrap { b } => {
                    threshold_ksd_wild_bootstrap(ctx, y, b, alpha, seed)?
                }
                KsdThresholdMethod::MinOfBoth { b } => threshold_ksd(m, alpha)?
                    .min(threshold_ksd_wild_bootstrap(ctx, y, b, alpha, seed)?),
            };
            (stat, threshold)
        }
        KsdVariant::U => {
            if method != KsdThresholdMethod::DistributionFree {
                return Err(Error::InvalidParam(
                    "the U-statistic variant supports only the distribution-free threshold".into(),
                ));
            }
            let hp = hp.ok_or_else(|| {
                Error::InvalidParam(
                    "the U-statistic variant needs an explicit bound --hp on the Stein kernel \
                     (no global bound exists for e.g. the Gaussian target + Gaussian kernel)"
                        .into(),
                )
            })?;
            if !(hp > 0.0) {
                return Err(Error::InvalidParam("hp must be > 0".into()));
            }
            (ksd2_u(ctx, y)?, threshold_ksd(m, alpha)? + hp / m as f64)
        }
    };
    Ok(TestReport::new(
        "ksd",
        statistic,
        threshold,
        alpha,
        method.name(),
        variant.name(),
        ctx.kernel.to_string(),
        0,
        m,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample_standard_normal, standard_gaussian_target};
    use crate::quadrature::standard_normal_expectation_2d;
    use crate::rng::stream_rng;

    fn gaussian_ctx() -> SteinKernelCtx {
        SteinKernelCtx::new(standard_gaussian_target(), Kernel::gaussian(2.0).unwrap()).unwrap()
    }

    fn imq_ctx() -> SteinKernelCtx {
        SteinKernelCtx::new(standard_gaussian_target(), Kernel::imq(1.0, -0.5).unwrap()).unwrap()
    }

    fn closed_form(x: f64, y: f64) -> f64 {
        (x * y + 1.0 - 2.0 * (x - y) * (x - y)) * (-(x - y) * (x - y) / 2.0).exp()
    }

    #[test]
    fn laplace_rejected() {
        assert!(
            SteinKernelCtx::new(standard_gaussian_target(), Kernel::laplace(1.0).unwrap()).is_err()
        );
    }

    #[test]
    fn h_p_at_origin_is_one() {
        assert!((gaussian_ctx().h_p(&[0.0], &[0.0]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn h_p_matches_closed_form() {
        let ctx = gaussian_ctx();
        let mut rng = stream_rng(1, &[0]);
        let pts = sample_standard_normal(1, 200, &mut rng).unwrap();
        for i in 0..100 {
            let x = pts.row(i)[0];
            let y = pts.row(199 - i)[0];
            let v = ctx.h_p(&[x], &[y]).unwrap();
            assert!((v - closed_form(x, y)).abs() < 1e-12, "at ({x}, {y})");
        }
    }

    #[test]
    fn h_p_symmetric() {
        for ctx in [gaussian_ctx(), imq_ctx()] {
            let mut rng = stream_rng(2, &[0]);
            let pts = sample_standard_normal(1, 2000, &mut rng).unwrap();
            for i in 0..1000 {
                let x = pts.row(i);
                let y = pts.row(1999 - i);
                let a = ctx.h_p(x, y).unwrap();
                let b = ctx.h_p(y, x).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn kernel_derivatives_match_finite_differences() {
        let kernels = [Kernel::gaussian(2.0).unwrap(), Kernel::imq(1.0, -0.5).unwrap()];
        let h = 1e-5;
        let mut rng = stream_rng(3, &[0]);
        let pts = sample_standard_normal(2, 200, &mut rng).unwrap();
        for k in kernels {
            for t in 0..100 {
                let x = pts.row(t).to_vec();
                let y = pts.row(199 - t).to_vec();
                let g = k.grad_x(&x, &y).unwrap();
                for i in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (k.eval(&xp, &y).unwrap() - k.eval(&xm, &y).unwrap()) / (2.0 * h);
                    assert!(
                        (fd - g[i]).abs() / g[i].abs().max(1.0) < 1e-5,
                        "grad mismatch: fd={fd} g={}",
                        g[i]
                    );
                }
                let tr = k.mixed_hessian_trace(&x, &y).unwrap();
                let mut fd_tr = 0.0;
                for i in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    let mut yp = y.clone();
                    let mut ym = y.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    yp[i] += h;
                    ym[i] -= h;
                    fd_tr += (k.eval(&xp, &yp).unwrap() - k.eval(&xp, &ym).unwrap()
                        - k.eval(&xm, &yp).unwrap()
                        + k.eval(&xm, &ym).unwrap())
                        / (4.0 * h * h);
                }
                assert!(
                    (fd_tr - tr).abs() / tr.abs().max(1.0) < 1e-4,
                    "trace mismatch: fd={fd_tr} tr={tr}"
                );
            }
        }
    }

    #[test]
    fn stein_identity_by_quadrature() {
        let mean = standard_normal_expectation_2d(40, |x, y| {
            gaussian_ctx().h_p(&[x], &[y]).unwrap()
        })
        .unwrap();
        assert!(mean.abs() < 1e-8, "gaussian quadrature mean {mean}");
        // the IMQ Stein kernel has complex poles near the real axis, so
        // quadrature converges more slowly; 160 nodes pin the identity tightly
        let mean = standard_normal_expectation_2d(160, |x, y| {
            imq_ctx().h_p(&[x], &[y]).unwrap()
        })
        .unwrap();
        assert!(mean.abs() < 1e-8, "imq quadrature mean {mean}");
    }

    #[test]
    fn ksd2_v_single_point() {
        let ctx = gaussian_ctx();
        let y = Sample::from_scalars(&[0.0]).unwrap();
        assert!((ksd2_v(&ctx, &y).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ksd2_v_matches_brute_force() {
        let ctx = gaussian_ctx();
        let mut rng = stream_rng(4, &[0]);
        let y = sample_standard_normal(1, 50, &mut rng).unwrap();
        let mut brute = 0.0;
        for i in 0..50 {
            for j in 0..50 {
                brute += ctx.h_p(y.row(i), y.row(j)).unwrap();
            }
        }
        brute /= 2500.0;
        assert!((ksd2_v(&ctx, &y).unwrap() - brute).abs() < 1e-12);
    }

    #[test]
    fn ksd2_u_two_equal_points() {
        let ctx = gaussian_ctx();
        let y = Sample::from_scalars(&[0.7, 0.7]).unwrap();
        let expected = ctx.h_p(&[0.7], &[0.7]).unwrap();
        assert!((ksd2_u(&ctx, &y).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn v_u_decomposition_identity() {
        let ctx = gaussian_ctx();
        for trial in 0..20u64 {
            let mut rng = stream_rng(5, &[trial]);
            let m = 2 + (trial as usize % 13);
            let y = sample_standard_normal(1, m, &mut rng).unwrap();
            let v = ksd2_v(&ctx, &y).unwrap();
            let u = ksd2_u(&ctx, &y).unwrap();
            let diag: f64 = (0..m).map(|i| ctx.h_p(y.row(i), y.row(i)).unwrap()).sum();
            let mf = m as f64;
            let rhs = (mf - 1.0) / mf * u + diag / (mf * mf);
            assert!((v - rhs).abs() < 1e-12, "m={m} v={v} rhs={rhs}");
        }
    }

    #[test]
    fn ksd2_v_consistent_under_h0() {
        let ctx = gaussian_ctx();
        let mut rng = stream_rng(6, &[0]);
        let y = sample_standard_normal(1, 2000, &mut rng).unwrap();
        let v = ksd2_v(&ctx, &y).unwrap();
        assert!(v >= -1e-12 && v < 0.01, "value {v}");
    }

    #[test]
    fn threshold_ksd_values() {
        let g = threshold_ksd(100, 0.05).unwrap();
        assert!((g - 0.27308).abs() < 1e-4, "gamma {g}");
        let ge = threshold_ksd(25, (-1.0f64).exp()).unwrap();
        assert!((ge - 0.4).abs() < 1e-12);
        // gamma_m -> 0 while m * gamma_m -> infinity
        let g4 = threshold_ksd(10_000, 0.05).unwrap();
        assert!(g4 < g && 10_000.0 * g4 > 100.0 * g);
    }

    #[test]
    fn wild_bootstrap_zero_matrix_gives_zero() {
        let h = Matrix::zeros(10, 10);
        assert_eq!(wild_bootstrap_threshold_from_h(&h, 100, 0.05, 1).unwrap(), 0.0);
    }

    #[test]
    fn wild_bootstrap_deterministic() {
        let ctx = gaussian_ctx();
        let mut rng = stream_rng(7, &[0]);
        let y = sample_standard_normal(1, 30, &mut rng).unwrap();
        let a = threshold_ksd_wild_bootstrap(&ctx, &y, 200, 0.05, 9).unwrap();
        let b = threshold_ksd_wild_bootstrap(&ctx, &y, 200, 0.05, 9).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0);
    }

    #[test]
    fn run_ksd_accepts_under_h0_rejects_shifted() {
        let ctx = gaussian_ctx();
        let mut rng = stream_rng(8, &[0]);
        let y0 = sample_standard_normal(1, 500, &mut rng).unwrap();
        let r0 = run_ksd_test(
            &ctx,
            &y0,
            KsdVariant::V,
            KsdThresholdMethod::DistributionFree,
            0.05,
            None,
            1,
        )
        .unwrap();
        assert!(!r0.rejected());
        let shifted: Vec<f64> = y0.as_slice().iter().map(|v| v + 1.0).collect();
        let y1 = Sample::from_scalars(&shifted).unwrap();
        let r1 = run_ksd_test(
            &ctx,
            &y1,
            KsdVariant::V,
            KsdThresholdMethod::DistributionFree,
            0.05,
            None,
            1,
        )
        .unwrap();
        assert!(r1.rejected());
    }

    #[test]
    fn u_variant_requires_hp() {
        let ctx = gaussian_ctx();
        let y = Sample::from_scalars(&[0.1, -0.4, 0.9]).unwrap();
        assert!(run_ksd_test(
            &ctx,
            &y,
            KsdVariant::U,
            KsdThresholdMethod::DistributionFree,
            0.05,
            None,
            0
        )
        .is_err());
        let r = run_ksd_test(
            &ctx,
            &y,
            KsdVariant::U,
            KsdThresholdMethod::DistributionFree,
            0.05,
            Some(10.0),
            0,
        )
        .unwrap();
        assert_eq!(r.variant, "u");
    }

    #[test]
    fn normalization_invariance_bit_for_bit() {
        let mut rng = stream_rng(9, &[0]);
        let y = sample_standard_normal(1, 40, &mut rng).unwrap();
        let run = |target: TargetDensity| {
            let ctx = SteinKernelCtx::new(target, Kernel::gaussian(2.0).unwrap()).unwrap();
            run_ksd_test(
                &ctx,
                &y,
                KsdVariant::V,
                KsdThresholdMethod::WildBootstrap { b: 100 },
                0.05,
                None,
                3,
            )
            .unwrap()
        };
        let a = run(standard_gaussian_target());
        let b = run(standard_gaussian_target().scaled(7.0f64.ln()));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn paper_example_formula_fails_stein_identity() {
        // the displayed Example 3 variant has a sign flipped; its mean is far from 0
        let mean = standard_normal_expectation_2d(40, |x, y| {
            (2.0 * (x - y) * (x - y) + x * y - 1.0) * (-(x - y) * (x - y) / 2.0).exp()
        })
        .unwrap();
        assert!(mean.abs() > 0.1, "mean {mean}");
    }
}
