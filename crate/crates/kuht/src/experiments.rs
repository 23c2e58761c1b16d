//! The Blobs bandwidth study and the median-heuristic bandwidth.

use crate::distributions::{blobs, BlobsSide};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mmd::{
    permutation_accepts_pooled, threshold_two_sample_unbiased, Estimator, PooledGram,
};
use crate::rng::{derive_seed, stream_rng};
use crate::sample::{squared_distance, Matrix, Sample};
use serde::Serialize;

/// Median of pairwise squared Euclidean distances of the pooled sample
/// (the gamma convention of the Gaussian/Laplace kernels here).
pub fn median_heuristic_bandwidth(x: &Sample<f64>, y: &Sample<f64>) -> Result<f64> {
    median_heuristic_of(&x.concat(y)?)
}

/// Median heuristic over the distinct pairs of a single sample.
pub fn median_heuristic_of(pooled: &Sample<f64>) -> Result<f64> {
    let n = pooled.len();
    if n < 2 {
        return Err(Error::InvalidParam(
            "median heuristic needs a pooled size >= 2".into(),
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(squared_distance(pooled.row(i), pooled.row(j)));
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = dists.len();
    Ok(if k % 2 == 1 {
        dists[k / 2]
    } else {
        0.5 * (dists[k / 2 - 1] + dists[k / 2])
    })
}

/// Type-II error rates of the unbiased two-sample test on the Blobs problem
/// across a bandwidth grid.
#[derive(Clone, Debug, Serialize)]
pub struct BandwidthCurve {
    pub bandwidths: Vec<f64>,
    pub type2_rate: Vec<f64>,
    /// binomial standard error per bandwidth
    pub se: Vec<f64>,
    pub trials: usize,
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub b_perm: usize,
    pub seed: u64,
}

/// The default sweep grid: 15 log-spaced bandwidths in [1e-2, 1e5].
pub fn default_bandwidth_grid() -> Vec<f64> {
    let (lo, hi, count) = (1e-2f64, 1e5f64, 15);
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// For each bandwidth, draws fresh Blobs P/Q samples per trial and runs the
/// unbiased Gaussian-kernel two-sample test with the min(distribution-free,
/// permutation) threshold, recording how often it fails to reject.
///
/// The squared-distance matrix of each trial's pooled sample is shared
/// across bandwidths.
pub fn blobs_bandwidth_sweep(
    n_per_sample: usize,
    epsilon: f64,
    bandwidths: &[f64],
    trials: usize,
    alpha: f64,
    b_perm: usize,
    seed: u64,
) -> Result<BandwidthCurve> {
    use rayon::prelude::*;
    if n_per_sample < 50 {
        return Err(Error::InvalidParam("n_per_sample must be >= 50".into()));
    }
    if trials < 50 {
        return Err(Error::InvalidParam("trials must be >= 50".into()));
    }
    if !(epsilon > 1.0) {
        return Err(Error::InvalidParam(
            "epsilon must be > 1 (epsilon = 1 makes P = Q, leaving no type-II error to measure)"
                .into(),
        ));
    }
    if bandwidths.is_empty() || bandwidths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParam(
            "bandwidths must be non-empty and strictly increasing".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
    }
    if b_perm < 100 {
        return Err(Error::InvalidParam("permutation B must be >= 100".into()));
    }
    let n = n_per_sample;
    let accept_counts: Vec<u64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Vec<u64>> {
            let mut rng = stream_rng(seed, &[0x626c6f62, trial]);
            let x = blobs(BlobsSide::P, epsilon, n, &mut rng)?;
            let y = blobs(BlobsSide::Q, epsilon, n, &mut rng)?;
            let pooled = x.concat(&y)?;
            let total = 2 * n;
            let mut d2 = Matrix::zeros(total, total);
            for i in 0..total {
                for j in (i + 1)..total {
                    let v = squared_distance(pooled.row(i), pooled.row(j));
                    d2.set(i, j, v);
                    d2.set(j, i, v);
                }
            }
            let mut accepts = vec![0u64; bandwidths.len()];
            for (bi, &gamma) in bandwidths.iter().enumerate() {
                let kernel = Kernel::gaussian(gamma)?;
                let gram = Matrix::from_fn(total, total, |i, j| kernel.eval_sqdist(d2.get(i, j)));
                let pg = PooledGram::from_gram(gram, n, n)?;
                let stat = pg.observed(Estimator::Unbiased);
                let df = threshold_two_sample_unbiased(kernel.bound(), n, n, alpha)?;
                let accepted = stat <= df
                    && permutation_accepts_pooled(
                        &pg,
                        Estimator::Unbiased,
                        b_perm,
                        alpha,
                        derive_seed(seed, &[0x626c6f62, trial, bi as u64]),
                        stat,
                    );
                accepts[bi] = accepted as u64;
            }
            Ok(accepts)
        })
        .try_reduce(
            || vec![0u64; bandwidths.len()],
            |mut a, b| {
                for (ai, bi) in a.iter_mut().zip(b.iter()) {
                    *ai += bi;
                }
                Ok(a)
            },
        )?;
    let type2_rate: Vec<f64> = accept_counts
        .iter()
        .map(|&c| c as f64 / trials as f64)
        .collect();
    let se: Vec<f64> = type2_rate
        .iter()
        .map(|&r| (r * (1.0 - r) / trials as f64).sqrt())
        .collect();
    Ok(BandwidthCurve {
        bandwidths: bandwidths.to_vec(),
        type2_rate,
        se,
        trials,
        n,
        m: n,
        alpha,
        epsilon,
        b_perm,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_standard_normal;
    use crate::rng::stream_rng;

    #[test]
    fn median_heuristic_two_points() {
        let x = Sample::from_scalars(&[0.0]).unwrap();
        let y = Sample::from_scalars(&[2.0]).unwrap();
        assert_eq!(median_heuristic_bandwidth(&x, &y).unwrap(), 4.0);
    }

    #[test]
    fn median_heuristic_gaussian_reference() {
        let mut rng = stream_rng(1, &[0]);
        let x = sample_standard_normal(1, 5000, &mut rng).unwrap();
        let y = sample_standard_normal(1, 5000, &mut rng).unwrap();
        let bw = median_heuristic_bandwidth(&x, &y).unwrap();
        // median of (x - x')^2 with x, x' iid N(0,1): 2 * median of chi-squared(1)
        let expected = 2.0 * 0.454936;
        assert!((bw - expected).abs() < 0.05, "bandwidth {bw}");
    }

    #[test]
    fn median_heuristic_scales_quadratically() {
        let x = Sample::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        let y = Sample::from_scalars(&[5.0, -2.0]).unwrap();
        let base = median_heuristic_bandwidth(&x, &y).unwrap();
        let sx = Sample::from_scalars(&[0.0, 3.0, 9.0]).unwrap();
        let sy = Sample::from_scalars(&[15.0, -6.0]).unwrap();
        let scaled = median_heuristic_bandwidth(&sx, &sy).unwrap();
        assert!((scaled - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn default_grid_spans_the_documented_range() {
        let g = default_bandwidth_grid();
        assert_eq!(g.len(), 15);
        assert!((g[0] - 1e-2).abs() < 1e-12);
        assert!((g[14] - 1e5).abs() / 1e5 < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_rejects_bad_parameters() {
        let bw = [1.0, 2.0];
        assert!(blobs_bandwidth_sweep(10, 6.0, &bw, 50, 0.1, 100, 0).is_err());
        assert!(blobs_bandwidth_sweep(50, 6.0, &bw, 10, 0.1, 100, 0).is_err());
        assert!(blobs_bandwidth_sweep(50, 1.0, &bw, 50, 0.1, 100, 0).is_err());
        assert!(blobs_bandwidth_sweep(50, 6.0, &[2.0, 1.0], 50, 0.1, 100, 0).is_err());
        assert!(blobs_bandwidth_sweep(50, 6.0, &bw, 50, 0.1, 10, 0).is_err());
    }

    #[test]
    fn sweep_small_run_is_deterministic_and_in_range() {
        let bw = [1.0, 100.0];
        let a = blobs_bandwidth_sweep(50, 6.0, &bw, 50, 0.1, 100, 7).unwrap();
        let b = blobs_bandwidth_sweep(50, 6.0, &bw, 50, 0.1, 100, 7).unwrap();
        assert_eq!(a.type2_rate, b.type2_rate);
        assert!(a.type2_rate.iter().all(|&r| (0.0..=1.0).contains(&r)));
    }
}
