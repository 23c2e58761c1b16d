//! Off-line single change-point detection via the maximum-partition MMD scan.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mmd::root_statistic;
use crate::report::SCHEMA_VERSION;
use crate::sample::Sample;
use serde::Serialize;

/// Fractional search bounds and test configuration for the scan.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub kernel: Kernel<f64>,
    pub seed: u64,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.u > 0.0 && self.u < self.v && self.v < 1.0) {
            return Err(Error::InvalidParam("need 0 < u < v < 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// (a_n, b_n) = (ceil(u n), floor(v n)), constrained to [2, n-2].
    pub fn bounds(&self, n: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let a = (self.u * n as f64).ceil() as usize;
        let b = (self.v * n as f64).floor() as usize;
        if a < 2 || b > n - 2 || a >= b {
            return Err(Error::InvalidParam(format!(
                "n = {n} too small for bounds u = {}, v = {} (a_n = {a}, b_n = {b})",
                self.u, self.v
            )));
        }
        Ok((a, b))
    }
}

/// gamma_n = 2 sqrt(K/a_n) + 2 sqrt(K/(n-b_n)) + sqrt(2 K n ln(2n/alpha) / c_n)
/// with c_n = min(a_n (n - a_n), b_n (n - b_n)).
pub fn scan_threshold(k_bound: f64, n: usize, a_n: usize, b_n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam("alpha must lie in (0, 1)".into()));
    }
    if !(k_bound > 0.0) {
        return Err(Error::InvalidParam("K must be > 0".into()));
    }
    if !(2 <= a_n && a_n < b_n && b_n <= n - 2) {
        return Err(Error::InvalidParam("need 2 <= a_n < b_n <= n - 2".into()));
    }
    let nf = n as f64;
    let c_n = ((a_n * (n - a_n)).min(b_n * (n - b_n))) as f64;
    Ok(2.0 * (k_bound / a_n as f64).sqrt()
        + 2.0 * (k_bound / (n - b_n) as f64).sqrt()
        + (2.0 * k_bound * nf * (2.0 * nf / alpha).ln() / c_n).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanDecision {
    NoChange,
    Change,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub schema_version: u32,
    pub decision: ScanDecision,
    /// max over i in [a_n, b_n] of d_k(first i points, remaining n-i points)
    pub statistic: f64,
    pub threshold: f64,
    /// split position of the maximum; present only on a Change decision
    pub index_hat: Option<usize>,
    pub n: usize,
    pub a_n: usize,
    pub b_n: usize,
    pub alpha: f64,
    pub kernel: String,
    pub seed: u64,
    /// d_k values for i = a_n ..= b_n
    pub curve: Vec<f64>,
}

/// Scans every admissible split of `z` into a prefix/suffix pair, comparing
/// the largest empirical MMD with the union-bound threshold. Running Gram
/// sums make the whole scan O(n^2). Argmax ties break to the smallest index.
pub fn scan(z: &Sample<f64>, config: &ScanConfig) -> Result<ScanResult> {
    let n = z.len();
    if n < 8 {
        return Err(Error::InvalidParam("scan needs n >= 8".into()));
    }
    let (a_n, b_n) = config.bounds(n)?;
    let gram = config.kernel.gram(z, z)?;
    let threshold = scan_threshold(config.kernel.bound(), n, a_n, b_n, config.alpha)?;

    let total = gram.sum();
    // running sums for the split after the first i points
    let mut s_left = gram.get(0, 0);
    let mut s_right = {
        let cross: f64 = (1..n).map(|j| gram.get(0, j)).sum();
        total - 2.0 * cross - gram.get(0, 0)
    };
    let mut curve = Vec::with_capacity(b_n - a_n + 1);
    let mut best = f64::NEG_INFINITY;
    let mut best_index = a_n;
    for i in 1..n {
        if i >= a_n {
            let li = i as f64;
            let ri = (n - i) as f64;
            let s_cross = (total - s_left - s_right) / 2.0;
            let d2 = s_left / (li * li) + s_right / (ri * ri) - 2.0 * s_cross / (li * ri);
            let d = root_statistic(d2);
            curve.push(d);
            if d > best {
                best = d;
                best_index = i;
            }
            if i == b_n {
                break;
            }
        }
        // move point i from the right block into the left one
        let row = gram.row(i);
        let to_left: f64 = row[..i].iter().sum();
        let to_right: f64 = row[i + 1..].iter().sum();
        s_left += 2.0 * to_left + row[i];
        s_right -= 2.0 * to_right + row[i];
    }
    let decision = if best > threshold {
        ScanDecision::Change
    } else {
        ScanDecision::NoChange
    };
    Ok(ScanResult {
        schema_version: SCHEMA_VERSION,
        decision,
        statistic: best,
        threshold,
        index_hat: (decision == ScanDecision::Change).then_some(best_index),
        n,
        a_n,
        b_n,
        alpha: config.alpha,
        kernel: config.kernel.to_string(),
        seed: config.seed,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_standard_normal;
    use crate::mmd::mmd2_biased_two_sample;
    use crate::rng::stream_rng;

    fn config() -> ScanConfig {
        ScanConfig {
            u: 0.1,
            v: 0.9,
            alpha: 0.05,
            kernel: Kernel::gaussian(2.0).unwrap(),
            seed: 0,
        }
    }

    #[test]
    fn threshold_hand_value() {
        let g = scan_threshold(1.0, 100, 20, 80, 0.05).unwrap();
        assert!((g - 1.9126).abs() < 1e-3, "gamma {g}");
    }

    #[test]
    fn threshold_monotone_in_alpha_and_n() {
        let g1 = scan_threshold(1.0, 100, 20, 80, 0.05).unwrap();
        let g2 = scan_threshold(1.0, 100, 20, 80, 0.01).unwrap();
        assert!(g2 > g1);
        // quadrupling n with fixed fractions roughly halves the threshold
        let g4 = scan_threshold(1.0, 400, 80, 320, 0.05).unwrap();
        assert!(g4 < 0.65 * g1, "g1 {g1} g4 {g4}");
    }

    #[test]
    fn threshold_rejects_bad_bounds() {
        assert!(scan_threshold(1.0, 100, 80, 20, 0.05).is_err());
        assert!(scan_threshold(1.0, 100, 1, 80, 0.05).is_err());
        assert!(scan_threshold(1.0, 100, 20, 99, 0.05).is_err());
    }

    #[test]
    fn constant_sequence_no_change() {
        let z = Sample::from_scalars(&[3.0; 50]).unwrap();
        let r = scan(&z, &config()).unwrap();
        assert_eq!(r.decision, ScanDecision::NoChange);
        assert!(r.curve.iter().all(|&v| v == 0.0));
        assert!(r.index_hat.is_none());
    }

    #[test]
    fn curve_matches_per_split_two_sample_statistics() {
        let mut rng = stream_rng(1, &[0]);
        let z = sample_standard_normal(1, 60, &mut rng).unwrap();
        let cfg = config();
        let r = scan(&z, &cfg).unwrap();
        for (offset, &value) in r.curve.iter().enumerate() {
            let i = r.a_n + offset;
            let left = z.subrange(0, i).unwrap();
            let right = z.subrange(i, 60).unwrap();
            let direct = root_statistic(
                mmd2_biased_two_sample(&left, &right, &cfg.kernel)
                    .unwrap()
                    .value,
            );
            assert!((value - direct).abs() < 1e-10, "split {i}");
        }
    }

    #[test]
    fn reversal_maps_curve_and_argmax() {
        let mut data: Vec<f64> = Vec::new();
        let mut rng = stream_rng(2, &[0]);
        data.extend(sample_standard_normal(1, 30, &mut rng).unwrap().as_slice());
        data.extend(
            sample_standard_normal(1, 30, &mut rng)
                .unwrap()
                .as_slice()
                .iter()
                .map(|v| v + 4.0),
        );
        let z = Sample::from_scalars(&data).unwrap();
        let cfg = config();
        let fwd = scan(&z, &cfg).unwrap();
        let rev = scan(&z.reversed(), &cfg).unwrap();
        let n = z.len();
        for (offset, &value) in fwd.curve.iter().enumerate() {
            let i = fwd.a_n + offset;
            // split i forward corresponds to split n - i reversed
            let rev_value = rev.curve[n - i - rev.a_n];
            assert!((value - rev_value).abs() < 1e-9, "split {i}");
        }
        assert!((fwd.statistic - rev.statistic).abs() < 1e-9);
        // argmax positions mirror (maximum here is not tied)
        let argmax = |r: &ScanResult| {
            let mut best = (r.a_n, f64::NEG_INFINITY);
            for (off, &v) in r.curve.iter().enumerate() {
                if v > best.1 {
                    best = (r.a_n + off, v);
                }
            }
            best.0
        };
        assert_eq!(argmax(&rev), n - argmax(&fwd));
    }

    #[test]
    fn sharp_change_detected_and_localized() {
        // the union-bound threshold needs n around 10^3 before a 4-sigma
        // mean shift can clear it (gamma_n ~ 0.89 < the attainable ~ 1.04)
        let mut rng = stream_rng(3, &[0]);
        let mut data: Vec<f64> = Vec::new();
        data.extend(sample_standard_normal(1, 500, &mut rng).unwrap().as_slice());
        data.extend(
            sample_standard_normal(1, 500, &mut rng)
                .unwrap()
                .as_slice()
                .iter()
                .map(|v| v + 4.0),
        );
        let z = Sample::from_scalars(&data).unwrap();
        let r = scan(&z, &config()).unwrap();
        assert_eq!(r.decision, ScanDecision::Change);
        let hat = r.index_hat.unwrap();
        assert!((hat as i64 - 500).unsigned_abs() <= 25, "index_hat {hat}");
    }

    #[test]
    fn too_small_inputs_rejected() {
        let z = Sample::from_scalars(&[0.0; 7]).unwrap();
        assert!(scan(&z, &config()).is_err());
        let z = Sample::from_scalars(&[0.0; 10]).unwrap();
        let bad = ScanConfig {
            u: 0.05,
            v: 0.9,
            ..config()
        };
        // a_n = ceil(0.5) = 1 < 2
        assert!(scan(&z, &bad).is_err());
    }
}
