//! Samplers, densities, score functions, empirical measures, and the Blobs
//! benchmark generator.

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::linalg::cholesky;
use crate::sample::{Matrix, Sample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// A probability vector over the finite alphabet {0, .., t-1}.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePmf {
    probs: Vec<f64>,
}

impl DiscretePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidParam("pmf must be non-empty".into()));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParam("pmf entries must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "pmf entries sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParam("bernoulli p must lie in [0, 1]".into()));
        }
        Self::new(vec![1.0 - p, p])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    /// n i.i.d. categorical draws.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// Draws n points and returns per-symbol counts.
    pub fn sample_counts(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let mut counts = vec![0u64; self.probs.len()];
        for _ in 0..n {
            counts[self.draw(rng)] += 1;
        }
        counts
    }

    /// Alphabet symbols embedded on the real line at their indices.
    pub fn support_points(&self) -> Sample<f64> {
        Sample::from_scalars(&(0..self.probs.len()).map(|i| i as f64).collect::<Vec<_>>())
            .expect("non-empty support")
    }
}

/// Weighted empirical measure over observed support points; total mass 1.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    pub support: Sample<f64>,
    pub weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn from_sample(sample: &Sample<f64>) -> Self {
        let w = 1.0 / sample.len() as f64;
        Self {
            support: sample.clone(),
            weights: vec![w; sample.len()],
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// n i.i.d. draws from N(mean, cov); `cov` must be symmetric positive definite.
pub fn sample_gaussian(
    mean: &[f64],
    cov: &Matrix<f64>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Sample<f64>> {
    let d = mean.len();
    if cov.rows() != d || cov.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: cov.rows(),
        });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let l = cholesky(cov)?;
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let mut v = mean[i];
            for k in 0..=i {
                v += l.get(i, k) * z[k];
            }
            data.push(v);
        }
    }
    Sample::from_vec(data, d)
}

/// n i.i.d. draws from the d-dimensional standard normal.
pub fn sample_standard_normal(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Sample<f64>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let data = (0..n * d).map(|_| StandardNormal.sample(rng)).collect();
    Sample::from_vec(data, d)
}

/// Which side of the Blobs benchmark to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlobsSide {
    P,
    Q,
}

const BLOBS_SPACING: f64 = 10.0;
const BLOBS_GRID: usize = 3;

fn blobs_centers() -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(BLOBS_GRID * BLOBS_GRID);
    for i in 0..BLOBS_GRID {
        for j in 0..BLOBS_GRID {
            centers.push([i as f64 * BLOBS_SPACING, j as f64 * BLOBS_SPACING]);
        }
    }
    centers
}

/// Within-component correlation of the Blobs alternative: (eps-1)/(eps+1).
pub fn blobs_correlation(epsilon: f64) -> f64 {
    (epsilon - 1.0) / (epsilon + 1.0)
}

/// Draws from the Blobs benchmark: a uniform mixture over a 3x3 grid of 2-d
/// Gaussians with spacing 10. P components are standard; Q components have
/// within-component correlation (eps-1)/(eps+1).
pub fn blobs(side: BlobsSide, epsilon: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<Sample<f64>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let rho = match side {
        BlobsSide::P => 0.0,
        BlobsSide::Q => {
            if !(epsilon > 1.0) {
                return Err(Error::InvalidParam(
                    "blobs Q requires epsilon > 1 (correlation would be <= 0)".into(),
                ));
            }
            blobs_correlation(epsilon)
        }
    };
    let centers = blobs_centers();
    let mix = (1.0 - rho * rho).sqrt();
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let c = centers[rng.random_range(0..centers.len())];
        let g1: f64 = StandardNormal.sample(rng);
        let g2: f64 = StandardNormal.sample(rng);
        data.push(c[0] + g1);
        data.push(c[1] + rho * g1 + mix * g2);
    }
    Sample::from_vec(data, 2)
}

/// Closed-form kernel integrals of a target for one designated kernel.
#[derive(Clone)]
pub struct KernelIntegrals {
    pub kernel: Kernel<f64>,
    /// E_{x,x' ~ P} k(x, x')
    pub double_integral: f64,
    /// y -> E_{x ~ P} k(x, y) (the mean embedding)
    pub embedding: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type ScoreFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type SamplerFn = Arc<dyn Fn(usize, &mut ChaCha8Rng) -> Sample<f64> + Send + Sync>;

/// A differentiable density known up to normalization, exposing its
/// unnormalized log-density and score s_p(x) = grad log p(x).
#[derive(Clone)]
pub struct TargetDensity {
    pub dim: usize,
    log_density_unnormalized: DensityFn,
    score: ScoreFn,
    sampler: Option<SamplerFn>,
    kernel_integrals: Option<KernelIntegrals>,
}

impl TargetDensity {
    pub fn new(dim: usize, log_density_unnormalized: DensityFn, score: ScoreFn) -> Self {
        Self {
            dim,
            log_density_unnormalized,
            score,
            sampler: None,
            kernel_integrals: None,
        }
    }

    pub fn with_sampler(mut self, sampler: SamplerFn) -> Self {
        self.sampler = Some(sampler);
        self
    }

    pub fn with_kernel_integrals(mut self, integrals: KernelIntegrals) -> Self {
        self.kernel_integrals = Some(integrals);
        self
    }

    /// Shifts the unnormalized log-density by a constant (density scaled by
    /// exp(shift)); the score is untouched.
    pub fn scaled(mut self, log_shift: f64) -> Self {
        let inner = self.log_density_unnormalized.clone();
        self.log_density_unnormalized = Arc::new(move |x| inner(x) + log_shift);
        self
    }

    pub fn log_density_unnormalized(&self, x: &[f64]) -> f64 {
        (self.log_density_unnormalized)(x)
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        (self.score)(x)
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Sample<f64>> {
        match &self.sampler {
            Some(s) => Ok(s(n, rng)),
            None => Err(Error::UnsupportedTarget("a sampler")),
        }
    }

    pub fn has_sampler(&self) -> bool {
        self.sampler.is_some()
    }

    /// Closed-form integrals, checked against the requested kernel.
    pub fn kernel_integrals(&self, kernel: &Kernel<f64>) -> Result<&KernelIntegrals> {
        match &self.kernel_integrals {
            Some(ki) if ki.kernel == *kernel => Ok(ki),
            _ => Err(Error::UnsupportedTarget("closed-form integrals for this kernel")),
        }
    }
}

/// The 1-d standard Gaussian target with score -x, a sampler, and closed-form
/// integrals for the Gaussian kernel with gamma = 2:
/// E_{x,x'} k = sqrt(3)/3 and E_x k(x, y) = exp(-y^2/4) / sqrt(2).
pub fn standard_gaussian_target() -> TargetDensity {
    TargetDensity::new(
        1,
        Arc::new(|x: &[f64]| -0.5 * x[0] * x[0]),
        Arc::new(|x: &[f64]| vec![-x[0]]),
    )
    .with_sampler(Arc::new(|n, rng| {
        sample_standard_normal(1, n, rng).expect("n >= 1")
    }))
    .with_kernel_integrals(KernelIntegrals {
        kernel: Kernel::Gaussian { gamma: 2.0 },
        double_integral: 3.0f64.sqrt() / 3.0,
        embedding: Arc::new(|y: &[f64]| (-y[0] * y[0] / 4.0).exp() / 2.0f64.sqrt()),
    })
}

/// A 1-d Gaussian N(mean, sd^2) target with analytic score and sampler.
pub fn gaussian_target(mean: f64, sd: f64) -> Result<TargetDensity> {
    if !(sd > 0.0) {
        return Err(Error::InvalidParam("sd must be > 0".into()));
    }
    let var = sd * sd;
    Ok(TargetDensity::new(
        1,
        Arc::new(move |x: &[f64]| -0.5 * (x[0] - mean) * (x[0] - mean) / var),
        Arc::new(move |x: &[f64]| vec![-(x[0] - mean) / var]),
    )
    .with_sampler(Arc::new(move |n, rng| {
        let data = (0..n)
            .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Sample::from_vec(data, 1).expect("n >= 1")
    })))
}

/// The Blobs mixture as a 2-d target density with analytic mixture score.
pub fn blobs_target(side: BlobsSide, epsilon: f64) -> Result<TargetDensity> {
    let rho = match side {
        BlobsSide::P => 0.0,
        BlobsSide::Q => {
            if !(epsilon > 1.0) {
                return Err(Error::InvalidParam("blobs Q requires epsilon > 1".into()));
            }
            blobs_correlation(epsilon)
        }
    };
    let centers = blobs_centers();
    // inverse of [[1, rho], [rho, 1]]
    let det = 1.0 - rho * rho;
    let (i00, i01, i11) = (1.0 / det, -rho / det, 1.0 / det);
    let log_mix = {
        let centers = centers.clone();
        move |x: &[f64]| -> (f64, [f64; 2]) {
            // log-sum-exp over components and the mixture score
            let mut quads: Vec<(f64, [f64; 2])> = Vec::with_capacity(centers.len());
            let mut max_q = f64::NEG_INFINITY;
            for c in &centers {
                let dx = x[0] - c[0];
                let dy = x[1] - c[1];
                let q = -0.5 * (i00 * dx * dx + 2.0 * i01 * dx * dy + i11 * dy * dy);
                // gradient of q wrt x
                let g = [-(i00 * dx + i01 * dy), -(i01 * dx + i11 * dy)];
                max_q = max_q.max(q);
                quads.push((q, g));
            }
            let mut z = 0.0;
            let mut gx = 0.0;
            let mut gy = 0.0;
            for (q, g) in &quads {
                let w = (q - max_q).exp();
                z += w;
                gx += w * g[0];
                gy += w * g[1];
            }
            (max_q + z.ln(), [gx / z, gy / z])
        }
    };
    let log_mix2 = log_mix.clone();
    Ok(TargetDensity::new(
        2,
        Arc::new(move |x: &[f64]| log_mix(x).0),
        Arc::new(move |x: &[f64]| log_mix2(x).1.to_vec()),
    )
    .with_sampler(Arc::new(move |n, rng| {
        blobs(side, epsilon.max(1.0 + 1e-9), n, rng).expect("n >= 1")
    })))
}
