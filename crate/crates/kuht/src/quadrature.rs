//! Gauss-Hermite quadrature, used as an independent oracle for expectations
//! under Gaussian measures.

use crate::error::Result;
use crate::linalg::symmetric_eigenvalues;
use crate::sample::Matrix;

/// Nodes and weights for n-point Gauss-Hermite quadrature with weight
/// function exp(-x^2): `integral exp(-x^2) f(x) dx ~= sum_i w_i f(x_i)`.
///
/// Nodes are eigenvalues of the Jacobi matrix of the Hermite recurrence;
/// weights are Christoffel numbers from the orthonormal polynomial values.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert!(n >= 1);
    let jacobi = Matrix::from_fn(n, n, |i, j| {
        if i + 1 == j {
            ((j as f64) / 2.0).sqrt()
        } else if j + 1 == i {
            ((i as f64) / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let nodes = symmetric_eigenvalues(&jacobi)?;
    let weights = nodes
        .iter()
        .map(|&x| {
            // w = 1 / sum_{k<n} p_k(x)^2 with p_k orthonormal wrt exp(-x^2)
            let mut pkm1 = std::f64::consts::PI.powf(-0.25);
            let mut pk = (2.0f64).sqrt() * x * pkm1;
            let mut s = pkm1 * pkm1 + pk * pk;
            for k in 1..(n - 1) {
                let kp1 = (k + 1) as f64;
                let next = x * (2.0 / kp1).sqrt() * pk - ((k as f64) / kp1).sqrt() * pkm1;
                pkm1 = pk;
                pk = next;
                s += pk * pk;
            }
            if n == 1 {
                s = std::f64::consts::PI.powf(-0.5);
            }
            1.0 / s
        })
        .collect();
    Ok((nodes, weights))
}

/// Expectation of `f` under the standard normal via n-point Gauss-Hermite.
pub fn standard_normal_expectation(n: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (nodes, weights) = gauss_hermite(n)?;
    let scale = std::f64::consts::PI.sqrt();
    Ok(nodes
        .iter()
        .zip(weights.iter())
        .map(|(&x, &w)| w * f((2.0f64).sqrt() * x))
        .sum::<f64>()
        / scale)
}

/// Expectation of `f(x, y)` under two independent standard normals.
pub fn standard_normal_expectation_2d(n: usize, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let (nodes, weights) = gauss_hermite(n)?;
    let sqrt2 = (2.0f64).sqrt();
    let scale = std::f64::consts::PI;
    let mut acc = 0.0;
    for (&xi, &wi) in nodes.iter().zip(weights.iter()) {
        for (&xj, &wj) in nodes.iter().zip(weights.iter()) {
            acc += wi * wj * f(sqrt2 * xi, sqrt2 * xj);
        }
    }
    Ok(acc / scale)
}
