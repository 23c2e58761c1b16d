//! Bounded positive-definite kernels and Gram-matrix evaluation.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::sample::{squared_distance, Matrix, Sample};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A symmetric positive-definite kernel with a known finite upper bound.
///
/// Gaussian and Laplace use `k(x,y) = exp(-||x-y||^p / gamma)` with p = 2 and
/// p = 1 respectively; the inverse multiquadric is `(c^2 + ||x-y||^2)^eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Kernel<T = f64> {
    Gaussian { gamma: T },
    Laplace { gamma: T },
    InverseMultiquadric { c: T, eta: T },
}

impl<T: Real> Kernel<T> {
    pub fn gaussian(gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParam("gaussian bandwidth must be > 0".into()));
        }
        Ok(Kernel::Gaussian { gamma })
    }

    pub fn laplace(gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::InvalidParam("laplace bandwidth must be > 0".into()));
        }
        Ok(Kernel::Laplace { gamma })
    }

    pub fn imq(c: T, eta: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::InvalidParam("imq c must be > 0".into()));
        }
        if !(eta > -T::one() && eta < T::zero()) {
            return Err(Error::InvalidParam("imq eta must lie in (-1, 0)".into()));
        }
        Ok(Kernel::InverseMultiquadric { c, eta })
    }

    /// The stored upper bound K with `0 < k(x,y) <= K`.
    pub fn bound(&self) -> T {
        match *self {
            Kernel::Gaussian { .. } | Kernel::Laplace { .. } => T::one(),
            Kernel::InverseMultiquadric { c, eta } => (c * c).powf(eta),
        }
    }

    /// Whether the kernel is twice continuously differentiable (required by KSD).
    pub fn is_c2(&self) -> bool {
        !matches!(self, Kernel::Laplace { .. })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Kernel::Gaussian { .. } => "gaussian",
            Kernel::Laplace { .. } => "laplace",
            Kernel::InverseMultiquadric { .. } => "imq",
        }
    }

    /// Kernel value as a function of the squared distance.
    pub fn eval_sqdist(&self, r2: T) -> T {
        match *self {
            Kernel::Gaussian { gamma } => (-r2 / gamma).exp(),
            Kernel::Laplace { gamma } => (-r2.sqrt() / gamma).exp(),
            Kernel::InverseMultiquadric { c, eta } => (c * c + r2).powf(eta),
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> Result<T> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.eval_sqdist(squared_distance(x, y)))
    }

    /// Gram matrix with entry (i, j) = k(x_i, y_j).
    pub fn gram(&self, x: &Sample<T>, y: &Sample<T>) -> Result<Matrix<T>> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        if x.is_empty() || y.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Matrix::from_fn(x.len(), y.len(), |i, j| {
            self.eval_sqdist(squared_distance(x.row(i), y.row(j)))
        }))
    }

    /// Gradient of k with respect to its first argument.
    ///
    /// Only defined for C^2 families; the Laplace kernel is rejected.
    pub fn grad_x(&self, x: &[T], y: &[T]) -> Result<Vec<T>> {
        let r2 = squared_distance(x, y);
        let scale = match *self {
            Kernel::Gaussian { gamma } => -(T::c(2.0) / gamma) * (-r2 / gamma).exp(),
            Kernel::InverseMultiquadric { c, eta } => {
                T::c(2.0) * eta * (c * c + r2).powf(eta - T::one())
            }
            Kernel::Laplace { .. } => {
                return Err(Error::UnsupportedKernel("laplace", "not twice differentiable"))
            }
        };
        Ok(x.iter()
            .zip(y.iter())
            .map(|(&a, &b)| scale * (a - b))
            .collect())
    }

    /// trace of the mixed second derivative, sum_i d^2 k / (dx_i dy_i).
    pub fn mixed_hessian_trace(&self, x: &[T], y: &[T]) -> Result<T> {
        let d = T::c(x.len() as f64);
        let r2 = squared_distance(x, y);
        match *self {
            Kernel::Gaussian { gamma } => {
                let k = (-r2 / gamma).exp();
                let two = T::c(2.0);
                let four = T::c(4.0);
                Ok((two * d / gamma - four * r2 / (gamma * gamma)) * k)
            }
            Kernel::InverseMultiquadric { c, eta } => {
                let base = c * c + r2;
                let two = T::c(2.0);
                let four = T::c(4.0);
                Ok(-four * eta * (eta - T::one()) * base.powf(eta - two) * r2
                    - two * d * eta * base.powf(eta - T::one()))
            }
            Kernel::Laplace { .. } => {
                Err(Error::UnsupportedKernel("laplace", "not twice differentiable"))
            }
        }
    }
}

impl Kernel<f64> {
    /// Parses a CLI kernel specification string:
    /// `gaussian:gamma=<f>`, `laplace:gamma=<f>`, `imq:c=<f>,eta=<f>`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let (family, params) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidParam(format!("kernel spec '{spec}' missing ':'")))?;
        let mut map = std::collections::BTreeMap::new();
        for part in params.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                Error::InvalidParam(format!("kernel parameter '{part}' missing '='"))
            })?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidParam(format!("kernel parameter '{part}' not numeric")))?;
            map.insert(k.to_string(), v);
        }
        let get = |name: &str| {
            map.get(name)
                .copied()
                .ok_or_else(|| Error::InvalidParam(format!("kernel spec missing '{name}'")))
        };
        match family {
            "gaussian" => Kernel::gaussian(get("gamma")?),
            "laplace" => Kernel::laplace(get("gamma")?),
            "imq" => Kernel::imq(get("c")?, get("eta")?),
            other => Err(Error::InvalidParam(format!("unknown kernel family '{other}'"))),
        }
    }
}

impl<T: Real + fmt::Display> fmt::Display for Kernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::Gaussian { gamma } => write!(f, "gaussian:gamma={gamma}"),
            Kernel::Laplace { gamma } => write!(f, "laplace:gamma={gamma}"),
            Kernel::InverseMultiquadric { c, eta } => write!(f, "imq:c={c},eta={eta}"),
        }
    }
}
