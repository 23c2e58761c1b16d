//! Scalar abstraction for the numeric core.
//!
//! All pure math (kernels, statistics, thresholds, divergences) is generic
//! over [`Real`], so it runs at `f32` or `f64`. Samplers, the Monte Carlo
//! harness, and the CLI are fixed at `f64`.

use num_traits::{Float, FromPrimitive};
use std::fmt::Debug;
use std::iter::Sum;

pub trait Real: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {
    /// Shorthand for converting literals; panics only on exotic scalar types
    /// that cannot represent finite f64 values.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Sum + Debug + Send + Sync + 'static {}
