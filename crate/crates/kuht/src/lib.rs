//! Kernel-based hypothesis testing: MMD one- and two-sample tests with
//! distribution-free and permutation thresholds, kernel Stein discrepancy
//! goodness-of-fit tests, an off-line change-point scan, and a Monte Carlo
//! harness for empirical type-II error exponents with closed-form
//! information-theoretic ceilings (KL divergence and D*).
//!
//! Core numerics (kernels, statistics, thresholds) are generic over the
//! scalar type through [`real::Real`] (f32 or f64); samplers, the Monte
//! Carlo harness, and the CLI work at f64. The aliases below fix the common
//! f64 instantiations.

pub mod changepoint;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod io;
pub mod kernels;
pub mod ksd;
pub mod linalg;
pub mod mmd;
pub mod quadrature;
pub mod real;
pub mod report;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};

pub type Kernel = kernels::Kernel<f64>;
pub type Kernel32 = kernels::Kernel<f32>;
pub type Sample = sample::Sample<f64>;
pub type Sample32 = sample::Sample<f32>;
pub type Matrix = sample::Matrix<f64>;
pub type MmdStat = mmd::MmdStat<f64>;
