//! Kernel density estimation for length-biased and weighted data.
//!
//! The estimator is the ratio-weighted kernel estimator
//! `f_h(y) = n^-1 mu_hat sum_i w(Y_i)^-1 K_h(y - Y_i)`, where `w` is the known
//! biasing function (the identity for length-biased sampling) and `mu_hat`
//! is the harmonic-mean normaliser. On top of it the crate provides
//!
//! * four data-driven bandwidth selectors ([`selectors`]): a normal-reference
//!   rule of thumb, least-squares cross-validation, a closed-form plug-in
//!   bootstrap selector with two pilot rules, and a selector minimising the
//!   bootstrap MISE under a common-KDE smooth bootstrap;
//! * the two smooth-bootstrap resampling schemes and Monte Carlo estimation of
//!   bootstrap error criteria ([`resampling`]);
//! * six benchmark densities with length-biased samplers ([`models`]);
//! * a reproducible simulation harness ([`harness`]) and a command line
//!   front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod resampling;
pub mod seed;
pub mod selectors;

pub use error::{Error, Result};
pub use estimator::{
    curvature_functional, gamma_hat, jones_estimate, weighted_stats, DensityEstimate,
    JonesEstimator, Sample, Weight, WeightedStats,
};
pub use kernels::Kernel;
pub use models::DensityModel;
pub use numerics::Grid;
pub use selectors::{BandwidthResult, Flag, Method};
