//! Fréchet analysis of variance for samples of metric-space-valued objects.
//!
//! The crate estimates Fréchet means and variances of random objects
//! (distributions under the L2-Wasserstein metric, graph Laplacians and
//! correlation matrices under the Frobenius metric, Euclidean vectors, or any
//! space given by a distance table), builds confidence intervals for the
//! Fréchet variance, and tests equality of `k` population distributions with
//! the statistic `T_n`, which combines a between-group term `F_n` and a
//! Levene-type variance-homogeneity term `U_n`. `T_n` is asymptotically
//! `χ²(k-1)` under the null; permutation and bootstrap calibrations are
//! provided for small samples.
//!
//! ```
//! use frechet_anova::{ksample, spaces::ObjectSample};
//!
//! let g1 = ObjectSample::from_scalars(&[0.0, 0.0, 1.0, 1.0]).unwrap();
//! let g2 = ObjectSample::from_scalars(&[2.0, 2.0, 3.0, 3.0]).unwrap();
//! let data = ksample::GroupedSample::from_samples(&[g1, g2]).unwrap();
//! let s = ksample::group_summaries(&data).unwrap();
//! assert!((ksample::fn_statistic(&s) - 1.0).abs() < 1e-12);
//! ```
//!
//! Simulation scenarios and the Monte Carlo power engine live in
//! [`generators`] and [`power`]; [`baselines`] holds the energy and MMD
//! two-sample tests used for comparison.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod dist;
pub mod error;
pub mod frechet;
pub mod generators;
pub mod ksample;
pub mod power;
pub mod spaces;

pub use error::{Error, Result};
pub use frechet::{
    bootstrap_variance_interval, frechet_summary, stddev_interval, variance_interval, FrechetSummary, IntervalEstimate,
    IntervalMethod,
};
pub use ksample::{GroupedSample, KSampleReport, KSampleTest, TestMethod};
pub use spaces::{MetricObject, MetricSample, ObjectSample, Space};
