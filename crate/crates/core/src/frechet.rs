//! Fréchet mean and variance estimation with asymptotic and bootstrap
//! confidence intervals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{derive_stream, std_normal_quantile};
use crate::error::{Error, Result};
use crate::spaces::MetricSample;

/// `sigma_sq` counts as zero when its square root is below this fraction of
/// the variance. Closed-form means of two-point samples are exactly
/// equidistant in theory but only to round-off in floating point.
const DEGENERACY_RTOL: f64 = 1e-12;

pub(crate) fn sigma_is_degenerate(variance: f64, sigma_sq: f64) -> bool {
    !(sigma_sq.sqrt() > DEGENERACY_RTOL * variance)
}

/// Sample Fréchet mean, variance `V̂_F` and the plug-in estimate `σ̂²_F` of the
/// asymptotic variance of `√n V̂_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrechetSummary<M> {
    pub mean: M,
    pub variance: f64,
    pub sigma_sq: f64,
    pub n: usize,
    pub approximate_mean: bool,
}

impl<M> FrechetSummary<M> {
    /// True when all squared distances to the mean coincide, which leaves the
    /// CLT scaling undefined.
    pub fn is_degenerate(&self) -> bool {
        sigma_is_degenerate(self.variance, self.sigma_sq)
    }
}

/// Variance and variance-of-squared-distances from `d²(μ̂, Y_i)`.
///
/// `σ̂² = mean(d⁴) - mean(d²)²` is evaluated in the centered form
/// `mean((d² - V̂)²)`, which is the same quantity without cancellation.
pub(crate) fn moments(sq: &[f64]) -> (f64, f64) {
    let n = sq.len() as f64;
    let v = sq.iter().sum::<f64>() / n;
    let s = sq.iter().map(|d| (d - v) * (d - v)).sum::<f64>() / n;
    (v, s)
}

/// Summary of the multiset `members` of `sample`.
pub fn frechet_summary_of<S: MetricSample>(sample: &S, members: &[usize]) -> Result<FrechetSummary<S::Mean>> {
    if members.is_empty() {
        return Err(Error::input("cannot summarize an empty sample"));
    }
    let mut buf = Vec::with_capacity(members.len());
    Ok(summarize_into(sample, members, &mut buf))
}

pub(crate) fn summarize_into<S: MetricSample>(
    sample: &S,
    members: &[usize],
    buf: &mut Vec<f64>,
) -> FrechetSummary<S::Mean> {
    let mean = sample.mean_of(members);
    sample.sq_distances_to(&mean, members, buf);
    let (variance, sigma_sq) = moments(buf);
    FrechetSummary {
        mean,
        variance,
        sigma_sq,
        n: members.len(),
        approximate_mean: sample.mean_is_approximate(),
    }
}

/// Summary of the whole sample.
pub fn frechet_summary<S: MetricSample>(sample: &S) -> Result<FrechetSummary<S::Mean>> {
    let all: Vec<usize> = (0..sample.len()).collect();
    frechet_summary_of(sample, &all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    AsymptoticVariance,
    AsymptoticStdDev,
    BootstrapVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
}

impl IntervalEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}

fn check_interval_inputs<M>(s: &FrechetSummary<M>, level: f64) -> Result<()> {
    check_level(level)?;
    if s.n < 2 {
        return Err(Error::input("a confidence interval needs at least 2 objects"));
    }
    if s.is_degenerate() {
        return Err(Error::Degenerate(
            "sigma_sq = 0: all squared distances to the Fréchet mean are equal".into(),
        ));
    }
    Ok(())
}

/// Asymptotic interval `V̂ ∓ z σ̂/√n` for the Fréchet variance, lower end
/// clamped at 0.
pub fn variance_interval<M>(s: &FrechetSummary<M>, level: f64) -> Result<IntervalEstimate> {
    check_interval_inputs(s, level)?;
    let z = std_normal_quantile(0.5 * (1.0 + level))?;
    let half = z * s.sigma_sq.sqrt() / (s.n as f64).sqrt();
    Ok(IntervalEstimate {
        lower: (s.variance - half).max(0.0),
        upper: s.variance + half,
        level,
        method: IntervalMethod::AsymptoticVariance,
    })
}

/// Asymptotic interval `√V̂ ∓ z σ̂ / (2 √(n V̂))` for the Fréchet standard
/// deviation, lower end clamped at 0.
pub fn stddev_interval<M>(s: &FrechetSummary<M>, level: f64) -> Result<IntervalEstimate> {
    check_interval_inputs(s, level)?;
    if !(s.variance > 0.0) {
        return Err(Error::Degenerate("Fréchet variance is 0".into()));
    }
    let z = std_normal_quantile(0.5 * (1.0 + level))?;
    let center = s.variance.sqrt();
    let half = z * s.sigma_sq.sqrt() / (2.0 * (s.n as f64 * s.variance).sqrt());
    Ok(IntervalEstimate {
        lower: (center - half).max(0.0),
        upper: center + half,
        level,
        method: IntervalMethod::AsymptoticStdDev,
    })
}

/// Bootstrap interval plus replicate bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub interval: IntervalEstimate,
    pub replicates: usize,
    pub discarded_replicates: usize,
    pub resample_size: usize,
    pub seed: u64,
}

/// Root-based bootstrap interval for the Fréchet variance.
///
/// Replicate `b` draws `resample_size` objects with replacement using stream
/// `(seed, b)` and records `R* = √m (V̂* - V̂) / σ̂*`. Replicates with
/// `σ̂* = 0` are discarded. The interval is
/// `[V̂ - q_{(1+level)/2} σ̂/√n, V̂ - q_{(1-level)/2} σ̂/√n]` with `q` the
/// empirical quantiles of the roots; the lower end is clamped at 0.
pub fn bootstrap_variance_interval<S: MetricSample>(
    sample: &S,
    level: f64,
    replicates: usize,
    resample_size: Option<usize>,
    seed: u64,
) -> Result<BootstrapInterval> {
    check_level(level)?;
    let n = sample.len();
    if n < 2 {
        return Err(Error::input("bootstrap needs at least 2 objects"));
    }
    if replicates < 100 {
        return Err(Error::input(format!(
            "bootstrap needs at least 100 replicates, got {replicates}"
        )));
    }
    let m = resample_size.unwrap_or(n);
    if m < 2 {
        return Err(Error::input("bootstrap resample size must be at least 2"));
    }
    let full = frechet_summary(sample)?;

    let roots: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(m), Vec::with_capacity(m)),
            |(idx, buf), b| {
                let mut stream = derive_stream(seed, b as u64);
                idx.clear();
                idx.extend((0..m).map(|_| stream.index(n)));
                let s = summarize_into(sample, idx, buf);
                if s.is_degenerate() {
                    None
                } else {
                    Some((m as f64).sqrt() * (s.variance - full.variance) / s.sigma_sq.sqrt())
                }
            },
        )
        .collect();
    let mut roots: Vec<f64> = roots.into_iter().flatten().collect();
    let discarded = replicates - roots.len();
    if roots.is_empty() {
        return Err(Error::Resampling(format!(
            "all {replicates} bootstrap replicates were degenerate (sigma_sq = 0)"
        )));
    }
    if full.is_degenerate() {
        return Err(Error::Degenerate(
            "sigma_sq = 0: all squared distances to the Fréchet mean are equal".into(),
        ));
    }
    roots.sort_by(f64::total_cmp);
    let scale = full.sigma_sq.sqrt() / (n as f64).sqrt();
    let q_hi = empirical_quantile(&roots, 0.5 * (1.0 + level));
    let q_lo = empirical_quantile(&roots, 0.5 * (1.0 - level));
    Ok(BootstrapInterval {
        interval: IntervalEstimate {
            lower: (full.variance - q_hi * scale).max(0.0),
            upper: full.variance - q_lo * scale,
            level,
            method: IntervalMethod::BootstrapVariance,
        },
        replicates,
        discarded_replicates: discarded,
        resample_size: m,
        seed,
    })
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub(crate) fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{MetricObject, ObjectSample, QuantileDistribution};

    #[test]
    fn identical_objects_have_zero_spread() {
        let s = ObjectSample::from_scalars(&[0.3; 5]).unwrap();
        let f = frechet_summary(&s).unwrap();
        assert_eq!(f.variance, 0.0);
        assert_eq!(f.sigma_sq, 0.0);
        assert!(f.is_degenerate());
        assert!(matches!(variance_interval(&f, 0.95), Err(Error::Degenerate(_))));
        assert!(matches!(stddev_interval(&f, 0.95), Err(Error::Degenerate(_))));
    }

    #[test]
    fn euclidean_hand_example() {
        let s = ObjectSample::from_scalars(&[0.0, 1.0, 2.0]).unwrap();
        let f = frechet_summary(&s).unwrap();
        assert_eq!(f.mean.as_slice(), &[1.0]);
        assert!((f.variance - 2.0 / 3.0).abs() < 1e-15);
        assert!((f.sigma_sq - 2.0 / 9.0).abs() < 1e-15);
        assert!(!f.approximate_mean);
    }

    #[test]
    fn wasserstein_translation_example() {
        let a = QuantileDistribution::normal(1000, 0.0, 1.0).unwrap();
        let b = QuantileDistribution::normal(1000, 2.0, 1.0).unwrap();
        let s = ObjectSample::from_quantiles(vec![a, b]).unwrap();
        let f = frechet_summary(&s).unwrap();
        let target = MetricObject::Quantile(QuantileDistribution::normal(1000, 1.0, 1.0).unwrap());
        assert!(f.mean.distance(&target).unwrap() < 1e-12);
        assert!((f.variance - 1.0).abs() < 1e-12);
    }

    fn summary(variance: f64, sigma_sq: f64, n: usize) -> FrechetSummary<()> {
        FrechetSummary {
            mean: (),
            variance,
            sigma_sq,
            n,
            approximate_mean: false,
        }
    }

    #[test]
    fn variance_interval_hand_example() {
        let s = summary(2.0 / 3.0, 2.0 / 9.0, 3);
        let ci = variance_interval(&s, 0.95).unwrap();
        let half = 1.959964 * (2.0_f64 / 9.0).sqrt() / 3.0_f64.sqrt();
        assert!((ci.upper - (2.0 / 3.0 + half)).abs() < 1e-6);
        assert!((ci.lower - (2.0 / 3.0 - half).max(0.0)).abs() < 1e-6);
        assert_eq!(ci.method, IntervalMethod::AsymptoticVariance);
    }

    #[test]
    fn variance_interval_clamps_and_collapses() {
        let ci = variance_interval(&summary(0.1, 4.0, 3), 0.99).unwrap();
        assert_eq!(ci.lower, 0.0);
        let ci = variance_interval(&summary(1.0, 2.0, 100), 1e-12).unwrap();
        assert!(ci.width() < 1e-10 && ci.contains(1.0));
        assert!(variance_interval(&summary(1.0, 2.0, 100), 1.0).is_err());
        assert!(variance_interval(&summary(1.0, 2.0, 100), 0.0).is_err());
        assert!(variance_interval(&summary(1.0, 2.0, 1), 0.5).is_err());
    }

    #[test]
    fn stddev_interval_hand_example() {
        let ci = stddev_interval(&summary(1.0, 2.0, 100), 0.95).unwrap();
        let half = 1.959964 * 2.0_f64.sqrt() / 20.0;
        assert!((ci.lower - (1.0 - half)).abs() < 1e-6);
        assert!((ci.upper - (1.0 + half)).abs() < 1e-6);
        let narrow = stddev_interval(&summary(0.7, 0.5, 100), 1e-9).unwrap();
        let center = 0.5 * (narrow.lower + narrow.upper);
        assert!((center * center - 0.7).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_rejects_bad_inputs() {
        let s = ObjectSample::from_scalars(&[1.0; 10]).unwrap();
        assert!(matches!(
            bootstrap_variance_interval(&s, 0.95, 200, None, 1),
            Err(Error::Resampling(_))
        ));
        let s = ObjectSample::from_scalars(&[1.0, 2.0, 4.0]).unwrap();
        assert!(bootstrap_variance_interval(&s, 0.95, 99, None, 1).is_err());
        assert!(bootstrap_variance_interval(&s, 0.95, 100, Some(1), 1).is_err());
        assert!(bootstrap_variance_interval(&s, 1.5, 100, None, 1).is_err());
    }

    #[test]
    fn bootstrap_counts_degenerate_replicates() {
        // With 3 objects, a resample of one repeated object is degenerate with
        // probability 3 / 27; two distinct objects give equal distances too.
        let s = ObjectSample::from_scalars(&[0.0, 1.0, 3.0]).unwrap();
        let b = bootstrap_variance_interval(&s, 0.9, 500, None, 5).unwrap();
        assert!(b.discarded_replicates > 0);
        assert!(b.discarded_replicates < 500);
        assert_eq!(b.resample_size, 3);
    }

    #[test]
    fn type7_quantile() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&xs, 0.0), 1.0);
        assert_eq!(empirical_quantile(&xs, 1.0), 4.0);
        assert!((empirical_quantile(&xs, 0.5) - 2.5).abs() < 1e-15);
    }
}
