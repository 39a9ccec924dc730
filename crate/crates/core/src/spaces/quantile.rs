use serde::{Deserialize, Serialize};

use crate::dist::std_normal_quantile;
use crate::error::{Error, Result};

/// Default number of points on the quantile grid.
pub const DEFAULT_GRID_SIZE: usize = 100;

/// A one-dimensional distribution stored as its quantile function evaluated on
/// the midpoint grid `(i + 0.5) / M`, `i = 0..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileDistribution {
    values: Vec<f64>,
}

impl QuantileDistribution {
    /// Validates and wraps a grid of quantile values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::input(format!(
                "quantile grid needs at least 2 points, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("quantile grid value {i} is not finite")));
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::input(format!(
                "quantile grid decreases between positions {i} and {}",
                i + 1
            )));
        }
        Ok(Self { values })
    }

    /// Evaluates `quantile` at every grid probability.
    pub fn from_quantile_fn(grid_size: usize, quantile: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid_probabilities(grid_size).map(quantile).collect())
    }

    /// Quantile grid of `N(mean, sd²)`.
    pub fn normal(grid_size: usize, mean: f64, sd: f64) -> Result<Self> {
        if !(sd >= 0.0) {
            return Err(Error::input("normal standard deviation must be non-negative"));
        }
        let z = standard_normal_grid(grid_size)?;
        Self::new(z.into_iter().map(|z| mean + sd * z).collect())
    }

    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl TryFrom<Vec<f64>> for QuantileDistribution {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<QuantileDistribution> for Vec<f64> {
    fn from(q: QuantileDistribution) -> Self {
        q.values
    }
}

/// Midpoint grid probabilities `(i + 0.5) / M`.
pub fn grid_probabilities(grid_size: usize) -> impl Iterator<Item = f64> {
    (0..grid_size).map(move |i| (i as f64 + 0.5) / grid_size as f64)
}

/// Standard normal quantiles on the midpoint grid.
pub fn standard_normal_grid(grid_size: usize) -> Result<Vec<f64>> {
    if grid_size < 2 {
        return Err(Error::input("grid size must be at least 2"));
    }
    grid_probabilities(grid_size).map(std_normal_quantile).collect()
}

/// L2-Wasserstein distance between two distributions: the root of the
/// midpoint-rule integral of the squared quantile difference.
pub fn wasserstein_distance(a: &QuantileDistribution, b: &QuantileDistribution) -> Result<f64> {
    if a.grid_size() != b.grid_size() {
        return Err(Error::Dimension(format!(
            "quantile grids have sizes {} and {}",
            a.grid_size(),
            b.grid_size()
        )));
    }
    let ss: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.grid_size() as f64).sqrt())
}

/// Empirical quantile grid of raw observations.
///
/// Order statistic `x_(j)` (1-based) sits at plotting position
/// `(j - 0.5) / n`; grid probabilities between two positions are linearly
/// interpolated and those outside `[0.5/n, 1 - 0.5/n]` take the extreme
/// order statistic.
pub fn empirical_quantile_grid(raw: &[f64], grid_size: usize) -> Result<QuantileDistribution> {
    if raw.len() < 2 {
        return Err(Error::input(format!(
            "need at least 2 raw observations, got {}",
            raw.len()
        )));
    }
    if grid_size < 2 {
        return Err(Error::input("grid size must be at least 2"));
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("raw observation {i} is not finite")));
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let values: Vec<f64> = grid_probabilities(grid_size)
        .map(|p| {
            // 1-based fractional order-statistic index
            let h = p * n as f64 + 0.5;
            if h <= 1.0 {
                sorted[0]
            } else if h >= n as f64 {
                sorted[n - 1]
            } else {
                let lo = h.floor() as usize;
                let frac = h - lo as f64;
                let a = sorted[lo - 1];
                let b = sorted[lo];
                a + frac * (b - a)
            }
        })
        .collect();
    // interpolation keeps the grid monotone up to rounding; enforce it exactly
    Ok(QuantileDistribution::new_unchecked(running_max(values)))
}

pub(crate) fn running_max(mut values: Vec<f64>) -> Vec<f64> {
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            values[i] = values[i - 1];
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{derive_stream, std_normal_cdf, std_normal_pdf};

    #[test]
    fn rejects_invalid_grids() {
        assert!(QuantileDistribution::new(vec![1.0]).is_err());
        assert!(QuantileDistribution::new(vec![0.0, f64::NAN]).is_err());
        assert!(QuantileDistribution::new(vec![1.0, 0.0]).is_err());
        assert!(QuantileDistribution::new(vec![0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn distance_identity_and_translation() {
        let a = QuantileDistribution::normal(1000, 0.0, 1.0).unwrap();
        let b = QuantileDistribution::normal(1000, 1.0, 1.0).unwrap();
        assert_eq!(wasserstein_distance(&a, &a).unwrap(), 0.0);
        assert!((wasserstein_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_rejects_grid_mismatch() {
        let a = QuantileDistribution::normal(10, 0.0, 1.0).unwrap();
        let b = QuantileDistribution::normal(11, 0.0, 1.0).unwrap();
        assert!(matches!(wasserstein_distance(&a, &b), Err(Error::Dimension(_))));
    }

    /// Gaussian case: analytic formula plus an independent quadrature of
    /// `∫ (F⁻¹ - G⁻¹)²` in the x-domain, using `∫ z² dΦ = 1` exactly by
    /// substitution t = Φ(z): `d² = ∫ (σ₁ - σ₂)² z² φ(z) dz` for equal means.
    #[test]
    fn distance_gaussian_scale_matches_analytic_and_quadrature() {
        let (s1, s2) = (1.0_f64, 2.0_f64);
        let analytic = ((s1 - s2).powi(2)).sqrt();

        // Simpson quadrature on z in [-12, 12]
        let steps = 200_000;
        let (lo, hi) = (-12.0_f64, 12.0_f64);
        let h = (hi - lo) / steps as f64;
        let f = |z: f64| ((s1 - s2) * z).powi(2) * std_normal_pdf(z);
        let mut acc = f(lo) + f(hi);
        for i in 1..steps {
            let z = lo + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(z);
        }
        let quadrature = (acc * h / 3.0).sqrt();
        assert!((quadrature - analytic).abs() < 1e-6);

        let a = QuantileDistribution::normal(100_000, 0.0, s1).unwrap();
        let b = QuantileDistribution::normal(100_000, 0.0, s2).unwrap();
        let d = wasserstein_distance(&a, &b).unwrap();
        assert!((d - analytic).abs() < 1e-3, "d = {d}");
        assert!((d - quadrature).abs() < 1e-3);
    }

    #[test]
    fn empirical_grid_degenerate_and_two_point() {
        let g = empirical_quantile_grid(&[3.5; 7], 13).unwrap();
        assert!(g.values().iter().all(|&v| v == 3.5));
        let g = empirical_quantile_grid(&[1.0, 0.0], 2).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
    }

    #[test]
    fn empirical_grid_interpolates_between_order_statistics() {
        // n = 4: positions 0.125, 0.375, 0.625, 0.875 for values 0, 1, 2, 3.
        // p = 0.25 lies halfway between positions 1 and 2.
        let g = empirical_quantile_grid(&[3.0, 0.0, 2.0, 1.0], 2).unwrap();
        assert!((g.values()[0] - 0.5).abs() < 1e-15);
        assert!((g.values()[1] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_grid_errors() {
        assert!(empirical_quantile_grid(&[1.0], 10).is_err());
        assert!(empirical_quantile_grid(&[1.0, f64::INFINITY], 10).is_err());
        assert!(empirical_quantile_grid(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn empirical_grid_of_normal_draws() {
        let mut s = derive_stream(11, 0);
        let raw: Vec<f64> = (0..100_000).map(|_| s.normal()).collect();
        let g = empirical_quantile_grid(&raw, 100).unwrap();
        let exact = standard_normal_grid(100).unwrap();
        let sup = g
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.05, "sup = {sup}");
        // sanity on the exact grid itself
        assert!((std_normal_cdf(exact[0]) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn serde_round_trip_validates() {
        let g = QuantileDistribution::normal(5, 0.0, 1.0).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        let back: QuantileDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
        assert!(serde_json::from_str::<QuantileDistribution>("[2.0, 1.0]").is_err());
    }
}
