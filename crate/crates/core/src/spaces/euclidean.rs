use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in `R^d` under the usual Euclidean metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EuclideanPoint {
    coords: Vec<f64>,
}

impl EuclideanPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::input("a point needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("coordinate {} is not finite", i + 1)));
        }
        Ok(Self { coords })
    }

    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl TryFrom<Vec<f64>> for EuclideanPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<EuclideanPoint> for Vec<f64> {
    fn from(p: EuclideanPoint) -> Self {
        p.coords
    }
}

pub fn euclidean_distance(a: &EuclideanPoint, b: &EuclideanPoint) -> Result<f64> {
    if a.dimension() != b.dimension() {
        return Err(Error::Dimension(format!(
            "points have dimensions {} and {}",
            a.dimension(),
            b.dimension()
        )));
    }
    Ok(a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}
