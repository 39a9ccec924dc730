//! Metric object types, their metrics and closed-form Fréchet means.

mod euclidean;
pub mod io;
mod matrix;
mod quantile;
mod sample;

pub use euclidean::{euclidean_distance, EuclideanPoint};
pub use matrix::{frobenius_distance, laplacian_from_adjacency, MatrixKind, SquareMatrixObject};
pub use quantile::{
    empirical_quantile_grid, grid_probabilities, standard_normal_grid, wasserstein_distance, QuantileDistribution,
    DEFAULT_GRID_SIZE,
};
pub use sample::{closed_form_mean, DistanceTableSample, MetricObject, MetricSample, ObjectSample, Space, TableMean};
