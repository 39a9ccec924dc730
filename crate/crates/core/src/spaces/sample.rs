use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::euclidean::EuclideanPoint;
use super::matrix::{MatrixKind, SquareMatrixObject};
use super::quantile::{running_max, QuantileDistribution};
use crate::error::{Error, Result};

/// A finite sample of objects in a metric space, as seen by the Fréchet
/// estimators.
///
/// `members` slices index into the sample and may repeat indices (bootstrap
/// resamples are multisets).
pub trait MetricSample: Sync {
    /// Representation of a sample Fréchet mean.
    type Mean: Clone + Send + Sync + fmt::Debug;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between objects `i` and `j`.
    fn distance(&self, i: usize, j: usize) -> f64;

    /// Sample Fréchet mean of the multiset `members`.
    fn mean_of(&self, members: &[usize]) -> Self::Mean;

    /// Writes `d²(mean, Y_i)` for every `i` in `members`, in order, into `out`.
    ///
    /// `mean` must have been produced by [`mean_of`](Self::mean_of) on the same
    /// `members`.
    fn sq_distances_to(&self, mean: &Self::Mean, members: &[usize], out: &mut Vec<f64>);

    /// Whether [`mean_of`](Self::mean_of) is an approximation (medoid) rather
    /// than the exact minimizer.
    fn mean_is_approximate(&self) -> bool {
        false
    }
}

/// The three built-in spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Wasserstein,
    Frobenius,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Wasserstein { grid_size: usize },
    Frobenius { dim: usize, kind: MatrixKind },
    Euclidean { dim: usize },
}

/// A single object from one of the built-in spaces.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricObject {
    Quantile(QuantileDistribution),
    Matrix(SquareMatrixObject),
    Point(EuclideanPoint),
}

impl MetricObject {
    pub fn space(&self) -> Space {
        match self {
            MetricObject::Quantile(_) => Space::Wasserstein,
            MetricObject::Matrix(_) => Space::Frobenius,
            MetricObject::Point(_) => Space::Euclidean,
        }
    }

    /// Raw coordinates: quantile values, row-major matrix entries or point
    /// coordinates.
    pub fn as_slice(&self) -> &[f64] {
        match self {
            MetricObject::Quantile(q) => q.values(),
            MetricObject::Matrix(m) => m.entries(),
            MetricObject::Point(p) => p.coords(),
        }
    }

    pub fn distance(&self, other: &MetricObject) -> Result<f64> {
        match (self, other) {
            (MetricObject::Quantile(a), MetricObject::Quantile(b)) => super::quantile::wasserstein_distance(a, b),
            (MetricObject::Matrix(a), MetricObject::Matrix(b)) => super::matrix::frobenius_distance(a, b),
            (MetricObject::Point(a), MetricObject::Point(b)) => super::euclidean::euclidean_distance(a, b),
            _ => Err(Error::Dimension(format!(
                "cannot compare a {:?} object with a {:?} object",
                self.space(),
                other.space()
            ))),
        }
    }
}

/// A homogeneous sample of objects from one built-in space.
///
/// All three built-in metrics are weighted L2 norms of the objects' raw
/// coordinates, so objects are stored flattened in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSample {
    layout: Layout,
    width: usize,
    data: Vec<f64>,
}

impl ObjectSample {
    pub fn from_quantiles(objects: Vec<QuantileDistribution>) -> Result<Self> {
        let grid_size = first_size(&objects, QuantileDistribution::grid_size)?;
        Self::flatten(
            Layout::Wasserstein { grid_size },
            grid_size,
            objects.iter().map(|q| q.values()),
        )
    }

    pub fn from_matrices(objects: Vec<SquareMatrixObject>) -> Result<Self> {
        let dim = first_size(&objects, SquareMatrixObject::dimension)?;
        let kind = objects[0].kind();
        if let Some(i) = objects.iter().position(|m| m.kind() != kind) {
            return Err(Error::input(format!(
                "object {} is a {:?} matrix but object 1 is {:?}",
                i + 1,
                objects[i].kind(),
                kind
            )));
        }
        Self::flatten(
            Layout::Frobenius { dim, kind },
            dim * dim,
            objects.iter().map(|m| m.entries()),
        )
    }

    pub fn from_points(objects: Vec<EuclideanPoint>) -> Result<Self> {
        let dim = first_size(&objects, EuclideanPoint::dimension)?;
        Self::flatten(Layout::Euclidean { dim }, dim, objects.iter().map(|p| p.coords()))
    }

    /// Builds a sample from objects of any one space.
    pub fn from_objects(objects: Vec<MetricObject>) -> Result<Self> {
        let Some(first) = objects.first() else {
            return Err(Error::input("a sample needs at least one object"));
        };
        let space = first.space();
        if let Some(i) = objects.iter().position(|o| o.space() != space) {
            return Err(Error::input(format!(
                "object {} lies in a different space than object 1",
                i + 1
            )));
        }
        match space {
            Space::Wasserstein => Self::from_quantiles(
                objects
                    .into_iter()
                    .map(|o| match o {
                        MetricObject::Quantile(q) => q,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            Space::Frobenius => Self::from_matrices(
                objects
                    .into_iter()
                    .map(|o| match o {
                        MetricObject::Matrix(m) => m,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            Space::Euclidean => Self::from_points(
                objects
                    .into_iter()
                    .map(|o| match o {
                        MetricObject::Point(p) => p,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
        }
    }

    /// Flat row-major quantile grids, each already non-decreasing.
    pub(crate) fn from_quantile_rows(grid_size: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_flat(Layout::Wasserstein { grid_size }, grid_size, data)
    }

    pub(crate) fn from_point_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_flat(Layout::Euclidean { dim }, dim, data)
    }

    fn from_flat(layout: Layout, width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || data.is_empty() || data.len() % width != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of width {width}",
                data.len()
            )));
        }
        Ok(Self { layout, width, data })
    }

    /// Convenience constructor for scalar (1-D Euclidean) data.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_points(
            values
                .iter()
                .map(|&v| EuclideanPoint::new(vec![v]))
                .collect::<Result<_>>()?,
        )
    }

    fn flatten<'a>(layout: Layout, width: usize, rows: impl Iterator<Item = &'a [f64]>) -> Result<Self> {
        let mut data = Vec::new();
        for (i, row) in rows.enumerate() {
            if row.len() != width {
                return Err(Error::Dimension(format!(
                    "object {} has {} coordinates, expected {width}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { layout, width, data })
    }

    /// Concatenates samples from the same space, in order.
    pub fn concat(parts: &[ObjectSample]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::input("nothing to concatenate"));
        };
        if let Some(i) = parts.iter().position(|p| p.layout != first.layout) {
            return Err(Error::Dimension(format!(
                "sample {} does not match the space or dimension of sample 1",
                i + 1
            )));
        }
        Ok(Self {
            layout: first.layout,
            width: first.width,
            data: parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
        })
    }

    /// The objects at `members`, in order.
    pub fn subset(&self, members: &[usize]) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::input("a sample needs at least one object"));
        }
        let mut data = Vec::with_capacity(members.len() * self.width);
        for &i in members {
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            layout: self.layout,
            width: self.width,
            data,
        })
    }

    pub fn space(&self) -> Space {
        match self.layout {
            Layout::Wasserstein { .. } => Space::Wasserstein,
            Layout::Frobenius { .. } => Space::Frobenius,
            Layout::Euclidean { .. } => Space::Euclidean,
        }
    }

    /// Matrix kind for Frobenius samples.
    pub fn matrix_kind(&self) -> Option<MatrixKind> {
        match self.layout {
            Layout::Frobenius { kind, .. } => Some(kind),
            _ => None,
        }
    }

    /// Number of raw coordinates per object.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn object(&self, i: usize) -> MetricObject {
        self.wrap(self.row(i).to_vec())
    }

    pub fn objects(&self) -> impl Iterator<Item = MetricObject> + '_ {
        (0..self.len()).map(|i| self.object(i))
    }

    /// Squared distance weight: `1/M` for quantile grids, 1 otherwise.
    fn weight(&self) -> f64 {
        match self.layout {
            Layout::Wasserstein { grid_size } => 1.0 / grid_size as f64,
            _ => 1.0,
        }
    }

    fn wrap(&self, raw: Vec<f64>) -> MetricObject {
        match self.layout {
            Layout::Wasserstein { .. } => MetricObject::Quantile(QuantileDistribution::new_unchecked(running_max(raw))),
            Layout::Frobenius { dim, kind } => MetricObject::Matrix(SquareMatrixObject::new_unchecked(dim, raw, kind)),
            Layout::Euclidean { .. } => MetricObject::Point(EuclideanPoint::new_unchecked(raw)),
        }
    }

    fn sq_dist_rows(&self, a: &[f64], b: &[f64]) -> f64 {
        let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        ss * self.weight()
    }

    /// Coordinate-wise average of the members, computed as an offset from the
    /// first member so that a sample of identical objects averages to exactly
    /// that object.
    fn average_rows(&self, members: &[usize]) -> Vec<f64> {
        let anchor = self.row(members[0]);
        let mut acc = vec![0.0; self.width];
        for &i in &members[1..] {
            for ((a, &x), &x0) in acc.iter_mut().zip(self.row(i)).zip(anchor) {
                *a += x - x0;
            }
        }
        let m = members.len() as f64;
        anchor.iter().zip(acc).map(|(&x0, a)| x0 + a / m).collect()
    }
}

fn first_size<T>(objects: &[T], size: impl Fn(&T) -> usize) -> Result<usize> {
    match objects.first() {
        Some(o) => Ok(size(o)),
        None => Err(Error::input("a sample needs at least one object")),
    }
}

impl MetricSample for ObjectSample {
    type Mean = MetricObject;

    fn len(&self) -> usize {
        self.data.len() / self.width
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.sq_dist_rows(self.row(i), self.row(j)).sqrt()
    }

    fn mean_of(&self, members: &[usize]) -> MetricObject {
        self.wrap(self.average_rows(members))
    }

    fn sq_distances_to(&self, mean: &MetricObject, members: &[usize], out: &mut Vec<f64>) {
        let m = mean.as_slice();
        out.clear();
        out.extend(members.iter().map(|&i| self.sq_dist_rows(self.row(i), m)));
    }
}

/// Closed-form sample Fréchet mean of a built-in sample: pointwise average of
/// quantile functions (Wasserstein), entrywise average (Frobenius) or the
/// arithmetic mean vector (Euclidean).
pub fn closed_form_mean(sample: &ObjectSample) -> MetricObject {
    let all: Vec<usize> = (0..sample.len()).collect();
    sample.mean_of(&all)
}

type MeanSolver = dyn Fn(&[usize]) -> Vec<f64> + Send + Sync;

/// A sample from an arbitrary metric space given only by its distance table.
///
/// Without a mean solver the sample medoid (the member minimizing the sum of
/// squared distances to all members, ties to the lowest index) stands in for
/// the Fréchet mean and results are flagged approximate. A caller-supplied
/// solver receives the member indices and returns `d²(mean, Y_i)` for each,
/// in order.
#[derive(Clone)]
pub struct DistanceTableSample {
    n: usize,
    table: Vec<f64>,
    solver: Option<Arc<MeanSolver>>,
}

/// Mean representation for [`DistanceTableSample`].
#[derive(Debug, Clone, PartialEq)]
pub enum TableMean {
    /// Index of the medoid within the sample.
    Medoid(usize),
    /// Squared distances from a solver-computed mean to the members.
    Solved(Vec<f64>),
}

impl fmt::Debug for DistanceTableSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistanceTableSample")
            .field("n", &self.n)
            .field("has_solver", &self.solver.is_some())
            .finish()
    }
}

impl DistanceTableSample {
    /// Wraps a full row-major `n x n` distance table.
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a sample needs at least one object"));
        }
        if table.len() != n * n {
            return Err(Error::Dimension(format!(
                "distance table for {n} objects needs {} entries, got {}",
                n * n,
                table.len()
            )));
        }
        for i in 0..n {
            if table[i * n + i] != 0.0 {
                return Err(Error::input(format!(
                    "distance table diagonal entry {} is not 0",
                    i + 1
                )));
            }
            for j in (i + 1)..n {
                let d = table[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::input(format!(
                        "distance ({}, {}) must be finite and non-negative",
                        i + 1,
                        j + 1
                    )));
                }
                if (d - table[j * n + i]).abs() > 1e-12 * d.max(1.0) {
                    return Err(Error::input(format!(
                        "distance table is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { n, table, solver: None })
    }

    pub fn from_fn(n: usize, dist: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut table = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist(i, j);
                table[i * n + j] = d;
                table[j * n + i] = d;
            }
        }
        Self::new(n, table)
    }

    pub fn with_mean_solver(mut self, solver: impl Fn(&[usize]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.solver = Some(Arc::new(solver));
        self
    }

    fn medoid(&self, members: &[usize]) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        for &c in members {
            let cost: f64 = members
                .iter()
                .map(|&i| {
                    let d = self.table[c * self.n + i];
                    d * d
                })
                .sum();
            if cost < best.0 || (cost == best.0 && c < best.1) {
                best = (cost, c);
            }
        }
        best.1
    }
}

impl MetricSample for DistanceTableSample {
    type Mean = TableMean;

    fn len(&self) -> usize {
        self.n
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.table[i * self.n + j]
    }

    fn mean_of(&self, members: &[usize]) -> TableMean {
        match &self.solver {
            Some(solve) => TableMean::Solved(solve(members)),
            None => TableMean::Medoid(self.medoid(members)),
        }
    }

    fn sq_distances_to(&self, mean: &TableMean, members: &[usize], out: &mut Vec<f64>) {
        out.clear();
        match mean {
            TableMean::Medoid(c) => out.extend(members.iter().map(|&i| {
                let d = self.table[c * self.n + i];
                d * d
            })),
            TableMean::Solved(sq) => out.extend_from_slice(sq),
        }
    }

    fn mean_is_approximate(&self) -> bool {
        self.solver.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::laplacian_from_adjacency;

    #[test]
    fn mean_of_identical_objects_is_that_object() {
        let q = QuantileDistribution::new(vec![0.1, 0.2, 0.7]).unwrap();
        let s = ObjectSample::from_quantiles(vec![q.clone(); 7]).unwrap();
        assert_eq!(closed_form_mean(&s), MetricObject::Quantile(q));
        let s = ObjectSample::from_scalars(&[0.1; 3]).unwrap();
        assert_eq!(closed_form_mean(&s).as_slice(), &[0.1]);
    }

    #[test]
    fn mean_of_two_grids_is_equidistant() {
        let g = QuantileDistribution::new(vec![0.0, 1.0, 5.0]).unwrap();
        let h = QuantileDistribution::new(vec![2.0, 2.0, 3.0]).unwrap();
        let s = ObjectSample::from_quantiles(vec![g.clone(), h.clone()]).unwrap();
        let mean = closed_form_mean(&s);
        assert_eq!(mean.as_slice(), &[1.0, 1.5, 4.0]);
        let dg = mean.distance(&MetricObject::Quantile(g)).unwrap();
        let dh = mean.distance(&MetricObject::Quantile(h)).unwrap();
        assert!((dg - dh).abs() < 1e-15);
    }

    #[test]
    fn averaged_laplacians_stay_laplacians() {
        let a = laplacian_from_adjacency(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 0.0]).unwrap();
        let b = laplacian_from_adjacency(3, &[0.0, 0.5, 3.0, 0.5, 0.0, 0.0, 3.0, 0.0, 0.0]).unwrap();
        let s = ObjectSample::from_matrices(vec![a, b]).unwrap();
        match closed_form_mean(&s) {
            MetricObject::Matrix(m) => {
                assert_eq!(m.kind(), MatrixKind::Laplacian);
                m.validate().unwrap();
            }
            other => panic!("unexpected mean {other:?}"),
        }
    }

    #[test]
    fn sample_rejects_mixed_objects() {
        let a = EuclideanPoint::new(vec![1.0]).unwrap();
        let b = EuclideanPoint::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            ObjectSample::from_points(vec![a, b]),
            Err(Error::Dimension(_))
        ));
        assert!(ObjectSample::from_points(vec![]).is_err());
        let q = MetricObject::Quantile(QuantileDistribution::new(vec![0.0, 1.0]).unwrap());
        let p = MetricObject::Point(EuclideanPoint::new(vec![0.0]).unwrap());
        assert!(ObjectSample::from_objects(vec![q.clone(), p]).is_err());
        assert_eq!(ObjectSample::from_objects(vec![q]).unwrap().space(), Space::Wasserstein);
        let lap = laplacian_from_adjacency(2, &[0.0; 4]).unwrap();
        let sym = SquareMatrixObject::new(2, vec![0.0; 4], MatrixKind::Symmetric).unwrap();
        assert!(ObjectSample::from_matrices(vec![lap, sym]).is_err());
    }

    #[test]
    fn concat_and_subset() {
        let a = ObjectSample::from_scalars(&[0.0, 1.0]).unwrap();
        let b = ObjectSample::from_scalars(&[2.0]).unwrap();
        let c = ObjectSample::concat(&[a, b]).unwrap();
        assert_eq!(c.len(), 3);
        let s = c.subset(&[2, 2, 0]).unwrap();
        assert_eq!(s.row(0), &[2.0]);
        assert_eq!(s.row(2), &[0.0]);
        let q = ObjectSample::from_quantiles(vec![QuantileDistribution::new(vec![0.0, 1.0]).unwrap()]).unwrap();
        assert!(ObjectSample::concat(&[c, q]).is_err());
    }

    #[test]
    fn medoid_fallback_and_solver() {
        // points 0, 1, 5 on a line
        let xs = [0.0_f64, 1.0, 5.0];
        let t = DistanceTableSample::from_fn(3, |i, j| (xs[i] - xs[j]).abs()).unwrap();
        assert!(t.mean_is_approximate());
        assert_eq!(t.mean_of(&[0, 1, 2]), TableMean::Medoid(1));
        // tie between the two members of a pair: lowest index wins
        assert_eq!(t.mean_of(&[2, 0]), TableMean::Medoid(0));
        let mut out = Vec::new();
        t.sq_distances_to(&TableMean::Medoid(1), &[0, 1, 2], &mut out);
        assert_eq!(out, vec![1.0, 0.0, 16.0]);

        let exact = t.clone().with_mean_solver(move |m| {
            let mean = m.iter().map(|&i| xs[i]).sum::<f64>() / m.len() as f64;
            m.iter().map(|&i| (xs[i] - mean).powi(2)).collect()
        });
        assert!(!exact.mean_is_approximate());
        let mean = exact.mean_of(&[0, 1, 2]);
        exact.sq_distances_to(&mean, &[0, 1, 2], &mut out);
        assert!((out[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn distance_table_validation() {
        assert!(DistanceTableSample::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceTableSample::new(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceTableSample::new(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(DistanceTableSample::new(2, vec![0.0, 1.0, 1.0]).is_err());
    }
}
