use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_RTOL: f64 = 1e-12;
const ROW_SUM_TOL: f64 = 1e-10;
const UNIT_DIAGONAL_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

/// Constraint set a matrix object belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// Graph Laplacian `L = D - W`: zero row sums, non-positive off-diagonals.
    Laplacian,
    /// Correlation matrix: unit diagonal, entries in [-1, 1], PSD.
    Correlation,
    /// Any symmetric matrix.
    Symmetric,
}

/// An `r x r` real symmetric matrix in row-major order, compared under the
/// Frobenius metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrixObject {
    dim: usize,
    entries: Vec<f64>,
    kind: MatrixKind,
}

impl SquareMatrixObject {
    pub fn new(dim: usize, entries: Vec<f64>, kind: MatrixKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let m = Self { dim, entries, kind };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: MatrixKind) -> Result<Self> {
        let dim = rows.len();
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Dimension(format!(
                "row {} has {} entries, expected {dim}",
                i + 1,
                rows[i].len()
            )));
        }
        Self::new(dim, rows.concat(), kind)
    }

    pub(crate) fn new_unchecked(dim: usize, entries: Vec<f64>, kind: MatrixKind) -> Self {
        Self { dim, entries, kind }
    }

    /// Checks every invariant of the matrix's kind.
    pub fn validate(&self) -> Result<()> {
        let r = self.dim;
        let e = &self.entries;
        if let Some(i) = e.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "matrix entry ({}, {}) is not finite",
                i / r + 1,
                i % r + 1
            )));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let (a, b) = (e[i * r + j], e[j * r + i]);
                if (a - b).abs() > SYMMETRY_RTOL * a.abs().max(1.0) {
                    return Err(Error::input(format!(
                        "matrix is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        match self.kind {
            MatrixKind::Symmetric => {}
            MatrixKind::Laplacian => {
                for i in 0..r {
                    let row = &e[i * r..(i + 1) * r];
                    let sum: f64 = row.iter().sum();
                    if sum.abs() > ROW_SUM_TOL {
                        return Err(Error::input(format!("Laplacian row {} sums to {sum}, not 0", i + 1)));
                    }
                    if let Some(j) = (0..r).find(|&j| j != i && row[j] > 0.0) {
                        return Err(Error::input(format!(
                            "Laplacian off-diagonal entry ({}, {}) is positive",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
            MatrixKind::Correlation => {
                for i in 0..r {
                    if (e[i * r + i] - 1.0).abs() > UNIT_DIAGONAL_TOL {
                        return Err(Error::input(format!("correlation diagonal entry {} is not 1", i + 1)));
                    }
                }
                if let Some(i) = e.iter().position(|v| v.abs() > 1.0 + SYMMETRY_RTOL) {
                    return Err(Error::input(format!(
                        "correlation entry ({}, {}) lies outside [-1, 1]",
                        i / r + 1,
                        i % r + 1
                    )));
                }
                let eig = SymmetricEigen::new(DMatrix::from_row_slice(r, r, e));
                let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                if min < -PSD_TOL {
                    return Err(Error::input(format!(
                        "correlation matrix is not positive semidefinite (smallest eigenvalue {min:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.dim)
    }
}

/// Frobenius distance `sqrt(trace((A - B)ᵀ(A - B)))`.
pub fn frobenius_distance(a: &SquareMatrixObject, b: &SquareMatrixObject) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!(
            "matrices have dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    Ok(a.entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Graph Laplacian `L = D - W` of a weighted adjacency matrix, where `D` is
/// the diagonal matrix of weighted degrees.
pub fn laplacian_from_adjacency(dim: usize, weights: &[f64]) -> Result<SquareMatrixObject> {
    if dim == 0 || weights.len() != dim * dim {
        return Err(Error::Dimension(format!(
            "adjacency needs {} entries for dimension {dim}, got {}",
            dim * dim,
            weights.len()
        )));
    }
    let mut lap = vec![0.0; dim * dim];
    for i in 0..dim {
        let mut degree = 0.0;
        for j in 0..dim {
            let w = weights[i * dim + j];
            if !w.is_finite() || w < 0.0 {
                return Err(Error::input(format!(
                    "adjacency weight ({}, {}) must be finite and non-negative, got {w}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                if w != 0.0 {
                    return Err(Error::input(format!("adjacency diagonal entry {} must be 0", i + 1)));
                }
                continue;
            }
            if w != weights[j * dim + i] {
                return Err(Error::input(format!(
                    "adjacency is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            lap[i * dim + j] = 0.0 - w;
            degree += w;
        }
        lap[i * dim + i] = degree;
    }
    Ok(SquareMatrixObject::new_unchecked(dim, lap, MatrixKind::Laplacian))
}
