//! The n×p data matrix consumed by every test. Rows are observations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    /// Wrap a matrix whose rows are observations. All entries must be finite.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyInput("sample matrix"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample matrix entry"));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("sample rows"));
        }
        let p = rows[0].len();
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
        }
        Self::from_matrix(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    /// A univariate sample (single column).
    pub fn from_column(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::from_matrix(DMatrix::from_vec(n, 1, values))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Columnwise mean.
    pub fn mean_vector(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_iterator(self.dim(), self.data.column_iter().map(|c| c.sum() / n))
    }

    /// Mean over all cells.
    pub fn grand_mean(&self) -> f64 {
        self.data.sum() / (self.n() * self.dim()) as f64
    }
}
