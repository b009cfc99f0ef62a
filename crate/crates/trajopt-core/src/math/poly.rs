//! Entry-wise least-squares projection of time signals onto a polynomial
//! space, used to smooth per-step moment estimates across the horizon.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Orthogonal projector onto polynomials of a given degree, sampled at
/// `len` equispaced points.
///
/// The monomial basis is evaluated on the normalised abscissa
/// `n / (len - 1) in [0, 1]` to keep the Vandermonde matrix well conditioned;
/// the projector itself (`Q Qᵀ` from a thin QR) is basis-independent.
#[derive(Clone, Debug)]
pub struct PolyProjector {
    hat: DMatrix<f64>,
}

impl PolyProjector {
    pub fn new(len: usize, degree: usize) -> Result<Self> {
        if degree >= len {
            return Err(Error::DegreeTooHigh { degree, len });
        }
        let denom = if len > 1 { (len - 1) as f64 } else { 1.0 };
        let vander = DMatrix::from_fn(len, degree + 1, |i, j| {
            (i as f64 / denom).powi(j as i32)
        });
        let qr = vander.qr();
        let q = qr.q();
        Ok(PolyProjector { hat: &q * q.transpose() })
    }

    pub fn len(&self) -> usize {
        self.hat.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Project every column of `data` (rows indexed by time).
    pub fn project_columns(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "signal has {} points, projector expects {}",
                data.nrows(),
                self.len()
            )));
        }
        Ok(&self.hat * data)
    }

    /// Project a sequence of equally sized vectors entry-wise.
    pub fn project_vectors(&self, series: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let data = stack_rows(series.iter().map(|v| v.as_slice()), self.len())?;
        let smoothed = self.project_columns(&data)?;
        Ok((0..self.len())
            .map(|i| smoothed.row(i).transpose())
            .collect())
    }

    /// Project a sequence of equally shaped matrices entry-wise.
    pub fn project_matrices(&self, series: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let (r, c) = match series.first() {
            Some(m) => m.shape(),
            None => return Ok(Vec::new()),
        };
        if series.iter().any(|m| m.shape() != (r, c)) {
            return Err(Error::DimensionMismatch(
                "matrices of unequal shape".to_string(),
            ));
        }
        let data = stack_rows(series.iter().map(|m| m.as_slice()), self.len())?;
        let smoothed = self.project_columns(&data)?;
        Ok((0..self.len())
            .map(|i| {
                DMatrix::from_column_slice(r, c, smoothed.row(i).transpose().as_slice())
            })
            .collect())
    }
}

fn stack_rows<'a>(
    rows: impl ExactSizeIterator<Item = &'a [f64]>,
    expected_len: usize,
) -> Result<DMatrix<f64>> {
    if rows.len() != expected_len {
        return Err(Error::DimensionMismatch(format!(
            "signal has {} points, projector expects {}",
            rows.len(),
            expected_len
        )));
    }
    let mut data: Option<DMatrix<f64>> = None;
    for (i, row) in rows.enumerate() {
        let d = data.get_or_insert_with(|| DMatrix::zeros(expected_len, row.len()));
        if row.len() != d.ncols() {
            return Err(Error::DimensionMismatch(
                "entries of unequal dimension".to_string(),
            ));
        }
        for (j, v) in row.iter().enumerate() {
            d[(i, j)] = *v;
        }
    }
    Ok(data.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Convenience wrapper building the projector on the fly.
pub fn poly_project_vectors(series: &[DVector<f64>], degree: usize) -> Result<Vec<DVector<f64>>> {
    PolyProjector::new(series.len(), degree)?.project_vectors(series)
}

/// Convenience wrapper building the projector on the fly.
pub fn poly_project_matrices(series: &[DMatrix<f64>], degree: usize) -> Result<Vec<DMatrix<f64>>> {
    PolyProjector::new(series.len(), degree)?.project_matrices(series)
}
