use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{invalid, Result};

/// An `n x p` sample of observations, one row per observation.
///
/// Construction checks that every entry is finite and that at least two rows
/// are present, so downstream pairwise code never has to.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 {
            return Err(invalid(format!("need at least 2 observations, got {n}")));
        }
        if p == 0 {
            return Err(invalid("observations must have at least one coordinate"));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(invalid(format!("non-finite entry {v} at row {i}, column {j}")));
        }
        Ok(Self { values: values.as_standard_layout().into_owned() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(invalid(format!("row {i} has {} columns, expected {p}", r.len())));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), p), flat)
            .map_err(|e| invalid(e.to_string()))?;
        Self::new(values)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Row `i` as a contiguous slice.
    pub fn row_slice(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.values.as_slice().expect("standard layout")[i * p..(i + 1) * p]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    /// Builds the resampled matrix whose `r`-th row is row `idx[r]` of `self`.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(invalid(format!("row index {bad} out of range for n = {n}")));
        }
        Self::new(self.values.select(Axis(0), idx))
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.values * c)
    }
}
