//! Symmetric pairwise kernels `h(x1, x2)` of order two.
//!
//! Three kernels are built in:
//!
//! * `Mean`: `(x1 + x2) / 2`, output length `p`; its U-statistic is the sample mean.
//! * `Covariance`: `(x1 - x2)(x1 - x2)^T / 2`; its U-statistic is the unbiased
//!   sample covariance.
//! * `KendallTau`: the concordance indicator `1{(x1m - x2m)(x1k - x2k) > 0}`;
//!   its U-statistic is the matrix of pairwise concordance probabilities.
//!
//! Matrix-valued kernels are stored as the flattened upper triangle
//! (diagonal included), `d = p(p+1)/2`, with the layout given by [`TriIndex`].

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{invalid, Result};

/// Row-major flat layout of the upper triangle of a `p x p` symmetric matrix.
///
/// Flat index 0 is `(0,0)`, followed by `(0,1) .. (0,p-1)`, `(1,1)`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriIndex {
    p: usize,
}

impl TriIndex {
    pub fn new(p: usize) -> Self {
        Self { p }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.p * (self.p + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.p == 0
    }

    fn row_offset(&self, m: usize) -> usize {
        m * self.p - m * m.saturating_sub(1) / 2
    }

    /// Flat index of entry `(m, k)`; the order of `m` and `k` does not matter.
    pub fn flat(&self, m: usize, k: usize) -> usize {
        let (m, k) = if m <= k { (m, k) } else { (k, m) };
        debug_assert!(k < self.p);
        self.row_offset(m) + (k - m)
    }

    /// Matrix position `(m, k)` with `m <= k` of flat index `j`.
    pub fn pair(&self, j: usize) -> (usize, usize) {
        debug_assert!(j < self.len());
        // Row m holds p - m entries; walk rows until j falls inside one.
        let mut m = 0;
        let mut start = 0;
        loop {
            let width = self.p - m;
            if j < start + width {
                return (m, m + (j - start));
            }
            start += width;
            m += 1;
        }
    }

    /// Per-flat-index flag marking the off-diagonal entries.
    pub fn off_diagonal_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.len());
        for m in 0..self.p {
            for k in m..self.p {
                mask.push(m != k);
            }
        }
        mask
    }

    /// Expands a flat vector into the full symmetric matrix.
    pub fn to_matrix(&self, flat: ArrayView1<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.p, self.p));
        let mut j = 0;
        for m in 0..self.p {
            for k in m..self.p {
                out[[m, k]] = flat[j];
                out[[k, m]] = flat[j];
                j += 1;
            }
        }
        out
    }

    /// Reads the upper triangle of a square matrix into flat layout.
    pub fn from_matrix(&self, mat: &Array2<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.len());
        let mut j = 0;
        for m in 0..self.p {
            for k in m..self.p {
                out[j] = mat[[m, k]];
                j += 1;
            }
        }
        out
    }
}

/// A user-supplied kernel. The evaluator writes `h(x1, x2)` into its output
/// slice and must be symmetric in its two arguments.
pub type PairFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub struct CustomKernel {
    name: String,
    eval: Arc<PairFn>,
    output_dim: usize,
    matrix: bool,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("name", &self.name)
            .field("output_dim", &self.output_dim)
            .field("matrix", &self.matrix)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    Mean,
    Covariance,
    KendallTau,
    Custom(CustomKernel),
}

/// A symmetric order-two kernel bound to an input dimension.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    kind: KernelKind,
    input_dim: usize,
    output_dim: usize,
    index: Option<TriIndex>,
}

impl KernelSpec {
    pub fn mean(p: usize) -> Self {
        Self { kind: KernelKind::Mean, input_dim: p, output_dim: p, index: None }
    }

    pub fn covariance(p: usize) -> Self {
        let index = TriIndex::new(p);
        Self { kind: KernelKind::Covariance, input_dim: p, output_dim: index.len(), index: Some(index) }
    }

    pub fn kendall(p: usize) -> Self {
        let index = TriIndex::new(p);
        Self { kind: KernelKind::KendallTau, input_dim: p, output_dim: index.len(), index: Some(index) }
    }

    /// Wraps an arbitrary symmetric evaluator.
    ///
    /// With `matrix = true` the output must follow the [`TriIndex`] layout for
    /// `p`, i.e. `output_dim == p(p+1)/2`; otherwise masked (off-diagonal)
    /// operations reject the kernel.
    pub fn custom<F>(name: &str, p: usize, output_dim: usize, matrix: bool, eval: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if p == 0 || output_dim == 0 {
            return Err(invalid("kernel dimensions must be positive"));
        }
        let index = if matrix {
            let idx = TriIndex::new(p);
            if idx.len() != output_dim {
                return Err(invalid(format!(
                    "matrix-structured kernel on p = {p} must have output_dim {}, got {output_dim}",
                    idx.len()
                )));
            }
            Some(idx)
        } else {
            None
        };
        let custom = CustomKernel { name: name.to_string(), eval: Arc::new(eval), output_dim, matrix };
        Ok(Self { kind: KernelKind::Custom(custom), input_dim: p, output_dim, index })
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            KernelKind::Mean => "mean",
            KernelKind::Covariance => "cov",
            KernelKind::KendallTau => "kendall",
            KernelKind::Custom(c) => &c.name,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Flat layout of a matrix-structured kernel, `None` for vector kernels.
    pub fn index_map(&self) -> Option<TriIndex> {
        self.index
    }

    pub fn is_matrix(&self) -> bool {
        self.index.is_some()
    }

    pub(crate) fn check_input(&self, p: usize) -> Result<()> {
        if p != self.input_dim {
            return Err(invalid(format!(
                "kernel '{}' expects observations of length {}, got {p}",
                self.name(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Evaluates `h(x1, x2)` into `out` without checking lengths.
    #[inline]
    pub fn eval_into(&self, x1: &[f64], x2: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x1.len(), self.input_dim);
        debug_assert_eq!(x2.len(), self.input_dim);
        debug_assert_eq!(out.len(), self.output_dim);
        match &self.kind {
            KernelKind::Mean => mean_into(x1, x2, out),
            KernelKind::Covariance => cov_into(x1, x2, out),
            KernelKind::KendallTau => kendall_into(x1, x2, out),
            KernelKind::Custom(c) => (c.eval)(x1, x2, out),
        }
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        if x1.len() != x2.len() {
            return Err(invalid(format!("argument lengths differ: {} vs {}", x1.len(), x2.len())));
        }
        self.check_input(x1.len())?;
        let mut out = vec![0.0; self.output_dim];
        self.eval_into(x1, x2, &mut out);
        Ok(out)
    }
}

fn check_pair(x1: &[f64], x2: &[f64]) -> Result<()> {
    if x1.len() != x2.len() {
        return Err(invalid(format!("argument lengths differ: {} vs {}", x1.len(), x2.len())));
    }
    if x1.is_empty() {
        return Err(invalid("empty observation"));
    }
    Ok(())
}

fn mean_into(x1: &[f64], x2: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(x1).zip(x2) {
        *o = (a + b) / 2.0;
    }
}

fn cov_into(x1: &[f64], x2: &[f64], out: &mut [f64]) {
    let p = x1.len();
    let mut j = 0;
    for m in 0..p {
        let dm = x1[m] - x2[m];
        for k in m..p {
            out[j] = dm * (x1[k] - x2[k]) / 2.0;
            j += 1;
        }
    }
}

/// Sign of `a - b` as -1, 0 or 1.
#[inline]
pub(crate) fn diff_sign(a: f64, b: f64) -> i8 {
    if a > b {
        1
    } else if a < b {
        -1
    } else {
        0
    }
}

fn kendall_into(x1: &[f64], x2: &[f64], out: &mut [f64]) {
    let p = x1.len();
    let mut j = 0;
    for m in 0..p {
        let sm = diff_sign(x1[m], x2[m]);
        for k in m..p {
            out[j] = if sm * diff_sign(x1[k], x2[k]) > 0 { 1.0 } else { 0.0 };
            j += 1;
        }
    }
}

/// `(x1 + x2) / 2`.
pub fn eval_mean_kernel(x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    check_pair(x1, x2)?;
    let mut out = vec![0.0; x1.len()];
    mean_into(x1, x2, &mut out);
    Ok(out)
}

/// Flattened upper triangle of `(x1 - x2)(x1 - x2)^T / 2`.
pub fn eval_cov_kernel(x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    check_pair(x1, x2)?;
    let mut out = vec![0.0; TriIndex::new(x1.len()).len()];
    cov_into(x1, x2, &mut out);
    Ok(out)
}

/// Flattened upper triangle of the concordance indicators. Ties count as 0.
pub fn eval_kendall_kernel(x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
    check_pair(x1, x2)?;
    let mut out = vec![0.0; TriIndex::new(x1.len()).len()];
    kendall_into(x1, x2, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_kernel_examples() {
        assert_eq!(eval_mean_kernel(&[1.0], &[3.0]).unwrap(), vec![2.0]);
        assert_eq!(eval_mean_kernel(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(eval_mean_kernel(&[2.0], &[2.0]).unwrap(), vec![2.0]);
        assert!(eval_mean_kernel(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn cov_kernel_examples() {
        assert_eq!(eval_cov_kernel(&[0.0], &[2.0]).unwrap(), vec![2.0]);
        // (1,1), (1,2), (2,2)
        assert_eq!(eval_cov_kernel(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.5, -0.5, 0.5]);
        assert_eq!(eval_cov_kernel(&[5.0], &[5.0]).unwrap(), vec![0.0]);
        assert!(eval_cov_kernel(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn kendall_kernel_examples() {
        let idx = TriIndex::new(2);
        let h = eval_kendall_kernel(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(h[idx.flat(0, 1)], 1.0);
        let h = eval_kendall_kernel(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert_eq!(h[idx.flat(0, 1)], 0.0);
        let h = eval_kendall_kernel(&[1.0, 5.0], &[1.0, 7.0]).unwrap();
        assert_eq!(h[idx.flat(0, 0)], 0.0);
        assert_eq!(h[idx.flat(1, 1)], 1.0);
        assert_eq!(h[idx.flat(0, 1)], 0.0);
        assert!(eval_kendall_kernel(&[], &[]).is_err());
    }

    #[test]
    fn tri_index_round_trip_up_to_64() {
        for p in 1..=64 {
            let idx = TriIndex::new(p);
            assert_eq!(idx.len(), p * (p + 1) / 2);
            for j in 0..idx.len() {
                let (m, k) = idx.pair(j);
                assert!(m <= k && k < p);
                assert_eq!(idx.flat(m, k), j);
                assert_eq!(idx.flat(k, m), j);
            }
        }
    }

    #[test]
    fn matrix_expansion_round_trip() {
        let idx = TriIndex::new(3);
        let flat = Array1::from(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mat = idx.to_matrix(flat.view());
        assert_eq!(mat[[2, 0]], 3.0);
        assert_eq!(mat[[1, 2]], 5.0);
        assert_eq!(idx.from_matrix(&mat), flat);
        assert_eq!(idx.off_diagonal_mask(), vec![false, true, true, false, true, false]);
    }

    #[test]
    fn custom_matrix_kernel_needs_triangle_length() {
        let bad = KernelSpec::custom("bad", 3, 5, true, |_, _, _| {});
        assert!(bad.is_err());
        let ok = KernelSpec::custom("prod", 2, 3, true, |a, b, out| {
            let h = eval_cov_kernel(a, b).unwrap();
            out.copy_from_slice(&h);
        })
        .unwrap();
        assert!(ok.is_matrix());
        assert_eq!(ok.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![0.5, 0.5, 0.5]);
        assert!(ok.eval(&[0.0], &[1.0]).is_err());
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|p| {
            (
                proptest::collection::vec(-5.0f64..5.0, p),
                proptest::collection::vec(-5.0f64..5.0, p),
            )
        })
    }

    proptest! {
        #[test]
        fn builtin_kernels_are_bitwise_symmetric((a, b) in pair_strategy()) {
            for k in [KernelSpec::mean(a.len()), KernelSpec::covariance(a.len()), KernelSpec::kendall(a.len())] {
                let h12 = k.eval(&a, &b).unwrap();
                let h21 = k.eval(&b, &a).unwrap();
                let bits12: Vec<u64> = h12.iter().map(|v| v.to_bits()).collect();
                let bits21: Vec<u64> = h21.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits12, bits21);
            }
        }

        #[test]
        fn kendall_is_indicator_and_cov_vanishes_on_diagonal((a, b) in pair_strategy()) {
            let h = eval_kendall_kernel(&a, &b).unwrap();
            prop_assert!(h.iter().all(|&v| v == 0.0 || v == 1.0));
            prop_assert!(eval_cov_kernel(&a, &a).unwrap().iter().all(|&v| v == 0.0));
        }
    }
}
