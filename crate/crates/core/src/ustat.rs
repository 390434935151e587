//! U- and V-statistics, Hájek projection tables and the three covariance
//! estimators built from them.
//!
//! For a symmetric kernel `h` and a sample `X_1..X_n`:
//!
//! * `U_n = [n(n-1)]^{-1} sum_{i != j} h(X_i, X_j)`
//! * `V_n = n^{-2} sum_{i, j} h(X_i, X_j)`
//! * `ghat_i = (n-1)^{-1} sum_{j != i} h(X_i, X_j) - U_n`
//!
//! The built-in kernels have closed forms that avoid the `O(n^2 d)` pair loop;
//! [`EvalPath::Generic`] forces the pair loop for any kernel.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::data::DataMatrix;
use crate::error::{invalid, Error, Result};
use crate::kernels::{diff_sign, KernelKind, KernelSpec, TriIndex};

/// Largest `d` for which a `d x d` covariance estimate is materialized.
pub const DEFAULT_D_LIMIT: usize = 4096;

/// Chooses between the closed-form routes of the built-in kernels and the
/// literal pair loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    #[default]
    Auto,
    Generic,
}

#[derive(Debug, Clone)]
pub struct UStatSummary {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    /// `n^{-1} sum_i h(X_i, X_i)`.
    pub diag_mean: Array1<f64>,
    pub n: usize,
    pub kernel: KernelSpec,
}

/// Per-observation Hájek projection estimates, the input of the multiplier
/// bootstrap.
#[derive(Debug, Clone)]
pub struct HajekTable {
    /// `n x d`, row `i` is `ghat_i`.
    pub ghat: Array2<f64>,
    pub u: Array1<f64>,
    pub n: usize,
    pub d: usize,
    pub kernel: KernelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    /// Conditional covariance of the empirical-bootstrap projection.
    Empirical,
    /// Jackknife estimator of the covariance of the U-statistic.
    Jackknife,
    /// Conditional covariance of the jackknife multiplier bootstrap.
    Multiplier,
}

#[derive(Debug, Clone)]
pub struct CovEstimate {
    pub matrix: Array2<f64>,
    pub kind: CovKind,
}

/// Sums the rows of `rows` by recursive halving.
pub(crate) fn pairwise_row_sum(rows: ArrayView2<'_, f64>) -> Array1<f64> {
    const BLOCK: usize = 16;
    let n = rows.nrows();
    if n <= BLOCK {
        let mut acc = Array1::zeros(rows.ncols());
        for r in rows.rows() {
            acc += &r;
        }
        return acc;
    }
    let mid = n / 2;
    let mut left = pairwise_row_sum(rows.slice(s![..mid, ..]));
    left += &pairwise_row_sum(rows.slice(s![mid.., ..]));
    left
}

fn check(data: &DataMatrix, kernel: &KernelSpec, min_n: usize) -> Result<()> {
    kernel.check_input(data.p())?;
    if data.n() < min_n {
        return Err(invalid(format!("need n >= {min_n}, got {}", data.n())));
    }
    Ok(())
}

/// `r_i = sum_{j != i} h(X_i, X_j)` for every row, by the pair loop. Each
/// unordered pair is evaluated once; row `i` accumulates over `j` ascending.
fn pair_row_sums(data: &DataMatrix, kernel: &KernelSpec) -> Array2<f64> {
    let n = data.n();
    let d = kernel.output_dim();
    let mut sums = Array2::<f64>::zeros((n, d));
    let mut h = vec![0.0; d];
    for i in 0..n {
        let xi = data.row_slice(i);
        for j in (i + 1)..n {
            kernel.eval_into(xi, data.row_slice(j), &mut h);
            for (acc, v) in sums.row_mut(i).iter_mut().zip(&h) {
                *acc += v;
            }
            for (acc, v) in sums.row_mut(j).iter_mut().zip(&h) {
                *acc += v;
            }
        }
    }
    sums
}

/// Exact integer concordance counts per row and their total.
fn kendall_row_counts(data: &DataMatrix) -> (Vec<u32>, Vec<u64>) {
    let n = data.n();
    let p = data.p();
    let d = TriIndex::new(p).len();
    let mut counts = vec![0u32; n * d];
    let mut signs = vec![0i8; p];
    let mut hit = vec![0u32; d];
    for i in 0..n {
        let xi = data.row_slice(i);
        for j in (i + 1)..n {
            let xj = data.row_slice(j);
            for (s, (a, b)) in signs.iter_mut().zip(xi.iter().zip(xj)) {
                *s = diff_sign(*a, *b);
            }
            let mut f = 0;
            for m in 0..p {
                let sm = signs[m];
                for &sk in &signs[m..] {
                    hit[f] = (sm * sk > 0) as u32;
                    f += 1;
                }
            }
            for (c, h) in counts[i * d..(i + 1) * d].iter_mut().zip(&hit) {
                *c += h;
            }
            for (c, h) in counts[j * d..(j + 1) * d].iter_mut().zip(&hit) {
                *c += h;
            }
        }
    }
    let mut total = vec![0u64; d];
    for row in counts.chunks(d) {
        for (t, &c) in total.iter_mut().zip(row) {
            *t += c as u64;
        }
    }
    (counts, total)
}

/// Column means and the centered data.
fn center(data: &DataMatrix) -> (Array1<f64>, Array2<f64>) {
    let x = data.values();
    let n = data.n() as f64;
    let mean = pairwise_row_sum(x) / n;
    let centered = &x - &mean;
    (mean, centered)
}

/// Unbiased sample covariance in flat upper-triangle layout.
fn flat_sample_cov(centered: &Array2<f64>) -> Array1<f64> {
    let n = centered.nrows() as f64;
    let cross = centered.t().dot(centered) / (n - 1.0);
    TriIndex::new(centered.ncols()).from_matrix(&cross)
}

fn diag_mean(data: &DataMatrix, kernel: &KernelSpec) -> Array1<f64> {
    let n = data.n();
    let d = kernel.output_dim();
    let mut diag = Array2::<f64>::zeros((n, d));
    for i in 0..n {
        let xi = data.row_slice(i);
        kernel.eval_into(xi, xi, diag.row_mut(i).as_slice_mut().expect("contiguous"));
    }
    pairwise_row_sum(diag.view()) / n as f64
}

fn summary_from(u: Array1<f64>, dmean: Array1<f64>, n: usize, kernel: &KernelSpec) -> UStatSummary {
    let nf = n as f64;
    let v = (&u * (nf - 1.0) + &dmean) / nf;
    UStatSummary { u, v, diag_mean: dmean, n, kernel: kernel.clone() }
}

/// Computes `U_n` and `V_n`.
pub fn compute_ustat(data: &DataMatrix, kernel: &KernelSpec) -> Result<UStatSummary> {
    compute_ustat_via(data, kernel, EvalPath::Auto)
}

pub fn compute_ustat_via(data: &DataMatrix, kernel: &KernelSpec, path: EvalPath) -> Result<UStatSummary> {
    check(data, kernel, 2)?;
    let n = data.n();
    let nf = n as f64;
    let generic = path == EvalPath::Generic;
    match kernel.kind() {
        KernelKind::Covariance if !generic => {
            let (_, c) = center(data);
            let u = flat_sample_cov(&c);
            let zeros = Array1::zeros(kernel.output_dim());
            Ok(summary_from(u, zeros, n, kernel))
        }
        KernelKind::Mean if !generic => {
            let (mean, _) = center(data);
            Ok(summary_from(mean.clone(), mean, n, kernel))
        }
        KernelKind::KendallTau if !generic => {
            let (_, total) = kendall_row_counts(data);
            let pairs = nf * (nf - 1.0);
            let u = total.iter().map(|&t| t as f64 / pairs).collect::<Array1<f64>>();
            Ok(summary_from(u, diag_mean(data, kernel), n, kernel))
        }
        _ => {
            let sums = pair_row_sums(data, kernel);
            let u = pairwise_row_sum(sums.view()) / (nf * (nf - 1.0));
            Ok(summary_from(u, diag_mean(data, kernel), n, kernel))
        }
    }
}

/// Computes the Hájek table `ghat` (n x d). Requires `n >= 3`.
pub fn compute_hajek(data: &DataMatrix, kernel: &KernelSpec) -> Result<HajekTable> {
    compute_hajek_via(data, kernel, EvalPath::Auto)
}

pub fn compute_hajek_via(data: &DataMatrix, kernel: &KernelSpec, path: EvalPath) -> Result<HajekTable> {
    check(data, kernel, 3)?;
    let n = data.n();
    let nf = n as f64;
    let d = kernel.output_dim();
    let generic = path == EvalPath::Generic;
    let (ghat, u) = match kernel.kind() {
        KernelKind::Covariance if !generic => {
            // ghat_i = n / (2(n-1)) c_i c_i^T - S / 2, with c_i = X_i - mean.
            let (_, c) = center(data);
            let u = flat_sample_cov(&c);
            let coef = nf / (2.0 * (nf - 1.0));
            let p = data.p();
            let mut ghat = Array2::zeros((n, d));
            for (mut g, ci) in ghat.rows_mut().into_iter().zip(c.rows()) {
                let mut j = 0;
                for m in 0..p {
                    for k in m..p {
                        g[j] = coef * ci[m] * ci[k] - u[j] / 2.0;
                        j += 1;
                    }
                }
            }
            (ghat, u)
        }
        KernelKind::Mean if !generic => {
            // ghat_i = (n-2) / (2(n-1)) (X_i - mean).
            let (mean, c) = center(data);
            (c * ((nf - 2.0) / (2.0 * (nf - 1.0))), mean)
        }
        KernelKind::KendallTau if !generic => {
            let (counts, total) = kendall_row_counts(data);
            let pairs = nf * (nf - 1.0);
            let u: Array1<f64> = total.iter().map(|&t| t as f64 / pairs).collect();
            let mut ghat = Array2::zeros((n, d));
            for (mut g, row) in ghat.rows_mut().into_iter().zip(counts.chunks(d)) {
                for ((gj, &c), uj) in g.iter_mut().zip(row).zip(&u) {
                    *gj = c as f64 / (nf - 1.0) - uj;
                }
            }
            (ghat, u)
        }
        _ => {
            let sums = pair_row_sums(data, kernel);
            let u = pairwise_row_sum(sums.view()) / (nf * (nf - 1.0));
            let ghat = sums / (nf - 1.0) - &u;
            (ghat, u)
        }
    };
    Ok(HajekTable { ghat, u, n, d, kernel: kernel.clone() })
}

fn check_limit(d: usize, d_limit: usize) -> Result<()> {
    if d > d_limit {
        return Err(Error::ResourceLimit(format!(
            "refusing to materialize a {d} x {d} covariance (d-limit {d_limit}); use the diagonal variant"
        )));
    }
    Ok(())
}

impl HajekTable {
    /// Column-wise `n^{-1} sum_i ghat_i^2`, the diagonal of the multiplier
    /// covariance.
    pub fn multiplier_variances(&self) -> Array1<f64> {
        self.ghat.map(|g| g * g).sum_axis(Axis(0)) / self.n as f64
    }
}

/// Conditional covariance of the multiplier bootstrap,
/// `n^{-1} sum_i ghat_i ghat_i^T`.
pub fn multiplier_cov(hajek: &HajekTable, d_limit: usize) -> Result<CovEstimate> {
    check_limit(hajek.d, d_limit)?;
    let matrix = hajek.ghat.t().dot(&hajek.ghat) / hajek.n as f64;
    Ok(CovEstimate { matrix, kind: CovKind::Multiplier })
}

pub fn multiplier_cov_diag(hajek: &HajekTable) -> Array1<f64> {
    hajek.multiplier_variances()
}

/// Jackknife covariance estimator, `(n-1)/(n-2)^2 sum_i ghat_i ghat_i^T`.
pub fn jackknife_cov(hajek: &HajekTable, d_limit: usize) -> Result<CovEstimate> {
    check_limit(hajek.d, d_limit)?;
    let nf = hajek.n as f64;
    let matrix = hajek.ghat.t().dot(&hajek.ghat) * ((nf - 1.0) / ((nf - 2.0) * (nf - 2.0)));
    Ok(CovEstimate { matrix, kind: CovKind::Jackknife })
}

/// Rows `G_i - V_n` where `G_i = n^{-1} sum_j h(X_i, X_j)` (j = i included).
fn eb_centered_rows(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    check(data, kernel, 2)?;
    let n = data.n();
    let nf = n as f64;
    match kernel.kind() {
        KernelKind::Covariance => {
            // G_i - V_n = c_i c_i^T / 2 - (n-1) S / (2n).
            let (_, c) = center(data);
            let s_flat = flat_sample_cov(&c);
            let p = data.p();
            let mut rows = Array2::zeros((n, kernel.output_dim()));
            for (mut g, ci) in rows.rows_mut().into_iter().zip(c.rows()) {
                let mut j = 0;
                for m in 0..p {
                    for k in m..p {
                        g[j] = ci[m] * ci[k] / 2.0 - (nf - 1.0) * s_flat[j] / (2.0 * nf);
                        j += 1;
                    }
                }
            }
            Ok(rows)
        }
        _ => {
            let summary = compute_ustat(data, kernel)?;
            let mut g = pair_row_sums(data, kernel);
            let mut h = vec![0.0; kernel.output_dim()];
            for i in 0..n {
                let xi = data.row_slice(i);
                kernel.eval_into(xi, xi, &mut h);
                for (acc, v) in g.row_mut(i).iter_mut().zip(&h) {
                    *acc += v;
                }
            }
            Ok(g / nf - &summary.v)
        }
    }
}

/// Conditional covariance of the empirical-bootstrap projection,
/// `n^{-1} sum_i G_i G_i^T - V_n V_n^T`, evaluated in centered form.
pub fn eb_cov(data: &DataMatrix, kernel: &KernelSpec, d_limit: usize) -> Result<CovEstimate> {
    check_limit(kernel.output_dim(), d_limit)?;
    let rows = eb_centered_rows(data, kernel)?;
    let matrix = rows.t().dot(&rows) / data.n() as f64;
    Ok(CovEstimate { matrix, kind: CovKind::Empirical })
}

pub fn eb_cov_diag(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array1<f64>> {
    let rows = eb_centered_rows(data, kernel)?;
    Ok(rows.map(|g| g * g).sum_axis(Axis(0)) / data.n() as f64)
}

/// Data-splitting estimator `m^{-1} sum_{i<m} h(X_i, X_{i+m})`, `m = floor(n/2)`.
/// The last row is dropped when `n` is odd.
pub fn split_sum(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array1<f64>> {
    check(data, kernel, 2)?;
    let m = data.n() / 2;
    let d = kernel.output_dim();
    let mut terms = Array2::zeros((m, d));
    for i in 0..m {
        let out = terms.row_mut(i).into_slice().expect("contiguous");
        kernel.eval_into(data.row_slice(i), data.row_slice(i + m), out);
    }
    Ok(pairwise_row_sum(terms.view()) / m as f64)
}
