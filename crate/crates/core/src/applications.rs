//! Covariance thresholding with a bootstrap-selected threshold, matrix norms,
//! and simultaneous tests of a covariance or Kendall concordance matrix.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{multiplier_bootstrap, quantile, Reduction, RunOptions, Scale, StatFunctional};
use crate::data::DataMatrix;
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelSpec, TriIndex};
use crate::linalg::{spectral_norm_robust, symmetrize, PowerIterationConfig};
use crate::ustat::{compute_hajek, multiplier_cov_diag, HajekTable};

/// Asymmetry tolerated (and averaged away) in matrix arguments.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(invalid(format!("threshold must be a non-negative number, got {tau}")));
    }
    Ok(())
}

fn check_square(a: &Array2<f64>, what: &str) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(invalid(format!("{what} must be square, got {r} x {c}")));
    }
    Ok(r)
}

/// Hard thresholding `s_mk 1{|s_mk| > tau}` of every entry, diagonal included.
pub fn threshold_matrix(s: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    check_square(s, "matrix")?;
    check_tau(tau)?;
    Ok(s.mapv(|v| if v.abs() > tau { v } else { 0.0 }))
}

/// As [`threshold_matrix`] but the diagonal is left untouched.
pub fn threshold_matrix_keep_diag(s: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    let mut out = threshold_matrix(s, tau)?;
    for m in 0..s.nrows() {
        out[[m, m]] = s[[m, m]];
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub tau_star: f64,
    /// The bootstrap quantile `a(1 - alpha)`; `tau_star = quantile / beta`.
    pub quantile: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Unbiased sample covariance.
    pub sample_cov: Array2<f64>,
    pub thresholded: Array2<f64>,
    pub keep_diagonal: bool,
    pub replicates: usize,
    pub seed: u64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn covariance_hajek(data: &DataMatrix) -> Result<HajekTable> {
    if data.n() < 3 {
        return Err(invalid(format!("need n >= 3 observations, got {}", data.n())));
    }
    compute_hajek(data, &KernelSpec::covariance(data.p()))
}

/// Threshold `tau* = a(1 - alpha) / beta`, with `a` the quantile of the
/// rescaled multiplier statistic `max_{m,k} |T#_mk| * 2 / sqrt(n)`.
pub fn select_threshold(data: &DataMatrix, alpha: f64, beta: f64, opts: &RunOptions) -> Result<ThresholdResult> {
    select_threshold_with(data, alpha, beta, false, opts)
}

pub fn select_threshold_with(
    data: &DataMatrix,
    alpha: f64,
    beta: f64,
    keep_diagonal: bool,
    opts: &RunOptions,
) -> Result<ThresholdResult> {
    check_alpha(alpha)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    let hajek = covariance_hajek(data)?;
    if multiplier_cov_diag(&hajek).iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("every coordinate of the Hajek projection has zero variance".into()));
    }
    let functional = StatFunctional::new(Reduction::AbsMax, Scale::Rescaled);
    let draws = multiplier_bootstrap(&hajek, &functional, opts)?;
    let a = quantile(&draws, 1.0 - alpha)?.value;
    let tau_star = a / beta;
    let index = TriIndex::new(data.p());
    let sample_cov = index.to_matrix(hajek.u.view());
    let thresholded = if keep_diagonal {
        threshold_matrix_keep_diag(&sample_cov, tau_star)?
    } else {
        threshold_matrix(&sample_cov, tau_star)?
    };
    Ok(ThresholdResult {
        tau_star,
        quantile: a,
        alpha,
        beta,
        sample_cov,
        thresholded,
        keep_diagonal,
        replicates: opts.replicates,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    pub sup: f64,
    pub off_sup: f64,
    pub frobenius: f64,
    pub spectral: f64,
    /// Maximum absolute column sum.
    pub l1: f64,
}

pub fn matrix_norms(a: &Array2<f64>) -> Result<MatrixNorms> {
    let p = check_square(a, "matrix")?;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let a = symmetrize(a, SYMMETRY_TOLERANCE)?;
    let mut sup = 0.0f64;
    let mut off_sup = 0.0f64;
    for ((m, k), &v) in a.indexed_iter() {
        sup = sup.max(v.abs());
        if m != k {
            off_sup = off_sup.max(v.abs());
        }
    }
    let frobenius = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let l1 = (0..p).map(|k| a.column(k).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let spectral = spectral_norm_robust(&a, PowerIterationConfig::default())?;
    Ok(MatrixNorms { sup, off_sup, frobenius, spectral, l1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
    pub pvalue: f64,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
}

fn null_flat(null: &Array2<f64>, p: usize, what: &str) -> Result<Array1<f64>> {
    let q = check_square(null, what)?;
    if q != p {
        return Err(invalid(format!("{what} is {q} x {q} but the data have {p} columns")));
    }
    if null.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what} has non-finite entries")));
    }
    let sym = symmetrize(null, SYMMETRY_TOLERANCE).map_err(|_| invalid(format!("{what} is not symmetric")))?;
    Ok(TriIndex::new(p).from_matrix(&sym))
}

/// Rejects when `|U_n - null|_{inf,off}` reaches the `1 - alpha` quantile of
/// the rescaled off-diagonal multiplier statistic.
fn off_diagonal_test(hajek: &HajekTable, null: &Array1<f64>, alpha: f64, opts: &RunOptions) -> Result<TestOutcome> {
    let index = hajek.kernel.index_map().expect("matrix kernel");
    let mask = index.off_diagonal_mask();
    let statistic = hajek
        .u
        .iter()
        .zip(null)
        .zip(&mask)
        .filter(|(_, &off)| off)
        .map(|((u, z), _)| (u - z).abs())
        .fold(0.0, f64::max);
    // A degenerate multiplier law is only an error when it leaves the decision
    // undetermined; a positive statistic is rejected against the zero quantile.
    let variances = multiplier_cov_diag(hajek);
    let degenerate = variances.iter().zip(&mask).filter(|(_, &off)| off).all(|(&v, _)| v == 0.0);
    if degenerate && statistic == 0.0 {
        return Err(Error::Degenerate(
            "every off-diagonal coordinate of the Hajek projection has zero variance".into(),
        ));
    }
    let functional = StatFunctional::new(Reduction::OffDiagAbsMax, Scale::Rescaled);
    let draws = multiplier_bootstrap(hajek, &functional, opts)?;
    let critical = quantile(&draws, 1.0 - alpha)?.value;
    let exceed = draws.values.iter().filter(|&&t| t >= statistic).count();
    Ok(TestOutcome {
        statistic,
        critical,
        reject: statistic >= critical,
        pvalue: (1 + exceed) as f64 / (draws.values.len() + 1) as f64,
        alpha,
        replicates: opts.replicates,
        seed: opts.seed,
    })
}

/// Test of `H0: Sigma = sigma0` through the off-diagonal entries.
pub fn simultaneous_cov_test(data: &DataMatrix, sigma0: &Array2<f64>, alpha: f64, opts: &RunOptions) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let p = data.p();
    if p < 2 {
        return Err(invalid("the off-diagonal test needs at least two columns"));
    }
    let null = null_flat(sigma0, p, "null covariance")?;
    let hajek = covariance_hajek(data)?;
    off_diagonal_test(&hajek, &null, alpha, opts)
}

/// Test of the off-diagonal concordance probabilities against `t0`.
pub fn kendall_test(data: &DataMatrix, t0: &Array2<f64>, alpha: f64, opts: &RunOptions) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let p = data.p();
    if p < 2 {
        return Err(invalid("the off-diagonal test needs at least two columns"));
    }
    if let Some(v) = t0.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
        return Err(invalid(format!("concordance null entries must lie in [0, 1], found {v}")));
    }
    let null = null_flat(t0, p, "null concordance matrix")?;
    if data.n() < 3 {
        return Err(invalid(format!("need n >= 3 observations, got {}", data.n())));
    }
    let hajek = compute_hajek(data, &KernelSpec::kendall(p))?;
    off_diagonal_test(&hajek, &null, alpha, opts)
}
