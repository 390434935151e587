//! Small dense routines: Cholesky factorization and the spectral norm of a
//! symmetric matrix by power iteration.

use ndarray::{Array1, Array2};

use crate::error::{invalid, Error, Result};

/// Relative diagonal jitter applied when a plain factorization fails.
pub const CHOLESKY_JITTER: f64 = 1e-10;

fn check_square(a: &Array2<f64>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(invalid(format!("expected a square matrix, got {r} x {c}")));
    }
    Ok(r)
}

/// Lower-triangular `L` with `L L^T = a`, failing on a non-positive pivot.
pub fn cholesky_lower(a: &Array2<f64>) -> Result<Array2<f64>> {
    let p = check_square(a)?;
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(Error::Numerical(format!("matrix is not positive definite (pivot {pivot:e} at {j})")));
        }
        let ljj = pivot.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// [`cholesky_lower`], retrying once with `CHOLESKY_JITTER * mean(diag)` added
/// to the diagonal.
pub fn cholesky_jittered(a: &Array2<f64>) -> Result<Array2<f64>> {
    match cholesky_lower(a) {
        Ok(l) => Ok(l),
        Err(first) => {
            let p = check_square(a)?;
            let scale = a.diag().iter().map(|v| v.abs()).sum::<f64>() / p.max(1) as f64;
            let mut jittered = a.clone();
            for j in 0..p {
                jittered[[j, j]] += CHOLESKY_JITTER * scale;
            }
            cholesky_lower(&jittered).map_err(|_| match first {
                Error::Numerical(msg) => Error::Numerical(format!("{msg}; still failing after diagonal jitter")),
                other => other,
            })
        }
    }
}

/// Factor of a positive semidefinite matrix: pivots below `tol * max(diag)`
/// are treated as exact zeros and their columns dropped.
pub fn cholesky_psd(a: &Array2<f64>, tol: f64) -> Result<Array2<f64>> {
    let p = check_square(a)?;
    let max_diag = a.diag().iter().fold(0.0f64, |m, &v| m.max(v));
    let floor = tol * max_diag;
    let mut l = Array2::<f64>::zeros((p, p));
    for j in 0..p {
        let mut pivot = a[[j, j]];
        for k in 0..j {
            pivot -= l[[j, k]] * l[[j, k]];
        }
        if pivot < -floor.max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical(format!("matrix is not positive semidefinite (pivot {pivot:e} at {j})")));
        }
        if pivot <= floor {
            continue;
        }
        let ljj = pivot.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..p {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Returns `(a + a^T) / 2` when `max |a_ij - a_ji| <= tol`.
pub fn symmetrize(a: &Array2<f64>, tol: f64) -> Result<Array2<f64>> {
    let p = check_square(a)?;
    let mut worst = 0.0f64;
    for i in 0..p {
        for j in (i + 1)..p {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if worst > tol {
        return Err(invalid(format!("matrix is not symmetric (max asymmetry {worst:e})")));
    }
    Ok((a + &a.t()) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIterationConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 10_000 }
    }
}

fn normalized(v: Array1<f64>) -> Array1<f64> {
    let norm = v.dot(&v).sqrt();
    v / norm
}

/// Largest absolute eigenvalue of a symmetric matrix.
///
/// Iterates `v <- A v / |A v|` from the all-ones vector; the estimate is
/// `|A v|`, which converges to the spectral radius even when `+lambda` and
/// `-lambda` are both eigenvalues. If `A 1` vanishes, a fixed irregular start
/// vector is used instead.
pub fn spectral_norm(a: &Array2<f64>, config: PowerIterationConfig) -> Result<f64> {
    let p = check_square(a)?;
    if p == 0 || a.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut v = normalized(Array1::ones(p));
    let mut w = a.dot(&v);
    if w.dot(&w).sqrt() <= 1e-12 * scale {
        v = normalized(Array1::from_shape_fn(p, |i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()));
        w = a.dot(&v);
    }
    let mut estimate = w.dot(&w).sqrt();
    for iteration in 1..=config.max_iterations {
        if estimate == 0.0 {
            return Err(Error::Numerical(format!("power iteration stagnated at zero after {iteration} iterations")));
        }
        v = w / estimate;
        w = a.dot(&v);
        let next = w.dot(&w).sqrt();
        if (next - estimate).abs() <= config.tolerance * next {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Numerical(format!(
        "power iteration did not converge in {} iterations (last estimate {estimate:e})",
        config.max_iterations
    )))
}

/// [`spectral_norm`], falling back to a dense symmetric eigendecomposition
/// when the iteration stalls (nearly equal `|lambda_1|` and `|lambda_2|`).
pub fn spectral_norm_robust(a: &Array2<f64>, config: PowerIterationConfig) -> Result<f64> {
    match spectral_norm(a, config) {
        Err(Error::Numerical(msg)) => {
            log::warn!("{msg}; using a dense eigendecomposition");
            let p = a.nrows();
            let m = nalgebra::DMatrix::from_fn(p, p, |i, j| a[[i, j]]);
            let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 0)
                .ok_or_else(|| Error::Numerical(format!("{msg}; dense eigendecomposition also failed")))?;
            Ok(eig.eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())))
        }
        other => other,
    }
}
