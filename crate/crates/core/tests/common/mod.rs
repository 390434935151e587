//! Literal, deliberately slow reference implementations. Only the test
//! targets compile this module.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use ustat_boot::bootstrap::StatFunctional;
use ustat_boot::rng::{Domain, ReplicateRng};
use ustat_boot::{DataMatrix, Error, KernelSpec, Result};

pub const USTAT_GUARD: usize = 200;
pub const ENUMERATION_GUARD: u64 = 1_000_000;
pub const TRIPLE_SUM_N_GUARD: usize = 60;
pub const TRIPLE_SUM_D_GUARD: usize = 64;

/// Pairs each registered fast path with the oracle that checks it and the
/// test that runs the comparison.
pub const ORACLE_PAIRS: &[(&str, &str)] = &[
    ("ustat.mean", "oracle_ustat"),
    ("ustat.covariance", "oracle_ustat"),
    ("ustat.kendall", "oracle_ustat"),
    ("hajek.mean", "oracle_hajek"),
    ("hajek.covariance", "oracle_hajek"),
    ("hajek.kendall", "oracle_hajek"),
    ("cov.multiplier", "oracle_multiplier_triple_sum"),
    ("cov.jackknife", "oracle_jackknife_triple_sum"),
    ("cov.empirical.covariance", "oracle_eb_cov"),
    ("cov.empirical.generic", "oracle_eb_cov"),
    ("bootstrap.empirical", "oracle_empirical_replicate"),
    ("bootstrap.reweighted.mean", "oracle_reweighted_double_sum"),
    ("bootstrap.reweighted.covariance", "oracle_reweighted_double_sum"),
    ("bootstrap.reweighted.generic", "oracle_reweighted_double_sum"),
    ("bootstrap.multiplier.blocked", "oracle_multiplier_replicate"),
];

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `(flat position, got, want)` for entries above tolerance.
    pub details: Vec<(usize, f64, f64)>,
}

impl OracleReport {
    /// Entrywise comparison; `relative` scales the tolerance by `max(1, |want|)`.
    pub fn compare<'a>(
        name: &str,
        got: impl IntoIterator<Item = &'a f64>,
        want: impl IntoIterator<Item = &'a f64>,
        tolerance: f64,
        relative: bool,
    ) -> Self {
        let got: Vec<f64> = got.into_iter().copied().collect();
        let want: Vec<f64> = want.into_iter().copied().collect();
        let mut max_abs_error = if got.len() == want.len() { 0.0f64 } else { f64::INFINITY };
        let mut pass = got.len() == want.len();
        let mut details = Vec::new();
        for (j, (&g, &w)) in got.iter().zip(&want).enumerate() {
            let err = (g - w).abs();
            let scale = if relative { w.abs().max(1.0) } else { 1.0 };
            max_abs_error = max_abs_error.max(err);
            if err.is_nan() || err > tolerance * scale {
                pass = false;
                details.push((j, g, w));
            }
        }
        Self { name: name.to_string(), max_abs_error, tolerance, pass, details }
    }

    pub fn assert_pass(&self) {
        assert!(
            self.pass,
            "oracle {} failed: max error {:e} > {:e}; first entries {:?}",
            self.name,
            self.max_abs_error,
            self.tolerance,
            &self.details[..self.details.len().min(5)]
        );
    }
}

fn guard(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ResourceLimit(format!("oracle guard exceeded: {what}")))
    }
}

fn h(kernel: &KernelSpec, a: &[f64], b: &[f64]) -> Vec<f64> {
    kernel.eval(a, b).expect("kernel evaluation")
}

fn rows(data: &DataMatrix) -> Vec<Vec<f64>> {
    (0..data.n()).map(|i| data.row_slice(i).to_vec()).collect()
}

/// `U_n` as the plain ordered-pair double sum.
pub fn oracle_ustat(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array1<f64>> {
    guard(data.n() <= USTAT_GUARD, "oracle_ustat needs n <= 200")?;
    literal_ustat(&rows(data), kernel)
}

fn literal_ustat(x: &[Vec<f64>], kernel: &KernelSpec) -> Result<Array1<f64>> {
    let n = x.len();
    let mut acc = vec![0.0; kernel.output_dim()];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for (a, v) in acc.iter_mut().zip(h(kernel, &x[i], &x[j])) {
                    *a += v;
                }
            }
        }
    }
    let pairs = (n * (n - 1)) as f64;
    Ok(acc.into_iter().map(|a| a / pairs).collect())
}

/// `V_n = n^{-2} sum_{i,j} h(X_i, X_j)`.
pub fn oracle_vstat(data: &DataMatrix, kernel: &KernelSpec) -> Array1<f64> {
    let x = rows(data);
    let n = x.len();
    let mut acc = vec![0.0; kernel.output_dim()];
    for i in 0..n {
        for j in 0..n {
            for (a, v) in acc.iter_mut().zip(h(kernel, &x[i], &x[j])) {
                *a += v;
            }
        }
    }
    acc.into_iter().map(|a| a / (n * n) as f64).collect()
}

/// `ghat_i = (n-1)^{-1} sum_{j != i} h(X_i, X_j) - U_n`.
pub fn oracle_hajek(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    let u = oracle_ustat(data, kernel)?;
    let x = rows(data);
    let n = x.len();
    let d = kernel.output_dim();
    let mut g = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..n {
            if j != i {
                for (c, v) in h(kernel, &x[i], &x[j]).into_iter().enumerate() {
                    g[[i, c]] += v;
                }
            }
        }
        for c in 0..d {
            g[[i, c]] = g[[i, c]] / (n - 1) as f64 - u[c];
        }
    }
    Ok(g)
}

/// `sum_i sum_{j != i} sum_{k != i} (h_ij - U)(h_ik - U)^T`.
fn triple_sum(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    let n = data.n();
    let d = kernel.output_dim();
    guard(n <= TRIPLE_SUM_N_GUARD && d <= TRIPLE_SUM_D_GUARD, "triple sum needs n <= 60 and d <= 64")?;
    let u = oracle_ustat(data, kernel)?;
    let x = rows(data);
    let mut acc = Array2::zeros((d, d));
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let hij = h(kernel, &x[i], &x[j]);
            for k in 0..n {
                if k == i {
                    continue;
                }
                let hik = h(kernel, &x[i], &x[k]);
                for a in 0..d {
                    for b in 0..d {
                        acc[[a, b]] += (hij[a] - u[a]) * (hik[b] - u[b]);
                    }
                }
            }
        }
    }
    Ok(acc)
}

/// Jackknife covariance `[(n-1)(n-2)^2]^{-1}` times the triple sum.
pub fn oracle_jackknife_triple_sum(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    let n = data.n() as f64;
    Ok(triple_sum(data, kernel)? / ((n - 1.0) * (n - 2.0) * (n - 2.0)))
}

/// Multiplier covariance `[n (n-1)^2]^{-1}` times the triple sum.
pub fn oracle_multiplier_triple_sum(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    let n = data.n() as f64;
    Ok(triple_sum(data, kernel)? / (n * (n - 1.0) * (n - 1.0)))
}

/// Empirical-bootstrap covariance in uncentered triple-sum form:
/// `n^{-1} sum_i G_i G_i^T - V V^T` with `G_i = n^{-1} sum_j h(X_i, X_j)`.
pub fn oracle_eb_cov(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array2<f64>> {
    let n = data.n();
    let d = kernel.output_dim();
    guard(n <= TRIPLE_SUM_N_GUARD && d <= TRIPLE_SUM_D_GUARD, "EB oracle needs n <= 60 and d <= 64")?;
    let x = rows(data);
    let v = oracle_vstat(data, kernel);
    let mut acc = Array2::zeros((d, d));
    for i in 0..n {
        for j in 0..n {
            let hij = h(kernel, &x[i], &x[j]);
            for k in 0..n {
                let hik = h(kernel, &x[i], &x[k]);
                for a in 0..d {
                    for b in 0..d {
                        acc[[a, b]] += hij[a] * hik[b];
                    }
                }
            }
        }
    }
    let nf = n as f64;
    let mut out = acc / (nf * nf * nf);
    for a in 0..d {
        for b in 0..d {
            out[[a, b]] -= v[a] * v[b];
        }
    }
    Ok(out)
}

/// Unreduced empirical replicate for resample `idx`, from literal double sums.
pub fn oracle_empirical_draw(data: &DataMatrix, kernel: &KernelSpec, idx: &[usize]) -> Result<Array1<f64>> {
    let x = rows(data);
    let star: Vec<Vec<f64>> = idx.iter().map(|&i| x[i].clone()).collect();
    let u = literal_ustat(&star, kernel)?;
    let v = oracle_vstat(data, kernel);
    Ok((u - v) * ((data.n() as f64).sqrt() / 2.0))
}

/// Replicate `b` of the empirical bootstrap, replaying the engine's index
/// stream and recomputing the statistic literally.
pub fn oracle_empirical_replicate(data: &DataMatrix, kernel: &KernelSpec, seed: u64, b: u64) -> Result<Array1<f64>> {
    let n = data.n();
    let mut rng = ReplicateRng::new(seed, Domain::Empirical, b);
    let idx: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
    oracle_empirical_draw(data, kernel, &idx)
}

/// Reweighted replicate from the literal `sum_{i != j} w_i w_j h_ij`.
pub fn oracle_reweighted_double_sum(data: &DataMatrix, kernel: &KernelSpec, w: &[f64], flat: bool) -> Result<Array1<f64>> {
    let x = rows(data);
    let n = x.len();
    let mut acc = vec![0.0; kernel.output_dim()];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                for (a, v) in acc.iter_mut().zip(h(kernel, &x[i], &x[j])) {
                    *a += w[i] * w[j] * v;
                }
            }
        }
    }
    let nf = n as f64;
    let u = literal_ustat(&x, kernel)?;
    let wbar = w.iter().sum::<f64>() / nf;
    Ok(Array1::from_shape_fn(acc.len(), |c| {
        let t = nf.sqrt() / 2.0 * (acc[c] / (nf * (nf - 1.0)) - u[c]);
        if flat {
            t - nf.sqrt() * (wbar - 1.0) * u[c]
        } else {
            t
        }
    }))
}

/// Replicate `b` of the multiplier bootstrap, replaying the engine's normal
/// stream: `n^{-1/2} sum_i e_i ghat_i` with the oracle Hájek table.
pub fn oracle_multiplier_replicate(data: &DataMatrix, kernel: &KernelSpec, seed: u64, b: u64) -> Result<Array1<f64>> {
    let g = oracle_hajek(data, kernel)?;
    let n = data.n();
    let mut rng = ReplicateRng::new(seed, Domain::Multiplier, b);
    let e: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let mut out = Array1::zeros(g.ncols());
    for i in 0..n {
        for c in 0..g.ncols() {
            out[c] += e[i] * g[[i, c]];
        }
    }
    Ok(out / (n as f64).sqrt())
}

/// Every index tuple in `{0..n}^n`, in lexicographic order.
pub fn all_tuples(n: usize) -> Result<Vec<Vec<usize>>> {
    guard((n as u64).checked_pow(n as u32).is_some_and(|c| c <= ENUMERATION_GUARD), "enumeration needs n^n <= 1e6")?;
    let total = n.pow(n as u32);
    Ok((0..total)
        .map(|mut code| {
            let mut t = vec![0; n];
            for slot in t.iter_mut().rev() {
                *slot = code % n;
                code /= n;
            }
            t
        })
        .collect())
}

/// Exact conditional law of the reduced empirical replicate: sorted support
/// points (merged within `1e-12` relative) and their probabilities.
pub fn oracle_eb_enumeration(data: &DataMatrix, kernel: &KernelSpec, functional: &StatFunctional) -> Result<Vec<(f64, f64)>> {
    let n = data.n();
    let reducer = functional.reducer(kernel, n)?;
    let tuples = all_tuples(n)?;
    let mut values: Vec<f64> = tuples
        .iter()
        .map(|t| oracle_empirical_draw(data, kernel, t).map(|draw| reducer.reduce(draw.view())))
        .collect::<Result<_>>()?;
    values.sort_by(f64::total_cmp);
    let mass = 1.0 / values.len() as f64;
    let mut law: Vec<(f64, f64)> = Vec::new();
    for v in values {
        match law.last_mut() {
            Some((s, p)) if (v - *s).abs() <= 1e-12 * s.abs().max(1.0) => *p += mass,
            _ => law.push((v, mass)),
        }
    }
    Ok(law)
}

/// Mean of the unreduced empirical replicate over all `n^n` tuples.
pub fn oracle_eb_enumerated_mean(data: &DataMatrix, kernel: &KernelSpec) -> Result<Array1<f64>> {
    let tuples = all_tuples(data.n())?;
    let mut acc = Array1::zeros(kernel.output_dim());
    for t in &tuples {
        acc += &oracle_empirical_draw(data, kernel, t)?;
    }
    Ok(acc / tuples.len() as f64)
}

/// Integer form of the centering identity `E[U*|X] = V_n` for kernels with
/// `2h` integer-valued on the data: the sum over all tuples of
/// `n^2 sum_{a != b} 2h(X*_a, X*_b)` equals `n^n n(n-1) sum_{i,j} 2h(X_i, X_j)`.
/// Returns the two sides per coordinate.
pub fn oracle_eb_centering_exact(data: &DataMatrix, kernel: &KernelSpec) -> Result<Vec<(i128, i128)>> {
    let x = rows(data);
    let n = x.len();
    let d = kernel.output_dim();
    let twice = |a: &[f64], b: &[f64]| -> Result<Vec<i128>> {
        h(kernel, a, b)
            .into_iter()
            .map(|v| {
                let t = 2.0 * v;
                if t.fract() == 0.0 && t.abs() < 1e30 {
                    Ok(t as i128)
                } else {
                    Err(ustat_boot::Error::InvalidArgument(format!("2h = {t} is not an integer")))
                }
            })
            .collect()
    };
    let mut table = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..n {
            table[i][j] = twice(&x[i], &x[j])?;
        }
    }
    let tuples = all_tuples(n)?;
    let mut lhs = vec![0i128; d];
    for t in &tuples {
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    for (l, v) in lhs.iter_mut().zip(&table[t[a]][t[b]]) {
                        *l += v;
                    }
                }
            }
        }
    }
    let mut full = vec![0i128; d];
    for row in &table {
        for cell in row {
            for (f, v) in full.iter_mut().zip(cell) {
                *f += v;
            }
        }
    }
    let nn = (n * n) as i128;
    let count = tuples.len() as i128;
    let pairs = (n * (n - 1)) as i128;
    Ok(lhs.into_iter().zip(full).map(|(l, f)| (l * nn, count * pairs * f)).collect())
}

/// Sup distance between the empirical cdf of `draws` and a discrete law,
/// checked just below and at each support point.
pub fn sup_cdf_distance_to_law(draws: &[f64], law: &[(f64, f64)]) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len() as f64;
    let mut cum = 0.0;
    let mut worst = 0.0f64;
    for &(s, p) in law {
        let tol = 1e-9 * s.abs().max(1.0);
        let below = sorted.partition_point(|&v| v < s - tol) as f64 / b;
        worst = worst.max((below - cum).abs());
        cum += p;
        let at = sorted.partition_point(|&v| v <= s + tol) as f64 / b;
        worst = worst.max((at - cum).abs());
    }
    worst
}

/// Small random data set from a fixed stream.
pub fn random_data(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = ReplicateRng::new(seed, Domain::Reference, 1);
    DataMatrix::new(Array2::from_shape_fn((n, p), |_| rng.standard_normal())).expect("finite data")
}

/// Integer-valued data with ties.
pub fn integer_data(n: usize, p: usize, seed: u64, levels: usize) -> DataMatrix {
    let mut rng = ReplicateRng::new(seed, Domain::Reference, 2);
    DataMatrix::new(Array2::from_shape_fn((n, p), |_| rng.index(levels) as f64)).expect("finite data")
}

/// Full `d x d` sample covariance of the rows of `draws`.
pub fn sample_covariance(draws: &Array2<f64>) -> Array2<f64> {
    let b = draws.nrows() as f64;
    let mean = draws.mean_axis(ndarray::Axis(0)).expect("rows");
    let c = draws - &mean;
    c.t().dot(&c) / (b - 1.0)
}
