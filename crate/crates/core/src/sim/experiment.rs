//! Monte Carlo comparison of `max_j T_nj` with `max_j Y_j`, and the size of
//! the simultaneous tests, over independent replications.

use ndarray::{Array1, Array2};
use rand::RngCore;
use rayon::prelude::*;

use super::gamma::reductions;
use super::{ModelSampler, SimConfig};
use crate::applications::{kendall_test, simultaneous_cov_test};
use crate::bootstrap::{in_pool, RunOptions};
use crate::error::{invalid, Result};
use crate::kernels::{KernelSpec, TriIndex};
use crate::rng::{Domain, ReplicateRng};
use crate::ustat::{compute_ustat, DEFAULT_D_LIMIT};

pub const CDF_GRID_POINTS: usize = 512;

fn check_sorted(v: &[f64], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(format!("sample {name} is empty")));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(invalid(format!("sample {name} contains NaN")));
    }
    if v.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("sample {name} is not sorted")));
    }
    Ok(())
}

/// Two-sample Kolmogorov-Smirnov statistic of sorted samples.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sorted(a, "a")?;
    check_sorted(b, "b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// Empirical cdfs of two samples on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub grid: Vec<f64>,
    pub t_cdf: Vec<f64>,
    pub y_cdf: Vec<f64>,
}

fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

fn cdf_curve(t: &[f64], y: &[f64], points: usize) -> CdfCurve {
    let lo = t[0].min(y[0]);
    let hi = t[t.len() - 1].max(y[y.len() - 1]);
    let grid: Vec<f64> = (0..points)
        .map(|g| if points == 1 { lo } else { lo + (hi - lo) * g as f64 / (points - 1) as f64 })
        .collect();
    CdfCurve {
        t_cdf: grid.iter().map(|&x| ecdf(t, x)).collect(),
        y_cdf: grid.iter().map(|&x| ecdf(y, x)).collect(),
        grid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeOptions {
    pub alpha: f64,
    /// Bootstrap replicates per test.
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentOptions {
    /// Replace `T_n` by a second, independent sample from the reference law.
    pub sanity: bool,
    pub size: Option<SizeOptions>,
    pub threads: Option<usize>,
    pub d_limit: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { sanity: false, size: None, threads: None, d_limit: DEFAULT_D_LIMIT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionRates {
    pub alpha: f64,
    pub replicates: usize,
    pub reps: usize,
    pub cov: f64,
    pub kendall: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Per replication, in replication order.
    pub t_max: Vec<f64>,
    pub t_abs_max: Vec<f64>,
    pub y_max: Vec<f64>,
    pub y_abs_max: Vec<f64>,
    pub ks_max: f64,
    pub ks_abs_max: f64,
    pub cdf_max: CdfCurve,
    pub cdf_abs_max: CdfCurve,
    pub rejection_rates: Option<RejectionRates>,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Per replication `r`: data from stream `(seed, SimData, r)`,
/// `T_n = sqrt(n) (U_n - theta) / 2` for the covariance kernel with the
/// population covariance `theta`, reduced by max and absolute max over all
/// `p (p + 1) / 2` entries; `Y` draw `r` from `(seed, SimReference, r)`.
pub fn run_gaussian_approx_experiment(config: &SimConfig, options: &ExperimentOptions) -> Result<ExperimentReport> {
    config.validate()?;
    let reference = config.gamma_model()?.reference(options.d_limit)?;
    let reps = config.reps;
    let (t_max, t_abs_max, y_max, y_abs_max) = in_pool(options.threads, || -> Result<_> {
        let (y_max, y_abs_max) = reference.sample_reductions(reps, config.seed, Domain::SimReference);
        let (t_max, t_abs_max) = if options.sanity {
            reference.sample_reductions(reps, config.seed, Domain::SimSanity)
        } else {
            let sampler = ModelSampler::new(config)?;
            let kernel = KernelSpec::covariance(config.p);
            let theta = TriIndex::new(config.p).from_matrix(&config.population_cov()?);
            let half_root_n = (config.n as f64).sqrt() / 2.0;
            let pairs = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ReplicateRng::new(config.seed, Domain::SimData, r as u64);
                    let x = sampler.sample(config.n, &mut rng)?;
                    let u = compute_ustat(&x, &kernel)?.u;
                    Ok(reductions(u.iter().zip(&theta).map(|(u, t)| half_root_n * (u - t))))
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            pairs.into_iter().unzip()
        };
        Ok((t_max, t_abs_max, y_max, y_abs_max))
    })??;
    let (tm, ta, ym, ya) = (sorted(&t_max), sorted(&t_abs_max), sorted(&y_max), sorted(&y_abs_max));
    let rejection_rates = match options.size {
        Some(size) => Some(run_size_experiment(config, &size, options.threads)?),
        None => None,
    };
    Ok(ExperimentReport {
        ks_max: ks_distance(&tm, &ym)?,
        ks_abs_max: ks_distance(&ta, &ya)?,
        cdf_max: cdf_curve(&tm, &ym, CDF_GRID_POINTS),
        cdf_abs_max: cdf_curve(&ta, &ya, CDF_GRID_POINTS),
        t_max,
        t_abs_max,
        y_max,
        y_abs_max,
        rejection_rates,
    })
}

/// Population concordance probabilities `1/2 + asin(rho_mk) / pi` of a
/// continuous elliptical law with covariance `sigma`.
fn elliptical_concordance(sigma: &Array2<f64>) -> Array2<f64> {
    let sd = Array1::from_shape_fn(sigma.nrows(), |m| sigma[[m, m]].sqrt());
    Array2::from_shape_fn(sigma.dim(), |(m, k)| {
        if m == k {
            1.0
        } else {
            let rho = (sigma[[m, k]] / (sd[m] * sd[k])).clamp(-1.0, 1.0);
            0.5 + rho.asin() / std::f64::consts::PI
        }
    })
}

/// Rejection frequencies of the covariance test against the population
/// covariance and of the Kendall test against the population concordance
/// matrix, each at level `alpha`, over `config.reps` datasets.
pub fn run_size_experiment(config: &SimConfig, size: &SizeOptions, threads: Option<usize>) -> Result<RejectionRates> {
    config.validate()?;
    if config.p < 2 {
        return Err(invalid("the size experiment needs p >= 2"));
    }
    let sampler = ModelSampler::new(config)?;
    let sigma = config.population_cov()?;
    let t0 = elliptical_concordance(&sigma);
    let outcomes = in_pool(threads, || {
        (0..config.reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = ReplicateRng::new(config.seed, Domain::SimData, r as u64);
                let x = sampler.sample(config.n, &mut rng)?;
                let boot_seed = ReplicateRng::new(config.seed, Domain::SimBootstrap, r as u64).next_u64();
                let opts = RunOptions::new(size.replicates, boot_seed);
                let cov = simultaneous_cov_test(&x, &sigma, size.alpha, &opts)?.reject;
                let kendall = kendall_test(&x, &t0, size.alpha, &opts)?.reject;
                Ok((cov, kendall))
            })
            .collect::<Result<Vec<(bool, bool)>>>()
    })??;
    let reps = outcomes.len() as f64;
    Ok(RejectionRates {
        alpha: size.alpha,
        replicates: size.replicates,
        reps: config.reps,
        cov: outcomes.iter().filter(|o| o.0).count() as f64 / reps,
        kendall: outcomes.iter().filter(|o| o.1).count() as f64 / reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Dependence, Model};

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.5]).unwrap(), 0.5);
        assert!(ks_distance(&[], &[1.0]).is_err());
        assert!(ks_distance(&[2.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn cdf_curve_spans_pooled_range() {
        let c = cdf_curve(&[0.0, 1.0], &[0.5, 2.0], CDF_GRID_POINTS);
        assert_eq!(c.grid.len(), CDF_GRID_POINTS);
        assert_eq!((c.grid[0], c.grid[CDF_GRID_POINTS - 1]), (0.0, 2.0));
        assert_eq!((c.t_cdf[0], c.y_cdf[CDF_GRID_POINTS - 1]), (0.5, 1.0));
    }

    #[test]
    fn concordance_of_independent_and_identical_columns() {
        let s = ndarray::array![[1.0, 0.0, 1.0], [0.0, 2.0, 0.0], [1.0, 0.0, 1.0]];
        let t = elliptical_concordance(&s);
        assert_eq!(t[[0, 1]], 0.5);
        assert_eq!(t[[0, 2]], 1.0);
    }

    #[test]
    fn small_experiment_is_thread_invariant() {
        let cfg = SimConfig { model: Model::default_m1(), dep: Dependence::D2, n: 40, p: 4, reps: 50, seed: 3 };
        let one = run_gaussian_approx_experiment(&cfg, &ExperimentOptions { threads: Some(1), ..Default::default() }).unwrap();
        let four = run_gaussian_approx_experiment(&cfg, &ExperimentOptions { threads: Some(4), ..Default::default() }).unwrap();
        assert_eq!(one.t_max, four.t_max);
        assert_eq!(one.y_abs_max, four.y_abs_max);
        assert_eq!(one.ks_max, four.ks_max);
        assert!(one.ks_max >= 0.0 && one.ks_max <= 1.0);
    }
}
