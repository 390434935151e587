//! Synthetic designs for the Gaussian-approximation study.
//!
//! Elliptical models share a scale matrix `V` from a [`Dependence`] choice:
//! an epsilon-contaminated normal (`M1`), a multivariate t (`M2`) and plain
//! Gaussian data. The block design stacks `L` groups of `m` identical
//! coordinates.

mod experiment;
mod gamma;

pub use experiment::{
    ks_distance, run_gaussian_approx_experiment, run_size_experiment, CdfCurve, ExperimentOptions, ExperimentReport,
    RejectionRates, SizeOptions, CDF_GRID_POINTS,
};
pub use gamma::{population_gamma, GammaModel, GaussianReference, ReferenceSample};

use ndarray::Array2;
use rand_distr::{ChiSquared, Distribution};

use crate::data::DataMatrix;
use crate::error::{invalid, Result};
use crate::linalg::cholesky_jittered;
use crate::rng::ReplicateRng;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// `N(0, V)` with probability `1 - epsilon`, else `N(0, nu^2 V)`.
    M1 { epsilon: f64, nu: f64 },
    /// `Z / sqrt(W / nu)` with `Z ~ N(0, V)` and `W ~ chi^2(nu)`.
    M2 { nu: f64 },
    /// `X = (1_m Z_1, ..., 1_m Z_L)` with iid standard normal `Z_l`.
    BlockDiag { blocks: usize, block_size: usize },
    Gaussian,
}

impl Model {
    /// `epsilon = 0.2`, `nu = 1.5`: kurtosis 0.16, covariance `1.25 V`.
    pub fn default_m1() -> Self {
        Self::M1 { epsilon: 0.2, nu: 1.5 }
    }

    /// `nu = 10`: kurtosis 1/3, covariance `1.25 V`.
    pub fn default_m2() -> Self {
        Self::M2 { nu: 10.0 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::M1 { .. } => "m1",
            Self::M2 { .. } => "m2",
            Self::BlockDiag { .. } => "block",
            Self::Gaussian => "gaussian",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::M1 { epsilon, nu } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(invalid(format!("M1 needs epsilon in (0, 1), got {epsilon}")));
                }
                if !(nu > 0.0 && nu.is_finite()) {
                    return Err(invalid(format!("M1 needs nu > 0, got {nu}")));
                }
            }
            Self::M2 { nu } => {
                if !(nu > 4.0 && nu.is_finite()) {
                    return Err(invalid(format!("M2 needs nu > 4 for a finite kurtosis, got {nu}")));
                }
            }
            Self::BlockDiag { blocks, block_size } => {
                if blocks == 0 || block_size == 0 {
                    return Err(invalid("block design needs at least one block of positive size"));
                }
            }
            Self::Gaussian => {}
        }
        Ok(())
    }

    /// Elliptical kurtosis parameter; zero for the Gaussian designs.
    pub fn kurtosis(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Self::M1 { epsilon, nu } => {
                let num = 1.0 + epsilon * (nu.powi(4) - 1.0);
                let den = (1.0 + epsilon * (nu * nu - 1.0)).powi(2);
                (num - den) / den
            }
            Self::M2 { nu } => 2.0 / (nu - 4.0),
            Self::BlockDiag { .. } | Self::Gaussian => 0.0,
        })
    }

    /// `c` with `Cov(X) = c V`.
    pub fn covariance_scale(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            Self::M1 { epsilon, nu } => 1.0 + epsilon * (nu * nu - 1.0),
            Self::M2 { nu } => nu / (nu - 2.0),
            Self::BlockDiag { .. } | Self::Gaussian => 1.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dependence {
    /// `0.9 J + 0.1 I`.
    D1,
    /// AR(1) with `rho = 0.7`.
    D2,
    /// AR(1) with `rho = 0.3`.
    D3,
    Custom(Array2<f64>),
}

impl Dependence {
    pub fn label(&self) -> &'static str {
        match self {
            Self::D1 => "d1",
            Self::D2 => "d2",
            Self::D3 => "d3",
            Self::Custom(_) => "custom",
        }
    }
}

fn ar1(p: usize, rho: f64) -> Array2<f64> {
    Array2::from_shape_fn((p, p), |(m, k)| rho.powi(m.abs_diff(k) as i32))
}

/// Scale matrix `V` of a dependence model.
pub fn build_dependence(dep: &Dependence, p: usize) -> Result<Array2<f64>> {
    if p == 0 {
        return Err(invalid("dimension must be positive"));
    }
    Ok(match dep {
        Dependence::D1 => Array2::from_shape_fn((p, p), |(m, k)| if m == k { 1.0 } else { 0.9 }),
        Dependence::D2 => ar1(p, 0.7),
        Dependence::D3 => ar1(p, 0.3),
        Dependence::Custom(v) => {
            if v.dim() != (p, p) {
                return Err(invalid(format!("custom scale matrix is {:?}, expected {p} x {p}", v.dim())));
            }
            v.clone()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub dep: Dependence,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.n < 2 {
            return Err(invalid(format!("need n >= 2, got {}", self.n)));
        }
        if self.p == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if self.reps == 0 {
            return Err(invalid("need at least one replication"));
        }
        if let Model::BlockDiag { blocks, block_size } = self.model {
            if blocks * block_size != self.p {
                return Err(invalid(format!("block design needs p = L m, got p = {} with L = {blocks}, m = {block_size}", self.p)));
            }
        }
        Ok(())
    }

    /// Scale matrix `V`; for the block design, the block-diagonal of ones.
    pub fn scale_matrix(&self) -> Result<Array2<f64>> {
        self.validate()?;
        match self.model {
            Model::BlockDiag { block_size, .. } => {
                Ok(Array2::from_shape_fn((self.p, self.p), |(m, k)| if m / block_size == k / block_size { 1.0 } else { 0.0 }))
            }
            _ => build_dependence(&self.dep, self.p),
        }
    }

    /// `Cov(X) = covariance_scale * V`.
    pub fn population_cov(&self) -> Result<Array2<f64>> {
        Ok(self.scale_matrix()? * self.model.covariance_scale()?)
    }

    pub fn gamma_model(&self) -> Result<GammaModel> {
        GammaModel::new(self.model.kurtosis()?, self.population_cov()?)
    }
}

/// Draws rows of a [`SimConfig`] design.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    model: Model,
    p: usize,
    /// Lower factor of `V`; unused by the block design.
    factor: Array2<f64>,
    chi: Option<ChiSquared<f64>>,
}

impl ModelSampler {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let factor = match config.model {
            Model::BlockDiag { .. } => Array2::zeros((0, 0)),
            _ => cholesky_jittered(&build_dependence(&config.dep, config.p)?)?,
        };
        let chi = match config.model {
            Model::M2 { nu } => Some(ChiSquared::new(nu).map_err(|e| invalid(format!("chi-squared({nu}): {e}")))?),
            _ => None,
        };
        Ok(Self { model: config.model.clone(), p: config.p, factor, chi })
    }

    fn correlated_into(&self, rng: &mut ReplicateRng, z: &mut [f64], out: &mut [f64]) {
        rng.fill_standard_normal(z);
        for (m, o) in out.iter_mut().enumerate() {
            let row = self.factor.row(m);
            *o = (0..=m).map(|k| row[k] * z[k]).sum();
        }
    }

    pub fn sample_row_into(&self, rng: &mut ReplicateRng, z: &mut [f64], out: &mut [f64]) {
        match self.model {
            Model::M1 { epsilon, nu } => {
                let s = if rng.bernoulli(epsilon) { nu } else { 1.0 };
                self.correlated_into(rng, z, out);
                out.iter_mut().for_each(|v| *v *= s);
            }
            Model::M2 { nu } => {
                self.correlated_into(rng, z, out);
                let w = self.chi.as_ref().expect("M2 sampler").sample(rng);
                let s = (nu / w).sqrt();
                out.iter_mut().for_each(|v| *v *= s);
            }
            Model::BlockDiag { block_size, .. } => {
                let mut zl = 0.0;
                for (m, o) in out.iter_mut().enumerate() {
                    if m % block_size == 0 {
                        zl = rng.standard_normal();
                    }
                    *o = zl;
                }
            }
            Model::Gaussian => self.correlated_into(rng, z, out),
        }
    }

    /// `count` iid rows.
    pub fn sample(&self, count: usize, rng: &mut ReplicateRng) -> Result<DataMatrix> {
        let mut x = Array2::<f64>::zeros((count, self.p));
        let mut z = vec![0.0; self.p];
        for mut row in x.rows_mut() {
            self.sample_row_into(rng, &mut z, row.as_slice_mut().expect("contiguous"));
        }
        DataMatrix::new(x)
    }
}

/// `count` rows of the design from `rng`.
pub fn sample_model(config: &SimConfig, count: usize, rng: &mut ReplicateRng) -> Result<DataMatrix> {
    ModelSampler::new(config)?.sample(count, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;
    use ndarray::array;

    fn config(model: Model, dep: Dependence, p: usize) -> SimConfig {
        SimConfig { model, dep, n: 10, p, reps: 1, seed: 0 }
    }

    #[test]
    fn dependence_examples() {
        assert_eq!(build_dependence(&Dependence::D1, 2).unwrap(), array![[1.0, 0.9], [0.9, 1.0]]);
        let d2 = build_dependence(&Dependence::D2, 3).unwrap();
        let want = array![[1.0, 0.7, 0.49], [0.7, 1.0, 0.7], [0.49, 0.7, 1.0]];
        assert!(d2.iter().zip(want.iter()).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(build_dependence(&Dependence::D3, 1).unwrap(), array![[1.0]]);
        for dep in [Dependence::D1, Dependence::D2, Dependence::D3] {
            assert!(crate::linalg::cholesky_lower(&build_dependence(&dep, 40).unwrap()).is_ok());
        }
    }

    #[test]
    fn reference_constants() {
        assert_eq!(Model::default_m1().kurtosis().unwrap(), 0.16);
        assert_eq!(Model::default_m2().kurtosis().unwrap(), 1.0 / 3.0);
        assert_eq!(Model::default_m1().covariance_scale().unwrap(), 1.25);
        assert_eq!(Model::default_m2().covariance_scale().unwrap(), 1.25);
    }

    #[test]
    fn validation() {
        assert!(Model::M1 { epsilon: 0.0, nu: 1.5 }.kurtosis().is_err());
        assert!(Model::M1 { epsilon: 0.2, nu: -1.0 }.kurtosis().is_err());
        assert!(Model::M2 { nu: 4.0 }.kurtosis().is_err());
        let bad = config(Model::BlockDiag { blocks: 2, block_size: 3 }, Dependence::D1, 5);
        assert!(bad.validate().is_err());
        assert!(config(Model::Gaussian, Dependence::Custom(Array2::eye(3)), 4).scale_matrix().is_err());
    }

    #[test]
    fn block_rows_repeat_within_blocks() {
        let cfg = config(Model::BlockDiag { blocks: 2, block_size: 3 }, Dependence::D1, 6);
        let mut rng = ReplicateRng::new(1, Domain::SimData, 0);
        let x = sample_model(&cfg, 5, &mut rng).unwrap();
        for i in 0..5 {
            let r = x.row(i);
            assert!(r[0] == r[1] && r[1] == r[2] && r[3] == r[4] && r[4] == r[5]);
            assert_ne!(r[0], r[3]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = config(Model::default_m2(), Dependence::D2, 4);
        let a = sample_model(&cfg, 20, &mut ReplicateRng::new(5, Domain::SimData, 2)).unwrap();
        let b = sample_model(&cfg, 20, &mut ReplicateRng::new(5, Domain::SimData, 2)).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
