//! Population covariance of the covariance-kernel Hájek projection under an
//! elliptical law, and exact sampling of `Y ~ N(0, Gamma)`.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use super::Model;
use crate::error::{invalid, Error, Result};
use crate::kernels::TriIndex;
use crate::linalg::{cholesky_jittered, cholesky_psd};
use crate::rng::{Domain, ReplicateRng};

const REFERENCE_BLOCK: usize = 64;

/// Pivot tolerance, relative to the largest diagonal entry, below which a
/// covariance is treated as singular in that direction.
const PSD_TOLERANCE: f64 = 1e-12;

/// `Gamma_{(j,k),(m,l)} = [kappa (s_jk s_ml + s_jm s_kl + s_jl s_km) + s_jm s_kl + s_jl s_km] / 4`
/// for `g(x) = (x x^T - Sigma) / 2` with `Sigma` the covariance.
#[derive(Debug, Clone)]
pub struct GammaModel {
    pub kappa: f64,
    pub sigma: Array2<f64>,
    index: TriIndex,
}

impl GammaModel {
    pub fn new(kappa: f64, sigma: Array2<f64>) -> Result<Self> {
        let (r, c) = sigma.dim();
        if r != c || r == 0 {
            return Err(invalid(format!("covariance must be square and non-empty, got {r} x {c}")));
        }
        if !kappa.is_finite() {
            return Err(invalid("kurtosis must be finite"));
        }
        Ok(Self { kappa, sigma, index: TriIndex::new(r) })
    }

    pub fn p(&self) -> usize {
        self.index.p()
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn index(&self) -> TriIndex {
        self.index
    }

    pub fn entry_at(&self, (j, k): (usize, usize), (m, l): (usize, usize)) -> f64 {
        let s = &self.sigma;
        let cross = s[[j, m]] * s[[k, l]] + s[[j, l]] * s[[k, m]];
        (self.kappa * (s[[j, k]] * s[[m, l]] + cross) + cross) / 4.0
    }

    /// Entry for flat (upper-triangle) coordinates `a` and `b`.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.entry_at(self.index.pair(a), self.index.pair(b))
    }

    pub fn diagonal(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.dim(), |a| self.entry(a, a))
    }

    /// The full `d x d` matrix, refused above `d_limit`.
    pub fn matrix(&self, d_limit: usize) -> Result<Array2<f64>> {
        let d = self.dim();
        if d > d_limit {
            return Err(Error::ResourceLimit(format!("Gamma would be {d} x {d}, above the limit d = {d_limit}")));
        }
        let pairs: Vec<_> = (0..d).map(|a| self.index.pair(a)).collect();
        let mut g = Array2::zeros((d, d));
        for a in 0..d {
            for b in a..d {
                let v = self.entry_at(pairs[a], pairs[b]);
                g[[a, b]] = v;
                g[[b, a]] = v;
            }
        }
        Ok(g)
    }

    pub fn reference(&self, d_limit: usize) -> Result<GaussianReference> {
        GaussianReference::from_covariance(&self.matrix(d_limit)?)
    }
}

/// One entry of the population Gamma for an elliptical `model` with scale `v`.
pub fn population_gamma(model: &Model, v: &Array2<f64>, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    if matches!(model, Model::BlockDiag { .. }) {
        return Err(invalid("the block design has no scale matrix parameter; use SimConfig::gamma_model"));
    }
    let p = v.nrows();
    if [a.0, a.1, b.0, b.1].iter().any(|&i| i >= p) {
        return Err(invalid(format!("index out of range for p = {p}")));
    }
    let gm = GammaModel::new(model.kurtosis()?, v * model.covariance_scale()?)?;
    Ok(gm.entry_at(a, b))
}

/// Iid draws of `Y ~ N(0, Gamma)` through a lower factor `L` (`Y = L z`).
#[derive(Debug, Clone)]
pub struct GaussianReference {
    factor: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceSample {
    /// `count x d`, one draw per row.
    pub draws: Array2<f64>,
    pub max: Vec<f64>,
    pub abs_max: Vec<f64>,
}

impl GaussianReference {
    /// Factors a positive semidefinite `gamma`; rank-deficient directions get
    /// zero columns.
    pub fn from_covariance(gamma: &Array2<f64>) -> Result<Self> {
        let factor = match cholesky_psd(gamma, PSD_TOLERANCE) {
            Ok(l) => l,
            Err(_) => cholesky_jittered(gamma)?,
        };
        Ok(Self { factor })
    }

    pub fn from_factor(factor: Array2<f64>) -> Result<Self> {
        let (r, c) = factor.dim();
        if r != c {
            return Err(invalid(format!("factor must be square, got {r} x {c}")));
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    fn block(&self, seed: u64, domain: Domain, lo: usize, hi: usize) -> Array2<f64> {
        let d = self.dim();
        let mut z = Array2::<f64>::zeros((hi - lo, d));
        for (r, mut row) in z.rows_mut().into_iter().enumerate() {
            let mut rng = ReplicateRng::new(seed, domain, (lo + r) as u64);
            rng.fill_standard_normal(row.as_slice_mut().expect("contiguous"));
        }
        z.dot(&self.factor.t())
    }

    fn blocks(count: usize) -> Vec<(usize, usize)> {
        (0..count.div_ceil(REFERENCE_BLOCK))
            .map(|k| (k * REFERENCE_BLOCK, ((k + 1) * REFERENCE_BLOCK).min(count)))
            .collect()
    }

    /// Draw `r` comes from stream `(seed, domain, r)`.
    pub fn sample(&self, count: usize, seed: u64, domain: Domain) -> ReferenceSample {
        let parts: Vec<_> = Self::blocks(count).into_par_iter().map(|(lo, hi)| self.block(seed, domain, lo, hi)).collect();
        let views: Vec<_> = parts.iter().map(|b| b.view()).collect();
        let draws = if views.is_empty() {
            Array2::zeros((0, self.dim()))
        } else {
            ndarray::concatenate(Axis(0), &views).expect("blocks share a width")
        };
        let (max, abs_max) = draws.rows().into_iter().map(|r| reductions(r.iter().copied())).unzip();
        ReferenceSample { draws, max, abs_max }
    }

    /// Only the `(max, abs_max)` reductions, without keeping the draws.
    pub fn sample_reductions(&self, count: usize, seed: u64, domain: Domain) -> (Vec<f64>, Vec<f64>) {
        let parts: Vec<(Vec<f64>, Vec<f64>)> = Self::blocks(count)
            .into_par_iter()
            .map(|(lo, hi)| self.block(seed, domain, lo, hi).rows().into_iter().map(|r| reductions(r.iter().copied())).unzip())
            .collect();
        let mut max = Vec::with_capacity(count);
        let mut abs_max = Vec::with_capacity(count);
        for (m, a) in parts {
            max.extend(m);
            abs_max.extend(a);
        }
        (max, abs_max)
    }
}

pub(crate) fn reductions(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::NEG_INFINITY, 0.0f64), |(m, a), v| (m.max(v), a.max(v.abs())))
}
