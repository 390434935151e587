//! Bootstrap replicates of `T_n = sqrt(n) (U_n - theta) / 2` under three schemes,
//! scalar reductions of each replicate, and conditional quantiles.
//!
//! * Empirical: rows resampled with replacement, `T* = sqrt(n) (U*_n - V_n) / 2`.
//! * Reweighted: iid `N(1,1)` pair weights `w_i w_j`, `T = sqrt(n) (U_w - U_n) / 2`;
//!   the `flat` variant subtracts `sqrt(n) (mean(w) - 1) U_n`.
//! * Multiplier: `T# = n^{-1/2} sum_i ghat_i e_i` with iid standard normal `e_i`.
//!
//! Replicate `b` always draws from the stream `(seed, method domain, b)`, so
//! the output is bit-identical for any worker count.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{invalid, Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::rng::{Domain, ReplicateRng};
use crate::ustat::{compute_hajek, compute_ustat, HajekTable, UStatSummary};

/// Replicates per work item of the multiplier bootstrap. Fixed so that the
/// arithmetic of every replicate is independent of the thread count.
const MULTIPLIER_BLOCK: usize = 64;

pub const DEFAULT_REPLICATES: usize = 1000;

/// Projected `B n^2 d` work above which the pair-loop bootstraps log a warning.
pub const DEFAULT_COST_BUDGET: f64 = 5e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    Empirical,
    Reweighted,
    ReweightedFlat,
    Multiplier,
}

impl BootstrapMethod {
    fn domain(self) -> Domain {
        match self {
            Self::Empirical => Domain::Empirical,
            Self::Reweighted | Self::ReweightedFlat => Domain::Reweighted,
            Self::Multiplier => Domain::Multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Reduction {
    Max,
    AbsMax,
    /// Max of absolute values over entries `(m, k)` with `m != k`.
    OffDiagAbsMax,
    /// 1 if every entry lies in `[lo, hi]`, else 0.
    Rectangle { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Raw,
    /// Multiplies the replicate by `2 / sqrt(n)`, putting it on the scale of `U_n - theta`.
    Rescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatFunctional {
    pub reduction: Reduction,
    pub scale: Scale,
}

impl StatFunctional {
    pub fn new(reduction: Reduction, scale: Scale) -> Self {
        Self { reduction, scale }
    }

    pub fn max() -> Self {
        Self::new(Reduction::Max, Scale::Raw)
    }

    pub fn abs_max() -> Self {
        Self::new(Reduction::AbsMax, Scale::Raw)
    }

    pub fn rescaled(mut self) -> Self {
        self.scale = Scale::Rescaled;
        self
    }

    /// Binds the functional to a kernel and sample size.
    pub fn reducer(&self, kernel: &KernelSpec, n: usize) -> Result<Reducer> {
        let d = kernel.output_dim();
        let factor = match self.scale {
            Scale::Raw => 1.0,
            Scale::Rescaled => 2.0 / (n as f64).sqrt(),
        };
        let mode = match &self.reduction {
            Reduction::Max => Mode::Max,
            Reduction::AbsMax => Mode::AbsMax,
            Reduction::OffDiagAbsMax => {
                let index = kernel.index_map().ok_or_else(|| {
                    invalid(format!("off-diagonal reduction needs a matrix kernel, '{}' has none", kernel.name()))
                })?;
                let mask = index.off_diagonal_mask();
                if !mask.iter().any(|&m| m) {
                    return Err(invalid("off-diagonal reduction needs p >= 2"));
                }
                Mode::Masked(mask)
            }
            Reduction::Rectangle { lo, hi } => {
                if self.scale == Scale::Rescaled {
                    return Err(invalid("rectangle membership is only defined on the raw scale"));
                }
                if lo.len() != d || hi.len() != d {
                    return Err(invalid(format!(
                        "rectangle bounds must have length {d}, got {} and {}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if let Some(j) = (0..d).find(|&j| lo[j].is_nan() || hi[j].is_nan() || lo[j] > hi[j]) {
                    return Err(invalid(format!("rectangle has lo > hi in coordinate {j}")));
                }
                Mode::Rectangle(lo.clone(), hi.clone())
            }
        };
        Ok(Reducer { factor, mode })
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Max,
    AbsMax,
    Masked(Vec<bool>),
    Rectangle(Vec<f64>, Vec<f64>),
}

/// A [`StatFunctional`] bound to a kernel and sample size.
#[derive(Debug, Clone)]
pub struct Reducer {
    factor: f64,
    mode: Mode,
}

impl Reducer {
    pub fn reduce(&self, draw: ArrayView1<'_, f64>) -> f64 {
        let f = self.factor;
        match &self.mode {
            Mode::Max => draw.iter().map(|&t| f * t).fold(f64::NEG_INFINITY, f64::max),
            Mode::AbsMax => draw.iter().map(|&t| (f * t).abs()).fold(0.0, f64::max),
            Mode::Masked(mask) => draw
                .iter()
                .zip(mask)
                .filter(|(_, &keep)| keep)
                .map(|(&t, _)| (f * t).abs())
                .fold(0.0, f64::max),
            Mode::Rectangle(lo, hi) => {
                let inside = draw.iter().zip(lo.iter().zip(hi)).all(|(&t, (&l, &h))| l <= t && t <= h);
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapDraws {
    pub values: Vec<f64>,
    pub method: BootstrapMethod,
    pub functional: StatFunctional,
    pub seed: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub level: f64,
    pub value: f64,
    pub replicates: usize,
    pub method: BootstrapMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub cost_budget: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { replicates: DEFAULT_REPLICATES, seed: 0, threads: None, cost_budget: DEFAULT_COST_BUDGET }
    }
}

impl RunOptions {
    pub fn new(replicates: usize, seed: u64) -> Self {
        Self { replicates, seed, ..Self::default() }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or inline on the global pool.
pub fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(invalid("thread count must be positive")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::ResourceLimit(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// One multiplier replicate `n^{-1/2} sum_i ghat_i e_i`.
pub fn multiplier_draw(hajek: &HajekTable, e: &[f64]) -> Result<Array1<f64>> {
    if e.len() != hajek.n {
        return Err(invalid(format!("multiplier vector has length {}, expected {}", e.len(), hajek.n)));
    }
    let e = ArrayView1::from(e);
    Ok(hajek.ghat.t().dot(&e) / (hajek.n as f64).sqrt())
}

/// Raw (unreduced) multiplier replicates for blocks `lo..hi`, as rows.
fn multiplier_block(hajek: &HajekTable, seed: u64, lo: usize, hi: usize) -> Array2<f64> {
    let n = hajek.n;
    let mut e = Array2::<f64>::zeros((hi - lo, n));
    for (r, mut row) in e.rows_mut().into_iter().enumerate() {
        let mut rng = ReplicateRng::new(seed, Domain::Multiplier, (lo + r) as u64);
        rng.fill_standard_normal(row.as_slice_mut().expect("contiguous"));
    }
    e.dot(&hajek.ghat) / (n as f64).sqrt()
}

fn block_ranges(b: usize) -> Vec<(usize, usize)> {
    (0..b.div_ceil(MULTIPLIER_BLOCK))
        .map(|k| (k * MULTIPLIER_BLOCK, ((k + 1) * MULTIPLIER_BLOCK).min(b)))
        .collect()
}

/// `B x d` matrix of unreduced multiplier replicates.
pub fn multiplier_replicates(hajek: &HajekTable, opts: &RunOptions) -> Result<Array2<f64>> {
    if opts.replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let blocks = in_pool(opts.threads, || {
        block_ranges(opts.replicates)
            .into_par_iter()
            .map(|(lo, hi)| multiplier_block(hajek, opts.seed, lo, hi))
            .collect::<Vec<_>>()
    })?;
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::Numerical(e.to_string()))
}

/// Multiplier bootstrap from a precomputed Hájek table.
pub fn multiplier_bootstrap(hajek: &HajekTable, functional: &StatFunctional, opts: &RunOptions) -> Result<BootstrapDraws> {
    if opts.replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let reducer = functional.reducer(&hajek.kernel, hajek.n)?;
    let blocks = in_pool(opts.threads, || {
        block_ranges(opts.replicates)
            .into_par_iter()
            .map(|(lo, hi)| {
                let t = multiplier_block(hajek, opts.seed, lo, hi);
                t.rows().into_iter().map(|r| reducer.reduce(r)).collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    })?;
    Ok(BootstrapDraws {
        values: blocks.into_iter().flatten().collect(),
        method: BootstrapMethod::Multiplier,
        functional: functional.clone(),
        seed: opts.seed,
        replicates: opts.replicates,
    })
}

/// One empirical-bootstrap replicate `sqrt(n) (U*_n - V_n) / 2` for the
/// resample whose rows are `idx`.
pub fn empirical_draw(summary: &UStatSummary, data: &DataMatrix, kernel: &KernelSpec, idx: &[usize]) -> Result<Array1<f64>> {
    let n = data.n();
    if idx.len() != n {
        return Err(invalid(format!("index vector has length {}, expected {n}", idx.len())));
    }
    let star = compute_ustat(&data.select_rows(idx)?, kernel)?;
    Ok((star.u - &summary.v) * ((n as f64).sqrt() / 2.0))
}

/// Precomputed pieces of the reweighted U-statistic.
enum WeightPlan {
    /// Centered rows; `sum_{i != j} w_i w_j h_ij = s0 S2 - s1 s1^T` for the covariance kernel.
    Covariance(Array2<f64>),
    /// Raw rows; `sum_{i != j} w_i w_j h_ij = s0 s1 - sum_i w_i^2 x_i` for the mean kernel.
    Mean,
    Generic,
}

impl WeightPlan {
    fn new(data: &DataMatrix, kernel: &KernelSpec) -> Self {
        match kernel.kind() {
            KernelKind::Covariance => {
                let x = data.values();
                let mean = x.mean_axis(Axis(0)).expect("n >= 2");
                Self::Covariance(&x - &mean)
            }
            KernelKind::Mean => Self::Mean,
            _ => Self::Generic,
        }
    }

    /// `sum_{i != j} w_i w_j h(X_i, X_j)`.
    fn weighted_pair_sum(&self, data: &DataMatrix, kernel: &KernelSpec, w: &[f64]) -> Array1<f64> {
        let d = kernel.output_dim();
        match self {
            Self::Covariance(c) => {
                let p = c.ncols();
                let s0: f64 = w.iter().sum();
                let wv = ArrayView1::from(w);
                let s1 = c.t().dot(&wv);
                let weighted = c * &wv.insert_axis(Axis(1));
                let s2 = c.t().dot(&weighted);
                let mut out = Array1::zeros(d);
                let mut j = 0;
                for m in 0..p {
                    for k in m..p {
                        out[j] = s0 * s2[[m, k]] - s1[m] * s1[k];
                        j += 1;
                    }
                }
                out
            }
            Self::Mean => {
                let x = data.values();
                let wv = ArrayView1::from(w);
                let s0: f64 = w.iter().sum();
                let s1 = x.t().dot(&wv);
                let w2 = wv.mapv(|v| v * v);
                s1 * s0 - x.t().dot(&w2)
            }
            Self::Generic => {
                let n = data.n();
                let mut acc = Array1::<f64>::zeros(d);
                let mut h = vec![0.0; d];
                for i in 0..n {
                    let xi = data.row_slice(i);
                    for j in (i + 1)..n {
                        kernel.eval_into(xi, data.row_slice(j), &mut h);
                        let wij = 2.0 * w[i] * w[j];
                        for (a, v) in acc.iter_mut().zip(&h) {
                            *a += wij * v;
                        }
                    }
                }
                acc
            }
        }
    }

    fn draw(&self, summary: &UStatSummary, data: &DataMatrix, kernel: &KernelSpec, w: &[f64], flat: bool) -> Array1<f64> {
        let n = data.n() as f64;
        let u_w = self.weighted_pair_sum(data, kernel, w) / (n * (n - 1.0));
        let mut t = (u_w - &summary.u) * (n.sqrt() / 2.0);
        if flat {
            let wbar = w.iter().sum::<f64>() / n;
            t.scaled_add(-n.sqrt() * (wbar - 1.0), &summary.u);
        }
        t
    }
}

/// One reweighted replicate for weights `w`; `flat` applies the centering correction.
pub fn reweighted_draw(
    summary: &UStatSummary,
    data: &DataMatrix,
    kernel: &KernelSpec,
    w: &[f64],
    flat: bool,
) -> Result<Array1<f64>> {
    kernel.check_input(data.p())?;
    if w.len() != data.n() {
        return Err(invalid(format!("weight vector has length {}, expected {}", w.len(), data.n())));
    }
    Ok(WeightPlan::new(data, kernel).draw(summary, data, kernel, w, flat))
}

fn has_closed_form(kernel: &KernelSpec, method: BootstrapMethod) -> bool {
    match method {
        BootstrapMethod::Multiplier => true,
        // Resampled U-statistics reuse the O(n p^2) / counting routes of compute_ustat.
        BootstrapMethod::Empirical => matches!(kernel.kind(), KernelKind::Covariance | KernelKind::Mean),
        BootstrapMethod::Reweighted | BootstrapMethod::ReweightedFlat => {
            matches!(kernel.kind(), KernelKind::Covariance | KernelKind::Mean)
        }
    }
}

/// Generates `B` replicates of `method` and reduces each with `functional`.
pub fn run_bootstrap(
    data: &DataMatrix,
    kernel: &KernelSpec,
    method: BootstrapMethod,
    functional: &StatFunctional,
    opts: &RunOptions,
) -> Result<BootstrapDraws> {
    kernel.check_input(data.p())?;
    if opts.replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    if method == BootstrapMethod::Multiplier {
        let hajek = compute_hajek(data, kernel)?;
        return multiplier_bootstrap(&hajek, functional, opts);
    }
    let reducer = functional.reducer(kernel, data.n())?;
    if !has_closed_form(kernel, method) {
        let nf = data.n() as f64;
        let cost = opts.replicates as f64 * nf * nf * kernel.output_dim() as f64;
        if cost > opts.cost_budget {
            log::warn!(
                "{method:?} bootstrap on kernel '{}' projects {cost:.3e} kernel-entry evaluations; \
                 the multiplier bootstrap needs O(B n d)",
                kernel.name()
            );
        }
    }
    let summary = compute_ustat(data, kernel)?;
    let n = data.n();
    let domain = method.domain();
    let plan = WeightPlan::new(data, kernel);
    let values = in_pool(opts.threads, || {
        (0..opts.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = ReplicateRng::new(opts.seed, domain, b as u64);
                let t = match method {
                    BootstrapMethod::Empirical => {
                        let idx: Vec<usize> = (0..n).map(|_| rng.index(n)).collect();
                        empirical_draw(&summary, data, kernel, &idx)?
                    }
                    BootstrapMethod::Reweighted | BootstrapMethod::ReweightedFlat => {
                        let w: Vec<f64> = (0..n).map(|_| 1.0 + rng.standard_normal()).collect();
                        plan.draw(&summary, data, kernel, &w, method == BootstrapMethod::ReweightedFlat)
                    }
                    BootstrapMethod::Multiplier => unreachable!("handled above"),
                };
                Ok(reducer.reduce(t.view()))
            })
            .collect::<Result<Vec<f64>>>()
    })??;
    Ok(BootstrapDraws { values, method, functional: functional.clone(), seed: opts.seed, replicates: opts.replicates })
}

/// 1-based rank `ceil(alpha B)` of the inf-form quantile, guarded against
/// `alpha B` landing a rounding error above an integer.
fn quantile_rank(alpha: f64, b: usize) -> usize {
    let target = alpha * b as f64;
    let nearest = target.round();
    let k = if (target - nearest).abs() <= 1e-9 * b as f64 { nearest } else { target.ceil() };
    (k as usize).clamp(1, b)
}

fn check_level(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("quantile level must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `inf{t : P(T <= t) >= alpha}` under the empirical law of the draws: the
/// `ceil(alpha B)`-th order statistic.
pub fn quantile(draws: &BootstrapDraws, alpha: f64) -> Result<QuantileEstimate> {
    Ok(quantiles(draws, &[alpha])?.remove(0))
}

/// Several quantiles sharing one sort.
pub fn quantiles(draws: &BootstrapDraws, alphas: &[f64]) -> Result<Vec<QuantileEstimate>> {
    if draws.values.is_empty() {
        return Err(invalid("no draws"));
    }
    for &a in alphas {
        check_level(a)?;
    }
    let mut sorted = draws.values.clone();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    Ok(alphas
        .iter()
        .map(|&level| QuantileEstimate {
            level,
            value: sorted[quantile_rank(level, b) - 1],
            replicates: b,
            method: draws.method,
        })
        .collect())
}

/// Fraction of replicates inside the rectangle of a `Rectangle` functional.
pub fn rectangle_probability(draws: &BootstrapDraws) -> Result<f64> {
    if !matches!(draws.functional.reduction, Reduction::Rectangle { .. }) {
        return Err(invalid("draws were not produced with a rectangle functional"));
    }
    if draws.values.is_empty() {
        return Err(invalid("no draws"));
    }
    Ok(draws.values.iter().sum::<f64>() / draws.values.len() as f64)
}
