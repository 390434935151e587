use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ustat_boot::applications::{kendall_test, select_threshold_with, simultaneous_cov_test};
use ustat_boot::bootstrap::{quantiles, run_bootstrap, RunOptions, StatFunctional};
use ustat_boot::sim::{run_gaussian_approx_experiment, Dependence, ExperimentOptions, Model, SimConfig, SizeOptions};
use ustat_boot::ustat::compute_ustat;
use ustat_boot::DataMatrix;

use crate::args::*;
use crate::io::{read_matrix, write_matrix, write_rows};
use crate::{json, CliError};

/// What a command printed and which files it touched.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub inputs: Vec<PathBuf>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    fn new(value: &impl Serialize, inputs: Vec<PathBuf>) -> Self {
        Self { stdout: json::to_string(value), inputs, artifacts: Vec::new() }
    }
}

pub const THREADS_ENV: &str = "USTAT_BOOT_THREADS";

pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a positive integer, got '{s}'"))),
        Err(_) => Ok(None),
    }
}

fn load_data(path: &Path) -> Result<DataMatrix, CliError> {
    let m = read_matrix(path)?;
    if m.nrows() < 2 {
        return Err(CliError::usage(format!("{}: need at least 2 data rows, found {}", path.display(), m.nrows())));
    }
    Ok(DataMatrix::new(m)?)
}

fn options(replicates: usize, seed: u64, threads: Option<usize>) -> Result<RunOptions, CliError> {
    Ok(RunOptions::new(replicates, seed).with_threads(resolve_threads(threads)?))
}

pub fn run(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Ustat(a) => ustat(a),
        Command::Boot(a) => boot(a),
        Command::Threshold(a) => threshold(a),
        Command::Test(a) => test(a),
        Command::Simulate(a) => simulate(a),
        Command::Replay(_) => unreachable!("replay is resolved before dispatch"),
    }
}

#[derive(Serialize)]
struct UstatOut<'a> {
    n: usize,
    p: usize,
    d: usize,
    kernel: &'a str,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn ustat(a: &UstatArgs) -> Result<Outcome, CliError> {
    let x = load_data(&a.data)?;
    let kernel = a.kernel.spec(x.p());
    let s = compute_ustat(&x, &kernel)?;
    let mut out = Outcome::new(
        &UstatOut { n: x.n(), p: x.p(), d: kernel.output_dim(), kernel: a.kernel.label(), u: s.u.to_vec(), v: s.v.to_vec() },
        vec![a.data.clone()],
    );
    if let Some(path) = &a.matrix_out {
        let index = kernel
            .index_map()
            .ok_or_else(|| CliError::usage(format!("--matrix-out needs a matrix kernel, '{}' has none", a.kernel.label())))?;
        write_matrix(path, &index.to_matrix(s.u.view()))?;
        out.artifacts.push(path.clone());
    }
    Ok(out)
}

#[derive(Serialize)]
struct Level {
    level: f64,
    value: f64,
}

#[derive(Serialize)]
struct DrawSummary {
    mean: f64,
    sd: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct BootOut<'a> {
    n: usize,
    p: usize,
    d: usize,
    kernel: &'a str,
    method: MethodArg,
    stat: StatArg,
    scale: ScaleArg,
    replicates: usize,
    seed: u64,
    quantiles: Vec<Level>,
    draws: DrawSummary,
}

fn summarize(v: &[f64]) -> DrawSummary {
    let b = v.len() as f64;
    let mean = v.iter().sum::<f64>() / b;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0) } else { 0.0 };
    DrawSummary {
        mean,
        sd: var.sqrt(),
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn boot(a: &BootArgs) -> Result<Outcome, CliError> {
    let x = load_data(&a.data)?;
    let kernel = a.kernel.spec(x.p());
    let functional = StatFunctional::new(a.stat.reduction(), a.scale.scale());
    let draws = run_bootstrap(&x, &kernel, a.method.method(), &functional, &options(a.replicates, a.seed, a.threads)?)?;
    let qs = quantiles(&draws, &a.alpha)?;
    let mut out = Outcome::new(
        &BootOut {
            n: x.n(),
            p: x.p(),
            d: kernel.output_dim(),
            kernel: a.kernel.label(),
            method: a.method,
            stat: a.stat,
            scale: a.scale,
            replicates: a.replicates,
            seed: a.seed,
            quantiles: qs.iter().map(|q| Level { level: q.level, value: q.value }).collect(),
            draws: summarize(&draws.values),
        },
        vec![a.data.clone()],
    );
    if let Some(path) = &a.dump_draws {
        let text: String = draws.values.iter().map(|v| format!("{v}\n")).collect();
        fs::write(path, text).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        out.artifacts.push(path.clone());
    }
    Ok(out)
}

#[derive(Serialize)]
struct ThresholdOut {
    n: usize,
    p: usize,
    tau_star: f64,
    quantile: f64,
    alpha: f64,
    beta: f64,
    keep_diagonal: bool,
    replicates: usize,
    seed: u64,
    /// Non-zero entries of the thresholded matrix.
    support: usize,
}

fn threshold(a: &ThresholdArgs) -> Result<Outcome, CliError> {
    let x = load_data(&a.data)?;
    let res = select_threshold_with(&x, a.alpha, a.beta, a.keep_diag, &options(a.replicates, a.seed, a.threads)?)?;
    let mut out = Outcome::new(
        &ThresholdOut {
            n: x.n(),
            p: x.p(),
            tau_star: res.tau_star,
            quantile: res.quantile,
            alpha: res.alpha,
            beta: res.beta,
            keep_diagonal: res.keep_diagonal,
            replicates: res.replicates,
            seed: res.seed,
            support: res.thresholded.iter().filter(|&&v| v != 0.0).count(),
        },
        vec![a.data.clone()],
    );
    if let Some(path) = &a.matrix_out {
        write_matrix(path, &res.thresholded)?;
        out.artifacts.push(path.clone());
    }
    Ok(out)
}

fn test(a: &TestArgs) -> Result<Outcome, CliError> {
    let x = load_data(&a.data)?;
    let null = read_matrix(&a.null)?;
    let opts = options(a.replicates, a.seed, a.threads)?;
    let outcome = match a.kind {
        TestKind::Cov => simultaneous_cov_test(&x, &null, a.alpha, &opts)?,
        TestKind::Kendall => kendall_test(&x, &null, a.alpha, &opts)?,
    };
    Ok(Outcome::new(&outcome, vec![a.data.clone(), a.null.clone()]))
}

fn sim_config(a: &SimulateArgs) -> Result<SimConfig, CliError> {
    let model = match a.model {
        ModelArg::M1 => Model::M1 { epsilon: a.epsilon.unwrap_or(0.2), nu: a.nu.unwrap_or(1.5) },
        ModelArg::M2 => Model::M2 { nu: a.nu.unwrap_or(10.0) },
        ModelArg::Gaussian => Model::Gaussian,
        ModelArg::Block => match (a.blocks, a.block_size) {
            (Some(blocks), Some(block_size)) => Model::BlockDiag { blocks, block_size },
            _ => return Err(CliError::usage("the block model needs --L and --m")),
        },
    };
    let unused = match a.model {
        ModelArg::M1 => a.blocks.is_some() || a.block_size.is_some(),
        ModelArg::M2 => a.epsilon.is_some() || a.blocks.is_some() || a.block_size.is_some(),
        ModelArg::Gaussian | ModelArg::Block => a.epsilon.is_some() || a.nu.is_some(),
    };
    if unused {
        return Err(CliError::usage(format!("parameter overrides do not apply to --model {}", model.label())));
    }
    let p = match (a.p, &model) {
        (Some(p), _) => p,
        (None, Model::BlockDiag { blocks, block_size }) => blocks * block_size,
        (None, _) => 40,
    };
    let dep = match a.dep {
        DepArg::D1 => Dependence::D1,
        DepArg::D2 => Dependence::D2,
        DepArg::D3 => Dependence::D3,
    };
    let cfg = SimConfig { model, dep, n: a.n, p, reps: a.reps, seed: a.seed };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Rates {
    alpha: f64,
    replicates: usize,
    cov: f64,
    kendall: f64,
}

#[derive(Serialize)]
struct SimSummary<'a> {
    model: &'a str,
    dep: &'a str,
    n: usize,
    p: usize,
    #[serde(rename = "R")]
    reps: usize,
    /// KS distance for the signed maximum.
    ks: f64,
    ks_absmax: f64,
    seed: u64,
    kappa: f64,
    sanity: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    rejection_rates: Option<Rates>,
}

fn simulate(a: &SimulateArgs) -> Result<Outcome, CliError> {
    let cfg = sim_config(a)?;
    let stem = format!("{}_{}", cfg.model.label(), cfg.dep.label());
    let files = [
        format!("{stem}.csv"),
        format!("{stem}_absmax.csv"),
        format!("{stem}_cdf.csv"),
        format!("{stem}_summary.json"),
        "manifest.json".to_string(),
    ];
    let paths: Vec<PathBuf> = files.iter().map(|f| a.out.join(f)).collect();
    if !a.force {
        if let Some(hit) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::usage(format!("{} already exists; pass --force to overwrite", hit.display())));
        }
    }
    fs::create_dir_all(&a.out).map_err(|e| CliError::usage(format!("cannot create {}: {e}", a.out.display())))?;

    let size = a.size_alpha.map(|alpha| SizeOptions { alpha, replicates: a.size_replicates });
    let options = ExperimentOptions { sanity: a.sanity, size, threads: resolve_threads(a.threads)?, ..Default::default() };
    let report = run_gaussian_approx_experiment(&cfg, &options)?;

    let pairs = |t: &[f64], y: &[f64]| -> Vec<[f64; 3]> {
        t.iter().zip(y).enumerate().map(|(r, (&t, &y))| [r as f64, t, y]).collect()
    };
    let header = ["rep", "t_bar", "y_bar"];
    for (path, rows) in [(&paths[0], pairs(&report.t_max, &report.y_max)), (&paths[1], pairs(&report.t_abs_max, &report.y_abs_max))] {
        write_rows(path, Some(&header), rows.iter().map(|r| r.as_slice()))?;
    }
    let (cm, ca) = (&report.cdf_max, &report.cdf_abs_max);
    let cdf: Vec<[f64; 6]> = (0..cm.grid.len())
        .map(|g| [cm.grid[g], cm.t_cdf[g], cm.y_cdf[g], ca.grid[g], ca.t_cdf[g], ca.y_cdf[g]])
        .collect();
    write_rows(
        &paths[2],
        Some(&["grid", "t_cdf", "y_cdf", "grid_absmax", "t_cdf_absmax", "y_cdf_absmax"]),
        cdf.iter().map(|r| r.as_slice()),
    )?;

    let summary = SimSummary {
        model: cfg.model.label(),
        dep: cfg.dep.label(),
        n: cfg.n,
        p: cfg.p,
        reps: cfg.reps,
        ks: report.ks_max,
        ks_absmax: report.ks_abs_max,
        seed: cfg.seed,
        kappa: cfg.model.kurtosis()?,
        sanity: a.sanity,
        rejection_rates: report
            .rejection_rates
            .map(|r| Rates { alpha: r.alpha, replicates: r.replicates, cov: r.cov, kendall: r.kendall }),
    };
    let text = json::to_string(&summary);
    fs::write(&paths[3], format!("{text}\n")).map_err(|e| CliError::usage(format!("cannot write {}: {e}", paths[3].display())))?;
    Ok(Outcome { stdout: text, inputs: Vec::new(), artifacts: paths[..4].to_vec() })
}
