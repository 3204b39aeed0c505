//! Monte Carlo estimates of the first- and second-order small-noise errors
//! and their log–log convergence slopes.

use rayon::prelude::*;

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::integrate::{
    integrate_deterministic, integrate_fluctuation, integrate_sde, sample_brownian,
    CadlagTrajectory, PathSeed, SampleGrid,
};

/// Sup-norm deviation over `[0, T]`: one entry per coordinate plus the
/// Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SupError {
    pub per_coord: Vec<f64>,
    pub norm: f64,
}

impl SupError {
    /// Coordinates followed by the norm.
    pub fn columns(&self) -> impl Iterator<Item = f64> + '_ {
        self.per_coord.iter().copied().chain(std::iter::once(self.norm))
    }
}

/// `sup_t |a(t) - b(t) - s·c(t)|` over every grid node and every recorded
/// left limit, where `shift = Some((c, s))`.
pub fn sup_error(
    a: &CadlagTrajectory,
    b: &CadlagTrajectory,
    shift: Option<(&CadlagTrajectory, f64)>,
) -> Result<SupError> {
    let same_grid = a.grid() == b.grid() && shift.is_none_or(|(c, _)| c.grid() == a.grid());
    if !same_grid {
        return Err(Error::DimensionMismatch(
            "trajectories live on different grids".into(),
        ));
    }
    let same_dim = a.dim() == b.dim() && shift.is_none_or(|(c, _)| c.dim() == a.dim());
    if !same_dim {
        return Err(Error::DimensionMismatch(
            "trajectories have different dimensions".into(),
        ));
    }
    let d = a.dim();
    let mut per_coord = vec![0.0f64; d];
    let mut norm = 0.0f64;
    let mut visit = |pa: &[f64], pb: &[f64], pc: Option<(&[f64], f64)>| {
        let mut sq = 0.0;
        for i in 0..d {
            let mut diff = pa[i] - pb[i];
            if let Some((c, s)) = pc {
                diff -= s * c[i];
            }
            let diff = diff.abs();
            per_coord[i] = per_coord[i].max(diff);
            sq += diff * diff;
        }
        norm = norm.max(sq.sqrt());
    };

    for n in 0..a.grid().n_nodes() {
        visit(a.value(n), b.value(n), shift.map(|(c, s)| (c.value(n), s)));
    }
    for (i, ea) in a.pre_reset().iter().enumerate() {
        let eb = &b.pre_reset()[i];
        let ec = shift.map(|(c, s)| (c.pre_reset()[i].left.as_slice(), s));
        visit(&ea.left, &eb.left, ec);
    }
    Ok(SupError { per_coord, norm })
}

/// Which error functionals a study estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMode {
    /// `sup |X^ε - x|` only.
    Lln,
    /// `sup |X^ε - x - εZ|` only.
    Clt,
    Both,
}

impl StudyMode {
    pub fn wants_lln(self) -> bool {
        matches!(self, StudyMode::Lln | StudyMode::Both)
    }

    pub fn wants_clt(self) -> bool {
        matches!(self, StudyMode::Clt | StudyMode::Both)
    }
}

impl std::str::FromStr for StudyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lln" => Ok(StudyMode::Lln),
            "clt" => Ok(StudyMode::Clt),
            "both" => Ok(StudyMode::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown study mode '{other}' (expected lln, clt or both)"
            ))),
        }
    }
}

impl std::fmt::Display for StudyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudyMode::Lln => "lln",
            StudyMode::Clt => "clt",
            StudyMode::Both => "both",
        })
    }
}

/// Errors of one sample path at one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PathErrors {
    pub eps: f64,
    pub seed: PathSeed,
    pub lln: Option<SupError>,
    pub clt: Option<SupError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// Noise levels `ε = 2^-i` for each `i` listed.
    pub eps_exponents: Vec<u32>,
    pub n_paths: usize,
    pub base_seed: u64,
    pub mode: StudyMode,
    /// Worker cap; `None` uses the global rayon pool. Never affects results.
    pub threads: Option<usize>,
}

/// `ε = 2^-i`.
pub fn eps_for(exponent: u32) -> f64 {
    2f64.powi(-(exponent as i32))
}

/// Ordinary least squares fit of `log2 y` against `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} abscissae for {} ordinates",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "a slope fit needs at least two points".into(),
        ));
    }
    if let Some(y) = ys.iter().find(|&&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "log-log fit needs positive finite ordinates, got {y}"
        )));
    }
    let n = xs.len() as f64;
    let logs: Vec<f64> = ys.iter().map(|y| y.log2()).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = logs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&logs).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = logs.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&logs)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Cross-path summary of one error functional. Rows follow the noise levels;
/// columns are the coordinates followed by the Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    pub mean: Vec<Vec<f64>>,
    /// Standard error of each mean (diagnostic).
    pub std_err: Vec<Vec<f64>>,
    /// Per-column fit of `log2(mean)` against `-i`; `None` when a mean is
    /// zero or fewer than two noise levels were run.
    pub fits: Vec<Option<LogLogFit>>,
}

impl ErrorSeries {
    pub fn slope(&self, column: usize) -> Option<f64> {
        self.fits[column].map(|f| f.slope)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub eps_exponents: Vec<u32>,
    pub eps: Vec<f64>,
    pub n_paths: usize,
    pub dim: usize,
    pub lln: Option<ErrorSeries>,
    pub clt: Option<ErrorSeries>,
}

fn validate(config: &StudyConfig) -> Result<()> {
    if config.n_paths < 2 {
        return Err(Error::InvalidParameter(format!(
            "a study needs at least 2 paths, got {}",
            config.n_paths
        )));
    }
    if config.eps_exponents.is_empty() || config.eps_exponents.contains(&0) {
        return Err(Error::InvalidParameter(
            "noise exponents must be a nonempty list of positive integers".into(),
        ));
    }
    if config.threads == Some(0) {
        return Err(Error::InvalidParameter("thread count must be positive".into()));
    }
    Ok(())
}

fn one_path<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
    det: &CadlagTrajectory,
    config: &StudyConfig,
    path_index: usize,
) -> Result<Vec<PathErrors>> {
    let seed = PathSeed::new(config.base_seed, path_index as u64);
    let tag = |eps: f64| {
        move |e: Error| Error::PathFailed {
            eps,
            path: path_index,
            source: Box::new(e),
        }
    };
    let first_eps = eps_for(config.eps_exponents[0]);
    let path = sample_brownian(grid, model.noise_dim(), seed)?;
    let fluct = if config.mode.wants_clt() {
        Some(integrate_fluctuation(model, grid, det, &path).map_err(tag(first_eps))?)
    } else {
        None
    };
    config
        .eps_exponents
        .iter()
        .map(|&i| {
            let eps = eps_for(i);
            let noisy = integrate_sde(model, grid, x0, eps, &path).map_err(tag(eps))?;
            let lln = if config.mode.wants_lln() {
                Some(sup_error(&noisy, det, None)?)
            } else {
                None
            };
            let clt = match &fluct {
                Some(z) => Some(sup_error(&noisy, det, Some((z, eps)))?),
                None => None,
            };
            Ok(PathErrors { eps, seed, lln, clt })
        })
        .collect()
}

/// Per-path errors for every path (outer, by path index) and noise level
/// (inner, in `eps_exponents` order). Each path's increments come from
/// `PathSeed::new(base_seed, path_index)` and are shared by all noise levels
/// and by the fluctuation process.
pub fn collect_path_errors<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
    config: &StudyConfig,
) -> Result<Vec<Vec<PathErrors>>> {
    validate(config)?;
    let det = integrate_deterministic(model, grid, x0)?;
    let run = || {
        (0..config.n_paths)
            .into_par_iter()
            .map(|j| one_path(model, grid, x0, &det, config, j))
            .collect::<Vec<_>>()
    };
    let results = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    // first failure by path index, independent of scheduling
    results.into_iter().collect()
}

fn summarize(
    paths: &[Vec<PathErrors>],
    n_levels: usize,
    xs: &[f64],
    pick: impl Fn(&PathErrors) -> &SupError,
) -> ErrorSeries {
    let n = paths.len() as f64;
    let mut mean = Vec::with_capacity(n_levels);
    let mut std_err = Vec::with_capacity(n_levels);
    for level in 0..n_levels {
        let rows: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| pick(&p[level]).columns().collect())
            .collect();
        let cols = rows[0].len();
        let m: Vec<f64> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n)
            .collect();
        let se: Vec<f64> = (0..cols)
            .map(|c| {
                let var = rows.iter().map(|r| (r[c] - m[c]).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            })
            .collect();
        mean.push(m);
        std_err.push(se);
    }
    let cols = mean[0].len();
    let fits = (0..cols)
        .map(|c| {
            let ys: Vec<f64> = mean.iter().map(|row| row[c]).collect();
            fit_loglog_slope(xs, &ys).ok()
        })
        .collect();
    ErrorSeries {
        mean,
        std_err,
        fits,
    }
}

/// Mean sup-norm errors across paths for each `ε = 2^-i`, with log–log slopes
/// fitted over all requested noise levels.
pub fn run_convergence_study<M: Model + ?Sized>(
    model: &M,
    grid: &SampleGrid,
    x0: &[f64],
    config: &StudyConfig,
) -> Result<ConvergenceReport> {
    let paths = collect_path_errors(model, grid, x0, config)?;
    let n_levels = config.eps_exponents.len();
    let xs: Vec<f64> = config.eps_exponents.iter().map(|&i| -(i as f64)).collect();
    let lln = config
        .mode
        .wants_lln()
        .then(|| summarize(&paths, n_levels, &xs, |p| p.lln.as_ref().unwrap()));
    let clt = config
        .mode
        .wants_clt()
        .then(|| summarize(&paths, n_levels, &xs, |p| p.clt.as_ref().unwrap()));
    Ok(ConvergenceReport {
        eps_exponents: config.eps_exponents.clone(),
        eps: config.eps_exponents.iter().map(|&i| eps_for(i)).collect(),
        n_paths: config.n_paths,
        dim: model.dim(),
        lln,
        clt,
    })
}
