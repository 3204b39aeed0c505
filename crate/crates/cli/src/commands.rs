use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::Serialize;

use impulse_sde::dynamics::pendulum_affine_kick_model;
use impulse_sde::kickmap::{kick_limit_check, KickField};
use impulse_sde::output::{write_kick_table, write_report_csv, write_trajectory_csv};
use impulse_sde::{
    affine_kick_map, build_grid, run_convergence_study, sample_brownian, simulate_coupled,
    ErrorSeries, ImpulseSchedule, Matrix, Model, PathSeed, Pendulum, StudyConfig, StudyMode,
};

use crate::args::{CommonArgs, ConvergenceArgs, KickmapArgs, Mode, ModelName, Preset, SimulateArgs};
use crate::manifest::RunManifest;

const DEFAULT_HORIZON: f64 = 8.0;
const DEFAULT_DT_EXP: u32 = 12;
const DEFAULT_KICK_OFFSET: [f64; 2] = [0.0, 0.1];

pub fn parse_list(flag: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("--{flag}: '{s}' is not a finite number"))
        })
        .collect()
}

/// `a..b` (inclusive) or `i,j,k`.
pub fn parse_exponents(text: &str) -> Result<Vec<u32>> {
    let bad = || anyhow!("--eps-exps: expected a range like 1..10 or a list like 1,2,3, got '{text}'");
    let exps: Vec<u32> = if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    ensure!(!exps.is_empty() && !exps.contains(&0), bad());
    Ok(exps)
}

fn square_matrix(flag: &str, text: &str) -> Result<Matrix> {
    let entries = parse_list(flag, text)?;
    Matrix::square_from_slice(&entries).with_context(|| format!("--{flag}: malformed matrix"))
}

#[derive(Debug, Serialize)]
struct ModelParams {
    model: ModelName,
    alpha: f64,
    alpha_pend: f64,
    horizon: f64,
    dt_exp: u32,
    x0: Vec<f64>,
    kick_matrix: Option<Vec<f64>>,
    kick_offset: Option<Vec<f64>>,
    threads: Option<usize>,
}

struct Setup {
    model: Box<dyn Model>,
    grid: impulse_sde::SampleGrid,
    params: ModelParams,
}

fn setup(common: &CommonArgs, horizon: f64, dt_exp: u32) -> Result<Setup> {
    let schedule = ImpulseSchedule::new(common.alpha)?;
    let grid = build_grid(horizon, dt_exp, schedule)?;
    let x0 = parse_list("x0", &common.x0)?;

    let (model, kick_matrix, kick_offset): (Box<dyn Model>, _, _) = match common.model {
        ModelName::Pendulum => {
            ensure!(
                common.kick_matrix.is_none() && common.kick_offset.is_none(),
                "--A and --c only apply to --model affine_kick"
            );
            (Box::new(Pendulum::new(common.alpha_pend)?), None, None)
        }
        ModelName::AffineKick => {
            let a = match &common.kick_matrix {
                Some(text) => square_matrix("A", text)?,
                None => Matrix::zeros(2, 2),
            };
            let c = match &common.kick_offset {
                Some(text) => parse_list("c", text)?,
                None => DEFAULT_KICK_OFFSET.to_vec(),
            };
            let model = pendulum_affine_kick_model(common.alpha_pend, &a, &c)?;
            (Box::new(model), Some(a.as_slice().to_vec()), Some(c))
        }
    };
    ensure!(
        x0.len() == model.dim(),
        "--x0 has {} entries but model '{}' has dimension {}",
        x0.len(),
        model.name(),
        model.dim()
    );
    Ok(Setup {
        model,
        grid,
        params: ModelParams {
            model: common.model,
            alpha: common.alpha,
            alpha_pend: common.alpha_pend,
            horizon,
            dt_exp,
            x0,
            kick_matrix,
            kick_offset,
            threads: common.threads,
        },
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

#[derive(Debug, Serialize)]
struct SimulateParams {
    #[serde(flatten)]
    model: ModelParams,
    eps: f64,
    allow_degenerate: bool,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let eps = args.eps;
    if eps == 0.0 {
        ensure!(args.allow_degenerate, "--eps 0 requires --allow-degenerate");
    } else {
        ensure!(eps > 0.0 && eps < 1.0, "--eps must lie in (0, 1), got {eps}");
    }
    let horizon = args.common.horizon.unwrap_or(DEFAULT_HORIZON);
    let dt_exp = args.common.dt_exp.unwrap_or(DEFAULT_DT_EXP);
    let Setup { model, grid, params } = setup(&args.common, horizon, dt_exp)?;

    let seed = PathSeed::new(args.common.seed, 0);
    let path = sample_brownian(&grid, model.noise_dim(), seed)?;
    let run = simulate_coupled(model.as_ref(), &grid, &params.x0, eps, &path)?;

    let mut out = create(&args.out)?;
    write_trajectory_csv(&mut out, &run)?;
    out.flush()?;

    let mut manifest = RunManifest::new(
        "simulate",
        Some(args.common.seed),
        SimulateParams {
            model: params,
            eps,
            allow_degenerate: args.allow_degenerate,
        },
    );
    let manifest_path = manifest.write(&args.out, started.elapsed())?;
    println!(
        "wrote {} ({} nodes, {} impulses) and {}",
        args.out.display(),
        grid.n_nodes(),
        grid.impulses().len(),
        manifest_path.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ConvergenceParams {
    #[serde(flatten)]
    model: ModelParams,
    preset: Preset,
    paths: usize,
    eps_exponents: Vec<u32>,
    mode: String,
}

fn print_slopes(label: &str, series: &Option<ErrorSeries>, dim: usize) {
    let Some(series) = series else { return };
    let mut line = format!("{label} slopes:");
    for (c, fit) in series.fits.iter().enumerate() {
        let name = if c < dim { format!("e{}", c + 1) } else { "norm".into() };
        match fit {
            Some(f) => line.push_str(&format!(" {name}={:.4} (r2={:.4})", f.slope, f.r_squared)),
            None => line.push_str(&format!(" {name}=n/a")),
        }
    }
    println!("{line}");
}

pub fn convergence(args: &ConvergenceArgs) -> Result<()> {
    let started = Instant::now();
    let (preset_paths, preset_dt_exp) = match args.preset {
        Preset::Paper => (1000, 12),
        Preset::Desk => (200, 10),
    };
    let paths = args.paths.unwrap_or(preset_paths);
    ensure!(paths >= 2, "--paths must be at least 2, got {paths}");
    ensure!(args.common.threads != Some(0), "--threads must be positive");
    let horizon = args.common.horizon.unwrap_or(DEFAULT_HORIZON);
    let dt_exp = args.common.dt_exp.unwrap_or(preset_dt_exp);
    let eps_exponents = parse_exponents(&args.eps_exps)?;
    let mode = match args.mode {
        Mode::Lln => StudyMode::Lln,
        Mode::Clt => StudyMode::Clt,
        Mode::Both => StudyMode::Both,
    };
    let Setup { model, grid, params } = setup(&args.common, horizon, dt_exp)?;

    let config = StudyConfig {
        eps_exponents: eps_exponents.clone(),
        n_paths: paths,
        base_seed: args.common.seed,
        mode,
        threads: args.common.threads,
    };
    let report = run_convergence_study(model.as_ref(), &grid, &params.x0, &config)?;

    let mut out = create(&args.out)?;
    write_report_csv(&mut out, &report)?;
    out.flush()?;

    let mut manifest = RunManifest::new(
        "convergence",
        Some(args.common.seed),
        ConvergenceParams {
            model: params,
            preset: args.preset,
            paths,
            eps_exponents,
            mode: mode.to_string(),
        },
    );
    let manifest_path = manifest.write(&args.out, started.elapsed())?;
    print_slopes("lln", &report.lln, report.dim);
    print_slopes("clt", &report.clt, report.dim);
    println!("wrote {} and {}", args.out.display(), manifest_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct KickmapParams {
    kick_matrix: Vec<f64>,
    kick_offset: Vec<f64>,
    r: Vec<f64>,
    deltas: Vec<f64>,
}

pub fn kickmap(args: &KickmapArgs) -> Result<()> {
    let started = Instant::now();
    let a = square_matrix("A", &args.kick_matrix)?;
    let c = parse_list("c", &args.kick_offset)?;
    let r = match &args.r {
        Some(text) => parse_list("r", text)?,
        None => vec![0.0; a.rows()],
    };
    if r.len() != a.rows() {
        bail!("--r has {} entries but A is {}x{}", r.len(), a.rows(), a.cols());
    }
    let deltas = parse_list("deltas", &args.deltas)?;

    let map = affine_kick_map(&a, &c)?;
    let field = KickField::affine(&a, &c)?;
    let rows = kick_limit_check(&field, |x| map.apply(x), &r, &deltas)?;

    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            write_kick_table(&mut out, &rows)?;
            out.flush()?;
            let mut manifest = RunManifest::new(
                "kickmap",
                None,
                KickmapParams {
                    kick_matrix: a.as_slice().to_vec(),
                    kick_offset: c,
                    r,
                    deltas,
                },
            );
            manifest.write(path, started.elapsed())?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_kick_table(&mut lock, &rows)?;
            lock.flush()?;
        }
    }
    Ok(())
}
