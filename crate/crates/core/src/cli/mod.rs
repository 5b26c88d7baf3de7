//! Command-line driver: `simulate`, `reconstruct` and `compare`.
//!
//! Every flag of `simulate` and `reconstruct` can also be given in a
//! `key = value` file passed with `--config`; flags win over the file and the
//! file wins over built-in defaults. Exit codes: 0 converged (or success),
//! 2 not converged, 1 usage or I/O error.

mod compare;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    add_noise, generate_phantom, read_sinogram, write_history, write_history_meta, write_sinogram,
    write_volume_with_meta, Metadata, NoiseSpec, PhantomSpec, RNG_ID,
};
use crate::error::{Error, Result};
use crate::geometry::{make_geometry, Projector, Sinogram, VolumeGrid};
use crate::problem::Problem;
use crate::regularizer::TvConfig;
use crate::solvers::{SolverKind, SolverOptions, SolverResult};
use crate::vecops;

pub use compare::{compare, format_summary, CompareReport, HistorySummary};
pub use config::{parse_dims, pick, pick_opt, ConfigFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Detector size relative to the volume edge.
pub const DETECTOR_RATIO: f64 = 91.0 / 64.0;

/// Default smoothing as a fraction of the estimated intensity range.
pub const TAU_RELATIVE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "tvtomo", version, about = "TV-regularized 3D tomographic reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a phantom, its clean sinogram and a noisy copy.
    Simulate(ConfigFlags),
    /// Reconstruct a volume from a sinogram file.
    Reconstruct(ConfigFlags),
    /// Summarize two or more convergence histories.
    Compare(CompareArgs),
}

/// Flags shared by `simulate` and `reconstruct`. Each one can also be set
/// in the config file under the same name.
#[derive(Debug, Default, Clone, Args)]
pub struct ConfigFlags {
    /// `key = value` file with any of the options below.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Volume size, `N` or `NX,NY,NZ`.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub detector_rows: Option<usize>,
    #[arg(long)]
    pub detector_cols: Option<usize>,
    #[arg(long)]
    pub pixel_size: Option<f64>,
    /// Noise norm relative to the clean sinogram norm.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub alpha: Option<f64>,
    /// Huber smoothing; defaults to a fraction of the estimated intensity range.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub solver: Option<SolverKind>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// GPBB nonmonotone memory.
    #[arg(long)]
    pub memory: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho_l: Option<f64>,
    #[arg(long)]
    pub mu_init: Option<f64>,
    #[arg(long)]
    pub l_init: Option<f64>,

    /// Phantom volume written by `simulate`.
    #[arg(long)]
    pub phantom: Option<PathBuf>,
    /// Clean sinogram written by `simulate`.
    #[arg(long)]
    pub clean: Option<PathBuf>,
    /// Noisy sinogram written by `simulate`; default input of `reconstruct`.
    #[arg(long)]
    pub noisy: Option<PathBuf>,
    /// Sinogram read by `reconstruct`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Reconstructed volume.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Convergence history (CSV); metadata goes to `<history>.meta`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

const CONFIG_KEYS: &[&str] = &[
    "dims",
    "spacing",
    "views",
    "detector-rows",
    "detector-cols",
    "pixel-size",
    "noise",
    "seed",
    "alpha",
    "tau",
    "solver",
    "eps",
    "max-iters",
    "memory",
    "sigma",
    "rho-l",
    "mu-init",
    "l-init",
    "phantom",
    "clean",
    "noisy",
    "input",
    "output",
    "history",
];

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// History files written by `reconstruct`.
    pub histories: Vec<PathBuf>,
    /// Tolerance for iterations-to-tolerance; defaults to each run's own.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Tighter run whose best objective stands in for the optimum.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Write all histories into one CSV for plotting.
    #[arg(long)]
    pub merged: Option<PathBuf>,
}

/// Fully resolved experiment settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub n_views: usize,
    pub detector_rows: usize,
    pub detector_cols: usize,
    pub pixel_size: f64,
    pub noise: NoiseSpec,
    pub alpha: f64,
    pub tau: Option<f64>,
    pub solver: SolverKind,
    pub options: SolverOptions,
    pub phantom: Option<PathBuf>,
    pub clean: Option<PathBuf>,
    pub noisy: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

pub fn default_detector_size(dims: [usize; 3]) -> usize {
    let n = *dims.iter().max().unwrap_or(&1);
    (n as f64 * DETECTOR_RATIO).round() as usize
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let dims = [16; 3];
        let det = default_detector_size(dims);
        ExperimentConfig {
            dims,
            spacing: 1.0,
            n_views: 19,
            detector_rows: det,
            detector_cols: det,
            pixel_size: 1.0,
            noise: NoiseSpec {
                relative_level: 0.01,
                seed: 1,
            },
            alpha: 0.01,
            tau: None,
            solver: SolverKind::Upn,
            options: SolverOptions::default(),
            phantom: None,
            clean: None,
            noisy: None,
            input: None,
            output: None,
            history: None,
        }
    }
}

impl ExperimentConfig {
    /// Merges flags, the optional config file and defaults.
    pub fn resolve(flags: &ConfigFlags) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => ConfigFile::load(path, CONFIG_KEYS)?,
            None => ConfigFile::default(),
        };
        let d = ExperimentConfig::default();
        let dims = match pick_opt(flags.dims.clone(), &file, "dims")? {
            Some(text) => parse_dims(&text)?,
            None => d.dims,
        };
        let spacing = pick(flags.spacing, &file, "spacing", d.spacing)?;
        let det = default_detector_size(dims);
        let o = &d.options;
        let options = SolverOptions {
            eps: pick(flags.eps, &file, "eps", o.eps)?,
            max_iters: pick(flags.max_iters, &file, "max-iters", o.max_iters)?,
            memory: pick(flags.memory, &file, "memory", o.memory)?,
            sigma: pick(flags.sigma, &file, "sigma", o.sigma)?,
            rho_l: pick(flags.rho_l, &file, "rho-l", o.rho_l)?,
            mu_init: pick(flags.mu_init, &file, "mu-init", o.mu_init)?,
            l_init: pick(flags.l_init, &file, "l-init", o.l_init)?,
            ..SolverOptions::default()
        };
        let cfg = ExperimentConfig {
            dims,
            spacing,
            n_views: pick(flags.views, &file, "views", d.n_views)?,
            detector_rows: pick(flags.detector_rows, &file, "detector-rows", det)?,
            detector_cols: pick(flags.detector_cols, &file, "detector-cols", det)?,
            pixel_size: pick(flags.pixel_size, &file, "pixel-size", spacing)?,
            noise: NoiseSpec {
                relative_level: pick(flags.noise, &file, "noise", d.noise.relative_level)?,
                seed: pick(flags.seed, &file, "seed", d.noise.seed)?,
            },
            alpha: pick(flags.alpha, &file, "alpha", d.alpha)?,
            tau: pick_opt(flags.tau, &file, "tau")?,
            solver: pick(flags.solver, &file, "solver", d.solver)?,
            options,
            phantom: pick_opt(flags.phantom.clone(), &file, "phantom")?,
            clean: pick_opt(flags.clean.clone(), &file, "clean")?,
            noisy: pick_opt(flags.noisy.clone(), &file, "noisy")?,
            input: pick_opt(flags.input.clone(), &file, "input")?,
            output: pick_opt(flags.output.clone(), &file, "output")?,
            history: pick_opt(flags.history.clone(), &file, "history")?,
        };
        cfg.options.validate()?;
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<VolumeGrid> {
        VolumeGrid::new(self.dims, [self.spacing; 3])
    }

    /// Sinogram read by `reconstruct`: `input`, else `noisy`.
    pub fn input_path(&self) -> Option<&Path> {
        self.input.as_deref().or(self.noisy.as_deref())
    }

    fn simulation_meta(&self) -> Metadata {
        vec![
            ("phantom".into(), "head".into()),
            ("noise_relative_level".into(), self.noise.relative_level.to_string()),
            ("noise_seed".into(), self.noise.seed.to_string()),
            ("rng".into(), RNG_ID.into()),
        ]
    }

    fn solver_meta(&self, tau: f64) -> Metadata {
        let o = &self.options;
        vec![
            ("solver".into(), self.solver.name().into()),
            ("alpha".into(), self.alpha.to_string()),
            ("tau".into(), tau.to_string()),
            ("eps".into(), o.eps.to_string()),
            ("max_iters".into(), o.max_iters.to_string()),
            ("memory".into(), o.memory.to_string()),
            ("sigma".into(), o.sigma.to_string()),
            ("rho_l".into(), o.rho_l.to_string()),
            ("mu_init".into(), o.mu_init.to_string()),
            ("l_init".into(), o.l_init.to_string()),
            ("x0".into(), "zero".into()),
        ]
    }
}

fn require<'a>(path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::invalid(format!("missing --{name} (flag or config key)")))
}

/// `TAU_RELATIVE` times the intensity range estimated as the largest
/// projection value over the longest volume edge. Falls back to
/// `TAU_RELATIVE` for all-zero data.
pub fn default_tau(data: &Sinogram, grid: &VolumeGrid) -> f64 {
    let peak = data.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let edge = grid.extent().into_iter().fold(0.0f64, f64::max);
    let range = peak / edge;
    if range > 0.0 && range.is_finite() {
        TAU_RELATIVE * range
    } else {
        TAU_RELATIVE
    }
}

#[derive(Clone, Debug)]
pub struct SimulateReport {
    pub phantom: crate::geometry::Volume,
    pub clean: Sinogram,
    pub noisy: Sinogram,
    /// `‖noisy − clean‖ / ‖clean‖`.
    pub noise_ratio: f64,
}

/// Builds phantom and sinograms without touching the file system.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(SimulateReport, Projector)> {
    let grid = cfg.grid()?;
    let geometry = make_geometry(cfg.n_views, cfg.detector_rows, cfg.detector_cols, cfg.pixel_size)?;
    let projector = Projector::new(geometry, grid);
    let phantom = generate_phantom(grid, &PhantomSpec::head())?;
    let clean = projector.forward(&phantom)?;
    let noisy = add_noise(&clean, &cfg.noise)?;
    let clean_norm = vecops::norm(clean.values());
    let noise_ratio = if clean_norm > 0.0 {
        vecops::norm(&vecops::sub(noisy.values(), clean.values())) / clean_norm
    } else {
        0.0
    };
    Ok((
        SimulateReport {
            phantom,
            clean,
            noisy,
            noise_ratio,
        },
        projector,
    ))
}

pub fn cmd_simulate(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<SimulateReport> {
    let phantom_path = require(&cfg.phantom, "phantom")?;
    let clean_path = require(&cfg.clean, "clean")?;
    let noisy_path = require(&cfg.noisy, "noisy")?;
    let (report, projector) = simulate(cfg)?;
    let meta = cfg.simulation_meta();
    write_volume_with_meta(&report.phantom, phantom_path, &meta[..1])?;
    let mut clean_meta = meta.clone();
    clean_meta.push(("content".into(), "clean".into()));
    write_sinogram(&report.clean, projector.geometry(), projector.grid(), clean_path, &clean_meta)?;
    let mut noisy_meta = meta;
    noisy_meta.push(("content".into(), "noisy".into()));
    noisy_meta.push(("noise_ratio".into(), report.noise_ratio.to_string()));
    write_sinogram(&report.noisy, projector.geometry(), projector.grid(), noisy_path, &noisy_meta)?;
    writeln!(out, "noise ratio: {:.12}", report.noise_ratio).map_err(|e| Error::io("<stdout>", e))?;
    Ok(report)
}

pub fn cmd_reconstruct(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<SolverResult> {
    let input = cfg
        .input_path()
        .ok_or_else(|| Error::invalid("missing --input (flag or config key)"))?;
    let output = require(&cfg.output, "output")?;
    let history = require(&cfg.history, "history")?;
    let file = read_sinogram(input)?;
    let tau = cfg.tau.unwrap_or_else(|| default_tau(&file.sinogram, &file.grid));
    let projector = Projector::new(file.geometry, file.grid);
    let problem = Problem::new(projector, file.sinogram, cfg.alpha, TvConfig::new(tau)?)?;
    let x0 = vec![0.0; file.grid.len()];
    let result = cfg.solver.solve(&problem, &x0, &cfg.options)?;

    let mut meta = cfg.solver_meta(tau);
    meta.push(("input".into(), input.display().to_string()));
    meta.extend(file.meta.iter().map(|(k, v)| (format!("input_{k}"), v.clone())));
    let summary: Metadata = vec![
        ("converged".into(), result.converged.to_string()),
        ("iterations".into(), result.iterations.to_string()),
        ("final_objective".into(), result.final_objective.to_string()),
        ("final_gradmap_norm_scaled".into(), result.final_gradmap_norm_scaled.to_string()),
        ("nu".into(), result.nu.to_string()),
    ];
    meta.extend(summary.iter().cloned());
    write_volume_with_meta(&problem.volume(result.x.clone())?, output, &meta)?;
    let io_err = |e| Error::io("<stdout>", e);
    if result.history.is_empty() {
        writeln!(out, "initial point already satisfies the tolerance; no history written").map_err(io_err)?;
    } else {
        write_history(&result.history, history)?;
        write_history_meta(history, &meta)?;
    }
    writeln!(
        out,
        "{}: {} after {} iterations, objective {:.12e}, scaled gradient map {:.3e}",
        cfg.solver,
        if result.converged { "converged" } else { "not converged" },
        result.iterations,
        result.final_objective,
        result.final_gradmap_norm_scaled,
    )
    .map_err(io_err)?;
    Ok(result)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Simulate(flags) => {
            ExperimentConfig::resolve(flags).and_then(|cfg| cmd_simulate(&cfg, out)).map(|_| EXIT_OK)
        }
        Command::Reconstruct(flags) => ExperimentConfig::resolve(flags)
            .and_then(|cfg| cmd_reconstruct(&cfg, out))
            .map(|r| if r.converged { EXIT_OK } else { EXIT_NOT_CONVERGED }),
        Command::Compare(args) => compare::cmd_compare(args, out, err).map(|_| EXIT_OK),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
