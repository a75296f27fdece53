//! Command-line harness: single solves, reproduction tables, LFA damping
//! sweeps, and per-level damping tuning. Exit codes: 0 success, 2 when a
//! table comparison fails, 1 on any error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use hmg::experiment::{run_experiment, tune_damping, CycleArg, ExperimentConfig, SchemeArg, SmootherArg};
use hmg::models::ModelSpec;
use hmg::tables::{run_table, sweep_argmin, Scale, TableName};

use helmholtz_mg::lfa::{damping_sweep, SweepMode};
use helmholtz_mg::vanka::PatchKind;
use num_complex::Complex64;

#[derive(Parser)]
#[command(name = "hmg", version, about = "Helmholtz multigrid experiment harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and emit its record as JSON.
    Solve(SolveArgs),
    /// Reproduce a named results table and compare against references.
    Table(TableArgs),
    /// Sweep damping values through an LFA factor.
    Lfa(LfaArgs),
    /// Exhaustive damping search on one level, deeper levels fixed.
    Tune(TuneArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKindArg {
    Homogeneous,
    Linear,
    Wedge,
    Layered,
    Raster,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value_t = ModelKindArg::Homogeneous)]
    model: ModelKindArg,
    /// Slowness raster file; required when --model raster.
    #[arg(long)]
    raster_path: Option<PathBuf>,
    /// Cells appended at depth by replicating the raster's bottom layer.
    #[arg(long, default_value_t = 0)]
    extend_depth: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Comma-separated cells per axis; empty takes the raster's grid.
    #[arg(long, value_delimiter = ',')]
    cells: Vec<usize>,
    /// Grid points per wavelength; sets the frequency.
    #[arg(long, default_value_t = 10.0)]
    ppw: f64,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = CycleArg::W)]
    cycle: CycleArg,
    #[arg(long, value_enum, default_value_t = SmootherArg::Rb)]
    smoother: SmootherArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::LevelDependent)]
    scheme: SchemeArg,
    /// Imaginary shift strength of the preconditioner operator.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    restart: usize,
    /// Relative-residual stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 400)]
    maxiter: usize,
    /// Comma-separated damping overrides, finest level first.
    #[arg(long, value_delimiter = ',')]
    damping: Option<Vec<f64>>,
    /// Absorbing rim width in cells; 0 disables attenuation.
    #[arg(long, default_value_t = 20)]
    abc_width: usize,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolveArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let model = match self.model {
            ModelKindArg::Homogeneous => ModelSpec::Homogeneous,
            ModelKindArg::Linear => ModelSpec::Linear,
            ModelKindArg::Wedge => ModelSpec::Wedge,
            ModelKindArg::Layered => ModelSpec::Layered,
            ModelKindArg::Raster => ModelSpec::Raster {
                path: self
                    .raster_path
                    .clone()
                    .context("--model raster requires --raster-path")?,
                extend_depth: self.extend_depth,
            },
        };
        if self.model != ModelKindArg::Raster && self.cells.len() != self.dim {
            bail!("--cells must list {} axis counts, got {}", self.dim, self.cells.len());
        }
        Ok(ExperimentConfig {
            model,
            dim: self.dim,
            cells: self.cells.clone(),
            ppw: self.ppw,
            levels: self.levels,
            cycle: self.cycle,
            smoother: self.smoother,
            scheme: self.scheme,
            alpha: self.alpha,
            restart: self.restart,
            tol: self.tol,
            maxiter: self.maxiter,
            damping: self.damping.clone(),
            abc_width: self.abc_width,
        })
    }
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, value_enum)]
    name: TableName,
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    /// Experiment cells running concurrently.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long, default_value = "tables")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LfaModeArg {
    Smoothing,
    TwoGrid,
}

#[derive(Args)]
struct LfaArgs {
    #[arg(long, value_enum, default_value_t = SmootherArg::Rb)]
    patch: SmootherArg,
    #[arg(long, value_enum, default_value_t = LfaModeArg::TwoGrid)]
    mode: LfaModeArg,
    #[arg(long, default_value_t = 0.5)]
    w_min: f64,
    #[arg(long, default_value_t = 1.1)]
    w_max: f64,
    #[arg(long, default_value_t = 0.02)]
    w_step: f64,
    /// Frequency samples per axis.
    #[arg(long, default_value_t = 128)]
    resolution: usize,
    /// Grid points per wavelength defining the mass coefficient.
    #[arg(long, default_value_t = 10.0)]
    ppw: f64,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    solve: SolveArgs,
    /// Level whose damping is swept (1 is finest).
    #[arg(long, default_value_t = 1)]
    level: usize,
    #[arg(long, default_value_t = 0.5)]
    w_min: f64,
    #[arg(long, default_value_t = 1.1)]
    w_max: f64,
    #[arg(long, default_value_t = 0.05)]
    w_step: f64,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4)
}

fn grid_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !min.is_finite() || !(max >= min) {
        bail!("need w-min <= w-max and w-step > 0");
    }
    let count = ((max - min) / step).round() as usize + 1;
    if count > 10_000 {
        bail!("damping grid has {count} points; cap is 10000");
    }
    let mut out: Vec<f64> = (0..count).map(|i| min + step * i as f64).collect();
    // rounding may overshoot the endpoint by one step
    while out.last().is_some_and(|&w| w > max + 1e-9) {
        out.pop();
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Solve(args) => {
            let cfg = args.to_config()?;
            let rec = run_experiment(&cfg)?;
            eprintln!(
                "{} in {} iterations, c_f {:.4}, complexity {:.3}, {:.2} s",
                if rec.converged { "converged" } else { "NOT converged" },
                rec.iterations,
                rec.c_f,
                rec.operator_complexity,
                rec.wall_time_s
            );
            let json = serde_json::to_string_pretty(&rec)?;
            match &args.out {
                Some(path) => std::fs::write(path, json)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => println!("{json}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Table(args) => {
            let outcome = run_table(args.name, args.scale, args.jobs, &args.out_dir)?;
            print!("{}", std::fs::read_to_string(&outcome.txt_path)?);
            eprintln!("wrote {}", outcome.csv_path.display());
            eprintln!("wrote {}", outcome.txt_path.display());
            eprintln!("wrote {}", outcome.timing_path.display());
            if outcome.all_match {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("comparison failures present");
                Ok(ExitCode::from(2))
            }
        }
        Cmd::Lfa(args) => {
            let patch: PatchKind = args.patch.into();
            let mode = match args.mode {
                LfaModeArg::Smoothing => SweepMode::Smoothing,
                LfaModeArg::TwoGrid => SweepMode::TwoGrid,
            };
            if !(args.ppw > 0.0) {
                bail!("--ppw must be positive");
            }
            let k = 2.0 * std::f64::consts::PI / args.ppw;
            let sigma = Complex64::new(k * k, 0.0);
            let w_grid = grid_range(args.w_min, args.w_max, args.w_step)?;
            let sweep = damping_sweep(patch, &w_grid, 1.0, sigma, mode, args.resolution)?;
            println!("w,factor");
            for (w, factor) in &sweep {
                println!("{w:.4},{factor:.6}");
            }
            let (w_opt, best) = sweep_argmin(&sweep);
            eprintln!("optimum w {w_opt:.4} with factor {best:.6}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Tune(args) => {
            let cfg = args.solve.to_config()?;
            let w_grid = grid_range(args.w_min, args.w_max, args.w_step)?;
            let (best, sweep) = tune_damping(&cfg, args.level, &w_grid)?;
            println!("w,iterations");
            for (w, iters) in &sweep {
                println!("{w:.4},{iters}");
            }
            println!("best,{best:.4}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
