//! Single-experiment runner: config in, structured record out. The solve
//! path is fully deterministic, so identical configs reproduce identical
//! iteration counts and residual histories.

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use helmholtz_mg::grid::{
    absorbing_layer, point_source_rhs, ppw_frequency, AttenuationProfile, ComplexField,
};
use helmholtz_mg::intergrid::IntergridScheme;
use helmholtz_mg::krylov::{convergence_factor, fgmres};
use helmholtz_mg::multigrid::{build_hierarchy, CycleKind, MgConfig, MgHierarchy};
use helmholtz_mg::operator::assemble_helmholtz;
use helmholtz_mg::vanka::PatchKind;

use crate::models::{gen_model, ModelSpec};
use crate::raster::{load_raster, proportional_grid};

/// CLI- and serde-friendly mirrors of the solver enums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CycleArg {
    V,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SmootherArg {
    Jacobi,
    Element,
    Plus,
    Rb,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    Linear,
    Cubic,
    Mixed,
    LevelDependent,
}

impl From<CycleArg> for CycleKind {
    fn from(v: CycleArg) -> Self {
        match v {
            CycleArg::V => CycleKind::V,
            CycleArg::W => CycleKind::W,
        }
    }
}

impl From<SmootherArg> for PatchKind {
    fn from(v: SmootherArg) -> Self {
        match v {
            SmootherArg::Jacobi => PatchKind::Jacobi,
            SmootherArg::Element => PatchKind::Element,
            SmootherArg::Plus => PatchKind::Plus,
            SmootherArg::Rb => PatchKind::Rb,
            SmootherArg::Full => PatchKind::Full,
        }
    }
}

impl From<SchemeArg> for IntergridScheme {
    fn from(v: SchemeArg) -> Self {
        match v {
            SchemeArg::Linear => IntergridScheme::Linear,
            SchemeArg::Cubic => IntergridScheme::Cubic,
            SchemeArg::Mixed => IntergridScheme::Mixed,
            SchemeArg::LevelDependent => IntergridScheme::LevelDependent,
        }
    }
}

/// Everything that defines one solve. Serializes into the RunRecord so a
/// record can be re-run from its own echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub dim: usize,
    /// Per-axis cell counts; may be empty for raster models, whose grid
    /// comes from the file header.
    pub cells: Vec<usize>,
    pub ppw: f64,
    pub levels: usize,
    pub cycle: CycleArg,
    pub smoother: SmootherArg,
    pub scheme: SchemeArg,
    pub alpha: f64,
    pub restart: usize,
    pub tol: f64,
    pub maxiter: usize,
    /// Damping override, finest level first; entries replace the tuned
    /// defaults positionally, deeper levels keep their defaults.
    pub damping: Option<Vec<f64>>,
    pub abc_width: usize,
}

impl ExperimentConfig {
    /// Defaults shared by every experiment: 10 points per wavelength,
    /// GMRES(5), relative tolerance 1e-6, a 20-cell absorbing rim.
    pub fn new(
        model: ModelSpec,
        dim: usize,
        cells: Vec<usize>,
        levels: usize,
        cycle: CycleArg,
        smoother: SmootherArg,
        scheme: SchemeArg,
        alpha: f64,
    ) -> Self {
        ExperimentConfig {
            model,
            dim,
            cells,
            ppw: 10.0,
            levels,
            cycle,
            smoother,
            scheme,
            alpha,
            restart: 5,
            tol: 1e-6,
            maxiter: 400,
            damping: None,
            abc_width: 20,
        }
    }
}

/// The structured result of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub iterations: usize,
    pub converged: bool,
    /// Residual reduction factor per iteration after a 5-iteration warm-up;
    /// 0 when the run is too short to estimate.
    pub c_f: f64,
    pub operator_complexity: f64,
    /// Stencil radius per level, finest first.
    pub level_radii: Vec<usize>,
    /// Relative residual per iteration, starting from the initial guess.
    pub residual_history: Vec<f64>,
    pub wall_time_s: f64,
}

/// Assembled problem plus its preconditioner hierarchy; shared by the
/// Krylov and stationary drivers.
pub struct Assembled {
    pub hier: MgHierarchy,
    pub h_op: helmholtz_mg::operator::StencilOperator,
    pub q: ComplexField,
}

pub fn assemble(cfg: &ExperimentConfig) -> Result<Assembled> {
    let (grid, model) = match &cfg.model {
        ModelSpec::Raster { path, extend_depth } => {
            let model = load_raster(path, *extend_depth)?;
            if !cfg.cells.is_empty() && cfg.cells != model.grid.cells[..cfg.dim] {
                bail!(
                    "config cells {:?} disagree with raster cells {:?}",
                    cfg.cells,
                    &model.grid.cells[..cfg.dim]
                );
            }
            (model.grid, model)
        }
        spec => {
            let grid = proportional_grid(cfg.dim, &cfg.cells)?;
            let model = gen_model(spec, &grid)?;
            (grid, model)
        }
    };

    let omega = ppw_frequency(&grid, &model, cfg.ppw);
    let att = if cfg.abc_width == 0 {
        AttenuationProfile::none(grid)
    } else {
        absorbing_layer(&grid, cfg.abc_width, 1.0)?
    };
    let (h_op, m_op) = assemble_helmholtz(&grid, &model, omega, &att)?;

    let mut mg = MgConfig::new(
        cfg.levels,
        cfg.cycle.into(),
        cfg.scheme.into(),
        cfg.smoother.into(),
        cfg.alpha,
        omega,
        cfg.dim,
    );
    if let Some(d) = &cfg.damping {
        // partial overrides keep the tuned defaults for deeper levels
        for (i, &w) in d.iter().enumerate() {
            if i < mg.per_level_damping.len() {
                mg.per_level_damping[i] = w;
            } else {
                mg.per_level_damping.push(w);
            }
        }
    }
    let hier = build_hierarchy(&h_op, &m_op, &mg).context("hierarchy build failed")?;
    let q = point_source_rhs(&grid);
    Ok(Assembled { hier, h_op, q })
}

fn record_from(
    cfg: &ExperimentConfig,
    asm: &Assembled,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
    wall_time_s: f64,
) -> Result<RunRecord> {
    let levels = asm.hier.num_levels();
    let ops: Vec<_> = (1..=levels).map(|l| asm.hier.level_op(l)).collect();
    let operator_complexity = helmholtz_mg::intergrid::operator_complexity(ops.iter().copied())?;
    let level_radii = ops.iter().map(|op| op.radius).collect();
    let c_f = convergence_factor(&history, 5).unwrap_or(0.0);
    Ok(RunRecord {
        config: cfg.clone(),
        iterations,
        converged,
        c_f,
        operator_complexity,
        level_radii,
        residual_history: history,
        wall_time_s,
    })
}

/// FGMRES solve of H u = q, right-preconditioned by one multigrid cycle on
/// the shifted operator, from a zero initial guess.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let asm = assemble(cfg)?;
    let grid = asm.h_op.grid;
    let zero = ComplexField::zeros(grid);
    let prec = |r: &ComplexField| asm.hier.cycle(r, &ComplexField::zeros(grid));
    let (_, report) =
        fgmres(&asm.h_op, prec, &asm.q, cfg.restart, cfg.tol, cfg.maxiter, &zero)?;
    record_from(
        cfg,
        &asm,
        report.iterations,
        report.converged,
        report.residual_history,
        start.elapsed().as_secs_f64(),
    )
}

/// Stationary iteration u <- cycle(q, u). Meaningful as a solver only when
/// the hierarchy shift is zero, so the cycle targets the system operator
/// itself; it measures the cycle's own convergence factor.
pub fn run_stationary(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let start = Instant::now();
    let asm = assemble(cfg)?;
    let grid = asm.h_op.grid;
    let mut u = ComplexField::zeros(grid);
    let q_norm = asm.q.norm();
    if q_norm == 0.0 {
        bail!("stationary run needs a nonzero right-hand side");
    }
    let mut history = vec![1.0];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.maxiter {
        u = asm.hier.cycle(&asm.q, &u)?;
        iterations += 1;
        let rel = asm.h_op.residual(&u, &asm.q)?.norm() / q_norm;
        history.push(rel);
        if rel < cfg.tol {
            converged = true;
            break;
        }
        if !rel.is_finite() || rel > 1e12 {
            break;
        }
    }
    record_from(cfg, &asm, iterations, converged, history, start.elapsed().as_secs_f64())
}

/// Exhaustive damping search on one level: levels above stay at their
/// configured values, `level` sweeps `w_grid`, and the w with the fewest
/// iterations wins (ties resolve to the smaller w). Returns the winner and
/// the full sweep as (w, iterations) pairs; non-converged runs count as
/// maxiter + 1 iterations.
pub fn tune_damping(
    cfg: &ExperimentConfig,
    level: usize,
    w_grid: &[f64],
) -> Result<(f64, Vec<(f64, usize)>)> {
    if level == 0 || level >= cfg.levels {
        bail!("tune level must name a smoothing level: 1..{}", cfg.levels - 1);
    }
    if w_grid.is_empty() {
        bail!("tune needs a non-empty damping grid");
    }
    // baseline per-level damping the sweep perturbs; pull defaults from the
    // multigrid config when the experiment does not override them
    let defaults =
        MgConfig::new(cfg.levels, cfg.cycle.into(), cfg.scheme.into(), cfg.smoother.into(), cfg.alpha, 1.0, cfg.dim);
    let smoothing_levels = cfg.levels - 1;
    let mut base: Vec<f64> = (1..=smoothing_levels.max(defaults.per_level_damping.len()))
        .map(|l| defaults.damping_for_level(l))
        .collect();
    if let Some(d) = &cfg.damping {
        let take = d.len().min(base.len());
        base[..take].copy_from_slice(&d[..take]);
    }

    let mut sweep = Vec::with_capacity(w_grid.len());
    let mut best: Option<(f64, usize)> = None;
    for &w in w_grid {
        let mut damping = base.clone();
        damping[level - 1] = w;
        let mut trial = cfg.clone();
        trial.damping = Some(damping);
        let rec = run_experiment(&trial)?;
        let cost = if rec.converged { rec.iterations } else { cfg.maxiter + 1 };
        sweep.push((w, cost));
        let better = match best {
            None => true,
            Some((_, b)) => cost < b,
        };
        if better {
            best = Some((w, cost));
        }
    }
    Ok((best.unwrap().0, sweep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            ModelSpec::Homogeneous,
            2,
            vec![32, 32],
            2,
            CycleArg::V,
            SmootherArg::Rb,
            SchemeArg::LevelDependent,
            0.0,
        );
        cfg.abc_width = 4;
        cfg
    }

    #[test]
    fn config_echo_round_trips_through_json() {
        let cfg = small_cfg();
        let rec = run_experiment(&cfg).unwrap();
        let json = serde_json::to_string(&rec).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.iterations, rec.iterations);
        assert_eq!(back.residual_history, rec.residual_history);
    }

    #[test]
    fn identical_configs_reproduce_identical_runs() {
        let cfg = small_cfg();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.residual_history, b.residual_history);
        assert!(a.converged);
    }

    #[test]
    fn stationary_two_level_solver_converges_without_shift() {
        let mut cfg = small_cfg();
        cfg.scheme = SchemeArg::Cubic;
        cfg.tol = 1e-9;
        cfg.maxiter = 200;
        let rec = run_stationary(&cfg).unwrap();
        assert!(rec.converged, "stationary run stalled at {:?}", rec.residual_history.last());
        assert!(rec.c_f > 0.0 && rec.c_f < 1.0);
    }

    #[test]
    fn raster_model_drives_a_solve() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("hmg-exp-raster-{}.txt", std::process::id()));
        let grid = crate::raster::proportional_grid(2, &[32, 32]).unwrap();
        let model = gen_model(&ModelSpec::Layered, &grid).unwrap();
        crate::raster::write_raster(&path, &model).unwrap();

        let mut cfg = small_cfg();
        cfg.model = ModelSpec::Raster { path: path.clone(), extend_depth: 0 };
        cfg.cells = vec![];
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec.converged);
    }

    #[test]
    fn tune_with_a_single_candidate_returns_it() {
        let cfg = small_cfg();
        let (best, sweep) = tune_damping(&cfg, 1, &[0.77]).unwrap();
        assert_eq!(best, 0.77);
        assert_eq!(sweep.len(), 1);
    }

    #[test]
    fn tune_prefers_fewer_iterations_then_smaller_w() {
        let cfg = small_cfg();
        let (best, sweep) = tune_damping(&cfg, 1, &[0.63, 0.83, 1.03]).unwrap();
        let best_cost = sweep.iter().find(|(w, _)| *w == best).unwrap().1;
        for (w, cost) in &sweep {
            assert!(best_cost < *cost || (best_cost == *cost && best <= *w));
        }
    }
}
