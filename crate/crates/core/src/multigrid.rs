//! Multigrid on the complex-shifted operator: a Galerkin hierarchy built
//! once from the finest shifted matrix, additive patch smoothing with
//! per-level damping, V and W cycles, and a direct solve on the coarsest
//! grid.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::grid::{ComplexField, GridSpec};
use crate::intergrid::{self, IntergridOp, IntergridScheme};
use crate::linalg::DenseLu;
use crate::operator::{apply_shift, StencilOperator};
use crate::vanka::{self, PatchKind, VankaPatchSet};
use crate::Error;

/// Largest unknown count the dense coarse fallback accepts.
const DENSE_COARSE_LIMIT: usize = 4096;

/// A level whose grid would drop below this many cells on any axis is not
/// created; the hierarchy truncates there instead.
const MIN_COARSE_CELLS: usize = 4;

/// Cycle shape: V recurses once into the coarser level, W twice with the
/// iterate carried between the two visits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleKind {
    V,
    W,
}

/// Solver configuration. `per_level_damping` is indexed by level (entry 0 is
/// the finest); hierarchies deeper than the list reuse its last entry.
#[derive(Clone, Debug)]
pub struct MgConfig {
    pub levels: usize,
    pub cycle: CycleKind,
    /// Pre-smoothing sweeps per level visit.
    pub nu1: usize,
    /// Post-smoothing sweeps per level visit.
    pub nu2: usize,
    pub scheme: IntergridScheme,
    pub smoother: PatchKind,
    /// Shift strength: the hierarchy is built from H_s = H + i alpha omega^2 M.
    pub alpha: f64,
    /// Angular frequency; sets the shift magnitude together with `alpha`.
    pub omega: f64,
    pub per_level_damping: Vec<f64>,
}

impl MgConfig {
    /// Configuration with one pre- and one post-smoothing sweep and the
    /// tuned damping defaults for the smoother kind.
    pub fn new(
        levels: usize,
        cycle: CycleKind,
        scheme: IntergridScheme,
        smoother: PatchKind,
        alpha: f64,
        omega: f64,
        dim: usize,
    ) -> Self {
        MgConfig {
            levels,
            cycle,
            nu1: 1,
            nu2: 1,
            scheme,
            smoother,
            alpha,
            omega,
            per_level_damping: default_damping(smoother, dim),
        }
    }

    /// Damping for a 1-based level; the last list entry covers all deeper
    /// levels.
    pub fn damping_for_level(&self, level: usize) -> f64 {
        let idx = (level - 1).min(self.per_level_damping.len() - 1);
        self.per_level_damping[idx]
    }
}

/// Tuned per-level damping for each smoother at 10 points per wavelength,
/// finest level first. Values exist for four levels; deeper levels reuse the
/// fourth. The full patch and the 3D red-black patch have no tuned values
/// and borrow the plus-patch column.
pub fn default_damping(kind: PatchKind, dim: usize) -> Vec<f64> {
    use PatchKind::*;
    match (dim, kind) {
        (2, Jacobi) => vec![0.89, 0.9, 0.3, 0.71],
        (2, Element) => vec![0.97, 0.66, 0.48, 0.88],
        (2, Plus) | (2, Full) => vec![0.87, 0.57, 0.55, 0.74],
        (2, Rb) => vec![0.83, 0.5, 0.4, 0.65],
        (3, Jacobi) => vec![0.6, 0.4, 0.3, 0.5],
        (3, Element) => vec![1.1, 0.7, 0.45, 0.6],
        (3, Plus) | (3, Rb) | (3, Full) => vec![0.92, 0.55, 0.45, 0.55],
        _ => panic!("default_damping: dim must be 2 or 3"),
    }
}

struct MgLevel {
    op: StencilOperator,
    /// None only on the coarsest level, which is solved directly.
    smoother: Option<VankaPatchSet>,
}

enum CoarseSolver {
    Sparse(faer::sparse::linalg::solvers::Lu<usize, Complex64>),
    Dense(DenseLu),
}

/// Immutable after construction; concurrent cycles with distinct right-hand
/// sides share one hierarchy safely.
pub struct MgHierarchy {
    config: MgConfig,
    levels: Vec<MgLevel>,
    /// (restriction, prolongation) for each level transition, finest first.
    transfers: Vec<(IntergridOp, IntergridOp)>,
    coarse: CoarseSolver,
    truncated: bool,
    coarse_solves: AtomicU64,
}

impl std::fmt::Debug for MgHierarchy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MgHierarchy")
            .field("levels", &self.levels.len())
            .field("finest_cells", &self.finest_grid().cells)
            .field("coarsest_cells", &self.coarsest_grid().cells)
            .field("truncated", &self.truncated)
            .finish_non_exhaustive()
    }
}

impl MgHierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// True when coarsening stopped before `config.levels` because the next
    /// grid would have fewer than 4 cells on some axis.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn config(&self) -> &MgConfig {
        &self.config
    }

    /// Shifted operator of a 1-based level (1 is the finest).
    pub fn level_op(&self, level: usize) -> &StencilOperator {
        &self.levels[level - 1].op
    }

    pub fn finest_grid(&self) -> GridSpec {
        self.levels[0].op.grid
    }

    pub fn coarsest_grid(&self) -> GridSpec {
        self.levels.last().unwrap().op.grid
    }

    /// Total stencil nonzeros across levels over the finest level's.
    pub fn operator_complexity(&self) -> f64 {
        intergrid::operator_complexity(self.levels.iter().map(|l| &l.op))
            .expect("hierarchy has at least one level")
    }

    /// Direct coarsest-grid solves performed so far (all cycles, all
    /// threads).
    pub fn coarse_solve_count(&self) -> u64 {
        self.coarse_solves.load(Ordering::Relaxed)
    }

    pub fn reset_coarse_solve_count(&self) {
        self.coarse_solves.store(0, Ordering::Relaxed);
    }

    /// One V- or W-cycle for H_s u = q starting from the iterate `u`.
    pub fn cycle(&self, q: &ComplexField, u: &ComplexField) -> Result<ComplexField, Error> {
        let fine = self.finest_grid();
        if q.grid != fine || u.grid != fine {
            return Err(Error::InvalidArgument(
                "cycle: right-hand side and iterate must live on the finest grid".into(),
            ));
        }
        let mut out = u.clone();
        self.run_level(0, q, &mut out)?;
        Ok(out)
    }

    /// Direct solve on the coarsest level via the stored factorization.
    pub fn coarse_solve(&self, r: &ComplexField) -> Result<ComplexField, Error> {
        if r.grid != self.coarsest_grid() {
            return Err(Error::InvalidArgument(
                "coarse_solve: field does not live on the coarsest grid".into(),
            ));
        }
        self.coarse_solves.fetch_add(1, Ordering::Relaxed);
        let mut out = r.clone();
        match &self.coarse {
            CoarseSolver::Dense(lu) => lu.solve_in_place(&mut out.values),
            CoarseSolver::Sparse(lu) => {
                use faer::linalg::solvers::Solve;
                let n = out.values.len();
                let mut rhs = faer::Mat::<Complex64>::zeros(n, 1);
                for i in 0..n {
                    rhs[(i, 0)] = out.values[i];
                }
                let sol = lu.solve(&rhs);
                for i in 0..n {
                    out.values[i] = sol[(i, 0)];
                }
            }
        }
        Ok(out)
    }

    fn run_level(&self, idx: usize, q: &ComplexField, u: &mut ComplexField) -> Result<(), Error> {
        if idx + 1 == self.levels.len() {
            *u = self.coarse_solve(q)?;
            return Ok(());
        }
        let op = &self.levels[idx].op;
        let ps = self.levels[idx].smoother.as_ref().expect("non-coarsest level has a smoother");

        for _ in 0..self.config.nu1 {
            let r = op.residual(u, q)?;
            vanka::accumulate_correction(ps, &r.values, ps.damping(), &mut u.values);
        }

        let (r_op, p_op) = self.transfers[idx];
        let r = op.residual(u, q)?;
        let rc = intergrid::apply_restriction(r_op, &r)?;
        let mut ec = ComplexField::zeros(self.levels[idx + 1].op.grid);
        let recursions = match self.config.cycle {
            CycleKind::V => 1,
            CycleKind::W => 2,
        };
        // The W-cycle's second visit continues from the first visit's
        // iterate, so its pre-smoother sees the updated coarse residual.
        for _ in 0..recursions {
            self.run_level(idx + 1, &rc, &mut ec)?;
        }
        let e = intergrid::apply_prolongation(p_op, &ec)?;
        for (ui, ei) in u.values.iter_mut().zip(&e.values) {
            *ui += ei;
        }

        for _ in 0..self.config.nu2 {
            let r = op.residual(u, q)?;
            vanka::accumulate_correction(ps, &r.values, ps.damping(), &mut u.values);
        }
        Ok(())
    }
}

/// Shift the finest operator once, coarsen it by Galerkin products under the
/// configured transfer scheme, factor the patch smoothers per level, and
/// factor the coarsest operator directly.
pub fn build_hierarchy(
    h_op: &StencilOperator,
    m_op: &StencilOperator,
    cfg: &MgConfig,
) -> Result<MgHierarchy, Error> {
    if cfg.levels == 0 {
        return Err(Error::InvalidArgument("build_hierarchy: levels must be at least 1".into()));
    }
    if cfg.omega <= 0.0 {
        return Err(Error::InvalidArgument("build_hierarchy: omega must be positive".into()));
    }
    if cfg.alpha < 0.0 {
        return Err(Error::InvalidArgument(
            "build_hierarchy: alpha must be nonnegative; a negative shift would cancel attenuation".into(),
        ));
    }
    if cfg.per_level_damping.is_empty() || cfg.per_level_damping.len() < cfg.levels.min(4) {
        return Err(Error::InvalidArgument(format!(
            "build_hierarchy: damping list has {} entries, need at least {}",
            cfg.per_level_damping.len(),
            cfg.levels.min(4).max(1)
        )));
    }

    let mut ops = vec![apply_shift(h_op, m_op, cfg.alpha, cfg.omega)?];
    let mut transfers = Vec::new();
    let mut truncated = false;
    while ops.len() < cfg.levels {
        let cur = ops.last().unwrap();
        let g = cur.grid;
        if (0..g.dim).any(|a| g.cells[a] / 2 < MIN_COARSE_CELLS) {
            truncated = true;
            break;
        }
        if let Some(a) = (0..g.dim).find(|&a| g.cells[a] % 2 != 0) {
            return Err(Error::InvalidArgument(format!(
                "build_hierarchy: level {} has an odd cell count {} on axis {}; grid does not support {} levels",
                ops.len(),
                g.cells[a],
                a,
                cfg.levels
            )));
        }
        let (r, p) = intergrid::select_intergrid(cfg.scheme, ops.len());
        let coarse = intergrid::galerkin_coarse(r, cur, p)?;
        transfers.push((r, p));
        ops.push(coarse);
    }
    if truncated {
        eprintln!(
            "warning: hierarchy truncated at {} levels (requested {}); the next grid would have \
             fewer than {} cells on some axis",
            ops.len(),
            cfg.levels,
            MIN_COARSE_CELLS
        );
    }

    let coarse = factor_coarsest(ops.last().unwrap())?;
    let nlev = ops.len();
    let mut levels = Vec::with_capacity(nlev);
    for (i, op) in ops.into_iter().enumerate() {
        let smoother = if i + 1 < nlev {
            let layout = vanka::build_patches(&op.grid, cfg.smoother)?;
            Some(vanka::factor_patches(&op, &layout, cfg.damping_for_level(i + 1))?)
        } else {
            None
        };
        levels.push(MgLevel { op, smoother });
    }

    Ok(MgHierarchy {
        config: cfg.clone(),
        levels,
        transfers,
        coarse,
        truncated,
        coarse_solves: AtomicU64::new(0),
    })
}

/// Sparse direct factorization; below `DENSE_COARSE_LIMIT` unknowns a dense
/// factorization backstops a sparse failure.
fn factor_coarsest(op: &StencilOperator) -> Result<CoarseSolver, Error> {
    let n = op.grid.num_nodes();
    let triplets: Vec<faer::sparse::Triplet<usize, usize, Complex64>> = op
        .triplets()
        .into_iter()
        .map(|(r, c, v)| faer::sparse::Triplet::new(r, c, v))
        .collect();
    let sparse_err = match faer::sparse::SparseColMat::try_new_from_triplets(n, n, &triplets) {
        Ok(mat) => match mat.sp_lu() {
            Ok(lu) => return Ok(CoarseSolver::Sparse(lu)),
            Err(e) => format!("{e:?}"),
        },
        Err(e) => format!("{e:?}"),
    };
    if n <= DENSE_COARSE_LIMIT {
        let mut dense = vec![Complex64::new(0.0, 0.0); n * n];
        for (r, c, v) in op.triplets() {
            dense[r * n + c] = v;
        }
        if let Ok(lu) = DenseLu::factor(dense, n) {
            return Ok(CoarseSolver::Dense(lu));
        }
    }
    Err(Error::CoarseFactorization { level: op.level, reason: sparse_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, ppw_frequency, AttenuationProfile, SlownessModel};
    use crate::operator::assemble_helmholtz;

    fn setup(dim: usize, cells: usize) -> (StencilOperator, StencilOperator, f64) {
        let grid = build_grid(dim, &vec![cells; dim], &vec![1.0; dim]).unwrap();
        let model = SlownessModel::new(grid, vec![1.0; grid.num_nodes()]).unwrap();
        let omega = ppw_frequency(&grid, &model, 10.0);
        let att = AttenuationProfile::none(grid);
        let (h, m) = assemble_helmholtz(&grid, &model, omega, &att).unwrap();
        (h, m, omega)
    }

    fn config(levels: usize, cycle: CycleKind, alpha: f64, omega: f64) -> MgConfig {
        MgConfig::new(
            levels,
            cycle,
            IntergridScheme::LevelDependent,
            PatchKind::Rb,
            alpha,
            omega,
            2,
        )
    }

    fn rand_field(grid: GridSpec, seed: u64) -> ComplexField {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut f = ComplexField::zeros(grid);
        for v in f.values.iter_mut() {
            *v = Complex64::new(next(), next());
        }
        f
    }

    #[test]
    fn one_level_hierarchy_is_a_direct_solve() {
        let (h, m, omega) = setup(2, 8);
        let hier = build_hierarchy(&h, &m, &config(1, CycleKind::V, 0.0, omega)).unwrap();
        assert_eq!(hier.num_levels(), 1);
        let q = rand_field(h.grid, 3);
        let u = hier.cycle(&q, &ComplexField::zeros(h.grid)).unwrap();
        let r = hier.level_op(1).residual(&u, &q).unwrap();
        assert!(r.norm() / q.norm() <= 1e-12);
        assert_eq!(hier.coarse_solve_count(), 1);
    }

    #[test]
    fn zero_alpha_keeps_the_operator() {
        let (h, m, omega) = setup(2, 16);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, 0.0, omega)).unwrap();
        assert_eq!(hier.level_op(1), &h);
        let (r, p) = intergrid::select_intergrid(IntergridScheme::LevelDependent, 1);
        let coarse = intergrid::galerkin_coarse(r, &h, p).unwrap();
        assert_eq!(hier.level_op(2), &coarse);
    }

    #[test]
    fn shift_is_inherited_not_reapplied() {
        let (h, m, omega) = setup(2, 16);
        let alpha = 0.5;
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, alpha, omega)).unwrap();
        let hs = apply_shift(&h, &m, alpha, omega).unwrap();
        let (r, p) = intergrid::select_intergrid(IntergridScheme::LevelDependent, 1);
        let coarse = intergrid::galerkin_coarse(r, &hs, p).unwrap();
        assert_eq!(hier.level_op(2), &coarse);
    }

    #[test]
    fn level_dependent_radii_stay_bounded() {
        let (h, m, omega) = setup(2, 64);
        let hier = build_hierarchy(&h, &m, &config(4, CycleKind::V, 0.15, omega)).unwrap();
        assert_eq!(hier.num_levels(), 4);
        for l in 1..=4 {
            assert!(hier.level_op(l).radius <= 2, "level {} radius {}", l, hier.level_op(l).radius);
        }
    }

    #[test]
    fn coarse_solve_counts_per_cycle_shape() {
        let (h, m, omega) = setup(2, 32);
        let q = rand_field(h.grid, 11);
        let u0 = ComplexField::zeros(h.grid);

        let hier = build_hierarchy(&h, &m, &config(3, CycleKind::V, 0.15, omega)).unwrap();
        hier.cycle(&q, &u0).unwrap();
        assert_eq!(hier.coarse_solve_count(), 1);

        let hier = build_hierarchy(&h, &m, &config(3, CycleKind::W, 0.15, omega)).unwrap();
        hier.cycle(&q, &u0).unwrap();
        assert_eq!(hier.coarse_solve_count(), 4);

        hier.reset_coarse_solve_count();
        assert_eq!(hier.coarse_solve_count(), 0);
    }

    #[test]
    fn hierarchy_truncates_below_minimum_grid() {
        let (h, m, omega) = setup(2, 16);
        let hier = build_hierarchy(&h, &m, &config(7, CycleKind::V, 0.15, omega)).unwrap();
        assert!(hier.truncated());
        assert_eq!(hier.num_levels(), 3);
        assert_eq!(hier.coarsest_grid().cells[0], 4);
    }

    #[test]
    fn odd_intermediate_grid_is_rejected() {
        let (h, m, omega) = setup(2, 18);
        let err = build_hierarchy(&h, &m, &config(3, CycleKind::V, 0.15, omega)).unwrap_err();
        match err {
            Error::InvalidArgument(msg) => assert!(msg.contains("odd"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn short_damping_list_is_rejected() {
        let (h, m, omega) = setup(2, 32);
        let mut cfg = config(3, CycleKind::V, 0.15, omega);
        cfg.per_level_damping = vec![0.8, 0.5];
        assert!(build_hierarchy(&h, &m, &cfg).is_err());
    }

    #[test]
    fn damping_defaults_repeat_beyond_listed_levels() {
        assert_eq!(default_damping(PatchKind::Rb, 2), vec![0.83, 0.5, 0.4, 0.65]);
        let cfg = config(7, CycleKind::V, 0.15, 1.0);
        assert_eq!(cfg.damping_for_level(4), 0.65);
        assert_eq!(cfg.damping_for_level(7), 0.65);
    }

    #[test]
    fn cycle_is_affine_in_the_iterate() {
        let (h, m, omega) = setup(2, 8);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, 0.15, omega)).unwrap();
        let q = rand_field(h.grid, 21);
        let u1 = rand_field(h.grid, 22);
        let u2 = rand_field(h.grid, 23);
        let a = Complex64::new(0.3, 0.0);

        let mut mix = ComplexField::zeros(h.grid);
        for i in 0..mix.values.len() {
            mix.values[i] = a * u1.values[i] + (Complex64::new(1.0, 0.0) - a) * u2.values[i];
        }
        let c_mix = hier.cycle(&q, &mix).unwrap();
        let c1 = hier.cycle(&q, &u1).unwrap();
        let c2 = hier.cycle(&q, &u2).unwrap();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..c_mix.values.len() {
            let want = a * c1.values[i] + (Complex64::new(1.0, 0.0) - a) * c2.values[i];
            err = err.max((c_mix.values[i] - want).norm());
            scale = scale.max(want.norm());
        }
        assert!(err <= 1e-12 * scale.max(1.0), "affinity violated: {err}");
    }

    #[test]
    fn zero_input_stays_zero() {
        let (h, m, omega) = setup(2, 8);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::W, 0.15, omega)).unwrap();
        let zero = ComplexField::zeros(h.grid);
        let out = hier.cycle(&zero, &zero).unwrap();
        assert!(out.norm() == 0.0);
    }

    #[test]
    fn coarse_solve_hits_direct_accuracy() {
        let (h, m, omega) = setup(2, 16);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, 0.1, omega)).unwrap();
        let rc = rand_field(hier.coarsest_grid(), 7);
        let e = hier.coarse_solve(&rc).unwrap();
        let r = hier.level_op(2).residual(&e, &rc).unwrap();
        assert!(r.norm() / rc.norm() <= 1e-12);
    }

    #[test]
    fn coarse_solve_preserves_mirror_symmetry() {
        let (h, m, omega) = setup(2, 16);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, 0.1, omega)).unwrap();
        let cg = hier.coarsest_grid();
        let n = cg.nodes();
        let mut rc = ComplexField::zeros(cg);
        rc.values[cg.lin(n[0] / 2, n[1] / 2, 0)] = Complex64::new(1.0, 0.0);
        let e = hier.coarse_solve(&rc).unwrap();
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let a = e.values[cg.lin(ix, iy, 0)];
                let bx = e.values[cg.lin(n[0] - 1 - ix, iy, 0)];
                let by = e.values[cg.lin(ix, n[1] - 1 - iy, 0)];
                assert!((a - bx).norm() <= 1e-10 && (a - by).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn sparse_coarse_path_used_above_dense_limit() {
        // 128^2 with two levels leaves 65^2 = 4225 coarse unknowns, above the
        // dense limit, so this exercises the sparse factorization.
        let (h, m, omega) = setup(2, 128);
        let hier = build_hierarchy(&h, &m, &config(2, CycleKind::V, 0.1, omega)).unwrap();
        assert!(matches!(hier.coarse, CoarseSolver::Sparse(_)));
        let rc = rand_field(hier.coarsest_grid(), 13);
        let e = hier.coarse_solve(&rc).unwrap();
        let r = hier.level_op(2).residual(&e, &rc).unwrap();
        assert!(r.norm() / rc.norm() <= 1e-12);
    }

    #[test]
    fn three_dimensional_hierarchy_builds() {
        let (h, m, omega) = setup(3, 16);
        let cfg = MgConfig::new(
            3,
            CycleKind::W,
            IntergridScheme::LevelDependent,
            PatchKind::Element,
            0.4,
            omega,
            3,
        );
        let hier = build_hierarchy(&h, &m, &cfg).unwrap();
        assert_eq!(hier.num_levels(), 3);
        let q = rand_field(h.grid, 5);
        let u1 = hier.cycle(&q, &ComplexField::zeros(h.grid)).unwrap();
        let res = hier.level_op(1).residual(&u1, &q).unwrap();
        assert!(res.norm() < q.norm(), "one W-cycle should reduce a random residual");
    }

    #[test]
    fn hierarchy_is_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<MgHierarchy>();
    }
}
