//! Intergrid transfers (full-weighting and cubic, in 2D and 3D), the
//! level-dependent selection rule, the Galerkin coarse-operator product, and
//! the operator-complexity metric.

use num_complex::Complex64;

use crate::grid::{ComplexField, GridSpec};
use crate::operator::StencilOperator;
use crate::Error;

/// Per-axis transfer profile; both build as Kronecker powers of one 1D vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferKind {
    /// [1, 2, 1]/4 per axis: full weighting / (bi,tri)linear interpolation.
    Linear,
    /// [1, 4, 6, 4, 1]/16 per axis: (bi,tri)cubic.
    Cubic,
}

impl TransferKind {
    pub fn radius(self) -> usize {
        match self {
            TransferKind::Linear => 1,
            TransferKind::Cubic => 2,
        }
    }

    /// 1D weights centered on offset 0; they sum to 1.
    pub fn weights(self) -> &'static [f64] {
        match self {
            TransferKind::Linear => &[0.25, 0.5, 0.25],
            TransferKind::Cubic => &[
                1.0 / 16.0,
                4.0 / 16.0,
                6.0 / 16.0,
                4.0 / 16.0,
                1.0 / 16.0,
            ],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransferRole {
    Restriction,
    Prolongation,
}

/// A restriction or prolongation between a grid and its 2:1 coarsening.
/// Prolongation acts as 2^dim times the transpose of the same-kind
/// restriction, so constants interpolate to constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntergridOp {
    pub kind: TransferKind,
    pub role: TransferRole,
}

/// Which (R, P) pair each level transition uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntergridScheme {
    /// Full weighting both ways on every level.
    Linear,
    /// Cubic both ways on every level; coarse stencils keep widening.
    Cubic,
    /// Linear restriction with cubic prolongation on every level.
    Mixed,
    /// Cubic both ways between the two finest levels, then linear restriction
    /// with cubic prolongation; coarse stencil radius stays at 2.
    LevelDependent,
}

/// The (R, P) pair for the transition whose fine side is `fine_level` (1 is
/// the finest level of the hierarchy).
pub fn select_intergrid(scheme: IntergridScheme, fine_level: usize) -> (IntergridOp, IntergridOp) {
    use TransferKind::*;
    let (rk, pk) = match scheme {
        IntergridScheme::Linear => (Linear, Linear),
        IntergridScheme::Cubic => (Cubic, Cubic),
        IntergridScheme::Mixed => (Linear, Cubic),
        IntergridScheme::LevelDependent => {
            if fine_level <= 1 {
                (Cubic, Cubic)
            } else {
                (Linear, Cubic)
            }
        }
    };
    (
        IntergridOp { kind: rk, role: TransferRole::Restriction },
        IntergridOp { kind: pk, role: TransferRole::Prolongation },
    )
}

fn check_even(grid: &GridSpec) -> Result<(), Error> {
    for a in 0..grid.dim {
        if grid.cells[a] % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "intergrid: cell count {} along axis {a} is odd",
                grid.cells[a]
            )));
        }
    }
    Ok(())
}

/// Weights and radius per axis; dead axes carry a single unit weight.
fn axis_weights(kind: TransferKind, dim: usize) -> ([&'static [f64]; 3], [i64; 3]) {
    let w = kind.weights();
    let r = kind.radius() as i64;
    if dim == 3 {
        ([w, w, w], [r, r, r])
    } else {
        ([w, w, &[1.0]], [r, r, 0])
    }
}

/// Coarse node I gets sum_t w(t) fine(2I + t); out-of-domain terms drop.
pub fn apply_restriction(op: IntergridOp, fine: &ComplexField) -> Result<ComplexField, Error> {
    if op.role != TransferRole::Restriction {
        return Err(Error::InvalidArgument("apply_restriction: operator is a prolongation".into()));
    }
    check_even(&fine.grid)?;
    let cg = fine.grid.coarsened();
    let nf = fine.grid.nodes();
    let nc = cg.nodes();
    let (w, r) = axis_weights(op.kind, fine.grid.dim);
    let mut coarse = ComplexField::zeros(cg);
    for icz in 0..nc[2] {
        for icy in 0..nc[1] {
            for icx in 0..nc[0] {
                let mut acc = Complex64::new(0.0, 0.0);
                for tz in -r[2]..=r[2] {
                    let jz = 2 * icz as i64 + tz;
                    if jz < 0 || jz >= nf[2] as i64 {
                        continue;
                    }
                    let wz = w[2][(tz + r[2]) as usize];
                    for ty in -r[1]..=r[1] {
                        let jy = 2 * icy as i64 + ty;
                        if jy < 0 || jy >= nf[1] as i64 {
                            continue;
                        }
                        let wyz = wz * w[1][(ty + r[1]) as usize];
                        for tx in -r[0]..=r[0] {
                            let jx = 2 * icx as i64 + tx;
                            if jx < 0 || jx >= nf[0] as i64 {
                                continue;
                            }
                            let wt = wyz * w[0][(tx + r[0]) as usize];
                            acc += wt
                                * fine.values
                                    [(jz as usize * nf[1] + jy as usize) * nf[0] + jx as usize];
                        }
                    }
                }
                coarse.values[(icz * nc[1] + icy) * nc[0] + icx] = acc;
            }
        }
    }
    Ok(coarse)
}

/// Fine node j gets 2^dim sum_I w(j - 2I) coarse(I): the scaled transpose of
/// the same-kind restriction, clipped the same way.
pub fn apply_prolongation(op: IntergridOp, coarse: &ComplexField) -> Result<ComplexField, Error> {
    if op.role != TransferRole::Prolongation {
        return Err(Error::InvalidArgument("apply_prolongation: operator is a restriction".into()));
    }
    let fg = coarse.grid.refined();
    let nf = fg.nodes();
    let nc = coarse.grid.nodes();
    let (w, r) = axis_weights(op.kind, fg.dim);
    let scale = (1 << fg.dim) as f64;
    let mut fine = ComplexField::zeros(fg);
    // per-axis ranges of coarse indices I with |j - 2I| <= r
    let range = |j: usize, ra: i64, na: usize| -> (i64, i64) {
        let lo = ((j as i64 - ra) + 1).div_euclid(2).max(0);
        let hi = ((j as i64 + ra).div_euclid(2)).min(na as i64 - 1);
        (lo, hi)
    };
    for jz in 0..nf[2] {
        let (loz, hiz) = range(jz, r[2], nc[2]);
        for jy in 0..nf[1] {
            let (loy, hiy) = range(jy, r[1], nc[1]);
            for jx in 0..nf[0] {
                let (lox, hix) = range(jx, r[0], nc[0]);
                let mut acc = Complex64::new(0.0, 0.0);
                for icz in loz..=hiz {
                    let wz = w[2][(jz as i64 - 2 * icz + r[2]) as usize];
                    for icy in loy..=hiy {
                        let wyz = wz * w[1][(jy as i64 - 2 * icy + r[1]) as usize];
                        for icx in lox..=hix {
                            let wt = wyz * w[0][(jx as i64 - 2 * icx + r[0]) as usize];
                            acc += wt
                                * coarse.values
                                    [(icz as usize * nc[1] + icy as usize) * nc[0] + icx as usize];
                        }
                    }
                }
                fine.values[(jz * nf[1] + jy) * nf[0] + jx] = scale * acc;
            }
        }
    }
    Ok(fine)
}

/// Galerkin coarse operator C = R A P, computed stencil-wise.
///
/// With restriction radius s_r, operator radius r_A, prolongation radius s_p,
/// the coarse radius is floor((s_r + r_A + s_p)/2); under the level-dependent
/// scheme this stays at 2 on every level.
pub fn galerkin_coarse(
    r_op: IntergridOp,
    a: &StencilOperator,
    p_op: IntergridOp,
) -> Result<StencilOperator, Error> {
    if r_op.role != TransferRole::Restriction || p_op.role != TransferRole::Prolongation {
        return Err(Error::InvalidArgument("galerkin_coarse: pass (restriction, prolongation)".into()));
    }
    check_even(&a.grid)?;
    let cg = a.grid.coarsened();
    let dim = a.grid.dim;
    let sr = r_op.kind.radius() as i64;
    let sp = p_op.kind.radius() as i64;
    let ra = a.radius as i64;
    let rc = ((sr + ra + sp) / 2) as usize;
    let mut c = StencilOperator::zeros(cg, rc, a.level + 1);

    let nf = a.grid.nodes();
    let nc = cg.nodes();
    let (rw, rrad) = axis_weights(r_op.kind, dim);
    let (pw, prad) = axis_weights(p_op.kind, dim);
    let scale = (1 << dim) as f64;
    let raz = if dim == 3 { ra } else { 0 };
    let rcz = if dim == 3 { rc as i64 } else { 0 };
    let cdims = c.stencil_dims();
    let clen = c.stencil_len();

    // per-axis map from v = s + t to the coarse-offset range D with
    // |v - 2D| <= s_p, intersected per node with the coarse domain
    let dspan = |v: i64, spa: i64, rca: i64| -> (i64, i64) {
        (((v - spa) + 1).div_euclid(2).max(-rca), (v + spa).div_euclid(2).min(rca))
    };

    for icz in 0..nc[2] as i64 {
        for icy in 0..nc[1] as i64 {
            for icx in 0..nc[0] as i64 {
                let cnode = ((icz as usize * nc[1]) + icy as usize) * nc[0] + icx as usize;
                let crow = &mut c.coeffs[cnode * clen..(cnode + 1) * clen];
                for sz in -rrad[2]..=rrad[2] {
                    let jz = 2 * icz + sz;
                    if jz < 0 || jz >= nf[2] as i64 {
                        continue;
                    }
                    let wz = rw[2][(sz + rrad[2]) as usize];
                    for sy in -rrad[1]..=rrad[1] {
                        let jy = 2 * icy + sy;
                        if jy < 0 || jy >= nf[1] as i64 {
                            continue;
                        }
                        let wyz = wz * rw[1][(sy + rrad[1]) as usize];
                        for sx in -rrad[0]..=rrad[0] {
                            let jx = 2 * icx + sx;
                            if jx < 0 || jx >= nf[0] as i64 {
                                continue;
                            }
                            let ws = wyz * rw[0][(sx + rrad[0]) as usize];
                            let fnode =
                                ((jz as usize * nf[1]) + jy as usize) * nf[0] + jx as usize;
                            let arow = a.row(fnode);
                            let mut k = 0;
                            for tz in -raz..=raz {
                                let vz = sz + tz;
                                let (dzl, dzh) = dspan(vz, prad[2], rcz);
                                for ty in -ra..=ra {
                                    let vy = sy + ty;
                                    let (dyl, dyh) = dspan(vy, prad[1], rc as i64);
                                    for tx in -ra..=ra {
                                        let av = arow[k];
                                        k += 1;
                                        if av == Complex64::new(0.0, 0.0) {
                                            continue;
                                        }
                                        let vx = sx + tx;
                                        let (dxl, dxh) = dspan(vx, prad[0], rc as i64);
                                        let base = ws * scale;
                                        for dz in dzl..=dzh {
                                            if icz + dz < 0 || icz + dz >= nc[2] as i64 {
                                                continue;
                                            }
                                            let pz = pw[2][(vz - 2 * dz + prad[2]) as usize];
                                            for dy in dyl..=dyh {
                                                if icy + dy < 0 || icy + dy >= nc[1] as i64 {
                                                    continue;
                                                }
                                                let pyz = pz * pw[1][(vy - 2 * dy + prad[1]) as usize];
                                                for dx in dxl..=dxh {
                                                    if icx + dx < 0 || icx + dx >= nc[0] as i64 {
                                                        continue;
                                                    }
                                                    let pv =
                                                        pyz * pw[0][(vx - 2 * dx + prad[0]) as usize];
                                                    let slot = (((dz + rcz) as usize * cdims[1])
                                                        + (dy + rc as i64) as usize)
                                                        * cdims[0]
                                                        + (dx + rc as i64) as usize;
                                                    crow[slot] += base * pv * av;
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(c)
}

/// Operator complexity: total structural nonzeros across levels over the
/// finest level's nonzeros.
pub fn operator_complexity<'a>(
    ops: impl IntoIterator<Item = &'a StencilOperator>,
) -> Result<f64, Error> {
    let counts: Vec<usize> = ops.into_iter().map(|o| o.nnz()).collect();
    match counts.first() {
        None => Err(Error::InvalidArgument("operator_complexity: empty hierarchy".into())),
        Some(0) => Err(Error::InvalidArgument("operator_complexity: finest operator has no entries".into())),
        Some(&fine) => Ok(counts.iter().sum::<usize>() as f64 / fine as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AttenuationProfile, SlownessModel};
    use crate::operator::assemble_helmholtz;

    fn field_of(grid: GridSpec, f: impl Fn(usize, usize, usize) -> Complex64) -> ComplexField {
        let n = grid.nodes();
        let mut out = ComplexField::zeros(grid);
        for iz in 0..n[2] {
            for iy in 0..n[1] {
                for ix in 0..n[0] {
                    out.values[grid.lin(ix, iy, iz)] = f(ix, iy, iz);
                }
            }
        }
        out
    }

    fn pseudo(grid: GridSpec, seed: u64) -> ComplexField {
        let mut state = seed | 1;
        let mut rnd = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let vals = (0..grid.num_nodes())
            .map(|_| Complex64::new(rnd(), rnd()))
            .collect();
        ComplexField { grid, values: vals }
    }

    #[test]
    fn scheme_selection_table() {
        use TransferKind::*;
        let (r, p) = select_intergrid(IntergridScheme::LevelDependent, 1);
        assert_eq!((r.kind, p.kind), (Cubic, Cubic));
        let (r, p) = select_intergrid(IntergridScheme::LevelDependent, 2);
        assert_eq!((r.kind, p.kind), (Linear, Cubic));
        let (r, p) = select_intergrid(IntergridScheme::Mixed, 1);
        assert_eq!((r.kind, p.kind), (Linear, Cubic));
        let (r, p) = select_intergrid(IntergridScheme::Linear, 5);
        assert_eq!((r.kind, p.kind), (Linear, Linear));
    }

    #[test]
    fn restriction_preserves_interior_constants() {
        for kind in [TransferKind::Linear, TransferKind::Cubic] {
            let g = build_grid(2, &[16, 16], &[1.0, 1.0]).unwrap();
            let f = field_of(g, |_, _, _| Complex64::new(3.5, -1.0));
            let op = IntergridOp { kind, role: TransferRole::Restriction };
            let c = apply_restriction(op, &f).unwrap();
            let nc = c.grid.nodes();
            for iy in 2..nc[1] - 2 {
                for ix in 2..nc[0] - 2 {
                    let v = c.values[c.grid.lin(ix, iy, 0)];
                    assert!((v - Complex64::new(3.5, -1.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn restriction_full_weighting_delta() {
        // delta at fine (5,4): odd x-offset splits 1/4 to coarse x=2 and x=3,
        // even y lands on coarse y=2 with weight 1/2
        let g = build_grid(2, &[8, 8], &[1.0, 1.0]).unwrap();
        let mut f = ComplexField::zeros(g);
        f.values[g.lin(5, 4, 0)] = Complex64::new(1.0, 0.0);
        let op = IntergridOp { kind: TransferKind::Linear, role: TransferRole::Restriction };
        let c = apply_restriction(op, &f).unwrap();
        let cg = c.grid;
        assert!((c.values[cg.lin(2, 2, 0)].re - 0.125).abs() < 1e-15);
        assert!((c.values[cg.lin(3, 2, 0)].re - 0.125).abs() < 1e-15);
        let total: f64 = c.values.iter().map(|v| v.re).sum();
        assert!((total - 0.25).abs() < 1e-15);
    }

    #[test]
    fn prolongation_linear_delta() {
        let g = build_grid(2, &[4, 4], &[1.0, 1.0]).unwrap();
        let mut cfield = ComplexField::zeros(g);
        cfield.values[g.lin(2, 2, 0)] = Complex64::new(1.0, 0.0);
        let op = IntergridOp { kind: TransferKind::Linear, role: TransferRole::Prolongation };
        let f = apply_prolongation(op, &cfield).unwrap();
        let fg = f.grid;
        assert_eq!(fg.cells[0], 8);
        assert!((f.values[fg.lin(4, 4, 0)].re - 1.0).abs() < 1e-15);
        assert!((f.values[fg.lin(5, 4, 0)].re - 0.5).abs() < 1e-15);
        assert!((f.values[fg.lin(5, 5, 0)].re - 0.25).abs() < 1e-15);
        assert_eq!(f.values[fg.lin(7, 4, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn prolongation_reproduces_constants_interior() {
        let g = build_grid(3, &[4, 4, 4], &[1.0, 1.0, 1.0]).unwrap();
        let cfield = field_of(g, |_, _, _| Complex64::new(2.0, 1.0));
        for kind in [TransferKind::Linear, TransferKind::Cubic] {
            let op = IntergridOp { kind, role: TransferRole::Prolongation };
            let f = apply_prolongation(op, &cfield).unwrap();
            let nf = f.grid.nodes();
            let margin = 2 * kind.radius();
            for iz in margin..nf[2] - margin {
                for iy in margin..nf[1] - margin {
                    for ix in margin..nf[0] - margin {
                        let v = f.values[f.grid.lin(ix, iy, iz)];
                        assert!((v - Complex64::new(2.0, 1.0)).norm() < 1e-13, "at {ix},{iy},{iz}: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn adjointness_with_scale() {
        // <R u, v> = (1/2^dim) <u, P v> for same-kind R and P, boundaries included
        for (dim, cells) in [(2usize, [16usize, 16, 0]), (3, [8, 8, 8])] {
            let g = build_grid(dim, &cells[..dim], &[1.0; 3][..dim]).unwrap();
            for kind in [TransferKind::Linear, TransferKind::Cubic] {
                let u = pseudo(g, 11);
                let v = pseudo(g.coarsened(), 29);
                let r = IntergridOp { kind, role: TransferRole::Restriction };
                let p = IntergridOp { kind, role: TransferRole::Prolongation };
                let ru = apply_restriction(r, &u).unwrap();
                let pv = apply_prolongation(p, &v).unwrap();
                let dot = |a: &ComplexField, b: &ComplexField| -> Complex64 {
                    a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum()
                };
                let lhs = dot(&ru, &v);
                let rhs = dot(&u, &pv) / (1 << dim) as f64;
                assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "{kind:?} {dim}D: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn galerkin_matches_operator_composition() {
        // C u == R(A(P u)) for random u exercises the windowed convolution
        // against the plain operator applications
        let g = build_grid(2, &[12, 12], &[1.0, 1.0]).unwrap();
        let model = SlownessModel::new(g, vec![1.0; g.num_nodes()]).unwrap();
        let (h, _) = assemble_helmholtz(&g, &model, 20.0, &AttenuationProfile::none(g)).unwrap();
        for scheme in [
            IntergridScheme::Linear,
            IntergridScheme::Cubic,
            IntergridScheme::Mixed,
            IntergridScheme::LevelDependent,
        ] {
            let (r, p) = select_intergrid(scheme, 1);
            let c = galerkin_coarse(r, &h, p).unwrap();
            let u = pseudo(g.coarsened(), 41);
            let cu = c.matvec(&u).unwrap();
            let rap = apply_restriction(r, &h.matvec(&apply_prolongation(p, &u).unwrap()).unwrap()).unwrap();
            let err = cu
                .values
                .iter()
                .zip(&rap.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10, "{scheme:?}: max deviation {err}");
        }
    }

    #[test]
    fn galerkin_radius_growth() {
        let g = build_grid(2, &[32, 32], &[1.0, 1.0]).unwrap();
        let model = SlownessModel::new(g, vec![1.0; g.num_nodes()]).unwrap();
        let (h, _) = assemble_helmholtz(&g, &model, 10.0, &AttenuationProfile::none(g)).unwrap();
        // level-dependent: radius 2 after the first pair, still 2 after deeper pairs
        let (r1, p1) = select_intergrid(IntergridScheme::LevelDependent, 1);
        let c2 = galerkin_coarse(r1, &h, p1).unwrap();
        assert_eq!(c2.radius, 2);
        let (r2, p2) = select_intergrid(IntergridScheme::LevelDependent, 2);
        let c3 = galerkin_coarse(r2, &c2, p2).unwrap();
        assert_eq!(c3.radius, 2);
        assert_eq!(c3.level, 3);
        // pure cubic: radius 3 at the third level
        let (rc1, pc1) = select_intergrid(IntergridScheme::Cubic, 1);
        let b2 = galerkin_coarse(rc1, &h, pc1).unwrap();
        assert_eq!(b2.radius, 2);
        let b3 = galerkin_coarse(rc1, &b2, pc1).unwrap();
        assert_eq!(b3.radius, 3);
        // pure linear: radius stays 1
        let (rl, pl) = select_intergrid(IntergridScheme::Linear, 1);
        let l2 = galerkin_coarse(rl, &h, pl).unwrap();
        assert_eq!(l2.radius, 1);
        let l3 = galerkin_coarse(rl, &l2, pl).unwrap();
        assert_eq!(l3.radius, 1);
    }

    #[test]
    fn level_dependent_first_pair_equals_cubic() {
        let g = build_grid(2, &[16, 16], &[1.0, 1.0]).unwrap();
        let model = SlownessModel::new(g, vec![1.0; g.num_nodes()]).unwrap();
        let (h, _) = assemble_helmholtz(&g, &model, 15.0, &AttenuationProfile::none(g)).unwrap();
        let (r_ld, p_ld) = select_intergrid(IntergridScheme::LevelDependent, 1);
        let (r_cu, p_cu) = select_intergrid(IntergridScheme::Cubic, 1);
        let a = galerkin_coarse(r_ld, &h, p_ld).unwrap();
        let b = galerkin_coarse(r_cu, &h, p_cu).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn complexity_single_level_is_one() {
        let g = build_grid(2, &[8, 8], &[1.0, 1.0]).unwrap();
        let model = SlownessModel::new(g, vec![1.0; g.num_nodes()]).unwrap();
        let (h, _) = assemble_helmholtz(&g, &model, 5.0, &AttenuationProfile::none(g)).unwrap();
        let ops = vec![h];
        assert!((operator_complexity(&ops).unwrap() - 1.0).abs() < 1e-15);
        assert!(operator_complexity(&[]).is_err());
    }

    #[test]
    fn odd_cells_rejected() {
        let g = build_grid(2, &[9, 8], &[1.0, 1.0]).unwrap();
        let f = ComplexField::zeros(g);
        let op = IntergridOp { kind: TransferKind::Linear, role: TransferRole::Restriction };
        assert!(apply_restriction(op, &f).is_err());
    }
}
