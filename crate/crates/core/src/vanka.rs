//! Additive Vanka smoothers: patch geometries (with damped Jacobi as the 1x1
//! case), boundary clipping, partition-of-unity weights, local factorization,
//! and the additive sweep u' = u + w sum_i V_i' W_i H_i^-1 V_i (q - A u).

use num_complex::Complex64;

use crate::grid::{ComplexField, GridSpec};
use crate::linalg;
use crate::operator::StencilOperator;
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PatchKind {
    /// Single node; the smoother degenerates to damped Jacobi.
    Jacobi,
    /// The 4 (2D) or 8 (3D) nodes of a cell, one patch per cell; element
    /// patches never cross the boundary, so they are never clipped.
    Element,
    /// Center plus face neighbors: 5 nodes in 2D, 7 in 3D.
    Plus,
    /// Center plus the same-color diagonal neighbors: the 4 corner neighbors
    /// in 2D (5 nodes), the 12 two-axis neighbors in 3D (13 nodes).
    Rb,
    /// The full 3^dim box: 9 nodes in 2D, 27 in 3D.
    Full,
}

impl PatchKind {
    /// Interior patch size for this kind.
    pub fn interior_size(self, dim: usize) -> usize {
        match (self, dim) {
            (PatchKind::Jacobi, _) => 1,
            (PatchKind::Element, 2) => 4,
            (PatchKind::Element, _) => 8,
            (PatchKind::Plus, 2) => 5,
            (PatchKind::Plus, _) => 7,
            (PatchKind::Rb, 2) => 5,
            (PatchKind::Rb, _) => 13,
            (PatchKind::Full, 2) => 9,
            (PatchKind::Full, _) => 27,
        }
    }

    /// Node offsets of the interior patch shape relative to its center.
    /// Element patches are anchored at the cell's low corner instead.
    fn offsets(self, dim: usize) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        match self {
            PatchKind::Jacobi => out.push([0, 0, 0]),
            PatchKind::Element => {
                let zs: &[i64] = if dim == 3 { &[0, 1] } else { &[0] };
                for &dz in zs {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            out.push([dx, dy, dz]);
                        }
                    }
                }
            }
            PatchKind::Plus => {
                out.push([0, 0, 0]);
                for a in 0..dim {
                    for s in [-1i64, 1] {
                        let mut d = [0i64; 3];
                        d[a] = s;
                        out.push(d);
                    }
                }
            }
            PatchKind::Rb => {
                out.push([0, 0, 0]);
                if dim == 2 {
                    for dy in [-1i64, 1] {
                        for dx in [-1i64, 1] {
                            out.push([dx, dy, 0]);
                        }
                    }
                } else {
                    // all offsets with exactly two nonzero +-1 components,
                    // which preserve the checkerboard color of the center
                    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
                        for sa in [-1i64, 1] {
                            for sb in [-1i64, 1] {
                                let mut d = [0i64; 3];
                                d[a] = sa;
                                d[b] = sb;
                                out.push(d);
                            }
                        }
                    }
                }
            }
            PatchKind::Full => {
                let zs: &[i64] = if dim == 3 { &[-1, 0, 1] } else { &[0] };
                for &dz in zs {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            out.push([dx, dy, dz]);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Patch geometry on a grid: index sets, per-node membership counts, and the
/// partition-of-unity weights 1/count.
#[derive(Clone, Debug)]
pub struct PatchLayout {
    pub grid: GridSpec,
    pub kind: PatchKind,
    ptr: Vec<usize>,
    nodes: Vec<u32>,
    centers: Vec<u32>,
    node_weight: Vec<f64>,
    node_count: Vec<u32>,
    max_size: usize,
}

impl PatchLayout {
    pub fn num_patches(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn patch(&self, i: usize) -> &[u32] {
        &self.nodes[self.ptr[i]..self.ptr[i + 1]]
    }

    pub fn center(&self, i: usize) -> usize {
        self.centers[i] as usize
    }

    /// Weight a node carries in every patch that contains it.
    pub fn node_weight(&self) -> &[f64] {
        &self.node_weight
    }

    pub fn node_count(&self) -> &[u32] {
        &self.node_count
    }
}

/// One patch per node (per cell for element), clipped to the domain for the
/// wide kinds; weights are 1/(number of patches containing the node).
pub fn build_patches(grid: &GridSpec, kind: PatchKind) -> Result<PatchLayout, Error> {
    let n = grid.nodes();
    for a in 0..grid.dim {
        let need = match kind {
            PatchKind::Jacobi => 1,
            PatchKind::Element => 2,
            _ => 3,
        };
        if n[a] < need {
            return Err(Error::InvalidArgument(format!(
                "build_patches: axis {a} has {} nodes, {:?} patches need {need}",
                n[a], kind
            )));
        }
    }
    let offsets = kind.offsets(grid.dim);
    let mut ptr = vec![0usize];
    let mut nodes: Vec<u32> = Vec::new();
    let mut centers: Vec<u32> = Vec::new();
    let mut count = vec![0u32; grid.num_nodes()];

    // element patches anchor on cells; other kinds center on nodes
    let anchors_per_axis = |a: usize| -> usize {
        if kind == PatchKind::Element && a < grid.dim {
            n[a] - 1
        } else {
            n[a]
        }
    };
    for iz in 0..anchors_per_axis(2) {
        for iy in 0..anchors_per_axis(1) {
            for ix in 0..anchors_per_axis(0) {
                centers.push(grid.lin(ix, iy, iz) as u32);
                for d in &offsets {
                    let (jx, jy, jz) = (ix as i64 + d[0], iy as i64 + d[1], iz as i64 + d[2]);
                    if jx < 0 || jx >= n[0] as i64 || jy < 0 || jy >= n[1] as i64 || jz < 0 || jz >= n[2] as i64 {
                        debug_assert!(kind != PatchKind::Element && kind != PatchKind::Jacobi);
                        continue;
                    }
                    let node = grid.lin(jx as usize, jy as usize, jz as usize);
                    nodes.push(node as u32);
                    count[node] += 1;
                }
                ptr.push(nodes.len());
            }
        }
    }
    debug_assert!(count.iter().all(|&c| c > 0), "patches must cover every node");
    let node_weight = count.iter().map(|&c| 1.0 / c as f64).collect();
    let max_size = ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    Ok(PatchLayout {
        grid: *grid,
        kind,
        ptr,
        nodes,
        centers,
        node_weight,
        node_count: count,
        max_size,
    })
}

/// The dense local matrix A[p, p] of a patch, row-major.
pub fn local_matrix(a: &StencilOperator, patch: &[u32]) -> Vec<Complex64> {
    let m = patch.len();
    let r = a.radius as i64;
    let mut out = vec![Complex64::new(0.0, 0.0); m * m];
    for (pr, &nr) in patch.iter().enumerate() {
        let [rx, ry, rz] = a.grid.unlin(nr as usize);
        for (pc, &ncol) in patch.iter().enumerate() {
            let [cx, cy, cz] = a.grid.unlin(ncol as usize);
            let (dx, dy, dz) = (
                cx as i64 - rx as i64,
                cy as i64 - ry as i64,
                cz as i64 - rz as i64,
            );
            if dx.abs() <= r && dy.abs() <= r && dz.abs() <= r {
                out[pr * m + pc] = a.coeff(nr as usize, dx, dy, dz);
            }
        }
    }
    out
}

/// Patch layout plus factorized local matrices and the damping w, ready for
/// repeated sweeps against one operator.
#[derive(Clone, Debug)]
pub struct VankaPatchSet {
    pub layout: PatchLayout,
    pub damping: f64,
    factors: Vec<Complex64>,
    factor_ptr: Vec<usize>,
    pivots: Vec<u32>,
    pivot_ptr: Vec<usize>,
}

impl VankaPatchSet {
    /// Damping factor the set was built with.
    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn layout(&self) -> &PatchLayout {
        &self.layout
    }
}

/// Extract and LU-factor every local matrix H_i = V_i A V_i'.
pub fn factor_patches(
    a: &StencilOperator,
    layout: &PatchLayout,
    damping: f64,
) -> Result<VankaPatchSet, Error> {
    if a.grid != layout.grid {
        return Err(Error::InvalidArgument("factor_patches: operator and layout grids differ".into()));
    }
    let np = layout.num_patches();
    let mut factors = Vec::new();
    let mut factor_ptr = Vec::with_capacity(np + 1);
    let mut pivots = Vec::new();
    let mut pivot_ptr = Vec::with_capacity(np + 1);
    factor_ptr.push(0);
    pivot_ptr.push(0);
    let mut piv_buf = vec![0usize; layout.max_size];
    for i in 0..np {
        let patch = layout.patch(i);
        let m = patch.len();
        let mut local = local_matrix(a, patch);
        if linalg::lu_factor(&mut local, m, &mut piv_buf[..m]).is_err() {
            return Err(Error::SingularPatch { node: layout.center(i), level: a.level });
        }
        factors.extend_from_slice(&local);
        pivots.extend(piv_buf[..m].iter().map(|&p| p as u32));
        factor_ptr.push(factors.len());
        pivot_ptr.push(pivots.len());
    }
    Ok(VankaPatchSet {
        layout: layout.clone(),
        damping,
        factors,
        factor_ptr,
        pivots,
        pivot_ptr,
    })
}

/// One additive sweep: all patch corrections are computed from the residual
/// of the incoming iterate and accumulated, then applied with damping w.
pub fn apply_vanka(
    ps: &VankaPatchSet,
    a: &StencilOperator,
    u: &ComplexField,
    q: &ComplexField,
) -> Result<ComplexField, Error> {
    if a.grid != ps.layout.grid {
        return Err(Error::InvalidArgument("apply_vanka: operator grid differs from patch grid".into()));
    }
    let r = a.residual(u, q)?;
    let mut out = u.clone();
    accumulate_correction(ps, &r.values, ps.damping, &mut out.values);
    Ok(out)
}

/// out += scale * sum_i V_i' W_i H_i^-1 V_i r. Shared by the public sweep and
/// the multigrid cycle, which keeps its own residual.
pub(crate) fn accumulate_correction(
    ps: &VankaPatchSet,
    r: &[Complex64],
    scale: f64,
    out: &mut [Complex64],
) {
    let layout = &ps.layout;
    let wt = &layout.node_weight;
    let mut buf = vec![Complex64::new(0.0, 0.0); layout.max_size];
    for i in 0..layout.num_patches() {
        let patch = layout.patch(i);
        let m = patch.len();
        for (k, &node) in patch.iter().enumerate() {
            buf[k] = r[node as usize];
        }
        let lu = &ps.factors[ps.factor_ptr[i]..ps.factor_ptr[i + 1]];
        let piv = &ps.pivots[ps.pivot_ptr[i]..ps.pivot_ptr[i + 1]];
        lu_solve_u32(lu, m, piv, &mut buf[..m]);
        for (k, &node) in patch.iter().enumerate() {
            out[node as usize] += scale * wt[node as usize] * buf[k];
        }
    }
}

fn lu_solve_u32(lu: &[Complex64], n: usize, piv: &[u32], b: &mut [Complex64]) {
    for k in 0..n {
        b.swap(k, piv[k] as usize);
        let bk = b[k];
        for r in k + 1..n {
            b[r] -= lu[r * n + k] * bk;
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= lu[k * n + c] * b[c];
        }
        b[k] = s / lu[k * n + k];
    }
}

/// Per-node FLOP estimate for one sweep: the residual touches the full
/// stencil box and each patch solve costs N^2 against the factored local
/// matrix.
pub fn smoother_flops(kind: PatchKind, dim: usize, level_radius: usize) -> usize {
    let stencil = (2 * level_radius + 1).pow(dim as u32);
    let n = kind.interior_size(dim);
    stencil + n * n
}
