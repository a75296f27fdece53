//! Variable-coefficient stencil operators: the compact 4th-order Helmholtz
//! discretization, its mass stencil, the complex shift, and matvec/residual.

use num_complex::Complex64;

use crate::grid::{AttenuationProfile, ComplexField, GridSpec, SlownessModel};
use crate::Error;

/// A linear operator stored as one dense local stencil per node.
///
/// The stencil couples nodes within Chebyshev distance `radius` (over live
/// axes). Entries whose neighbor falls outside the domain are exactly zero;
/// boundary rows are truncated, never renormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilOperator {
    pub grid: GridSpec,
    pub radius: usize,
    /// Hierarchy level this operator lives on; 1 is finest.
    pub level: usize,
    /// Node-major coefficient storage, `stencil_len()` entries per node,
    /// offsets linearized x-fastest like the grid itself.
    pub coeffs: Vec<Complex64>,
}

impl StencilOperator {
    pub fn zeros(grid: GridSpec, radius: usize, level: usize) -> Self {
        let slen = stencil_len(&grid, radius);
        StencilOperator { grid, radius, level, coeffs: vec![Complex64::new(0.0, 0.0); grid.num_nodes() * slen] }
    }

    /// Stencil extent per axis; the dead axis contributes extent 1.
    pub fn stencil_dims(&self) -> [usize; 3] {
        stencil_dims(&self.grid, self.radius)
    }

    pub fn stencil_len(&self) -> usize {
        stencil_len(&self.grid, self.radius)
    }

    #[inline]
    pub fn offset_index(&self, dx: i64, dy: i64, dz: i64) -> usize {
        let r = self.radius as i64;
        let d = self.stencil_dims();
        let rz = if self.grid.dim == 3 { r } else { 0 };
        (((dz + rz) as usize * d[1]) + (dy + r) as usize) * d[0] + (dx + r) as usize
    }

    #[inline]
    pub fn row(&self, node: usize) -> &[Complex64] {
        let slen = self.stencil_len();
        &self.coeffs[node * slen..(node + 1) * slen]
    }

    #[inline]
    pub fn row_mut(&mut self, node: usize) -> &mut [Complex64] {
        let slen = self.stencil_len();
        &mut self.coeffs[node * slen..(node + 1) * slen]
    }

    /// Entry A[node, node+offset]; zero when the neighbor is outside.
    pub fn coeff(&self, node: usize, dx: i64, dy: i64, dz: i64) -> Complex64 {
        self.row(node)[self.offset_index(dx, dy, dz)]
    }

    /// v = A u.
    pub fn matvec(&self, u: &ComplexField) -> Result<ComplexField, Error> {
        if u.grid != self.grid {
            return Err(Error::InvalidArgument("matvec: field grid differs from operator grid".into()));
        }
        let mut v = ComplexField::zeros(self.grid);
        self.matvec_into(&u.values, &mut v.values);
        Ok(v)
    }

    /// Matvec on raw slices; lengths must match the grid.
    pub fn matvec_into(&self, u: &[Complex64], v: &mut [Complex64]) {
        let n = self.grid.nodes();
        let r = self.radius;
        let rz = if self.grid.dim == 3 { r } else { 0 };
        let slen = self.stencil_len();
        let d = self.stencil_dims();
        // linear index deltas per stencil slot, valid away from boundaries
        let mut deltas = Vec::with_capacity(slen);
        for dz in 0..d[2] as i64 {
            for dy in 0..d[1] as i64 {
                for dx in 0..d[0] as i64 {
                    deltas.push(
                        (dz - rz as i64) * (n[0] * n[1]) as i64 + (dy - r as i64) * n[0] as i64 + (dx - r as i64),
                    );
                }
            }
        }
        let interior =
            |i: usize, a: usize, ra: usize| -> bool { i >= ra && i + ra < n[a] };
        for iz in 0..n[2] {
            let z_in = self.grid.dim == 2 || interior(iz, 2, rz);
            for iy in 0..n[1] {
                let yz_in = z_in && interior(iy, 1, r);
                let row_base = (iz * n[1] + iy) * n[0];
                for ix in 0..n[0] {
                    let node = row_base + ix;
                    let c = &self.coeffs[node * slen..(node + 1) * slen];
                    let mut acc = Complex64::new(0.0, 0.0);
                    if yz_in && interior(ix, 0, r) {
                        for (k, &delta) in deltas.iter().enumerate() {
                            acc += c[k] * u[(node as i64 + delta) as usize];
                        }
                    } else {
                        // near a boundary: out-of-domain slots hold exact zeros,
                        // but the linear delta would wrap, so walk coordinates
                        let mut k = 0;
                        for dz in -(rz as i64)..=(rz as i64) {
                            let jz = iz as i64 + dz;
                            for dy in -(r as i64)..=(r as i64) {
                                let jy = iy as i64 + dy;
                                for dx in -(r as i64)..=(r as i64) {
                                    let jx = ix as i64 + dx;
                                    let cv = c[k];
                                    k += 1;
                                    if cv == Complex64::new(0.0, 0.0) {
                                        continue;
                                    }
                                    debug_assert!(
                                        jx >= 0 && jx < n[0] as i64 && jy >= 0 && jy < n[1] as i64 && jz >= 0 && jz < n[2] as i64,
                                        "nonzero coefficient pointing outside the domain"
                                    );
                                    acc += cv * u[((jz as usize * n[1] + jy as usize) * n[0]) + jx as usize];
                                }
                            }
                        }
                    }
                    v[node] = acc;
                }
            }
        }
    }

    /// r = q - A u.
    pub fn residual(&self, u: &ComplexField, q: &ComplexField) -> Result<ComplexField, Error> {
        if u.grid != self.grid || q.grid != self.grid {
            return Err(Error::InvalidArgument("residual: field grid differs from operator grid".into()));
        }
        let mut r = self.matvec(u)?;
        for (rv, qv) in r.values.iter_mut().zip(&q.values) {
            *rv = qv - *rv;
        }
        Ok(r)
    }

    /// Structural nonzeros, dropping entries below 1e-14 of their row max so
    /// coarse-operator counts are stable against roundoff.
    pub fn nnz(&self) -> usize {
        let slen = self.stencil_len();
        let mut total = 0;
        for node in 0..self.grid.num_nodes() {
            let row = &self.coeffs[node * slen..(node + 1) * slen];
            let max = row.iter().map(|c| c.norm()).fold(0.0, f64::max);
            if max == 0.0 {
                continue;
            }
            total += row.iter().filter(|c| c.norm() > 1e-14 * max).count();
        }
        total
    }

    /// (row, col, value) triplets of all stored nonzeros, for sparse
    /// factorization and dense oracles.
    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let n = self.grid.nodes();
        let r = self.radius as i64;
        let rz = if self.grid.dim == 3 { r } else { 0 };
        let mut out = Vec::new();
        for node in 0..self.grid.num_nodes() {
            let [ix, iy, iz] = self.grid.unlin(node);
            let row = self.row(node);
            let mut k = 0;
            for dz in -rz..=rz {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let c = row[k];
                        k += 1;
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let (jx, jy, jz) = (ix as i64 + dx, iy as i64 + dy, iz as i64 + dz);
                        debug_assert!(jx >= 0 && jy >= 0 && jz >= 0);
                        out.push((node, ((jz as usize) * n[1] + jy as usize) * n[0] + jx as usize, c));
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn stencil_dims(grid: &GridSpec, radius: usize) -> [usize; 3] {
    let e = 2 * radius + 1;
    [e, e, if grid.dim == 3 { e } else { 1 }]
}

pub(crate) fn stencil_len(grid: &GridSpec, radius: usize) -> usize {
    let d = stencil_dims(grid, radius);
    d[0] * d[1] * d[2]
}

/// Laplacian stencil weight at `off`, times h^2 (2D compact 4th order).
fn l2d(off: [i64; 2]) -> f64 {
    match off[0].abs() + off[1].abs() {
        0 => 10.0 / 3.0,
        1 => -2.0 / 3.0,
        2 => -1.0 / 6.0, // diagonal
        _ => 0.0,
    }
}

/// Mass stencil weight at `off` (2D); weights sum to 1.
fn m2d(off: [i64; 2]) -> f64 {
    match (off[0].abs(), off[1].abs()) {
        (0, 0) => 2.0 / 3.0,
        (1, 0) | (0, 1) => 1.0 / 12.0,
        _ => 0.0,
    }
}

/// Laplacian stencil weight at `off`, times h^2 (3D compact 4th order).
fn l3d(off: [i64; 3]) -> f64 {
    match off[0].abs() + off[1].abs() + off[2].abs() {
        0 => 4.0,
        1 => -1.0 / 3.0,
        2 => -1.0 / 6.0, // edge neighbors; corners carry zero weight
        _ => 0.0,
    }
}

/// Mass stencil weight at `off` (3D); weights sum to 1.
fn m3d(off: [i64; 3]) -> f64 {
    match off[0].abs() + off[1].abs() + off[2].abs() {
        0 => 1.0 / 2.0,
        1 => 1.0 / 12.0,
        _ => 0.0,
    }
}

/// Assemble H = L - sigma*M with sigma = kappa^2 omega^2 (1 - (gamma/omega) i)
/// evaluated at each row's center node, plus the slowness-weighted mass
/// stencil kappa^2 M that the complex shift multiplies. Boundary rows are
/// truncated (homogeneous Dirichlet exterior).
pub fn assemble_helmholtz(
    grid: &GridSpec,
    model: &SlownessModel,
    omega: f64,
    att: &AttenuationProfile,
) -> Result<(StencilOperator, StencilOperator), Error> {
    if model.grid != *grid || att.grid != *grid {
        return Err(Error::InvalidArgument("assemble: model/attenuation grid mismatch".into()));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument("assemble: omega must be positive".into()));
    }
    let n = grid.nodes();
    let mut h_op = StencilOperator::zeros(*grid, 1, 1);
    let mut m_op = StencilOperator::zeros(*grid, 1, 1);
    // uniform spacing assumed by the compact stencil; mixed h is rejected
    let h = grid.h[0];
    for a in 1..grid.dim {
        if (grid.h[a] - h).abs() > 1e-12 * h {
            return Err(Error::InvalidArgument("assemble: compact stencil requires equal spacings".into()));
        }
    }
    let inv_h2 = 1.0 / (h * h);
    let rz = if grid.dim == 3 { 1i64 } else { 0 };
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let node = grid.lin(ix, iy, iz);
                let sigma = omega * omega
                    * model.kappa_sq[node]
                    * Complex64::new(1.0, -att.gamma_over_omega[node]);
                let hrow = node * h_op.stencil_len();
                let mrow = node * m_op.stencil_len();
                let mut k = 0;
                for dz in -rz..=rz {
                    let jz = iz as i64 + dz;
                    for dy in -1i64..=1 {
                        let jy = iy as i64 + dy;
                        for dx in -1i64..=1 {
                            let jx = ix as i64 + dx;
                            let inside = jx >= 0
                                && jx < n[0] as i64
                                && jy >= 0
                                && jy < n[1] as i64
                                && jz >= 0
                                && jz < n[2] as i64;
                            if inside {
                                let (lw, mw) = if grid.dim == 2 {
                                    (l2d([dx, dy]), m2d([dx, dy]))
                                } else {
                                    (l3d([dx, dy, dz]), m3d([dx, dy, dz]))
                                };
                                h_op.coeffs[hrow + k] = Complex64::new(lw * inv_h2, 0.0) - sigma * mw;
                                m_op.coeffs[mrow + k] =
                                    Complex64::new(model.kappa_sq[node] * mw, 0.0);
                            }
                            k += 1;
                        }
                    }
                }
            }
        }
    }
    Ok((h_op, m_op))
}

/// Complex-shifted operator H_s = H + i alpha omega^2 M, where M is the
/// slowness-weighted mass operator from `assemble_helmholtz`, making the
/// shift equivalent to raising the attenuation gamma/omega by alpha
/// uniformly. The shift sits on the same side of the imaginary axis as the
/// physical attenuation (whose sigma convention puts the absorbing-layer
/// contribution at +i), so it always adds damping.
pub fn apply_shift(
    h_op: &StencilOperator,
    m_op: &StencilOperator,
    alpha: f64,
    omega: f64,
) -> Result<StencilOperator, Error> {
    if h_op.grid != m_op.grid || h_op.radius != m_op.radius || h_op.level != m_op.level {
        return Err(Error::InvalidArgument("apply_shift: H and M must live on the same grid and level".into()));
    }
    let mut hs = h_op.clone();
    let scale = Complex64::new(0.0, alpha * omega * omega);
    for (c, m) in hs.coeffs.iter_mut().zip(&m_op.coeffs) {
        *c += scale * m;
    }
    Ok(hs)
}
