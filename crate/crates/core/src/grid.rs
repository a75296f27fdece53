//! Regular nodal grids and the per-node fields that live on them.

use num_complex::Complex64;

use crate::Error;

/// Regular 2D/3D grid. Nodes sit at cell corners, so each axis has
/// `cells + 1` nodes. Linear node ordering is row-major with x fastest,
/// then y, then z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    /// Cells per axis; the unused z entry is 0 in 2D.
    pub cells: [usize; 3],
    /// Physical extent per axis; unused z entry is 0 in 2D.
    pub lengths: [f64; 3],
    /// Spacing per axis (`length / cells`); unused z entry is 0 in 2D.
    pub h: [f64; 3],
}

impl GridSpec {
    /// Nodes per axis; the dead axis reports 1 so 3D-shaped loops work in 2D.
    pub fn nodes(&self) -> [usize; 3] {
        let mut n = [1; 3];
        for a in 0..self.dim {
            n[a] = self.cells[a] + 1;
        }
        n
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.nodes();
        n[0] * n[1] * n[2]
    }

    /// Largest spacing among live axes.
    pub fn h_max(&self) -> f64 {
        self.h[..self.dim].iter().cloned().fold(0.0, f64::max)
    }

    #[inline]
    pub fn lin(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.nodes();
        (iz * n[1] + iy) * n[0] + ix
    }

    #[inline]
    pub fn unlin(&self, idx: usize) -> [usize; 3] {
        let n = self.nodes();
        let ix = idx % n[0];
        let rest = idx / n[0];
        [ix, rest % n[1], rest / n[1]]
    }

    /// Grid with every cell count halved. Caller must check divisibility.
    pub fn coarsened(&self) -> GridSpec {
        let mut g = *self;
        for a in 0..self.dim {
            g.cells[a] /= 2;
            g.h[a] *= 2.0;
        }
        g
    }

    /// Grid with every cell count doubled; inverse of `coarsened`.
    pub fn refined(&self) -> GridSpec {
        let mut g = *self;
        for a in 0..self.dim {
            g.cells[a] *= 2;
            g.h[a] /= 2.0;
        }
        g
    }
}

/// One complex value per node, in the grid's node ordering.
#[derive(Clone, Debug)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        ComplexField { grid, values: vec![Complex64::new(0.0, 0.0); grid.num_nodes()] }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Squared slowness per node; strictly positive.
#[derive(Clone, Debug)]
pub struct SlownessModel {
    pub grid: GridSpec,
    pub kappa_sq: Vec<f64>,
}

impl SlownessModel {
    pub fn new(grid: GridSpec, kappa_sq: Vec<f64>) -> Result<Self, Error> {
        if kappa_sq.len() != grid.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "slowness model has {} values for {} nodes",
                kappa_sq.len(),
                grid.num_nodes()
            )));
        }
        if !kappa_sq.iter().all(|&v| v > 0.0) {
            return Err(Error::InvalidArgument("slowness squared must be strictly positive".into()));
        }
        Ok(SlownessModel { grid, kappa_sq })
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_sq.iter().cloned().fold(0.0, f64::max).sqrt()
    }
}

/// Per-node attenuation ratio gamma/omega; zero outside the absorbing layer.
#[derive(Clone, Debug)]
pub struct AttenuationProfile {
    pub grid: GridSpec,
    pub gamma_over_omega: Vec<f64>,
}

impl AttenuationProfile {
    /// No attenuation anywhere.
    pub fn none(grid: GridSpec) -> Self {
        AttenuationProfile { grid, gamma_over_omega: vec![0.0; grid.num_nodes()] }
    }
}

/// Validate counts and extents and compute spacings.
pub fn build_grid(dim: usize, cells: &[usize], lengths: &[f64]) -> Result<GridSpec, Error> {
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidArgument(format!("dim must be 2 or 3, got {dim}")));
    }
    if cells.len() != dim || lengths.len() != dim {
        return Err(Error::InvalidArgument("cells/lengths length must equal dim".into()));
    }
    let mut c = [0usize; 3];
    let mut l = [0f64; 3];
    let mut h = [0f64; 3];
    for a in 0..dim {
        // 2 cells is the smallest axis with an interior node; multigrid
        // coarsening imposes its own stricter floor per level
        if cells[a] < 2 {
            return Err(Error::InvalidArgument(format!("axis {a}: need at least 2 cells, got {}", cells[a])));
        }
        if !(lengths[a] > 0.0) {
            return Err(Error::InvalidArgument(format!("axis {a}: length must be positive")));
        }
        c[a] = cells[a];
        l[a] = lengths[a];
        h[a] = lengths[a] / cells[a] as f64;
    }
    Ok(GridSpec { dim, cells: c, lengths: l, h })
}

/// Angular frequency for a target points-per-wavelength resolution:
/// omega = 2*pi / (ppw * h_max * kappa_max), so the shortest wavelength in
/// the medium is resolved by `ppw` nodes.
pub fn ppw_frequency(grid: &GridSpec, model: &SlownessModel, ppw: f64) -> f64 {
    2.0 * std::f64::consts::PI / (ppw * grid.h_max() * model.kappa_max())
}

/// Quadratic attenuation ramp over `width_cells` cells at every boundary:
/// gamma/omega = gmax * ((width - d)/width)^2 for nodes d cells from the
/// nearest boundary, 0 in the interior.
pub fn absorbing_layer(
    grid: &GridSpec,
    width_cells: usize,
    gamma_max_over_omega: f64,
) -> Result<AttenuationProfile, Error> {
    if width_cells < 1 {
        return Err(Error::InvalidArgument("absorbing layer width must be at least 1 cell".into()));
    }
    let min_cells = grid.cells[..grid.dim].iter().cloned().min().unwrap();
    if 2 * width_cells >= min_cells {
        return Err(Error::InvalidArgument(format!(
            "absorbing layer of {width_cells} cells does not fit a {min_cells}-cell axis"
        )));
    }
    let n = grid.nodes();
    let w = width_cells as f64;
    let mut g = vec![0.0; grid.num_nodes()];
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                let mut d = usize::MAX;
                let idxs = [ix, iy, iz];
                for a in 0..grid.dim {
                    d = d.min(idxs[a]).min(grid.cells[a] - idxs[a]);
                }
                if d < width_cells {
                    let t = (w - d as f64) / w;
                    g[grid.lin(ix, iy, iz)] = gamma_max_over_omega * t * t;
                }
            }
        }
    }
    Ok(AttenuationProfile { grid: *grid, gamma_over_omega: g })
}

/// Discrete point source at the node nearest the domain center (ties toward
/// lower indices), scaled by 1/h^dim so the total source strength is
/// resolution independent.
pub fn point_source_rhs(grid: &GridSpec) -> ComplexField {
    let n = grid.nodes();
    let mut q = ComplexField::zeros(*grid);
    let center = [(n[0] - 1) / 2, (n[1] - 1) / 2, (n[2] - 1) / 2];
    let mut scale = 1.0;
    for a in 0..grid.dim {
        scale /= grid.h[a];
    }
    q.values[grid.lin(center[0], center[1], center[2])] = Complex64::new(scale, 0.0);
    q
}
