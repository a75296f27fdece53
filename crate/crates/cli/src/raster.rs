//! Plain-text slowness rasters: first line `dim nx ny [nz]` giving per-axis
//! cell counts, then whitespace-separated kappa^2 node values in row-major
//! order (x fastest). Spacing is uniform with the longest axis spanning a
//! unit length.

use anyhow::{bail, Context, Result};
use helmholtz_mg::grid::{build_grid, GridSpec, SlownessModel};
use std::fmt::Write as _;
use std::path::Path;

/// Grid whose axes are proportional to the cell counts, so the spacing is
/// equal on every axis and the longest axis has unit length.
pub fn proportional_grid(dim: usize, cells: &[usize]) -> Result<GridSpec> {
    let max = *cells.iter().max().context("empty cell list")? as f64;
    let lengths: Vec<f64> = cells.iter().map(|&c| c as f64 / max).collect();
    Ok(build_grid(dim, cells, &lengths)?)
}

pub fn load_raster(path: &Path, extend_depth: usize) -> Result<SlownessModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading raster {}", path.display()))?;
    let mut tokens = text.split_whitespace();

    let dim: usize = tokens
        .next()
        .context("raster is empty; expected `dim nx ny [nz]` header")?
        .parse()
        .context("raster header: dim is not an integer")?;
    if dim != 2 && dim != 3 {
        bail!("raster header: dim must be 2 or 3, got {dim}");
    }
    let mut cells = Vec::with_capacity(dim);
    for axis in 0..dim {
        let tok = tokens
            .next()
            .with_context(|| format!("raster header: missing cell count for axis {axis}"))?;
        let c: usize =
            tok.parse().with_context(|| format!("raster header: bad cell count `{tok}`"))?;
        cells.push(c);
    }

    let grid = proportional_grid(dim, &cells)?;
    let expected = grid.num_nodes();
    let mut values = Vec::with_capacity(expected);
    for tok in tokens.by_ref() {
        let v: f64 = tok.parse().with_context(|| format!("raster value `{tok}` is not a number"))?;
        if !(v > 0.0) {
            bail!("raster value {v} is not strictly positive");
        }
        values.push(v);
        if values.len() > expected {
            bail!("raster holds more than the expected {expected} node values");
        }
    }
    if values.len() != expected {
        bail!("raster value count mismatch: expected {expected} nodes, found {}", values.len());
    }

    if extend_depth == 0 {
        return Ok(SlownessModel::new(grid, values)?);
    }

    // replicate the bottom node layer extend_depth times along the vertical
    // (last) axis; the grid grows by the same number of cells
    let n = grid.nodes();
    let mut ext_cells = cells.clone();
    ext_cells[dim - 1] += extend_depth;
    let ext_grid = proportional_grid(dim, &ext_cells)?;
    let plane: usize = n[..dim - 1].iter().product();
    let n_vert = n[dim - 1];
    let mut ext_values = Vec::with_capacity(ext_grid.num_nodes());
    for layer in 0..n_vert + extend_depth {
        let src = layer.min(n_vert - 1);
        ext_values.extend_from_slice(&values[src * plane..(src + 1) * plane]);
    }
    Ok(SlownessModel::new(ext_grid, ext_values)?)
}

pub fn write_raster(path: &Path, model: &SlownessModel) -> Result<()> {
    let g = model.grid;
    let mut out = String::new();
    write!(out, "{}", g.dim)?;
    for a in 0..g.dim {
        write!(out, " {}", g.cells[a])?;
    }
    out.push('\n');
    // one x-row per line keeps files diffable without affecting parsing
    let n = g.nodes();
    for iz in 0..n[2] {
        for iy in 0..n[1] {
            for ix in 0..n[0] {
                if ix > 0 {
                    out.push(' ');
                }
                write!(out, "{}", model.kappa_sq[g.lin(ix, iy, iz)])?;
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing raster {}", path.display()))
}
