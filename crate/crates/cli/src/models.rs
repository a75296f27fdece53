//! Built-in slowness models. The vertical axis is the last grid axis (y in
//! 2D, z in 3D), with index 0 at the top; depth grows with the index.

use anyhow::{bail, Result};
use helmholtz_mg::grid::{GridSpec, SlownessModel};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Which slowness model an experiment runs on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// kappa^2 = 1 everywhere.
    Homogeneous,
    /// kappa^2 varies linearly with depth from 0.25 (top) to 1 (bottom).
    Linear,
    /// Two constant regions, kappa^2 = 0.25 above and 1 below a straight
    /// interface running from 40% depth on the left edge to 70% depth on
    /// the right edge.
    Wedge,
    /// Piecewise-constant horizontal layers with jumping kappa^2 in
    /// [0.25, 1]; a stand-in for field velocity rasters.
    Layered,
    /// Model loaded from a raster file, optionally extended downward by
    /// replicating the bottom layer.
    Raster {
        path: PathBuf,
        #[serde(default)]
        extend_depth: usize,
    },
}

/// Depth fractions where a new layer starts, and the kappa^2 value of each
/// layer (one more value than boundaries). Fixed so runs are reproducible.
const LAYER_TOPS: [f64; 6] = [0.12, 0.25, 0.4, 0.55, 0.7, 0.85];
const LAYER_KAPPA_SQ: [f64; 7] = [0.25, 0.62, 0.36, 0.81, 0.49, 0.9, 1.0];

pub fn gen_model(spec: &ModelSpec, grid: &GridSpec) -> Result<SlownessModel> {
    let n = grid.nodes();
    let vert = grid.dim - 1;
    let depth_of = |i: usize| -> f64 {
        let steps = (n[vert] - 1).max(1);
        let idx = grid.unlin(i);
        idx[vert] as f64 / steps as f64
    };
    let kappa_sq: Vec<f64> = match spec {
        ModelSpec::Homogeneous => vec![1.0; grid.num_nodes()],
        ModelSpec::Linear => {
            (0..grid.num_nodes()).map(|i| 0.25 + 0.75 * depth_of(i)).collect()
        }
        ModelSpec::Wedge => (0..grid.num_nodes())
            .map(|i| {
                let idx = grid.unlin(i);
                let xfrac = idx[0] as f64 / (n[0] - 1).max(1) as f64;
                let cutoff = 0.4 + 0.3 * xfrac;
                if depth_of(i) < cutoff {
                    0.25
                } else {
                    1.0
                }
            })
            .collect(),
        ModelSpec::Layered => (0..grid.num_nodes())
            .map(|i| {
                let d = depth_of(i);
                let layer = LAYER_TOPS.iter().take_while(|&&t| d >= t).count();
                LAYER_KAPPA_SQ[layer]
            })
            .collect(),
        ModelSpec::Raster { .. } => {
            bail!("raster models are loaded via raster::load_raster, not generated")
        }
    };
    Ok(SlownessModel::new(*grid, kappa_sq)?)
}
