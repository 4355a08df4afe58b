//! The thin constraint manifold M = {xₙ = g(x′)} and its grid discretization.
//!
//! The obstacle acts only on M, a C^{1,β} graph over the first n-1 coordinates
//! passing through the origin tangentially to {xₙ = 0}.  Discretely, every
//! grid column (fixed x′) contributes its single node layer nearest to the
//! graph height, together with the exact foot point on M where the obstacle is
//! evaluated.

use crate::grid::{Grid, Point};
use crate::{Error, Result};
use std::sync::Arc;

/// Closed-form function of the tangential coordinates x′ (length n-1, padded).
pub type SurfaceFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// Gradient of a `SurfaceFn`.
pub type SurfaceGradFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Graph description of the constraint manifold.
#[derive(Clone)]
pub struct ThinManifold {
    pub graph: SurfaceFn,
    pub graph_grad: SurfaceGradFn,
    /// Hölder exponent of the graph gradient; must exceed 1/2.
    pub beta: f64,
    /// True when g ≡ 0, which unlocks exact hyperplane paths.
    pub flat: bool,
}

impl std::fmt::Debug for ThinManifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ThinManifold")
            .field("beta", &self.beta)
            .field("flat", &self.flat)
            .finish()
    }
}

impl ThinManifold {
    /// Wraps a graph; validates g(0) = 0 and ∇g(0) = 0 (normalized geometry).
    pub fn new(graph: SurfaceFn, graph_grad: SurfaceGradFn, beta: f64, flat: bool) -> Result<Self> {
        if !(beta > 0.5) {
            return Err(Error::InvalidParam(format!(
                "graph regularity exponent must exceed 1/2, got beta = {beta}"
            )));
        }
        let g0 = (graph)([0.0, 0.0]);
        if g0.abs() > 1e-9 {
            return Err(Error::InvalidParam(format!("graph must vanish at the origin, g(0) = {g0}")));
        }
        let d0 = (graph_grad)([0.0, 0.0]);
        if d0[0].abs().max(d0[1].abs()) > 1e-6 {
            return Err(Error::InvalidParam(format!(
                "graph must be tangent to {{x_n = 0}} at the origin, grad g(0) = {d0:?}"
            )));
        }
        Ok(ThinManifold { graph, graph_grad, beta, flat })
    }

    /// The flat manifold {xₙ = 0}.
    pub fn flat(beta: f64) -> Self {
        ThinManifold {
            graph: Arc::new(|_| 0.0),
            graph_grad: Arc::new(|_| [0.0, 0.0]),
            beta,
            flat: true,
        }
    }
}

/// Grid discretization of M: one node per column plus its foot point on M.
#[derive(Debug, Clone)]
pub struct ConstrainedLayer {
    /// Flat node indices, one per grid column, in column order.
    pub nodes: Vec<usize>,
    /// Foot points (x′, g(x′)) aligned with `nodes`.
    pub feet: Vec<Point>,
}

/// Selects, for every column x′, the node layer nearest to g(x′).
///
/// The selected node is within h/2 of the manifold by construction.  Columns
/// whose nearest layer would be a box face are rejected: the graph must stay
/// inside the box interior.
pub fn manifold_constrained_nodes(grid: &Grid, manifold: &ThinManifold) -> Result<ConstrainedLayer> {
    let n = grid.n;
    let vertical = n - 1;
    let columns = grid.m.pow((n - 1) as u32);
    let mut nodes = Vec::with_capacity(columns);
    let mut feet = Vec::with_capacity(columns);
    for c in 0..columns {
        // Decode the column into per-axis indices over the tangential axes.
        let mut ix = [0usize; 3];
        let mut rem = c;
        for k in (0..vertical).rev() {
            ix[k] = rem % grid.m;
            rem /= grid.m;
        }
        let mut xp = [0.0f64; 2];
        for k in 0..vertical {
            xp[k] = -grid.l + ix[k] as f64 * grid.h;
        }
        let height = (manifold.graph)(xp);
        if height.abs() >= grid.l {
            return Err(Error::InvalidParam(format!(
                "manifold graph leaves the box: g({xp:?}) = {height}"
            )));
        }
        let layer = ((height + grid.l) / grid.h).round() as usize;
        let layer = layer.min(grid.m - 1);
        if layer == 0 || layer == grid.m - 1 {
            return Err(Error::InvalidParam(format!(
                "manifold touches the box face at column x' = {xp:?}"
            )));
        }
        ix[vertical] = layer;
        nodes.push(grid.index(ix));
        let mut foot = [0.0f64; 3];
        foot[..vertical].copy_from_slice(&xp[..vertical.min(2)]);
        foot[vertical] = height;
        feet.push(foot);
    }
    Ok(ConstrainedLayer { nodes, feet })
}
