//! Quadrature on origin-centered spheres S_r, used for the boundary integrals
//! F(r) = ∫_{S_r} u² dσ that drive the frequency diagnostics.
//!
//! 1D: the two points ±r with unit weights (counting measure of the 0-sphere).
//! 2D: equispaced angles with equal weights; exact for trigonometric
//!     polynomials of degree < q and spectrally accurate for smooth traces.
//! 3D: latitude-longitude product rule; each colatitude band carries its exact
//!     area 2πr²(cos φ₋ - cos φ₊), sampled at the band-center colatitude, so
//!     the weights sum to 4πr² to rounding while the rule stays second order.

use crate::grid::{Grid, Point, ScalarField};
use crate::{Error, Result};

/// Quadrature nodes and weights on the sphere of radius r.
#[derive(Debug, Clone)]
pub struct SphereSampler {
    pub radius: f64,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Fraction of the box half-width that sphere radii may occupy.  Keeping a
/// margin guarantees every sample point lies strictly inside the box even
/// after interpolation-stencil lookups.
pub const RADIUS_MARGIN: f64 = 0.9;

/// Builds the sampler for S_r on the given grid's box.
///
/// `q` is the requested node count: ignored in 1D, the number of angles in 2D
/// (minimum 16), and split into a near-square latitude-longitude product in 3D
/// (minimum 64).
pub fn build_sphere_sampler(grid: &Grid, r: f64, q: usize) -> Result<SphereSampler> {
    if !(r > 0.0 && r <= RADIUS_MARGIN * grid.l) {
        return Err(Error::InvalidParam(format!(
            "sphere radius must lie in (0, {}L], got r = {r} with L = {}",
            RADIUS_MARGIN, grid.l
        )));
    }
    match grid.n {
        1 => Ok(SphereSampler {
            radius: r,
            points: vec![[-r, 0.0, 0.0], [r, 0.0, 0.0]],
            weights: vec![1.0, 1.0],
        }),
        2 => {
            if q < 16 {
                return Err(Error::InvalidParam(format!("2D sampler needs q >= 16, got {q}")));
            }
            let w = 2.0 * std::f64::consts::PI * r / q as f64;
            let mut points = Vec::with_capacity(q);
            let mut weights = Vec::with_capacity(q);
            for j in 0..q {
                // Midpoint offset keeps samples off the coordinate axes.
                let th = -std::f64::consts::PI
                    + (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / q as f64;
                points.push([r * th.cos(), r * th.sin(), 0.0]);
                weights.push(w);
            }
            Ok(SphereSampler { radius: r, points, weights })
        }
        3 => {
            if q < 64 {
                return Err(Error::InvalidParam(format!("3D sampler needs q >= 64, got {q}")));
            }
            let q_lat = ((q as f64).sqrt().round() as usize).max(4);
            let q_lon = (q + q_lat - 1) / q_lat;
            let dphi = std::f64::consts::PI / q_lat as f64;
            let dth = 2.0 * std::f64::consts::PI / q_lon as f64;
            let mut points = Vec::with_capacity(q_lat * q_lon);
            let mut weights = Vec::with_capacity(q_lat * q_lon);
            for i in 0..q_lat {
                let phi = (i as f64 + 0.5) * dphi;
                // Exact band area split evenly over the longitude samples.
                let band = 2.0 * std::f64::consts::PI
                    * r
                    * r
                    * ((i as f64 * dphi).cos() - ((i + 1) as f64 * dphi).cos());
                let w = band / q_lon as f64;
                let (sp, cp) = (phi.sin(), phi.cos());
                for j in 0..q_lon {
                    let th = (j as f64 + 0.5) * dth;
                    points.push([r * sp * th.cos(), r * sp * th.sin(), r * cp]);
                    weights.push(w);
                }
            }
            Ok(SphereSampler { radius: r, points, weights })
        }
        _ => unreachable!("grid dimension validated at construction"),
    }
}

impl SphereSampler {
    /// ∫_{S_r} u² dσ under this rule.
    pub fn integrate_sq(&self, u: &impl ScalarField) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let v = u.eval(*p);
            acc += w * v * v;
        }
        acc
    }

    /// Total weight; equals the surface measure of S_r to rounding.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}
