//! Uniform Cartesian grids on the box [-L, L]^n and nodal scalar fields.
//!
//! Dimensions 1, 2, 3 share one representation: points are `[f64; 3]` with the
//! trailing coordinates unused, node indices are `[usize; 3]` likewise.  The
//! node count per axis is odd so the origin is always a node, which every
//! origin-centered diagnostic (frequency profiles, blow-ups) relies on.

use crate::{Error, Result};

/// Spatial point; coordinates beyond the grid dimension are zero and ignored.
pub type Point = [f64; 3];

/// Anything that can be evaluated at a point: closed forms and grid fields.
pub trait ScalarField {
    fn eval(&self, x: Point) -> f64;
}

impl<F: Fn(Point) -> f64> ScalarField for F {
    fn eval(&self, x: Point) -> f64 {
        self(x)
    }
}

/// Uniform grid on [-L, L]^n with m nodes per axis, m odd, spacing h = 2L/(m-1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub l: f64,
    pub m: usize,
    pub h: f64,
}

impl Grid {
    /// Builds a grid; m must be odd and at least 3 so the origin is a node.
    pub fn new(n: usize, l: f64, m: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidParam(format!(
                "grid dimension must be 1, 2 or 3, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidParam(format!("grid half-width L must be positive, got {l}")));
        }
        if m < 3 || m % 2 == 0 {
            return Err(Error::InvalidParam(format!(
                "nodes per axis must be odd and >= 3 so the origin is a node, got {m}"
            )));
        }
        let h = 2.0 * l / (m as f64 - 1.0);
        Ok(Grid { n, l, m, h })
    }

    /// Total number of nodes, m^n.
    pub fn node_count(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Row-major flat index of a node given per-axis indices.
    #[inline]
    pub fn index(&self, ix: [usize; 3]) -> usize {
        let mut idx = 0;
        for k in 0..self.n {
            debug_assert!(ix[k] < self.m);
            idx = idx * self.m + ix[k];
        }
        idx
    }

    /// Per-axis indices of a flat index (inverse of `index`).
    #[inline]
    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut ix = [0usize; 3];
        for k in (0..self.n).rev() {
            ix[k] = idx % self.m;
            idx /= self.m;
        }
        ix
    }

    /// Coordinates of the node with the given per-axis indices.
    #[inline]
    pub fn point_of(&self, ix: [usize; 3]) -> Point {
        let mut x = [0.0; 3];
        for k in 0..self.n {
            x[k] = -self.l + ix[k] as f64 * self.h;
        }
        x
    }

    /// Coordinates of the node with the given flat index.
    #[inline]
    pub fn point(&self, idx: usize) -> Point {
        self.point_of(self.coords(idx))
    }

    /// Per-axis index of the origin node, (m-1)/2 on every axis.
    pub fn origin_coords(&self) -> [usize; 3] {
        let mut ix = [0usize; 3];
        for k in 0..self.n {
            ix[k] = (self.m - 1) / 2;
        }
        ix
    }

    /// Flat index of the origin node.
    pub fn origin_index(&self) -> usize {
        self.index(self.origin_coords())
    }

    /// True if any per-axis index sits on the box face.
    #[inline]
    pub fn is_boundary(&self, ix: [usize; 3]) -> bool {
        (0..self.n).any(|k| ix[k] == 0 || ix[k] == self.m - 1)
    }

    /// True if the point lies in the closed box (with a tiny rounding margin).
    pub fn contains(&self, x: Point) -> bool {
        let eps = 1e-12 * self.l.max(1.0);
        (0..self.n).all(|k| x[k].abs() <= self.l + eps)
    }
}

/// Scalar field given by one value per grid node, row-major.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    /// Wraps a value vector; the length must be m^n and all entries finite.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidParam(format!(
                "value count {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    /// Samples a closed form at every node.
    pub fn sample(grid: Grid, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..grid.node_count()).map(|i| f(grid.point(i))).collect();
        Self::from_values(grid, values)
    }

    /// The all-zero field.
    pub fn zeros(grid: Grid) -> Self {
        GridFunction { values: vec![0.0; grid.node_count()], grid }
    }

    #[inline]
    pub fn value_at(&self, ix: [usize; 3]) -> f64 {
        self.values[self.grid.index(ix)]
    }

    /// Multilinear interpolation; exact on multilinear polynomials.
    /// Errors if the point lies outside the closed box.
    pub fn interpolate(&self, x: Point) -> Result<f64> {
        let g = &self.grid;
        if !g.contains(x) {
            return Err(Error::OutOfBox(x[0], x[1], x[2]));
        }
        let mut cell = [0usize; 3];
        let mut t = [0.0f64; 3];
        for k in 0..g.n {
            let s = (x[k] + g.l) / g.h;
            let c = (s.floor() as isize).clamp(0, g.m as isize - 2) as usize;
            cell[k] = c;
            t[k] = (s - c as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << g.n) {
            let mut ix = [0usize; 3];
            let mut w = 1.0;
            for k in 0..g.n {
                if corner >> k & 1 == 1 {
                    ix[k] = cell[k] + 1;
                    w *= t[k];
                } else {
                    ix[k] = cell[k];
                    w *= 1.0 - t[k];
                }
            }
            acc += w * self.values[g.index(ix)];
        }
        Ok(acc)
    }

    /// Largest |u| over the nodes contained in the closed ball |x| <= r.
    pub fn sup_ball(&self, r: f64) -> f64 {
        let g = &self.grid;
        let mut sup = 0.0f64;
        for i in 0..g.node_count() {
            let x = g.point(i);
            let rho2: f64 = (0..g.n).map(|k| x[k] * x[k]).sum();
            if rho2 <= r * r {
                sup = sup.max(self.values[i].abs());
            }
        }
        sup
    }
}

impl ScalarField for GridFunction {
    fn eval(&self, x: Point) -> f64 {
        self.interpolate(x).expect("interpolation point outside grid box")
    }
}
