//! Discretization of the variational problem into a linear complementarity
//! system, plus the two continuum reductions that precede assembly:
//!
//! * `normalize_problem` subtracts the affine part of the obstacle at the
//!   origin and, when a(0) differs from the identity, straightens coordinates
//!   by a(0)^{-1/2} followed by a rotation that keeps the manifold tangent
//!   plane equal to {xₙ = 0}.
//! * `reduce_source` splits off the unconstrained solve of div(a ∇w) = f so
//!   the remaining problem has zero right-hand side.
//!
//! The operator is the standard symmetric second-order stencil for
//! -div(a ∇u): face-centered midpoint coefficients for the diagonal part and,
//! for each mixed pair (k, l), a four-corner cross stencil whose coefficient
//! averages a_kl at the two diagonal midpoints shared with the corner row,
//! which makes the assembled matrix exactly symmetric.

use crate::csr::CsrMatrix;
use crate::grid::{Grid, GridFunction, Point};
use crate::manifold::{manifold_constrained_nodes, SurfaceFn, ThinManifold};
use crate::solver::{psor_solve, SolverConfig};
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Closed-form function of a spatial point.
pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
/// Closed-form symmetric coefficient matrix; entries beyond n are ignored.
pub type MatrixFn = Arc<dyn Fn(Point) -> [[f64; 3]; 3] + Send + Sync>;

/// Uniformly elliptic symmetric coefficient field a(x).
#[derive(Clone)]
pub struct EllipticCoefficients {
    pub matrix: MatrixFn,
    /// Lower ellipticity bound: (a(x) ξ, ξ) >= lambda_min |ξ|².
    pub lambda_min: f64,
    /// Upper ellipticity bound.
    pub lambda_max: f64,
    /// Fast path marker for a ≡ I.
    pub identity: bool,
}

impl std::fmt::Debug for EllipticCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticCoefficients")
            .field("lambda_min", &self.lambda_min)
            .field("lambda_max", &self.lambda_max)
            .field("identity", &self.identity)
            .finish()
    }
}

fn identity_matrix(_: Point) -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

impl EllipticCoefficients {
    pub fn identity() -> Self {
        EllipticCoefficients {
            matrix: Arc::new(identity_matrix),
            lambda_min: 1.0,
            lambda_max: 1.0,
            identity: true,
        }
    }

    pub fn new(matrix: MatrixFn, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_max >= lambda_min) {
            return Err(Error::Ellipticity(format!(
                "bounds must satisfy 0 < lambda_min <= lambda_max, got {lambda_min}, {lambda_max}"
            )));
        }
        Ok(EllipticCoefficients { matrix, lambda_min, lambda_max, identity: false })
    }

    #[inline]
    pub fn at(&self, x: Point) -> [[f64; 3]; 3] {
        (self.matrix)(x)
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize, x: Point) -> f64 {
        (self.matrix)(x)[i][j]
    }

    /// Checks symmetry and the declared Rayleigh bounds at random points and
    /// directions inside the box.  Deterministic for a given seed.
    pub fn spot_check(&self, n: usize, l: f64, seed: u64, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slack = 1e-9;
        for _ in 0..samples {
            let mut x = [0.0; 3];
            let mut xi = [0.0; 3];
            for k in 0..n {
                x[k] = rng.gen_range(-l..l);
                xi[k] = rng.gen_range(-1.0..1.0);
            }
            let norm2: f64 = xi.iter().map(|v| v * v).sum();
            if norm2 < 1e-4 {
                continue;
            }
            let a = self.at(x);
            for i in 0..n {
                for j in (i + 1)..n {
                    if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                        return Err(Error::Ellipticity(format!(
                            "asymmetric coefficients at {x:?}: a[{i}][{j}] = {}, a[{j}][{i}] = {}",
                            a[i][j], a[j][i]
                        )));
                    }
                }
            }
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += xi[i] * a[i][j] * xi[j];
                }
            }
            if quad < (self.lambda_min - slack) * norm2 || quad > (self.lambda_max + slack) * norm2 {
                return Err(Error::Ellipticity(format!(
                    "Rayleigh quotient {} at {x:?} violates bounds [{}, {}]",
                    quad / norm2,
                    self.lambda_min,
                    self.lambda_max
                )));
            }
        }
        Ok(())
    }
}

/// Full continuum description of one thin obstacle problem on the grid box.
#[derive(Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub coefficients: EllipticCoefficients,
    pub source: SpaceFn,
    pub manifold: ThinManifold,
    /// Obstacle as a function of the tangential coordinates x′.
    pub obstacle: SurfaceFn,
    pub dirichlet: SpaceFn,
}

impl ProblemSpec {
    pub fn new(
        grid: Grid,
        coefficients: EllipticCoefficients,
        source: SpaceFn,
        manifold: ThinManifold,
        obstacle: SurfaceFn,
        dirichlet: SpaceFn,
    ) -> Result<Self> {
        coefficients.spot_check(grid.n, grid.l, 0x5eed, 64)?;
        Ok(ProblemSpec { grid, coefficients, source, manifold, obstacle, dirichlet })
    }
}

/// Builds one interior stencil row: couplings to every neighbor (boundary
/// neighbors included) plus the diagonal.  Zero couplings are dropped.
///
/// Every coefficient sample point is derived from index arithmetic, never by
/// offsetting the row's own coordinates: the two rows sharing a coupling then
/// evaluate a(x) at bitwise-identical points and the matrix comes out exactly
/// symmetric even when h is not dyadic.
fn stencil_row(grid: &Grid, coeffs: &EllipticCoefficients, idx: usize) -> Result<Vec<(usize, f64)>> {
    let ix = grid.coords(idx);
    let h = grid.h;
    let h2 = h * h;
    // Face midpoint between nodes q and q+1 on axis k, canonical form.
    let midpoint = |ix: [usize; 3], k: usize, q: usize| -> Point {
        let mut p = grid.point_of(ix);
        p[k] = -grid.l + q as f64 * h + 0.5 * h;
        p
    };
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(3usize.pow(grid.n as u32));
    let mut diag = 0.0;
    for k in 0..grid.n {
        for s in [-1i64, 1] {
            let q = if s > 0 { ix[k] } else { ix[k] - 1 };
            let mid = midpoint(ix, k, q);
            let akk = coeffs.entry(k, k, mid);
            if !(akk > 0.0) {
                return Err(Error::Ellipticity(format!(
                    "a[{k}][{k}]({mid:?}) = {akk} is not positive"
                )));
            }
            diag += akk / h2;
            let mut jx = ix;
            jx[k] = (jx[k] as i64 + s) as usize;
            row.push((grid.index(jx), -akk / h2));
        }
    }
    if !coeffs.identity {
        for k in 0..grid.n {
            for l in (k + 1)..grid.n {
                for sk in [-1i64, 1] {
                    for sl in [-1i64, 1] {
                        let mut nk = ix;
                        nk[k] = (nk[k] as i64 + sk) as usize;
                        let mut nl = ix;
                        nl[l] = (nl[l] as i64 + sl) as usize;
                        let avg = coeffs.entry(k, l, grid.point_of(nk))
                            + coeffs.entry(k, l, grid.point_of(nl));
                        let c = -(sk * sl) as f64 * avg / (4.0 * h2);
                        if c != 0.0 {
                            let mut jx = nk;
                            jx[l] = (jx[l] as i64 + sl) as usize;
                            row.push((grid.index(jx), c));
                        }
                    }
                }
            }
        }
    }
    row.push((idx, diag));
    Ok(row)
}

fn operator_rows_seq(grid: &Grid, coeffs: &EllipticCoefficients) -> Result<Vec<Vec<(usize, f64)>>> {
    (0..grid.node_count())
        .map(|i| {
            if grid.is_boundary(grid.coords(i)) {
                Ok(Vec::new())
            } else {
                stencil_row(grid, coeffs, i)
            }
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn operator_rows_par(grid: &Grid, coeffs: &EllipticCoefficients) -> Result<Vec<Vec<(usize, f64)>>> {
    use rayon::prelude::*;
    (0..grid.node_count())
        .into_par_iter()
        .map(|i| {
            if grid.is_boundary(grid.coords(i)) {
                Ok(Vec::new())
            } else {
                stencil_row(grid, coeffs, i)
            }
        })
        .collect()
}

fn finish_operator(rows: Vec<Vec<(usize, f64)>>, diagonal_coeffs: bool) -> Result<CsrMatrix> {
    let a = CsrMatrix::from_rows(rows);
    if diagonal_coeffs {
        // Without mixed couplings the stencil must be an M-matrix:
        // positive diagonal, non-positive couplings.
        for i in 0..a.nrows {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (j == i && v <= 0.0) || (j != i && v > 0.0) {
                    return Err(Error::BadMatrix(format!(
                        "stencil lost the M-matrix structure at entry ({i}, {j}) = {v}"
                    )));
                }
            }
        }
    }
    Ok(a)
}

/// Assembles -div(a ∇·) over all nodes.  Interior rows hold the full stencil
/// including couplings into boundary columns; boundary rows are left empty
/// (Dirichlet structure is applied by `assemble_lcp`).
pub fn assemble_operator(grid: &Grid, coeffs: &EllipticCoefficients) -> Result<CsrMatrix> {
    #[cfg(feature = "parallel")]
    let rows = operator_rows_par(grid, coeffs)?;
    #[cfg(not(feature = "parallel"))]
    let rows = operator_rows_seq(grid, coeffs)?;
    finish_operator(rows, diagonal_only(grid, coeffs))
}

/// Single-threaded assembly; same output as `assemble_operator` bit for bit.
pub fn assemble_operator_seq(grid: &Grid, coeffs: &EllipticCoefficients) -> Result<CsrMatrix> {
    finish_operator(operator_rows_seq(grid, coeffs)?, diagonal_only(grid, coeffs))
}

#[cfg(feature = "parallel")]
/// Rayon row assembly; exposed for the benches.
pub fn assemble_operator_par(grid: &Grid, coeffs: &EllipticCoefficients) -> Result<CsrMatrix> {
    finish_operator(operator_rows_par(grid, coeffs)?, diagonal_only(grid, coeffs))
}

/// True when the coefficient matrix is diagonal at a few sampled points;
/// gates the M-matrix structure check.
fn diagonal_only(grid: &Grid, coeffs: &EllipticCoefficients) -> bool {
    if coeffs.identity {
        return true;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ffd1a6);
    (0..16).all(|_| {
        let mut x = [0.0; 3];
        for k in 0..grid.n {
            x[k] = rng.gen_range(-grid.l..grid.l);
        }
        let a = coeffs.at(x);
        (0..grid.n).all(|i| ((i + 1)..grid.n).all(|j| a[i][j] == 0.0))
    })
}

/// Node role in the complementarity system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Free,
    Dirichlet,
    Constrained,
}

/// Discrete complementarity system: find u with
///   u = rhs on Dirichlet nodes,
///   (A u - rhs) = 0 on free nodes,
///   u >= obstacle, A u - rhs >= 0, (u - obstacle)(A u - rhs) = 0 on
///   constrained nodes.
#[derive(Debug, Clone)]
pub struct LCPSystem {
    /// Symmetric matrix: identity rows on Dirichlet nodes, eliminated
    /// stencil rows elsewhere (boundary couplings folded into `rhs`).
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub classes: Vec<NodeClass>,
    /// ψ per node; -inf off the constrained set.
    pub obstacle: Vec<f64>,
    /// Parity color classes of the non-Dirichlet nodes, if grid-structured.
    pub colors: Option<Vec<Vec<usize>>>,
    /// Volume element h^n used by the energy functional; 1 for raw systems.
    pub cell_volume: f64,
}

impl LCPSystem {
    /// Wraps an explicit matrix (tests, random systems).  All nodes are free
    /// except the listed constrained pairs (index, ψ).
    pub fn from_raw(matrix: CsrMatrix, rhs: Vec<f64>, constraints: &[(usize, f64)]) -> Result<Self> {
        let n = matrix.nrows;
        if rhs.len() != n {
            return Err(Error::InvalidParam("rhs length mismatch".into()));
        }
        let mut classes = vec![NodeClass::Free; n];
        let mut obstacle = vec![f64::NEG_INFINITY; n];
        for &(i, psi) in constraints {
            if i >= n {
                return Err(Error::InvalidParam(format!("constraint index {i} out of range")));
            }
            if !psi.is_finite() {
                return Err(Error::InvalidParam(format!("obstacle value at {i} must be finite")));
            }
            classes[i] = NodeClass::Constrained;
            obstacle[i] = psi;
        }
        Ok(LCPSystem { matrix, rhs, classes, obstacle, colors: None, cell_volume: 1.0 })
    }

    pub fn constrained_indices(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&i| self.classes[i] == NodeClass::Constrained).collect()
    }

    pub fn unknowns(&self) -> usize {
        self.classes.iter().filter(|c| **c != NodeClass::Dirichlet).count()
    }
}

/// Parity coloring of the non-Dirichlet nodes: nodes in one class share no
/// stencil coupling (all offsets in {-1, 0, 1}^n flip at least one parity),
/// so a class can be updated concurrently inside a sweep.
fn parity_colors(grid: &Grid, classes: &[NodeClass]) -> Vec<Vec<usize>> {
    let mut colors = vec![Vec::new(); 1 << grid.n];
    for i in 0..grid.node_count() {
        if classes[i] == NodeClass::Dirichlet {
            continue;
        }
        let ix = grid.coords(i);
        let mut c = 0usize;
        for k in 0..grid.n {
            c |= (ix[k] & 1) << k;
        }
        colors[c].push(i);
    }
    colors.retain(|v| !v.is_empty());
    colors
}

/// Discretizes a problem spec into its complementarity system.
pub fn assemble_lcp(spec: &ProblemSpec) -> Result<LCPSystem> {
    let grid = &spec.grid;
    let op = assemble_operator(grid, &spec.coefficients)?;
    let count = grid.node_count();

    let mut classes = vec![NodeClass::Free; count];
    let mut dirichlet = vec![0.0f64; count];
    for i in 0..count {
        if grid.is_boundary(grid.coords(i)) {
            classes[i] = NodeClass::Dirichlet;
            dirichlet[i] = (spec.dirichlet)(grid.point(i));
        }
    }

    let layer = manifold_constrained_nodes(grid, &spec.manifold)?;
    let mut obstacle = vec![f64::NEG_INFINITY; count];
    for (&node, foot) in layer.nodes.iter().zip(&layer.feet) {
        if classes[node] == NodeClass::Dirichlet {
            continue;
        }
        classes[node] = NodeClass::Constrained;
        obstacle[node] = (spec.obstacle)([foot[0], foot[1]]);
        if !obstacle[node].is_finite() {
            return Err(Error::InvalidParam(format!(
                "obstacle is not finite at foot point {foot:?}"
            )));
        }
    }

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(count);
    let mut rhs = vec![0.0f64; count];
    for i in 0..count {
        if classes[i] == NodeClass::Dirichlet {
            rows.push(vec![(i, 1.0)]);
            rhs[i] = dirichlet[i];
            continue;
        }
        let (cols, vals) = op.row(i);
        let mut row = Vec::with_capacity(cols.len());
        let mut b = -(spec.source)(grid.point(i));
        for (&j, &v) in cols.iter().zip(vals) {
            if classes[j] == NodeClass::Dirichlet {
                b -= v * dirichlet[j];
            } else {
                row.push((j, v));
            }
        }
        rows.push(row);
        rhs[i] = b;
    }

    let colors = parity_colors(grid, &classes);
    Ok(LCPSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        classes,
        obstacle,
        colors: Some(colors),
        cell_volume: grid.h.powi(grid.n as i32),
    })
}

/// Splits off the source: solves div(a ∇w) = f with w = 0 on the box boundary
/// using the same stencil, and returns the reduced spec (zero source, obstacle
/// and boundary data shifted by w) together with w itself.
pub fn reduce_source(spec: &ProblemSpec, cfg: &SolverConfig) -> Result<(ProblemSpec, GridFunction)> {
    let grid = spec.grid;
    let mut unconstrained = spec.clone();
    unconstrained.obstacle = Arc::new(|_| f64::MIN / 4.0);
    // Zero boundary for the lift so the Dirichlet data is untouched off M.
    unconstrained.dirichlet = Arc::new(|_| 0.0);
    let mut sys = assemble_lcp(&unconstrained)?;
    for c in sys.classes.iter_mut() {
        if *c == NodeClass::Constrained {
            *c = NodeClass::Free;
        }
    }
    sys.obstacle.fill(f64::NEG_INFINITY);
    let (w_values, report) = psor_solve(&sys, cfg, None)?;
    if !report.converged {
        return Err(Error::SolverStall(format!(
            "source lift: linear residual {:.3e} after {} sweeps",
            report.linear_residual, report.sweeps
        )));
    }
    let w = GridFunction::from_values(grid, w_values)?;

    let w_arc = Arc::new(w.clone());
    let (w_ob, w_dir) = (w_arc.clone(), w_arc.clone());
    let graph = spec.manifold.graph.clone();
    let mut reduced = spec.clone();
    reduced.source = Arc::new(|_| 0.0);
    let obstacle = spec.obstacle.clone();
    reduced.obstacle = Arc::new(move |xp: [f64; 2]| {
        // The obstacle acts at height g(x′) on the vertical axis.
        let n = w_ob.grid.n;
        let mut point = [0.0; 3];
        point[..n - 1].copy_from_slice(&xp[..n - 1]);
        point[n - 1] = (graph)(xp);
        (obstacle)(xp) - w_ob.interpolate(point).expect("foot point inside box")
    });
    let dirichlet = spec.dirichlet.clone();
    reduced.dirichlet = Arc::new(move |x: Point| {
        (dirichlet)(x) - w_dir.interpolate(x).expect("boundary point inside box")
    });
    Ok((reduced, w))
}

fn sym_matrix_at_origin(coeffs: &EllipticCoefficients, n: usize) -> DMatrix<f64> {
    let a0 = coeffs.at([0.0, 0.0, 0.0]);
    DMatrix::from_fn(n, n, |i, j| 0.5 * (a0[i][j] + a0[j][i]))
}

fn is_identity_at_origin(a0: &DMatrix<f64>) -> bool {
    let n = a0.nrows();
    (0..n).all(|i| (0..n).all(|j| (a0[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-12))
}

/// Normalizes a problem around the origin so that the obstacle and its
/// tangential slope vanish there and a(0) is the identity.
///
/// When a(0) ≠ I the coordinates are mapped by y = R a(0)^{-1/2} x where the
/// rotation R restores {xₙ = 0} as the manifold tangent plane at the origin;
/// the manifold graph is recomputed through a per-column scalar root find.
/// The affine subtraction keeps the contact set unchanged; for non-constant
/// coefficients it induces the extra source term -div(a ∇ℓ), evaluated by
/// finite differences of the coefficient field.
pub fn normalize_problem(spec: &ProblemSpec) -> Result<ProblemSpec> {
    let n = spec.grid.n;

    // Step 1: subtract the affine part of the obstacle at the origin.
    let phi0 = (spec.obstacle)([0.0, 0.0]);
    let dstep = 1e-6 * spec.grid.l.max(1.0);
    let mut slope = [0.0f64; 2];
    for k in 0..n - 1 {
        let mut xp = [0.0; 2];
        xp[k] = dstep;
        let mut xm = [0.0; 2];
        xm[k] = -dstep;
        slope[k] = ((spec.obstacle)(xp) - (spec.obstacle)(xm)) / (2.0 * dstep);
    }
    let needs_affine = phi0.abs() > 0.0 || slope[0].abs() > 0.0 || slope[1].abs() > 0.0;

    let mut out = spec.clone();
    if needs_affine {
        let ell = move |x: Point| phi0 + slope[0] * x[0] + slope[1] * x[1];
        let obstacle = spec.obstacle.clone();
        out.obstacle = Arc::new(move |xp: [f64; 2]| (obstacle)(xp) - phi0 - slope[0] * xp[0] - slope[1] * xp[1]);
        let dirichlet = spec.dirichlet.clone();
        out.dirichlet = Arc::new(move |x: Point| (dirichlet)(x) - ell(x));
        if !spec.coefficients.identity {
            // -div(a ∇ℓ) with ∇ℓ constant: differentiate the coefficient rows.
            let coeffs = spec.coefficients.clone();
            let source = spec.source.clone();
            let da = 1e-5 * spec.grid.l.max(1.0);
            out.source = Arc::new(move |x: Point| {
                let mut div = 0.0;
                for k in 0..3 {
                    let mut xp = x;
                    xp[k] += da;
                    let mut xm = x;
                    xm[k] -= da;
                    let (ap, am) = (coeffs.at(xp), coeffs.at(xm));
                    for (l, &c) in slope.iter().enumerate() {
                        if c != 0.0 {
                            div += c * (ap[k][l] - am[k][l]) / (2.0 * da);
                        }
                    }
                }
                (source)(x) - div
            });
        }
    }

    // Step 2: straighten the coefficient matrix at the origin.
    let a0 = sym_matrix_at_origin(&spec.coefficients, n);
    if is_identity_at_origin(&a0) {
        return Ok(out);
    }
    let eig = a0.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&ev| ev <= 0.0) {
        return Err(Error::Ellipticity(format!(
            "a(0) is not positive definite: eigenvalues {:?}",
            eig.eigenvalues.as_slice()
        )));
    }
    let v = &eig.eigenvectors;
    let sqrt = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] * eig.eigenvalues[k].sqrt() * v[(j, k)]).sum()
    });
    let sqrt_inv = DMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v[(i, k)] / eig.eigenvalues[k].sqrt() * v[(j, k)]).sum()
    });

    // Reflection taking the transformed vertical direction back to eₙ.
    let mut vert = sqrt.column(n - 1).clone_owned();
    vert /= vert.norm();
    let mut e_n = DMatrix::zeros(n, 1);
    e_n[(n - 1, 0)] = 1.0;
    let diff = &vert - &e_n.column(0);
    let rot = if diff.norm() < 1e-12 {
        DMatrix::identity(n, n)
    } else {
        let w = &diff / diff.norm();
        DMatrix::identity(n, n) - 2.0 * &w * w.transpose()
    };
    let fwd = &rot * &sqrt_inv; // y = fwd · x
    let inv = &sqrt * rot.transpose(); // x = inv · y

    let apply = move |m: &DMatrix<f64>, x: Point| -> Point {
        let mut y = [0.0; 3];
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                y[i] += m[(i, j)] * x[j];
            }
        }
        y
    };

    // Coefficients: ã(y) = B a(B⁻¹ y) Bᵀ.
    let coeffs = out.coefficients.clone();
    let (fwd_c, inv_c) = (fwd.clone(), inv.clone());
    let nn = n;
    let matrix: MatrixFn = Arc::new(move |y: Point| {
        let x = apply(&inv_c, y);
        let a = coeffs.at(x);
        let mut out = [[0.0; 3]; 3];
        for i in 0..nn {
            for j in 0..nn {
                let mut acc = 0.0;
                for p in 0..nn {
                    for q in 0..nn {
                        acc += fwd_c[(i, p)] * a[p][q] * fwd_c[(j, q)];
                    }
                }
                out[i][j] = acc;
            }
        }
        for k in nn..3 {
            out[k][k] = 1.0;
        }
        out
    });
    let ev_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let ev_min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let new_coeffs = EllipticCoefficients::new(
        matrix,
        out.coefficients.lambda_min / ev_max,
        out.coefficients.lambda_max / ev_min,
    )?;

    // Manifold graph in the new coordinates: solve (B⁻¹(y′, t))ₙ = g((B⁻¹(y′, t))′).
    let old_graph = out.manifold.graph.clone();
    let inv_g = inv.clone();
    let l_box = spec.grid.l;
    let resolve = move |yp: [f64; 2]| -> f64 {
        let residual = |t: f64| {
            let mut y = [0.0; 3];
            y[..nn - 1].copy_from_slice(&yp[..nn - 1]);
            y[nn - 1] = t;
            let x = apply(&inv_g, y);
            x[nn - 1] - (old_graph)([x[0], x[1]])
        };
        let mut t = 0.0;
        for _ in 0..60 {
            let r = residual(t);
            if r.abs() < 1e-13 * l_box {
                return t;
            }
            let dt = 1e-7 * l_box;
            let dr = (residual(t + dt) - residual(t - dt)) / (2.0 * dt);
            if dr.abs() < 1e-12 {
                break;
            }
            let step = r / dr;
            t -= step.clamp(-0.5 * l_box, 0.5 * l_box);
        }
        t
    };
    let stays_flat = out.manifold.flat && (0..n - 1).all(|k| inv[(n - 1, k)].abs() <= 1e-14);
    let new_manifold = if stays_flat {
        ThinManifold::flat(out.manifold.beta)
    } else {
        let graph_fn: SurfaceFn = Arc::new(resolve.clone());
        let g_for_grad = graph_fn.clone();
        let gstep = 1e-6 * l_box;
        let grad: crate::manifold::SurfaceGradFn = Arc::new(move |yp: [f64; 2]| {
            let mut g = [0.0; 2];
            for k in 0..nn - 1 {
                let mut p = yp;
                p[k] += gstep;
                let mut m = yp;
                m[k] -= gstep;
                g[k] = ((g_for_grad)(p) - (g_for_grad)(m)) / (2.0 * gstep);
            }
            g
        });
        ThinManifold::new(graph_fn, grad, out.manifold.beta, false)?
    };

    // Obstacle: follow a point of M through the inverse map.
    let obstacle = out.obstacle.clone();
    let resolve_ob = resolve;
    let inv_ob = inv.clone();
    let new_obstacle: SurfaceFn = Arc::new(move |yp: [f64; 2]| {
        let t = resolve_ob(yp);
        let mut y = [0.0; 3];
        y[..nn - 1].copy_from_slice(&yp[..nn - 1]);
        y[nn - 1] = t;
        let x = apply(&inv_ob, y);
        (obstacle)([x[0], x[1]])
    });

    let dirichlet = out.dirichlet.clone();
    let inv_d = inv.clone();
    let new_dirichlet: SpaceFn = Arc::new(move |y: Point| (dirichlet)(apply(&inv_d, y)));
    let source = out.source.clone();
    let inv_s = inv;
    let new_source: SpaceFn = Arc::new(move |y: Point| (source)(apply(&inv_s, y)));

    Ok(ProblemSpec {
        grid: spec.grid,
        coefficients: new_coeffs,
        source: new_source,
        manifold: new_manifold,
        obstacle: new_obstacle,
        dirichlet: new_dirichlet,
    })
}
