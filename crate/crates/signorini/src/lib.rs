//! Numerical laboratory for the thin obstacle (Signorini) problem.
//!
//! The pipeline discretizes the variational problem
//!
//! ```text
//!   minimize  F(u) = ∫ ½ (a(x) ∇u, ∇u) + u f dx   over  u ∈ H¹(Ω),
//!   subject to  u = g on ∂Ω  and  u ≥ φ on M ∩ Ω,
//! ```
//!
//! where the constraint lives on a codimension-one graph M = {xₙ = g(x′)}.
//! On a uniform Cartesian grid this becomes a linear complementarity problem
//! solved by projected SOR.  On top of the solve sit the diagnostics that make
//! the optimal C^{1,1/2} regularity visible numerically: truncated Almgren
//! frequency profiles, almost-monotonicity checks, sup-norm growth fits,
//! blow-up rescalings, and closed-form oracle fields to calibrate all of it.
//!
//! Heavy inner loops (PSOR sweeps, operator assembly, blow-up resampling) run
//! on rayon when the `parallel` feature is enabled (the default) and fall back
//! to single-threaded loops without it.  Both lanes produce bit-identical
//! results; `benches/parallel.rs` compares them.

pub mod accept;
pub mod assembly;
pub mod blowup;
pub mod config;
pub mod csr;
pub mod frequency;
pub mod grid;
pub mod manifold;
pub mod runner;
pub mod scenario;
pub mod solver;
pub mod sphere;

pub use grid::{Grid, GridFunction, Point, ScalarField};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("point ({0}, {1}, {2}) lies outside the grid box")]
    OutOfBox(f64, f64, f64),
    #[error("coefficient field not elliptic: {0}")]
    Ellipticity(String),
    #[error("matrix not usable for projected SOR: {0}")]
    BadMatrix(String),
    #[error("solver did not converge: {0}")]
    SolverStall(String),
    #[error("rescaling is degenerate: the sphere trace of u vanishes identically")]
    DegenerateRescale,
    #[error("resolution floor: {0}")]
    ResolutionFloor(String),
    #[error("not enough data points: {0}")]
    TooFewPoints(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scenario: {0}")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
