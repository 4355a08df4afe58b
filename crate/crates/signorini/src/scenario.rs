//! Named problem setups.  Each scenario fixes the continuum data (coefficient
//! field, thin manifold, obstacle, boundary values) and only leaves the grid
//! resolution to the caller, so runs are reproducible from a name plus m.

use crate::assembly::{EllipticCoefficients, MatrixFn, ProblemSpec};
use crate::blowup::{exact_signorini_2d, exact_signorini_3d, tent_1d, OracleField};
use crate::grid::{Grid, Point};
use crate::manifold::ThinManifold;
use crate::{Error, Result};
use std::sync::Arc;

/// A named problem setup; `build` discretizes it on the given grid.
#[derive(Clone, Copy)]
pub struct Scenario {
    pub name: &'static str,
    pub summary: &'static str,
    pub dim: usize,
    /// Nodes per axis giving a good cost/resolution balance.
    pub default_m: usize,
    builder: fn() -> Result<ScenarioData>,
}

struct ScenarioData {
    coefficients: EllipticCoefficients,
    manifold: ThinManifold,
    obstacle: crate::manifold::SurfaceFn,
    dirichlet: crate::assembly::SpaceFn,
}

impl Scenario {
    pub fn build(&self, grid: Grid) -> Result<ProblemSpec> {
        if grid.n != self.dim {
            return Err(Error::InvalidParam(format!(
                "scenario {} is {}-dimensional, grid has n = {}",
                self.name, self.dim, grid.n
            )));
        }
        let data = (self.builder)()?;
        ProblemSpec::new(
            grid,
            data.coefficients,
            Arc::new(|_| 0.0),
            data.manifold,
            data.obstacle,
            data.dirichlet,
        )
    }

    pub fn default_grid(&self) -> Grid {
        Grid::new(self.dim, 1.0, self.default_m).expect("registry defaults are valid")
    }
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("default_m", &self.default_m)
            .finish()
    }
}

/// Rank-one sine perturbation of the identity: a = I + 0.1 s sᵀ with
/// s = (sin x₁, sin x₂).  Equals I at the origin; eigenvalues 1 and
/// 1 + 0.1 |s|² stay within [1, 1.2] on the unit box.
fn sine_rank_one() -> Result<EllipticCoefficients> {
    let matrix: MatrixFn = Arc::new(|x: Point| {
        let (s1, s2) = (x[0].sin(), x[1].sin());
        [
            [1.0 + 0.1 * s1 * s1, 0.1 * s1 * s2, 0.0],
            [0.1 * s1 * s2, 1.0 + 0.1 * s2 * s2, 0.0],
            [0.0, 0.0, 1.0],
        ]
    });
    EllipticCoefficients::new(matrix, 1.0, 1.2)
}

fn tent_data() -> Result<ScenarioData> {
    Ok(ScenarioData {
        coefficients: EllipticCoefficients::identity(),
        manifold: ThinManifold::flat(1.0),
        obstacle: Arc::new(|_| 1.0),
        dirichlet: Arc::new(|_| 0.0),
    })
}

fn flat_2d_data() -> Result<ScenarioData> {
    let oracle = exact_signorini_2d();
    Ok(ScenarioData {
        coefficients: EllipticCoefficients::identity(),
        manifold: ThinManifold::flat(1.0),
        obstacle: Arc::new(|_| 0.0),
        dirichlet: Arc::new(move |x: Point| oracle.value(x)),
    })
}

fn curved_2d_data() -> Result<ScenarioData> {
    let oracle = exact_signorini_2d();
    Ok(ScenarioData {
        coefficients: sine_rank_one()?,
        manifold: ThinManifold::new(
            Arc::new(|xp: [f64; 2]| 0.2 * xp[0] * xp[0]),
            Arc::new(|xp: [f64; 2]| [0.4 * xp[0], 0.0]),
            1.0,
            false,
        )?,
        obstacle: Arc::new(|_| 0.0),
        // Boundary values follow the bent manifold so the contact region
        // stays attached to the parabola.
        dirichlet: Arc::new(move |x: Point| {
            oracle.value([x[0], x[1] - 0.2 * x[0] * x[0], 0.0])
        }),
    })
}

fn varcoef_2d_data() -> Result<ScenarioData> {
    let oracle = exact_signorini_2d();
    Ok(ScenarioData {
        coefficients: sine_rank_one()?,
        manifold: ThinManifold::flat(1.0),
        obstacle: Arc::new(|_| 0.0),
        dirichlet: Arc::new(move |x: Point| oracle.value(x)),
    })
}

fn flat_3d_data() -> Result<ScenarioData> {
    let oracle = exact_signorini_3d();
    Ok(ScenarioData {
        coefficients: EllipticCoefficients::identity(),
        manifold: ThinManifold::flat(1.0),
        obstacle: Arc::new(|_| 0.0),
        dirichlet: Arc::new(move |x: Point| oracle.value(x)),
    })
}

static SCENARIOS: &[Scenario] = &[
    Scenario {
        name: "tent-1d",
        summary: "membrane over a point obstacle of height 1; solution is the unit tent",
        dim: 1,
        default_m: 129,
        builder: tent_data,
    },
    Scenario {
        name: "flat-2d",
        summary: "Laplacian with flat interface and degree-3/2 boundary data",
        dim: 2,
        default_m: 257,
        builder: flat_2d_data,
    },
    Scenario {
        name: "curved-2d",
        summary: "sine-perturbed coefficients with the interface bent to x2 = 0.2 x1^2",
        dim: 2,
        default_m: 257,
        builder: curved_2d_data,
    },
    Scenario {
        name: "varcoef-2d",
        summary: "sine-perturbed coefficients, flat interface, degree-3/2 boundary data",
        dim: 2,
        default_m: 257,
        builder: varcoef_2d_data,
    },
    Scenario {
        name: "flat-3d",
        summary: "three-dimensional Laplacian with flat interface and degree-3/2 data",
        dim: 3,
        default_m: 65,
        builder: flat_3d_data,
    },
];

pub fn all() -> &'static [Scenario] {
    SCENARIOS
}

pub fn find(name: &str) -> Result<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.name == name).ok_or_else(|| {
        let known: Vec<&str> = SCENARIOS.iter().map(|s| s.name).collect();
        Error::UnknownScenario(format!("{name} (known: {})", known.join(", ")))
    })
}

/// Closed-form reference solution, for the scenarios that have one.
pub fn reference_oracle(name: &str) -> Option<OracleField> {
    match name {
        "tent-1d" => Some(tent_1d(1.0)),
        "flat-2d" => Some(exact_signorini_2d()),
        "flat-3d" => Some(exact_signorini_3d()),
        _ => None,
    }
}
