//! TOML run configuration.  A file names a scenario and optionally overrides
//! grid, solver and diagnostic settings; everything else falls back to the
//! scenario defaults.  Unknown keys are rejected so typos fail loudly.

use crate::frequency::{ProfileSpec, RegularityParams};
use crate::grid::Grid;
use crate::scenario::{self, Scenario};
use crate::solver::SolverConfig;
use crate::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub profile: Option<ProfileSection>,
    #[serde(default)]
    pub monotonicity: Option<MonotonicitySection>,
    #[serde(default)]
    pub growth: Option<GrowthSection>,
    #[serde(default)]
    pub blowup: Option<BlowupSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Nodes per axis (odd, >= 3); scenario default when omitted.
    pub m: Option<usize>,
    /// Box half-length; 1.0 when omitted.
    pub l: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default = "default_tol_linear")]
    pub tol_linear: f64,
    #[serde(default = "default_tol_complementarity")]
    pub tol_complementarity: f64,
    #[serde(default)]
    pub track_energy: bool,
    /// Shift the obstacle's affine part to zero and straighten a(0) before
    /// solving.  Artifacts are then in the normalized frame, so this is off
    /// by default.
    #[serde(default)]
    pub normalize: bool,
    /// Solve for the source lift first and work with the reduced problem.
    /// Off by default: the bundled scenarios are source-free.
    #[serde(default)]
    pub reduce_source: bool,
}

fn default_omega() -> f64 {
    SolverConfig::default().omega
}
fn default_max_sweeps() -> usize {
    SolverConfig::default().max_sweeps
}
fn default_tol_linear() -> f64 {
    SolverConfig::default().tol_linear
}
fn default_tol_complementarity() -> f64 {
    SolverConfig::default().tol_complementarity
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            omega: default_omega(),
            max_sweeps: default_max_sweeps(),
            tol_linear: default_tol_linear(),
            tol_complementarity: default_tol_complementarity(),
            track_energy: false,
            normalize: false,
            reduce_source: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    pub r_max: f64,
    pub rho: f64,
    pub count: usize,
    pub q: usize,
    #[serde(default)]
    pub delta0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonotonicitySection {
    pub alpha: f64,
    pub beta: f64,
    /// Defaults to alpha + beta - 1 (requires delta0 = 0).
    pub epsilon0: Option<f64>,
    pub c_budget: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSection {
    pub r_lo: f64,
    pub r_hi: f64,
    #[serde(default = "default_growth_points")]
    pub points: usize,
}

fn default_growth_points() -> usize {
    12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSection {
    pub r0: f64,
    pub sigma: f64,
    pub depth: usize,
    pub target_m: usize,
    pub target_l: f64,
    pub q: usize,
    pub s_lo: f64,
    pub s_hi: f64,
}

/// Config with every section resolved into the typed parameters the pipeline
/// consumes; construction performs all validation.
#[derive(Debug)]
pub struct ResolvedConfig {
    pub scenario: &'static Scenario,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub normalize: bool,
    pub reduce_source: bool,
    pub profile: Option<(ProfileSpec, f64)>,
    pub monotonicity: Option<(RegularityParams, f64)>,
    pub growth: Option<GrowthSection>,
    pub blowup: Option<BlowupSection>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let scenario = scenario::find(&self.scenario)?;
        let m = self.grid.m.unwrap_or(scenario.default_m);
        let l = self.grid.l.unwrap_or(1.0);
        let grid = Grid::new(scenario.dim, l, m)?;

        let solver = SolverConfig {
            omega: self.solver.omega,
            max_sweeps: self.solver.max_sweeps,
            tol_linear: self.solver.tol_linear,
            tol_complementarity: self.solver.tol_complementarity,
            track_energy: self.solver.track_energy,
            ..Default::default()
        };
        if !(solver.omega > 0.0 && solver.omega < 2.0) {
            return Err(Error::Config(format!(
                "solver.omega must lie in (0, 2), got {}",
                solver.omega
            )));
        }

        let profile = match &self.profile {
            None => None,
            Some(p) => {
                if !(p.delta0 >= 0.0) {
                    return Err(Error::Config(format!(
                        "profile.delta0 must be >= 0, got {}",
                        p.delta0
                    )));
                }
                let spec = ProfileSpec::new(p.r_max, p.rho, p.count, p.q)
                    .map_err(|e| Error::Config(format!("profile section: {e}")))?;
                Some((spec, p.delta0))
            }
        };

        let monotonicity = match &self.monotonicity {
            None => None,
            Some(mo) => {
                let (_, delta0) = profile.as_ref().ok_or_else(|| {
                    Error::Config("monotonicity section requires a profile section".into())
                })?;
                let params =
                    RegularityParams::new(mo.alpha, mo.beta, *delta0, mo.epsilon0, mo.c_budget)
                        .map_err(|e| Error::Config(format!("monotonicity section: {e}")))?;
                if !(mo.slack >= 0.0) {
                    return Err(Error::Config(format!(
                        "monotonicity.slack must be >= 0, got {}",
                        mo.slack
                    )));
                }
                Some((params, mo.slack))
            }
        };

        if let Some(g) = &self.growth {
            if !(g.r_lo > 0.0 && g.r_lo < g.r_hi && g.r_hi < l) {
                return Err(Error::Config(format!(
                    "growth window must satisfy 0 < r_lo < r_hi < {l}, got [{}, {}]",
                    g.r_lo, g.r_hi
                )));
            }
            if g.points < 3 {
                return Err(Error::Config(format!(
                    "growth.points must be >= 3, got {}",
                    g.points
                )));
            }
        }

        if let Some(b) = &self.blowup {
            if !(b.sigma > 0.0 && b.sigma < 1.0) {
                return Err(Error::Config(format!(
                    "blowup.sigma must lie in (0, 1), got {}",
                    b.sigma
                )));
            }
            if !(b.r0 > 0.0 && b.r0 < l) {
                return Err(Error::Config(format!(
                    "blowup.r0 must lie in (0, {l}), got {}",
                    b.r0
                )));
            }
            if !(b.s_lo > 0.0 && b.s_lo < b.s_hi && b.s_hi < b.target_l) {
                return Err(Error::Config(format!(
                    "blowup window must satisfy 0 < s_lo < s_hi < target_l, got [{}, {}]",
                    b.s_lo, b.s_hi
                )));
            }
            Grid::new(scenario.dim, b.target_l, b.target_m)
                .map_err(|e| Error::Config(format!("blowup target grid: {e}")))?;
        }

        Ok(ResolvedConfig {
            scenario,
            grid,
            solver,
            normalize: self.solver.normalize,
            reduce_source: self.solver.reduce_source,
            profile,
            monotonicity,
            growth: self.growth.clone(),
            blowup: self.blowup.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
scenario = "flat-2d"

[grid]
m = 129

[solver]
omega = 1.95
max_sweeps = 60000
track_energy = true

[profile]
r_max = 0.5
rho = 0.93
count = 24
q = 720

[monotonicity]
alpha = 0.4
beta = 1.0
c_budget = 2.0
slack = 0.05

[growth]
r_lo = 0.05
r_hi = 0.4

[blowup]
r0 = 0.4
sigma = 0.5
depth = 2
target_m = 129
target_l = 1.25
q = 360
s_lo = 0.4
s_hi = 0.9
"#;

    #[test]
    fn full_config_resolves() {
        let cfg = RunConfig::from_toml_str(FULL).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.scenario.name, "flat-2d");
        assert_eq!(r.grid.m, 129);
        assert_eq!(r.solver.omega, 1.95);
        assert!(r.solver.track_energy);
        let (prof, delta0) = r.profile.unwrap();
        assert_eq!(prof.q, 720);
        assert_eq!(delta0, 0.0);
        // epsilon0 omitted: defaults to alpha + beta - 1.
        let (params, slack) = r.monotonicity.unwrap();
        assert!((params.epsilon0 - 0.4).abs() <= 1e-15);
        assert_eq!(slack, 0.05);
        assert_eq!(r.growth.unwrap().points, 12);
        assert_eq!(r.blowup.unwrap().depth, 2);
    }

    #[test]
    fn minimal_config_uses_scenario_defaults() {
        let cfg = RunConfig::from_toml_str("scenario = \"tent-1d\"").unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.grid.m, 129);
        assert_eq!(r.grid.n, 1);
        assert_eq!(r.solver.omega, SolverConfig::default().omega);
        assert!(r.profile.is_none() && r.blowup.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("scenario = \"tent-1d\"\nomega = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("omega"), "{err}");
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let cfg = RunConfig::from_toml_str("scenario = \"mystery\"").unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn monotonicity_requires_profile() {
        let text = r#"
scenario = "flat-2d"
[monotonicity]
alpha = 0.4
beta = 1.0
c_budget = 2.0
slack = 0.05
"#;
        let err = RunConfig::from_toml_str(text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("requires a profile"), "{err}");
    }

    #[test]
    fn constraint_violations_name_the_field() {
        let text = r#"
scenario = "flat-2d"
[profile]
r_max = 0.5
rho = 0.4
count = 24
q = 64
"#;
        let err = RunConfig::from_toml_str(text).unwrap().resolve().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("profile") && msg.contains("(0.5, 1)"), "{msg}");

        let text = r#"
scenario = "flat-2d"
[solver]
omega = 2.5
"#;
        let err = RunConfig::from_toml_str(text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("solver.omega"), "{err}");
    }
}
