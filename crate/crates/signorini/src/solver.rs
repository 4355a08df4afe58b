//! Projected SOR for the complementarity system.
//!
//! One sweep updates every non-Dirichlet node by the SOR relaxation
//!   uᵢ ← uᵢ + ω (bᵢ - Σⱼ aᵢⱼ uⱼ) / aᵢᵢ
//! followed by projection uᵢ ← max(uᵢ, ψᵢ) on constrained nodes.  For
//! symmetric positive definite matrices and 0 < ω < 2 each component update
//! lowers the quadratic energy, so the iteration converges to the unique
//! solution of the complementarity problem.
//!
//! The sequential sweep visits nodes in index order.  The parallel sweep
//! processes the parity color classes one at a time: nodes of one class share
//! no coupling, so their updates read only frozen values and the result does
//! not depend on thread scheduling.

use crate::assembly::{LCPSystem, NodeClass};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relaxation factor in (0, 2).
    pub omega: f64,
    pub max_sweeps: usize,
    /// Convergence threshold for |A u - b| on free nodes, relative to
    /// max(1, |b|_inf).
    pub tol_linear: f64,
    /// Convergence threshold for the complementarity residual
    /// max |min(u - ψ, A u - b)| on constrained nodes, same scaling.
    pub tol_complementarity: f64,
    /// Record the energy after every sweep.
    pub track_energy: bool,
    /// Residual check period in sweeps.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            omega: 1.7,
            max_sweeps: 50_000,
            tol_linear: 1e-10,
            tol_complementarity: 1e-12,
            track_energy: false,
            check_every: 50,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::InvalidParam(format!(
                "relaxation factor must lie in (0, 2), got {}",
                self.omega
            )));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParam("check_every must be at least 1".into()));
        }
        if !(self.tol_linear > 0.0 && self.tol_complementarity > 0.0) {
            return Err(Error::InvalidParam("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub sweeps: usize,
    pub converged: bool,
    pub linear_residual: f64,
    pub complementarity_residual: f64,
    pub energy: f64,
    /// Constrained nodes touching the obstacle at tolerance 10 tol_c scale.
    pub active_set: Vec<usize>,
    /// Energy before the first sweep and after each sweep (if tracked).
    pub energy_trace: Vec<f64>,
}

/// Discrete energy cell_volume (½ uᵀA u - bᵀu) summed over non-Dirichlet
/// rows.  Eliminated rows carry no Dirichlet couplings, so this is the
/// quadratic functional the iteration minimizes over the feasible set.
pub fn energy(sys: &LCPSystem, u: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..sys.matrix.nrows {
        if sys.classes[i] == NodeClass::Dirichlet {
            continue;
        }
        let (cols, vals) = sys.matrix.row(i);
        let au: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * u[j]).sum();
        e += 0.5 * u[i] * au - sys.rhs[i] * u[i];
    }
    sys.cell_volume * e
}

/// (linear, complementarity) residuals, both in the max norm.  The
/// complementarity part |min(u - ψ, A u - b)| vanishes exactly when the node
/// either touches the obstacle with nonnegative residual or is strictly above
/// it with zero residual.
pub fn residuals(sys: &LCPSystem, u: &[f64]) -> (f64, f64) {
    let mut lin = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..sys.matrix.nrows {
        match sys.classes[i] {
            NodeClass::Dirichlet => {}
            NodeClass::Free => {
                let (cols, vals) = sys.matrix.row(i);
                let au: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * u[j]).sum();
                lin = lin.max((au - sys.rhs[i]).abs());
            }
            NodeClass::Constrained => {
                let (cols, vals) = sys.matrix.row(i);
                let au: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * u[j]).sum();
                let q = au - sys.rhs[i];
                let s = u[i] - sys.obstacle[i];
                comp = comp.max(s.min(q).abs());
            }
        }
    }
    (lin, comp)
}

/// Constrained nodes with u - ψ <= tol.
pub fn contact_set(sys: &LCPSystem, u: &[f64], tol: f64) -> Vec<usize> {
    (0..sys.classes.len())
        .filter(|&i| sys.classes[i] == NodeClass::Constrained && u[i] - sys.obstacle[i] <= tol)
        .collect()
}

fn validate_system(sys: &LCPSystem) -> Result<()> {
    let n = sys.matrix.nrows;
    if sys.rhs.len() != n || sys.classes.len() != n || sys.obstacle.len() != n {
        return Err(Error::BadMatrix("system arrays disagree on length".into()));
    }
    for i in 0..n {
        if sys.classes[i] == NodeClass::Dirichlet {
            continue;
        }
        let d = sys.matrix.diag(i);
        if !(d > 0.0) {
            return Err(Error::BadMatrix(format!(
                "row {i} needs a positive diagonal, found {d}"
            )));
        }
    }
    Ok(())
}

fn initial_guess(sys: &LCPSystem, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = sys.matrix.nrows;
    let mut u = vec![0.0; n];
    if let Some(w) = warm {
        if w.len() != n {
            return Err(Error::InvalidParam(format!(
                "warm start has {} entries for a system of {n}",
                w.len()
            )));
        }
        u.copy_from_slice(w);
    }
    for i in 0..n {
        match sys.classes[i] {
            NodeClass::Dirichlet => u[i] = sys.rhs[i],
            NodeClass::Constrained => u[i] = u[i].max(sys.obstacle[i]),
            NodeClass::Free => {}
        }
    }
    Ok(u)
}

#[inline]
fn relax_node(sys: &LCPSystem, u: &[f64], i: usize, omega: f64) -> f64 {
    let (cols, vals) = sys.matrix.row(i);
    let mut sigma = 0.0;
    let mut aii = 0.0;
    for (&j, &v) in cols.iter().zip(vals) {
        sigma += v * u[j];
        if j == i {
            aii = v;
        }
    }
    let val = u[i] + omega * (sys.rhs[i] - sigma) / aii;
    if sys.classes[i] == NodeClass::Constrained {
        val.max(sys.obstacle[i])
    } else {
        val
    }
}

fn sweep_seq(sys: &LCPSystem, u: &mut [f64], omega: f64, order: &[usize]) {
    for &i in order {
        u[i] = relax_node(sys, u, i, omega);
    }
}

#[cfg(feature = "parallel")]
fn sweep_colored(sys: &LCPSystem, u: &mut [f64], omega: f64, colors: &[Vec<usize>], scratch: &mut Vec<f64>) {
    use rayon::prelude::*;
    for color in colors {
        {
            let frozen: &[f64] = u;
            color
                .par_iter()
                .map(|&i| relax_node(sys, frozen, i, omega))
                .collect_into_vec(scratch);
        }
        for (&i, &val) in color.iter().zip(scratch.iter()) {
            u[i] = val;
        }
    }
}

enum SweepPlan<'a> {
    Seq(Vec<usize>),
    #[cfg(feature = "parallel")]
    Colored(&'a [Vec<usize>]),
    #[cfg(not(feature = "parallel"))]
    #[allow(dead_code)]
    Never(std::marker::PhantomData<&'a ()>),
}

fn run(sys: &LCPSystem, cfg: &SolverConfig, warm: Option<&[f64]>, plan: SweepPlan) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    validate_system(sys)?;
    let mut u = initial_guess(sys, warm)?;
    let scale = sys.rhs.iter().fold(1.0f64, |m, &b| m.max(b.abs()));
    let mut trace = Vec::new();
    if cfg.track_energy {
        trace.push(energy(sys, &u));
    }
    #[cfg(feature = "parallel")]
    let mut scratch: Vec<f64> = Vec::new();

    let mut sweeps = 0;
    let mut converged = false;
    let (mut lin, mut comp) = residuals(sys, &u);
    if lin <= cfg.tol_linear * scale && comp <= cfg.tol_complementarity * scale {
        converged = true;
    }
    while !converged && sweeps < cfg.max_sweeps {
        match &plan {
            SweepPlan::Seq(order) => sweep_seq(sys, &mut u, cfg.omega, order),
            #[cfg(feature = "parallel")]
            SweepPlan::Colored(colors) => sweep_colored(sys, &mut u, cfg.omega, colors, &mut scratch),
            #[cfg(not(feature = "parallel"))]
            SweepPlan::Never(_) => unreachable!(),
        }
        sweeps += 1;
        if cfg.track_energy {
            trace.push(energy(sys, &u));
        }
        if sweeps % cfg.check_every == 0 || sweeps == cfg.max_sweeps {
            let (l, c) = residuals(sys, &u);
            lin = l;
            comp = c;
            if lin <= cfg.tol_linear * scale && comp <= cfg.tol_complementarity * scale {
                converged = true;
            }
        }
    }
    let (l, c) = residuals(sys, &u);
    let report = SolveReport {
        sweeps,
        converged,
        linear_residual: l,
        complementarity_residual: c,
        energy: energy(sys, &u),
        active_set: contact_set(sys, &u, 10.0 * cfg.tol_complementarity * scale),
        energy_trace: trace,
    };
    Ok((u, report))
}

fn seq_order(sys: &LCPSystem) -> Vec<usize> {
    (0..sys.classes.len()).filter(|&i| sys.classes[i] != NodeClass::Dirichlet).collect()
}

/// Solves the system with the sweep strategy picked by the build: colored
/// sweeps when the `parallel` feature is on and the system carries colors,
/// index-ordered sweeps otherwise.
pub fn psor_solve(sys: &LCPSystem, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    #[cfg(feature = "parallel")]
    if let Some(colors) = &sys.colors {
        return run(sys, cfg, warm, SweepPlan::Colored(colors));
    }
    psor_solve_seq(sys, cfg, warm)
}

/// Always sweeps sequentially in index order, independent of features.
pub fn psor_solve_seq(sys: &LCPSystem, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    run(sys, cfg, warm, SweepPlan::Seq(seq_order(sys)))
}

#[cfg(feature = "parallel")]
/// Colored sweeps; errors when the system has no coloring.
pub fn psor_solve_par(sys: &LCPSystem, cfg: &SolverConfig, warm: Option<&[f64]>) -> Result<(Vec<f64>, SolveReport)> {
    match &sys.colors {
        Some(colors) => run(sys, cfg, warm, SweepPlan::Colored(colors)),
        None => Err(Error::InvalidParam("system carries no color classes".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_lcp, EllipticCoefficients, ProblemSpec};
    use crate::csr::CsrMatrix;
    use crate::grid::Grid;
    use crate::manifold::ThinManifold;
    use std::sync::Arc;

    fn tent_spec(m: usize, c: f64) -> ProblemSpec {
        ProblemSpec::new(
            Grid::new(1, 1.0, m).unwrap(),
            EllipticCoefficients::identity(),
            Arc::new(|_| 0.0),
            ThinManifold::flat(1.0),
            Arc::new(move |_| c),
            Arc::new(|_| 0.0),
        )
        .unwrap()
    }

    #[test]
    fn tent_solution_is_exact() {
        let spec = tent_spec(129, 1.0);
        let sys = assemble_lcp(&spec).unwrap();
        let cfg = SolverConfig { omega: 1.5, ..Default::default() };
        let (u, report) = psor_solve(&sys, &cfg, None).unwrap();
        assert!(report.converged);
        let grid = spec.grid;
        let mut err = 0.0f64;
        for i in 0..grid.node_count() {
            let x = grid.point(i)[0];
            err = err.max((u[i] - (1.0 - x.abs())).abs());
        }
        assert!(err <= 1e-8, "tent error {err}");
        assert!(report.complementarity_residual <= 1e-10);
        // Energy h (½ uᵀA u) of the tent equals c² = 1.
        assert!((report.energy - 1.0).abs() <= 1e-7, "energy {}", report.energy);
        // Contact is exactly the peak node.
        let contact = contact_set(&sys, &u, 1e-10);
        assert_eq!(contact, vec![grid.origin_index()]);
    }

    #[test]
    fn two_node_system_by_hand() {
        // A = [[2,-1],[-1,2]], b = [1,-1], ψ₁ = 0.5: the unconstrained
        // solution (1/3, -1/3) violates the bound, so u₁ = 1/2 and the free
        // row gives u₀ = (1 + 1/2)/2 = 3/4.
        let a = CsrMatrix::from_rows(vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 2.0)]]);
        let sys = LCPSystem::from_raw(a, vec![1.0, -1.0], &[(1, 0.5)]).unwrap();
        let cfg = SolverConfig { tol_linear: 1e-14, tol_complementarity: 1e-14, ..Default::default() };
        let (u, report) = psor_solve_seq(&sys, &cfg, None).unwrap();
        assert!(report.converged);
        assert!((u[0] - 0.75).abs() <= 1e-12);
        assert!((u[1] - 0.5).abs() <= 1e-12);
        assert_eq!(report.active_set, vec![1]);
    }

    #[test]
    fn energy_never_increases() {
        let rows = vec![
            vec![(0, 4.0), (1, -1.0), (3, -0.5)],
            vec![(0, -1.0), (1, 4.0), (2, -1.0)],
            vec![(1, -1.0), (2, 4.0), (3, -1.0)],
            vec![(0, -0.5), (2, -1.0), (3, 4.0)],
        ];
        let a = CsrMatrix::from_rows(rows);
        let sys = LCPSystem::from_raw(a, vec![1.0, -2.0, 0.5, 3.0], &[(1, 0.1), (2, -0.2)]).unwrap();
        let cfg = SolverConfig { omega: 1.9, track_energy: true, ..Default::default() };
        let (_, report) = psor_solve_seq(&sys, &cfg, None).unwrap();
        assert!(report.converged);
        for w in report.energy_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn dirichlet_values_are_pinned() {
        let spec = tent_spec(65, 0.3);
        let sys = assemble_lcp(&spec).unwrap();
        let (u, _) = psor_solve(&sys, &SolverConfig::default(), None).unwrap();
        assert_eq!(u[0], 0.0);
        assert_eq!(u[64], 0.0);
    }

    #[test]
    fn feasibility_is_exact_after_projection() {
        let spec = tent_spec(65, 0.7);
        let sys = assemble_lcp(&spec).unwrap();
        let (u, _) = psor_solve(&sys, &SolverConfig::default(), None).unwrap();
        for i in sys.constrained_indices() {
            assert!(u[i] >= sys.obstacle[i]);
        }
    }

    #[test]
    fn rejects_bad_relaxation_factor() {
        let spec = tent_spec(5, 1.0);
        let sys = assemble_lcp(&spec).unwrap();
        let cfg = SolverConfig { omega: 2.0, ..Default::default() };
        assert!(psor_solve(&sys, &cfg, None).is_err());
    }

    #[test]
    fn rejects_short_warm_start() {
        let spec = tent_spec(5, 1.0);
        let sys = assemble_lcp(&spec).unwrap();
        let warm = vec![0.0; 3];
        assert!(psor_solve(&sys, &SolverConfig::default(), Some(&warm)).is_err());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn colored_and_sequential_sweeps_agree() {
        let spec = tent_spec(129, 1.0);
        let sys = assemble_lcp(&spec).unwrap();
        let cfg = SolverConfig { omega: 1.5, ..Default::default() };
        let (u_seq, _) = psor_solve_seq(&sys, &cfg, None).unwrap();
        let (u_par, rep) = psor_solve_par(&sys, &cfg, None).unwrap();
        assert!(rep.converged);
        let diff = u_seq.iter().zip(&u_par).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        assert!(diff <= 1e-7, "sweep strategies disagree by {diff}");
    }

    #[test]
    fn warm_start_cuts_sweeps() {
        let spec = tent_spec(129, 1.0);
        let sys = assemble_lcp(&spec).unwrap();
        let cfg = SolverConfig { omega: 1.5, ..Default::default() };
        let (u, first) = psor_solve(&sys, &cfg, None).unwrap();
        let (_, second) = psor_solve(&sys, &cfg, Some(&u)).unwrap();
        assert!(second.sweeps <= first.sweeps / 4);
    }
}
