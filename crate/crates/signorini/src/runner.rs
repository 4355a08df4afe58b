//! Runs a resolved configuration end to end and writes the artifact files:
//!
//! * `solution.bin` — node values, f64 little-endian, row-major;
//! * `solution.meta.txt` — grid shape and layout, one `key = value` per line;
//! * `profile.csv` — frequency ladder (when a profile section is present);
//! * `fits.csv` — every power-law fit computed during the run;
//! * `energy.csv` — per-sweep energy (when tracking is on);
//! * `report.txt` — grep-able summary, one finding per line.
//!
//! All artifacts are deterministic: the same config produces byte-identical
//! files on every run.

use crate::assembly::{assemble_lcp, normalize_problem, reduce_source};
use crate::blowup::{blowup_sequence, BlowupSequence};
use crate::config::ResolvedConfig;
use crate::frequency::{
    almost_monotonicity_check, compute_profile, consecutive_drop_check, decay_fit_boundary,
    decay_fit_sup, snapped_radii, DecayFit, DropReport, FrequencyProfile, MonotonicityReport,
};
use crate::grid::{Grid, GridFunction};
use crate::solver::{psor_solve, SolveReport};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub struct RunSummary {
    pub solution: GridFunction,
    pub solve: SolveReport,
    pub profile: Option<FrequencyProfile>,
    pub boundary_decay: Option<DecayFit>,
    pub monotonicity: Option<MonotonicityReport>,
    pub drop: Option<DropReport>,
    pub growth: Option<DecayFit>,
    pub blowup: Option<BlowupSequence>,
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn solution_bytes(u: &GridFunction) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(8 * u.values.len());
    for v in &u.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

fn meta_text(scenario: &str, grid: &Grid) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {scenario}");
    let _ = writeln!(s, "n = {}", grid.n);
    let _ = writeln!(s, "m = {}", grid.m);
    let _ = writeln!(s, "l = {}", grid.l);
    let _ = writeln!(s, "h = {}", grid.h);
    let _ = writeln!(s, "layout = row-major");
    let _ = writeln!(s, "dtype = f64-le");
    s
}

/// Columns: r, boundary integral F, truncated value G = max(F, r^texp),
/// branch marker, frequency Phi, scaling norm d_r.  The header is a stable
/// external interface; scripts grep these names.
fn profile_csv(p: &FrequencyProfile) -> String {
    let mut s = String::from("r,F,G,branch,Phi,d_r\n");
    for i in 0..p.radii.len() {
        let branch = if p.truncated[i] { "floor" } else { "pde" };
        let _ = writeln!(
            s,
            "{},{},{},{branch},{},{}",
            p.radii[i], p.boundary_values[i], p.truncated_values[i], p.frequency[i],
            p.scaling_norm[i]
        );
    }
    s
}

/// Stable header: name, exponent, constant (the prefactor C in C * r^mu),
/// residual (rms of the log-log fit) and the fitted radius window.
fn fits_csv(fits: &[(String, DecayFit)]) -> String {
    let mut s = String::from("name,exponent,constant,residual,r_lo,r_hi\n");
    for (name, f) in fits {
        let _ = writeln!(
            s,
            "{name},{},{},{},{},{}",
            f.exponent, f.log_constant.exp(), f.residual_rms, f.r_lo, f.r_hi
        );
    }
    s
}

fn energy_csv(trace: &[f64]) -> String {
    let mut s = String::from("sweep,energy\n");
    for (i, e) in trace.iter().enumerate() {
        let _ = writeln!(s, "{i},{e}");
    }
    s
}

/// Executes the configured pipeline and writes all artifacts into `out_dir`
/// (created if missing).  Returns the in-memory summary; a stalled solve
/// still writes `report.txt` before returning the error.
pub fn run_experiment(cfg: &ResolvedConfig, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let grid = cfg.grid;
    let mut spec = cfg.scenario.build(grid)?;

    let mut report = String::new();
    let _ = writeln!(report, "scenario = {}", cfg.scenario.name);
    let _ = writeln!(report, "grid: n = {}, m = {}, l = {}, h = {}", grid.n, grid.m, grid.l, grid.h);
    if cfg.normalize {
        spec = normalize_problem(&spec)?;
        let _ = writeln!(report, "normalize: applied (artifacts are in the normalized frame)");
    }

    let (spec, lift) = if cfg.reduce_source {
        let (reduced, w) = reduce_source(&spec, &cfg.solver)?;
        (reduced, Some(w))
    } else {
        (spec, None)
    };

    let sys = assemble_lcp(&spec)?;
    let (mut values, solve) = psor_solve(&sys, &cfg.solver, None)?;
    let _ = writeln!(
        report,
        "solve: converged = {}, sweeps = {}, linear_residual = {:e}, complementarity_residual = {:e}, energy = {}, active_nodes = {}",
        solve.converged, solve.sweeps, solve.linear_residual, solve.complementarity_residual,
        solve.energy, solve.active_set.len()
    );
    if !solve.converged {
        let _ = writeln!(report, "status: FAIL (solver stalled)");
        write_file(out_dir, "report.txt", report.as_bytes())?;
        return Err(Error::SolverStall(format!(
            "{}: linear residual {:e} after {} sweeps",
            cfg.scenario.name, solve.linear_residual, solve.sweeps
        )));
    }
    if let Some(w) = &lift {
        // The stored artifact is the solution of the original problem.
        for (v, wv) in values.iter_mut().zip(&w.values) {
            *v += wv;
        }
    }
    let solution = GridFunction::from_values(grid, values)?;

    write_file(out_dir, "solution.bin", &solution_bytes(&solution))?;
    write_file(out_dir, "solution.meta.txt", meta_text(cfg.scenario.name, &grid).as_bytes())?;
    if cfg.solver.track_energy {
        write_file(out_dir, "energy.csv", energy_csv(&solve.energy_trace).as_bytes())?;
    }

    let mut fits: Vec<(String, DecayFit)> = Vec::new();

    let mut profile_out = None;
    let mut boundary_decay = None;
    let mut monotonicity = None;
    let mut drop = None;
    if let Some((prof_spec, delta0)) = &cfg.profile {
        let profile = compute_profile(&solution, &grid, prof_spec, *delta0)?;
        write_file(out_dir, "profile.csv", profile_csv(&profile).as_bytes())?;
        let floor_count = profile.truncated.iter().filter(|&&t| t).count();
        let (lo, hi) = profile
            .frequency
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        let _ = writeln!(
            report,
            "profile: radii = {}, on_floor = {floor_count}/{}, frequency in [{lo}, {hi}]",
            profile.radii.len(),
            profile.radii.len()
        );

        let r_hi = profile.radii[0];
        let r_lo = *profile.radii.last().expect("ladder not empty");
        match decay_fit_boundary(&profile, r_lo, r_hi) {
            Ok(fit) => {
                let _ = writeln!(
                    report,
                    "boundary_decay: exponent = {}, rms = {}",
                    fit.exponent, fit.residual_rms
                );
                fits.push(("boundary_decay".into(), fit));
                boundary_decay = Some(fit);
            }
            Err(e) => {
                // The fit needs enough radii off the truncation floor.
                let _ = writeln!(report, "boundary_decay: skipped ({e})");
            }
        }

        if let Some((params, slack)) = &cfg.monotonicity {
            let mono = almost_monotonicity_check(&profile, params, *slack)?;
            let _ = writeln!(
                report,
                "monotonicity: {}, worst_violation = {}, minimal_c = {}",
                if mono.pass { "PASS" } else { "FAIL" },
                mono.worst_violation,
                mono.minimal_c.map_or("none".into(), |c| c.to_string())
            );
            let dr = consecutive_drop_check(&profile, params, *slack)?;
            let _ = writeln!(
                report,
                "drop: {}, worst_excess = {}",
                if dr.pass { "PASS" } else { "FAIL" },
                dr.worst_excess
            );
            monotonicity = Some(mono);
            drop = Some(dr);
        }
        profile_out = Some(profile);
    }

    let mut growth = None;
    if let Some(g) = &cfg.growth {
        let radii = snapped_radii(&grid, g.r_lo, g.r_hi, g.points)?;
        let fit = decay_fit_sup(&solution, &radii)?;
        let _ = writeln!(report, "sup_growth: exponent = {}, rms = {}", fit.exponent, fit.residual_rms);
        fits.push(("sup_growth".into(), fit));
        growth = Some(fit);
    }

    let mut blowup = None;
    if let Some(b) = &cfg.blowup {
        let target = Grid::new(grid.n, b.target_l, b.target_m)?;
        let delta0 = cfg.profile.as_ref().map_or(0.0, |(_, d)| *d);
        let seq = blowup_sequence(
            &solution,
            b.r0,
            b.sigma,
            b.depth,
            target,
            b.q,
            delta0,
            (b.s_lo, b.s_hi),
        )?;
        for (k, step) in seq.steps.iter().enumerate() {
            let _ = writeln!(
                report,
                "blowup stage {k}: radius = {}, l2_change = {}, h1_change = {}, sup_exponent = {}, frequency_mean = {}",
                step.radius, step.l2_change, step.h1_change, step.sup_fit.exponent,
                step.frequency_mean
            );
            fits.push((format!("stage{k}_sup"), step.sup_fit));
        }
        blowup = Some(seq);
    }

    if !fits.is_empty() {
        write_file(out_dir, "fits.csv", fits_csv(&fits).as_bytes())?;
    }
    let _ = writeln!(report, "status: ok");
    write_file(out_dir, "report.txt", report.as_bytes())?;

    Ok(RunSummary {
        solution,
        solve,
        profile: profile_out,
        boundary_decay,
        monotonicity,
        drop,
        growth,
        blowup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn run_from(text: &str, dir: &Path) -> Result<RunSummary> {
        run_experiment(&RunConfig::from_toml_str(text).unwrap().resolve().unwrap(), dir)
    }

    #[test]
    fn tent_run_writes_solution_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_from("scenario = \"tent-1d\"\n[grid]\nm = 65\n", dir.path()).unwrap();
        assert!(summary.solve.converged);

        let bin = fs::read(dir.path().join("solution.bin")).unwrap();
        assert_eq!(bin.len(), 65 * 8);
        // Center node carries the obstacle height.
        let mid = 32 * 8;
        let v = f64::from_le_bytes(bin[mid..mid + 8].try_into().unwrap());
        assert!((v - 1.0).abs() <= 1e-9);

        let meta = fs::read_to_string(dir.path().join("solution.meta.txt")).unwrap();
        assert!(meta.contains("m = 65") && meta.contains("dtype = f64-le"));
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("converged = true") && report.contains("status: ok"));
    }

    #[test]
    fn diagnostics_sections_produce_their_files() {
        let text = r#"
scenario = "flat-2d"
[grid]
m = 65
[solver]
omega = 1.9
[profile]
r_max = 0.4
rho = 0.9
count = 12
q = 180
[monotonicity]
alpha = 0.4
beta = 1.0
c_budget = 2.0
slack = 0.1
[growth]
r_lo = 0.1
r_hi = 0.4
"#;
        let dir = tempfile::tempdir().unwrap();
        let summary = run_from(text, dir.path()).unwrap();

        let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
        assert_eq!(profile.lines().count(), 13);
        assert!(profile.starts_with("r,F,G,branch,Phi,d_r\n"));

        let fits = fs::read_to_string(dir.path().join("fits.csv")).unwrap();
        assert!(fits.contains("boundary_decay,") && fits.contains("sup_growth,"));

        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("monotonicity: PASS"), "{report}");
        assert!(report.contains("drop: PASS"), "{report}");

        // Hand check: boundary data of degree 3/2 gives squared boundary
        // integrals decaying with exponent near 2*1.5 + (n-1) = 4.
        let fit = summary.boundary_decay.unwrap();
        assert!((fit.exponent - 4.0).abs() <= 0.2, "exponent {}", fit.exponent);
        let growth = summary.growth.unwrap();
        assert!((1.3..=1.7).contains(&growth.exponent), "growth {}", growth.exponent);
    }

    #[test]
    fn same_config_gives_identical_bytes() {
        let text = r#"
scenario = "flat-2d"
[grid]
m = 33
[profile]
r_max = 0.4
rho = 0.9
count = 8
q = 90
"#;
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_from(text, d1.path()).unwrap();
        run_from(text, d2.path()).unwrap();
        for name in ["solution.bin", "profile.csv", "report.txt"] {
            let a = fs::read(d1.path().join(name)).unwrap();
            let b = fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn normalize_flag_shifts_the_frame() {
        // Normalized tent: obstacle drops to 0, boundary data to -1, so the
        // stored solution is the tent minus 1.
        let text = "scenario = \"tent-1d\"\n[grid]\nm = 65\n[solver]\nnormalize = true\n";
        let dir = tempfile::tempdir().unwrap();
        let summary = run_from(text, dir.path()).unwrap();
        assert!(summary.solution.values[32].abs() <= 1e-9);
        assert!((summary.solution.values[0] + 1.0).abs() <= 1e-12);
        let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
        assert!(report.contains("normalized frame"));
    }

    #[test]
    fn energy_tracking_writes_the_trace() {
        let text = "scenario = \"tent-1d\"\n[grid]\nm = 33\n[solver]\ntrack_energy = true\n";
        let dir = tempfile::tempdir().unwrap();
        let summary = run_from(text, dir.path()).unwrap();
        let energy = fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        assert_eq!(energy.lines().count(), summary.solve.energy_trace.len() + 1);
        // The obstacle forces a positive-energy tent; the trace must descend
        // to it monotonically.
        let last = *summary.solve.energy_trace.last().unwrap();
        assert!((last - 1.0).abs() <= 1e-6, "final energy {last}");
    }
}
