//! Frequency diagnostics on spheres around the origin.
//!
//! For a field u the boundary integral F(r) = ∫_{S_r} u² dσ is truncated from
//! below by r^{n+2+δ₀}, G(r) = max(F(r), r^{n+2+δ₀}), and the frequency is the
//! log-log slope Φ(r) = d log G / d log r.  On a geometric radius ladder the
//! slope is discretized with centered differences (one-sided at the ends).
//! When both stencil neighbors are on the truncated branch the slope is the
//! truncation exponent by construction, and the code assigns that stored value
//! exactly instead of dividing nearly identical logarithms.
//!
//! Around free boundary points Φ is bounded below by n + 2 and is almost
//! monotone: Ψ(r) = Φ(r) exp((C/ε₀) r^{ε₀}) is nondecreasing for some C
//! depending on the coefficient and graph regularity α, β via ε₀ ≤ α + β - 1
//! (strict inequality with margin δ₀ when the truncation is lifted).

use crate::grid::{Grid, GridFunction, Point, ScalarField};
use crate::sphere::build_sphere_sampler;
use crate::{Error, Result};

/// Radius ladder and quadrature resolution for a frequency profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileSpec {
    pub r_max: f64,
    /// Geometric ratio between consecutive radii, in (0.5, 1).
    pub rho: f64,
    pub count: usize,
    /// Sphere quadrature points per radius.
    pub q: usize,
}

impl ProfileSpec {
    pub fn new(r_max: f64, rho: f64, count: usize, q: usize) -> Result<Self> {
        if !(rho > 0.5 && rho < 1.0) {
            return Err(Error::InvalidParam(format!(
                "radius ratio must lie in (0.5, 1), got {rho}"
            )));
        }
        if count < 8 {
            return Err(Error::InvalidParam(format!(
                "profile needs at least 8 radii, got {count}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParam(format!("r_max must be positive, got {r_max}")));
        }
        Ok(ProfileSpec { r_max, rho, count, q })
    }
}

/// Frequency data on a descending geometric radius ladder.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    pub radii: Vec<f64>,
    /// F(r) = ∫_{S_r} u² dσ.
    pub boundary_values: Vec<f64>,
    /// G(r) = max(F(r), r^truncation_exponent).
    pub truncated_values: Vec<f64>,
    /// n + 2 + δ₀ as stored; truncated-branch frequencies equal this bitwise.
    pub truncation_exponent: f64,
    pub truncated: Vec<bool>,
    /// Φ(r) = d log G / d log r.
    pub frequency: Vec<f64>,
    /// d_r = (r^{-(n-1)} F(r))^{1/2}, the blow-up normalization.
    pub scaling_norm: Vec<f64>,
}

/// r_max ρ^i for i = 0..count (descending).
pub fn geometric_radii(r_max: f64, rho: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| r_max * rho.powi(i as i32)).collect()
}

/// F(r) for a single radius.
pub fn boundary_integral(field: &impl ScalarField, grid: &Grid, r: f64, q: usize) -> Result<f64> {
    Ok(build_sphere_sampler(grid, r, q)?.integrate_sq(field))
}

/// Builds the full frequency profile of `field` with truncation offset δ₀.
pub fn compute_profile(
    field: &impl ScalarField,
    grid: &Grid,
    prof: &ProfileSpec,
    delta0: f64,
) -> Result<FrequencyProfile> {
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidParam(format!("truncation offset must be >= 0, got {delta0}")));
    }
    let radii = geometric_radii(prof.r_max, prof.rho, prof.count);
    let r_min = *radii.last().expect("count >= 8");
    if r_min < 2.0 * grid.h {
        return Err(Error::ResolutionFloor(format!(
            "smallest profile radius {r_min:.4e} is below 2h = {:.4e}",
            2.0 * grid.h
        )));
    }
    let texp = (grid.n + 2) as f64 + delta0;

    let mut boundary_values = Vec::with_capacity(prof.count);
    for &r in &radii {
        boundary_values.push(boundary_integral(field, grid, r, prof.q)?);
    }
    let mut truncated_values = Vec::with_capacity(prof.count);
    let mut truncated = Vec::with_capacity(prof.count);
    for (i, &f) in boundary_values.iter().enumerate() {
        let floor = radii[i].powf(texp);
        truncated.push(floor > f);
        truncated_values.push(floor.max(f));
    }

    let logg: Vec<f64> = truncated_values.iter().map(|&g| g.ln()).collect();
    let lr = prof.rho.ln();
    let count = prof.count;
    let mut frequency = Vec::with_capacity(count);
    for i in 0..count {
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == count - 1 {
            (count - 2, count - 1)
        } else {
            (i - 1, i + 1)
        };
        if truncated[lo] && truncated[hi] {
            frequency.push(texp);
        } else {
            frequency.push((logg[lo] - logg[hi]) / (-((hi - lo) as f64) * lr));
        }
    }

    let npow = -((grid.n - 1) as f64);
    let scaling_norm = radii
        .iter()
        .zip(&boundary_values)
        .map(|(&r, &f)| (r.powf(npow) * f).sqrt())
        .collect();

    Ok(FrequencyProfile {
        radii,
        boundary_values,
        truncated_values,
        truncation_exponent: texp,
        truncated,
        frequency,
        scaling_norm,
    })
}

/// Regularity inputs for the monotonicity checks: coefficient Hölder exponent
/// α, graph exponent β, truncation offset δ₀ and gauge exponent ε₀.
#[derive(Debug, Clone, Copy)]
pub struct RegularityParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta0: f64,
    pub epsilon0: f64,
    /// Largest admissible gauge constant C.
    pub c_budget: f64,
}

impl RegularityParams {
    /// `epsilon0 = None` defaults to α + β - 1 (only admissible when δ₀ = 0).
    pub fn new(alpha: f64, beta: f64, delta0: f64, epsilon0: Option<f64>, c_budget: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::InvalidParam(format!(
                "coefficient exponent must lie in (0, 1/2), got alpha = {alpha}"
            )));
        }
        if !(beta > 0.5) {
            return Err(Error::InvalidParam(format!(
                "graph exponent must exceed 1/2, got beta = {beta}"
            )));
        }
        if !(delta0 >= 0.0) {
            return Err(Error::InvalidParam(format!("truncation offset must be >= 0, got {delta0}")));
        }
        let gap = alpha + beta - 1.0;
        let epsilon0 = epsilon0.unwrap_or(gap);
        if !(epsilon0 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "gauge exponent must be positive, got epsilon0 = {epsilon0}"
            )));
        }
        if delta0 == 0.0 {
            if epsilon0 > gap + 1e-12 {
                return Err(Error::InvalidParam(format!(
                    "gauge exponent must satisfy epsilon0 <= alpha + beta - 1 = {gap}, got {epsilon0}"
                )));
            }
        } else if delta0 + epsilon0 >= gap {
            return Err(Error::InvalidParam(format!(
                "offsets must satisfy delta0 + epsilon0 < alpha + beta - 1 = {gap}, got {}",
                delta0 + epsilon0
            )));
        }
        if !(c_budget > 0.0) {
            return Err(Error::InvalidParam(format!("gauge budget must be positive, got {c_budget}")));
        }
        Ok(RegularityParams { alpha, beta, delta0, epsilon0, c_budget })
    }
}

#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// Whether the budget constant already makes Ψ nondecreasing up to slack.
    pub pass: bool,
    /// Worst pairwise violation Ψ(small r) - Ψ(large r) at the budget C.
    pub worst_violation: f64,
    /// Pair of ladder indices realizing the worst violation (large r first).
    pub worst_pair: (usize, usize),
    /// Smallest C >= 0 passing the check, if any below the search cap.
    pub minimal_c: Option<f64>,
}

fn gauge(profile: &FrequencyProfile, eps: f64, c: f64) -> Vec<f64> {
    profile
        .radii
        .iter()
        .zip(&profile.frequency)
        .map(|(&r, &phi)| phi * ((c / eps) * r.powf(eps)).exp())
        .collect()
}

/// Largest Ψ(r_j) - Ψ(r_i) over pairs j > i (radii descend, so r_j < r_i);
/// positive values mean the gauged frequency increases toward the origin.
fn worst_pair_violation(psi: &[f64]) -> (f64, (usize, usize)) {
    let mut worst = f64::NEG_INFINITY;
    let mut pair = (0, 0);
    let mut min_val = psi[0];
    let mut min_idx = 0;
    for (j, &v) in psi.iter().enumerate().skip(1) {
        if v - min_val > worst {
            worst = v - min_val;
            pair = (min_idx, j);
        }
        if v < min_val {
            min_val = v;
            min_idx = j;
        }
    }
    (worst, pair)
}

/// Checks that Ψ(r) = Φ(r) exp((C/ε₀) r^{ε₀}) is nondecreasing in r up to
/// `slack`, with C the budget from `params`, and searches for the minimal
/// admissible C by bisection.
pub fn almost_monotonicity_check(
    profile: &FrequencyProfile,
    params: &RegularityParams,
    slack: f64,
) -> Result<MonotonicityReport> {
    if profile.radii.len() < 2 {
        return Err(Error::TooFewPoints("monotonicity needs at least two radii".into()));
    }
    if !(slack >= 0.0) {
        return Err(Error::InvalidParam(format!("slack must be >= 0, got {slack}")));
    }
    let violation = |c: f64| worst_pair_violation(&gauge(profile, params.epsilon0, c));
    let (worst_violation, worst_pair) = violation(params.c_budget);
    let pass = worst_violation <= slack;

    const CAP: f64 = 1e6;
    let minimal_c = if violation(0.0).0 <= slack {
        Some(0.0)
    } else {
        let mut hi = 1.0;
        while violation(hi).0 > slack && hi < CAP {
            hi *= 2.0;
        }
        if violation(hi).0 > slack {
            None
        } else {
            let mut lo = 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if violation(mid).0 <= slack {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    Ok(MonotonicityReport { pass, worst_violation, worst_pair, minimal_c })
}

#[derive(Debug, Clone)]
pub struct DropReport {
    pub pass: bool,
    /// Worst excess of Φ(next smaller r) - Φ(r) over its allowance.
    pub worst_excess: f64,
    /// Ladder index of the larger radius in the worst pair.
    pub at_index: usize,
}

/// Between consecutive ladder radii the frequency may drop toward the origin
/// by at most slack + C (r_i^{ε₀} - r_{i+1}^{ε₀}).
pub fn consecutive_drop_check(
    profile: &FrequencyProfile,
    params: &RegularityParams,
    slack: f64,
) -> Result<DropReport> {
    if profile.radii.len() < 2 {
        return Err(Error::TooFewPoints("drop check needs at least two radii".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut at = 0;
    for i in 0..profile.radii.len() - 1 {
        let allowance = slack
            + params.c_budget
                * (profile.radii[i].powf(params.epsilon0) - profile.radii[i + 1].powf(params.epsilon0));
        let excess = (profile.frequency[i + 1] - profile.frequency[i]) - allowance;
        if excess > worst {
            worst = excess;
            at = i;
        }
    }
    Ok(DropReport { pass: worst <= 0.0, worst_excess: worst, at_index: at })
}

/// Power-law fit summary for F(r) ~ C r^exponent (or a sup-norm analogue).
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub exponent: f64,
    pub log_constant: f64,
    pub residual_rms: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub points: usize,
}

/// Least-squares line through (log x, log y); returns (slope, intercept, rms).
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::TooFewPoints(format!("fit needs >= 2 matched points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParam("log-log fit needs strictly positive data".into()));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|&v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParam("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// Fits F(r) ~ C r^μ over the non-truncated ladder radii inside [r_lo, r_hi].
pub fn decay_fit_boundary(profile: &FrequencyProfile, r_lo: f64, r_hi: f64) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..profile.radii.len() {
        let r = profile.radii[i];
        if r >= r_lo && r <= r_hi && !profile.truncated[i] && profile.boundary_values[i] > 0.0 {
            xs.push(r);
            ys.push(profile.boundary_values[i]);
        }
    }
    if xs.len() < 5 {
        return Err(Error::TooFewPoints(format!(
            "boundary decay fit needs >= 5 usable radii in [{r_lo}, {r_hi}], found {}",
            xs.len()
        )));
    }
    let (exponent, log_constant, residual_rms) = fit_loglog(&xs, &ys)?;
    Ok(DecayFit {
        exponent,
        log_constant,
        residual_rms,
        r_lo: *xs.last().unwrap(),
        r_hi: xs[0],
        points: xs.len(),
    })
}

/// Geometric ladder in [r_lo, r_hi] with every radius snapped to a grid step
/// multiple.  Snapping keeps node-based sup norms aligned with the radii;
/// unsnapped ladders bias sup-decay exponents upward.
pub fn snapped_radii(grid: &Grid, r_lo: f64, r_hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(r_lo > 0.0 && r_hi > r_lo) {
        return Err(Error::InvalidParam(format!("need 0 < r_lo < r_hi, got [{r_lo}, {r_hi}]")));
    }
    let h = grid.h;
    let ratio = (r_lo / r_hi).powf(1.0 / (count.max(2) - 1) as f64);
    let mut out: Vec<f64> = Vec::with_capacity(count);
    for i in 0..count {
        let r = r_hi * ratio.powi(i as i32);
        let snapped = (r / h).round() * h;
        if snapped < 2.0 * h {
            continue;
        }
        if out.last().map_or(true, |&last| snapped < last) {
            out.push(snapped);
        }
    }
    if out.len() < 5 {
        return Err(Error::TooFewPoints(format!(
            "only {} distinct snapped radii in [{r_lo}, {r_hi}] at h = {h:.4e}",
            out.len()
        )));
    }
    Ok(out)
}

/// Fits sup_{|x| <= r} |u| ~ C r^κ over the given radii.
pub fn decay_fit_sup(u: &GridFunction, radii: &[f64]) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &r in radii {
        let s = u.sup_ball(r);
        if s > 0.0 {
            xs.push(r);
            ys.push(s);
        }
    }
    if xs.len() < 5 {
        return Err(Error::TooFewPoints(format!(
            "sup decay fit needs >= 5 radii with nonzero sup, found {}",
            xs.len()
        )));
    }
    let (exponent, log_constant, residual_rms) = fit_loglog(&xs, &ys)?;
    Ok(DecayFit {
        exponent,
        log_constant,
        residual_rms,
        r_lo: xs.iter().cloned().fold(f64::MAX, f64::min),
        r_hi: xs.iter().cloned().fold(f64::MIN, f64::max),
        points: xs.len(),
    })
}

/// Average of u² over the ball |x - x0| <= τ minus u(x0)², via node-centered
/// cells: cells fully inside count with weight h^n, cells crossing the sphere
/// are subsampled on a 4^n lattice.  Vanishes to O(τ²) at interior points of
/// the contact set and grows like τ^{2κ} at a free boundary point of degree κ.
pub fn mean_value_residual(u: &GridFunction, x0: Point, tau: f64) -> Result<f64> {
    let g = u.grid;
    let (n, h, l) = (g.n, g.h, g.l);
    if tau < 2.0 * h {
        return Err(Error::ResolutionFloor(format!(
            "mean value radius {tau:.4e} is below 2h = {:.4e}",
            2.0 * h
        )));
    }
    for k in 0..n {
        if x0[k].abs() + tau > l - 2.0 * h {
            return Err(Error::InvalidParam(format!(
                "ball of radius {tau} at {x0:?} needs 2h of clearance inside the box"
            )));
        }
    }
    let half_diag = 0.5 * h * (n as f64).sqrt();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for k in 0..n {
        let a = ((x0[k] - tau - h + l) / h).floor().max(0.0) as usize;
        let b = (((x0[k] + tau + h + l) / h).ceil() as usize).min(g.m - 1);
        lo[k] = a;
        hi[k] = b;
    }
    let sub = [-0.375 * h, -0.125 * h, 0.125 * h, 0.375 * h];
    let mut wsum = 0.0;
    let mut vsum = 0.0;
    let cell = h.powi(n as i32);
    let subcell = cell / 4f64.powi(n as i32);

    let mut ix = lo;
    loop {
        let p = g.point_of(ix);
        let mut d2 = 0.0;
        for k in 0..n {
            d2 += (p[k] - x0[k]) * (p[k] - x0[k]);
        }
        let d = d2.sqrt();
        if d <= tau - half_diag {
            let v = u.values[g.index(ix)];
            wsum += cell;
            vsum += cell * v * v;
        } else if d <= tau + half_diag {
            let mut sx = [0usize; 3];
            loop {
                let mut q = p;
                let mut q2 = 0.0;
                for k in 0..n {
                    q[k] += sub[sx[k]];
                    q2 += (q[k] - x0[k]) * (q[k] - x0[k]);
                }
                if q2.sqrt() <= tau {
                    let v = u.interpolate(q)?;
                    wsum += subcell;
                    vsum += subcell * v * v;
                }
                let mut k = 0;
                loop {
                    sx[k] += 1;
                    if sx[k] < 4 {
                        break;
                    }
                    sx[k] = 0;
                    k += 1;
                    if k == n {
                        break;
                    }
                }
                if k == n {
                    break;
                }
            }
        }
        let mut k = 0;
        loop {
            ix[k] += 1;
            if ix[k] <= hi[k] {
                break;
            }
            ix[k] = lo[k];
            k += 1;
            if k == n {
                break;
            }
        }
        if k == n {
            break;
        }
    }
    if wsum <= 0.0 {
        return Err(Error::TooFewPoints("mean value ball captured no cells".into()));
    }
    let center = u.interpolate(x0)?;
    Ok(vsum / wsum - center * center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // Degree-3/2 profile: ρ^{3/2} cos(3θ/2) on the upper half plane,
    // reflected evenly; F(r) = π r⁴ exactly.
    fn oracle2(scale: f64) -> impl Fn(Point) -> f64 {
        move |x: Point| {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if rho == 0.0 {
                return 0.0;
            }
            let theta = x[1].abs().atan2(x[0]);
            scale * rho.powf(1.5) * (1.5 * theta).cos()
        }
    }

    fn grid2() -> Grid {
        Grid::new(2, 1.0, 257).unwrap()
    }

    #[test]
    fn homogeneous_field_has_constant_frequency() {
        let prof = ProfileSpec::new(0.5, 0.93, 12, 720).unwrap();
        let p = compute_profile(&oracle2(1.0), &grid2(), &prof, 0.0).unwrap();
        for (i, &r) in p.radii.iter().enumerate() {
            let exact = PI * r.powi(4);
            assert!(
                (p.boundary_values[i] - exact).abs() <= 1e-12 * exact,
                "F({r}) = {} vs {exact}",
                p.boundary_values[i]
            );
            assert!((p.frequency[i] - 4.0).abs() <= 1e-11, "phi({r}) = {}", p.frequency[i]);
            assert!(!p.truncated[i]);
            let dr = (PI * r.powi(3)).sqrt();
            assert!((p.scaling_norm[i] - dr).abs() <= 1e-12 * dr);
        }
    }

    #[test]
    fn frequency_ignores_multiplicative_scale() {
        let prof = ProfileSpec::new(0.5, 0.93, 10, 720).unwrap();
        let p1 = compute_profile(&oracle2(1.0), &grid2(), &prof, 0.0).unwrap();
        let p2 = compute_profile(&oracle2(2.0), &grid2(), &prof, 0.0).unwrap();
        for i in 0..p1.radii.len() {
            // u² scales by 4 exactly, so F does too and the slope survives.
            assert_eq!(p2.boundary_values[i], 4.0 * p1.boundary_values[i]);
            assert!((p2.frequency[i] - p1.frequency[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn fully_truncated_branch_reports_exponent_exactly() {
        // At scale 1e-6, F = 1e-12 π r⁴ sits below r^{4.2} on the whole
        // ladder, so every stencil is on the truncated branch.
        let prof = ProfileSpec::new(0.5, 0.9, 10, 256).unwrap();
        let p = compute_profile(&oracle2(1e-6), &grid2(), &prof, 0.2).unwrap();
        assert!(p.truncated.iter().all(|&t| t));
        for &phi in &p.frequency {
            assert_eq!(phi.to_bits(), p.truncation_exponent.to_bits());
        }
    }

    #[test]
    fn truncation_crossover_splits_the_ladder() {
        // Scale c with c² π = 0.2^{0.2} puts the crossover F(r) = r^{4.2}
        // at r = 0.2: larger radii are truncated, smaller ones are not.
        let c = (0.2f64.powf(0.2) / PI).sqrt();
        let prof = ProfileSpec::new(0.5, 0.82, 12, 720).unwrap();
        let p = compute_profile(&oracle2(c), &grid2(), &prof, 0.2).unwrap();
        assert!(p.truncated[0]);
        assert!(!p.truncated[p.radii.len() - 1]);
        for i in 0..p.radii.len() {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == p.radii.len() - 1 {
                (p.radii.len() - 2, p.radii.len() - 1)
            } else {
                (i - 1, i + 1)
            };
            if p.truncated[lo] && p.truncated[hi] {
                assert_eq!(p.frequency[i].to_bits(), p.truncation_exponent.to_bits());
            } else if !p.truncated[lo] && !p.truncated[hi] {
                assert!((p.frequency[i] - 4.0).abs() <= 1e-10, "phi = {}", p.frequency[i]);
            } else {
                assert!(p.frequency[i] > 3.99 && p.frequency[i] < 4.21);
            }
        }
    }

    fn synthetic_profile(phi: impl Fn(f64) -> f64, r_max: f64, rho: f64, count: usize) -> FrequencyProfile {
        let radii = geometric_radii(r_max, rho, count);
        let frequency: Vec<f64> = radii.iter().map(|&r| phi(r)).collect();
        let boundary_values = vec![1.0; count];
        FrequencyProfile {
            truncated_values: boundary_values.clone(),
            boundary_values,
            truncation_exponent: 4.0,
            truncated: vec![false; count],
            scaling_norm: vec![1.0; count],
            radii,
            frequency,
        }
    }

    #[test]
    fn minimal_gauge_constant_matches_closed_form() {
        // Φ(r) = 4 - 0.1 r^{0.4} with ε₀ = 0.4: Ψ is nondecreasing exactly
        // when C >= 0.04 / (4 - 0.1 r^{0.4}), so the minimal constant sits
        // just above 0.0100 and below 0.0102.
        let p = synthetic_profile(|r| 4.0 - 0.1 * r.powf(0.4), 0.4, 0.93, 32);
        let params = RegularityParams::new(0.4, 1.0, 0.0, Some(0.4), 2.0).unwrap();
        let rep = almost_monotonicity_check(&p, &params, 0.0).unwrap();
        assert!(rep.pass);
        let c = rep.minimal_c.expect("bisection should bracket");
        assert!(c > 0.005 && c < 0.02, "minimal C = {c}");
    }

    #[test]
    fn oscillating_profile_fails_budget() {
        let radii = geometric_radii(0.4, 0.93, 32);
        let mut p = synthetic_profile(|_| 4.0, 0.4, 0.93, 32);
        p.frequency = (0..32).map(|i| 4.0 + if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        p.radii = radii;
        let params = RegularityParams::new(0.4, 1.0, 0.0, Some(0.4), 2.0).unwrap();
        let rep = almost_monotonicity_check(&p, &params, 0.0).unwrap();
        assert!(!rep.pass);
        match rep.minimal_c {
            Some(c) => assert!(c > 2.0, "oscillation should need C > 2, got {c}"),
            None => {}
        }
    }

    #[test]
    fn drop_check_flags_inward_jump() {
        let p = synthetic_profile(|_| 4.0, 0.4, 0.93, 16);
        let params = RegularityParams::new(0.4, 1.0, 0.0, Some(0.4), 2.0).unwrap();
        assert!(consecutive_drop_check(&p, &params, 0.05).unwrap().pass);

        let mut bad = p.clone();
        bad.frequency[3] = 3.2; // larger radius far below its inner neighbor
        let rep = consecutive_drop_check(&bad, &params, 0.05).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.at_index, 3);
    }

    #[test]
    fn boundary_decay_fit_recovers_power() {
        let prof = ProfileSpec::new(0.5, 0.93, 12, 720).unwrap();
        let p = compute_profile(&oracle2(1.0), &grid2(), &prof, 0.0).unwrap();
        let fit = decay_fit_boundary(&p, 0.05, 0.6).unwrap();
        assert!((fit.exponent - 4.0).abs() <= 1e-10, "exponent {}", fit.exponent);
        assert!((fit.log_constant - PI.ln()).abs() <= 1e-10);
        assert!(fit.residual_rms <= 1e-12);
        assert_eq!(fit.points, 12);
    }

    #[test]
    fn decay_fit_skips_truncated_radii() {
        let c = (0.2f64.powf(0.2) / PI).sqrt();
        let prof = ProfileSpec::new(0.5, 0.82, 12, 720).unwrap();
        let p = compute_profile(&oracle2(c), &grid2(), &prof, 0.2).unwrap();
        let fit = decay_fit_boundary(&p, 0.0, 1.0).unwrap();
        assert!(fit.points < 12);
        assert!((fit.exponent - 4.0).abs() <= 1e-9);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let prof = ProfileSpec::new(0.5, 0.93, 12, 256).unwrap();
        let p = compute_profile(&oracle2(1.0), &grid2(), &prof, 0.0).unwrap();
        assert!(matches!(
            decay_fit_boundary(&p, 0.45, 0.5),
            Err(crate::Error::TooFewPoints(_))
        ));
    }

    #[test]
    fn snapped_radii_are_grid_multiples() {
        let g = Grid::new(2, 1.0, 129).unwrap();
        let radii = snapped_radii(&g, 0.05, 0.4, 12).unwrap();
        assert!(radii.len() >= 5);
        for w in radii.windows(2) {
            assert!(w[1] < w[0]);
        }
        for &r in &radii {
            let k = r / g.h;
            assert!((k - k.round()).abs() <= 1e-9, "radius {r} is off-lattice");
        }
        // A very coarse grid cannot host enough distinct radii.
        let coarse = Grid::new(2, 1.0, 9).unwrap();
        assert!(snapped_radii(&coarse, 0.05, 0.4, 12).is_err());
    }

    #[test]
    fn mean_value_residual_of_linear_field() {
        let g = Grid::new(2, 1.0, 257).unwrap();
        let u = GridFunction::sample(g, |x: Point| x[0]).unwrap();
        let tau = 0.25;
        let r = mean_value_residual(&u, [0.0, 0.0, 0.0], tau).unwrap();
        let exact = tau * tau / 4.0;
        assert!((r - exact).abs() <= 0.02 * exact, "residual {r} vs {exact}");
    }

    #[test]
    fn mean_value_residual_of_constant_is_zero() {
        let g = Grid::new(2, 1.0, 129).unwrap();
        let u = GridFunction::sample(g, |_| 0.7).unwrap();
        let r = mean_value_residual(&u, [0.1, -0.05, 0.0], 0.2).unwrap();
        assert!(r.abs() <= 1e-12, "residual {r}");
    }

    #[test]
    fn params_validation_names_the_broken_bound() {
        assert!(RegularityParams::new(0.6, 1.0, 0.0, None, 1.0).is_err());
        assert!(RegularityParams::new(0.4, 0.4, 0.0, None, 1.0).is_err());
        // delta0 + epsilon0 must stay strictly below alpha + beta - 1.
        assert!(RegularityParams::new(0.4, 1.0, 0.2, Some(0.2), 1.0).is_err());
        assert!(RegularityParams::new(0.4, 1.0, 0.1, Some(0.2), 1.0).is_ok());
        let p = RegularityParams::new(0.4, 1.0, 0.0, None, 1.0).unwrap();
        assert!((p.epsilon0 - 0.4).abs() <= 1e-15);
    }

    #[test]
    fn profile_respects_resolution_floor() {
        let coarse = Grid::new(2, 1.0, 17).unwrap();
        let prof = ProfileSpec::new(0.5, 0.8, 12, 256).unwrap();
        assert!(matches!(
            compute_profile(&oracle2(1.0), &coarse, &prof, 0.0),
            Err(crate::Error::ResolutionFloor(_))
        ));
    }
}
