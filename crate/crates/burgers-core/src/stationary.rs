//! Pull-back construction of the pathwise stationary solution and the checks
//! that characterize it: the infinite-horizon integral equation satisfied by
//! `Y = u*(0)`, shift equivariance, and initial-condition forgetting.
//!
//! The pull-back runs the equation from zero data at time `-n` over one fixed
//! noise path and watches `u_n(t)` on a common record grid as `n` grows.
//! Because the noise is counter-addressed, deepening the window reuses the
//! same increments exactly, so consecutive windows can be compared record by
//! record. Under the large-viscosity condition the gaps contract
//! exponentially in `n` until they sink into rounding noise; the fitted decay
//! rate only uses gaps above that floor.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::noise::{NoisePath, NoiseSpec, OuProcess};
use crate::solver::{solve, SolverConfig};
use crate::spectral::SpectralEngine;
use crate::stats::linear_fit;

/// Windows schedule and stopping rule for the pull-back.
#[derive(Debug, Clone, Serialize)]
pub struct PullbackConfig {
    /// increasing window depths, in time units (slot aligned)
    pub schedule: Vec<f64>,
    /// stop early once the sup-gap between consecutive windows drops below
    /// this; use 0.0 to always exhaust the schedule
    pub tol: f64,
    /// gaps are measured on the record grid of [0, big_n]
    pub big_n: f64,
}

impl PullbackConfig {
    pub fn standard() -> Self {
        Self { schedule: vec![1.0, 2.0, 4.0, 8.0, 12.0, 16.0], tol: 1e-6, big_n: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PullbackResult {
    /// estimate of Y = u*(0)
    #[serde(skip)]
    pub y: SpectralField,
    pub y_l2: f64,
    /// deepest window used
    pub n_used: f64,
    /// (shallower window depth, sup-gap to the next window)
    pub gaps: Vec<(f64, f64)>,
    /// least-squares slope of ln(gap) vs window depth, gaps above the
    /// rounding floor and past the empirical random time only
    pub fitted_rate: Option<f64>,
    /// empirical random time: first depth from which the gaps keep decreasing
    pub n_star: Option<f64>,
    /// final gap below tol (false also when the schedule was exhausted above
    /// tol: non-convergence is a result, not an error)
    pub converged: bool,
    pub final_gap: f64,
}

/// Run the pull-back over the schedule on one fixed noise path.
pub fn pullback(
    path: &NoisePath,
    spec: &NoiseSpec,
    cfg: &SolverConfig,
    pb: &PullbackConfig,
) -> Result<PullbackResult> {
    if pb.schedule.is_empty() {
        return Err(Error::InvalidConfig("empty pull-back schedule".into()));
    }
    if pb.schedule.windows(2).any(|w| w[1] <= w[0]) || pb.schedule[0] <= 0.0 {
        return Err(Error::InvalidConfig("schedule must be positive and increasing".into()));
    }
    if pb.tol < 0.0 {
        return Err(Error::InvalidConfig("tol must be non-negative".into()));
    }
    let zero = SpectralField::zeros(cfg.n_modes);
    let mut prev_records: Option<Vec<SpectralField>> = None;
    let mut prev_depth = 0.0;
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    let mut y = zero.clone();
    let mut n_used = 0.0;
    let mut converged = false;
    for &depth in &pb.schedule {
        let traj = solve(&zero, -depth, pb.big_n, path, spec, cfg)?;
        let mut records = Vec::new();
        let mut y_cur = None;
        for (i, &t) in traj.times.iter().enumerate() {
            if t >= -0.5 * cfg.h {
                records.push(traj.states[i].clone());
                if (t - 0.0).abs() < 0.5 * cfg.h {
                    y_cur = Some(traj.states[i].clone());
                }
            }
        }
        let y_cur = y_cur.ok_or(Error::SlotAlignment { t: 0.0, h: cfg.h })?;
        y = y_cur;
        n_used = depth;
        if let Some(prev) = &prev_records {
            if prev.len() != records.len() {
                return Err(Error::InvalidConfig(
                    "record grids of consecutive windows do not align".into(),
                ));
            }
            let mut gap = 0.0f64;
            for (a, b) in prev.iter().zip(&records) {
                gap = gap.max(a.distance(b)?);
            }
            gaps.push((prev_depth, gap));
            if gap < pb.tol {
                converged = true;
                break;
            }
        }
        prev_records = Some(records);
        prev_depth = depth;
    }
    let final_gap = gaps.last().map(|g| g.1).unwrap_or(f64::NAN);
    if !converged {
        converged = final_gap.is_finite() && final_gap < pb.tol;
    }
    let n_star = empirical_random_time(&gaps);
    let fitted_rate = fit_gap_rate(&gaps, n_star, y.l2_norm());
    Ok(PullbackResult {
        y_l2: y.l2_norm(),
        y,
        n_used,
        gaps,
        fitted_rate,
        n_star,
        converged,
        final_gap,
    })
}

/// First depth from which the gap sequence keeps decreasing for three
/// consecutive schedule points (fewer when the sequence is short).
fn empirical_random_time(gaps: &[(f64, f64)]) -> Option<f64> {
    if gaps.len() < 2 {
        return gaps.first().map(|g| g.0);
    }
    let need = 3.min(gaps.len() - 1);
    'outer: for i in 0..gaps.len() - need {
        for j in i..i + need {
            if gaps[j + 1].1 > gaps[j].1 {
                continue 'outer;
            }
        }
        return Some(gaps[i].0);
    }
    None
}

fn fit_gap_rate(gaps: &[(f64, f64)], n_star: Option<f64>, scale: f64) -> Option<f64> {
    let floor = 1e-13 * scale.max(gaps.iter().fold(0.0f64, |m, g| m.max(g.1))).max(1e-300);
    let from = n_star.unwrap_or(f64::NEG_INFINITY);
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .filter(|(n, g)| *n >= from && *g > floor)
        .map(|(n, g)| (*n, g.ln()))
        .collect();
    linear_fit(&pts).map(|f| f.slope)
}

/// Truncated residual of the infinite-horizon integral equation at `t = 0`:
/// `| y - (1/2) int_{-M}^0 T(-s) dx u*^2(s) ds - W(-M, 0) |_2`
/// with trapezoidal quadrature over slot records and the exact convolution.
/// The semigroup splitting predicts the truncation `e^{-nu pi^2 M} |u*(-M)|`,
/// reported as `predicted_tail`.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub horizon: f64,
    pub residual: f64,
    pub predicted_tail: f64,
    pub budget: f64,
    pub within: bool,
}

pub fn integral_residual(
    y: &SpectralField,
    path: &NoisePath,
    spec: &NoiseSpec,
    cfg: &SolverConfig,
    m_horizon: f64,
    window: f64,
) -> Result<ResidualReport> {
    if m_horizon <= 0.0 {
        return Err(Error::InvalidConfig(format!("horizon M = {m_horizon} must be positive")));
    }
    if m_horizon > window + 1e-12 {
        return Err(Error::HorizonExceedsWindow { m: m_horizon, available: window });
    }
    let n = cfg.n_modes;
    if y.n_modes() != n {
        return Err(Error::DimensionMismatch { left: y.n_modes(), right: n });
    }
    // recompute the trajectory with per-slot records on [-window, 0]
    let fine = cfg.with_record_every(1);
    let zero = SpectralField::zeros(n);
    let traj = solve(&zero, -window, 0.0, path, spec, &fine)?;
    let h = cfg.h;
    let m_slots = path.slot_of(m_horizon)?;
    let engine = SpectralEngine::new(n, cfg.dealias);
    let mut scratch = engine.scratch();
    let mut flux = vec![0.0; n];
    let mut integral = vec![0.0; n];
    let decay = crate::spectral::semigroup_factors(n, h, cfg.nu);
    let mut max_u = 0.0f64;
    let mut u_at_minus_m = 0.0;
    // walk records from s = -M to 0; integral accumulates
    // I <- T(h) I + trapezoid(previous flux, current flux)
    let mut started = false;
    let mut prev_flux = vec![0.0; n];
    for (i, &t) in traj.times.iter().enumerate() {
        if t < -m_horizon - 0.5 * h {
            continue;
        }
        let state = &traj.states[i];
        engine.nonlinearity_into(state.coeffs(), &mut flux, &mut scratch);
        if started {
            for k in 0..n {
                integral[k] =
                    decay[k] * integral[k] + 0.5 * h * (decay[k] * prev_flux[k] + flux[k]);
            }
        } else {
            u_at_minus_m = state.l2_norm();
            started = true;
        }
        prev_flux.copy_from_slice(&flux);
        max_u = max_u.max(traj.diagnostics[i].u_l2);
        let _ = m_slots;
    }
    if !started {
        return Err(Error::EmptyTrajectory);
    }
    // exact convolution over [-M, 0] from a zero start
    let ou = OuProcess::new(&spec.truncated(n), cfg.nu, path.h());
    let mut w = vec![0.0; n];
    let s_start = path.slot_of(-m_horizon)?;
    for s in s_start..0 {
        ou.step_into(&mut w, path, s);
    }
    let mut resid_sq = 0.0;
    for k in 0..n {
        let r = y.coeffs()[k] - integral[k] - w[k];
        resid_sq += r * r;
    }
    let residual = resid_sq.sqrt();
    let predicted_tail =
        (-cfg.nu * std::f64::consts::PI.powi(2) * m_horizon).exp() * max_u;
    let budget = residual_budget(cfg);
    Ok(ResidualReport {
        horizon: m_horizon,
        residual,
        predicted_tail,
        budget,
        within: residual <= predicted_tail + budget,
    })
}

/// Additive allowance for the residual check: 10 x (solver step + record
/// spacing of the quadrature grid, which is one slot here).
pub fn residual_budget(cfg: &SolverConfig) -> f64 {
    10.0 * (cfg.h + cfg.h)
}

/// Numerical form of the stationarity identity `u(r, Y(w), w) = Y(theta_r w)`:
/// compute the left side by flowing the pull-back state forward and the right
/// side by pulling back on the shifted path.
#[derive(Debug, Clone, Serialize)]
pub struct ShiftReport {
    pub r: f64,
    pub discrepancy: f64,
    pub budget: f64,
    pub within: bool,
}

pub fn shift_equivariance_check(
    path: &NoisePath,
    spec: &NoiseSpec,
    cfg: &SolverConfig,
    pb: &PullbackConfig,
    r: f64,
) -> Result<ShiftReport> {
    if r < 0.0 {
        return Err(Error::InvalidConfig(format!("shift r = {r} must be non-negative")));
    }
    let shifted = path.shifted(r)?;
    let y_shifted = pullback(&shifted, spec, cfg, pb)?.y;
    let base = pullback(path, spec, cfg, pb)?;
    let flowed = if r == 0.0 {
        base.y.clone()
    } else {
        solve(&base.y, 0.0, r, path, spec, cfg)?.endpoint().clone()
    };
    let discrepancy = y_shifted.distance(&flowed)?;
    let budget = 2.0 * (pb.tol + cfg.tolerance_budget());
    Ok(ShiftReport { r, discrepancy, budget, within: discrepancy <= budget })
}

/// Initial-condition forgetting: pull back from 0 and from `alt` over the
/// same window and compare at time 0. Under the large-viscosity condition
/// the gap is at most `|alt| e^{-delta n}` plus the numerical budget.
#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub window: f64,
    pub gap: f64,
    pub bound: f64,
    pub contracted: bool,
}

pub fn uniqueness_check(
    path: &NoisePath,
    spec: &NoiseSpec,
    cfg: &SolverConfig,
    alt_initial: &SpectralField,
    window: f64,
    delta: f64,
) -> Result<UniquenessReport> {
    if window <= 0.0 {
        return Err(Error::InvalidConfig(format!("window {window} must be positive")));
    }
    let zero = SpectralField::zeros(cfg.n_modes);
    let from_zero = solve(&zero, -window, 0.0, path, spec, cfg)?;
    let from_alt = solve(alt_initial, -window, 0.0, path, spec, cfg)?;
    let gap = from_zero.endpoint().distance(from_alt.endpoint())?;
    let bound = alt_initial.l2_norm() * (-delta * window).exp() + cfg.tolerance_budget();
    Ok(UniquenessReport { window, gap, bound, contracted: gap <= bound })
}
