//! Closed-form references: the radial exact solution of the nonlocal eikonal
//! model problem, its optimal control trajectories and value representation,
//! the three explicit barrier (subsolution) constructions, and verifiers for
//! the subsolution inequality and the barrier side conditions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::analysis::{ViolationReport, Witness};
use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField};
use crate::matrix::{norm, SymMat};
use crate::nonlocal::{build_index, ObstacleSet};
use crate::operators::{Operator, OperatorSpec, ValueProfile};

/// Exact radial solution of phi_t + |phi_r| pi min(R^2, r^2) = 0 with
/// phi(r, 0) = r + 1, K the closed ball of radius `big_r`.
pub fn exact_example_profile(r: f64, t: f64, big_r: f64) -> f64 {
    debug_assert!(t >= 0.0 && r >= 0.0);
    let mass = PI * big_r * big_r;
    if r <= big_r {
        r / (1.0 + PI * r * t) + 1.0
    } else if r <= big_r + mass * t {
        big_r * big_r / (mass * t - r + 2.0 * big_r) + 1.0
    } else {
        r - mass * t + 1.0
    }
}

/// Full-space evaluation of the exact solution at a point.
pub fn exact_example_solution(x: &[f64], t: f64, big_r: f64) -> f64 {
    exact_example_profile(norm(x), t, big_r)
}

/// Endpoint of the cheapest admissible trajectory started at radius r:
/// gamma' = -pi min(R^2, gamma^2).
pub fn optimal_trajectory(r: f64, t: f64, big_r: f64) -> f64 {
    debug_assert!(r >= 0.0 && t >= 0.0);
    let mass = PI * big_r * big_r;
    if r <= big_r {
        r / (1.0 + PI * r * t)
    } else if r > big_r + mass * t {
        r - mass * t
    } else {
        big_r * big_r / (mass * t - r + 2.0 * big_r)
    }
}

/// Control representation phi(r, t) = phi0(gamma*(t)); valid for
/// nondecreasing initial profiles, where the maximal inward trajectory is
/// optimal.
pub fn value_from_control_fn(r: f64, t: f64, big_r: f64, phi0: impl Fn(f64) -> f64) -> f64 {
    phi0(optimal_trajectory(r, t, big_r))
}

/// Control representation against a sampled radial profile. Errors when the
/// profile decreases somewhere (the maximal-trajectory shortcut is invalid).
pub fn value_from_control(r: f64, t: f64, big_r: f64, phi0: &ScalarField) -> Result<f64> {
    if phi0.grid().dim() != 1 {
        return Err(Error::Oracle("control profile must be one-dimensional".into()));
    }
    let v = phi0.values();
    if v.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Oracle("control profile must be nondecreasing".into()));
    }
    Ok(phi0.interpolate(&[optimal_trajectory(r, t, big_r)]))
}

/// Explicit barrier constructions. Profiles are affine, sigma(s) = s + shift,
/// the validated case.
#[derive(Clone, Debug)]
pub enum SubsolutionSpec {
    /// sigma(max(|x| - C t, 0)) with C = sup|grad gamma| (|a| + b m(K));
    /// isotropic gamma.
    S51 { sigma_shift: f64, a_drift: f64, b: f64, m_k: f64 },
    /// sigma(max(|x| - C t, 0)) with C = sup V / inf sigma' + m(K).
    S52 { sigma_shift: f64, v: ValueProfile, m_k: f64 },
    /// k max(|x| - R - a k^{alpha-1} t, 0) + c0.
    S53 { k: f64, big_r: f64, c0: f64, a_coef: f64, alpha: f64 },
}

/// Evaluatable space-time barrier with exact derivatives on its smooth set.
#[derive(Clone, Debug)]
pub struct Subsolution {
    pub spec: SubsolutionSpec,
    /// Kink propagation speed: C for s51/s52, a k^{alpha-1} for s53.
    pub speed: f64,
    /// Slope of the cone region.
    slope: f64,
    /// Plateau level (value inside the kink radius).
    floor: f64,
    /// Inner kink offset: plateau boundary sits at |x| = offset + speed * t.
    offset: f64,
}

pub fn make_subsolution(spec: SubsolutionSpec) -> Result<Subsolution> {
    make_subsolution_with_speed(spec, None)
}

/// `speed_override` replaces the derived constant; used to falsify the
/// verifier with a sabotaged barrier.
pub fn make_subsolution_with_speed(
    spec: SubsolutionSpec,
    speed_override: Option<f64>,
) -> Result<Subsolution> {
    let (speed, slope, floor, offset) = match &spec {
        SubsolutionSpec::S51 { sigma_shift, a_drift, b, m_k } => {
            if *m_k <= 0.0 || *b < 0.0 {
                return Err(Error::Oracle("s51 requires m(K) > 0 and b >= 0".into()));
            }
            // sup |grad gamma| = 1 for isotropic gamma
            (a_drift.abs() + b * m_k, 1.0, *sigma_shift, 0.0)
        }
        SubsolutionSpec::S52 { sigma_shift, v, m_k } => {
            if *m_k <= 0.0 {
                return Err(Error::Oracle("s52 requires m(K) > 0".into()));
            }
            // inf sigma' = 1 for the affine profile
            (v.sup() + m_k, 1.0, *sigma_shift, 0.0)
        }
        SubsolutionSpec::S53 { k, big_r, c0, a_coef, alpha } => {
            if !(*k > 0.0 && *big_r > 0.0 && *c0 > 0.0) {
                return Err(Error::Oracle("s53 requires k, R, c0 > 0".into()));
            }
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::Oracle("s53 requires alpha in (0,1)".into()));
            }
            (a_coef * k.powf(alpha - 1.0), *k, *c0, *big_r)
        }
    };
    Ok(Subsolution { spec, speed: speed_override.unwrap_or(speed), slope, floor, offset })
}

impl Subsolution {
    /// Radius of the kink sphere at time t.
    pub fn kink_radius(&self, t: f64) -> f64 {
        self.offset + self.speed * t
    }

    pub fn value(&self, x: &[f64], t: f64) -> f64 {
        let s = norm(x) - self.kink_radius(t);
        self.slope * s.max(0.0) + self.floor
    }

    pub fn time_deriv(&self, x: &[f64], t: f64) -> f64 {
        if norm(x) > self.kink_radius(t) {
            -self.slope * self.speed
        } else {
            0.0
        }
    }

    /// Exact spatial gradient; `None` on the plateau and at the origin,
    /// where the gradient vanishes or is undefined.
    pub fn gradient(&self, x: &[f64], t: f64) -> Option<Vec<f64>> {
        let r = norm(x);
        if r <= self.kink_radius(t) || r == 0.0 {
            return None;
        }
        Some(x.iter().map(|v| self.slope * v / r).collect())
    }

    /// Exact Hessian on the cone region: slope (I - x̂⊗x̂)/|x|.
    pub fn hessian(&self, x: &[f64], t: f64) -> SymMat {
        let r = norm(x);
        if r <= self.kink_radius(t) || r == 0.0 {
            return SymMat::zero(x.len());
        }
        SymMat::identity(x.len())
            .add(&SymMat::outer(x, -1.0 / (r * r)))
            .scale(self.slope / r)
    }

    /// Distance from x to the kink set (the switching sphere, plus the
    /// origin cusp).
    pub fn kink_distance(&self, x: &[f64], t: f64) -> f64 {
        let r = norm(x);
        (r - self.kink_radius(t)).abs().min(r)
    }
}

/// Outcome of the side-condition checks for a barrier.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionsIReport {
    /// phi(., 0) <= u0 on the grid.
    pub below_initial: bool,
    /// phi >= c0 everywhere sampled.
    pub positive: bool,
    /// min over the box boundary strictly grows along the box sequence.
    pub coercive: bool,
    pub worst_initial_gap: f64,
    pub min_value: f64,
    pub boundary_mins: Vec<f64>,
}

impl ConditionsIReport {
    pub fn pass(&self) -> bool {
        self.below_initial && self.positive && self.coercive
    }
}

/// Check (ii)-(iv): domination by the initial data, the positivity floor,
/// and spatial coercivity along an increasing box sequence.
pub fn verify_conditions_i(
    sub: &Subsolution,
    u0: &ScalarField,
    c0: f64,
    box_halfwidths: &[f64],
    t_max: f64,
) -> ConditionsIReport {
    let grid = u0.grid();
    let mut worst_initial_gap = f64::NEG_INFINITY;
    let mut min_value = f64::INFINITY;
    for flat in 0..grid.num_points() {
        let x = grid.point(flat);
        let phi0 = sub.value(&x, 0.0);
        worst_initial_gap = worst_initial_gap.max(phi0 - u0.values()[flat]);
        for &t in &[0.0, 0.5 * t_max, t_max] {
            min_value = min_value.min(sub.value(&x, t));
        }
    }
    // boundary minimum of phi(., t_max) on each box of the sequence
    let dim = grid.dim();
    let mut boundary_mins = Vec::new();
    for &half in box_halfwidths {
        let mut m = f64::INFINITY;
        let samples = 64;
        for k in 0..samples {
            let t = k as f64 / samples as f64;
            let pts: Vec<Vec<f64>> = if dim == 1 {
                vec![vec![-half], vec![half]]
            } else {
                let s = -half + 2.0 * half * t;
                vec![
                    vec![s, -half],
                    vec![s, half],
                    vec![-half, s],
                    vec![half, s],
                ]
            };
            for p in pts {
                m = m.min(sub.value(&p, t_max));
            }
        }
        boundary_mins.push(m);
    }
    let coercive = boundary_mins.windows(2).all(|w| w[1] > w[0] + 1e-12);
    ConditionsIReport {
        below_initial: worst_initial_gap <= 1e-12,
        positive: min_value >= c0 - 1e-12,
        coercive,
        worst_initial_gap,
        min_value,
        boundary_mins,
    }
}

/// Summary of the pointwise subsolution verification.
#[derive(Clone, Debug, Serialize)]
pub struct SubsolutionReport {
    pub report: ViolationReport,
    /// Nodes skipped within half a cell of the kink set.
    pub excluded_kink: usize,
    /// Nodes skipped because the exact gradient vanishes there (plateau,
    /// origin); the operator form of the inequality needs p != 0.
    pub excluded_zero_gradient: usize,
    pub checked: usize,
    /// Informational: worst phi_t + mu(phi) over the zero-gradient set.
    pub singular_mu_residual: f64,
}

/// Sample the inequality phi_t + F(phi, grad phi, hess phi, m(K ∩ {phi <
/// phi(x,t)})) <= tol over grid x times, excluding a half-cell margin around
/// the kink set. Derivatives are exact; the sublevel measure is cell-counted
/// from the sampled barrier, as the scheme would see it.
pub fn verify_subsolution(
    sub: &Subsolution,
    op: &Operator,
    k: &ObstacleSet,
    grid: &GridSpec,
    times: &[f64],
    tol: f64,
) -> Result<SubsolutionReport> {
    let mut worst = f64::NEG_INFINITY;
    let mut witnesses: Vec<Witness> = Vec::new();
    let mut excluded_kink = 0;
    let mut excluded_zero = 0;
    let mut checked = 0;
    let mut mu_residual = f64::NEG_INFINITY;
    let half_cell = 0.5 * grid.min_spacing() * 2.0f64.sqrt();

    for &t in times {
        let phi_t_field = ScalarField::from_fn(grid.clone(), |x| sub.value(x, t))?;
        let index = build_index(&phi_t_field, k);
        for flat in 0..grid.num_points() {
            let x = grid.point(flat);
            if sub.kink_distance(&x, t) <= half_cell {
                excluded_kink += 1;
                continue;
            }
            let phi = sub.value(&x, t);
            let dphi_dt = sub.time_deriv(&x, t);
            match sub.gradient(&x, t) {
                None => {
                    excluded_zero += 1;
                    mu_residual = mu_residual.max(dphi_dt + op.mu(phi));
                }
                Some(grad) => {
                    let hess = sub.hessian(&x, t);
                    let a = index.measure_strict(phi);
                    let residual = dphi_dt + op.evaluate(phi, &grad, &hess, a)?;
                    checked += 1;
                    if residual > worst {
                        worst = residual;
                    }
                    if residual > tol && witnesses.len() < 8 {
                        witnesses.push(Witness {
                            points: vec![x.clone()],
                            values: vec![phi, residual],
                            margin: residual,
                        });
                    }
                }
            }
        }
    }
    if checked == 0 {
        return Err(Error::Oracle("no smooth points with nonzero gradient to verify".into()));
    }
    Ok(SubsolutionReport {
        report: ViolationReport::from_margin(worst, tol, witnesses),
        excluded_kink,
        excluded_zero_gradient: excluded_zero,
        checked,
        singular_mu_residual: mu_residual,
    })
}
