//! Explicit monotone time stepping on truncated domains with CFL control,
//! plus the radial 1D solver for the nonlocal eikonal model problem.
//!
//! Each step freezes the nonlocal term: the sublevel index is built once from
//! the pre-step field, then every node is updated independently (data-parallel)
//! with upwind first-order and central second-order stencils. Below the
//! gradient threshold the update falls back to the singular limit mu.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::nonlocal::{build_index, ObstacleSet, SublevelMeasureIndex};
use crate::operators::{Operator, OperatorSpec};

#[derive(Clone, Debug)]
pub struct EvolveConfig {
    pub t_end: f64,
    pub cfl_first: f64,
    pub cfl_second: f64,
    /// Gradient regularization threshold; `None` derives
    /// 1e-8 x (max one-sided slope of the initial data).
    pub eps_grad: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Positivity floor the initial data must respect.
    pub c0: f64,
    /// Slack allowed on the floor before a trajectory is flagged.
    pub tol_drift: f64,
}

impl EvolveConfig {
    pub fn new(t_end: f64) -> Self {
        EvolveConfig {
            t_end,
            cfl_first: 0.5,
            cfl_second: 0.25,
            eps_grad: None,
            snapshot_times: Vec::new(),
            c0: 0.0,
            tol_drift: 1e-10,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_end < 0.0 {
            return Err(Error::Evolve("t_end must be >= 0".into()));
        }
        if !(self.cfl_first > 0.0 && self.cfl_first <= 1.0) {
            return Err(Error::Evolve("cfl_first must lie in (0, 1]".into()));
        }
        if !(self.cfl_second > 0.0 && self.cfl_second <= 0.5) {
            return Err(Error::Evolve("cfl_second must lie in (0, 0.5]".into()));
        }
        if let Some(e) = self.eps_grad {
            if e <= 0.0 {
                return Err(Error::Evolve("eps_grad must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub min: f64,
    pub max: f64,
    /// Measure of K below the median indexed value.
    pub measure_mid: f64,
    pub wall_secs: f64,
}

#[derive(Debug)]
pub struct EvolutionTrajectory {
    pub snapshots: Vec<(f64, ScalarField)>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<String>,
}

impl EvolutionTrajectory {
    pub fn final_field(&self) -> &ScalarField {
        &self.snapshots.last().expect("trajectory holds at least the initial field").1
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&ScalarField> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() < 1e-9)
            .map(|(_, f)| f)
    }
}

/// Stable explicit step size: dt = min(cfl1 h / S, cfl2 h^2 / D), clipped to
/// the remaining time. A fully static operator gets the remaining time.
pub fn cfl_dt(
    field: &ScalarField,
    op: &Operator,
    k: &ObstacleSet,
    cfg: &EvolveConfig,
    remaining: f64,
) -> f64 {
    let h = field.grid().min_spacing();
    let s = op.first_order_speed_bound((field.min(), field.max()), k.measure_total);
    let d = op.diffusion_bound(field.grid().dim());
    let mut dt = remaining;
    if s > 0.0 {
        dt = dt.min(cfg.cfl_first * h / s);
    }
    if d > 0.0 {
        dt = dt.min(cfg.cfl_second * h * h / d);
    }
    dt
}

/// 1e-8 x the largest one-sided slope of the field, the default gradient
/// regularization threshold.
pub fn resolve_eps_grad(field: &ScalarField, cfg: &EvolveConfig) -> f64 {
    if let Some(e) = cfg.eps_grad {
        return e;
    }
    let g = field.grid();
    let mut scale = 0.0f64;
    for axis in 0..g.dim() {
        let h = g.spacing(axis);
        let stride = if axis == 0 { if g.dim() == 1 { 1 } else { g.counts()[1] } } else { 1 };
        let n_axis = g.counts()[axis];
        let n_other = g.num_points() / n_axis;
        for line in 0..n_other {
            let base = if g.dim() == 1 {
                0
            } else if axis == 0 {
                line
            } else {
                line * g.counts()[1]
            };
            for i in 1..n_axis {
                let a = field.values()[base + (i - 1) * stride];
                let b = field.values()[base + i * stride];
                scale = scale.max(((b - a) / h).abs());
            }
        }
    }
    1e-8 * scale.max(1.0)
}

fn step_into(
    field: &ScalarField,
    op: &Operator,
    index: &SublevelMeasureIndex,
    dt: f64,
    eps_grad: f64,
    out: &mut [f64],
) -> Result<()> {
    let g = field.grid();
    let dim = g.dim();
    let row_len = if dim == 1 { g.counts()[0] } else { g.counts()[1] };
    let bad = out
        .par_chunks_mut(row_len)
        .enumerate()
        .map(|(row, chunk)| {
            let mut idx = [0usize; 2];
            for (col, slot) in chunk.iter_mut().enumerate() {
                if dim == 1 {
                    idx[0] = col;
                } else {
                    idx[0] = row;
                    idx[1] = col;
                }
                let idx = &idx[..dim];
                let r = field.value(idx);
                let a = index.measure_strict(r);
                let gh = field.grad_hess(idx);
                let rate = op.scheme_value(r, &gh, a, eps_grad);
                *slot = r - dt * rate;
                if !slot.is_finite() {
                    return true;
                }
            }
            false
        })
        .reduce(|| false, |a, b| a || b);
    if bad {
        return Err(Error::Evolve("non-finite update".into()));
    }
    Ok(())
}

/// One explicit step. The caller is responsible for dt satisfying the CFL
/// bound; violations surface as an error.
pub fn step_once(
    field: &ScalarField,
    op: &Operator,
    k: &ObstacleSet,
    dt: f64,
    eps_grad: f64,
) -> Result<ScalarField> {
    let cfg = EvolveConfig::new(f64::MAX);
    let max_dt = cfl_dt(field, op, k, &cfg, f64::MAX);
    if dt > max_dt * (1.0 + 1e-9) {
        return Err(Error::Evolve(format!("dt {dt} violates the CFL bound {max_dt}")));
    }
    let index = if op.uses_measure() {
        build_index(field, k)
    } else {
        SublevelMeasureIndex::from_weighted(Vec::new())
    };
    let mut out = vec![0.0; field.values().len()];
    step_into(field, op, &index, dt, eps_grad, &mut out)?;
    let mut next = field.clone();
    next.values_mut().copy_from_slice(&out);
    Ok(next)
}

/// Explicit monotone evolution with snapshots at the requested times (steps
/// are clipped to land on them exactly).
pub fn evolve(
    u0: &ScalarField,
    op: &Operator,
    k: &ObstacleSet,
    cfg: &EvolveConfig,
) -> Result<EvolutionTrajectory> {
    cfg.validate()?;
    let g = u0.grid();
    if u0.min() < cfg.c0 {
        return Err(Error::Evolve(format!(
            "initial data dips below the positivity floor: {} < {}",
            u0.min(),
            cfg.c0
        )));
    }
    // box coercivity: the boundary minimum must exceed the interior minimum
    let mut boundary_min = f64::INFINITY;
    let mut interior_min = f64::INFINITY;
    for flat in 0..g.num_points() {
        let idx = g.multi(flat);
        let v = u0.values()[flat];
        if g.is_boundary(&idx) {
            boundary_min = boundary_min.min(v);
        } else {
            interior_min = interior_min.min(v);
        }
    }
    if boundary_min <= interior_min {
        return Err(Error::Evolve(
            "initial data is not coercive on the truncated box (boundary min <= interior min)"
                .into(),
        ));
    }

    let eps_grad = resolve_eps_grad(u0, cfg);
    let mut want: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&t| t > 0.0 && t <= cfg.t_end + 1e-12)
        .collect();
    want.sort_by(f64::total_cmp);
    want.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut traj = EvolutionTrajectory {
        snapshots: vec![(0.0, u0.clone())],
        diagnostics: Vec::new(),
        warnings: Vec::new(),
    };
    let mut field = u0.clone();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut out = vec![0.0; field.values().len()];
    let mut floor_flagged = false;
    let mut next_snap = 0usize;

    while t < cfg.t_end - 1e-14 {
        let started = Instant::now();
        let mut dt = cfl_dt(&field, op, k, cfg, cfg.t_end - t);
        if let Some(&s) = want.get(next_snap) {
            dt = dt.min(s - t);
        }
        // local operators never read the measure; skip the per-step sort
        let index = if op.uses_measure() {
            build_index(&field, k)
        } else {
            SublevelMeasureIndex::from_weighted(Vec::new())
        };
        step_into(&field, op, &index, dt, eps_grad, &mut out)?;
        field.values_mut().copy_from_slice(&out);
        t += dt;
        step += 1;

        let (mn, mx) = (field.min(), field.max());
        let measure_mid = if index.is_empty() {
            0.0
        } else {
            index.measure_strict(index.median_value())
        };
        traj.diagnostics.push(StepDiagnostics {
            step,
            time: t,
            dt,
            min: mn,
            max: mx,
            measure_mid,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if mn < cfg.c0 - cfg.tol_drift && !floor_flagged {
            traj.warnings.push(format!(
                "positivity floor violated at step {step}: min {mn} < c0 {} - {}",
                cfg.c0, cfg.tol_drift
            ));
            floor_flagged = true;
        }
        while next_snap < want.len() && t >= want[next_snap] - 1e-12 {
            traj.snapshots.push((want[next_snap], field.clone()));
            next_snap += 1;
        }
    }
    if traj
        .snapshots
        .last()
        .map(|(s, _)| (s - cfg.t_end).abs() > 1e-12)
        .unwrap_or(true)
    {
        traj.snapshots.push((cfg.t_end, field));
    }
    Ok(traj)
}

/// Speed model for the radial solver.
#[derive(Clone, Copy, Debug)]
pub enum RadialSpeed {
    /// c(r) = pi min(R^2, r^2), the exact reduction for nondecreasing data.
    Frozen { big_r: f64 },
    /// Measure recomputed from the evolving profile with annulus weights
    /// 2 pi r dr per cell.
    SelfConsistent { big_r: f64 },
}

/// Upwind radial solver for phi_t + |phi_r| c(r) = 0 on [0, r_max].
pub fn radial_evolve(
    phi0: &ScalarField,
    speed: RadialSpeed,
    cfg: &EvolveConfig,
) -> Result<EvolutionTrajectory> {
    cfg.validate()?;
    let g = phi0.grid();
    if g.dim() != 1 {
        return Err(Error::Evolve("radial solver needs a 1D grid".into()));
    }
    if g.lower()[0] != 0.0 {
        return Err(Error::Evolve("radial grid must start at r = 0".into()));
    }
    let decreasing = phi0.values().windows(2).any(|w| w[1] < w[0]);
    let mut warnings = Vec::new();
    match speed {
        RadialSpeed::Frozen { .. } if decreasing => {
            return Err(Error::Evolve(
                "radial reduction needs a nondecreasing profile (frozen mode)".into(),
            ));
        }
        RadialSpeed::SelfConsistent { .. } if decreasing => {
            warnings.push("profile decreases somewhere; radial reduction is heuristic".into());
        }
        _ => {}
    }
    let big_r = match speed {
        RadialSpeed::Frozen { big_r } | RadialSpeed::SelfConsistent { big_r } => big_r,
    };
    if big_r <= 0.0 {
        return Err(Error::Evolve("obstacle radius must be positive".into()));
    }
    let n = g.counts()[0];
    let dr = g.spacing(0);
    let r_max = g.upper()[0];
    let speed_cap = std::f64::consts::PI * big_r.min(r_max).powi(2);

    let frozen_speed: Vec<f64> = (0..n)
        .map(|i| {
            let r = g.coord(0, i);
            std::f64::consts::PI * big_r.min(r).powi(2)
        })
        .collect();
    // annulus weights for the self-consistent measure
    let weights: Vec<(usize, f64)> = (0..n)
        .filter(|&i| g.coord(0, i) <= big_r)
        .map(|i| (i, 2.0 * std::f64::consts::PI * g.coord(0, i) * dr))
        .collect();

    let mut want: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&t| t > 0.0 && t <= cfg.t_end + 1e-12)
        .collect();
    want.sort_by(f64::total_cmp);
    want.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut traj = EvolutionTrajectory {
        snapshots: vec![(0.0, phi0.clone())],
        diagnostics: Vec::new(),
        warnings,
    };
    let mut phi = phi0.clone();
    let mut t = 0.0;
    let mut step = 0usize;
    let mut next_snap = 0usize;

    while t < cfg.t_end - 1e-14 {
        let started = Instant::now();
        let mut dt = if speed_cap > 0.0 {
            (cfg.cfl_first * dr / speed_cap).min(cfg.t_end - t)
        } else {
            cfg.t_end - t
        };
        if let Some(&s) = want.get(next_snap) {
            dt = dt.min(s - t);
        }
        let vals = phi.values().to_vec();
        let index = match speed {
            RadialSpeed::SelfConsistent { .. } => Some(SublevelMeasureIndex::from_weighted(
                weights.iter().map(|&(i, w)| (vals[i], w)).collect(),
            )),
            RadialSpeed::Frozen { .. } => None,
        };
        {
            let out = phi.values_mut();
            for i in 0..n {
                let dm = if i > 0 { (vals[i] - vals[i - 1]) / dr } else { 0.0 };
                let dp = if i + 1 < n { (vals[i + 1] - vals[i]) / dr } else { 0.0 };
                let godunov = (dm.max(0.0).powi(2) + dp.min(0.0).powi(2)).sqrt();
                let c = match &index {
                    None => frozen_speed[i],
                    Some(ix) => ix.measure_strict(vals[i]),
                };
                out[i] = vals[i] - dt * c * godunov;
            }
        }
        t += dt;
        step += 1;
        let measure_mid = index.as_ref().map(|ix| 0.5 * ix.total()).unwrap_or(0.0);
        traj.diagnostics.push(StepDiagnostics {
            step,
            time: t,
            dt,
            min: phi.min(),
            max: phi.max(),
            measure_mid,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        while next_snap < want.len() && t >= want[next_snap] - 1e-12 {
            traj.snapshots.push((want[next_snap], phi.clone()));
            next_snap += 1;
        }
    }
    if traj
        .snapshots
        .last()
        .map(|(s, _)| (s - cfg.t_end).abs() > 1e-12)
        .unwrap_or(true)
    {
        traj.snapshots.push((cfg.t_end, phi));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use crate::matrix::norm;
    use crate::operators::{SurfaceEnergy, ValueProfile};
    use std::f64::consts::PI;

    fn setup_2d(n: usize, half: f64) -> (GridSpec, ObstacleSet) {
        let g = GridSpec::new_2d([-half, -half], [half, half], [n, n]).unwrap();
        let k = ObstacleSet::ball(vec![0.0, 0.0], 1.0, &g).unwrap();
        (g, k)
    }

    fn cone(g: &GridSpec) -> ScalarField {
        ScalarField::from_fn(g.clone(), |x| norm(x) + 1.0).unwrap()
    }

    #[test]
    fn cfl_examples() {
        // nonlocal eikonal, K unit ball, h = 0.02, cfl_first = 0.5:
        // dt = 0.5 * 0.02 / pi
        let (g, k) = setup_2d(401, 4.0);
        let u = cone(&g);
        let cfg = EvolveConfig::new(1.0);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let dt = cfl_dt(&u, &op, &k, &cfg, f64::MAX);
        assert!((dt - 0.5 * 0.02 / PI).abs() < 1e-12, "dt {dt}");
        assert!((dt - 3.183e-3).abs() < 1e-5);

        // pure curvature flow: dt = 0.25 h^2 / D with D = c (dim-1) = 1
        let curv = Operator::aniso_flow(0.0, 0.0, 1.0, SurfaceEnergy::Isotropic).unwrap();
        let dt = cfl_dt(&u, &curv, &k, &cfg, f64::MAX);
        assert!((dt - 0.25 * 4e-4).abs() < 1e-12, "dt {dt}");

        // all bounds zero: remaining time
        let idle = Operator::aniso_flow(0.0, 0.0, 0.0, SurfaceEnergy::Isotropic).unwrap();
        let dt = cfl_dt(&u, &idle, &k, &cfg, 0.75);
        assert_eq!(dt, 0.75);
    }

    #[test]
    fn step_constant_field_takes_mu_branch() {
        let (g, k) = setup_2d(41, 4.0);
        let u = ScalarField::constant(g, 2.0).unwrap();
        let op = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        let dt = 1e-3;
        let next = step_once(&u, &op, &k, dt, 1e-8).unwrap();
        let expect = 2.0 - dt * 2.0f64.atan();
        for v in next.values() {
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn step_eikonal_saturated_measure_and_frozen_center() {
        // u0 = |x| + 1, K unit ball: where |x| > 1 the sublevel of u(x)
        // covers K, so one step shaves about dt * pi; the center point sits
        // on the mu branch and does not move
        let (g, k) = setup_2d(161, 4.0);
        let u = cone(&g);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let cfg = EvolveConfig::new(1.0);
        let dt = cfl_dt(&u, &op, &k, &cfg, f64::MAX);
        let next = step_once(&u, &op, &k, dt, 1e-8).unwrap();
        let g2 = next.grid().clone();
        // sample a far point on the x axis: index (140, 80) -> x = 3.0
        let idx = [140usize, 80usize];
        assert!((g2.point(g2.flat(&idx))[0] - 3.0).abs() < 1e-12);
        let drop = u.value(&idx) - next.value(&idx);
        // measure saturates at the cell-counted total, within O(h) of pi
        assert!((drop - dt * PI).abs() < dt * 0.35, "drop {drop} vs dt*pi {}", dt * PI);
        // center: upwind gradient vanishes, mu = 0
        let c = [80usize, 80usize];
        assert_eq!(next.value(&c), u.value(&c));
    }

    #[test]
    fn evolve_zero_horizon_returns_initial() {
        let (g, k) = setup_2d(21, 4.0);
        let u = cone(&g);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let traj = evolve(&u, &op, &k, &EvolveConfig::new(0.0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].0, 0.0);
        assert_eq!(traj.snapshots[0].1.values(), u.values());
    }

    #[test]
    fn evolve_rejects_non_coercive_or_subfloor_data() {
        let (g, k) = setup_2d(21, 4.0);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        // constant field: boundary min equals interior min
        let flat = ScalarField::constant(g.clone(), 2.0).unwrap();
        assert!(evolve(&flat, &op, &k, &EvolveConfig::new(0.1)).is_err());
        // floor violation
        let u = cone(&g);
        let cfg = EvolveConfig::new(0.1).with_c0(1.5);
        assert!(evolve(&u, &op, &k, &cfg).is_err());
    }

    #[test]
    fn snapshots_land_exactly_and_dt_is_clipped() {
        let (g, k) = setup_2d(81, 4.0);
        let u = cone(&g);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let cfg = EvolveConfig::new(0.2).with_snapshots(vec![0.05, 0.13]).with_c0(1.0);
        let traj = evolve(&u, &op, &k, &cfg).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 4); // 0, 0.05, 0.13, 0.2
        assert!((times[1] - 0.05).abs() < 1e-12);
        assert!((times[2] - 0.13).abs() < 1e-12);
        assert!((times[3] - 0.2).abs() < 1e-12);
        // strictly increasing diagnostics times
        for w in traj.diagnostics.windows(2) {
            assert!(w[1].time > w[0].time);
        }
        assert!(traj.warnings.is_empty());
    }

    #[test]
    fn ordered_data_stays_ordered_quick() {
        let (g, k) = setup_2d(61, 4.0);
        let u = cone(&g);
        let v = ScalarField::from_fn(g, |x| (norm(x) * norm(x) + 1.0).sqrt() + 1.2).unwrap();
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let cfg = EvolveConfig::new(0.1);
        let res = crate::analysis::comparison_experiment(&u, &v, &op, &k, &cfg).unwrap();
        assert!(res.max_violation <= 1e-12, "violation {}", res.max_violation);
        assert!(res.steps > 0);
    }

    #[test]
    fn radial_center_pinned_and_matches_closed_form() {
        let g = GridSpec::new_1d(0.0, 8.0, 1001).unwrap();
        let phi0 = ScalarField::from_fn(g, |x| x[0] + 1.0).unwrap();
        let cfg = EvolveConfig::new(1.0);
        let traj = radial_evolve(&phi0, RadialSpeed::Frozen { big_r: 1.0 }, &cfg).unwrap();
        let f = traj.final_field();
        // phi(0, t) = 1 for all t
        assert_eq!(f.values()[0], 1.0);
        // closed form at r = 1, t = 1: 1/(1+pi) + 1, first-order accuracy
        let i = 125; // r = 1.0
        assert!((f.grid().coord(0, i) - 1.0).abs() < 1e-12);
        let expect = 1.0 / (1.0 + PI) + 1.0;
        assert!((f.values()[i] - expect).abs() < 8e-3, "got {}", f.values()[i]);
    }

    #[test]
    fn radial_frozen_vs_self_consistent_first_order_close() {
        let g = GridSpec::new_1d(0.0, 8.0, 801).unwrap();
        let phi0 = ScalarField::from_fn(g, |x| x[0] + 1.0).unwrap();
        let cfg = EvolveConfig::new(0.5);
        let a = radial_evolve(&phi0, RadialSpeed::Frozen { big_r: 1.0 }, &cfg).unwrap();
        let b = radial_evolve(&phi0, RadialSpeed::SelfConsistent { big_r: 1.0 }, &cfg).unwrap();
        let dr = 8.0 / 800.0;
        let worst = a
            .final_field()
            .values()
            .iter()
            .zip(b.final_field().values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 20.0 * dr, "frozen vs self-consistent drift {worst}");
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn radial_rejects_decreasing_profile_in_frozen_mode() {
        let g = GridSpec::new_1d(0.0, 4.0, 101).unwrap();
        let bad = ScalarField::from_fn(g, |x| 4.0 - x[0]).unwrap();
        let cfg = EvolveConfig::new(0.1);
        assert!(radial_evolve(&bad, RadialSpeed::Frozen { big_r: 1.0 }, &cfg).is_err());
        let res = radial_evolve(&bad, RadialSpeed::SelfConsistent { big_r: 1.0 }, &cfg).unwrap();
        assert!(!res.warnings.is_empty());
    }

    #[test]
    fn positivity_floor_with_negative_mu_operators() {
        // min u(t) >= min u(0) - t * sup|mu| for the shipped operators
        let (g, k) = setup_2d(81, 4.0);
        let u = cone(&g);
        let op = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        let cfg = EvolveConfig::new(0.2).with_c0(0.2);
        let traj = evolve(&u, &op, &k, &cfg).unwrap();
        let mu_sup = (traj.snapshots[0].1.max()).atan();
        let final_min = traj.final_field().min();
        assert!(final_min >= u.min() - 0.2 * mu_sup - 1e-9, "floor drop too deep: {final_min}");
    }

    #[test]
    fn step_rejects_cfl_violation() {
        let (g, k) = setup_2d(41, 4.0);
        let u = cone(&g);
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let too_big = 10.0;
        assert!(step_once(&u, &op, &k, too_big, 1e-8).is_err());
    }
}
