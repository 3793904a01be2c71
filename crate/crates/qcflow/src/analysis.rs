//! Field-level verdicts: quasiconvexity and sectionwise convexity testers,
//! the quasiconvexity-preservation and discrete-comparison experiments, and
//! the relabeling-invariance experiment for geometric operators.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{cfl_dt, resolve_eps_grad, step_once, EvolveConfig, EvolutionTrajectory};
use crate::fields::ScalarField;
use crate::matrix::dist;
use crate::nonlocal::ObstacleSet;
use crate::operators::{Operator, OperatorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// One falsifying sample: the points involved, their values, and the margin.
#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationReport {
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub witnesses: Vec<Witness>,
}

impl ViolationReport {
    pub fn from_margin(worst_margin: f64, tolerance: f64, witnesses: Vec<Witness>) -> Self {
        let verdict = if worst_margin > tolerance { Verdict::Fail } else { Verdict::Pass };
        ViolationReport { verdict, worst_margin, tolerance, witnesses }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

const LAMBDAS: [f64; 3] = [0.25, 0.5, 0.75];

/// One grid line prepared for fast interpolation along itself. For axis
/// lines the combination point interpolates linearly between consecutive
/// line nodes; for diagonal lines the bilinear value additionally needs the
/// two off-line cell corners, carried as their precomputed sum.
struct Line {
    vals: Vec<f64>,
    /// side_sum[m] = sum of the two cell corners adjacent to segment
    /// (m, m+1); empty for axis lines.
    side_sum: Vec<f64>,
    /// physical origin and per-node step of the line
    origin: [f64; 2],
    step: [f64; 2],
    dim: usize,
}

impl Line {
    /// Bilinear field value at line parameter s (node units).
    fn value_at(&self, s: f64) -> f64 {
        let m = (s.floor() as usize).min(self.vals.len() - 2);
        let f = s - m as f64;
        if self.side_sum.is_empty() {
            self.vals[m] + f * (self.vals[m + 1] - self.vals[m])
        } else {
            (1.0 - f) * (1.0 - f) * self.vals[m]
                + f * f * self.vals[m + 1]
                + f * (1.0 - f) * self.side_sum[m]
        }
    }

    fn point_at(&self, s: f64) -> Vec<f64> {
        (0..self.dim).map(|k| self.origin[k] + s * self.step[k]).collect()
    }
}

/// Rows, columns, and both diagonal families as prepared lines.
fn grid_lines(field: &ScalarField) -> Vec<Line> {
    let g = field.grid();
    let v = field.values();
    let mut lines = Vec::new();
    match g.dim() {
        1 => {
            lines.push(Line {
                vals: v.to_vec(),
                side_sum: Vec::new(),
                origin: [g.lower()[0], 0.0],
                step: [g.spacing(0), 0.0],
                dim: 1,
            });
        }
        _ => {
            let (nx, ny) = (g.counts()[0], g.counts()[1]);
            let (hx, hy) = (g.spacing(0), g.spacing(1));
            let (x0, y0) = (g.lower()[0], g.lower()[1]);
            let at = |i: usize, j: usize| v[i * ny + j];
            for i in 0..nx {
                lines.push(Line {
                    vals: (0..ny).map(|j| at(i, j)).collect(),
                    side_sum: Vec::new(),
                    origin: [x0 + i as f64 * hx, y0],
                    step: [0.0, hy],
                    dim: 2,
                });
            }
            for j in 0..ny {
                lines.push(Line {
                    vals: (0..nx).map(|i| at(i, j)).collect(),
                    side_sum: Vec::new(),
                    origin: [x0, y0 + j as f64 * hy],
                    step: [hx, 0.0],
                    dim: 2,
                });
            }
            // diagonals (di, dj) = (1, 1), starting on the left or bottom edge
            for d in -(ny as isize - 1)..nx as isize {
                let (i0, j0) = if d >= 0 { (d as usize, 0usize) } else { (0, (-d) as usize) };
                let len = (nx - i0).min(ny - j0);
                if len < 3 {
                    continue;
                }
                let vals: Vec<f64> = (0..len).map(|k| at(i0 + k, j0 + k)).collect();
                let side_sum: Vec<f64> =
                    (0..len - 1).map(|k| at(i0 + k + 1, j0 + k) + at(i0 + k, j0 + k + 1)).collect();
                lines.push(Line {
                    vals,
                    side_sum,
                    origin: [x0 + i0 as f64 * hx, y0 + j0 as f64 * hy],
                    step: [hx, hy],
                    dim: 2,
                });
            }
            // anti-diagonals (di, dj) = (1, -1), starting on the left or top edge
            for d in 0..(nx + ny - 1) {
                let (i0, j0) = if d < ny { (0usize, d) } else { (d - ny + 1, ny - 1) };
                let len = (nx - i0).min(j0 + 1);
                if len < 3 {
                    continue;
                }
                let vals: Vec<f64> = (0..len).map(|k| at(i0 + k, j0 - k)).collect();
                let side_sum: Vec<f64> =
                    (0..len - 1).map(|k| at(i0 + k, j0 - k - 1) + at(i0 + k + 1, j0 - k)).collect();
                lines.push(Line {
                    vals,
                    side_sum,
                    origin: [x0 + i0 as f64 * hx, y0 + j0 as f64 * hy],
                    step: [hx, -hy],
                    dim: 2,
                });
            }
        }
    }
    lines
}

/// Quasiconvexity tester: for every node pair along grid lines and both
/// diagonals and lambda in {1/4, 1/2, 3/4}, the interpolated value at the
/// convex combination must not exceed the larger endpoint by more than tol.
pub fn is_quasiconvex(field: &ScalarField, tol: f64) -> ViolationReport {
    let lines = grid_lines(field);

    let per_line: Vec<(f64, Option<(usize, usize, f64)>)> = lines
        .par_iter()
        .map(|line| {
            let m = line.vals.len();
            let mut worst = f64::NEG_INFINITY;
            let mut arg = None;
            for a in 0..m {
                let va = line.vals[a];
                for b in (a + 1)..m {
                    let hi = va.max(line.vals[b]);
                    for lam in LAMBDAS {
                        let s = a as f64 + (1.0 - lam) * (b - a) as f64;
                        let margin = line.value_at(s) - hi;
                        if margin > worst {
                            worst = margin;
                            arg = Some((a, b, lam));
                        }
                    }
                }
            }
            (worst, arg.map(|(a, b, lam)| (a, b, lam)))
        })
        .collect();

    let worst = per_line.iter().map(|(w, _)| *w).fold(f64::NEG_INFINITY, f64::max);
    let mut witnesses: Vec<Witness> = per_line
        .iter()
        .zip(&lines)
        .filter_map(|((w, arg), line)| {
            if *w <= tol {
                return None;
            }
            let (a, b, lam) = (*arg)?;
            let s = a as f64 + (1.0 - lam) * (b - a) as f64;
            Some(Witness {
                points: vec![line.point_at(a as f64), line.point_at(b as f64), line.point_at(s)],
                values: vec![line.vals[a], line.vals[b], line.value_at(s)],
                margin: *w,
            })
        })
        .collect();
    witnesses.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    witnesses.truncate(8);
    ViolationReport::from_margin(worst, tol, witnesses)
}

/// Sectionwise convexity tester: divided second differences along all axis
/// lines; a section is flagged when a second difference drops below
/// -tol * h^2. The report's margin is the negated second difference.
pub fn is_convex_1d_sections(field: &ScalarField, tol: f64) -> ViolationReport {
    let g = field.grid();
    let h_max = (0..g.dim()).map(|k| g.spacing(k)).fold(0.0f64, f64::max);
    let tolerance = tol * h_max * h_max;
    let mut worst = f64::NEG_INFINITY;
    let mut witnesses = Vec::new();

    let mut scan_axis = |axis: usize| {
        let h = g.spacing(axis);
        let counts = g.counts().to_vec();
        let other = 1 - axis;
        let n_lines = if g.dim() == 1 { 1 } else { counts[other] };
        for line in 0..n_lines {
            for i in 1..counts[axis] - 1 {
                let mk_idx = |ii: usize| -> Vec<usize> {
                    if g.dim() == 1 {
                        vec![ii]
                    } else if axis == 0 {
                        vec![ii, line]
                    } else {
                        vec![line, ii]
                    }
                };
                let vm = field.value(&mk_idx(i - 1));
                let v0 = field.value(&mk_idx(i));
                let vp = field.value(&mk_idx(i + 1));
                let d2 = (vp - 2.0 * v0 + vm) / (h * h);
                let margin = -d2;
                if margin > worst {
                    worst = margin;
                    if margin > tolerance {
                        let idx = mk_idx(i);
                        witnesses.push(Witness {
                            points: vec![
                                g.point(g.flat(&mk_idx(i - 1))),
                                g.point(g.flat(&idx)),
                                g.point(g.flat(&mk_idx(i + 1))),
                            ],
                            values: vec![vm, v0, vp],
                            margin,
                        });
                    }
                }
            }
        }
    };
    for axis in 0..g.dim() {
        scan_axis(axis);
    }
    witnesses.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    witnesses.truncate(8);
    ViolationReport::from_margin(worst, tolerance, witnesses)
}

#[derive(Debug, Serialize)]
pub struct PreservationRow {
    pub time: f64,
    pub quasiconvex: ViolationReport,
    pub convex_sections: ViolationReport,
}

/// Evolve and apply both testers at each snapshot. Quasiconvexity is
/// expected to survive (tolerance scaling with h); convexity may not.
pub fn preservation_experiment(
    u0: &ScalarField,
    op: &Operator,
    k: &ObstacleSet,
    cfg: &EvolveConfig,
    qc_tol: f64,
    convex_tol: f64,
) -> Result<(EvolutionTrajectory, Vec<PreservationRow>)> {
    let pre = is_quasiconvex(u0, qc_tol);
    if !pre.passed() {
        return Err(Error::Evolve(format!(
            "initial data is not quasiconvex (margin {})",
            pre.worst_margin
        )));
    }
    let traj = crate::evolve::evolve(u0, op, k, cfg)?;
    let rows = traj
        .snapshots
        .iter()
        .map(|(t, f)| PreservationRow {
            time: *t,
            quasiconvex: is_quasiconvex(f, qc_tol),
            convex_sections: is_convex_1d_sections(f, convex_tol),
        })
        .collect();
    Ok((traj, rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonResult {
    pub max_violation: f64,
    pub steps: usize,
}

/// Discrete comparison under a shared time-step schedule: evolve an ordered
/// pair and report the largest ordering violation max(u - v) over all steps
/// and nodes.
pub fn comparison_experiment(
    u0: &ScalarField,
    v0: &ScalarField,
    op: &Operator,
    k: &ObstacleSet,
    cfg: &EvolveConfig,
) -> Result<ComparisonResult> {
    if u0.grid() != v0.grid() {
        return Err(Error::Evolve("ordered pair must share one grid".into()));
    }
    if u0.values().iter().zip(v0.values()).any(|(a, b)| a > b) {
        return Err(Error::Evolve("precondition u0 <= v0 violated".into()));
    }
    let eps_u = resolve_eps_grad(u0, cfg);
    let eps_v = resolve_eps_grad(v0, cfg);
    let eps = eps_u.min(eps_v);
    let mut u = u0.clone();
    let mut v = v0.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut max_violation = f64::NEG_INFINITY;
    while t < cfg.t_end - 1e-14 {
        let remaining = cfg.t_end - t;
        let dt = cfl_dt(&u, op, k, cfg, remaining).min(cfl_dt(&v, op, k, cfg, remaining));
        u = step_once(&u, op, k, dt, eps)?;
        v = step_once(&v, op, k, dt, eps)?;
        let viol = u
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max);
        max_violation = max_violation.max(viol);
        t += dt;
        steps += 1;
    }
    Ok(ComparisonResult { max_violation: max_violation.max(0.0), steps })
}

/// Inner boundary nodes of the sublevel set {u < level}.
pub fn sublevel_boundary(field: &ScalarField, level: f64) -> Vec<Vec<f64>> {
    let g = field.grid();
    let mut out = Vec::new();
    let below = |flat: usize| field.values()[flat] < level;
    match g.dim() {
        1 => {
            let n = g.counts()[0];
            for i in 0..n {
                if below(i) {
                    let edge = (i > 0 && !below(i - 1)) || (i + 1 < n && !below(i + 1));
                    if edge {
                        out.push(g.point(i));
                    }
                }
            }
        }
        _ => {
            let (nx, ny) = (g.counts()[0], g.counts()[1]);
            for i in 0..nx {
                for j in 0..ny {
                    let flat = g.flat(&[i, j]);
                    if !below(flat) {
                        continue;
                    }
                    let mut edge = false;
                    if i > 0 && !below(g.flat(&[i - 1, j])) {
                        edge = true;
                    }
                    if i + 1 < nx && !below(g.flat(&[i + 1, j])) {
                        edge = true;
                    }
                    if j > 0 && !below(g.flat(&[i, j - 1])) {
                        edge = true;
                    }
                    if j + 1 < ny && !below(g.flat(&[i, j + 1])) {
                        edge = true;
                    }
                    if edge {
                        out.push(g.point(flat));
                    }
                }
            }
        }
    }
    out
}

/// Symmetric Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_sided = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.par_iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .reduce(|| f64::NEG_INFINITY, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

#[derive(Debug, Clone, Serialize)]
pub struct RelabelRow {
    pub time: f64,
    pub base_level: f64,
    pub hausdorff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelabelResult {
    pub rows: Vec<RelabelRow>,
    pub max_drift: f64,
}

/// Relabeling invariance for geometric operators: the h-sublevel boundary of
/// the run started from g(u0) is compared to the level-l boundary of the
/// base run at matched times, with h = g(l).
pub fn relabel_experiment(
    u0: &ScalarField,
    g: &dyn Fn(f64) -> f64,
    op: &Operator,
    k: &ObstacleSet,
    cfg: &EvolveConfig,
    base_levels: &[f64],
) -> Result<RelabelResult> {
    if !op.geometric() {
        return Err(Error::Evolve(format!(
            "relabel experiment requires a geometric operator, got {}",
            op.name()
        )));
    }
    // sampled strict-monotonicity check of the relabeling map
    let (lo, hi) = (u0.min(), u0.max());
    let mut prev = f64::NEG_INFINITY;
    for k_s in 0..=64 {
        let s = lo + (hi - lo) * k_s as f64 / 64.0;
        let gs = g(s);
        if gs <= prev {
            return Err(Error::Evolve("relabeling map must be strictly increasing".into()));
        }
        prev = gs;
    }
    let mut w0 = u0.clone();
    for v in w0.values_mut() {
        *v = g(*v);
    }
    let base = crate::evolve::evolve(u0, op, k, cfg)?;
    let relab = crate::evolve::evolve(&w0, op, k, cfg)?;
    if base.snapshots.len() != relab.snapshots.len() {
        return Err(Error::Evolve("snapshot schedules diverged".into()));
    }
    let mut rows = Vec::new();
    let mut max_drift: f64 = 0.0;
    for ((t, fu), (_, fw)) in base.snapshots.iter().zip(&relab.snapshots) {
        for &level in base_levels {
            let a = sublevel_boundary(fu, level);
            let b = sublevel_boundary(fw, g(level));
            let d = hausdorff(&a, &b);
            max_drift = max_drift.max(d);
            rows.push(RelabelRow { time: *t, base_level: level, hausdorff: d });
        }
    }
    Ok(RelabelResult { rows, max_drift })
}
