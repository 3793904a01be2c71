//! Sampling checkers for the structural assumptions on an operator:
//! degenerate ellipticity/properness, set-monotonicity, geometricity, and
//! the concavity of the transformed operator. A finite sample can only
//! falsify; reports carry explicit witnesses on failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::matrix::{norm, SymMat};
use crate::operators::OperatorSpec;

/// Random tuple plan shared by the checkers.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub seed: u64,
    pub samples: usize,
    pub dim: usize,
    pub r_range: (f64, f64),
    /// Gradient magnitudes are log-sampled in this range.
    pub p_mag_range: (f64, f64),
    pub x_scale: f64,
    pub a_max: f64,
}

impl SamplePlan {
    pub fn new(seed: u64, samples: usize, dim: usize) -> Self {
        SamplePlan {
            seed,
            samples,
            dim,
            r_range: (1.0, 10.0),
            p_mag_range: (1e-2, 10.0),
            x_scale: 2.0,
            a_max: std::f64::consts::PI,
        }
    }

    pub fn with_r_range(mut self, r: (f64, f64)) -> Self {
        self.r_range = r;
        self
    }

    pub fn with_p_cap(mut self, cap: f64) -> Self {
        self.p_mag_range.1 = cap;
        self
    }

    pub fn with_a_max(mut self, a: f64) -> Self {
        self.a_max = a;
        self
    }

    fn sample_p(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (lo, hi) = self.p_mag_range;
        let mag = lo * (hi / lo).powf(rng.gen_range(0.0..1.0f64));
        let dir: Vec<f64> = if self.dim == 1 {
            vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }]
        } else {
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![t.cos(), t.sin()]
        };
        dir.iter().map(|d| d * mag).collect()
    }

    fn sample_x(&self, rng: &mut ChaCha8Rng) -> SymMat {
        if self.dim == 1 {
            SymMat::new_1d(rng.gen_range(-self.x_scale..self.x_scale))
        } else {
            SymMat::new_2d(
                rng.gen_range(-self.x_scale..self.x_scale),
                rng.gen_range(-self.x_scale..self.x_scale),
                rng.gen_range(-self.x_scale..self.x_scale),
            )
        }
    }

    fn sample_psd(&self, rng: &mut ChaCha8Rng) -> SymMat {
        // v⊗v + w⊗w is PSD by construction
        let v = self.sample_p(rng);
        let scale = rng.gen_range(0.0..1.0);
        let base = SymMat::outer(&v, scale / (1.0 + norm(&v).powi(2)));
        if self.dim == 2 && rng.gen_bool(0.5) {
            let w = self.sample_p(rng);
            base.add(&SymMat::outer(&w, rng.gen_range(0.0..0.5) / (1.0 + norm(&w).powi(2))))
        } else {
            base
        }
    }
}

/// One falsifying sample, kept re-evaluatable.
#[derive(Clone, Debug, Serialize)]
pub struct CheckWitness {
    pub description: String,
    pub margin: f64,
}

/// Outcome of one checker run.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub checked: usize,
    pub violations: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub witnesses: Vec<CheckWitness>,
}

impl CheckReport {
    fn new(check: &str, tolerance: f64) -> Self {
        CheckReport {
            check: check.into(),
            pass: true,
            checked: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
            tolerance,
            witnesses: Vec::new(),
        }
    }

    fn record(&mut self, margin: f64, witness: impl FnOnce() -> String) {
        self.checked += 1;
        if margin > self.worst_margin {
            self.worst_margin = margin;
        }
        if margin > self.tolerance {
            self.violations += 1;
            self.pass = false;
            if self.witnesses.len() < 8 {
                self.witnesses.push(CheckWitness { description: witness(), margin });
            }
        }
    }
}

const CHECK_TOL: f64 = 1e-9;

/// Degenerate ellipticity and properness: F is nonincreasing under PSD
/// increments of X, and nondecreasing in r.
pub fn check_ellipticity(op: &dyn OperatorSpec, plan: &SamplePlan) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut rep = CheckReport::new("F1_ellipticity", CHECK_TOL);
    for _ in 0..plan.samples {
        let r = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let p = plan.sample_p(&mut rng);
        let x = plan.sample_x(&mut rng);
        let a = rng.gen_range(0.0..plan.a_max);
        let (Ok(base), delta) = (op.evaluate(r, &p, &x, a), plan.sample_psd(&mut rng)) else {
            continue;
        };
        if let Ok(bumped) = op.evaluate(r, &p, &x.add(&delta), a) {
            // F(X + PSD) <= F(X)
            rep.record(bumped - base, || {
                format!("X-monotonicity at r={r} p={p:?} X={x:?} Δ={delta:?} a={a}")
            });
        }
        // properness: r1 <= r2 implies F(r1,..) <= F(r2,..)
        let r2 = rng.gen_range(r..plan.r_range.1.max(r + 1e-9));
        if let (Ok(f1), Ok(f2)) = (op.evaluate(r, &p, &x, a), op.evaluate(r2, &p, &x, a)) {
            rep.record(f1 - f2, || format!("r-monotonicity at r1={r} r2={r2} p={p:?} a={a}"));
        }
    }
    rep
}

/// Set-monotonicity through the measure: F nondecreasing in a.
pub fn check_set_monotonicity(op: &dyn OperatorSpec, plan: &SamplePlan) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x9e3779b97f4a7c15);
    let mut rep = CheckReport::new("F4_set_monotonicity", CHECK_TOL);
    for _ in 0..plan.samples {
        let r = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let p = plan.sample_p(&mut rng);
        let x = plan.sample_x(&mut rng);
        let a1 = rng.gen_range(0.0..plan.a_max);
        let a2 = rng.gen_range(a1..plan.a_max.max(a1 + 1e-12));
        if let (Ok(f1), Ok(f2)) = (op.evaluate(r, &p, &x, a1), op.evaluate(r, &p, &x, a2)) {
            rep.record(f1 - f2, || format!("a-monotonicity at r={r} p={p:?} a1={a1} a2={a2}"));
        }
    }
    rep
}

/// Geometricity: F(r1, c1 p, c1 X + c2 p⊗p, a) = c1 F(r2, p, X, a), checked
/// to 1e-9 relative.
pub fn check_geometric(op: &dyn OperatorSpec, plan: &SamplePlan) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0xc2b2ae3d27d4eb4f);
    let mut rep = CheckReport::new("geometricity", CHECK_TOL);
    for _ in 0..plan.samples {
        let r1 = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let r2 = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let p = plan.sample_p(&mut rng);
        let x = plan.sample_x(&mut rng);
        let a = rng.gen_range(0.0..plan.a_max);
        let c1: f64 = rng.gen_range(0.1..4.0);
        let c2: f64 = rng.gen_range(-2.0..2.0);
        let ps: Vec<f64> = p.iter().map(|v| c1 * v).collect();
        let xs = x.scale(c1).add(&SymMat::outer(&p, c2));
        if let (Ok(lhs), Ok(rhs)) = (op.evaluate(r1, &ps, &xs, a), op.evaluate(r2, &p, &x, a)) {
            let scale = rhs.abs().max(lhs.abs()).max(1.0);
            rep.record((lhs - c1 * rhs).abs() / scale, || {
                format!("identity at c1={c1} c2={c2} r1={r1} r2={r2} p={p:?} X={x:?} a={a}")
            });
        }
    }
    rep
}

/// Concavity report for the transformed operator.
#[derive(Clone, Debug, Serialize)]
pub struct F7Report {
    pub beta: f64,
    pub joint_midpoint: CheckReport,
    pub r_second_difference: CheckReport,
    pub mu_transform_midpoint: CheckReport,
    /// Margin histogram over the joint midpoint samples (log-spaced bins).
    pub margin_histogram: Vec<(String, usize)>,
}

impl F7Report {
    pub fn pass(&self) -> bool {
        self.joint_midpoint.pass && self.r_second_difference.pass && self.mu_transform_midpoint.pass
    }
}

/// Midpoint-concavity of (r, X) -> G_beta(r, p, X, a) on [c0, r_max] x S^n,
/// a 3-point second-difference test in r alone, and midpoint concavity of
/// r -> r^beta mu(r^{1-beta}).
pub fn check_f7(op: &dyn OperatorSpec, beta: f64, plan: &SamplePlan) -> F7Report {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0xa076_1d64_78bd_642f);
    let mut joint = CheckReport::new("F7_joint_midpoint", CHECK_TOL);
    let mut second = CheckReport::new("F7_r_second_difference", CHECK_TOL);
    let mut mu_rep = CheckReport::new("F7_mu_transform", CHECK_TOL);
    let mut margins = Vec::new();

    for _ in 0..plan.samples {
        let p = plan.sample_p(&mut rng);
        let a = rng.gen_range(0.0..plan.a_max);
        let r1 = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let r2 = rng.gen_range(plan.r_range.0..plan.r_range.1);
        let x1 = plan.sample_x(&mut rng);
        let x2 = plan.sample_x(&mut rng);
        let rm = 0.5 * (r1 + r2);
        let xm = x1.add(&x2).scale(0.5);
        if let (Ok(g1), Ok(g2), Ok(gm)) = (
            op.g_beta(beta, r1, &p, &x1, a),
            op.g_beta(beta, r2, &p, &x2, a),
            op.g_beta(beta, rm, &p, &xm, a),
        ) {
            // concavity: G(mid) >= (G1 + G2)/2
            let margin = 0.5 * (g1 + g2) - gm;
            margins.push(margin);
            joint.record(margin, || {
                format!(
                    "midpoint pair (r1={r1}, X1={x1:?}) (r2={r2}, X2={x2:?}) p={p:?} a={a}: \
                     G(mid)={gm} vs avg={}",
                    0.5 * (g1 + g2)
                )
            });
        }

        // 3-point second difference in r alone
        let dr = 0.05 * (plan.r_range.1 - plan.r_range.0).min(1.0);
        let rc = rng.gen_range((plan.r_range.0 + dr)..(plan.r_range.1 - dr).max(plan.r_range.0 + 1.5 * dr));
        let x = plan.sample_x(&mut rng);
        if let (Ok(gl), Ok(gc), Ok(gr)) = (
            op.g_beta(beta, rc - dr, &p, &x, a),
            op.g_beta(beta, rc, &p, &x, a),
            op.g_beta(beta, rc + dr, &p, &x, a),
        ) {
            // concave: second difference <= 0
            let d2 = (gl - 2.0 * gc + gr) / (dr * dr);
            second.record(d2, || {
                format!("second difference in r at r={rc} dr={dr} p={p:?} X={x:?} a={a}: {d2}")
            });
        }

        // r -> r^beta mu(r^{1-beta})
        let m1 = op.mu_transformed(beta, r1);
        let m2 = op.mu_transformed(beta, r2);
        let mm = op.mu_transformed(beta, 0.5 * (r1 + r2));
        mu_rep.record(0.5 * (m1 + m2) - mm, || {
            format!("mu transform midpoint at r1={r1} r2={r2}")
        });
    }

    F7Report {
        beta,
        joint_midpoint: joint,
        r_second_difference: second,
        mu_transform_midpoint: mu_rep,
        margin_histogram: histogram(&margins),
    }
}

fn histogram(margins: &[f64]) -> Vec<(String, usize)> {
    let bins = [
        (f64::NEG_INFINITY, -1e-3, "<-1e-3"),
        (-1e-3, -1e-6, "[-1e-3,-1e-6)"),
        (-1e-6, -1e-9, "[-1e-6,-1e-9)"),
        (-1e-9, 1e-9, "[-1e-9,1e-9]"),
        (1e-9, 1e-6, "(1e-9,1e-6]"),
        (1e-6, 1e-3, "(1e-6,1e-3]"),
        (1e-3, f64::INFINITY, ">1e-3"),
    ];
    bins.iter()
        .map(|(lo, hi, label)| {
            let n = margins.iter().filter(|&&m| m > *lo && m <= *hi).count();
            (label.to_string(), n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::OperatorError;
    use crate::operators::{Operator, SurfaceEnergy, ValueProfile};

    fn shipped() -> Vec<Operator> {
        vec![
            Operator::nonlocal_eikonal(1.0).unwrap(),
            Operator::aniso_flow(0.5, 1.0, 1.0, SurfaceEnergy::Isotropic).unwrap(),
            Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap(),
            Operator::viscous_hj(1.0, 0.5).unwrap(),
        ]
    }

    /// Anti-elliptic fixture F = +tr X.
    struct PlusTrace;
    impl OperatorSpec for PlusTrace {
        fn evaluate(&self, _r: f64, p: &[f64], x: &SymMat, _a: f64) -> Result<f64, OperatorError> {
            if norm(p) == 0.0 {
                return Err(OperatorError::ZeroGradient);
            }
            Ok(x.trace())
        }
        fn mu(&self, _r: f64) -> f64 {
            0.0
        }
        fn first_order_speed_bound(&self, _r: (f64, f64), _a: f64) -> f64 {
            0.0
        }
        fn diffusion_bound(&self, dim: usize) -> f64 {
            dim as f64
        }
        fn geometric(&self) -> bool {
            false
        }
        fn r_dependent(&self) -> bool {
            false
        }
    }

    /// Set-antitone fixture F = -a |p|.
    struct AntiMeasure;
    impl OperatorSpec for AntiMeasure {
        fn evaluate(&self, _r: f64, p: &[f64], _x: &SymMat, a: f64) -> Result<f64, OperatorError> {
            let n = norm(p);
            if n == 0.0 {
                return Err(OperatorError::ZeroGradient);
            }
            Ok(-a * n)
        }
        fn mu(&self, _r: f64) -> f64 {
            0.0
        }
        fn first_order_speed_bound(&self, _r: (f64, f64), a: f64) -> f64 {
            a
        }
        fn diffusion_bound(&self, _dim: usize) -> f64 {
            0.0
        }
        fn geometric(&self) -> bool {
            true
        }
        fn r_dependent(&self) -> bool {
            false
        }
    }

    #[test]
    fn shipped_operators_pass_f1_and_f4() {
        let plan = SamplePlan::new(42, 2000, 2);
        for op in shipped() {
            let e = check_ellipticity(&op, &plan);
            assert!(e.pass, "{} ellipticity: {:?}", op.name(), e.witnesses.first());
            assert_eq!(e.violations, 0);
            let m = check_set_monotonicity(&op, &plan);
            assert!(m.pass, "{} set monotonicity", op.name());
            assert_eq!(m.violations, 0);
        }
    }

    #[test]
    fn adversarial_fixtures_fail_with_witnesses() {
        let plan = SamplePlan::new(7, 500, 2);
        let e = check_ellipticity(&PlusTrace, &plan);
        assert!(!e.pass);
        assert!(!e.witnesses.is_empty());
        assert!(e.worst_margin > 1e-6);

        let m = check_set_monotonicity(&AntiMeasure, &plan);
        assert!(!m.pass);
        assert!(!m.witnesses.is_empty());
    }

    #[test]
    fn geometricity_verdicts() {
        let plan = SamplePlan::new(3, 1500, 2);
        let eik = Operator::nonlocal_eikonal(1.0).unwrap();
        assert!(check_geometric(&eik, &plan).pass);

        let aniso = Operator::aniso_flow(0.5, 1.0, 1.0, SurfaceEnergy::Isotropic).unwrap();
        assert!(check_geometric(&aniso, &plan).pass, "projection structure cancels c2 p⊗p");

        let vh = Operator::viscous_hj(1.0, 0.5).unwrap();
        let rep = check_geometric(&vh, &plan);
        assert!(!rep.pass);
        // explicit witness: c1 = 2, X = I gives F(2p, 2I) = -4 + a sqrt(2|p|)
        // against 2 F(p, I) = -4 + 2 a sqrt(|p|)
        assert!(!rep.witnesses.is_empty());
    }

    #[test]
    fn f7_u_dep_flow_passes() {
        let op = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        let plan = SamplePlan::new(5, 2000, 2).with_r_range((1.0, 10.0));
        let rep = check_f7(&op, 0.99, &plan);
        assert!(rep.pass(), "joint: {:?}", rep.joint_midpoint.witnesses.first());
    }

    #[test]
    fn f7_heat_equation_fails_every_beta() {
        // a = 0: G_beta = -tr X + beta r^{-1} |p|^2 is convex in r
        let op = Operator::viscous_hj(0.0, 0.5).unwrap();
        for beta in [0.9, 0.99, 0.999] {
            let plan = SamplePlan::new(9, 1000, 2).with_r_range((1.0, 10.0));
            let rep = check_f7(&op, beta, &plan);
            assert!(!rep.pass(), "heat equation must fail F7 at beta={beta}");
            assert!(
                !rep.joint_midpoint.witnesses.is_empty()
                    || !rep.r_second_difference.witnesses.is_empty()
            );
        }
    }

    /// The gradient-term concavity for viscous HJ holds once beta is close
    /// enough to 1 for the given (a, alpha, c0, L); near r = c0 with |p| up
    /// to L = 10 this needs 2 beta L^{2-alpha} <= a (1-beta)^{alpha-1}
    /// beta(1-alpha)(1 - beta(1-alpha)) c0^{beta(1-alpha)+1}.
    #[test]
    fn f7_viscous_hj_beta_threshold() {
        let op = Operator::viscous_hj(1.0, 0.5).unwrap();
        // close enough to 1: passes with the Lipschitz cap L = 10
        let plan = SamplePlan::new(13, 3000, 2).with_r_range((1.0, 10.0)).with_p_cap(10.0);
        let rep = check_f7(&op, 1.0 - 1e-5, &plan);
        assert!(rep.pass(), "beta=1-1e-5 should pass: {:?}", rep.joint_midpoint.witnesses.first());

        // at beta = 0.999 the r^{-1}|p|^2 term wins near (r=c0, |p|=L):
        // V_rr(1, 10) = 2*0.999*100 - 7.91*3.16 > 0, so an honest sampler
        // finds convexity witnesses
        let rep = check_f7(&op, 0.999, &plan);
        assert!(!rep.pass(), "beta=0.999 with L=10, c0=1 is not concave");
    }

    #[test]
    fn determinism_same_seed_same_report() {
        let op = Operator::viscous_hj(1.0, 0.5).unwrap();
        let plan = SamplePlan::new(21, 500, 2);
        let a = check_ellipticity(&op, &plan);
        let b = check_ellipticity(&op, &plan);
        assert_eq!(a.worst_margin, b.worst_margin);
        assert_eq!(a.checked, b.checked);
    }
}
