//! The operator abstraction F(r, p, X, a) with a = m(A), the four shipped
//! operators, the level-set transform `g_beta`, and scheme-facing metadata
//! (speed/diffusion bounds, geometricity).
//!
//! The set argument enters only through its measure: every shipped operator
//! depends on A via m(K ∩ ·) alone. p = 0 is a hard error at this interface;
//! the singular point is reachable only through `mu`.

use std::fmt;
use std::sync::Arc;

use crate::error::OperatorError;
use crate::fields::GradHess;
use crate::matrix::{norm, SymMat};

/// User-supplied anisotropic surface energy: gamma positively 1-homogeneous,
/// positive and C^2 off the origin, with its Hessian.
pub trait AnisotropicEnergy: Send + Sync {
    fn gamma(&self, p: &[f64]) -> f64;
    fn hessian(&self, p: &[f64]) -> SymMat;
    /// sup |∇gamma| over unit directions (attained by 0-homogeneity).
    fn grad_sup(&self) -> f64;
}

#[derive(Clone)]
pub enum SurfaceEnergy {
    /// gamma(p) = |p|; Hessian (I - p̂⊗p̂)/|p|.
    Isotropic,
    Custom(Arc<dyn AnisotropicEnergy>),
}

impl fmt::Debug for SurfaceEnergy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceEnergy::Isotropic => write!(f, "Isotropic"),
            SurfaceEnergy::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SurfaceEnergy {
    pub fn gamma(&self, p: &[f64]) -> f64 {
        match self {
            SurfaceEnergy::Isotropic => norm(p),
            SurfaceEnergy::Custom(e) => e.gamma(p),
        }
    }

    pub fn hessian(&self, p: &[f64]) -> SymMat {
        match self {
            SurfaceEnergy::Isotropic => {
                let n = norm(p);
                let dim = p.len();
                // (I - p̂⊗p̂)/|p|
                SymMat::identity(dim).add(&SymMat::outer(p, -1.0 / (n * n))).scale(1.0 / n)
            }
            SurfaceEnergy::Custom(e) => e.hessian(p),
        }
    }

    pub fn grad_sup(&self) -> f64 {
        match self {
            SurfaceEnergy::Isotropic => 1.0,
            SurfaceEnergy::Custom(e) => e.grad_sup(),
        }
    }

    /// Sampling self-check of positive 1-homogeneity: gamma(c p) = c gamma(p).
    pub fn check_homogeneity(&self, dim: usize, samples: usize, seed: u64) -> Result<(), OperatorError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if norm(&p) < 1e-6 {
                continue;
            }
            let c: f64 = rng.gen_range(0.1..10.0);
            let scaled: Vec<f64> = p.iter().map(|x| c * x).collect();
            let lhs = self.gamma(&scaled);
            let rhs = c * self.gamma(&p);
            if (lhs - rhs).abs() > 1e-9 * rhs.abs().max(1.0) {
                return Err(OperatorError::InvalidParam(format!(
                    "surface energy is not 1-homogeneous: gamma({c}p) = {lhs}, c gamma(p) = {rhs}"
                )));
            }
            if self.gamma(&p) <= 0.0 {
                return Err(OperatorError::InvalidParam("surface energy must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Built-in catalog of zeroth-order profiles V(r).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueProfile {
    /// V(r) = arctan(r) + shift; nondecreasing, bounded, concave on (0, inf),
    /// with V(0) = shift >= 0.
    ArctanShifted { shift: f64 },
}

impl ValueProfile {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            ValueProfile::ArctanShifted { shift } => r.atan() + shift,
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            ValueProfile::ArctanShifted { shift } => std::f64::consts::FRAC_PI_2 + shift,
        }
    }

    /// Upper bound for V' (the r-direction Lipschitz constant).
    pub fn slope_sup(&self) -> f64 {
        match self {
            ValueProfile::ArctanShifted { .. } => 1.0,
        }
    }
}

/// Operator interface: closed-form evaluation, the (p, X) -> 0 limit mu, the
/// transformed operator, and scheme metadata.
pub trait OperatorSpec {
    fn evaluate(&self, r: f64, p: &[f64], x: &SymMat, a: f64) -> Result<f64, OperatorError>;

    /// Uniform limit of `evaluate` as (p, X) -> (0, 0).
    fn mu(&self, r: f64) -> f64;

    /// Upper bound for the coefficient of |p| over the given value range and
    /// measure cap.
    fn first_order_speed_bound(&self, r_range: (f64, f64), a_max: f64) -> f64;

    /// Upper bound for the trace of the second-order coefficient matrix in
    /// the given dimension (dominates the operator norm; sized for explicit
    /// stepping).
    fn diffusion_bound(&self, dim: usize) -> f64;

    fn geometric(&self) -> bool;

    fn r_dependent(&self) -> bool;

    /// Transformed operator
    /// G_beta(r,p,X,a) = r^beta/(1-beta) * F(r^(1-beta), (1-beta)r^(-beta) p,
    /// (1-beta)r^(-beta) X + (beta^2-beta)r^(-beta-1) p⊗p, a).
    fn g_beta(&self, beta: f64, r: f64, p: &[f64], x: &SymMat, a: f64) -> Result<f64, OperatorError> {
        if !(r > 0.0) {
            return Err(OperatorError::InvalidR(r));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(OperatorError::InvalidParam(format!("beta must be in (0,1), got {beta}")));
        }
        let rb = r.powf(-beta);
        let c1 = (1.0 - beta) * rb;
        let p_sub: Vec<f64> = p.iter().map(|v| c1 * v).collect();
        let x_sub = x.scale(c1).add(&SymMat::outer(p, (beta * beta - beta) * rb / r));
        let val = self.evaluate(r.powf(1.0 - beta), &p_sub, &x_sub, a)?;
        Ok(r.powf(beta) / (1.0 - beta) * val)
    }

    /// r |-> r^beta mu(r^(1-beta)), the transformed singular limit.
    fn mu_transformed(&self, beta: f64, r: f64) -> f64 {
        r.powf(beta) * self.mu(r.powf(1.0 - beta))
    }
}

/// The four shipped operators.
#[derive(Clone, Debug)]
pub enum Operator {
    /// F = b |p| a.
    NonlocalEikonal { b: f64 },
    /// F = a_drift |p| + b |p| a - c |p| tr(∇²gamma(-p) X).
    AnisoFlow { a_drift: f64, b: f64, c: f64, energy: SurfaceEnergy },
    /// F = V(r) + |p| a - tr((I - p̂⊗p̂) X).
    UDepFlow { v: ValueProfile },
    /// F = -tr X + a_coef |p|^alpha.
    ViscousHj { a_coef: f64, alpha: f64 },
}

impl Operator {
    pub fn nonlocal_eikonal(b: f64) -> Result<Self, OperatorError> {
        if b < 0.0 {
            return Err(OperatorError::InvalidParam(format!("b must be >= 0, got {b}")));
        }
        Ok(Operator::NonlocalEikonal { b })
    }

    pub fn aniso_flow(a_drift: f64, b: f64, c: f64, energy: SurfaceEnergy) -> Result<Self, OperatorError> {
        if b < 0.0 || c < 0.0 {
            return Err(OperatorError::InvalidParam("b and c must be >= 0".into()));
        }
        if let SurfaceEnergy::Custom(_) = energy {
            energy.check_homogeneity(2, 64, 0x5e1f)?;
        }
        Ok(Operator::AnisoFlow { a_drift, b, c, energy })
    }

    pub fn u_dep_flow(v: ValueProfile) -> Result<Self, OperatorError> {
        let ValueProfile::ArctanShifted { shift } = v;
        if shift < 0.0 {
            return Err(OperatorError::InvalidParam(format!(
                "arctan shift must be >= 0 for V(0) >= 0, got {shift}"
            )));
        }
        Ok(Operator::UDepFlow { v })
    }

    pub fn viscous_hj(a_coef: f64, alpha: f64) -> Result<Self, OperatorError> {
        if a_coef < 0.0 {
            return Err(OperatorError::InvalidParam(format!("a must be >= 0, got {a_coef}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(OperatorError::InvalidParam(format!("alpha must be in (0,1), got {alpha}")));
        }
        Ok(Operator::ViscousHj { a_coef, alpha })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Operator::NonlocalEikonal { .. } => "nonlocal_eikonal",
            Operator::AnisoFlow { .. } => "aniso_flow",
            Operator::UDepFlow { .. } => "u_dep_flow",
            Operator::ViscousHj { .. } => "viscous_hj",
        }
    }

    /// Whether the evaluation actually reads the measure argument; purely
    /// local operators skip the per-step sublevel index.
    pub fn uses_measure(&self) -> bool {
        match self {
            Operator::NonlocalEikonal { b } => *b > 0.0,
            Operator::AnisoFlow { b, .. } => *b > 0.0,
            Operator::UDepFlow { .. } => true,
            Operator::ViscousHj { .. } => false,
        }
    }

    /// Closed-form transformed operator for the viscous HJ case,
    /// cross-checked against the generic substitution path:
    /// -tr X + beta r^{-1} |p|^2 + a (1-beta)^{alpha-1} r^{beta(1-alpha)} |p|^alpha.
    pub fn viscous_hj_g_beta_closed(
        a_coef: f64,
        alpha: f64,
        beta: f64,
        r: f64,
        p: &[f64],
        x: &SymMat,
    ) -> f64 {
        let pn = norm(p);
        -x.trace()
            + beta * pn * pn / r
            + a_coef * (1.0 - beta).powf(alpha - 1.0) * r.powf(beta * (1.0 - alpha)) * pn.powf(alpha)
    }

    /// Explicit monotone-scheme evaluation from stencil values: upwind
    /// Godunov magnitudes drive first-order terms (direction from the sign of
    /// their total coefficient), central differences drive second-order
    /// terms. Returns `mu(r)` when the relevant gradient scale sits below
    /// `eps_grad`.
    pub fn scheme_value(&self, r: f64, gh: &GradHess, a: f64, eps_grad: f64) -> f64 {
        match self {
            Operator::NonlocalEikonal { b } => {
                let coeff = b * a;
                let g = if coeff >= 0.0 { gh.upwind_speed_pos } else { gh.upwind_speed_neg };
                if g.max(gh.central_norm()) < eps_grad {
                    self.mu(r)
                } else {
                    coeff * g
                }
            }
            Operator::AnisoFlow { a_drift, b, c, energy } => {
                let coeff = a_drift + b * a;
                let g = if coeff >= 0.0 { gh.upwind_speed_pos } else { gh.upwind_speed_neg };
                let pc = gh.central();
                let pn = gh.central_norm();
                if g.max(pn) < eps_grad {
                    return self.mu(r);
                }
                let mut val = coeff * g;
                if *c > 0.0 && pn >= eps_grad {
                    let mp: Vec<f64> = pc.iter().map(|v| -v).collect();
                    let gh_mat = energy.hessian(&mp);
                    val -= c * pn * gh_mat.trace_product(&gh.hessian);
                }
                val
            }
            Operator::UDepFlow { v } => {
                let g = gh.upwind_speed_pos; // coefficient of |p| is a >= 0
                let pc = gh.central();
                let pn = gh.central_norm();
                if g.max(pn) < eps_grad {
                    return self.mu(r);
                }
                let mut val = v.value(r) + a * g;
                if pn >= eps_grad {
                    let proj = SymMat::identity(gh.dim).add(&SymMat::outer(pc, -1.0 / (pn * pn)));
                    val -= proj.trace_product(&gh.hessian);
                }
                val
            }
            Operator::ViscousHj { a_coef, alpha } => {
                let g = gh.upwind_speed_pos;
                if g.max(gh.central_norm()) < eps_grad {
                    return self.mu(r);
                }
                -gh.hessian.trace() + a_coef * g.powf(*alpha)
            }
        }
    }
}

impl OperatorSpec for Operator {
    fn evaluate(&self, r: f64, p: &[f64], x: &SymMat, a: f64) -> Result<f64, OperatorError> {
        let pn = norm(p);
        if pn == 0.0 {
            return Err(OperatorError::ZeroGradient);
        }
        if !(a >= 0.0) || !a.is_finite() {
            return Err(OperatorError::MeasureOutOfRange(a));
        }
        Ok(match self {
            Operator::NonlocalEikonal { b } => b * pn * a,
            Operator::AnisoFlow { a_drift, b, c, energy } => {
                let mut val = a_drift * pn + b * pn * a;
                if *c > 0.0 {
                    let mp: Vec<f64> = p.iter().map(|v| -v).collect();
                    val -= c * pn * energy.hessian(&mp).trace_product(x);
                }
                val
            }
            Operator::UDepFlow { v } => {
                let proj = SymMat::identity(p.len()).add(&SymMat::outer(p, -1.0 / (pn * pn)));
                v.value(r) + pn * a - proj.trace_product(x)
            }
            Operator::ViscousHj { a_coef, alpha } => -x.trace() + a_coef * pn.powf(*alpha),
        })
    }

    fn mu(&self, r: f64) -> f64 {
        match self {
            Operator::UDepFlow { v } => v.value(r),
            _ => 0.0,
        }
    }

    fn first_order_speed_bound(&self, _r_range: (f64, f64), a_max: f64) -> f64 {
        match self {
            Operator::NonlocalEikonal { b } => b * a_max,
            Operator::AnisoFlow { a_drift, b, .. } => a_drift.abs() + b * a_max,
            Operator::UDepFlow { .. } => a_max,
            // coefficient scale of the sublinear term at unit slope; the h^2
            // diffusion constraint dominates the time step on any grid
            Operator::ViscousHj { a_coef, .. } => *a_coef,
        }
    }

    fn diffusion_bound(&self, dim: usize) -> f64 {
        match self {
            Operator::NonlocalEikonal { .. } => 0.0,
            // isotropic: trace of c(I - p̂⊗p̂) = c (dim - 1)
            Operator::AnisoFlow { c, energy, .. } => match energy {
                SurfaceEnergy::Isotropic => c * (dim as f64 - 1.0),
                SurfaceEnergy::Custom(e) => {
                    // sample trace of |p| ∇²gamma(-p) over unit directions
                    let mut sup: f64 = 0.0;
                    for k in 0..64 {
                        let t = k as f64 / 64.0 * std::f64::consts::TAU;
                        let p = if dim == 1 { vec![1.0] } else { vec![t.cos(), t.sin()] };
                        sup = sup.max(e.hessian(&p).trace());
                    }
                    c * sup
                }
            },
            Operator::UDepFlow { .. } => (dim as f64 - 1.0).max(0.0),
            Operator::ViscousHj { .. } => dim as f64,
        }
    }

    fn geometric(&self) -> bool {
        match self {
            Operator::NonlocalEikonal { .. } => true,
            Operator::AnisoFlow { .. } => true,
            Operator::UDepFlow { .. } => false,
            Operator::ViscousHj { .. } => false,
        }
    }

    fn r_dependent(&self) -> bool {
        matches!(self, Operator::UDepFlow { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn eikonal_evaluate() {
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let v = op.evaluate(5.0, &[1.0, 0.0], &SymMat::zero(2), PI).unwrap();
        assert!((v - PI).abs() < 1e-15);
    }

    #[test]
    fn viscous_hj_evaluate() {
        let op = Operator::viscous_hj(1.0, 0.5).unwrap();
        let x = SymMat::identity(2).scale(2.0);
        let v = op.evaluate(1.0, &[1.0, 0.0], &x, 0.0).unwrap();
        assert!((v - (-3.0)).abs() < 1e-15);
    }

    #[test]
    fn u_dep_evaluate() {
        let op = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        let v = op.evaluate(1.0, &[0.0, 1.0], &SymMat::identity(2), 0.0).unwrap();
        assert!((v - (FRAC_PI_4 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_is_error() {
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        assert_eq!(
            op.evaluate(1.0, &[0.0, 0.0], &SymMat::zero(2), 0.0),
            Err(OperatorError::ZeroGradient)
        );
        assert!(op.evaluate(1.0, &[1.0, 0.0], &SymMat::zero(2), -0.5).is_err());
    }

    #[test]
    fn mu_values() {
        let eik = Operator::nonlocal_eikonal(1.0).unwrap();
        assert_eq!(eik.mu(3.0), 0.0);
        let ud = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        assert!((ud.mu(1.0) - FRAC_PI_4).abs() < 1e-15);
        let vh = Operator::viscous_hj(1.0, 0.5).unwrap();
        assert_eq!(vh.mu(2.0), 0.0);
    }

    #[test]
    fn mu_is_the_small_gradient_limit() {
        // |evaluate(r, p, X, a) - mu(r)| -> 0 along a shrinking (p, X) scale
        let ops: Vec<Operator> = vec![
            Operator::nonlocal_eikonal(1.0).unwrap(),
            Operator::aniso_flow(0.5, 1.0, 1.0, SurfaceEnergy::Isotropic).unwrap(),
            Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.1 }).unwrap(),
            Operator::viscous_hj(1.0, 0.5).unwrap(),
        ];
        for op in &ops {
            let mut prev = f64::INFINITY;
            for k in 1..=8 {
                let s = 10f64.powi(-k);
                let p = [s, 0.5 * s];
                let x = SymMat::new_2d(s, 0.2 * s, -s);
                let mut worst: f64 = 0.0;
                for a in [0.0, 1.0, PI] {
                    let v = op.evaluate(1.5, &p, &x, a).unwrap();
                    worst = worst.max((v - op.mu(1.5)).abs());
                }
                assert!(worst <= prev + 1e-12, "{} not shrinking", op.name());
                prev = worst;
            }
            // slowest decay among the shipped operators is |p|^alpha, alpha = 1/2
            assert!(prev < 1e-3, "{} residual {prev}", op.name());
        }
    }

    #[test]
    fn g_beta_viscous_example() {
        // a=1, alpha=1/2, beta=1/2, r=1, p=(1,0), X=0 -> 0.5 + sqrt(2)
        let op = Operator::viscous_hj(1.0, 0.5).unwrap();
        let v = op.g_beta(0.5, 1.0, &[1.0, 0.0], &SymMat::zero(2), 0.0).unwrap();
        let expect = 0.5 + 2.0f64.sqrt();
        assert!((v - expect).abs() < 1e-12, "got {v}");
        // and the closed form agrees
        let cf = Operator::viscous_hj_g_beta_closed(1.0, 0.5, 0.5, 1.0, &[1.0, 0.0], &SymMat::zero(2));
        assert!((cf - expect).abs() < 1e-12);
    }

    #[test]
    fn g_beta_closed_form_cross_check() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let a_coef = rng.gen_range(0.0..3.0);
            let alpha = rng.gen_range(0.05..0.95);
            let op = Operator::viscous_hj(a_coef, alpha).unwrap();
            let beta = rng.gen_range(0.05..0.95);
            let r = rng.gen_range(0.2..5.0);
            let p = [rng.gen_range(-3.0..3.0f64), rng.gen_range(-3.0..3.0)];
            if norm(&p) < 1e-3 {
                continue;
            }
            let x = SymMat::new_2d(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let gen_path = op.g_beta(beta, r, &p, &x, 0.0).unwrap();
            let closed = Operator::viscous_hj_g_beta_closed(a_coef, alpha, beta, r, &p, &x);
            let scale = gen_path.abs().max(closed.abs()).max(1.0);
            assert!(
                (gen_path - closed).abs() <= 1e-12 * scale,
                "beta={beta} r={r}: {gen_path} vs {closed}"
            );
        }
    }

    #[test]
    fn g_beta_geometric_independence() {
        // for geometric first-order ops, g_beta equals b |p| a independent of (r, beta)
        use rand::{Rng, SeedableRng};
        let op = Operator::nonlocal_eikonal(1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let beta = rng.gen_range(0.05..0.95);
            let r = rng.gen_range(0.1..10.0);
            let p = [rng.gen_range(-2.0..2.0f64), rng.gen_range(-2.0..2.0)];
            if norm(&p) < 1e-3 {
                continue;
            }
            let a = rng.gen_range(0.0..PI);
            let v = op.g_beta(beta, r, &p, &SymMat::zero(2), a).unwrap();
            assert!((v - norm(&p) * a).abs() <= 1e-9 * (1.0 + v.abs()), "beta={beta} r={r}");
        }
    }

    #[test]
    fn g_beta_heat_part_example() {
        // viscous_hj a=0: G_beta = -tr X + beta r^{-1}|p|^2; beta=0.9, r=2, p=(2,0) -> 1.8
        let op = Operator::viscous_hj(0.0, 0.5).unwrap();
        let v = op.g_beta(0.9, 2.0, &[2.0, 0.0], &SymMat::zero(2), 0.0).unwrap();
        assert!((v - 1.8).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn g_beta_rejects_bad_args() {
        let op = Operator::viscous_hj(1.0, 0.5).unwrap();
        assert!(op.g_beta(0.5, -1.0, &[1.0], &SymMat::zero(1), 0.0).is_err());
        assert!(op.g_beta(1.5, 1.0, &[1.0], &SymMat::zero(1), 0.0).is_err());
    }

    #[test]
    fn speed_and_diffusion_bounds() {
        let eik = Operator::nonlocal_eikonal(1.0).unwrap();
        assert!((eik.first_order_speed_bound((1.0, 2.0), PI) - PI).abs() < 1e-15);
        assert_eq!(eik.diffusion_bound(2), 0.0);

        let curv = Operator::aniso_flow(0.0, 0.0, 1.0, SurfaceEnergy::Isotropic).unwrap();
        assert_eq!(curv.diffusion_bound(2), 1.0);
        let vh = Operator::viscous_hj(1.0, 0.5).unwrap();
        assert_eq!(vh.diffusion_bound(2), 2.0);
        let ud = Operator::u_dep_flow(ValueProfile::ArctanShifted { shift: 0.0 }).unwrap();
        assert_eq!(ud.diffusion_bound(2), 1.0);
    }

    #[test]
    fn isotropic_energy_hessian() {
        let e = SurfaceEnergy::Isotropic;
        // at p = (2, 0): (I - e_x e_x)/2 = diag(0, 1/2)
        let h = e.hessian(&[2.0, 0.0]);
        assert!(h.xx().abs() < 1e-15);
        assert!((h.yy() - 0.5).abs() < 1e-15);
        e.check_homogeneity(2, 128, 1).unwrap();
    }
}
