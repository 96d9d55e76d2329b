//! Oracles, smoothness metadata, Bregman machinery and the regularized
//! third-order Taylor model used by the tensor methods.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, Vector};

/// Smoothness and strong-convexity constants of a joint objective `F(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSpec {
    pub mu_x: f64,
    pub mu_y: f64,
    pub l_y: f64,
    /// Lipschitz constant of the `order`-th derivative in `y`.
    pub l_p_y: f64,
    pub order: u32,
    pub l_xy: f64,
}

impl SmoothnessSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_x, self.mu_y, self.l_y, self.l_p_y, self.l_xy];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::contract("smoothness constants must be finite and nonnegative"));
        }
        if self.mu_y <= 0.0 {
            return Err(Error::contract("mu_y must be positive"));
        }
        if self.mu_y > self.l_y {
            return Err(Error::contract(format!(
                "mu_y = {} exceeds L_y = {}",
                self.mu_y, self.l_y
            )));
        }
        if !(2..=3).contains(&self.order) {
            return Err(Error::contract("smoothness order must be 2 or 3"));
        }
        Ok(())
    }
}

/// A differentiable function on `R^dim`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;

    fn value_gradient(&self, x: &Vector) -> (f64, Vector) {
        (self.value(x), self.gradient(x))
    }
}

/// An [`Objective`] with a Hessian and, optionally, analytic third-order directional forms.
pub trait SecondOrderObjective: Objective {
    fn hessian(&self, x: &Vector) -> Matrix;

    /// `D^3 f(x)[h, h]` when available in closed form.
    fn third_directional(&self, _x: &Vector, _h: &Vector) -> Option<Vector> {
        None
    }
}

/// Snapshot of oracle call tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub values: u64,
    pub gradients: u64,
    pub hessians: u64,
}

impl std::ops::Add for CallCounts {
    type Output = CallCounts;
    fn add(self, o: CallCounts) -> CallCounts {
        CallCounts {
            values: self.values + o.values,
            gradients: self.gradients + o.gradients,
            hessians: self.hessians + o.hessians,
        }
    }
}

impl std::ops::AddAssign for CallCounts {
    fn add_assign(&mut self, o: CallCounts) {
        *self = *self + o;
    }
}

/// Counting wrapper around an objective. Each gradient (or value+gradient)
/// evaluation increments the gradient counter by one; value-only and Hessian
/// evaluations have their own counters.
pub struct Oracle<'a, F: ?Sized> {
    f: &'a F,
    values: AtomicU64,
    gradients: AtomicU64,
    hessians: AtomicU64,
}

impl<'a, F: Objective + ?Sized> Oracle<'a, F> {
    pub fn new(f: &'a F) -> Self {
        Oracle {
            f,
            values: AtomicU64::new(0),
            gradients: AtomicU64::new(0),
            hessians: AtomicU64::new(0),
        }
    }

    pub fn function(&self) -> &'a F {
        self.f
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.f.value(x)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.f.gradient(x)
    }

    pub fn eval(&self, x: &Vector) -> (f64, Vector) {
        self.gradients.fetch_add(1, Ordering::Relaxed);
        self.f.value_gradient(x)
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            values: self.values.load(Ordering::Relaxed),
            gradients: self.gradients.load(Ordering::Relaxed),
            hessians: self.hessians.load(Ordering::Relaxed),
        }
    }
}

impl<'a, F: SecondOrderObjective + ?Sized> Oracle<'a, F> {
    pub fn hessian(&self, x: &Vector) -> Matrix {
        self.hessians.fetch_add(1, Ordering::Relaxed);
        self.f.hessian(x)
    }
}

/// Output of a `(delta, L)`-oracle queried at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct InexactOracleOutput {
    pub f_delta: f64,
    pub g_delta: Vector,
    pub delta: f64,
    pub lipschitz: f64,
}

impl InexactOracleOutput {
    pub fn new(f_delta: f64, g_delta: Vector, delta: f64, lipschitz: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::contract(format!("oracle delta must be >= 0, got {delta}")));
        }
        if !(lipschitz > 0.0) {
            return Err(Error::contract(format!("oracle L must be > 0, got {lipschitz}")));
        }
        Ok(InexactOracleOutput {
            f_delta,
            g_delta,
            delta,
            lipschitz,
        })
    }

    /// Wraps exact first-order information as a `(0, L)`-oracle.
    pub fn exact(f: f64, g: Vector, lipschitz: f64) -> Self {
        InexactOracleOutput {
            f_delta: f,
            g_delta: g,
            delta: 0.0,
            lipschitz,
        }
    }
}

/// `rho(y) - rho(x) - <grad rho(x), y - x>`.
pub fn bregman_divergence<R>(rho: R, x: &Vector, y: &Vector) -> Result<f64>
where
    R: Fn(&Vector) -> (f64, Vector),
{
    check_dim(x.len(), y.len())?;
    let (rx, gx) = rho(x);
    check_dim(x.len(), gx.len())?;
    let (ry, _) = rho(y);
    Ok(ry - rx - gx.dot(&(y - x)))
}

/// The power prox-function `d_p(x) = ||x||^p / p` and its gradient `||x||^{p-2} x`.
pub fn prox_power(p: u32, x: &Vector) -> (f64, Vector) {
    debug_assert!(p >= 2);
    let r = x.norm();
    let value = r.powi(p as i32) / p as f64;
    let grad = if p == 2 { x.clone() } else { x * r.powi(p as i32 - 2) };
    (value, grad)
}

/// Central second difference of gradients approximating `D^3 f(anchor)[y - anchor]^2`:
/// `(grad f(a + t h) + grad f(a - t h) - 2 grad f(a)) / t^2`, `h = y - a`.
///
/// When `anchor_grad` is supplied it replaces the gradient call at the anchor.
pub fn third_directional_fd<F: Objective + ?Sized>(
    oracle: &Oracle<'_, F>,
    anchor: &Vector,
    anchor_grad: Option<&Vector>,
    y: &Vector,
    tau: f64,
) -> Result<Vector> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::contract(format!("tau must be positive, got {tau}")));
    }
    check_dim(anchor.len(), y.len())?;
    let h = y - anchor;
    let g0 = match anchor_grad {
        Some(g) => g.clone(),
        None => oracle.gradient(anchor),
    };
    let gp = oracle.gradient(&(anchor + &h * tau));
    let gm = oracle.gradient(&(anchor - &h * tau));
    Ok((gp + gm - g0 * 2.0) / (tau * tau))
}

/// Regularized third-order Taylor model anchored at `anchor` with regularization
/// `H = 6 L3`:
///
/// `f(a) + <g, h> + 1/2 <A h, h> + 1/6 D^3 f(a)[h]^3 + L3 ||h||^4 / 4`.
///
/// Gradient and Hessian at the anchor are evaluated once, on construction.
#[derive(Debug, Clone)]
pub struct TensorStepModel {
    pub anchor: Vector,
    pub order: u32,
    pub l3: f64,
    /// Regularization coefficient `H` (the model uses `H / (p+1)! ||h||^{p+1}`).
    pub reg: f64,
    pub anchor_value: f64,
    pub anchor_grad: Vector,
    pub anchor_hessian: Matrix,
}

impl TensorStepModel {
    pub fn new<F: SecondOrderObjective + ?Sized>(oracle: &Oracle<'_, F>, anchor: &Vector, l3: f64) -> Result<Self> {
        if !(l3 > 0.0) {
            return Err(Error::contract("L3 must be positive"));
        }
        check_dim(oracle.dim(), anchor.len())?;
        let (fv, g) = oracle.eval(anchor);
        let hess = oracle.hessian(anchor);
        Ok(Self::from_parts(anchor.clone(), l3, fv, g, hess))
    }

    pub fn from_parts(anchor: Vector, l3: f64, value: f64, grad: Vector, hessian: Matrix) -> Self {
        TensorStepModel {
            anchor,
            order: 3,
            l3,
            reg: 6.0 * l3,
            anchor_value: value,
            anchor_grad: grad,
            anchor_hessian: hessian,
        }
    }

    /// Model gradient given the third-order term `D^3 f(a)[h]^2` (exact or surrogate).
    pub fn gradient_with_third(&self, y: &Vector, third: &Vector) -> Vector {
        let h = y - &self.anchor;
        let r2 = h.norm_squared();
        &self.anchor_grad + &self.anchor_hessian * &h + third * 0.5 + &h * (self.l3 * r2)
    }

    /// Inexact model gradient using the finite-difference surrogate. Costs two
    /// gradient calls (none at `y == anchor`).
    pub fn gradient<F: Objective + ?Sized>(&self, oracle: &Oracle<'_, F>, y: &Vector, tau: f64) -> Result<Vector> {
        check_dim(self.anchor.len(), y.len())?;
        if y == &self.anchor {
            return Ok(self.anchor_grad.clone());
        }
        let third = third_directional_fd(oracle, &self.anchor, Some(&self.anchor_grad), y, tau)?;
        Ok(self.gradient_with_third(y, &third))
    }
}

/// Outcome of testing the `(delta, L)` sandwich at a set of probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    pub probes: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Smallest observed `f(x') - f_delta - <g_delta, x' - x>`.
    pub min_lower_margin: f64,
    /// Largest observed gap value relative to its bound, `gap / (L/2 ||x'-x||^2 + delta)`.
    pub max_upper_ratio: f64,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0
    }
}

/// Evaluates `0 <= f(x') - f_delta - <g_delta, x' - x> <= L/2 ||x' - x||^2 + delta`
/// for every probe, with an absolute rounding allowance `tol`.
pub fn delta_l_sandwich<F>(f_exact: F, candidate: &InexactOracleOutput, x: &Vector, probes: &[Vector], tol: f64) -> SandwichReport
where
    F: Fn(&Vector) -> f64,
{
    let mut rep = SandwichReport {
        probes: probes.len(),
        lower_violations: 0,
        upper_violations: 0,
        min_lower_margin: f64::INFINITY,
        max_upper_ratio: 0.0,
    };
    for p in probes {
        let d = p - x;
        let gap = f_exact(p) - candidate.f_delta - candidate.g_delta.dot(&d);
        let upper = 0.5 * candidate.lipschitz * d.norm_squared() + candidate.delta;
        rep.min_lower_margin = rep.min_lower_margin.min(gap);
        if upper > 0.0 {
            rep.max_upper_ratio = rep.max_upper_ratio.max(gap / upper);
        }
        if gap < -tol {
            rep.lower_violations += 1;
        }
        if gap > upper + tol {
            rep.upper_violations += 1;
        }
    }
    rep
}

/// True iff `candidate` satisfies the `(delta, L)`-oracle inequalities at every probe.
pub fn check_delta_l_oracle<F>(f_exact: F, candidate: &InexactOracleOutput, x: &Vector, probes: &[Vector]) -> bool
where
    F: Fn(&Vector) -> f64,
{
    let scale = 1.0 + candidate.f_delta.abs();
    delta_l_sandwich(f_exact, candidate, x, probes, 1e-12 * scale).passed()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    struct Quad {
        a: Matrix,
        b: Vector,
    }

    impl Objective for Quad {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn value(&self, x: &Vector) -> f64 {
            0.5 * x.dot(&(&self.a * x)) + self.b.dot(x)
        }
        fn gradient(&self, x: &Vector) -> Vector {
            &self.a * x + &self.b
        }
    }

    impl SecondOrderObjective for Quad {
        fn hessian(&self, _x: &Vector) -> Matrix {
            self.a.clone()
        }
    }

    /// f(y) = y^4 / 12 in one dimension.
    struct Quartic1;
    impl Objective for Quartic1 {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector) -> f64 {
            x[0].powi(4) / 12.0
        }
        fn gradient(&self, x: &Vector) -> Vector {
            v(&[x[0].powi(3) / 3.0])
        }
    }

    /// d_4 as an objective.
    struct D4(usize);
    impl Objective for D4 {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, x: &Vector) -> f64 {
            prox_power(4, x).0
        }
        fn gradient(&self, x: &Vector) -> Vector {
            prox_power(4, x).1
        }
    }

    fn quad() -> Quad {
        Quad {
            a: Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
            b: v(&[1.0, -1.0]),
        }
    }

    #[test]
    fn bregman_examples() {
        let half_sq = |x: &Vector| prox_power(2, x);
        let b = bregman_divergence(half_sq, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap();
        assert!((b - 1.0).abs() < 1e-15);
        let x = v(&[0.3, -2.0]);
        assert_eq!(bregman_divergence(|z: &Vector| prox_power(4, z), &x, &x).unwrap(), 0.0);
        let b4 = bregman_divergence(|z: &Vector| prox_power(4, z), &v(&[1.0, 0.0]), &v(&[2.0, 0.0])).unwrap();
        assert!((b4 - 2.75).abs() < 1e-14);
    }

    #[test]
    fn bregman_dimension_mismatch() {
        let r = bregman_divergence(|z: &Vector| prox_power(2, z), &v(&[1.0]), &v(&[1.0, 2.0]));
        assert!(matches!(r, Err(Error::Dimension { .. })));
    }

    #[test]
    fn prox_power_examples() {
        let (val, g) = prox_power(4, &v(&[0.0, 0.0]));
        assert_eq!(val, 0.0);
        assert_eq!(g, v(&[0.0, 0.0]));
        let (val, g) = prox_power(4, &v(&[1.0, 1.0]));
        assert!((val - 1.0).abs() < 1e-15);
        assert!((g - v(&[2.0, 2.0])).norm() < 1e-15);
        let (val, g) = prox_power(2, &v(&[3.0, 4.0]));
        assert!((val - 12.5).abs() < 1e-15);
        assert_eq!(g, v(&[3.0, 4.0]));
    }

    #[test]
    fn third_fd_vanishes_on_quadratics() {
        let q = quad();
        let o = Oracle::new(&q);
        let g = third_directional_fd(&o, &v(&[0.5, 1.0]), None, &v(&[-2.0, 3.0]), 0.37).unwrap();
        assert!(g.norm() < 1e-12);
        assert_eq!(o.counts().gradients, 3);
    }

    #[test]
    fn third_fd_quartic_1d() {
        let f = Quartic1;
        let o = Oracle::new(&f);
        let g = third_directional_fd(&o, &v(&[1.0]), None, &v(&[2.0]), 0.1).unwrap();
        assert!((g[0] - 2.0).abs() < 0.02);
    }

    #[test]
    fn third_fd_d4_matches_symbolic() {
        // d4 gradient ||x||^2 x is cubic and odd, so at anchor 0 the central
        // difference cancels exactly; the analytic D^3 d4(0) is also zero.
        let f = D4(3);
        let o = Oracle::new(&f);
        let g = third_directional_fd(&o, &Vector::zeros(3), None, &v(&[1.0, 0.0, 0.0]), 0.5).unwrap();
        assert!(g.norm() < 1e-15);
        // away from 0 the difference is still exact: D^3 d4(a)[h,h] = 4<a,h>h + 2||h||^2 a
        let a = v(&[1.0, 2.0, -1.0]);
        let y = v(&[0.5, 2.5, 0.0]);
        let h = &y - &a;
        let expect = &h * (4.0 * a.dot(&h)) + &a * (2.0 * h.norm_squared());
        let g = third_directional_fd(&o, &a, None, &y, 0.25).unwrap();
        assert!((g - expect).norm() < 1e-12);
    }

    #[test]
    fn third_fd_rejects_zero_tau() {
        let q = quad();
        let o = Oracle::new(&q);
        assert!(matches!(
            third_directional_fd(&o, &v(&[0.0, 0.0]), None, &v(&[1.0, 0.0]), 0.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn model_gradient_at_anchor_and_on_quadratics() {
        let q = quad();
        let o = Oracle::new(&q);
        let a = v(&[0.2, -0.4]);
        let m = TensorStepModel::new(&o, &a, 1.0).unwrap();
        assert_eq!(o.counts().hessians, 1);
        assert_eq!(m.gradient(&o, &a, 1e-3).unwrap(), q.gradient(&a));
        // exact model gradient for a quadratic: grad f(y) + L3 ||h||^2 h
        let y = v(&[1.0, 1.5]);
        let h = &y - &a;
        let expect = q.gradient(&y) + &h * h.norm_squared();
        assert!((m.gradient(&o, &y, 1e-2).unwrap() - expect).norm() < 1e-10);
    }

    #[test]
    fn sandwich_exact_and_inflated() {
        let q = quad();
        let x = v(&[0.3, 0.1]);
        let mut probes: Vec<Vector> = (0..20)
            .map(|i| v(&[(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]))
            .collect();
        probes.push(x.clone());
        let lmax = 3.618034;
        let exact = InexactOracleOutput::exact(q.value(&x), q.gradient(&x), lmax);
        assert!(check_delta_l_oracle(|p| q.value(p), &exact, &x, &probes));
        let delta = 1e-3;
        let bad = InexactOracleOutput::new(q.value(&x) + 10.0 * delta, q.gradient(&x), delta, lmax).unwrap();
        assert!(!check_delta_l_oracle(|p| q.value(p), &bad, &x, &probes));
    }

    #[test]
    fn counters_count_each_call_once() {
        let q = quad();
        let o = Oracle::new(&q);
        let x = v(&[1.0, 1.0]);
        o.eval(&x);
        o.gradient(&x);
        o.value(&x);
        o.hessian(&x);
        assert_eq!(
            o.counts(),
            CallCounts {
                values: 1,
                gradients: 2,
                hessians: 1
            }
        );
    }

    #[test]
    fn smoothness_spec_validation() {
        let ok = SmoothnessSpec {
            mu_x: 0.1,
            mu_y: 0.5,
            l_y: 2.0,
            l_p_y: 1.0,
            order: 3,
            l_xy: 3.0,
        };
        assert!(ok.validate().is_ok());
        assert!(SmoothnessSpec { mu_y: 3.0, ..ok }.validate().is_err());
        assert!(SmoothnessSpec { order: 4, ..ok }.validate().is_err());
    }
}
