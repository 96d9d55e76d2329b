//! Simple convex sets: the feasible regions for which projections and the
//! prox-type minimizers used by the solvers are available explicitly or through
//! one-dimensional searches.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{decreasing_root, Vector};

const MEMBERSHIP_TOL: f64 = 1e-12;
const BISECTION_LIMIT: usize = 200;
const ROOT_TOL: f64 = 1e-13;

/// A closed convex set in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SimpleSet {
    WholeSpace { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Cartesian product; coordinates are stacked in order.
    Product { parts: Vec<SimpleSet> },
}

impl SimpleSet {
    pub fn whole(dim: usize) -> Self {
        SimpleSet::WholeSpace { dim }
    }

    pub fn ball(center: &Vector, radius: f64) -> Result<Self> {
        let s = SimpleSet::Ball {
            center: center.iter().copied().collect(),
            radius,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(&Vector::zeros(dim), radius)
    }

    pub fn boxed(lower: &Vector, upper: &Vector) -> Result<Self> {
        let s = SimpleSet::Box {
            lower: lower.iter().copied().collect(),
            upper: upper.iter().copied().collect(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn product(parts: Vec<SimpleSet>) -> Result<Self> {
        let s = SimpleSet::Product { parts };
        s.validate()?;
        Ok(s)
    }

    fn blocks<'a>(parts: &'a [SimpleSet], x: &'a Vector) -> impl Iterator<Item = (&'a SimpleSet, Vector)> + 'a {
        let mut offset = 0;
        parts.iter().map(move |p| {
            let d = p.dim();
            let block = x.rows(offset, d).into_owned();
            offset += d;
            (p, block)
        })
    }

    fn stacked(blocks: Vec<Vector>) -> Vector {
        let n = blocks.iter().map(|b| b.len()).sum();
        Vector::from_iterator(n, blocks.iter().flat_map(|b| b.iter().copied()))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SimpleSet::Product { parts } => {
                if parts.is_empty() {
                    return Err(Error::contract("product needs at least one factor"));
                }
                for p in parts {
                    p.validate()?;
                }
            }
            SimpleSet::WholeSpace { dim } => {
                if *dim == 0 {
                    return Err(Error::contract("set dimension must be positive"));
                }
            }
            SimpleSet::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::contract("ball needs a non-empty center and a positive radius"));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::contract("ball center must be finite"));
                }
            }
            SimpleSet::Box { lower, upper } => {
                check_dim(lower.len(), upper.len())?;
                if lower.is_empty() {
                    return Err(Error::contract("box dimension must be positive"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::contract("box needs finite bounds with lower <= upper"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            SimpleSet::WholeSpace { dim } => *dim,
            SimpleSet::Ball { center, .. } => center.len(),
            SimpleSet::Box { lower, .. } => lower.len(),
            SimpleSet::Product { parts } => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    pub fn is_compact(&self) -> bool {
        match self {
            SimpleSet::WholeSpace { .. } => false,
            SimpleSet::Product { parts } => parts.iter().all(|p| p.is_compact()),
            _ => true,
        }
    }

    /// Euclidean diameter; infinite for the whole space.
    pub fn diameter(&self) -> f64 {
        match self {
            SimpleSet::WholeSpace { .. } => f64::INFINITY,
            SimpleSet::Ball { radius, .. } => 2.0 * radius,
            SimpleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l).powi(2))
                .sum::<f64>()
                .sqrt(),
            SimpleSet::Product { parts } => parts.iter().map(|p| p.diameter().powi(2)).sum::<f64>().sqrt(),
        }
    }

    /// Upper bound on `||x||` over the set.
    pub fn max_norm(&self) -> f64 {
        match self {
            SimpleSet::WholeSpace { .. } => f64::INFINITY,
            SimpleSet::Ball { center, radius } => Vector::from_column_slice(center).norm() + radius,
            SimpleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            SimpleSet::Product { parts } => parts.iter().map(|p| p.max_norm().powi(2)).sum::<f64>().sqrt(),
        }
    }

    /// A point of the set (the center for balls and boxes, the origin otherwise).
    pub fn center(&self) -> Vector {
        match self {
            SimpleSet::WholeSpace { dim } => Vector::zeros(*dim),
            SimpleSet::Ball { center, .. } => Vector::from_column_slice(center),
            SimpleSet::Box { lower, upper } => {
                Vector::from_iterator(lower.len(), lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)))
            }
            SimpleSet::Product { parts } => Self::stacked(parts.iter().map(|p| p.center()).collect()),
        }
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            SimpleSet::WholeSpace { .. } => true,
            SimpleSet::Ball { center, radius } => {
                let d = x - Vector::from_column_slice(center);
                d.norm() <= radius + MEMBERSHIP_TOL * (1.0 + radius)
            }
            SimpleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - MEMBERSHIP_TOL * (1.0 + l.abs()) && *v <= u + MEMBERSHIP_TOL * (1.0 + u.abs())),
            SimpleSet::Product { parts } => {
                for (p, b) in Self::blocks(parts, x) {
                    if !p.contains(&b)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), x.len());
        match self {
            SimpleSet::WholeSpace { .. } => x.clone(),
            SimpleSet::Ball { center, radius } => {
                let c = Vector::from_column_slice(center);
                let d = x - &c;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    c + d * (*radius / n)
                }
            }
            SimpleSet::Box { lower, upper } => Vector::from_iterator(
                x.len(),
                x.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| v.clamp(*l, *u)),
            ),
            SimpleSet::Product { parts } => Self::stacked(Self::blocks(parts, x).map(|(p, b)| p.project(&b)).collect()),
        }
    }

    /// `argmin_{x in set} <g, x - anchor> + gamma/2 ||x - anchor||^2`,
    /// which is the projection of `anchor - g / gamma`.
    pub fn prox_linear_argmin(&self, g: &Vector, anchor: &Vector, gamma: f64) -> Result<Vector> {
        if !(gamma > 0.0) {
            return Err(Error::contract(format!("gamma must be positive, got {gamma}")));
        }
        check_dim(self.dim(), g.len())?;
        check_dim(self.dim(), anchor.len())?;
        Ok(self.project(&(anchor - g / gamma)))
    }

    /// `min ||g + n||` over normal-cone elements `n` at `x` (a point of the set).
    /// Zero exactly when `x` is stationary for a function with gradient `g`.
    pub fn stationarity_residual(&self, x: &Vector, g: &Vector) -> f64 {
        self.normal_component(x, g).1.norm()
    }

    /// Splits `g` at `x` into `(n, g + n)` where `n` is the normal-cone element
    /// minimizing `||g + n||`.
    pub fn normal_component(&self, x: &Vector, g: &Vector) -> (Vector, Vector) {
        match self {
            SimpleSet::WholeSpace { .. } => (Vector::zeros(g.len()), g.clone()),
            SimpleSet::Ball { center, radius } => {
                let d = x - Vector::from_column_slice(center);
                let r = d.norm();
                if r < radius * (1.0 - 1e-10) || r == 0.0 {
                    return (Vector::zeros(g.len()), g.clone());
                }
                let u = d / r;
                let lam = (-g.dot(&u)).max(0.0);
                let n = &u * lam;
                let res = g + &n;
                (n, res)
            }
            SimpleSet::Box { lower, upper } => {
                let mut n = Vector::zeros(g.len());
                for i in 0..g.len() {
                    let tol = 1e-10 * (1.0 + (upper[i] - lower[i]).abs());
                    let at_lo = x[i] <= lower[i] + tol;
                    let at_hi = x[i] >= upper[i] - tol;
                    // normal cone at a lower bound is -R_+ e_i, at an upper bound R_+ e_i
                    if at_lo && g[i] > 0.0 {
                        n[i] = -g[i];
                    }
                    if at_hi && g[i] < 0.0 {
                        n[i] = -g[i];
                    }
                }
                let res = g + &n;
                (n, res)
            }
            SimpleSet::Product { parts } => {
                let mut offset = 0;
                let mut ns = Vec::with_capacity(parts.len());
                for p in parts {
                    let d = p.dim();
                    let xb = x.rows(offset, d).into_owned();
                    let gb = g.rows(offset, d).into_owned();
                    ns.push(p.normal_component(&xb, &gb).0);
                    offset += d;
                }
                let n = Self::stacked(ns);
                let res = g + &n;
                (n, res)
            }
        }
    }

    /// `argmin_{y in set} <s, y> + d_{p+1}(y - base)` with `d_{q}(w) = ||w||^q / q`.
    pub fn power_prox_argmin(&self, s: &Vector, base: &Vector, p: u32) -> Result<Vector> {
        if p < 2 {
            return Err(Error::contract("power_prox_argmin needs p >= 2"));
        }
        check_dim(self.dim(), s.len())?;
        check_dim(self.dim(), base.len())?;
        let sn = s.norm();
        if !sn.is_finite() {
            return Err(Error::Numerical("non-finite linear coefficient".into()));
        }
        if sn == 0.0 {
            return Ok(self.project(base));
        }
        let pf = p as f64;
        // unconstrained minimizer: ||w||^{p-1} w = -s
        let free = base - s * sn.powf((1.0 - pf) / pf);
        match self {
            SimpleSet::WholeSpace { .. } => Ok(free),
            SimpleSet::Ball { center, radius } => {
                let c = Vector::from_column_slice(center);
                if (&free - &c).norm() <= *radius {
                    return Ok(free);
                }
                let offset = base - &c;
                // for multiplier lam the stationary point is base + w with
                // (||w||^{p-1} + lam) w = -(s + lam (base - c))
                let point = |lam: f64| -> Result<Vector> {
                    let u = s + &offset * lam;
                    let un = u.norm();
                    if un == 0.0 {
                        return Ok(base.clone());
                    }
                    let t = decreasing_root(
                        |t| (un - t.powf(pf) - lam * t, -pf * t.powf(pf - 1.0) - lam),
                        0.0,
                        if lam > 0.0 { un.powf(1.0 / pf).min(un / lam) } else { un.powf(1.0 / pf) },
                        ROOT_TOL,
                        BISECTION_LIMIT,
                    )?;
                    Ok(base - u * (t / un))
                };
                let excess = |lam: f64| -> Result<f64> { Ok((point(lam)? - &c).norm() - radius) };
                let mut hi = 1.0;
                let mut grown = 0;
                while excess(hi)? > 0.0 {
                    hi *= 4.0;
                    grown += 1;
                    if grown > BISECTION_LIMIT {
                        return Err(Error::Numerical("ball power-prox multiplier not bracketed".into()));
                    }
                }
                let mut lo = 0.0;
                let mut iters = 0;
                while hi - lo > ROOT_TOL * (1.0 + hi) {
                    iters += 1;
                    if iters > BISECTION_LIMIT {
                        return Err(Error::Numerical(format!(
                            "ball power-prox bisection did not converge in {BISECTION_LIMIT} steps"
                        )));
                    }
                    let mid = 0.5 * (lo + hi);
                    if excess(mid)? > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(self.project(&point(hi)?))
            }
            SimpleSet::Box { .. } | SimpleSet::Product { .. } => {
                let obj = |y: &Vector| {
                    let w = y - base;
                    let r = w.norm();
                    let val = s.dot(y) + r.powf(pf + 1.0) / (pf + 1.0);
                    (val, s + w * r.powf(pf - 1.0))
                };
                projected_minimize(self, obj, &self.project(&free), 1e-13, 20_000)
            }
        }
    }
}

/// Minimizes a smooth convex function over `set` by accelerated projected
/// gradient with backtracking and adaptive restart. Stops when the
/// gradient-mapping norm drops below `tol * (1 + |grad|)`.
pub fn projected_minimize<F>(set: &SimpleSet, f: F, x0: &Vector, tol: f64, max_iter: usize) -> Result<Vector>
where
    F: Fn(&Vector) -> (f64, Vector),
{
    projected_minimize_with(|x| set.project(x), f, x0, tol, max_iter)
}

/// [`projected_minimize`] with an arbitrary Euclidean projection, e.g. onto a
/// product of simple sets.
pub fn projected_minimize_with<P, F>(project: P, f: F, x0: &Vector, tol: f64, max_iter: usize) -> Result<Vector>
where
    P: Fn(&Vector) -> Vector,
    F: Fn(&Vector) -> (f64, Vector),
{
    let mut x = project(x0);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut lip = 1.0_f64;
    let (mut fx, _) = f(&x);
    let mut last_res = f64::INFINITY;
    for _ in 0..max_iter {
        let (fy, gy) = f(&y);
        let (x_new, f_new, g_new) = loop {
            let cand = project(&(&y - &gy / lip));
            let d = &cand - &y;
            let (fc, gc) = f(&cand);
            // the curvature test stays reliable once value differences drop below rounding
            let dd = d.norm_squared();
            if fc <= fy + gy.dot(&d) + 0.5 * lip * dd || (&gc - &gy).dot(&d) <= lip * dd {
                break (cand, fc, gc);
            }
            lip *= 2.0;
            if !lip.is_finite() {
                return Err(Error::Numerical("projected minimization: step size underflow".into()));
            }
        };
        let res = (&x_new - project(&(&x_new - &g_new / lip))).norm() * lip;
        last_res = res;
        if res <= tol * (1.0 + g_new.norm()) {
            return Ok(x_new);
        }
        // restart momentum when the step opposes the previous direction; the
        // gradient form stays reliable where value differences are rounding noise
        if t > 1.0 && (f_new > fx || (&y - &x_new).dot(&(&x_new - &x)) > 0.0) {
            t = 1.0;
            y = x_new.clone();
            x = x_new;
            fx = f_new;
            continue;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
        t = t_new;
        x = x_new;
        fx = f_new;
        lip *= 0.9;
    }
    Err(Error::NoConvergence {
        method: "projected_minimize",
        iterations: max_iter,
        residual: last_res,
        target: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn membership() {
        assert!(SimpleSet::whole(2).contains(&v(&[1e9, -3.0])).unwrap());
        let ball = SimpleSet::centered_ball(2, 1.0).unwrap();
        assert!(!ball.contains(&v(&[2.0, 0.0])).unwrap());
        let bx = SimpleSet::boxed(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!(bx.contains(&v(&[0.5, 1.0])).unwrap());
        assert!(matches!(ball.contains(&v(&[1.0])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn invalid_sets() {
        assert!(SimpleSet::centered_ball(2, 0.0).is_err());
        assert!(SimpleSet::boxed(&v(&[1.0]), &v(&[0.0])).is_err());
    }

    #[test]
    fn projection_examples() {
        let ball = SimpleSet::centered_ball(2, 1.0).unwrap();
        assert!((ball.project(&v(&[2.0, 0.0])) - v(&[1.0, 0.0])).norm() < 1e-15);
        let bx = SimpleSet::boxed(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert_eq!(bx.project(&v(&[0.3, 0.7])), v(&[0.3, 0.7]));
        let shifted = SimpleSet::ball(&v(&[1.0, 1.0]), 2.0).unwrap();
        assert!((shifted.project(&v(&[4.0, 1.0])) - v(&[3.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn prox_linear_examples() {
        let g = v(&[1.0, -2.0]);
        let a = v(&[0.5, 0.5]);
        let w = SimpleSet::whole(2).prox_linear_argmin(&g, &a, 4.0).unwrap();
        assert!((w - (&a - &g / 4.0)).norm() < 1e-15);
        let ball = SimpleSet::centered_ball(2, 1.0).unwrap();
        let z = ball.prox_linear_argmin(&Vector::zeros(2), &v(&[3.0, 4.0]), 1.0).unwrap();
        assert!((z - ball.project(&v(&[3.0, 4.0]))).norm() < 1e-15);
        let z = ball.prox_linear_argmin(&v(&[-3.0, 0.0]), &v(&[0.0, 0.0]), 1.0).unwrap();
        assert!((z - v(&[1.0, 0.0])).norm() < 1e-15);
        assert!(ball.prox_linear_argmin(&g, &a, 0.0).is_err());
    }

    #[test]
    fn power_prox_examples() {
        let s = v(&[8.0, 0.0]);
        let zero = Vector::zeros(2);
        let y = SimpleSet::whole(2).power_prox_argmin(&s, &zero, 3).unwrap();
        assert!((&y - v(&[-2.0, 0.0])).norm() < 1e-12);
        // stationarity ||y||^2 y + s = 0
        assert!((&y * y.norm_squared() + &s).norm() < 1e-10);
        let ball = SimpleSet::centered_ball(2, 1.0).unwrap();
        let y = ball.power_prox_argmin(&s, &zero, 3).unwrap();
        assert!((&y - v(&[-1.0, 0.0])).norm() < 1e-10);
        let base = v(&[3.0, 0.0]);
        let y = ball.power_prox_argmin(&zero, &base, 3).unwrap();
        assert_eq!(y, ball.project(&base));
    }

    fn check_first_order(set: &SimpleSet, s: &Vector, base: &Vector, p: u32, y: &Vector) {
        let w = y - base;
        let grad = s + &w * w.norm().powi(p as i32 - 1);
        for k in 0..100 {
            let probe = set.project(&(set.center() + v(&[(k as f64 * 0.91).sin() * 3.0, (k as f64 * 1.7).cos() * 3.0])));
            assert!(grad.dot(&(probe - y)) >= -1e-8, "first-order optimality violated");
        }
    }

    #[test]
    fn power_prox_first_order_optimality() {
        let sets = [
            SimpleSet::ball(&v(&[0.5, -0.2]), 0.7).unwrap(),
            SimpleSet::boxed(&v(&[-0.3, -1.0]), &v(&[0.4, 0.2])).unwrap(),
            SimpleSet::whole(2),
        ];
        let s = v(&[2.5, -1.0]);
        let base = v(&[0.6, 0.1]);
        for set in &sets {
            for p in [2, 3] {
                let y = set.power_prox_argmin(&s, &base, p).unwrap();
                assert!(set.contains(&y).unwrap());
                check_first_order(set, &s, &base, p, &y);
            }
        }
    }

    #[test]
    fn stationarity_residual_on_ball_boundary() {
        let ball = SimpleSet::centered_ball(2, 1.0).unwrap();
        let x = v(&[1.0, 0.0]);
        // gradient pointing inward-negative: -g is outward normal, so stationary
        assert!(ball.stationarity_residual(&x, &v(&[-2.0, 0.0])) < 1e-15);
        assert!((ball.stationarity_residual(&x, &v(&[-2.0, 1.0])) - 1.0).abs() < 1e-15);
        assert!((ball.stationarity_residual(&x, &v(&[2.0, 0.0])) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn product_of_ball_and_whole_space() {
        let p = SimpleSet::product(vec![SimpleSet::centered_ball(2, 1.0).unwrap(), SimpleSet::whole(1)]).unwrap();
        assert_eq!(p.dim(), 3);
        assert!(!p.is_compact());
        let x = v(&[3.0, 4.0, -7.0]);
        assert!((p.project(&x) - v(&[0.6, 0.8, -7.0])).norm() < 1e-15);
        assert!(p.contains(&v(&[0.6, 0.8, 100.0])).unwrap());
        let res = p.stationarity_residual(&v(&[1.0, 0.0, 0.0]), &v(&[-2.0, 0.0, 0.5]));
        assert!((res - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projected_minimize_box_quadratic() {
        let bx = SimpleSet::boxed(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        let target = v(&[2.0, 0.5]);
        let x = projected_minimize(&bx, |x| ((x - &target).norm_squared() * 0.5, x - &target), &Vector::zeros(2), 1e-12, 1000).unwrap();
        assert!((x - v(&[1.0, 0.5])).norm() < 1e-10);
    }
}
