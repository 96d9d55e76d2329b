//! Synthetic min-min instances with certified constants and a dense Newton
//! reference solver.
//!
//! `F(x, y) = 1/2 x'Ax + x'Cy + 1/2 y'By + b'x + c'y
//!           + sigma/12 sum_j (d_j'y)^4 + kappa sum_j log cosh(d_j'y)`
//!
//! with `A = A0 + C B^{-1} C'`, so the Schur complement of the quadratic part
//! is `A0` and `f(x) = min_y F(x, y)` is `lambda_min(A0)`-strongly convex.

use nalgebra::linalg::QR;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymEigen, Vector};
use crate::minmin::{stack, MinMinObjective};
use crate::sets::{projected_minimize_with, SimpleSet};

/// Largest value of `|d^3/dt^3 log cosh t| = 2 sech^2 t |tanh t|`, i.e. `4 / (3 sqrt 3)`.
const LOGCOSH_THIRD_MAX: f64 = 0.769_800_358_919_501;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerDomain {
    Unconstrained,
    /// Ball of the given radius centered at the origin.
    Ball { radius: f64 },
}

/// Everything needed to rebuild an instance bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub mu_x: f64,
    pub mu_y: f64,
    /// Scale of the coupling block `C`.
    pub coupling: f64,
    /// Weight of the quartic term.
    pub sigma: f64,
    /// Weight of the log-cosh term.
    pub soft_weight: f64,
    /// Scale of the linear terms.
    pub linear_scale: f64,
    /// Radius of the outer ball `Q_x` (centered at the origin).
    pub outer_radius: f64,
    pub inner: InnerDomain,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            seed: 1,
            m: 64,
            n: 16,
            mu_x: 0.1,
            mu_y: 0.1,
            coupling: 0.5,
            sigma: 0.1,
            soft_weight: 0.0,
            linear_scale: 1.0,
            outer_radius: 1.0,
            inner: InnerDomain::Unconstrained,
        }
    }
}

impl InstanceSpec {
    pub fn new(seed: u64, m: usize, n: usize, mu_x: f64, mu_y: f64, coupling: f64, sigma: f64) -> Self {
        InstanceSpec {
            seed,
            m,
            n,
            mu_x,
            mu_y,
            coupling,
            sigma,
            ..InstanceSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m < self.n {
            return Err(Error::contract(format!("need m >= n >= 1, got m = {}, n = {}", self.m, self.n)));
        }
        let pos = [self.mu_x, self.mu_y, self.outer_radius];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::contract("mu_x, mu_y and outer_radius must be positive"));
        }
        let nonneg = [self.coupling, self.sigma, self.soft_weight, self.linear_scale];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::contract("coupling, sigma, soft_weight and linear_scale must be nonnegative"));
        }
        if let InnerDomain::Ball { radius } = self.inner {
            if !(radius > 0.0) {
                return Err(Error::contract("inner ball radius must be positive"));
            }
        }
        Ok(())
    }

    /// Deterministic single-line text form.
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("instance spec serializes")
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let spec: InstanceSpec = serde_json::from_str(s).map_err(|e| Error::Config(format!("instance spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Constants certified from spectra and the closed-form derivative bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub mu_x: f64,
    pub mu_y: f64,
    pub l_y: f64,
    /// Lipschitz constant of the Hessian in `y` on the trust region.
    pub l2_y: f64,
    /// Lipschitz constant of the third derivative in `y` (global).
    pub l3_y: f64,
    pub l_xy: f64,
    /// Radius of the region `||y|| <= trust_radius` where `l_y`, `l2_y`, `l_xy` hold.
    pub trust_radius: f64,
    /// Upper bound on `max_x F(x, 0) - F(x, y(x))` over `Q_x`.
    pub d_unconstrained: f64,
    /// Upper bound on `max_x max_{y in Q_y} F(x, y) - F(x, y(x))` (compact inner domain).
    pub d_compact: f64,
    /// Smallest eigenvalue of the quadratic part of the joint Hessian.
    pub joint_lambda_min: f64,
    pub joint_lambda_max: f64,
    pub coupling_norm: f64,
}

/// Joint minimizer found by the reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vector,
    pub y: Vector,
    pub value: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct QuadQuarticMinMin {
    pub spec: InstanceSpec,
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub lin_x: Vector,
    pub lin_y: Vector,
    /// Columns are the directions `d_j`.
    pub dirs: Matrix,
    pub outer_set: SimpleSet,
    pub inner_set: SimpleSet,
    pub constants: Certified,
    pub reference: ReferenceSolution,
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    let qr = QR::new(g);
    let (q, r) = qr.unpack();
    // fix column signs so the factor is unique
    let mut q = q;
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 || hi <= lo {
        return vec![lo; k];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..k).map(|i| (l + (h - l) * i as f64 / (k - 1) as f64).exp()).collect()
}

fn with_spectrum(q: &Matrix, eigs: &[f64]) -> Matrix {
    let d = Matrix::from_diagonal(&Vector::from_row_slice(eigs));
    let a = q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Builds the instance described by `spec`, certifies its constants and
/// solves it to KKT residual `1e-12`.
pub fn make_instance(spec: &InstanceSpec) -> Result<QuadQuarticMinMin> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let qx = random_orthogonal(&mut rng, m);
    let qy = random_orthogonal(&mut rng, n);
    let a0 = with_spectrum(&qx, &log_spaced(spec.mu_x, spec.mu_x.max(1.0), m));
    let b = with_spectrum(&qy, &log_spaced(spec.mu_y, spec.mu_y.max(1.0), n));
    let c = gaussian(&mut rng, m, n) * (spec.coupling / (m as f64).sqrt());
    let dirs = gaussian(&mut rng, n, n) * (1.0 / (n as f64).sqrt());
    let lin_x = Vector::from_iterator(m, (0..m).map(|_| StandardNormal.sample(&mut rng)))
        * (spec.linear_scale / (m as f64).sqrt());
    let lin_y = Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)))
        * (spec.linear_scale / (n as f64).sqrt());

    let b_inv = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("inner block is not positive definite".into()))?
        .inverse();
    let schur = &c * &b_inv * c.transpose();
    let a = &a0 + (&schur + schur.transpose()) * 0.5;

    let outer_set = SimpleSet::centered_ball(m, spec.outer_radius)?;
    let inner_set = match spec.inner {
        InnerDomain::Unconstrained => SimpleSet::whole(n),
        InnerDomain::Ball { radius } => SimpleSet::centered_ball(n, radius)?,
    };

    let mut prob = QuadQuarticMinMin {
        spec: *spec,
        a,
        b,
        c,
        lin_x,
        lin_y,
        dirs,
        outer_set,
        inner_set,
        constants: Certified {
            mu_x: 0.0,
            mu_y: 0.0,
            l_y: 0.0,
            l2_y: 0.0,
            l3_y: 0.0,
            l_xy: 0.0,
            trust_radius: 0.0,
            d_unconstrained: 0.0,
            d_compact: 0.0,
            joint_lambda_min: 0.0,
            joint_lambda_max: 0.0,
            coupling_norm: 0.0,
        },
        reference: ReferenceSolution {
            x: Vector::zeros(m),
            y: Vector::zeros(n),
            value: 0.0,
            kkt_residual: f64::INFINITY,
            iterations: 0,
        },
    };

    let joint = prob.quadratic_joint_hessian();
    let joint_eig = SymEigen::new(&joint);
    let scale = joint_eig.spectral_norm().max(1.0);
    if joint_eig.min() < -1e-10 * scale {
        return Err(Error::Numerical(format!(
            "joint Hessian has eigenvalue {:.3e}; instance is not jointly convex",
            joint_eig.min()
        )));
    }
    prob.reference = prob.reference_solve(1e-12)?;

    let col_norms: Vec<f64> = (0..prob.dirs.ncols()).map(|j| prob.dirs.column(j).norm()).collect();
    let sum2: f64 = col_norms.iter().map(|d| d * d).sum();
    let sum3: f64 = col_norms.iter().map(|d| d.powi(3)).sum();
    let sum4: f64 = col_norms.iter().map(|d| d.powi(4)).sum();
    let trust = match spec.inner {
        InnerDomain::Ball { radius } => radius,
        InnerDomain::Unconstrained => (10.0 * (prob.reference.x.norm() + prob.reference.y.norm())).max(1.0),
    };
    let (sigma, kappa) = (spec.sigma, spec.soft_weight);
    let b_eig = SymEigen::new(&prob.b);
    let quartic_curv = sigma * trust * trust * sum4;
    let soft_curv = kappa * sum2;
    let c_norm = SymEigen::new(&(prob.c.transpose() * &prob.c)).max().max(0.0).sqrt();
    let grad_y0_max = prob.lin_y.norm() + c_norm * spec.outer_radius;
    let d_unconstrained = grad_y0_max * grad_y0_max / (2.0 * b_eig.min());
    let d_compact = match spec.inner {
        InnerDomain::Unconstrained => f64::INFINITY,
        InnerDomain::Ball { radius } => {
            // gap of any feasible y is at most max ||grad_y F|| * diam
            let g_max = grad_y0_max + b_eig.max() * radius + sigma / 3.0 * sum4 * radius.powi(3) + kappa * col_norms.iter().sum::<f64>();
            g_max * 2.0 * radius
        }
    };
    prob.constants = Certified {
        mu_x: SymEigen::new(&a0).min(),
        mu_y: b_eig.min(),
        l_y: b_eig.max() + quartic_curv + soft_curv,
        l2_y: 2.0 * sigma * trust * sum4 + kappa * LOGCOSH_THIRD_MAX * sum3,
        l3_y: 2.0 * sigma * sum4 + 2.0 * kappa * sum4,
        l_xy: joint_eig.max() + quartic_curv + soft_curv,
        trust_radius: trust,
        d_unconstrained,
        d_compact,
        joint_lambda_min: joint_eig.min().max(0.0),
        joint_lambda_max: joint_eig.max(),
        coupling_norm: c_norm,
    };
    Ok(prob)
}

impl QuadQuarticMinMin {
    /// `[[A, C], [C', B]]`.
    pub fn quadratic_joint_hessian(&self) -> Matrix {
        let (m, n) = (self.spec.m, self.spec.n);
        let mut h = Matrix::zeros(m + n, m + n);
        h.view_mut((0, 0), (m, m)).copy_from(&self.a);
        h.view_mut((0, m), (m, n)).copy_from(&self.c);
        h.view_mut((m, 0), (n, m)).copy_from(&self.c.transpose());
        h.view_mut((m, m), (n, n)).copy_from(&self.b);
        h
    }

    fn projections(&self, t: &Vector) -> (f64, f64, Vector) {
        let proj = self.dirs.tr_mul(t);
        let quartic = proj.iter().map(|p| p.powi(4)).sum::<f64>() / 12.0;
        let soft = proj.iter().map(|p| p.cosh().ln()).sum::<f64>();
        (quartic, soft, proj)
    }

    /// Nonquadratic part of the inner Hessian.
    fn curvature_y(&self, y: &Vector) -> Matrix {
        let proj = self.dirs.tr_mul(y);
        let w = proj.map(|p| self.spec.sigma * p * p + self.spec.soft_weight / p.cosh().powi(2));
        &self.dirs * Matrix::from_diagonal(&w) * self.dirs.transpose()
    }

    pub fn joint_hessian(&self, x: &Vector, y: &Vector) -> Matrix {
        let _ = x;
        let m = self.spec.m;
        let n = self.spec.n;
        let mut h = self.quadratic_joint_hessian();
        let add = self.curvature_y(y);
        let mut block = h.view_mut((m, m), (n, n));
        block += add;
        h
    }

    pub fn joint_gradient(&self, z: &Vector) -> Vector {
        let (x, y) = self.split(z);
        stack(&self.grad_x(&x, &y), &self.grad_y(&x, &y))
    }

    pub fn split(&self, z: &Vector) -> (Vector, Vector) {
        let m = self.spec.m;
        (z.rows(0, m).into_owned(), z.rows(m, self.spec.n).into_owned())
    }

    fn project_joint(&self, z: &Vector) -> Vector {
        let (x, y) = self.split(z);
        stack(&self.outer_set.project(&x), &self.inner_set.project(&y))
    }

    /// Natural residual `||z - P(z - grad F(z))||` of the joint problem.
    pub fn kkt_residual(&self, x: &Vector, y: &Vector) -> f64 {
        let z = stack(x, y);
        let g = self.joint_gradient(&z);
        (&z - self.project_joint(&(&z - g))).norm()
    }

    /// Dense projected Newton on `Q_x x Q_y` with backtracking, to natural residual `tol`.
    pub fn reference_solve(&self, tol: f64) -> Result<ReferenceSolution> {
        if !(tol >= 1e-14) {
            return Err(Error::contract("reference tolerance must be at least 1e-14"));
        }
        let (m, n) = (self.spec.m, self.spec.n);
        let z0 = self.project_joint(&Vector::zeros(m + n));
        let value = |z: &Vector| {
            let (x, y) = self.split(z);
            self.value(&x, &y)
        };
        let grad = |z: &Vector| self.joint_gradient(z);
        let hess = |z: &Vector| {
            let (x, y) = self.split(z);
            self.joint_hessian(&x, &y)
        };
        let unconstrained = !self.outer_set.is_compact() && !self.inner_set.is_compact();
        let (z, res, it) = newton_minimize(|z| self.project_joint(z), value, grad, hess, &z0, tol, unconstrained)?;
        let (x, y) = self.split(&z);
        let value = self.value(&x, &y);
        Ok(ReferenceSolution {
            x,
            y,
            value,
            kkt_residual: res,
            iterations: it,
        })
    }

    /// Inner minimizer `y(x)` over `Q_y` and `f(x) = F(x, y(x))`, by Newton to residual `tol`.
    pub fn inner_reference(&self, x: &Vector, tol: f64) -> Result<(Vector, f64)> {
        let y0 = self.inner_set.project(&Vector::zeros(self.spec.n));
        let (y, _, _) = newton_minimize(
            |y| self.inner_set.project(y),
            |y| self.value(x, y),
            |y| self.grad_y(x, y),
            |y| self.hess_yy(x, y),
            &y0,
            tol,
            !self.inner_set.is_compact(),
        )?;
        let v = self.value(x, &y);
        Ok((y, v))
    }

    /// `f(x) = min_y F(x, y)` to high accuracy.
    pub fn outer_value(&self, x: &Vector) -> Result<f64> {
        Ok(self.inner_reference(x, 1e-12)?.1)
    }

    /// Closed-form inner minimizer `-B^{-1}(C'x + c)` for purely quadratic, unconstrained instances.
    pub fn closed_form_inner(&self, x: &Vector) -> Option<Vector> {
        if self.spec.sigma != 0.0 || self.spec.soft_weight != 0.0 || self.inner_set.is_compact() {
            return None;
        }
        let rhs = -(self.c.tr_mul(x) + &self.lin_y);
        self.b.clone().cholesky().map(|ch| ch.solve(&rhs))
    }

    /// Central finite-difference check of the analytic derivatives at `(x, y)`.
    /// Order 1 checks the joint gradient, order 2 the joint Hessian, order 3
    /// the third directional form against the gradient second difference.
    /// Returns the largest relative deviation.
    pub fn derivative_check(&self, x: &Vector, y: &Vector, order: u32) -> f64 {
        let z = stack(x, y);
        let dim = z.len();
        match order {
            1 => {
                let g = self.joint_gradient(&z);
                let scale = g.amax().max(1.0);
                let mut worst: f64 = 0.0;
                for i in 0..dim {
                    let h = 1e-5 * z[i].abs().max(1.0);
                    let mut zp = z.clone();
                    zp[i] += h;
                    let mut zm = z.clone();
                    zm[i] -= h;
                    let (xp, yp) = self.split(&zp);
                    let (xm, ym) = self.split(&zm);
                    let fd = (self.value(&xp, &yp) - self.value(&xm, &ym)) / (2.0 * h);
                    worst = worst.max((fd - g[i]).abs() / scale);
                }
                worst
            }
            2 => {
                let hmat = self.joint_hessian(x, y);
                let scale = hmat.amax().max(1.0);
                let mut worst: f64 = 0.0;
                for i in 0..dim {
                    let h = 1e-5 * z[i].abs().max(1.0);
                    let mut zp = z.clone();
                    zp[i] += h;
                    let mut zm = z.clone();
                    zm[i] -= h;
                    let col = (self.joint_gradient(&zp) - self.joint_gradient(&zm)) / (2.0 * h);
                    worst = worst.max((col - hmat.column(i)).amax() / scale);
                }
                worst
            }
            _ => {
                let h = Vector::from_fn(self.spec.n, |i, _| ((i as f64) * 0.7 + 0.3).sin());
                self.third_order_fd_errors(x, y, &h, &[1e-3]).into_iter().fold(0.0, f64::max)
            }
        }
    }

    /// Relative errors of the gradient second difference
    /// `(g(y + t h) + g(y - t h) - 2 g(y)) / t^2` against `D^3_y F[h, h]` for each `t`.
    pub fn third_order_fd_errors(&self, x: &Vector, y: &Vector, h: &Vector, taus: &[f64]) -> Vec<f64> {
        let exact = self.third_y(x, y, h).expect("zoo has analytic third derivatives");
        let scale = exact.norm().max(1e-300);
        let g0 = self.grad_y(x, y);
        taus.iter()
            .map(|t| {
                let gp = self.grad_y(x, &(y + h * *t));
                let gm = self.grad_y(x, &(y - h * *t));
                let fd = (gp + gm - &g0 * 2.0) / (t * t);
                (fd - &exact).norm() / scale
            })
            .collect()
    }
}

impl MinMinObjective for QuadQuarticMinMin {
    fn dim_x(&self) -> usize {
        self.spec.m
    }

    fn dim_y(&self) -> usize {
        self.spec.n
    }

    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        let (quartic, soft, _) = self.projections(y);
        0.5 * x.dot(&(&self.a * x))
            + x.dot(&(&self.c * y))
            + 0.5 * y.dot(&(&self.b * y))
            + self.lin_x.dot(x)
            + self.lin_y.dot(y)
            + self.spec.sigma * quartic
            + self.spec.soft_weight * soft
    }

    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector {
        &self.a * x + &self.c * y + &self.lin_x
    }

    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector {
        let proj = self.dirs.tr_mul(y);
        let w = proj.map(|p| self.spec.sigma * p.powi(3) / 3.0 + self.spec.soft_weight * p.tanh());
        self.c.tr_mul(x) + &self.b * y + &self.lin_y + &self.dirs * w
    }

    fn hess_yy(&self, _x: &Vector, y: &Vector) -> Matrix {
        &self.b + self.curvature_y(y)
    }

    fn third_y(&self, _x: &Vector, y: &Vector, h: &Vector) -> Option<Vector> {
        let py = self.dirs.tr_mul(y);
        let ph = self.dirs.tr_mul(h);
        let w = Vector::from_iterator(
            py.len(),
            py.iter().zip(ph.iter()).map(|(p, q)| {
                let soft = -2.0 * p.tanh() / p.cosh().powi(2);
                (2.0 * self.spec.sigma * p + self.spec.soft_weight * soft) * q * q
            }),
        );
        Some(&self.dirs * w)
    }
}

/// Projected (proximal) Newton with Armijo backtracking. Each step minimizes
/// the quadratic model over the feasible set; with `unconstrained` it solves
/// the Newton system directly. Returns `(z, residual, iterations)`.
pub(crate) fn newton_minimize<P, V, G, H>(
    project: P,
    value: V,
    grad: G,
    hess: H,
    z0: &Vector,
    tol: f64,
    unconstrained: bool,
) -> Result<(Vector, f64, usize)>
where
    P: Fn(&Vector) -> Vector,
    V: Fn(&Vector) -> f64,
    G: Fn(&Vector) -> Vector,
    H: Fn(&Vector) -> Matrix,
{
    const MAX_ITER: usize = 200;
    let mut z = project(z0);
    let mut res = f64::INFINITY;
    for it in 0..MAX_ITER {
        let g = grad(&z);
        res = (&z - project(&(&z - &g))).norm();
        if res <= tol {
            return Ok((z, res, it));
        }
        let h = hess(&z);
        let target = if unconstrained {
            let step = h
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&g))
                .or_else(|| h.clone().lu().solve(&g))
                .ok_or_else(|| Error::Numerical("singular Newton system".into()))?;
            &z - step
        } else {
            let model = |w: &Vector| {
                let d = w - &z;
                let hd = &h * &d;
                (g.dot(&d) + 0.5 * d.dot(&hd), &g + hd)
            };
            // forcing term: solve the model more accurately as the residual shrinks
            let sub_tol = (0.1 * res.min(1.0) * res / (1.0 + g.norm())).max(1e-15);
            projected_minimize_with(&project, model, &z, sub_tol, 100_000)?
        };
        let d = &target - &z;
        let slope = g.dot(&d);
        if d.norm() <= 1e-8 * (1.0 + z.norm()) || slope >= 0.0 {
            // local regime: full steps converge quadratically, values are at rounding level
            let next = project(&target);
            if (&next - &z).norm() == 0.0 {
                break;
            }
            z = next;
            continue;
        }
        let f0 = value(&z);
        let mut t = 1.0;
        loop {
            let cand = &z + &d * t;
            if value(&cand) <= f0 + 1e-4 * t * slope {
                z = cand;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                z = project(&target);
                break;
            }
        }
    }
    let g = grad(&z);
    res = res.min((&z - project(&(&z - &g))).norm());
    if res <= tol {
        return Ok((z, res, MAX_ITER));
    }
    Err(Error::NoConvergence {
        method: "reference_newton",
        iterations: MAX_ITER,
        residual: res,
        target: tol,
    })
}
