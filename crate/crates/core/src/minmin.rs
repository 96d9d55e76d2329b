//! Min-min problems `min_{x in Q_x} min_{y in Q_y} F(x, y)` and the mixed
//! oracle: an inexact inner solve by a tensor method turned into an inexact
//! first-order oracle for `f(x) = min_y F(x, y)`, driven by a restarted fast
//! gradient method.

use std::cell::{Cell, RefCell};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fgm::{fgm_restarted_inexact, FgmConfig, FgmRun, InexactProvider};
use crate::linalg::{Matrix, Vector};
use crate::model::{InexactOracleOutput, Objective, Oracle, SecondOrderObjective, SmoothnessSpec};
use crate::sets::SimpleSet;
use crate::tensor::{atmi3_restarted, bilevel_restarted, BdgmExit, CompositeProblem, TensorConfig};
use crate::trace::CostCounts;
use crate::zoo::{newton_minimize, QuadQuarticMinMin};

/// Floor on the inner high-order constant relative to `L_y`. A purely
/// quadratic inner problem has `L_3 = 0`, which the step rules cannot divide by.
pub const HIGH_ORDER_FLOOR_REL: f64 = 1e-6;

/// A jointly convex `F(x, y)`, strongly convex in `y`, with partial derivatives.
pub trait MinMinObjective: Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn value(&self, x: &Vector, y: &Vector) -> f64;
    fn grad_x(&self, x: &Vector, y: &Vector) -> Vector;
    fn grad_y(&self, x: &Vector, y: &Vector) -> Vector;
    fn hess_yy(&self, x: &Vector, y: &Vector) -> Matrix;

    /// `D^3_y F(x, y)[h, h]` when available in closed form.
    fn third_y(&self, _x: &Vector, _y: &Vector, _h: &Vector) -> Option<Vector> {
        None
    }
}

/// `y -> F(x, y)` for a fixed `x`.
pub struct InnerSlice<'a, P: ?Sized> {
    pub prob: &'a P,
    pub x: Vector,
}

impl<'a, P: MinMinObjective + ?Sized> InnerSlice<'a, P> {
    pub fn new(prob: &'a P, x: Vector) -> Self {
        InnerSlice { prob, x }
    }
}

impl<P: MinMinObjective + ?Sized> Objective for InnerSlice<'_, P> {
    fn dim(&self) -> usize {
        self.prob.dim_y()
    }
    fn value(&self, y: &Vector) -> f64 {
        self.prob.value(&self.x, y)
    }
    fn gradient(&self, y: &Vector) -> Vector {
        self.prob.grad_y(&self.x, y)
    }
}

impl<P: MinMinObjective + ?Sized> SecondOrderObjective for InnerSlice<'_, P> {
    fn hessian(&self, y: &Vector) -> Matrix {
        self.prob.hess_yy(&self.x, y)
    }
    fn third_directional(&self, y: &Vector, h: &Vector) -> Option<Vector> {
        self.prob.third_y(&self.x, y, h)
    }
}

/// `z = (x, y) -> F(x, y)` on the stacked space.
pub struct JointObjective<'a, P: ?Sized> {
    pub prob: &'a P,
}

impl<P: MinMinObjective + ?Sized> JointObjective<'_, P> {
    pub fn split(&self, z: &Vector) -> (Vector, Vector) {
        let m = self.prob.dim_x();
        (z.rows(0, m).into_owned(), z.rows(m, self.prob.dim_y()).into_owned())
    }
}

pub fn stack(x: &Vector, y: &Vector) -> Vector {
    let mut z = Vector::zeros(x.len() + y.len());
    z.rows_mut(0, x.len()).copy_from(x);
    z.rows_mut(x.len(), y.len()).copy_from(y);
    z
}

impl<P: MinMinObjective + ?Sized> Objective for JointObjective<'_, P> {
    fn dim(&self) -> usize {
        self.prob.dim_x() + self.prob.dim_y()
    }
    fn value(&self, z: &Vector) -> f64 {
        let (x, y) = self.split(z);
        self.prob.value(&x, &y)
    }
    fn gradient(&self, z: &Vector) -> Vector {
        let (x, y) = self.split(z);
        stack(&self.prob.grad_x(&x, &y), &self.prob.grad_y(&x, &y))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!("{name} must be finite and > 0, got {v}")))
    }
}

/// Oracle inexactness `(2 L_y / mu_y)(eps + 2 sqrt(D eps))` of an inner
/// solution with gap `eps` on an unconstrained inner domain.
pub fn delta_unconstrained(eps_tilde: f64, l_y: f64, mu_y: f64, d: f64) -> Result<f64> {
    nonneg("eps_tilde", eps_tilde)?;
    positive("L_y", l_y)?;
    positive("mu_y", mu_y)?;
    nonneg("D", d)?;
    Ok(2.0 * l_y / mu_y * (eps_tilde + 2.0 * (d * eps_tilde).sqrt()))
}

/// Oracle inexactness `H/(1-gamma) (sqrt(2D/mu_y) + sqrt(2 eps/mu_y))^{p+1}`
/// on a compact inner domain. Does not vanish as `eps -> 0`.
pub fn delta_compact(eps_tilde: f64, h: f64, gamma: f64, mu_y: f64, d: f64, p: u32) -> Result<f64> {
    nonneg("eps_tilde", eps_tilde)?;
    positive("H", h)?;
    positive("mu_y", mu_y)?;
    nonneg("D", d)?;
    if !(2..=3).contains(&p) {
        return Err(Error::contract(format!("order p must be 2 or 3, got {p}")));
    }
    if !(0.0..=1.0 / p as f64).contains(&gamma) {
        return Err(Error::contract(format!("gamma must lie in [0, 1/{p}], got {gamma}")));
    }
    let base = (2.0 * d / mu_y).sqrt() + (2.0 * eps_tilde / mu_y).sqrt();
    Ok(h / (1.0 - gamma) * base.powi(p as i32 + 1))
}

/// Largest admissible oracle inexactness `mu_x R^2 / (10 (sqrt(20 L_xy / mu_x) + 3))`.
pub fn delta_max(mu_x: f64, l_xy: f64, r_x: f64) -> Result<f64> {
    positive("mu_x", mu_x)?;
    positive("L_xy", l_xy)?;
    positive("R_x", r_x)?;
    Ok(mu_x * r_x * r_x / (10.0 * ((20.0 * l_xy / mu_x).sqrt() + 3.0)))
}

/// How the oracle inexactness depends on the inner gap `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerAccuracy {
    Unconstrained { l_y: f64, mu_y: f64, d: f64 },
    Compact { h: f64, gamma: f64, mu_y: f64, d: f64, p: u32 },
}

impl InnerAccuracy {
    pub fn delta(&self, eps_tilde: f64) -> Result<f64> {
        match *self {
            InnerAccuracy::Unconstrained { l_y, mu_y, d } => delta_unconstrained(eps_tilde, l_y, mu_y, d),
            InnerAccuracy::Compact { h, gamma, mu_y, d, p } => delta_compact(eps_tilde, h, gamma, mu_y, d, p),
        }
    }

    /// `delta(0)`: the best inexactness any inner accuracy can buy.
    pub fn floor(&self) -> f64 {
        self.delta(0.0).unwrap_or(f64::INFINITY)
    }

    /// Largest `eps` with `delta(eps) <= target`.
    pub fn invert(&self, target: f64) -> Result<f64> {
        positive("target delta", target)?;
        let eps = match *self {
            InnerAccuracy::Unconstrained { l_y, mu_y, d } => {
                // t = sqrt(eps) solves t^2 + 2 sqrt(D) t = k; cancellation-free root
                let k = target * mu_y / (2.0 * l_y);
                let t = k / (d.sqrt() + (d + k).sqrt());
                t * t
            }
            InnerAccuracy::Compact { h, gamma, mu_y, d, p } => {
                let floor = self.floor();
                let s = (target * (1.0 - gamma) / h).powf(1.0 / (p + 1) as f64) - (2.0 * d / mu_y).sqrt();
                if !(s > 0.0) {
                    return Err(Error::Config(format!(
                        "compact inner domain: oracle inexactness floor {floor:.3e} (inner gap bound D = {d:.3e}) \
                         is not below the required {target:.3e}; shrink the inner domain or loosen eps"
                    )));
                }
                0.5 * mu_y * s * s
            }
        };
        let mut eps = eps;
        // absorb rounding so that delta(eps) <= target holds exactly in floating point
        for _ in 0..64 {
            if self.delta(eps)? <= target {
                break;
            }
            eps *= 1.0 - 1e-12;
        }
        Ok(eps)
    }
}

/// Largest inner gap whose oracle inexactness stays below [`delta_max`].
pub fn eps_tilde_for_target(mu_x: f64, l_xy: f64, r_x: f64, model: &InnerAccuracy) -> Result<f64> {
    model.invert(delta_max(mu_x, l_xy, r_x)?)
}

/// `min_{x in Q_x} min_{y in Q_y} F(x, y)` with its constants.
pub struct MinMinProblem<'a, P: ?Sized> {
    pub objective: &'a P,
    pub outer_set: SimpleSet,
    pub inner_set: SimpleSet,
    pub smoothness: SmoothnessSpec,
    /// Upper bound on the inner gap at the inner starting point, uniformly over `Q_x`.
    pub d_bound: f64,
}

impl<'a, P: MinMinObjective + ?Sized> MinMinProblem<'a, P> {
    pub fn new(
        objective: &'a P,
        outer_set: SimpleSet,
        inner_set: SimpleSet,
        smoothness: SmoothnessSpec,
        d_bound: f64,
    ) -> Result<Self> {
        outer_set.validate()?;
        inner_set.validate()?;
        if !outer_set.is_compact() {
            return Err(Error::contract("outer set must be compact"));
        }
        check_dim(objective.dim_x(), outer_set.dim())?;
        check_dim(objective.dim_y(), inner_set.dim())?;
        smoothness.validate()?;
        positive("mu_x", smoothness.mu_x)?;
        if smoothness.l_xy < smoothness.mu_x {
            return Err(Error::contract(format!(
                "L_xy = {} is below mu_x = {}",
                smoothness.l_xy, smoothness.mu_x
            )));
        }
        if !inner_set.is_compact() && smoothness.order != 3 {
            return Err(Error::contract("an unconstrained inner problem is solved by the third-order method (order 3)"));
        }
        nonneg("D", d_bound)?;
        Ok(MinMinProblem {
            objective,
            outer_set,
            inner_set,
            smoothness,
            d_bound,
        })
    }

    pub fn inner_is_compact(&self) -> bool {
        self.inner_set.is_compact()
    }

    /// High-order constant used by the inner method, floored relative to `L_y`.
    pub fn effective_l_p(&self) -> f64 {
        self.smoothness.l_p_y.max(HIGH_ORDER_FLOOR_REL * self.smoothness.l_y)
    }

    /// Inner regularization `H = 6/(p-1)! L_p` of the bi-level method.
    pub fn inner_reg(&self) -> f64 {
        let fact = if self.smoothness.order == 3 { 2.0 } else { 1.0 };
        6.0 / fact * self.effective_l_p()
    }

    pub fn accuracy_model(&self) -> InnerAccuracy {
        let s = &self.smoothness;
        if self.inner_is_compact() {
            InnerAccuracy::Compact {
                h: self.inner_reg(),
                gamma: 1.0 / s.order as f64,
                mu_y: s.mu_y,
                d: self.d_bound,
                p: s.order,
            }
        } else {
            InnerAccuracy::Unconstrained {
                l_y: s.l_y,
                mu_y: s.mu_y,
                d: self.d_bound,
            }
        }
    }
}

impl<'a> MinMinProblem<'a, QuadQuarticMinMin> {
    /// Uses the certified constants of a zoo instance. `order` selects the
    /// inner method on a compact inner domain (2 or 3); unconstrained needs 3.
    pub fn from_zoo(inst: &'a QuadQuarticMinMin, order: u32) -> Result<Self> {
        let c = &inst.constants;
        let compact = inst.inner_set.is_compact();
        let smoothness = SmoothnessSpec {
            mu_x: c.mu_x,
            mu_y: c.mu_y,
            l_y: c.l_y,
            l_p_y: if order == 2 { c.l2_y } else { c.l3_y },
            order,
            l_xy: c.l_xy,
        };
        let d = if compact { c.d_compact } else { c.d_unconstrained };
        MinMinProblem::new(inst, inst.outer_set.clone(), inst.inner_set.clone(), smoothness, d)
    }
}

fn sample_in(set: &SimpleSet, rng: &mut ChaCha8Rng, boundary: bool) -> Vector {
    let n = set.dim();
    let c = set.center();
    let scale = 2.0 * set.max_norm().max(1.0);
    let dir = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let far = set.project(&(&c + dir * scale));
    if boundary {
        far
    } else {
        let u: f64 = rng.random();
        &c + (far - &c) * u
    }
}

/// Sampled estimate of the inner gap bound `D`, inflated by 2: the maximum
/// over `samples` points of `Q_x` (half on the boundary) of
/// `F(x, y_0) - F(x, y(x))`, where `y_0` is the projected origin for an
/// unconstrained inner domain and the worst of `samples` points of `Q_y`
/// otherwise. `y(x)` comes from a projected Newton solve.
pub fn estimate_d<P: MinMinObjective + ?Sized>(
    objective: &P,
    outer_set: &SimpleSet,
    inner_set: &SimpleSet,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(objective.dim_x(), outer_set.dim())?;
    check_dim(objective.dim_y(), inner_set.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = inner_set.project(&Vector::zeros(objective.dim_y()));
    let mut worst: f64 = 0.0;
    for k in 0..samples.max(1) {
        let x = sample_in(outer_set, &mut rng, k % 2 == 0);
        let (y_hat, _, _) = newton_minimize(
            |y| inner_set.project(y),
            |y| objective.value(&x, y),
            |y| objective.grad_y(&x, y),
            |y| objective.hess_yy(&x, y),
            &origin,
            1e-10,
            !inner_set.is_compact(),
        )
        .map_err(|e| e.with_context("inner reference solve while estimating D"))?;
        let best = objective.value(&x, &y_hat);
        let top = if inner_set.is_compact() {
            (0..samples.max(1))
                .map(|j| objective.value(&x, &sample_in(inner_set, &mut rng, j % 2 == 0)))
                .fold(objective.value(&x, &origin), f64::max)
        } else {
            objective.value(&x, &origin)
        };
        worst = worst.max(top - best);
    }
    Ok(2.0 * worst)
}

/// One answer of the mixed oracle.
#[derive(Debug, Clone)]
pub struct MixedOracleRecord {
    pub x: Vector,
    pub y_eps: Vector,
    /// `F(x, y_eps)`.
    pub value: f64,
    /// `F(x, y_eps) - 2 delta`.
    pub f_delta: f64,
    /// `grad_x F(x, y_eps)`.
    pub g_delta: Vector,
    pub delta: f64,
    pub eps_tilde: f64,
    /// Initial distance bound handed to the inner restarts.
    pub inner_radius: f64,
    pub inner_stages: usize,
    /// Calls made for this answer (one `x`-gradient plus the inner solve).
    pub cost: CostCounts,
    pub bdgm_exits: Vec<BdgmExit>,
}

impl MixedOracleRecord {
    /// The answer as a `(6 delta, 2 L_xy)`-oracle output.
    pub fn oracle_output(&self, l_xy: f64) -> Result<InexactOracleOutput> {
        InexactOracleOutput::new(self.f_delta, self.g_delta.clone(), 6.0 * self.delta, 2.0 * l_xy)
    }
}

/// Solves the inner problem at `x` to gap `eps_tilde` and returns the
/// inexact first-order information for `f(x) = min_y F(x, y)`.
///
/// `x` may lie slightly outside `Q_x`: the outer method queries extrapolated
/// points, and `F` is defined on the whole space.
pub fn mixed_oracle_eval<P: MinMinObjective + ?Sized>(
    prob: &MinMinProblem<'_, P>,
    x: &Vector,
    eps_tilde: f64,
    warm_start: Option<&Vector>,
    cfg: &TensorConfig,
) -> Result<MixedOracleRecord> {
    check_dim(prob.objective.dim_x(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("query point has non-finite entries"));
    }
    positive("eps_tilde", eps_tilde)?;
    let s = &prob.smoothness;
    let delta = prob.accuracy_model().delta(eps_tilde)?;
    let slice = InnerSlice::new(prob.objective, x.clone());
    let oracle = Oracle::new(&slice);
    let y0 = match warm_start {
        Some(y) => {
            check_dim(prob.objective.dim_y(), y.len())?;
            prob.inner_set.project(y)
        }
        None => prob.inner_set.project(&Vector::zeros(prob.objective.dim_y())),
    };
    // strong convexity: ||y0 - y(x)|| <= min-norm stationarity residual / mu_y
    let g0 = oracle.gradient(&y0);
    let mut r_y = prob.inner_set.stationarity_residual(&y0, &g0) / s.mu_y;
    if prob.inner_is_compact() {
        r_y = r_y.min(prob.inner_set.diameter());
    }
    let ctx = |e: Error| e.with_context(format!("inner solve at x with |x| = {:.6e}", x.norm()));
    let (y_eps, inner_stages, bdgm_exits) = if r_y > 0.0 {
        let l_p = prob.effective_l_p();
        let run = if prob.inner_is_compact() {
            let comp = CompositeProblem::new(&oracle, prob.inner_set.clone(), s.order, l_p).map_err(ctx)?;
            bilevel_restarted(&comp, &y0, 1.0 / s.order as f64, s.mu_y, eps_tilde, r_y, cfg)
        } else {
            atmi3_restarted(&oracle, &y0, l_p, s.mu_y, eps_tilde, r_y, cfg)
        }
        .map_err(ctx)?;
        (run.y, run.stages_run, run.bdgm_exits)
    } else {
        (y0, 0, Vec::new())
    };
    let value = prob.objective.value(x, &y_eps);
    let g_delta = prob.objective.grad_x(x, &y_eps);
    let counts = oracle.counts();
    Ok(MixedOracleRecord {
        x: x.clone(),
        y_eps,
        value,
        f_delta: value - 2.0 * delta,
        g_delta,
        delta,
        eps_tilde,
        inner_radius: r_y,
        inner_stages,
        cost: CostCounts {
            grad_x: 1,
            grad_y: counts.gradients,
            hess_y: counts.hessians,
        },
        bdgm_exits,
    })
}

/// Driver options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinMinConfig {
    pub tensor: TensorConfig,
    /// Re-derive the inner accuracy from each outer stage's requested
    /// inexactness; otherwise use one accuracy fixed up front.
    pub retighten: bool,
    /// Start each inner solve from the previous inner answer.
    pub warm_start: bool,
    /// Keep every oracle answer in the output.
    pub keep_history: bool,
    pub keep_iterates: bool,
}

impl Default for MinMinConfig {
    fn default() -> Self {
        MinMinConfig {
            tensor: TensorConfig::default(),
            retighten: true,
            warm_start: true,
            keep_history: false,
            keep_iterates: false,
        }
    }
}

/// The mixed oracle as an accuracy-controlled provider for the outer method.
pub struct MixedOracle<'p, 'a, P: ?Sized> {
    prob: &'p MinMinProblem<'a, P>,
    model: InnerAccuracy,
    cfg: MinMinConfig,
    fixed_eps: Option<f64>,
    warm: RefCell<Option<Vector>>,
    cost: Cell<CostCounts>,
    last_eps: Cell<f64>,
    inner_stages: Cell<usize>,
    history: RefCell<Vec<MixedOracleRecord>>,
}

impl<'p, 'a, P: MinMinObjective + ?Sized> MixedOracle<'p, 'a, P> {
    pub fn new(prob: &'p MinMinProblem<'a, P>, cfg: &MinMinConfig, fixed_eps: Option<f64>, y0: Option<Vector>) -> Self {
        MixedOracle {
            prob,
            model: prob.accuracy_model(),
            cfg: *cfg,
            fixed_eps,
            warm: RefCell::new(y0),
            cost: Cell::new(CostCounts::default()),
            last_eps: Cell::new(0.0),
            inner_stages: Cell::new(0),
            history: RefCell::new(Vec::new()),
        }
    }

    /// Inner gap used for an oracle of inexactness `delta` (that is, `6 delta(eps) <= delta`).
    pub fn eps_tilde_for(&self, delta: f64) -> Result<f64> {
        match self.fixed_eps {
            Some(e) => Ok(e),
            None => self.model.invert(delta / 6.0),
        }
    }

    /// Answers one query and updates the counters and warm start.
    pub fn answer(&self, x: &Vector, eps_tilde: f64) -> Result<MixedOracleRecord> {
        let warm = if self.cfg.warm_start { self.warm.borrow().clone() } else { None };
        let rec = mixed_oracle_eval(self.prob, x, eps_tilde, warm.as_ref(), &self.cfg.tensor)?;
        self.cost.set(self.cost.get() + rec.cost);
        self.last_eps.set(eps_tilde);
        self.inner_stages.set(self.inner_stages.get() + rec.inner_stages);
        *self.warm.borrow_mut() = Some(rec.y_eps.clone());
        if self.cfg.keep_history {
            self.history.borrow_mut().push(rec.clone());
        }
        Ok(rec)
    }

    pub fn last_y(&self) -> Option<Vector> {
        self.warm.borrow().clone()
    }

    pub fn total_inner_stages(&self) -> usize {
        self.inner_stages.get()
    }

    pub fn take_history(&self) -> Vec<MixedOracleRecord> {
        std::mem::take(&mut *self.history.borrow_mut())
    }
}

impl<P: MinMinObjective + ?Sized> InexactProvider for MixedOracle<'_, '_, P> {
    fn dim(&self) -> usize {
        self.prob.objective.dim_x()
    }

    fn query(&self, x: &Vector, delta: f64) -> Result<InexactOracleOutput> {
        let eps = self.eps_tilde_for(delta)?;
        self.answer(x, eps)?.oracle_output(self.prob.smoothness.l_xy)
    }

    fn delta_floor(&self) -> f64 {
        match self.fixed_eps {
            Some(_) => 0.0,
            None => 6.0 * self.model.floor(),
        }
    }

    fn cost(&self) -> CostCounts {
        self.cost.get()
    }

    fn last_eps_tilde(&self) -> f64 {
        self.last_eps.get()
    }
}

/// Cost summary of one driver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub outer_grad_calls: u64,
    pub inner_grad_calls: u64,
    pub inner_hess_calls: u64,
    pub stages: usize,
    /// `F(x, y) - F*` when a reference value is known.
    pub final_gap: Option<f64>,
    pub final_value: f64,
    pub wall_ms: f64,
}

impl CostReport {
    pub fn counts(&self) -> CostCounts {
        CostCounts {
            grad_x: self.outer_grad_calls,
            grad_y: self.inner_grad_calls,
            hess_y: self.inner_hess_calls,
        }
    }

    pub fn with_reference(mut self, f_star: f64) -> Self {
        self.final_gap = Some(self.final_value - f_star);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cost report serializes")
    }
}

/// Result of [`minmin_solve`] or [`joint_fgm_solve`].
#[derive(Debug, Clone)]
pub struct MinMinOutput {
    pub x: Vector,
    pub y: Vector,
    pub value: f64,
    pub report: CostReport,
    pub run: FgmRun,
    /// Single inner accuracy when re-tightening is off.
    pub fixed_eps_tilde: Option<f64>,
    pub inner_stages: usize,
    pub history: Vec<MixedOracleRecord>,
}

fn check_starts<P: MinMinObjective + ?Sized>(prob: &MinMinProblem<'_, P>, x0: &Vector, y0: &Vector, eps: f64) -> Result<()> {
    positive("eps", eps)?;
    check_dim(prob.objective.dim_x(), x0.len())?;
    check_dim(prob.objective.dim_y(), y0.len())?;
    if !prob.outer_set.contains(x0)? {
        return Err(Error::contract("x0 is not in the outer set"));
    }
    if !prob.inner_set.contains(y0)? {
        return Err(Error::contract("y0 is not in the inner set"));
    }
    Ok(())
}

/// Restarted fast gradient method on `f(x) = min_y F(x, y)` through the
/// mixed oracle. The outer method targets `eps/2` and a last inner solve at
/// the final `x` to gap `eps/2`, so `F(x, y) - F* <= eps`.
pub fn minmin_solve<P: MinMinObjective + ?Sized>(
    prob: &MinMinProblem<'_, P>,
    x0: &Vector,
    y0: &Vector,
    eps: f64,
    cfg: &MinMinConfig,
) -> Result<MinMinOutput> {
    check_starts(prob, x0, y0, eps)?;
    let clock = Instant::now();
    let s = &prob.smoothness;
    let r_x = prob.outer_set.diameter().max(f64::MIN_POSITIVE);
    let fixed_eps_tilde = if cfg.retighten {
        None
    } else {
        Some(eps_tilde_for_target(s.mu_x, s.l_xy, r_x, &prob.accuracy_model())?)
    };
    let oracle = MixedOracle::new(prob, cfg, fixed_eps_tilde, Some(y0.clone()));
    let fgm_cfg = FgmConfig {
        keep_iterates: cfg.keep_iterates,
    };
    let run = fgm_restarted_inexact(&prob.outer_set, &oracle, x0, 2.0 * s.l_xy, s.mu_x, 0.5 * eps, r_x, &fgm_cfg)?;
    let last = oracle
        .answer(&run.x, 0.5 * eps)
        .map_err(|e| e.with_context("final inner solve"))?;
    let counts = oracle.cost();
    let report = CostReport {
        outer_grad_calls: counts.grad_x,
        inner_grad_calls: counts.grad_y,
        inner_hess_calls: counts.hess_y,
        stages: run.stages_run,
        final_gap: None,
        final_value: last.value,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    };
    Ok(MinMinOutput {
        x: run.x.clone(),
        y: last.y_eps,
        value: last.value,
        report,
        run,
        fixed_eps_tilde,
        inner_stages: oracle.total_inner_stages(),
        history: oracle.take_history(),
    })
}

struct JointProvider<'o, 'f, F: ?Sized> {
    oracle: &'o Oracle<'f, F>,
    lipschitz: f64,
}

impl<F: Objective + ?Sized> InexactProvider for JointProvider<'_, '_, F> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn query(&self, z: &Vector, _delta: f64) -> Result<InexactOracleOutput> {
        let (f, g) = self.oracle.eval(z);
        Ok(InexactOracleOutput::exact(f, g, self.lipschitz))
    }

    // a joint gradient computes both blocks
    fn cost(&self) -> CostCounts {
        let n = self.oracle.counts().gradients;
        CostCounts {
            grad_x: n,
            grad_y: n,
            hess_y: 0,
        }
    }
}

/// Baseline: restarted fast gradient method on the joint variable `(x, y)`
/// with exact gradients. `l_joint` and `mu_joint` are the smoothness and
/// strong convexity constants of `F` on `Q_x x Q_y`.
pub fn joint_fgm_solve<P: MinMinObjective + ?Sized>(
    prob: &MinMinProblem<'_, P>,
    x0: &Vector,
    y0: &Vector,
    eps: f64,
    l_joint: f64,
    mu_joint: f64,
    keep_iterates: bool,
) -> Result<MinMinOutput> {
    check_starts(prob, x0, y0, eps)?;
    positive("mu_joint", mu_joint)?;
    let clock = Instant::now();
    let set = SimpleSet::product(vec![prob.outer_set.clone(), prob.inner_set.clone()])?;
    let joint = JointObjective { prob: prob.objective };
    let oracle = Oracle::new(&joint);
    let z0 = stack(x0, y0);
    let g0 = oracle.gradient(&z0);
    let mut r = set.stationarity_residual(&z0, &g0) / mu_joint;
    if set.is_compact() {
        r = r.min(set.diameter());
    }
    let provider = JointProvider {
        oracle: &oracle,
        lipschitz: l_joint,
    };
    let run = fgm_restarted_inexact(
        &set,
        &provider,
        &z0,
        l_joint,
        mu_joint,
        eps,
        r.max(f64::MIN_POSITIVE),
        &FgmConfig { keep_iterates },
    )?;
    let (x, y) = joint.split(&run.x);
    let value = prob.objective.value(&x, &y);
    let counts = provider.cost();
    let report = CostReport {
        outer_grad_calls: counts.grad_x,
        inner_grad_calls: counts.grad_y,
        inner_hess_calls: 0,
        stages: run.stages_run,
        final_gap: None,
        final_value: value,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
    };
    Ok(MinMinOutput {
        x,
        y,
        value,
        report,
        run,
        fixed_eps_tilde: None,
        inner_stages: 0,
        history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_instance, InnerDomain, InstanceSpec};

    #[test]
    fn delta_formulas_plug_in() {
        assert!((delta_unconstrained(0.25, 2.0, 1.0, 1.0).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(delta_unconstrained(0.0, 2.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(delta_unconstrained(-1.0, 2.0, 1.0, 1.0).is_err());
        let c = delta_compact(0.02, 6.0, 1.0 / 3.0, 1.0, 0.02, 3).unwrap();
        assert!((c - 0.2304).abs() < 1e-12, "{c}");
        let floor = delta_compact(0.0, 6.0, 1.0 / 3.0, 1.0, 0.02, 3).unwrap();
        assert!((floor - 9.0 * 0.04f64.powi(2)).abs() < 1e-14);
        assert!(delta_compact(0.1, 6.0, 0.5, 1.0, 0.02, 3).is_err());
        assert!((delta_max(1.0, 5.0, 1.0).unwrap() - 1.0 / 130.0).abs() < 1e-16);
    }

    #[test]
    fn deltas_increase_in_eps() {
        let mut prev_u = -1.0;
        let mut prev_c = -1.0;
        for k in 0..50 {
            let e = 1e-8 * 1.5f64.powi(k);
            let u = delta_unconstrained(e, 3.0, 0.5, 0.7).unwrap();
            let c = delta_compact(e, 2.0, 0.5, 0.5, 0.1, 2).unwrap();
            assert!(u > prev_u && c > prev_c);
            prev_u = u;
            prev_c = c;
        }
    }

    #[test]
    fn inversion_is_tight() {
        let d_max = delta_max(1.0, 5.0, 1.0).unwrap();
        let zero_d = InnerAccuracy::Unconstrained { l_y: 4.0, mu_y: 0.5, d: 0.0 };
        let e = eps_tilde_for_target(1.0, 5.0, 1.0, &zero_d).unwrap();
        assert!((e - 0.5 * d_max / 8.0).abs() < 1e-15);
        for model in [
            InnerAccuracy::Unconstrained { l_y: 4.0, mu_y: 0.5, d: 3.0 },
            InnerAccuracy::Compact { h: 6.0, gamma: 1.0 / 3.0, mu_y: 1.0, d: 1e-6, p: 3 },
            InnerAccuracy::Compact { h: 2.0, gamma: 0.5, mu_y: 0.3, d: 0.0, p: 2 },
        ] {
            let e = model.invert(d_max).unwrap();
            assert!(model.delta(e).unwrap() <= d_max);
            assert!(model.delta(1.01 * e).unwrap() > d_max);
        }
        let hopeless = InnerAccuracy::Compact { h: 6.0, gamma: 1.0 / 3.0, mu_y: 1.0, d: 1.0, p: 3 };
        assert!(matches!(hopeless.invert(d_max), Err(Error::Config(_))));
    }

    fn quadratic_instance(coupling: f64) -> QuadQuarticMinMin {
        let mut spec = InstanceSpec::new(3, 12, 4, 0.5, 0.5, coupling, 0.0);
        spec.outer_radius = 5.0;
        make_instance(&spec).unwrap()
    }

    #[test]
    fn separable_gradient_matches_closed_form() {
        let inst = quadratic_instance(0.7);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let x = Vector::from_fn(12, |i, _| 0.1 * (i as f64 - 5.0));
        let y_star = inst.closed_form_inner(&x).unwrap();
        let grad_f = inst.grad_x(&x, &y_star);
        let eps = 1e-8;
        let rec = mixed_oracle_eval(&prob, &x, eps, None, &TensorConfig::default()).unwrap();
        assert!(rec.value - inst.value(&x, &y_star) <= eps * (1.0 + 1e-9));
        let bound = inst.constants.l_xy * (2.0 * eps / inst.constants.mu_y).sqrt();
        assert!((&rec.g_delta - grad_f).norm() <= bound);
        assert_eq!(rec.cost.grad_x, 1);
        assert!(rec.cost.grad_y > 0 && rec.cost.hess_y > 0);
    }

    #[test]
    fn warm_start_shrinks_the_inner_radius() {
        let inst = quadratic_instance(0.7);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let x = Vector::from_element(12, 0.2);
        let cfg = TensorConfig::default();
        let cold = mixed_oracle_eval(&prob, &x, 1e-8, None, &cfg).unwrap();
        let x2 = &x * 1.01;
        let warm = mixed_oracle_eval(&prob, &x2, 1e-8, Some(&cold.y_eps), &cfg).unwrap();
        let cold2 = mixed_oracle_eval(&prob, &x2, 1e-8, None, &cfg).unwrap();
        assert!(warm.inner_radius < cold2.inner_radius);
        assert!(warm.inner_stages <= cold2.inner_stages);
    }

    #[test]
    fn zoo_instance_reaches_target_gap() {
        let inst = make_instance(&InstanceSpec::default()).unwrap();
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let x0 = Vector::zeros(64);
        let y0 = Vector::zeros(16);
        let eps = 1e-5;
        let out = minmin_solve(&prob, &x0, &y0, eps, &MinMinConfig::default()).unwrap();
        let report = out.report.clone().with_reference(inst.reference.value);
        let gap = report.final_gap.unwrap();
        assert!(gap <= eps, "gap {gap:.3e}");
        assert!(gap >= -1e-9);
        assert!(inst.outer_set.contains(&out.x).unwrap());
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        for key in ["outer_grad_calls", "inner_grad_calls", "inner_hess_calls", "stages", "final_gap", "wall_ms"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn decoupled_outer_matches_plain_fgm() {
        let inst = quadratic_instance(0.0);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let x0 = Vector::zeros(12);
        let y0 = Vector::zeros(4);
        let eps = 1e-8;
        let out = minmin_solve(&prob, &x0, &y0, eps, &MinMinConfig::default()).unwrap();
        assert!((&out.x - &inst.reference.x).norm() <= (2.0 * eps / inst.constants.mu_x).sqrt());
        assert!(out.value - inst.reference.value <= eps);
    }

    #[test]
    fn fixed_accuracy_mode_runs() {
        let inst = quadratic_instance(0.5);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let cfg = MinMinConfig {
            retighten: false,
            ..MinMinConfig::default()
        };
        let out = minmin_solve(&prob, &Vector::zeros(12), &Vector::zeros(4), 1e-3, &cfg).unwrap();
        assert!(out.fixed_eps_tilde.unwrap() > 0.0);
        assert!(out.value - inst.reference.value <= 1e-3);
    }

    #[test]
    fn compact_floor_is_reported_before_iterating() {
        let mut spec = InstanceSpec::new(5, 8, 4, 0.5, 0.5, 0.5, 0.1);
        spec.inner = InnerDomain::Ball { radius: 1.0 };
        let inst = make_instance(&spec).unwrap();
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let err = minmin_solve(&prob, &Vector::zeros(8), &Vector::zeros(4), 1e-10, &MinMinConfig::default()).unwrap_err();
        assert!(matches!(err.root(), Error::Config(_)), "{err}");
    }

    #[test]
    fn joint_baseline_reaches_target() {
        let inst = quadratic_instance(0.5);
        let prob = MinMinProblem::from_zoo(&inst, 3).unwrap();
        let c = &inst.constants;
        let out = joint_fgm_solve(&prob, &Vector::zeros(12), &Vector::zeros(4), 1e-8, c.l_xy, c.joint_lambda_min, false).unwrap();
        assert!(out.value - inst.reference.value <= 1e-8);
        assert_eq!(out.report.outer_grad_calls, out.report.inner_grad_calls);
    }

    #[test]
    fn sampled_d_covers_the_certified_setting() {
        let inst = quadratic_instance(0.5);
        let d = estimate_d(&inst, &inst.outer_set, &inst.inner_set, 16, 7).unwrap();
        assert!(d > 0.0);
        assert!(d <= 2.0 * inst.constants.d_unconstrained * (1.0 + 1e-9));
    }
}
