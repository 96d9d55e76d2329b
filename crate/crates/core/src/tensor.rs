//! Accelerated third-order method with gradient/Hessian-only inner solves,
//! its restarted version for strongly convex objectives, and the composite
//! high-order proximal pair (non-Euclidean composite gradient inner solver
//! wrapped in an estimating-sequence loop) for simple constraint sets.

use serde::{Deserialize, Serialize};

use crate::bdgm::{bdgm_solve, solve_power_regularized, BdgmConfig, DeltaRule};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, SymEigen, Vector};
use crate::model::{CallCounts, Oracle, SecondOrderObjective};
use crate::sets::{projected_minimize, SimpleSet};
use crate::trace::{CostCounts, IterRecord};

/// `c3 = (5 / (7 L3))^{1/3}`.
pub fn atmi_c3(l3: f64) -> f64 {
    (5.0 / (7.0 * l3)).cbrt()
}

/// `A_i = 2 (2/3 c3)^3 (i/4)^4`.
pub fn atmi_weight(l3: f64, i: usize) -> f64 {
    2.0 * (2.0 / 3.0 * atmi_c3(l3)).powi(3) * (i as f64 / 4.0).powi(4)
}

/// `A_k = (c_p / 2)^p (k / (p+1))^{p+1}`.
pub fn bilevel_weight(c_p: f64, p: u32, k: usize) -> f64 {
    (c_p / 2.0).powi(p as i32) * (k as f64 / (p as f64 + 1.0)).powi(p as i32 + 1)
}

/// Convex weights `(A_i / A_{i+1}, a_{i+1} / A_{i+1})`, with `0/0` read as `(0, 1)`.
pub fn coupling_weights(a_i: f64, a_next: f64) -> (f64, f64) {
    if a_next <= 0.0 {
        return (0.0, 1.0);
    }
    let wy = (a_i / a_next).clamp(0.0, 1.0);
    (wy, 1.0 - wy)
}

/// Number of halving stages `ceil(log2(mu R^2 / eps))`, at least one: the
/// starting point carries no gap bound of its own.
pub fn restart_stage_count(mu: f64, r: f64, eps: f64) -> usize {
    let ratio = mu * r * r / eps;
    if ratio <= 2.0 {
        1
    } else {
        ratio.log2().ceil() as usize
    }
}

/// Stage length `6 ceil((7 L3 R_i^2 / (15 mu))^{1/4})` of the restarted method.
pub fn atmi_stage_iterations(l3: f64, mu: f64, r_i: f64) -> usize {
    6 * (7.0 * l3 * r_i * r_i / (15.0 * mu)).powf(0.25).ceil().max(1.0) as usize
}

/// Smallest `N` with `R^{p+1} / ((p+1) A_N) <= mu R^2 / 4`, scaled by `scale`.
pub fn bilevel_stage_iterations(c_p: f64, p: u32, mu: f64, r_i: f64, scale: f64) -> usize {
    let pf = p as f64;
    let needed = 4.0 * r_i.powf(pf - 1.0) / ((pf + 1.0) * mu);
    let n = (pf + 1.0) * (needed / (c_p / 2.0).powf(pf)).powf(1.0 / (pf + 1.0));
    ((scale * n).ceil() as usize).max(1)
}

/// Running lower model `psi(y) = d_{p+1}(y - base) + <s, y> + constant`,
/// where the linear part accumulates weighted linearizations.
#[derive(Debug, Clone)]
pub struct EstimatingSequence {
    pub base: Vector,
    pub order: u32,
    pub s: Vector,
    pub constant: f64,
    pub weight: f64,
}

impl EstimatingSequence {
    pub fn new(base: Vector, order: u32) -> Self {
        let n = base.len();
        EstimatingSequence {
            base,
            order,
            s: Vector::zeros(n),
            constant: 0.0,
            weight: 0.0,
        }
    }

    /// Adds `a (value + <grad, y - point>)`.
    pub fn add(&mut self, a: f64, value: f64, grad: &Vector, point: &Vector) {
        self.s += grad * a;
        self.constant += a * (value - grad.dot(point));
        self.weight += a;
    }

    pub fn value(&self, y: &Vector) -> f64 {
        let r = (y - &self.base).norm();
        let q = self.order as f64 + 1.0;
        r.powf(q) / q + self.s.dot(y) + self.constant
    }

    pub fn minimizer(&self, set: &SimpleSet) -> Result<Vector> {
        set.power_prox_argmin(&self.s, &self.base, self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NecgConfig {
    pub l_init: f64,
    pub max_iters: usize,
    /// Accept once the model residual is below `gamma * floor` even if the
    /// relative test has not fired.
    pub floor: f64,
    pub subproblem_tol: f64,
}

impl Default for NecgConfig {
    fn default() -> Self {
        NecgConfig {
            l_init: 2.0,
            max_iters: 5000,
            floor: 0.0,
            subproblem_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorConfig {
    pub bdgm: BdgmConfig,
    pub necg: NecgConfig,
    /// Accuracy target that sizes the BDGM inner accuracy for unrestarted runs.
    pub eps: f64,
    /// Stop restarts early once `||grad f||^2 <= 2 mu eps` (or the composite analogue).
    pub certificate_exit: bool,
    /// Bi-level loop stops once `||grad f(T) + g|| <= residual_tol`.
    pub residual_tol: f64,
    /// Multiplier on the derived bi-level stage budget.
    pub budget_scale: f64,
}

impl Default for TensorConfig {
    fn default() -> Self {
        TensorConfig {
            bdgm: BdgmConfig::default(),
            necg: NecgConfig::default(),
            eps: 1e-10,
            certificate_exit: true,
            residual_tol: 1e-12,
            budget_scale: 1.0,
        }
    }
}

/// One finished BDGM inner solve, kept for certificate checks.
#[derive(Debug, Clone)]
pub struct BdgmExit {
    pub anchor: Vector,
    pub z: Vector,
    pub delta: f64,
    pub iterations: usize,
    pub rounding: f64,
    pub certified: bool,
}

/// Output of a tensor-method run.
#[derive(Debug, Clone)]
pub struct TensorRun {
    pub y: Vector,
    pub value: f64,
    pub records: Vec<IterRecord>,
    pub bdgm_exits: Vec<BdgmExit>,
    pub stages_planned: usize,
    pub stages_run: usize,
    pub counts: CallCounts,
    /// `min_{j <= k} f(y_j)` after each outer iteration.
    pub best_values: Vec<f64>,
    /// Coupling weights `(A_i / A_{i+1}, a_{i+1} / A_{i+1})` per iteration.
    pub couplings: Vec<(f64, f64)>,
    /// `A_{i+1}` per iteration.
    pub weights: Vec<f64>,
}

impl TensorRun {
    fn start(y0: &Vector, value: f64) -> Self {
        TensorRun {
            y: y0.clone(),
            value,
            records: Vec::new(),
            bdgm_exits: Vec::new(),
            stages_planned: 0,
            stages_run: 0,
            counts: CallCounts::default(),
            best_values: Vec::new(),
            couplings: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn push(&mut self, stage: usize, iter: usize, value: f64, residual: f64, delta: f64, counts: CallCounts) {
        let mut rec = IterRecord::new(stage, iter, value, residual);
        rec.delta = delta;
        rec.cost = CostCounts {
            grad_x: 0,
            grad_y: counts.gradients,
            hess_y: counts.hessians,
        };
        self.records.push(rec);
        let best = self.best_values.last().copied().unwrap_or(f64::INFINITY).min(value);
        self.best_values.push(best);
    }
}

fn since(o: CallCounts, start: CallCounts) -> CallCounts {
    CallCounts {
        values: o.values - start.values,
        gradients: o.gradients - start.gradients,
        hessians: o.hessians - start.hessians,
    }
}

#[allow(clippy::too_many_arguments)]
fn atmi3_stage<F: SecondOrderObjective + ?Sized>(
    oracle: &Oracle<'_, F>,
    l3: f64,
    n: usize,
    eps: f64,
    stage: usize,
    cfg: &TensorConfig,
    start: CallCounts,
    stop_grad: f64,
    run: &mut TensorRun,
) -> Result<bool> {
    let whole = SimpleSet::whole(oracle.dim());
    let y0 = run.y.clone();
    let mut psi = EstimatingSequence::new(y0.clone(), 3);
    let mut y = y0;
    for i in 0..n {
        let v = psi.minimizer(&whole)?;
        let a_i = atmi_weight(l3, i);
        let a_next = atmi_weight(l3, i + 1);
        let (wy, wv) = coupling_weights(a_i, a_next);
        let z = &y * wy + &v * wv;
        let rule = DeltaRule::Target {
            eps,
            constant: cfg.bdgm.delta_constant,
        };
        let out = bdgm_solve(oracle, &z, l3, rule, &cfg.bdgm)
            .map_err(|e| e.with_context(format!("tensor iteration {i} of stage {stage}")))?;
        y = out.z.clone();
        let grad = out.grad_z;
        let fy = oracle.value(&y);
        psi.add(a_next - a_i, fy, &grad, &y);
        run.bdgm_exits.push(BdgmExit {
            anchor: z,
            z: y.clone(),
            delta: out.delta,
            iterations: out.iterations,
            rounding: out.rounding,
            certified: out.certified,
        });
        run.couplings.push((wy, wv));
        run.weights.push(a_next);
        run.value = fy;
        run.push(stage, i + 1, fy, grad.norm(), out.delta, since(oracle.counts(), start));
        // below the rounding level of the gradient no further progress is measurable
        if grad.norm() <= stop_grad.max(out.rounding) {
            run.y = y;
            return Ok(true);
        }
    }
    run.y = y;
    Ok(false)
}

/// Runs `n` iterations of the accelerated third-order method from `y0`.
pub fn atmi3_run<F: SecondOrderObjective + ?Sized>(
    oracle: &Oracle<'_, F>,
    y0: &Vector,
    l3: f64,
    n: usize,
    cfg: &TensorConfig,
) -> Result<TensorRun> {
    if !(l3 > 0.0) {
        return Err(Error::contract("L3 must be positive"));
    }
    check_dim(oracle.dim(), y0.len())?;
    let start = oracle.counts();
    let mut run = TensorRun::start(y0, f64::NAN);
    if n == 0 {
        run.value = oracle.value(y0);
        return Ok(run);
    }
    atmi3_stage(oracle, l3, n, cfg.eps, 0, cfg, start, 0.0, &mut run)?;
    run.stages_planned = 1;
    run.stages_run = 1;
    run.counts = since(oracle.counts(), start);
    Ok(run)
}

/// Stationarity level `sqrt(2 mu eps)` below which strong convexity already
/// certifies a gap of at most `eps`.
fn certificate_level(cfg: &TensorConfig, mu: f64, eps: f64) -> f64 {
    if cfg.certificate_exit {
        (2.0 * mu * eps).sqrt()
    } else {
        0.0
    }
}

/// Restarted method for `mu`-strongly convex objectives: stage `i` starts at
/// distance at most `R_i = R 2^{-i/2}` from the minimizer and runs long enough
/// to halve the squared distance.
pub fn atmi3_restarted<F: SecondOrderObjective + ?Sized>(
    oracle: &Oracle<'_, F>,
    y0: &Vector,
    l3: f64,
    mu: f64,
    eps: f64,
    r: f64,
    cfg: &TensorConfig,
) -> Result<TensorRun> {
    if !(eps > 0.0) || !(mu > 0.0) || !(r > 0.0) || !(l3 > 0.0) {
        return Err(Error::contract("restarted method needs eps, mu, R, L3 > 0"));
    }
    check_dim(oracle.dim(), y0.len())?;
    let start = oracle.counts();
    let stages = restart_stage_count(mu, r, eps);
    let mut run = TensorRun::start(y0, f64::NAN);
    run.stages_planned = stages;
    let stop = certificate_level(cfg, mu, eps);
    for stage in 0..stages {
        let r_i = r * 0.5f64.powf(stage as f64 / 2.0);
        let n_i = atmi_stage_iterations(l3, mu, r_i);
        let target = 0.25 * mu * r_i * r_i;
        let converged = atmi3_stage(oracle, l3, n_i, target, stage, cfg, start, stop, &mut run)?;
        run.stages_run = stage + 1;
        if cfg.certificate_exit && converged {
            break;
        }
    }
    if run.records.is_empty() {
        run.value = oracle.value(y0);
    }
    run.counts = since(oracle.counts(), start);
    Ok(run)
}

/// Smooth convex part `f` restricted to a simple set, with the regularization
/// `H` of the high-order proximal operator.
pub struct CompositeProblem<'o, 'f, F: ?Sized> {
    pub oracle: &'o Oracle<'f, F>,
    pub set: SimpleSet,
    pub order: u32,
    pub l_p: f64,
    pub reg: f64,
}

impl<'o, 'f, F: SecondOrderObjective + ?Sized> CompositeProblem<'o, 'f, F> {
    /// Uses `H = 6 / (p-1)! L_p`.
    pub fn new(oracle: &'o Oracle<'f, F>, set: SimpleSet, order: u32, l_p: f64) -> Result<Self> {
        let fact = if order == 3 { 2.0 } else { 1.0 };
        Self::with_reg(oracle, set, order, l_p, 6.0 / fact * l_p)
    }

    pub fn with_reg(oracle: &'o Oracle<'f, F>, set: SimpleSet, order: u32, l_p: f64, reg: f64) -> Result<Self> {
        if !(2..=3).contains(&order) {
            return Err(Error::contract("composite order must be 2 or 3"));
        }
        if !(l_p > 0.0) {
            return Err(Error::contract("L_p must be positive"));
        }
        if reg < order as f64 * l_p * (1.0 - 1e-12) {
            return Err(Error::contract(format!("H = {reg} is below p L_p = {}", order as f64 * l_p)));
        }
        set.validate()?;
        check_dim(oracle.dim(), set.dim())?;
        Ok(CompositeProblem {
            oracle,
            set,
            order,
            l_p,
            reg,
        })
    }
}

/// Output of the inner composite solver.
#[derive(Debug, Clone)]
pub struct NecgOutput {
    pub t: Vector,
    /// Normal-cone element at `t`.
    pub g: Vector,
    pub value_t: f64,
    pub grad_t: Vector,
    pub iterations: usize,
    pub l_rel: f64,
}

struct BregmanGeometry {
    anchor: Vector,
    eig: SymEigen,
    hess: Matrix,
    coef: f64,
    order: u32,
}

impl BregmanGeometry {
    fn power(&self, h: &Vector) -> (f64, Vector) {
        let r = h.norm();
        let q = self.order as f64;
        (self.coef * r.powf(q + 1.0) / (q + 1.0), h * (self.coef * r.powf(q - 1.0)))
    }

    fn rho(&self, z: &Vector) -> f64 {
        let h = z - &self.anchor;
        0.5 * h.dot(&(&self.hess * &h)) + self.power(&h).0
    }

    fn rho_gradient(&self, z: &Vector) -> Vector {
        let h = z - &self.anchor;
        &self.hess * &h + self.power(&h).1
    }

    /// `argmin_{z in set} -<b, z - anchor> + rho(z)`.
    fn prox(&self, set: &SimpleSet, b: &Vector, tol: f64) -> Result<Vector> {
        match set {
            SimpleSet::WholeSpace { .. } => {
                Ok(&self.anchor + solve_power_regularized(&self.eig, b, self.coef, self.order, None, tol)?)
            }
            SimpleSet::Ball { center, radius } => {
                let e = Vector::from_column_slice(center) - &self.anchor;
                let h = solve_power_regularized(&self.eig, b, self.coef, self.order, Some((&e, *radius)), tol)?;
                Ok(&self.anchor + h)
            }
            SimpleSet::Box { .. } | SimpleSet::Product { .. } => {
                let free = &self.anchor + solve_power_regularized(&self.eig, b, self.coef, self.order, None, tol)?;
                let obj = |z: &Vector| {
                    let h = z - &self.anchor;
                    let ah = &self.hess * &h;
                    let (pv, pg) = self.power(&h);
                    (-b.dot(&h) + 0.5 * h.dot(&ah) + pv, ah + pg - b)
                };
                projected_minimize(set, obj, &free, tol.max(1e-13), 50_000)
            }
        }
    }
}

/// Finds `(T, g)` with `g` in the normal cone of the set at `T` and
/// `||grad f^p(T) + g|| <= gamma ||grad f(T) + g||`, where
/// `f^p(y) = f(y) + H d_{p+1}(y - anchor)`.
pub fn necg_solve<F: SecondOrderObjective + ?Sized>(
    comp: &CompositeProblem<'_, '_, F>,
    anchor: &Vector,
    gamma: f64,
    cfg: &NecgConfig,
) -> Result<NecgOutput> {
    let p = comp.order;
    if !(0.0..=1.0 / p as f64).contains(&gamma) {
        return Err(Error::contract(format!("gamma must lie in [0, 1/{p}]")));
    }
    if !comp.set.contains(anchor)? {
        return Err(Error::contract("anchor is not feasible"));
    }
    let oracle = comp.oracle;
    let (f0, g0) = oracle.eval(anchor);
    let (n0, res0) = comp.set.normal_component(anchor, &g0);
    if res0.norm() == 0.0 {
        return Ok(NecgOutput {
            t: anchor.clone(),
            g: n0,
            value_t: f0,
            grad_t: g0,
            iterations: 0,
            l_rel: cfg.l_init,
        });
    }
    let hess = oracle.hessian(anchor);
    let mut eig = SymEigen::new(&hess);
    eig.values.apply(|v| *v = v.max(0.0));
    let hess_psd = &eig.basis * Matrix::from_diagonal(&eig.values) * eig.basis.transpose();
    let geo = BregmanGeometry {
        anchor: anchor.clone(),
        eig,
        hess: hess_psd,
        coef: comp.reg,
        order: p,
    };
    let fp = |z: &Vector, fz: f64, gz: &Vector| -> (f64, Vector) {
        let (pv, pg) = geo.power(&(z - anchor));
        (fz + pv, gz + pg)
    };

    let mut z = anchor.clone();
    let (mut fz, mut gz) = (f0, g0);
    let mut l_rel = cfg.l_init;
    for it in 0..cfg.max_iters {
        let (fpz, gpz) = fp(&z, fz, &gz);
        let rho_z = geo.rho(&z);
        let rho_gz = geo.rho_gradient(&z);
        let (z_next, f_next, g_next) = loop {
            let b = &rho_gz - &gpz / (2.0 * l_rel);
            let cand = geo.prox(&comp.set, &b, cfg.subproblem_tol)?;
            let (fc, gc) = oracle.eval(&cand);
            let d = &cand - &z;
            let beta = geo.rho(&cand) - rho_z - rho_gz.dot(&d);
            let upper = fpz + gpz.dot(&d) + 2.0 * l_rel * beta;
            let lhs = fp(&cand, fc, &gc).0;
            if lhs <= upper + 1e-12 * (1.0 + fpz.abs()) {
                break (cand, fc, gc);
            }
            l_rel *= 2.0;
            if l_rel > 1e12 {
                return Err(Error::Numerical("relative smoothness backtracking diverged".into()));
            }
        };
        let g = match comp.set {
            SimpleSet::WholeSpace { .. } => Vector::zeros(z.len()),
            _ => (&rho_gz - geo.rho_gradient(&z_next)) * (2.0 * l_rel) - &gpz,
        };
        z = z_next;
        fz = f_next;
        gz = g_next;
        let model_res = (fp(&z, fz, &gz).1 + &g).norm();
        let true_res = (&gz + &g).norm();
        if model_res <= gamma * true_res.max(cfg.floor) {
            return Ok(NecgOutput {
                t: z,
                g,
                value_t: fz,
                grad_t: gz,
                iterations: it + 1,
                l_rel,
            });
        }
    }
    Err(Error::NoConvergence {
        method: "necg",
        iterations: cfg.max_iters,
        residual: (fp(&z, fz, &gz).1).norm(),
        target: gamma,
    })
}

#[allow(clippy::too_many_arguments)]
fn bilevel_stage<F: SecondOrderObjective + ?Sized>(
    comp: &CompositeProblem<'_, '_, F>,
    gamma: f64,
    n: usize,
    stage: usize,
    cfg: &TensorConfig,
    start: CallCounts,
    stop_residual: f64,
    run: &mut TensorRun,
) -> Result<f64> {
    let p = comp.order;
    let c_p = ((1.0 - gamma) / comp.reg).powf(1.0 / p as f64);
    let mut psi = EstimatingSequence::new(run.y.clone(), p);
    let mut y = run.y.clone();
    let mut residual = f64::INFINITY;
    let necg_cfg = NecgConfig {
        floor: cfg.necg.floor.max(cfg.residual_tol),
        ..cfg.necg
    };
    for k in 0..n {
        let v = psi.minimizer(&comp.set)?;
        let a_k = bilevel_weight(c_p, p, k);
        let a_next = bilevel_weight(c_p, p, k + 1);
        let (wy, wv) = coupling_weights(a_k, a_next);
        let z = comp.set.project(&(&y * wy + &v * wv));
        let out = necg_solve(comp, &z, gamma, &necg_cfg)
            .map_err(|e| e.with_context(format!("bi-level iteration {k} of stage {stage}")))?;
        y = out.t;
        let sub = &out.grad_t + &out.g;
        residual = comp.set.stationarity_residual(&y, &out.grad_t);
        psi.add(a_next - a_k, out.value_t, &sub, &y);
        run.couplings.push((wy, wv));
        run.weights.push(a_next);
        run.value = out.value_t;
        run.y = y.clone();
        run.push(stage, k + 1, out.value_t, residual, 0.0, since(comp.oracle.counts(), start));
        if residual <= cfg.residual_tol.max(stop_residual) {
            break;
        }
    }
    Ok(residual)
}

/// Estimating-sequence loop over the composite inner solver, for at most `n` iterations.
pub fn bilevel_run<F: SecondOrderObjective + ?Sized>(
    comp: &CompositeProblem<'_, '_, F>,
    y0: &Vector,
    gamma: f64,
    n: usize,
    cfg: &TensorConfig,
) -> Result<TensorRun> {
    check_bilevel_start(comp, y0, gamma)?;
    let start = comp.oracle.counts();
    let mut run = TensorRun::start(y0, f64::NAN);
    if n == 0 {
        run.value = comp.oracle.value(y0);
        return Ok(run);
    }
    bilevel_stage(comp, gamma, n, 0, cfg, start, 0.0, &mut run)?;
    run.stages_planned = 1;
    run.stages_run = 1;
    run.counts = since(comp.oracle.counts(), start);
    Ok(run)
}

fn check_bilevel_start<F: SecondOrderObjective + ?Sized>(
    comp: &CompositeProblem<'_, '_, F>,
    y0: &Vector,
    gamma: f64,
) -> Result<()> {
    check_dim(comp.set.dim(), y0.len())?;
    if !comp.set.contains(y0)? {
        return Err(Error::contract("starting point is not feasible"));
    }
    if !(0.0..=1.0 / comp.order as f64).contains(&gamma) {
        return Err(Error::contract(format!("gamma must lie in [0, 1/{}]", comp.order)));
    }
    Ok(())
}

/// Halving restarts of [`bilevel_run`] for a `mu`-strongly convex smooth part.
pub fn bilevel_restarted<F: SecondOrderObjective + ?Sized>(
    comp: &CompositeProblem<'_, '_, F>,
    y0: &Vector,
    gamma: f64,
    mu: f64,
    eps: f64,
    r: f64,
    cfg: &TensorConfig,
) -> Result<TensorRun> {
    if !(eps > 0.0) || !(mu > 0.0) || !(r > 0.0) {
        return Err(Error::contract("restarted method needs eps, mu, R > 0"));
    }
    check_bilevel_start(comp, y0, gamma)?;
    let start = comp.oracle.counts();
    let p = comp.order;
    let c_p = ((1.0 - gamma) / comp.reg).powf(1.0 / p as f64);
    let stages = restart_stage_count(mu, r, eps);
    let mut run = TensorRun::start(y0, f64::NAN);
    run.stages_planned = stages;
    for stage in 0..stages {
        let r_i = r * 0.5f64.powf(stage as f64 / 2.0);
        let n_i = bilevel_stage_iterations(c_p, p, mu, r_i, cfg.budget_scale);
        let residual = bilevel_stage(comp, gamma, n_i, stage, cfg, start, certificate_level(cfg, mu, eps), &mut run)?;
        run.stages_run = stage + 1;
        if cfg.certificate_exit && residual * residual <= 2.0 * mu * eps {
            break;
        }
    }
    if run.records.is_empty() {
        run.value = comp.oracle.value(y0);
    }
    run.counts = since(comp.oracle.counts(), start);
    Ok(run)
}
