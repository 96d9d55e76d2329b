//! Fast gradient method on a simple set, driven by an exact or a
//! `(delta, L)`-inexact first-order oracle, and its restarted version for
//! strongly convex objectives with a controllable oracle accuracy.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Vector;
use crate::model::{InexactOracleOutput, Objective, Oracle};
use crate::sets::SimpleSet;
use crate::trace::{CostCounts, IterRecord};

/// A first-order oracle whose accuracy can be requested per query.
pub trait InexactProvider {
    fn dim(&self) -> usize;

    /// Returns a `(delta', L)`-oracle answer at `x` with `delta' <= delta`.
    fn query(&self, x: &Vector, delta: f64) -> Result<InexactOracleOutput>;

    /// Smallest accuracy the provider can guarantee.
    fn delta_floor(&self) -> f64 {
        0.0
    }

    /// Cumulative cost of all queries so far.
    fn cost(&self) -> CostCounts;

    /// Inner accuracy used by the most recent query, when meaningful.
    fn last_eps_tilde(&self) -> f64 {
        0.0
    }
}

/// Exact gradients from an [`Oracle`], reported as a `(0, L)`-oracle.
pub struct ExactProvider<'o, 'f, F: ?Sized> {
    pub oracle: &'o Oracle<'f, F>,
    pub lipschitz: f64,
}

impl<F: Objective + ?Sized> InexactProvider for ExactProvider<'_, '_, F> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn query(&self, x: &Vector, _delta: f64) -> Result<InexactOracleOutput> {
        let (f, g) = self.oracle.eval(x);
        Ok(InexactOracleOutput::exact(f, g, self.lipschitz))
    }

    fn cost(&self) -> CostCounts {
        CostCounts {
            grad_x: self.oracle.counts().gradients,
            ..CostCounts::default()
        }
    }
}

/// Exact gradient with the value shifted down by a constant `delta`: the
/// simplest valid `(delta, L)`-oracle, useful for exercising inexact bounds.
pub struct ShiftedProvider<'o, 'f, F: ?Sized> {
    pub oracle: &'o Oracle<'f, F>,
    pub lipschitz: f64,
    pub shift: f64,
    calls: Cell<u64>,
}

impl<'o, 'f, F: Objective + ?Sized> ShiftedProvider<'o, 'f, F> {
    pub fn new(oracle: &'o Oracle<'f, F>, lipschitz: f64, shift: f64) -> Self {
        ShiftedProvider {
            oracle,
            lipschitz,
            shift,
            calls: Cell::new(0),
        }
    }
}

impl<F: Objective + ?Sized> InexactProvider for ShiftedProvider<'_, '_, F> {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn query(&self, x: &Vector, _delta: f64) -> Result<InexactOracleOutput> {
        self.calls.set(self.calls.get() + 1);
        let (f, g) = self.oracle.eval(x);
        InexactOracleOutput::new(f - self.shift, g, self.shift, self.lipschitz)
    }

    fn delta_floor(&self) -> f64 {
        self.shift
    }

    fn cost(&self) -> CostCounts {
        CostCounts {
            grad_x: self.calls.get(),
            ..CostCounts::default()
        }
    }
}

/// `(x_Q, g_Q)` with `x_Q = argmin_{x in set} <g, x - x_hat> + gamma/2 ||x - x_hat||^2`
/// and `g_Q = gamma (x_hat - x_Q)`.
pub fn gradient_mapping(set: &SimpleSet, g_at: &Vector, x_hat: &Vector, gamma: f64) -> Result<(Vector, Vector)> {
    let x_q = set.prox_linear_argmin(g_at, x_hat, gamma)?;
    let g_q = (x_hat - &x_q) * gamma;
    Ok((x_q, g_q))
}

/// Positive root of `a^2 = (1 - a) prev^2 + q a`.
pub fn next_alpha(prev: f64, q: f64) -> f64 {
    let b = prev * prev - q;
    let c = prev * prev;
    // a = (-b + sqrt(b^2 + 4c)) / 2, written to avoid cancellation when b > 0
    let disc = (b * b + 4.0 * c).sqrt();
    if b > 0.0 {
        2.0 * c / (b + disc)
    } else {
        0.5 * (-b + disc)
    }
}

/// Starting step `alpha_0`, the positive root of `a^2 = (1 - a) + q a`.
pub fn initial_alpha(q: f64) -> f64 {
    next_alpha(1.0, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FgmConfig {
    /// Keep every iterate in the run output.
    pub keep_iterates: bool,
}

impl Default for FgmConfig {
    fn default() -> Self {
        FgmConfig { keep_iterates: true }
    }
}

/// Output of a (possibly restarted) fast gradient run.
#[derive(Debug, Clone, Default)]
pub struct FgmRun {
    pub x: Vector,
    pub records: Vec<IterRecord>,
    /// `x_0, x_1, ...` across all stages (when kept).
    pub iterates: Vec<Vector>,
    pub alphas: Vec<f64>,
    pub stages_planned: usize,
    pub stages_run: usize,
    pub stage_length: usize,
    /// Accuracy requested from the provider in each stage.
    pub stage_deltas: Vec<f64>,
    /// Iterate at the end of each stage (the start point first).
    pub stage_points: Vec<Vector>,
}

#[allow(clippy::too_many_arguments)]
fn fgm_stage<P: InexactProvider + ?Sized>(
    set: &SimpleSet,
    provider: &P,
    l: f64,
    q: f64,
    n: usize,
    delta: f64,
    stage: usize,
    cfg: &FgmConfig,
    run: &mut FgmRun,
) -> Result<()> {
    let mut x = run.x.clone();
    let mut y = x.clone();
    let mut alpha = initial_alpha(q);
    for i in 0..n {
        let ans = provider
            .query(&y, delta)
            .map_err(|e| e.with_context(format!("fast gradient step {i} of stage {stage}")))?;
        check_dim(y.len(), ans.g_delta.len())?;
        let (x_next, g_q) = gradient_mapping(set, &ans.g_delta, &y, l)?;
        let alpha_next = next_alpha(alpha, q);
        let beta = alpha * (1.0 - alpha) / (alpha * alpha + alpha_next);
        y = &x_next + (&x_next - &x) * beta;
        x = x_next;
        alpha = alpha_next;

        let mut rec = IterRecord::new(stage, i, ans.f_delta, g_q.norm());
        rec.delta = ans.delta;
        rec.eps_tilde = provider.last_eps_tilde();
        rec.cost = provider.cost();
        run.records.push(rec);
        run.alphas.push(alpha);
        if cfg.keep_iterates {
            run.iterates.push(x.clone());
        }
    }
    run.x = x;
    Ok(())
}

fn check_start(set: &SimpleSet, x0: &Vector, l: f64, mu: f64) -> Result<()> {
    check_dim(set.dim(), x0.len())?;
    if !(l > 0.0) || !(mu >= 0.0) || mu > l {
        return Err(Error::contract(format!("need L >= mu >= 0 and L > 0, got L = {l}, mu = {mu}")));
    }
    if !set.contains(x0)? {
        return Err(Error::contract("starting point is not feasible"));
    }
    Ok(())
}

/// `n` fast gradient steps from `x0` with step `1/L`, `q = mu/L`, requesting
/// accuracy `delta` from the provider.
#[allow(clippy::too_many_arguments)]
pub fn fgm_run<P: InexactProvider + ?Sized>(
    set: &SimpleSet,
    provider: &P,
    x0: &Vector,
    l: f64,
    mu: f64,
    n: usize,
    delta: f64,
    cfg: &FgmConfig,
) -> Result<FgmRun> {
    check_start(set, x0, l, mu)?;
    let mut run = FgmRun {
        x: x0.clone(),
        stages_planned: 1,
        stage_length: n,
        ..FgmRun::default()
    };
    if cfg.keep_iterates {
        run.iterates.push(x0.clone());
    }
    run.stage_points.push(x0.clone());
    fgm_stage(set, provider, l, mu / l, n, delta, 0, cfg, &mut run)?;
    run.stages_run = 1;
    run.stage_deltas.push(delta);
    run.stage_points.push(run.x.clone());
    Ok(run)
}

/// Restart stage length `ceil(sqrt(10 L / mu))`.
pub fn restart_stage_length(l: f64, mu: f64) -> usize {
    (10.0 * l / mu).sqrt().ceil() as usize
}

/// Oracle accuracy for a stage of length `n` started within `r` of the minimizer.
pub fn stage_delta(l: f64, r: f64, n: usize) -> f64 {
    let nf = n as f64;
    l * r * r / (nf * nf * (nf + 3.0))
}

/// Restarted fast gradient method with `q = 0`: each stage of length
/// `ceil(sqrt(10 L / mu))` halves the squared distance to the minimizer while
/// the oracle accuracy follows the shrinking radius.
#[allow(clippy::too_many_arguments)]
pub fn fgm_restarted_inexact<P: InexactProvider + ?Sized>(
    set: &SimpleSet,
    provider: &P,
    x0: &Vector,
    l: f64,
    mu: f64,
    eps: f64,
    r: f64,
    cfg: &FgmConfig,
) -> Result<FgmRun> {
    if !(mu > 0.0) || !(eps > 0.0) || !(r > 0.0) {
        return Err(Error::contract("restarted fast gradient needs mu, eps, R > 0"));
    }
    check_start(set, x0, l, mu)?;
    let stages = crate::tensor::restart_stage_count(mu, r, eps);
    let n1 = restart_stage_length(l, mu);
    let mut run = FgmRun {
        x: x0.clone(),
        stages_planned: stages,
        stage_length: n1,
        ..FgmRun::default()
    };
    if cfg.keep_iterates {
        run.iterates.push(x0.clone());
    }
    run.stage_points.push(x0.clone());
    let floor = provider.delta_floor();
    let r_last = r * 0.5f64.powf((stages - 1) as f64 / 2.0);
    let last_delta = stage_delta(l, r_last, n1);
    if last_delta < floor {
        return Err(Error::Config(format!(
            "accuracy eps = {eps:.3e} needs oracle accuracy {last_delta:.3e} below the provider floor {floor:.3e}"
        )));
    }
    for stage in 0..stages {
        let r_i = r * 0.5f64.powf(stage as f64 / 2.0);
        let delta = stage_delta(l, r_i, n1);
        fgm_stage(set, provider, l, 0.0, n1, delta, stage, cfg, &mut run)?;
        run.stage_deltas.push(delta);
        run.stage_points.push(run.x.clone());
        run.stages_run = stage + 1;
    }
    Ok(run)
}
