//! Per-iteration records emitted by the solvers.

use serde::{Deserialize, Serialize};

/// Cumulative oracle cost split the way the benchmark cost model needs it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounts {
    /// Gradient calls in the outer variable (or joint gradients for joint methods).
    pub grad_x: u64,
    pub grad_y: u64,
    pub hess_y: u64,
}

impl CostCounts {
    /// Cost in scalar-derivative units: an `x`-gradient costs `dim_x`, a
    /// `y`-gradient `dim_y` and a `y`-Hessian `dim_y^2`.
    pub fn weighted(&self, dim_x: usize, dim_y: usize) -> f64 {
        self.grad_x as f64 * dim_x as f64 + self.grad_y as f64 * dim_y as f64 + self.hess_y as f64 * (dim_y * dim_y) as f64
    }
}

impl std::ops::Add for CostCounts {
    type Output = CostCounts;
    fn add(self, o: CostCounts) -> CostCounts {
        CostCounts {
            grad_x: self.grad_x + o.grad_x,
            grad_y: self.grad_y + o.grad_y,
            hess_y: self.hess_y + o.hess_y,
        }
    }
}

impl std::ops::AddAssign for CostCounts {
    fn add_assign(&mut self, o: CostCounts) {
        *self = *self + o;
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub stage: usize,
    pub iter: usize,
    /// Objective value reported by the oracle at the iterate (may be inexact).
    pub value: f64,
    /// Method-specific residual (model gradient norm, gradient-mapping norm, ...).
    pub residual: f64,
    pub delta: f64,
    pub eps_tilde: f64,
    pub cost: CostCounts,
}

impl IterRecord {
    pub fn new(stage: usize, iter: usize, value: f64, residual: f64) -> Self {
        IterRecord {
            stage,
            iter,
            value,
            residual,
            delta: 0.0,
            eps_tilde: 0.0,
            cost: CostCounts::default(),
        }
    }
}
