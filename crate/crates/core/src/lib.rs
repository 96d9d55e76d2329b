//! High-order (tensor) methods and inexact first-order oracles for min-min
//! convex problems `min_{x in Q_x} min_{y in Q_y} F(x, y)`.
//!
//! The inner problem in `y` is solved by an accelerated third-order method that
//! needs only gradients and Hessians (or, on compact inner domains, by a
//! bi-level proximal high-order method). Its approximate solution yields a
//! `(delta, L)`-oracle for `f(x) = min_y F(x, y)`, which drives a restarted
//! fast gradient method on the outer set.
//!
//! Module map:
//!
//! * [`model`]: oracles with call counters, Bregman divergences, the
//!   regularized Taylor model and its finite-difference third-order surrogate.
//! * [`sets`]: simple feasible sets with projections and prox-type minimizers.
//! * [`bdgm`]: the Bregman-distance gradient subsolver and its secular equation.
//! * [`tensor`]: accelerated third-order method, restarts, and the composite
//!   bi-level pair for constrained inner problems.
//! * [`fgm`]: fast gradient method with exact or inexact oracles and restarts.
//! * [`minmin`]: the mixed oracle and the end-to-end driver.
//! * [`zoo`]: synthetic quadratic-quartic instances and reference solvers.

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdgm;
pub mod error;
pub mod fgm;
pub mod linalg;
pub mod minmin;
pub mod model;
pub mod sets;
pub mod tensor;
pub mod trace;
pub mod zoo;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use model::{CallCounts, InexactOracleOutput, Objective, Oracle, SecondOrderObjective, SmoothnessSpec};
pub use sets::SimpleSet;
