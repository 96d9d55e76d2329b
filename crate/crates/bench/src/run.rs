//! Execution of experiment cells.

use std::path::{Path, PathBuf};
use std::time::Instant;

use minmin_core::minmin::{joint_fgm_solve, minmin_solve, InnerSlice, MinMinConfig, MinMinOutput, MinMinProblem};
use minmin_core::tensor::{
    atmi3_restarted, atmi3_run, bilevel_restarted, bilevel_run, CompositeProblem, TensorConfig, TensorRun,
};
use minmin_core::trace::IterRecord;
use minmin_core::zoo::{make_instance, QuadQuarticMinMin};
use minmin_core::{Oracle, SimpleSet, Vector};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method};
use crate::summary::{final_rows, summarize_runs, RunKey, Summary};
use crate::trace::{to_csv, write_atomic, write_trace, TraceRow};
use crate::BenchError;

/// One `(mu_x, method, eps, repetition)` combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub method: Method,
    pub mu_x: f64,
    pub eps: f64,
    pub rep: usize,
    pub seed: u64,
}

impl Cell {
    pub fn run_id(&self, cfg: &ExperimentConfig) -> String {
        RunKey {
            method: self.method.name().to_string(),
            m: cfg.problem.m,
            n: cfg.problem.n,
            mu_x: self.mu_x,
            eps: self.eps,
            rep: self.rep,
        }
        .format()
    }
}

/// Cells in execution order. Repetition `r` uses seed `base + r`.
pub fn cells(cfg: &ExperimentConfig, seed_override: Option<u64>) -> Vec<Cell> {
    let base = seed_override.unwrap_or(cfg.problem.seed);
    let mut out = Vec::new();
    for mu_x in cfg.mu_x_values() {
        for &method in &cfg.methods {
            for &eps in &cfg.eps {
                for rep in 0..cfg.repetitions {
                    out.push(Cell {
                        index: out.len(),
                        method,
                        mu_x,
                        eps,
                        rep,
                        seed: base + rep as u64,
                    });
                }
            }
        }
    }
    out
}

struct RowSink<'a> {
    run_id: &'a str,
    method: Method,
    f_star: f64,
    rows: Vec<TraceRow>,
}

impl RowSink<'_> {
    fn push(&mut self, rec: &IterRecord) {
        self.rows.push(TraceRow {
            run_id: self.run_id.to_string(),
            method: self.method.name().to_string(),
            stage: rec.stage,
            iter: rec.iter,
            f_gap: rec.value - self.f_star,
            grad_x_calls: rec.cost.grad_x,
            grad_y_calls: rec.cost.grad_y,
            hess_y_calls: rec.cost.hess_y,
            delta: rec.delta,
            eps_tilde: rec.eps_tilde,
        });
    }

    /// Outer records followed by a final row holding the answer's gap and total cost.
    fn push_driver(&mut self, out: &MinMinOutput) {
        for rec in &out.run.records {
            self.push(rec);
        }
        let mut last = IterRecord::new(out.run.stages_run, 0, out.value, 0.0);
        last.cost = out.report.counts();
        last.eps_tilde = out.run.records.last().map_or(0.0, |r| r.eps_tilde);
        self.push(&last);
    }

    fn push_tensor(&mut self, run: &TensorRun, keep: impl Fn(&IterRecord) -> bool) {
        for rec in run.records.iter().filter(|r| keep(r)) {
            self.push(rec);
        }
        if run.records.is_empty() {
            self.push(&IterRecord::new(0, 0, run.value, 0.0));
        }
    }
}

fn inner_start(cfg: &ExperimentConfig, set: &SimpleSet) -> Vector {
    set.project(&Vector::from_element(cfg.problem.n, cfg.problem.inner_start))
}

/// Runs one cell and returns its trace rows.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> minmin_core::Result<Vec<TraceRow>> {
    let spec = cfg.instance_spec(cell.method, cell.mu_x, cell.seed);
    let inst = make_instance(&spec)?;
    let run_id = cell.run_id(cfg);
    let mut sink = RowSink {
        run_id: &run_id,
        method: cell.method,
        f_star: inst.reference.value,
        rows: Vec::new(),
    };
    let prob = MinMinProblem::from_zoo(&inst, cfg.order)?;
    let x0 = Vector::zeros(spec.m);
    let y0 = Vector::zeros(spec.n);
    match cell.method {
        Method::MixedUnconstrained | Method::MixedCompact => {
            let out = minmin_solve(&prob, &x0, &y0, cell.eps, &MinMinConfig::default())?;
            sink.push_driver(&out);
        }
        Method::JointFgm => {
            let c = &inst.constants;
            let out = joint_fgm_solve(&prob, &x0, &y0, cell.eps, c.l_xy, c.joint_lambda_min, false)?;
            sink.push_driver(&out);
        }
        Method::Atmi3Only | Method::BilevelOnly => tensor_cell(cfg, cell, &inst, &prob, &mut sink)?,
    }
    Ok(sink.rows)
}

fn tensor_cell(
    cfg: &ExperimentConfig,
    cell: &Cell,
    inst: &QuadQuarticMinMin,
    prob: &MinMinProblem<'_, QuadQuarticMinMin>,
    sink: &mut RowSink<'_>,
) -> minmin_core::Result<()> {
    let x = Vector::zeros(cfg.problem.m);
    let (y_star, f_star) = inst.inner_reference(&x, 1e-13)?;
    sink.f_star = f_star;
    let slice = InnerSlice::new(inst, x);
    let oracle = Oracle::new(&slice);
    let l_p = prob.effective_l_p();
    let mu = inst.constants.mu_y;
    let grid = &cfg.iterations;
    let in_grid = |r: &IterRecord| grid.contains(&r.iter);
    let fixed = TensorConfig {
        eps: cell.eps,
        residual_tol: 0.0,
        ..TensorConfig::default()
    };
    let n_max = grid.iter().copied().max();
    let run = match cell.method {
        Method::Atmi3Only => {
            let y0 = inner_start(cfg, &inst.inner_set);
            let r = (&y0 - &y_star).norm().max(1e-12) * 1.01;
            match n_max {
                Some(n) => atmi3_run(&oracle, &y0, l_p, n, &fixed)?,
                None => atmi3_restarted(&oracle, &y0, l_p, mu, cell.eps, r, &TensorConfig::default())?,
            }
        }
        _ => {
            let comp = CompositeProblem::new(&oracle, inst.inner_set.clone(), cfg.order, l_p)?;
            let y0 = inner_start(cfg, &comp.set);
            let gamma = 1.0 / cfg.order as f64;
            let r = ((&y0 - &y_star).norm().max(1e-12) * 1.01).min(comp.set.diameter());
            match n_max {
                Some(n) => bilevel_run(&comp, &y0, gamma, n, &fixed)?,
                None => bilevel_restarted(&comp, &y0, gamma, mu, cell.eps, r, &TensorConfig::default())?,
            }
        }
    };
    if n_max.is_some() {
        sink.push_tensor(&run, in_grid);
    } else {
        sink.push_tensor(&run, |_| true);
    }
    Ok(())
}

/// Outcome of one cell; `wall_ms` is kept out of the traces.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub run_id: String,
    pub rows: Vec<TraceRow>,
    pub wall_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; `0` uses all cores.
    pub jobs: usize,
    /// Overrides `output.dir`.
    pub out: Option<PathBuf>,
    pub seed_override: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub outcomes: Vec<CellOutcome>,
    pub summary: Summary,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    /// `0` when every cell succeeded, `3` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures() == 0 {
            0
        } else {
            3
        }
    }
}

fn cell_file(dir: &Path, cell: &Cell) -> PathBuf {
    dir.join("traces").join(format!("cell-{:04}.csv", cell.index))
}

/// Runs every cell, writing `traces/cell-NNNN.csv`, the merged `trace.csv`,
/// `cells.csv` (status and wall time) and the summary files under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunReport, BenchError> {
    let dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let todo = cells(cfg, opts.seed_override);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| BenchError::Io(e.to_string()))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        todo.par_iter()
            .map(|cell| {
                let clock = Instant::now();
                let result = run_cell(cfg, cell);
                let wall_ms = clock.elapsed().as_secs_f64() * 1e3;
                let (rows, error) = match result {
                    Ok(rows) => (rows, None),
                    Err(e) => (Vec::new(), Some(e.to_string())),
                };
                CellOutcome {
                    run_id: cell.run_id(cfg),
                    cell: cell.clone(),
                    rows,
                    wall_ms,
                    error,
                }
            })
            .collect()
    });
    for o in &outcomes {
        write_trace(&cell_file(&dir, &o.cell), &o.rows)?;
    }
    let merged: Vec<TraceRow> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    write_atomic(&dir.join("trace.csv"), &to_csv(&merged)?)?;
    write_cells(&dir, &outcomes)?;
    // rounded as in `cells.csv`, so that `summarize` reproduces the same file
    let wall_ms = outcomes.iter().map(|o| (o.run_id.clone(), format!("{:.3}", o.wall_ms).parse().unwrap_or(o.wall_ms))).collect();
    let summary = summarize_runs(&final_rows(&merged)?, &wall_ms);
    summary.write(&dir)?;
    Ok(RunReport { dir, outcomes, summary })
}

fn write_cells(dir: &Path, outcomes: &[CellOutcome]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| BenchError::Io(e.to_string());
    w.write_record(["run_id", "seed", "status", "wall_ms", "error"]).map_err(io)?;
    for o in outcomes {
        let status = if o.error.is_some() { "failed" } else { "ok" };
        w.write_record([
            o.run_id.as_str(),
            &o.cell.seed.to_string(),
            status,
            &format!("{:.3}", o.wall_ms),
            o.error.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
    write_atomic(&dir.join("cells.csv"), &bytes)
}
