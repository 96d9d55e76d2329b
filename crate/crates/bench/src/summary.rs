//! Aggregation of traces over repetitions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use statrs::statistics::{Data, Median, OrderStatistics};

use crate::trace::{read_trace, TraceRow};
use crate::BenchError;

/// Fields encoded in a run id `method|m=..|n=..|mu_x=..|eps=..|rep=..`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunKey {
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub mu_x: f64,
    pub eps: f64,
    pub rep: usize,
}

impl RunKey {
    pub fn format(&self) -> String {
        format!(
            "{}|m={}|n={}|mu_x={:e}|eps={:e}|rep={}",
            self.method, self.m, self.n, self.mu_x, self.eps, self.rep
        )
    }

    pub fn parse(id: &str) -> Result<Self, BenchError> {
        let bad = |what: &str| BenchError::Config {
            line: None,
            message: format!("run id {id:?}: {what}"),
        };
        let mut parts = id.split('|');
        let method = parts.next().filter(|m| !m.is_empty()).ok_or_else(|| bad("missing method"))?;
        let mut key = RunKey {
            method: method.to_string(),
            m: 0,
            n: 0,
            mu_x: f64::NAN,
            eps: f64::NAN,
            rep: 0,
        };
        let mut seen = 0;
        for part in parts {
            let (k, v) = part.split_once('=').ok_or_else(|| bad("field without '='"))?;
            let num = || v.parse::<f64>().map_err(|_| bad(&format!("bad value for {k}")));
            let int = || v.parse::<usize>().map_err(|_| bad(&format!("bad value for {k}")));
            match k {
                "m" => key.m = int()?,
                "n" => key.n = int()?,
                "mu_x" => key.mu_x = num()?,
                "eps" => key.eps = num()?,
                "rep" => key.rep = int()?,
                _ => return Err(bad(&format!("unknown field {k}"))),
            }
            seen += 1;
        }
        if seen != 5 {
            return Err(bad("expected fields m, n, mu_x, eps, rep"));
        }
        Ok(key)
    }

    /// Cell identity shared by all repetitions.
    fn cell(&self) -> (String, usize, usize, u64, u64) {
        (self.method.clone(), self.m, self.n, self.mu_x.to_bits(), self.eps.to_bits())
    }
}

/// Final state of one run: its last trace row.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub key: RunKey,
    pub final_row: TraceRow,
}

impl RunResult {
    /// `grad_x * m + grad_y * n + hess_y * n^2`.
    pub fn weighted_cost(&self) -> f64 {
        let (m, n) = (self.key.m as f64, self.key.n as f64);
        let r = &self.final_row;
        r.grad_x_calls as f64 * m + r.grad_y_calls as f64 * n + r.hess_y_calls as f64 * n * n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub mu_x: f64,
    pub eps: f64,
    pub runs: usize,
    pub final_gap_median: f64,
    pub final_gap_iqr: f64,
    pub grad_x_median: f64,
    pub grad_y_median: f64,
    pub hess_y_median: f64,
    pub weighted_cost_median: f64,
    pub weighted_cost_iqr: f64,
    /// For mixed methods, median weighted cost over that of `joint_fgm` in the same cell.
    pub relative_cost: Option<f64>,
    /// Machine dependent; absent when no `cells.csv` accompanies the traces.
    pub wall_ms_median: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

fn median_iqr(values: Vec<f64>) -> (f64, f64) {
    let mut data = Data::new(values);
    let med = data.median();
    (med, data.upper_quartile() - data.lower_quartile())
}

/// Groups the final rows of every run by cell and aggregates over
/// repetitions. `wall_ms` maps run ids to wall time where known.
pub fn summarize_runs(runs: &[RunResult], wall_ms: &BTreeMap<String, f64>) -> Summary {
    let mut cells: Vec<(_, Vec<&RunResult>)> = Vec::new();
    for run in runs {
        let cell = run.key.cell();
        match cells.iter_mut().find(|(c, _)| *c == cell) {
            Some((_, members)) => members.push(run),
            None => cells.push((cell, vec![run])),
        }
    }
    let mut rows: Vec<SummaryRow> = cells
        .iter()
        .map(|(_, members)| {
            let key = &members[0].key;
            let col = |f: &dyn Fn(&RunResult) -> f64| members.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (gap, gap_iqr) = median_iqr(col(&|r| r.final_row.f_gap));
            let (cost, cost_iqr) = median_iqr(col(&|r| r.weighted_cost()));
            let walls: Vec<f64> = members.iter().filter_map(|r| wall_ms.get(&r.final_row.run_id).copied()).collect();
            SummaryRow {
                method: key.method.clone(),
                m: key.m,
                n: key.n,
                mu_x: key.mu_x,
                eps: key.eps,
                runs: members.len(),
                final_gap_median: gap,
                final_gap_iqr: gap_iqr,
                grad_x_median: median_iqr(col(&|r| r.final_row.grad_x_calls as f64)).0,
                grad_y_median: median_iqr(col(&|r| r.final_row.grad_y_calls as f64)).0,
                hess_y_median: median_iqr(col(&|r| r.final_row.hess_y_calls as f64)).0,
                weighted_cost_median: cost,
                weighted_cost_iqr: cost_iqr,
                relative_cost: None,
                wall_ms_median: (!walls.is_empty()).then(|| median_iqr(walls).0),
            }
        })
        .collect();
    let joint: Vec<SummaryRow> = rows.iter().filter(|r| r.method == "joint_fgm").cloned().collect();
    for row in rows.iter_mut().filter(|r| r.method.starts_with("mixed")) {
        let base = joint
            .iter()
            .find(|j| j.m == row.m && j.n == row.n && j.mu_x == row.mu_x && j.eps == row.eps);
        row.relative_cost = base.map(|j| row.weighted_cost_median / j.weighted_cost_median);
    }
    Summary { rows }
}

/// Last row of every run id, in order of first appearance.
pub fn final_rows(rows: &[TraceRow]) -> Result<Vec<RunResult>, BenchError> {
    let mut out: Vec<RunResult> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|r| r.final_row.run_id == row.run_id) {
            Some(r) => r.final_row = row.clone(),
            None => out.push(RunResult {
                key: RunKey::parse(&row.run_id)?,
                final_row: row.clone(),
            }),
        }
    }
    Ok(out)
}

/// Trace files matching `pattern`, sorted.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, BenchError> {
    let bad = |message: String| BenchError::Config { line: None, message };
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| bad(format!("bad pattern {pattern:?}: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    paths.sort();
    if paths.is_empty() {
        return Err(bad(format!("no trace files match {pattern:?}")));
    }
    Ok(paths)
}

/// Wall times from the `cells.csv` files next to the traces (in the same
/// directory or one level up), keyed by run id.
fn read_wall_times(paths: &[PathBuf]) -> Result<BTreeMap<String, f64>, BenchError> {
    let mut files: Vec<PathBuf> = paths
        .iter()
        .flat_map(|p| p.ancestors().skip(1).take(2).map(|d| d.join("cells.csv")))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files.dedup();
    let mut out = BTreeMap::new();
    for f in files {
        let mut r = csv::Reader::from_path(&f).map_err(|e| BenchError::Io(format!("{}: {e}", f.display())))?;
        let headers = r.headers().map_err(|e| BenchError::Io(e.to_string()))?.clone();
        let (Some(id), Some(wall)) = (
            headers.iter().position(|h| h == "run_id"),
            headers.iter().position(|h| h == "wall_ms"),
        ) else {
            continue;
        };
        for rec in r.records() {
            let rec = rec.map_err(|e| BenchError::Io(format!("{}: {e}", f.display())))?;
            if let (Some(k), Some(v)) = (rec.get(id), rec.get(wall).and_then(|v| v.parse().ok())) {
                out.insert(k.to_string(), v);
            }
        }
    }
    Ok(out)
}

pub fn summarize(paths: &[PathBuf]) -> Result<Summary, BenchError> {
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_trace(p)?);
    }
    Ok(summarize_runs(&final_rows(&rows)?, &read_wall_times(paths)?))
}

impl Summary {
    pub fn to_csv(&self) -> Result<Vec<u8>, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| BenchError::Io(e.to_string()))?;
        }
        w.into_inner().map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<20} {:>4} {:>4} {:>10} {:>9} {:>4} {:>11} {:>11} {:>12} {:>12} {:>9} {:>10}",
            "method", "m", "n", "mu_x", "eps", "runs", "gap_med", "gap_iqr", "cost_med", "cost_iqr", "rel_cost", "wall_ms"
        );
        for r in &self.rows {
            let rel = r.relative_cost.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            let wall = r.wall_ms_median.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
            let _ = writeln!(
                s,
                "{:<20} {:>4} {:>4} {:>10.3e} {:>9.1e} {:>4} {:>11.3e} {:>11.3e} {:>12.4e} {:>12.4e} {:>9} {:>10}",
                r.method,
                r.m,
                r.n,
                r.mu_x,
                r.eps,
                r.runs,
                r.final_gap_median,
                r.final_gap_iqr,
                r.weighted_cost_median,
                r.weighted_cost_iqr,
                rel,
                wall
            );
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), BenchError> {
        crate::trace::write_atomic(&dir.join("summary.csv"), &self.to_csv()?)?;
        crate::trace::write_atomic(&dir.join("summary.txt"), self.to_table().as_bytes())
    }
}
