//! Experiment configuration, read from TOML.
//!
//! ```toml
//! name = "regime"
//! methods = ["mixed_unconstrained", "joint_fgm"]
//! eps = [1e-4, 1e-5]
//! repetitions = 3
//!
//! [problem]
//! seed = 1
//! m = 64
//! n = 16
//! mu_x = 0.1
//! mu_y = 0.01
//! sigma = 0.01
//! coupling = 0.1
//!
//! [sweep]
//! mu_x = [0.001, 0.01, 0.1]
//!
//! [output]
//! dir = "bench-out"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use minmin_core::zoo::{InnerDomain, InstanceSpec};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MixedUnconstrained,
    MixedCompact,
    JointFgm,
    Atmi3Only,
    BilevelOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MixedUnconstrained => "mixed_unconstrained",
            Method::MixedCompact => "mixed_compact",
            Method::JointFgm => "joint_fgm",
            Method::Atmi3Only => "atmi3_only",
            Method::BilevelOnly => "bilevel_only",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        [
            Method::MixedUnconstrained,
            Method::MixedCompact,
            Method::JointFgm,
            Method::Atmi3Only,
            Method::BilevelOnly,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }

    /// Methods that need a ball-shaped inner domain.
    pub fn needs_ball(self) -> bool {
        matches!(self, Method::MixedCompact | Method::BilevelOnly)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma: f64,
    pub coupling: f64,
    #[serde(default = "default_linear_scale")]
    pub linear_scale: f64,
    #[serde(default)]
    pub soft_weight: f64,
    #[serde(default = "default_outer_radius")]
    pub outer_radius: f64,
    /// Radius of the inner ball. Required by `mixed_compact` and
    /// `bilevel_only`; `joint_fgm` also uses it when present.
    #[serde(default)]
    pub inner_radius: Option<f64>,
    /// Every coordinate of the inner starting point (tensor-only methods).
    #[serde(default)]
    pub inner_start: f64,
}

fn default_linear_scale() -> f64 {
    1.0
}

fn default_outer_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Values of `mu_x` replacing `problem.mu_x`, one problem variant each.
    #[serde(default)]
    pub mu_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub methods: Vec<Method>,
    /// Target accuracies, positive and strictly decreasing.
    pub eps: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Fixed iteration counts for `atmi3_only` and `bilevel_only`. When empty
    /// those methods run their restarted versions down to each `eps`.
    #[serde(default)]
    pub iterations: Vec<usize>,
    /// Order of the inner model used by `mixed_compact` and `bilevel_only`.
    #[serde(default = "default_order")]
    pub order: u32,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_repetitions() -> usize {
    1
}

fn default_order() -> u32 {
    3
}

/// 1-based line of `key` inside `[section]` (or at top level), if present.
fn locate(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = Some(rest.trim_end_matches(']').trim().to_string());
            if section.is_some_and(|s| s == current.as_deref().unwrap_or_default()) && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        if current.as_deref() != section {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| BenchError::Config {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    /// Checks the invariants not expressible in the schema. `text` is the
    /// source, used only to anchor diagnostics.
    pub fn validate(&self, text: &str) -> Result<(), BenchError> {
        let fail = |section: Option<&str>, key: &str, message: String| BenchError::Config {
            line: locate(text, section, key),
            message,
        };
        if self.methods.is_empty() {
            return Err(fail(None, "methods", "methods must not be empty".into()));
        }
        if self.eps.is_empty() {
            return Err(fail(None, "eps", "eps grid must not be empty".into()));
        }
        if self.eps.iter().any(|e| *e <= 0.0 || !e.is_finite()) {
            return Err(fail(None, "eps", "eps values must be positive and finite".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(fail(None, "eps", "eps values must be strictly decreasing".into()));
        }
        if self.repetitions == 0 {
            return Err(fail(None, "repetitions", "repetitions must be at least 1".into()));
        }
        if self.iterations.contains(&0) {
            return Err(fail(None, "iterations", "iteration counts must be positive".into()));
        }
        if !(2..=3).contains(&self.order) {
            return Err(fail(None, "order", format!("order must be 2 or 3, got {}", self.order)));
        }
        if self.sweep.mu_x.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
            return Err(fail(Some("sweep"), "mu_x", "sweep values of mu_x must be positive".into()));
        }
        let p = &self.problem;
        if let Some(r) = p.inner_radius {
            if r <= 0.0 || !r.is_finite() {
                return Err(fail(Some("problem"), "inner_radius", "inner_radius must be positive".into()));
            }
        }
        if let Some(m) = self.methods.iter().find(|m| m.needs_ball()) {
            if p.inner_radius.is_none() {
                return Err(fail(Some("problem"), "", format!("method {m} needs problem.inner_radius")));
            }
        }
        for mu_x in self.mu_x_values() {
            for &method in &self.methods {
                self.instance_spec(method, mu_x, p.seed)
                    .validate()
                    .map_err(|e| fail(Some("problem"), "", e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Values of `mu_x` to run, in order.
    pub fn mu_x_values(&self) -> Vec<f64> {
        if self.sweep.mu_x.is_empty() {
            vec![self.problem.mu_x]
        } else {
            self.sweep.mu_x.clone()
        }
    }

    /// Instance for `method` at the given `mu_x` and seed.
    pub fn instance_spec(&self, method: Method, mu_x: f64, seed: u64) -> InstanceSpec {
        let p = &self.problem;
        let mut spec = InstanceSpec::new(seed, p.m, p.n, mu_x, p.mu_y, p.coupling, p.sigma);
        spec.linear_scale = p.linear_scale;
        spec.soft_weight = p.soft_weight;
        spec.outer_radius = p.outer_radius;
        spec.inner = match (method, p.inner_radius) {
            (Method::MixedCompact | Method::BilevelOnly | Method::JointFgm, Some(radius)) => InnerDomain::Ball { radius },
            _ => InnerDomain::Unconstrained,
        };
        spec
    }
}
