//! The run configuration: a TOML document with the construction at top level
//! and optional sections per subsystem. Parsing rejects unknown keys;
//! validation reports every violated constraint at once.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cantor::{min_branching, LambdaSpec, SParams};
use crate::capacity::{standard_sweep, CapacityParams, RunSpec};
use crate::kernel::{KernelMethod, KernelSpec};
use crate::multiscale::ScaleParams;
use crate::operator::QuadratureSpec;

/// Operator-based commands refuse constructions with more cubes than this.
pub const MAX_OPERATOR_CUBES: usize = 10_000;
/// `gen` refuses to materialise more cubes than this.
pub const MAX_GEN_CUBES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Gen,
    KernelAudit,
    Field,
    L2norm,
    Matrix,
    Scales,
    CapacitySweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::KernelAudit => "kernel-audit",
            Command::Field => "field",
            Command::L2norm => "l2norm",
            Command::Matrix => "matrix",
            Command::Scales => "scales",
            Command::CapacitySweep => "capacity-sweep",
        }
    }

    fn uses_operator(self) -> bool {
        matches!(self, Command::Field | Command::L2norm | Command::Matrix | Command::CapacitySweep)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Malformed(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// λ as written in the document: a number, a list, or "critical".
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum LambdaInput {
    Constant(f64),
    List(Vec<f64>),
    Named(String),
}

impl LambdaInput {
    fn resolve(&self) -> Result<LambdaSpec, String> {
        match self {
            LambdaInput::Constant(c) => Ok(LambdaSpec::Constant(*c)),
            LambdaInput::List(v) => Ok(LambdaSpec::List(v.clone())),
            LambdaInput::Named(s) if s == "critical" => Ok(LambdaSpec::Critical),
            LambdaInput::Named(s) => Err(format!("lambda = \"{s}\": expected a number, a list or \"critical\"")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn items(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    n: Option<usize>,
    s: Option<f64>,
    d: Option<usize>,
    tau0: Option<f64>,
    lambda: Option<LambdaInput>,
    k: Option<usize>,
    seed: Option<u64>,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    quadrature: QuadratureSpec,
    #[serde(default)]
    analysis: AnalysisSection,
    #[serde(default)]
    capacity: CapacityParams,
    sweep: Option<Vec<RawSweepEntry>>,
    #[serde(default)]
    field: FieldSection,
    #[serde(default)]
    scales: ScalesSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    /// closed form where available when absent
    pub method: Option<KernelMethod>,
    pub quad_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// stopping threshold B
    pub b: f64,
    /// long-interval cutoff N_L
    pub n_l: usize,
    /// small-boundary constant A
    pub a: f64,
    /// growth constant κ
    pub kappa: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let sp = ScaleParams::default();
        Self { b: sp.b, n_l: sp.n_l, a: 10.0, kappa: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweepEntry {
    n: Option<usize>,
    s: f64,
    d: Option<usize>,
    tau0: Option<f64>,
    lambda: OneOrMany<LambdaInput>,
    k: OneOrMany<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    /// evaluation points [x₁, …, x_n, t]
    pub points: Vec<Vec<f64>>,
    /// truncation radius (0: none)
    pub eps: f64,
    /// restrict the source to one generation-k cube
    pub cube: Option<usize>,
    pub conjugate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalesSection {
    /// CSV with columns j, theta, lambda (λ empty on the j = 0 row)
    pub input: Option<PathBuf>,
    /// branching digit for raw input (enables the Young-type bound)
    pub d: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// fill the wall_time_s column of the sweep CSV (breaks byte-identity)
    pub timings: bool,
}

/// A validated configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    /// spatial dimension (also used by kernel-audit without a construction)
    pub n: usize,
    /// order s when given
    pub s: Option<f64>,
    pub construction: Option<RunSpec>,
    pub seed: Option<u64>,
    pub kernel: KernelSection,
    pub quadrature: QuadratureSpec,
    pub analysis: AnalysisSection,
    pub capacity: CapacityParams,
    pub sweep: Vec<RunSpec>,
    pub field: FieldSection,
    pub scales: ScalesSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parse and validate `text` for `command`; `seed` overrides the document.
    pub fn parse(text: &str, command: Command, seed: Option<u64>) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string().trim().to_string()))?;
        let mut v = Vec::new();
        let seed = seed.or(raw.seed);

        let lambda = match raw.lambda.as_ref().map(LambdaInput::resolve) {
            Some(Ok(l)) => Some(l),
            Some(Err(e)) => {
                v.push(e);
                None
            }
            None => None,
        };
        let construction = match (raw.s, lambda, raw.k) {
            (Some(s), Some(lambda), Some(k)) => {
                Some(RunSpec { n: raw.n.unwrap_or(1), s, d: raw.d, tau0: raw.tau0, lambda, k })
            }
            _ => None,
        };

        match command {
            Command::KernelAudit => {
                match raw.s {
                    None => v.push("s is required".into()),
                    Some(s) if !(s > 0.0 && s <= 1.0) => v.push(format!("s = {s} must lie in (0, 1]")),
                    Some(_) => {}
                }
                if raw.n == Some(0) {
                    v.push("n must be at least 1".into());
                }
            }
            Command::Scales if raw.scales.input.is_some() => {
                if construction.is_some() {
                    v.push("give either a construction (s, lambda, k) or scales.input, not both".into());
                }
            }
            Command::CapacitySweep if raw.sweep.is_some() || construction.is_none() => {}
            _ => match &construction {
                Some(c) => v.extend(construction_violations(c, command)),
                None => {
                    for (name, present) in [("s", raw.s.is_some()), ("lambda", raw.lambda.is_some()), ("k", raw.k.is_some())] {
                        if !present {
                            v.push(format!("{name} is required for `{}`", command.name()));
                        }
                    }
                }
            },
        }

        let mut sweep = Vec::new();
        if command == Command::CapacitySweep {
            if let Some(entries) = &raw.sweep {
                for (i, e) in entries.iter().enumerate() {
                    for l in e.lambda.items() {
                        match l.resolve() {
                            Ok(lambda) => {
                                for k in e.k.items() {
                                    sweep.push(RunSpec { n: e.n.unwrap_or(1), s: e.s, d: e.d, tau0: e.tau0, lambda: lambda.clone(), k });
                                }
                            }
                            Err(msg) => v.push(format!("sweep[{i}]: {msg}")),
                        }
                    }
                }
                if sweep.is_empty() {
                    v.push("sweep lists no runs".into());
                }
            } else if let Some(c) = &construction {
                sweep = (1..=c.k).map(|k| RunSpec { k, ..c.clone() }).collect();
                if sweep.is_empty() {
                    v.push("capacity-sweep needs k ≥ 1".into());
                }
            } else {
                sweep = standard_sweep();
            }
            for (i, r) in sweep.iter().enumerate() {
                v.extend(construction_violations(r, command).into_iter().map(|m| format!("sweep run {i}: {m}")));
            }
            if seed.is_none() {
                v.push("seed is required for capacity-sweep (sampled estimators)".into());
            }
        }

        if let Some(tol) = raw.kernel.quad_tol {
            if !(tol > 0.0 && tol < 1.0) {
                v.push(format!("kernel.quad_tol = {tol} must lie in (0, 1)"));
            }
        }
        if let Err(e) = raw.quadrature.validate() {
            v.push(format!("quadrature: {e}"));
        }
        let sp = ScaleParams { b: raw.analysis.b, n_l: raw.analysis.n_l };
        if let Err(e) = sp.validate() {
            v.push(format!("analysis: {e}"));
        }
        if !(raw.analysis.a > 0.0) {
            v.push(format!("analysis.a = {} must be positive", raw.analysis.a));
        }
        if !(raw.analysis.kappa > 0.0) {
            v.push(format!("analysis.kappa = {} must be positive", raw.analysis.kappa));
        }
        v.extend(raw.capacity.violations().into_iter().map(|m| format!("capacity: {m}")));

        if command == Command::Field {
            let n = raw.n.unwrap_or(1);
            if raw.field.points.is_empty() {
                v.push("field.points must list at least one point".into());
            }
            for (i, p) in raw.field.points.iter().enumerate() {
                if p.len() != n + 1 || p.iter().any(|c| !c.is_finite()) {
                    v.push(format!("field.points[{i}] must hold {} finite coordinates", n + 1));
                }
            }
            if !(raw.field.eps >= 0.0) {
                v.push(format!("field.eps = {} must be non-negative", raw.field.eps));
            }
            if let (Some(i), Some(c)) = (raw.field.cube, &construction) {
                if let Ok(p) = c.params() {
                    let count = p.branching().checked_pow(c.k as u32).unwrap_or(usize::MAX);
                    if i >= count {
                        v.push(format!("field.cube = {i} but generation {} has {count} cubes", c.k));
                    }
                }
            }
        }
        if raw.scales.d.is_some() && raw.scales.input.is_none() {
            v.push("scales.d only applies to raw scales.input".into());
        }

        if !v.is_empty() {
            return Err(ConfigError::Invalid(v));
        }
        Ok(Self {
            command,
            n: raw.n.unwrap_or(1),
            s: raw.s,
            construction,
            seed,
            kernel: raw.kernel,
            quadrature: raw.quadrature,
            analysis: raw.analysis,
            capacity: raw.capacity,
            sweep,
            field: raw.field,
            scales: raw.scales,
            output: raw.output,
        })
    }

    pub fn scale_params(&self) -> ScaleParams {
        ScaleParams { b: self.analysis.b, n_l: self.analysis.n_l }
    }

    /// Kernel for (n, s) honouring the kernel section.
    pub fn kernel_spec(&self, n: usize, s: f64) -> crate::Result<KernelSpec> {
        let auto = KernelSpec::auto(n, s)?;
        KernelSpec::new(n, s, self.kernel.method.unwrap_or(auto.method), self.kernel.quad_tol.unwrap_or(auto.quad_tol))
    }

    /// SHA-256 of the canonical JSON form of the validated configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Every constraint a single construction violates.
fn construction_violations(c: &RunSpec, command: Command) -> Vec<String> {
    let mut v = Vec::new();
    if c.n == 0 {
        v.push("n must be at least 1".into());
    }
    if !(c.s > 0.5 && c.s <= 1.0) {
        v.push(format!(
            "s = {} is outside (1/2, 1]: the gradient kernel is only integrable against (n+1)-dimensional measures for s > 1/2",
            c.s
        ));
        return v;
    }
    if let Ok(min_d) = min_branching(c.s) {
        if let Some(d) = c.d {
            if d < min_d {
                v.push(format!("d = {d} is below the minimal branching {min_d} for s = {}", c.s));
            }
        }
    }
    let d = c.d.unwrap_or_else(|| min_branching(c.s).unwrap_or(2));
    let tau0 = c.tau0.unwrap_or(0.9 / d as f64);
    if !(tau0 > 0.0 && tau0 < 1.0 / d as f64) {
        v.push(format!("tau0 = {tau0} must lie in (0, 1/d) = (0, {})", 1.0 / d as f64));
    }
    if let Ok(p) = SParams::new(c.n.max(1), c.s, Some(d.max(2)), Some(tau0.clamp(1e-300, 0.999 / d.max(2) as f64))) {
        match c.lambda.resolve(&p, c.k) {
            Ok(ls) => {
                for (j, l) in ls.iter().enumerate() {
                    if !(*l > 0.0) {
                        v.push(format!("λ_{} = {l} must be positive", j + 1));
                    } else if *l >= 1.0 / d as f64 {
                        v.push(format!("λ_{} = {l} is not below 1/d = {}", j + 1, 1.0 / d as f64));
                    } else if *l > tau0 {
                        v.push(format!("λ_{} = {l} exceeds tau0 = {tau0}", j + 1));
                    }
                }
            }
            Err(e) => v.push(e.to_string()),
        }
        let count = (p.branching() as f64).powi(c.k as i32);
        let limit = if command.uses_operator() { MAX_OPERATOR_CUBES } else { MAX_GEN_CUBES };
        if count > limit as f64 {
            v.push(format!("k = {} gives {count} cubes, above the limit {limit} for `{}`", c.k, command.name()));
        }
    }
    v
}
