//! One report row per (n, s, d, λ, k) construction, plus sweep-level spreads.

use std::time::Instant;

use serde::Serialize;

use super::{bmo_estimate, corner_constant, gamma_aux, gamma_plus_lower, sigma, theorem_bound, CapacityParams};
use crate::cantor::{CantorTree, LambdaSpec, SParams};
use crate::error::Result;
use crate::geometry::Corner;
use crate::kernel::{HeatKernel, KernelSpec};
use crate::operator::{Operator, PieceMeasure, QuadratureSpec, Weights};
use crate::rng::{substream_rng, Stream};

pub const CSV_HEADER: [&str; 18] = [
    "run_id",
    "n",
    "s",
    "d",
    "lambda_spec",
    "k",
    "sigma_k",
    "bound",
    "l2_sq",
    "l2_ratio",
    "opnorm_lower",
    "gamma_aux",
    "supnorm",
    "gamma_plus_lower",
    "corner_const",
    "bmo_est",
    "quad_order",
    "wall_time_s",
];

/// One construction to analyse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub n: usize,
    pub s: f64,
    pub d: Option<usize>,
    pub tau0: Option<f64>,
    #[serde(serialize_with = "label")]
    pub lambda: LambdaSpec,
    pub k: usize,
}

fn label<S: serde::Serializer>(l: &LambdaSpec, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&l.label())
}

impl RunSpec {
    pub fn params(&self) -> Result<SParams> {
        SParams::new(self.n, self.s, self.d, self.tau0)
    }

    pub fn tree(&self) -> Result<CantorTree> {
        let p = self.params()?;
        CantorTree::build(p, &self.lambda.resolve(&p, self.k)?, self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub run_id: usize,
    pub n: usize,
    pub s: f64,
    pub d: usize,
    pub lambda_spec: String,
    pub k: usize,
    pub sigma_k: f64,
    pub bound: f64,
    pub l2_sq: f64,
    pub l2_ratio: f64,
    pub opnorm_lower: f64,
    pub gamma_aux: f64,
    pub supnorm: f64,
    pub gamma_plus_lower: f64,
    pub corner_const: f64,
    pub bmo_est: f64,
    pub quad_order: usize,
    pub wall_time_s: f64,
    // diagnostics (JSON only)
    /// the averaged-matrix norm, a smaller proxy for opnorm_lower
    pub opnorm_proxy: f64,
    pub growth_constant: f64,
    pub corner_max: f64,
    /// |∫𝒫μ dμ| / ∫|𝒫μ| dμ
    pub cancellation: f64,
    /// largest error estimate of an averaged-matrix entry
    pub max_pair_error: f64,
    pub flagged_pairs: usize,
    pub conj_l2_sq: f64,
    pub gamma_aux_ratio: f64,
    pub gamma_plus_ratio: f64,
    pub bmo_ratio: f64,
}

impl CapacityRow {
    fn csv_record(&self, timings: bool) -> Vec<String> {
        let f = |v: f64| format!("{v:e}");
        vec![
            self.run_id.to_string(),
            self.n.to_string(),
            self.s.to_string(),
            self.d.to_string(),
            self.lambda_spec.clone(),
            self.k.to_string(),
            f(self.sigma_k),
            f(self.bound),
            f(self.l2_sq),
            f(self.l2_ratio),
            f(self.opnorm_lower),
            f(self.gamma_aux),
            f(self.supnorm),
            f(self.gamma_plus_lower),
            f(self.corner_const),
            f(self.bmo_est),
            self.quad_order.to_string(),
            if timings { format!("{:.3}", self.wall_time_s) } else { String::new() },
        ]
    }
}

/// A row or the reason it could not be computed.
#[derive(Debug, Clone, Serialize)]
pub struct RowOutcome {
    pub run_id: usize,
    pub spec: RunSpec,
    pub row: Option<CapacityRow>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    /// max/min
    pub spread: f64,
}

impl Spread {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut any = false;
        for v in values {
            any = true;
            min = min.min(v);
            max = max.max(v);
        }
        (any && min > 0.0).then(|| Spread { min, max, spread: max / min })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: usize,
    pub spread_limit: f64,
    pub l2_ratio: Option<Spread>,
    pub gamma_aux_ratio: Option<Spread>,
    pub gamma_plus_ratio: Option<Spread>,
    pub corner_const: Option<Spread>,
    pub bmo_ratio: Option<Spread>,
    /// max |bound·(k+1)^{1/2} − 1| over rows with θ ≡ 1
    pub critical_bound_dev: Option<f64>,
    /// every computed entry positive and finite
    pub all_positive_finite: bool,
    /// (s, λ, k) where gamma_plus_lower grew by more than the slack from k−1
    pub monotone_violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub outcomes: Vec<RowOutcome>,
    pub summary: SweepSummary,
}

impl SweepReport {
    pub fn rows(&self) -> impl Iterator<Item = &CapacityRow> {
        self.outcomes.iter().filter_map(|o| o.row.as_ref())
    }

    /// CSV with the fixed header; the timing column stays empty unless
    /// `timings`, so that reruns are byte-identical.
    pub fn to_csv(&self, timings: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| crate::error::Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(CSV_HEADER).map_err(io)?;
        for o in &self.outcomes {
            if let Some(r) = &o.row {
                w.write_record(r.csv_record(timings)).map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| crate::error::Error::InvalidArgument(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Whether the sweep meets every stated property at `spread_limit`.
    pub fn violations(&self) -> Vec<String> {
        let s = &self.summary;
        let mut v = Vec::new();
        if s.failures > 0 {
            v.push(format!("{} rows failed", s.failures));
        }
        if !s.all_positive_finite {
            v.push("some entry is not positive and finite".into());
        }
        for (name, sp) in [("l2_ratio", s.l2_ratio), ("gamma_aux_ratio", s.gamma_aux_ratio), ("gamma_plus_ratio", s.gamma_plus_ratio)] {
            match sp {
                Some(sp) if sp.spread <= s.spread_limit => {}
                Some(sp) => v.push(format!("{name} spread {:.3} exceeds {}", sp.spread, s.spread_limit)),
                None => v.push(format!("{name} has no positive values")),
            }
        }
        if let Some(dev) = s.critical_bound_dev {
            if dev > 1e-12 {
                v.push(format!("critical rows deviate from (k+1)^(-1/2) by {dev:e}"));
            }
        }
        v
    }
}

/// Every quantity of one report row. `seed` and `run_id` select independent
/// random streams, so rows can be recomputed standalone.
pub fn compute_row(
    kernel: &HeatKernel,
    spec: &RunSpec,
    run_id: usize,
    quad: QuadratureSpec,
    params: &CapacityParams,
    seed: u64,
) -> Result<CapacityRow> {
    let start = Instant::now();
    let tree = spec.tree()?;
    let op = Operator::new(kernel, PieceMeasure::from_tree(&tree), quad)?;
    let sig = sigma(&tree);
    let root = sig.sqrt();

    let analysis = op.analyze(&Weights::ones(), true)?;
    let aux = gamma_aux(&op)?;
    let id = run_id as u64;
    let plus = gamma_plus_lower(
        &op,
        &tree,
        params,
        &mut substream_rng(seed, Stream::SupNorm, id),
        &mut substream_rng(seed, Stream::Growth, id),
    )?;
    let corner = corner_constant(&op, &tree, Corner::UpperRight, params.corner_samples, &mut substream_rng(seed, Stream::Corner, id))?;
    let nodes = analysis.nodes.as_deref().expect("nodes were requested");
    let bmo = bmo_estimate(&tree, op.measure(), nodes, 1.0, params.bmo_rho, params.bmo_samples, &mut substream_rng(seed, Stream::Bmo, id))?;
    let conj = op.conj_l2_norm_sq(&Weights::ones())?;
    let count = analysis.matrix.count();
    let max_pair_error =
        (0..count).flat_map(|a| (0..count).map(move |b| (a, b))).map(|(a, b)| analysis.matrix.error(a, b)).fold(0.0, f64::max);

    Ok(CapacityRow {
        run_id,
        n: spec.n,
        s: spec.s,
        d: tree.params().d,
        lambda_spec: spec.lambda.label(),
        k: spec.k,
        sigma_k: sig,
        bound: theorem_bound(&tree),
        l2_sq: analysis.l2_sq,
        l2_ratio: analysis.l2_sq / sig,
        opnorm_lower: aux.opnorm_lower,
        gamma_aux: aux.gamma_aux,
        supnorm: plus.supnorm,
        gamma_plus_lower: plus.value,
        corner_const: corner.value,
        bmo_est: bmo.value,
        quad_order: quad.base_order,
        wall_time_s: start.elapsed().as_secs_f64(),
        opnorm_proxy: aux.opnorm_proxy,
        growth_constant: plus.growth_constant,
        corner_max: corner.max,
        cancellation: analysis.relative_cancellation(),
        max_pair_error,
        flagged_pairs: analysis.flagged(),
        conj_l2_sq: conj,
        gamma_aux_ratio: aux.gamma_aux * root,
        gamma_plus_ratio: plus.value * root,
        bmo_ratio: bmo.value / root,
    })
}

/// Rows are computed one after another, each using the parallel operator
/// passes; a failing row is recorded and the sweep continues.
pub fn run_sweep(specs: &[RunSpec], quad: QuadratureSpec, params: &CapacityParams, seed: u64) -> SweepReport {
    let mut kernels: Vec<((usize, u64), HeatKernel)> = Vec::new();
    let mut outcomes = Vec::with_capacity(specs.len());
    for (run_id, spec) in specs.iter().enumerate() {
        let key = (spec.n, spec.s.to_bits());
        let row = (|| {
            if !kernels.iter().any(|(k, _)| *k == key) {
                kernels.push((key, HeatKernel::new(KernelSpec::auto(spec.n, spec.s)?)?));
            }
            let kernel = &kernels.iter().find(|(k, _)| *k == key).expect("inserted").1;
            compute_row(kernel, spec, run_id, quad, params, seed)
        })();
        outcomes.push(match row {
            Ok(r) => RowOutcome { run_id, spec: spec.clone(), row: Some(r), error: None },
            Err(e) => RowOutcome { run_id, spec: spec.clone(), row: None, error: Some(e.to_string()) },
        });
    }
    let summary = summarize(&outcomes, params);
    SweepReport { outcomes, summary }
}

fn summarize(outcomes: &[RowOutcome], params: &CapacityParams) -> SweepSummary {
    let rows: Vec<&CapacityRow> = outcomes.iter().filter_map(|o| o.row.as_ref()).collect();
    let all_positive_finite = rows.iter().all(|r| {
        [r.sigma_k, r.bound, r.l2_sq, r.opnorm_lower, r.gamma_aux, r.supnorm, r.gamma_plus_lower, r.corner_const, r.bmo_est]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    });
    let critical: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.spec.lambda == LambdaSpec::Critical)
        .filter_map(|o| o.row.as_ref())
        .map(|r| (r.bound * ((r.k + 1) as f64).sqrt() - 1.0).abs())
        .collect();
    let mut monotone_violations = Vec::new();
    for r in &rows {
        let prev = rows.iter().find(|p| p.n == r.n && p.s == r.s && p.d == r.d && p.lambda_spec == r.lambda_spec && p.k + 1 == r.k);
        if let Some(p) = prev {
            if r.gamma_plus_lower > p.gamma_plus_lower * (1.0 + params.monotone_slack) {
                monotone_violations.push(format!(
                    "s={} λ={} k={}: {} > {} at k−1",
                    r.s, r.lambda_spec, r.k, r.gamma_plus_lower, p.gamma_plus_lower
                ));
            }
        }
    }
    SweepSummary {
        rows: rows.len(),
        failures: outcomes.len() - rows.len(),
        spread_limit: params.spread_limit,
        l2_ratio: Spread::of(rows.iter().map(|r| r.l2_ratio)),
        gamma_aux_ratio: Spread::of(rows.iter().map(|r| r.gamma_aux_ratio)),
        gamma_plus_ratio: Spread::of(rows.iter().map(|r| r.gamma_plus_ratio)),
        corner_const: Spread::of(rows.iter().map(|r| r.corner_const)),
        bmo_ratio: Spread::of(rows.iter().map(|r| r.bmo_ratio)),
        critical_bound_dev: (!critical.is_empty()).then(|| critical.iter().cloned().fold(0.0, f64::max)),
        all_positive_finite,
        monotone_violations,
    }
}

/// The standard sweep: s = 1 with λ ∈ {0.25, 0.3, λ* ≈ 0.40825}, k = 1..3,
/// and s = 0.75 with λ ∈ {0.2, 0.3}, k = 1..2 (n = 1, minimal d). λ* is the
/// exact critical ratio, for which θ ≡ 1.
pub fn standard_sweep() -> Vec<RunSpec> {
    let mut out = Vec::new();
    let run = |s: f64, lambda: LambdaSpec, k: usize| RunSpec { n: 1, s, d: None, tau0: None, lambda, k };
    for l in [LambdaSpec::Constant(0.25), LambdaSpec::Constant(0.3), LambdaSpec::Critical] {
        for k in 1..=3 {
            out.push(run(1.0, l.clone(), k));
        }
    }
    for l in [0.2, 0.3].map(LambdaSpec::Constant) {
        for k in 1..=2 {
            out.push(run(0.75, l.clone(), k));
        }
    }
    out
}
