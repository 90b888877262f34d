//! One function per subcommand. Each writes its files through [`Outputs`]
//! and returns the fields of the one-line stdout summary.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::config::{Command, RunConfig};
use super::output::{num, Format, Outputs};
use crate::cantor::CantorTree;
use crate::capacity::{run_sweep, sigma, theorem_bound};
use crate::error::{Error, Result};
use crate::geometry::SPoint;
use crate::kernel::{AuditGrid, HeatKernel};
use crate::multiscale::{ScaleAnalysis, LemmaReport};
use crate::operator::{Operator, PieceMeasure, Weights};

/// Exit status and stdout summary of one invocation.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// 0: success; 1: some rows failed (partial outputs written)
    pub exit_code: i32,
    pub summary: Value,
}

/// Runs `cfg.command`, writing reports under `out`.
pub fn execute(cfg: &RunConfig, out: &Path, format: Format, workers: usize) -> Result<Outcome> {
    let mut o = Outputs::new(out, format, cfg.command.name(), cfg.hash(), cfg.seed, workers)?;
    let mut fields = Map::new();
    let exit_code = match cfg.command {
        Command::Gen => gen(cfg, &mut o, &mut fields)?,
        Command::KernelAudit => kernel_audit(cfg, &mut o, &mut fields)?,
        Command::Field => field(cfg, &mut o, &mut fields)?,
        Command::L2norm => l2norm(cfg, &mut o, &mut fields)?,
        Command::Matrix => matrix(cfg, &mut o, &mut fields)?,
        Command::Scales => scales(cfg, &mut o, &mut fields)?,
        Command::CapacitySweep => capacity_sweep(cfg, &mut o, &mut fields)?,
    };
    let mut summary = Map::new();
    summary.insert("command".into(), json!(cfg.command.name()));
    summary.insert("status".into(), json!(if exit_code == 0 { "ok" } else { "partial" }));
    summary.extend(fields);
    summary.insert("outputs".into(), json!(o.written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()));
    summary.insert("config_hash".into(), json!(cfg.hash()));
    summary.insert("wall_time_s".into(), json!(o.elapsed()));
    Ok(Outcome { exit_code, summary: Value::Object(summary) })
}

fn tree_of(cfg: &RunConfig) -> Result<CantorTree> {
    cfg.construction.as_ref().ok_or_else(|| Error::InvalidArgument("no construction given".into()))?.tree()
}

fn coordinate_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    h.push("t".into());
    h
}

fn gen(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let tree = tree_of(cfg)?;
    let k = tree.k();
    let n = tree.n();
    let mut header = vec!["index".to_string()];
    header.extend(coordinate_header(n));
    header.extend(["side", "temporal_extent", "mass"].map(String::from));
    let rows: Vec<Vec<String>> = (0..tree.count(k))
        .map(|i| {
            let mut r = vec![i.to_string()];
            r.extend(tree.corner(k, i).iter().map(|v| num(*v)));
            r.extend([num(tree.side(k)), num(tree.temporal_extent(k)), num(tree.cube_mass(k))]);
            r
        })
        .collect();
    o.csv("cubes", &header, &rows)?;
    let thetas = tree.thetas();
    o.json(
        "construction",
        &json!({
            "params": tree.params(),
            "lambdas": tree.lambdas(),
            "k": k,
            "sides": (0..=k).map(|j| tree.side(j)).collect::<Vec<_>>(),
            "counts": (0..=k).map(|j| tree.count(j)).collect::<Vec<_>>(),
            "thetas": thetas,
            "sigma": sigma(&tree),
            "bound": theorem_bound(&tree),
        }),
    )?;
    f.insert("cubes".into(), json!(tree.count(k)));
    f.insert("theta_k".into(), json!(thetas[k]));
    f.insert("bound".into(), json!(theorem_bound(&tree)));
    Ok(0)
}

fn kernel_audit(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let s = cfg.s.ok_or_else(|| Error::InvalidArgument("s is required".into()))?;
    let kernel = HeatKernel::new(cfg.kernel_spec(cfg.n, s)?)?;
    let report = kernel.audit(&AuditGrid::standard(cfg.n, s))?;
    let mut header = coordinate_header(cfg.n);
    header.extend(["p", "bg_ratio", "grad_ratio", "dt_grad_ratio"].map(String::from));
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut v: Vec<String> = r.x.iter().map(|x| num(*x)).collect();
            v.extend([num(r.t), num(r.p), num(r.bg_ratio), num(r.grad_ratio), num(r.dt_grad_ratio)]);
            v
        })
        .collect();
    o.csv("kernel_audit", &header, &rows)?;
    o.json("kernel_audit", &report)?;
    f.insert("points".into(), json!(report.rows.len()));
    f.insert("bg".into(), json!(report.bg));
    f.insert("bg_spread".into(), json!(report.bg.spread()));
    f.insert("sound".into(), json!(report.is_sound()));
    Ok(0)
}

fn operator_for<'k>(cfg: &RunConfig, kernel: &'k HeatKernel, tree: &CantorTree) -> Result<Operator<'k>> {
    Operator::new(kernel, PieceMeasure::from_tree(tree), cfg.quadrature)
}

fn kernel_for(cfg: &RunConfig, tree: &CantorTree) -> Result<HeatKernel> {
    HeatKernel::new(cfg.kernel_spec(tree.n(), tree.s())?)
}

fn field(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let tree = tree_of(cfg)?;
    let kernel = kernel_for(cfg, &tree)?;
    let op = operator_for(cfg, &kernel, &tree)?;
    let n = tree.n();
    let w = match cfg.field.cube {
        Some(i) => Weights::indicator(op.measure().len(), i),
        None => Weights::ones(),
    };
    let mut header = vec!["point".to_string()];
    header.extend(coordinate_header(n));
    header.extend((0..n).map(|c| format!("f{c}")));
    let mut rows = Vec::new();
    let mut max_norm: f64 = 0.0;
    for (i, c) in cfg.field.points.iter().enumerate() {
        let p = SPoint::new(c[..n].to_vec(), c[n])?;
        let v = if cfg.field.conjugate { op.conj_field(&w, &p, cfg.field.eps)? } else { op.field(&w, &p, cfg.field.eps)? };
        max_norm = max_norm.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
        let mut r = vec![i.to_string()];
        r.extend(c.iter().map(|x| num(*x)));
        r.extend(v.iter().map(|x| num(*x)));
        rows.push(r);
    }
    o.csv("field", &header, &rows)?;
    f.insert("points".into(), json!(rows.len()));
    f.insert("max_norm".into(), json!(max_norm));
    Ok(0)
}

fn l2norm(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let tree = tree_of(cfg)?;
    let kernel = kernel_for(cfg, &tree)?;
    let op = operator_for(cfg, &kernel, &tree)?;
    let a = op.analyze(&Weights::ones(), false)?;
    let conj = op.conj_l2_norm_sq(&Weights::ones())?;
    let n = tree.n();
    let mut header = vec!["cube".to_string()];
    header.extend((0..n).map(|c| format!("avg{c}")));
    let rows: Vec<Vec<String>> = a
        .averages
        .iter()
        .enumerate()
        .map(|(i, v)| std::iter::once(i.to_string()).chain(v.iter().map(|x| num(*x))).collect())
        .collect();
    o.csv("averages", &header, &rows)?;
    let sig = sigma(&tree);
    let report = json!({
        "l2_sq": a.l2_sq,
        "conj_l2_sq": conj,
        "sigma_k": sig,
        "l2_ratio": a.l2_sq / sig,
        "abs_integral": a.abs_integral,
        "signed_integral": a.signed_integral,
        "relative_cancellation": a.relative_cancellation(),
        "flagged_pairs": a.flagged(),
        "quadrature": cfg.quadrature,
    });
    o.json("l2norm", &report)?;
    if let Value::Object(m) = report {
        f.extend(m.into_iter().filter(|(k, _)| k != "quadrature"));
    }
    Ok(0)
}

fn matrix(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let tree = tree_of(cfg)?;
    let kernel = kernel_for(cfg, &tree)?;
    let op = operator_for(cfg, &kernel, &tree)?;
    let m = op.averaged_matrix()?;
    let n = tree.n();
    let mut header = vec!["a".to_string(), "b".to_string()];
    header.extend((0..n).map(|c| format!("m{c}")));
    header.extend(["error", "flagged"].map(String::from));
    let flagged: std::collections::HashSet<_> = m.flagged().iter().copied().collect();
    let mut rows = Vec::with_capacity(m.count() * m.count());
    for a in 0..m.count() {
        for b in 0..m.count() {
            let mut r = vec![a.to_string(), b.to_string()];
            r.extend(m.entry(a, b).iter().map(|x| num(*x)));
            r.push(num(m.error(a, b)));
            r.push(flagged.contains(&(a, b)).to_string());
            rows.push(r);
        }
    }
    o.csv("matrix", &header, &rows)?;
    let proxy = m.op_norm_lower()?;
    let gram = op.op_norm_lower()?;
    let report = json!({
        "cubes": m.count(),
        "opnorm_lower": gram.value,
        "opnorm_proxy": proxy.value,
        "flagged_pairs": m.flagged().len(),
    });
    o.json("matrix", &report)?;
    if let Value::Object(r) = report {
        f.extend(r);
    }
    Ok(0)
}

/// Reads a CSV with columns j, theta, lambda (λ empty on the first row).
fn read_raw_scales(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let err = |e: &dyn std::fmt::Display| Error::InvalidArgument(format!("{}: {e}", path.display()));
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| err(&e))?;
    let headers = r.headers().map_err(|e| err(&e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| err(&format!("missing column `{name}`")));
    let (cj, ct, cl) = (col("j")?, col("theta")?, col("lambda")?);
    let (mut theta, mut lambda) = (Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(&e))?;
        let parse = |i: usize| rec.get(i).unwrap_or("").parse::<f64>().map_err(|e| err(&format!("row {row}: {e}")));
        let j: usize = rec.get(cj).unwrap_or("").parse().map_err(|e| err(&format!("row {row}: {e}")))?;
        if j != row {
            return Err(err(&format!("row {row} has j = {j}; rows must be j = 0, 1, …")));
        }
        theta.push(parse(ct)?);
        if row > 0 {
            lambda.push(parse(cl)?);
        }
    }
    Ok((theta, lambda))
}

fn scales(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let analysis = match &cfg.scales.input {
        Some(path) => {
            let (theta, lambda) = read_raw_scales(path)?;
            ScaleAnalysis::from_raw(theta, lambda, cfg.scales.d, cfg.scale_params())?
        }
        None => ScaleAnalysis::from_tree(&tree_of(cfg)?, cfg.scale_params())?,
    };
    let class = |good: bool| if good { "good" } else { "bad" }.to_string();
    let rows: Vec<Vec<String>> = (0..analysis.theta.len())
        .map(|j| vec![j.to_string(), num(analysis.theta[j]), num(analysis.p[j]), class(analysis.good_scale[j])])
        .collect();
    o.csv("scales", &["j", "theta", "p", "class"].map(String::from), &rows)?;
    let irows: Vec<Vec<String>> = analysis
        .intervals
        .iter()
        .map(|iv| {
            vec![
                iv.start.to_string(),
                iv.end.to_string(),
                num(iv.sigma),
                class(iv.good),
                if iv.long { "long" } else { "short" }.to_string(),
            ]
        })
        .collect();
    o.csv("intervals", &["s_j", "s_next", "sigma", "class", "length"].map(String::from), &irows)?;
    let report: LemmaReport = analysis.lemma_suite();
    let mut warnings = analysis.warnings.clone();
    warnings.extend(report.warnings.iter().cloned());
    o.json("lemmas", &json!({ "params": analysis.params, "stop": analysis.stop, "report": report, "warnings": warnings }))?;
    f.insert("k".into(), json!(analysis.k()));
    f.insert("stop".into(), json!(analysis.stop));
    f.insert("bad_scales".into(), json!(analysis.bad_scales().len()));
    f.insert("lemmas_passed".into(), json!(report.passed));
    Ok(0)
}

fn capacity_sweep(cfg: &RunConfig, o: &mut Outputs, f: &mut Map<String, Value>) -> Result<i32> {
    let seed = cfg.seed.ok_or_else(|| Error::InvalidArgument("seed is required".into()))?;
    let report = run_sweep(&cfg.sweep, cfg.quadrature, &cfg.capacity, seed);
    let text = report.to_csv(cfg.output.timings)?;
    o.csv_text("capacity", &text, report.summary.rows)?;
    let violations = report.violations();
    o.json("capacity", &json!({ "summary": report.summary, "violations": violations, "outcomes": report.outcomes }))?;
    f.insert("rows".into(), json!(report.summary.rows));
    f.insert("failures".into(), json!(report.summary.failures));
    f.insert("violations".into(), json!(violations));
    Ok(if report.summary.failures > 0 { 1 } else { 0 })
}
