//! Ratios of kernel quantities to their model bounds over a grid:
//!
//! * `bg`: P / [t (|x|² + t^{1/s})^{−(n+2s)/2}]
//! * `grad`: |∇P| / [|x| t / |x̄|^{n+2s+2}]
//! * `dt_grad`: |∂_t∇P| / [|x| / |x̄|^{n+2s+2}]
//! * `holder`: |∇P(x̄) − ∇P(x̄')| / [|x̄−x̄'|^{2ζ} / |x̄|^{n+1+2ζ}], 2ζ = min{1, 2s},
//!   on pairs with |x̄−x̄'| ≤ |x̄|/2.

use serde::Serialize;

use super::{HeatKernel, KernelSpec};
use crate::error::Result;
use crate::geometry::{sp_dist, sp_norm, SPoint};

/// Points (and Hölder pairs) at which bounds are audited.
#[derive(Debug, Clone)]
pub struct AuditGrid {
    pub points: Vec<SPoint>,
    pub pairs: Vec<(SPoint, SPoint)>,
}

fn logspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (k - 1) as f64).exp()).collect()
}

impl AuditGrid {
    /// |x| ∈ [0.1, 10] × t ∈ [0.01, 10], log-spaced, plus four admissible
    /// Hölder partners per point.
    pub fn standard(n: usize, s: f64) -> Self {
        Self::logarithmic(n, s, (0.1, 10.0), (0.01, 10.0), 12)
    }

    pub fn logarithmic(n: usize, s: f64, r_range: (f64, f64), t_range: (f64, f64), k: usize) -> Self {
        let mut points = Vec::new();
        let mut pairs = Vec::new();
        let diag = 1.0 / (n as f64).sqrt();
        for (i, r) in logspace(r_range.0, r_range.1, k).into_iter().enumerate() {
            for t in logspace(t_range.0, t_range.1, k) {
                let x: Vec<f64> = if i % 2 == 0 || n == 1 {
                    let mut v = vec![0.0; n];
                    v[0] = r;
                    v
                } else {
                    vec![r * diag; n]
                };
                let p = SPoint::new(x, t).expect("finite grid point");
                let norm = sp_norm(&p, s).expect("valid s");
                let step = 0.25 * norm;
                let mut partners = Vec::new();
                for sign in [-1.0, 1.0] {
                    let mut xs = p.x().to_vec();
                    xs[0] += sign * step;
                    partners.push(SPoint::new(xs, t).unwrap());
                    partners.push(SPoint::new(p.x().to_vec(), t + sign * step.powf(2.0 * s)).unwrap());
                }
                for q in partners {
                    pairs.push((p.clone(), q));
                }
                points.push(p);
            }
        }
        Self { points, pairs }
    }
}

/// Extremes of one ratio over the grid.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RatioStats {
    pub sup: f64,
    pub inf: f64,
    pub count: usize,
}

impl RatioStats {
    fn from_values(v: &[f64]) -> Self {
        let sup = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inf = v.iter().copied().fold(f64::INFINITY, f64::min);
        Self { sup, inf, count: v.len() }
    }

    /// sup / inf − 1, the relative spread.
    pub fn spread(&self) -> f64 {
        self.sup / self.inf - 1.0
    }
}

/// One grid row of the audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditRow {
    pub x: Vec<f64>,
    pub t: f64,
    pub p: f64,
    pub bg_ratio: f64,
    pub grad_ratio: f64,
    pub dt_grad_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub n: usize,
    pub s: f64,
    pub bg: RatioStats,
    pub grad: RatioStats,
    pub dt_grad: RatioStats,
    pub holder: RatioStats,
    #[serde(skip)]
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    /// All sups finite and the BG infimum strictly positive.
    pub fn is_sound(&self) -> bool {
        [&self.bg, &self.grad, &self.dt_grad, &self.holder].iter().all(|r| r.sup.is_finite()) && self.bg.inf > 0.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl HeatKernel {
    /// Evaluate all bound ratios over `grid` (points must have t > 0).
    pub fn audit(&self, grid: &AuditGrid) -> Result<AuditReport> {
        let s = self.s();
        let nf = self.n() as f64;
        let mut rows = Vec::with_capacity(grid.points.len());
        for p in &grid.points {
            let r = p.spatial_norm();
            let t = p.t();
            let big = sp_norm(p, s)?;
            let val = self.eval(p);
            let bg_bound = t * (r * r + t.powf(1.0 / s)).powf(-0.5 * (nf + 2.0 * s));
            let g = norm(&self.grad(p)?);
            let grad_bound = r * t / big.powf(nf + 2.0 * s + 2.0);
            let dg = norm(&self.dt_grad(p)?);
            let dt_bound = r / big.powf(nf + 2.0 * s + 2.0);
            rows.push(AuditRow {
                x: p.x().to_vec(),
                t,
                p: val,
                bg_ratio: val / bg_bound,
                grad_ratio: g / grad_bound,
                dt_grad_ratio: dg / dt_bound,
            });
        }
        let zeta2 = (2.0 * s).min(1.0);
        let mut holder = Vec::with_capacity(grid.pairs.len());
        for (p, q) in &grid.pairs {
            let big = sp_norm(p, s)?;
            let d = sp_dist(p, q, s)?;
            if d == 0.0 || d > 0.5 * big {
                continue;
            }
            let gp = self.grad(p)?;
            let gq = self.grad(q)?;
            let diff: Vec<f64> = gp.iter().zip(&gq).map(|(a, b)| a - b).collect();
            holder.push(norm(&diff) / (d.powf(zeta2) / big.powf(nf + 1.0 + zeta2)));
        }
        let col = |f: fn(&AuditRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        Ok(AuditReport {
            n: self.n(),
            s,
            bg: RatioStats::from_values(&col(|r| r.bg_ratio)),
            grad: RatioStats::from_values(&col(|r| r.grad_ratio)),
            dt_grad: RatioStats::from_values(&col(|r| r.dt_grad_ratio)),
            holder: RatioStats::from_values(&holder),
            rows,
        })
    }
}

/// Build the kernel for `spec` and audit it over `grid`.
pub fn kernel_bound_audit(spec: KernelSpec, grid: &AuditGrid) -> Result<AuditReport> {
    HeatKernel::new(spec)?.audit(grid)
}
