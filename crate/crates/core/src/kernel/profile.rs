//! Tabulated radial profiles Φ_m with cubic Hermite interpolation in
//! (ln r, ln Φ). Node slopes come from the exact identity
//! Φ_m'(r) = −2π r Φ_{m+2}(r), so the interpolant is C¹ and fourth-order.

use std::f64::consts::PI;

use libm::lgamma as ln_gamma;
use rayon::prelude::*;

use super::series::{phi_at_zero, phi_direct, small_series, tail_series};
use crate::error::{Error, Result};

pub(crate) const R_MIN: f64 = 1e-3;
pub(crate) const R_MAX: f64 = 1e3;
const NODES: usize = 2400;
/// Below this fraction of Φ(0) a purely oscillatory quadrature has no
/// relative accuracy left; tables for the Gaussian case stop there.
const GAUSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Source {
    /// (4π)^{-m/2} e^{-r²/4}
    Gauss,
    /// c_m / (1+r²)^{(m+1)/2}
    Poisson { c: f64 },
    Table(Table),
}

#[derive(Debug, Clone)]
struct Table {
    ln_r0: f64,
    h: f64,
    ln_phi: Vec<f64>,
    slope: Vec<f64>,
    r_hi: f64,
}

/// The radial profile Φ_m for a fixed s: P^{(m)}(x,t) = t^{-m/2s} Φ_m(|x| t^{-1/2s}).
#[derive(Debug, Clone)]
pub struct Profile {
    m: usize,
    s: f64,
    alpha: f64,
    tol: f64,
    phi0: f64,
    source: Source,
}

impl Profile {
    /// Closed-form profile; only s = 1 (Gaussian) and s = 1/2 (Poisson).
    pub fn closed_form(m: usize, s: f64) -> Result<Self> {
        let source = if s == 1.0 {
            Source::Gauss
        } else if s == 0.5 {
            let mf = m as f64;
            Source::Poisson { c: (ln_gamma(0.5 * (mf + 1.0)) - 0.5 * (mf + 1.0) * PI.ln()).exp() }
        } else {
            return Err(Error::Unsupported(format!("no closed form for s = {s}")));
        };
        let alpha = 2.0 * s;
        Ok(Self { m, s, alpha, tol: 0.0, phi0: phi_at_zero(m, alpha), source })
    }

    /// Numerical profile tabulated from the Fourier representation.
    pub fn tabulate(m: usize, s: f64, tol: f64) -> Result<Self> {
        let alpha = 2.0 * s;
        let phi0 = phi_at_zero(m, alpha);
        let ln_r0 = R_MIN.ln();
        let h = (R_MAX.ln() - ln_r0) / (NODES - 1) as f64;
        let direct_tol = (0.01 * tol).max(1e-13);
        // In the Gaussian case Φ_m(r) ≤ Φ_m(0) e^{-r²/4}, so nodes beyond
        // r = 2·sqrt(ln(1/floor)) + 1 can never clear the floor.
        let nodes = if alpha >= 2.0 {
            let r_cut: f64 = 2.0 * (-GAUSS_FLOOR.ln()).sqrt() + 1.0;
            (((r_cut.ln() - ln_r0) / h).ceil() as usize + 1).min(NODES)
        } else {
            NODES
        };
        let values: Vec<Result<(f64, f64)>> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let r = (ln_r0 + h * i as f64).exp();
                Ok((phi_direct(m, alpha, r, direct_tol)?, phi_direct(m + 2, alpha, r, direct_tol)?))
            })
            .collect();
        let mut ln_phi = Vec::with_capacity(NODES);
        let mut slope = Vec::with_capacity(NODES);
        let floor = if alpha >= 2.0 { GAUSS_FLOOR * phi0 } else { 0.0 };
        let mut r_hi = R_MAX;
        for (i, v) in values.into_iter().enumerate() {
            let (p, p2) = v?;
            let r = (ln_r0 + h * i as f64).exp();
            if p <= floor {
                if alpha >= 2.0 && i > 0 {
                    r_hi = (ln_r0 + h * (i - 1) as f64).exp();
                    break;
                }
                return Err(Error::Quadrature {
                    context: format!("profile m={m}, s={s} not positive at r={r}"),
                    tol,
                    err: p.abs(),
                });
            }
            if let Some(&last) = ln_phi.last() {
                if p.ln() > last + 1e-12 {
                    return Err(Error::Quadrature {
                        context: format!("profile m={m}, s={s} not decreasing at r={r}"),
                        tol,
                        err: p.ln() - last,
                    });
                }
            }
            ln_phi.push(p.ln());
            slope.push(-2.0 * PI * r * r * p2 / p);
        }
        Ok(Self { m, s, alpha, tol, phi0, source: Source::Table(Table { ln_r0, h, ln_phi, slope, r_hi }) })
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn at_zero(&self) -> f64 {
        self.phi0
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.source, Source::Table(_))
    }

    /// Φ_m(r) for r ≥ 0.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.source {
            Source::Gauss => (4.0 * PI).powf(-0.5 * self.m as f64) * (-0.25 * r * r).exp(),
            Source::Poisson { c } => c * (1.0 + r * r).powf(-0.5 * (self.m as f64 + 1.0)),
            Source::Table(t) => self.table_value(t, r),
        }
    }

    fn table_value(&self, t: &Table, r: f64) -> f64 {
        if r < R_MIN {
            return small_series(self.m, self.alpha, r, 1e-13)
                .or_else(|| phi_direct(self.m, self.alpha, r, 1e-13).ok())
                .unwrap_or(self.phi0);
        }
        if r > t.r_hi {
            if let Some(v) = tail_series(self.m, self.alpha, r, 1e-13) {
                return v;
            }
            if self.alpha >= 2.0 {
                // Gaussian case: below GAUSS_FLOOR·Φ(0) the oscillatory quadrature is pure noise
                return 0.0;
            }
            // beyond the table only absolute accuracy is available
            return phi_direct(self.m, self.alpha, r, 1e-10).unwrap_or(0.0).max(0.0);
        }
        let x = (r.ln() - t.ln_r0) / t.h;
        let i = (x.floor() as usize).min(t.ln_phi.len() - 2);
        let u = x - i as f64;
        let (y0, y1) = (t.ln_phi[i], t.ln_phi[i + 1]);
        let (d0, d1) = (t.slope[i] * t.h, t.slope[i + 1] * t.h);
        let u2 = u * u;
        let u3 = u2 * u;
        let y = (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * d0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * d1;
        y.exp()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}
