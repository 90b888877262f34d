//! Time primitive of the kernel,
//!
//! h(z, T) = ∫₀^T P(z, u) du = T^{1−n/2s} Ĥ(|z| T^{−1/2s}),
//! Ĥ(ρ) = 2s ρ^{2s−n} ∫_ρ^∞ r^{n−2s−1} Φ_n(r) dr.
//!
//! Ĥ is tabulated on a geometric grid by cumulative integration from the top,
//! starting from the large-ρ expansion Ĥ(ρ) ~ Σ_k c_k ρ^{−2sk−n}/(k+1) (for
//! s = 1, the asymptotic series of the upper incomplete gamma function), and
//! continued below the grid by the two-term small-ρ expansion of Φ_n. Integrating
//! the kernel over a space-time box reduces to differences of h along one axis.

use std::f64::consts::PI;

use super::series::{phi_at_zero, tail_coefficient, tail_series_general};
use super::HeatKernel;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;

const RHO_LO: f64 = 1e-6;
const RHO_HI: f64 = 1e3;
const GAUSS_RHO_HI: f64 = 38.0;
const STEP: f64 = 0.005;
/// Terms of the large-ρ expansion kept for evaluation beyond the table.
const TAIL_TERMS: usize = 16;

/// Powers of T shared by every h(·, T) evaluation at the same time lag:
/// `amp` = T^{1−n/2s} and `inv` = T^{−1/2s}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFactors {
    pub amp: f64,
    pub inv: f64,
}

#[derive(Debug, Clone)]
pub struct TimePrimitive {
    n: usize,
    alpha: f64,
    ln_r0: f64,
    h: f64,
    ln_val: Vec<f64>,
    slope: Vec<f64>,
    rho_hi: f64,
    /// G(ρ_lo) = ∫_{ρ_lo}^∞ r^{n−α−1} Φ_n(r) dr
    g_lo: f64,
    phi0: f64,
    phi2_0: f64,
    gaussian: bool,
    /// c_k/(k+1), k = 1..=TAIL_TERMS (empty in the Gaussian case)
    tail: Vec<f64>,
}

impl TimePrimitive {
    pub(crate) fn build(kernel: &HeatKernel) -> Result<Self> {
        let n = kernel.n();
        let alpha = 2.0 * kernel.s();
        let nf = n as f64;
        let gaussian = alpha >= 2.0;
        let rho_hi = if gaussian { GAUSS_RHO_HI } else { RHO_HI };
        let ln_r0 = RHO_LO.ln();
        let cells = ((rho_hi.ln() - ln_r0) / STEP).ceil() as usize;
        let h = (rho_hi.ln() - ln_r0) / cells as f64;
        let beta = nf - alpha;

        // G at the top of the grid
        let g_top = if gaussian {
            gaussian_tail(n, rho_hi) * rho_hi.powf(beta) / alpha
        } else {
            let tail = tail_series_general(n, alpha, rho_hi, 1e-14, 1.0).ok_or_else(|| Error::Quadrature {
                context: "large-argument expansion of the time primitive".into(),
                tol: 1e-14,
                err: f64::NAN,
            })?;
            tail * rho_hi.powf(beta) / alpha
        };

        let (gx, gw) = gauss_legendre(8);
        let mut g = vec![0.0; cells + 1];
        g[cells] = g_top;
        let mut phi_nodes = vec![0.0; cells + 1];
        for i in (0..=cells).rev() {
            let ln_r = ln_r0 + h * i as f64;
            phi_nodes[i] = kernel.profile_value(n, ln_r.exp())?;
            if i < cells {
                // ∫ r^{n−α} Φ(r) d(ln r) over the cell [i, i+1]
                let mut cell = 0.0;
                for (x, w) in gx.iter().zip(&gw) {
                    let lr = ln_r + 0.5 * h * (x + 1.0);
                    let r = lr.exp();
                    cell += w * (beta * lr).exp() * kernel.profile_value(n, r)?;
                }
                g[i] = g[i + 1] + 0.5 * h * cell;
            }
        }

        let mut ln_val = Vec::with_capacity(cells + 1);
        let mut slope = Vec::with_capacity(cells + 1);
        for i in 0..=cells {
            let rho = (ln_r0 + h * i as f64).exp();
            let val = alpha * rho.powf(-beta) * g[i];
            if !(val > 0.0) {
                if gaussian && i > 0 {
                    // underflow of the Gaussian tail: freeze the remaining nodes
                    let last = *ln_val.last().unwrap();
                    let last_slope: f64 = *slope.last().unwrap();
                    for j in i..=cells {
                        ln_val.push(last + last_slope * h * (j - i + 1) as f64);
                        slope.push(last_slope);
                    }
                    break;
                }
                return Err(Error::Quadrature { context: format!("time primitive not positive at ρ={rho}"), tol: 0.0, err: val });
            }
            ln_val.push(val.ln());
            slope.push(-beta - alpha * phi_nodes[i] / val);
        }

        Ok(Self {
            n,
            alpha,
            ln_r0,
            h,
            ln_val,
            slope,
            rho_hi,
            g_lo: g[0],
            phi0: phi_at_zero(n, alpha),
            phi2_0: phi_at_zero(n + 2, alpha),
            gaussian,
            tail: if gaussian {
                Vec::new()
            } else {
                (1..=TAIL_TERMS).map(|k| tail_coefficient(n, alpha, k) / (k as f64 + 1.0)).collect()
            },
        })
    }

    /// Ĥ(ρ); +∞ at ρ = 0 when n ≥ 2s.
    pub fn scaled(&self, rho: f64) -> f64 {
        let rho = rho.abs();
        let beta = self.n as f64 - self.alpha;
        if rho < RHO_LO {
            let phi2 = PI * self.phi2_0;
            if rho == 0.0 {
                return if beta < 0.0 { self.alpha * self.phi0 / (-beta) } else { f64::INFINITY };
            }
            let int = |b: f64| if b == 0.0 { (RHO_LO / rho).ln() } else { (RHO_LO.powf(b) - rho.powf(b)) / b };
            let g = self.g_lo + self.phi0 * int(beta) - phi2 * int(beta + 2.0);
            return self.alpha * rho.powf(-beta) * g;
        }
        if rho >= self.rho_hi {
            if self.gaussian {
                return gaussian_tail(self.n, rho);
            }
            return self.tail_value(rho);
        }
        let x = (rho.ln() - self.ln_r0) / self.h;
        let i = (x.floor() as usize).min(self.ln_val.len() - 2);
        let u = x - i as f64;
        let (y0, y1) = (self.ln_val[i], self.ln_val[i + 1]);
        let (d0, d1) = (self.slope[i] * self.h, self.slope[i + 1] * self.h);
        let u2 = u * u;
        let u3 = u2 * u;
        ((2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * d0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * d1).exp()
    }

    /// Σ_k c_k ρ^{−αk−n}/(k+1) for ρ beyond the table, stopped once terms are negligible.
    fn tail_value(&self, rho: f64) -> f64 {
        let step = rho.powf(-self.alpha);
        let mut pw = rho.powf(-(self.n as f64)) * step;
        let mut sum = 0.0;
        for c in &self.tail {
            let term = c * pw;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            pw *= step;
        }
        sum
    }

    /// The powers of T needed by [`Self::eval_factored`]; T must be positive.
    #[inline]
    pub fn factors(&self, big_t: f64) -> TimeFactors {
        if self.alpha == 2.0 {
            let st = big_t.sqrt();
            TimeFactors { amp: st.powi(2 - self.n as i32), inv: 1.0 / st }
        } else {
            let inv = big_t.powf(-1.0 / self.alpha);
            TimeFactors { amp: big_t * inv.powi(self.n as i32), inv }
        }
    }

    /// h(z, T) from precomputed powers of T.
    #[inline]
    pub fn eval_factored(&self, z: f64, f: TimeFactors) -> f64 {
        f.amp * self.scaled(z * f.inv)
    }

    /// h(z, T) = ∫₀^T P(z, u) du with z = |x|; zero for T ≤ 0.
    #[inline]
    pub fn eval(&self, z: f64, big_t: f64) -> f64 {
        if big_t <= 0.0 {
            return 0.0;
        }
        self.eval_factored(z, self.factors(big_t))
    }
}

/// Ĥ(ρ) for s = 1 and large ρ: Ĥ = 2^{n−2} (4π)^{−n/2} ρ^{2−n} Γ(n/2 − 1, ρ²/4),
/// with the incomplete gamma from its asymptotic series
/// Γ(a, x) ~ x^{a−1} e^{−x} Σ_k (a−1)(a−2)⋯(a−k) x^{−k}.
fn gaussian_tail(n: usize, rho: f64) -> f64 {
    if rho > 60.0 {
        // e^{−ρ²/4} < 1e-390: below the smallest subnormal
        return 0.0;
    }
    let nf = n as f64;
    let a = 0.5 * nf - 1.0;
    let x = 0.25 * rho * rho;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= (a - k as f64) / x;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    let ln = (nf - 2.0) * 2f64.ln() - 0.5 * nf * (4.0 * PI).ln() + (2.0 - nf) * rho.ln() + (a - 1.0) * x.ln() - x;
    ln.exp() * sum
}
