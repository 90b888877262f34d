//! Direct evaluation of the radial profiles
//!
//! Φ_m(r) = (2π)^{-m/2} r^{1-m/2} ∫₀^∞ e^{-u^α} J_{m/2-1}(ru) u^{m/2} du,  α = 2s,
//!
//! which satisfy P^{(m)}(x, t) = t^{-m/α} Φ_m(|x| t^{-1/α}). Three evaluators
//! are provided: the small-r power series (entire for α > 1), the large-r
//! series (convergent for α < 1, asymptotic for 1 ≤ α < 2) and oscillatory
//! Gauss–Kronrod quadrature. The series report `None` whenever their own
//! error estimate exceeds the requested tolerance.

use std::f64::consts::PI;

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, AdaptiveOpts};

const EPS: f64 = f64::EPSILON;

/// Φ_m(0) = (2π)^{-m/2} 2^{1-m/2} Γ(m/α) / (α Γ(m/2)).
pub fn phi_at_zero(m: usize, alpha: f64) -> f64 {
    let mf = m as f64;
    let ln = -0.5 * mf * (2.0 * PI).ln() + (1.0 - 0.5 * mf) * 2f64.ln() + ln_gamma(mf / alpha)
        - alpha.ln()
        - ln_gamma(0.5 * mf);
    ln.exp()
}

/// Small-r series Σ_j (-1)^j Γ((2j+m)/α) / (j! Γ(j+m/2)) (r/2)^{2j}, scaled.
pub fn small_series(m: usize, alpha: f64, r: f64, tol: f64) -> Option<f64> {
    if r == 0.0 {
        return Some(phi_at_zero(m, alpha));
    }
    if alpha < 1.0 || (alpha == 1.0 && r >= 0.5) {
        return None;
    }
    let mf = m as f64;
    let lnr2 = 2.0 * (0.5 * r).ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut max_term: f64 = 0.0;
    let mut prev_abs = f64::INFINITY;
    let mut first = 0.0;
    for j in 0..600usize {
        let jf = j as f64;
        let ln = ln_gamma((2.0 * jf + mf) / alpha) - ln_gamma(jf + 1.0) - ln_gamma(jf + 0.5 * mf) + jf * lnr2;
        let mag = ln.exp();
        let term = if j % 2 == 0 { mag } else { -mag };
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        max_term = max_term.max(mag);
        let total = sum + comp;
        if j > 4 && mag < prev_abs && mag <= 0.1 * EPS * total.abs() {
            // rounding of the largest terms dominates the achievable accuracy
            let err = 8.0 * EPS * max_term * (j as f64).sqrt() + mag;
            if total > 0.0 && err <= tol * total.abs() {
                let pre = -0.5 * mf * (2.0 * PI).ln() + (1.0 - 0.5 * mf) * 2f64.ln() - alpha.ln();
                return Some(pre.exp() * total);
            }
            return None;
        }
        if j == 0 {
            first = mag;
        } else if 8.0 * EPS * max_term > tol * first {
            // the partial sums can never be more accurate than this
            return None;
        }
        prev_abs = mag;
    }
    None
}

/// Log of the envelope |c_k| / |sin(παk/2)| and the signed sine factor, where
/// Φ_m(r) ~ Σ_{k≥1} c_k r^{-αk-m}.
fn tail_log_envelope(m: usize, alpha: f64, k: usize) -> (f64, f64) {
    let mf = m as f64;
    let kf = k as f64;
    let parity = if k % 2 == 1 { 1.0 } else { -1.0 };
    // sin(παk/2) reduced mod 2 first so integer multiples of π give exact zeros
    let arg = (0.5 * alpha * kf).rem_euclid(2.0);
    let sine = if arg == 0.0 || arg == 1.0 { 0.0 } else { (PI * arg).sin() };
    let ln = alpha * kf * 2f64.ln() - ln_gamma(kf + 1.0) - (0.5 * mf + 1.0) * PI.ln()
        + ln_gamma(0.5 * (alpha * kf + mf))
        + ln_gamma(0.5 * alpha * kf + 1.0);
    (ln, parity * sine)
}

/// Coefficient c_k of the large-r expansion.
pub fn tail_coefficient(m: usize, alpha: f64, k: usize) -> f64 {
    let (ln, factor) = tail_log_envelope(m, alpha, k);
    factor * ln.exp()
}

/// Large-r series evaluation. For α < 2 the coefficients vanish only on a
/// discrete set; at α = 2 the expansion is identically zero and `None` is
/// returned.
pub fn tail_series(m: usize, alpha: f64, r: f64, tol: f64) -> Option<f64> {
    tail_series_general(m, alpha, r, tol, 0.0)
}

/// Evaluates Σ_k c_k r^{-αk-m} / (1 + shift·k) style sums used by derived
/// quantities; `weight_shift = 0` gives the profile itself.
pub(crate) fn tail_series_general(m: usize, alpha: f64, r: f64, tol: f64, weight_shift: f64) -> Option<f64> {
    if !(alpha < 2.0) || r <= 0.0 {
        return None;
    }
    let mf = m as f64;
    let lnr = r.ln();
    let mut sum = 0.0;
    let mut last_mag = f64::INFINITY;
    let mut max_mag: f64 = 0.0;
    for k in 1..400usize {
        let (le, factor) = tail_log_envelope(m, alpha, k);
        let w = 1.0 / (1.0 + weight_shift * k as f64);
        // the envelope bounds the term and is monotone where the series behaves
        let mag = (le - (alpha * k as f64 + mf) * lnr).exp() * w;
        if k > 2 && mag > last_mag && alpha >= 1.0 {
            // asymptotic series started to diverge before reaching tolerance
            return None;
        }
        sum += factor * mag;
        max_mag = max_mag.max(mag);
        if mag <= tol * 0.1 * sum.abs() {
            let err = mag + 4.0 * EPS * max_mag;
            if sum > 0.0 && err <= tol * sum.abs() {
                return Some(sum);
            }
            return None;
        }
        last_mag = mag;
    }
    None
}

/// Spherical Bessel j_l(z) for l ∈ {0,…,3}, with a power series near 0.
fn spherical_j(l: usize, z: f64) -> f64 {
    if z < 0.5 + 0.5 * l as f64 {
        let mut df = 1.0;
        for i in 0..=l {
            df *= (2 * i + 1) as f64;
        }
        let lead = z.powi(l as i32) / df;
        let z2 = -0.5 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            term *= z2 / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        return lead * sum;
    }
    let (s, c) = z.sin_cos();
    match l {
        0 => s / z,
        1 => s / (z * z) - c / z,
        2 => (3.0 / (z * z) - 1.0) * s / z - 3.0 * c / (z * z),
        3 => (15.0 / (z * z * z) - 6.0 / z) * s / z - (15.0 / (z * z) - 1.0) * c / z,
        _ => unreachable!("spherical_j is only used for l ≤ 3"),
    }
}

/// Bessel weight r^{1-m/2} J_{m/2-1}(ru) u^{m/2} (without the (2π)^{-m/2}).
pub(crate) fn bessel_weight(m: usize, r: f64, u: f64) -> f64 {
    let z = r * u;
    if m % 2 == 1 {
        if m == 1 {
            // J_{-1/2}(z) = sqrt(2/(πz)) cos z
            return (2.0 / PI).sqrt() * z.cos();
        }
        // J_{l+1/2}(z) = sqrt(2z/π) j_l(z), l = (m-3)/2
        let l = (m - 3) / 2;
        let mf = m as f64;
        (2.0 * z / PI).sqrt() * spherical_j(l, z) * r.powf(1.0 - 0.5 * mf) * u.powf(0.5 * mf)
    } else {
        let nu = (m / 2 - 1) as i32;
        let mf = m as f64;
        libm::jn(nu, z) * r.powf(1.0 - 0.5 * mf) * u.powf(0.5 * mf)
    }
}

/// Upper integration limit: e^{-U^α} U^{m} below 1e-22 relative to Φ_m(0).
fn cutoff(m: usize, alpha: f64) -> f64 {
    let mut u = 50f64.powf(1.0 / alpha);
    for _ in 0..20 {
        u = (50.0 + (m as f64) * u.max(1.0).ln()).powf(1.0 / alpha);
    }
    u
}

/// Φ_m(r) by oscillatory quadrature, to relative tolerance `tol` (with an
/// absolute floor proportional to Φ_m(0)).
pub fn phi_quadrature(m: usize, alpha: f64, r: f64, tol: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(phi_at_zero(m, alpha));
    }
    let mf = m as f64;
    let pre = (2.0 * PI).powf(-0.5 * mf);
    let upper = cutoff(m, alpha);
    let panels = ((r * upper / PI).ceil() as usize + 4).min(20_000);
    let mut breaks: Vec<f64> = (0..=panels).map(|i| upper * i as f64 / panels as f64).collect();
    if alpha < 1.0 {
        // e^{-u^α} has an unbounded derivative at 0; grade the first panel
        let first = breaks[1];
        let extra: Vec<f64> = (1..12).rev().map(|i| first * 0.25f64.powi(i)).collect();
        breaks.splice(1..1, extra);
    }
    let phi0 = phi_at_zero(m, alpha);
    let scale = if m == 1 { 1.0 / PI } else { pre };
    // cancellation in the oscillatory integral floors the attainable error near ε·Φ_m(0)
    let opts = AdaptiveOpts { abs_tol: 1e-16 * phi0 / scale, rel_tol: 0.1 * tol, max_panels: 40 * panels + 400 };
    let est = if m == 1 {
        integrate(|u: f64| (-u.powf(alpha)).exp() * (r * u).cos(), &breaks, opts)
    } else {
        integrate(|u: f64| (-u.powf(alpha)).exp() * bessel_weight(m, r, u), &breaks, opts)
    };
    if !est.converged {
        return Err(Error::Quadrature {
            context: format!("radial profile m={m}, alpha={alpha}, r={r}"),
            tol,
            err: est.error * scale,
        });
    }
    Ok(est.value * scale)
}

/// Best available direct evaluation: small series, large-r series, else quadrature.
pub fn phi_direct(m: usize, alpha: f64, r: f64, tol: f64) -> Result<f64> {
    if let Some(v) = small_series(m, alpha, r, tol) {
        return Ok(v);
    }
    if let Some(v) = tail_series(m, alpha, r, tol) {
        return Ok(v);
    }
    phi_quadrature(m, alpha, r, tol)
}
