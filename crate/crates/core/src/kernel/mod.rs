//! The fractional heat kernel P_s on ℝⁿ×ℝ, defined through its spatial Fourier
//! transform exp(−t(2π|ξ|)^{2s}) for t > 0 and zero for t ≤ 0, together with its
//! spatial gradient, the conjugate kernel and bound audits.
//!
//! Radial reduction: P^{(m)}(x,t) = t^{−m/2s} Φ_m(|x| t^{−1/2s}) where the index m
//! is the spatial dimension. Two identities carry everything else:
//! ∇_x P^{(n)} = −2π x P^{(n+2)} and
//! ∂_t P^{(m)} = −(m P^{(m)} − 2π|x|² P^{(m+2)}) / (2 s t).

pub mod audit;
pub mod primitive;
pub mod profile;
pub mod series;

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_s, Error, Result};
use crate::geometry::SPoint;
pub use audit::{kernel_bound_audit, AuditGrid, AuditReport, AuditRow, RatioStats};
pub use primitive::TimePrimitive;
pub use profile::Profile;

/// How radial profiles are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    ClosedForm,
    RadialQuadrature,
}

/// Parameters of a kernel instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    pub s: f64,
    pub method: KernelMethod,
    pub quad_tol: f64,
}

/// Largest spatial dimension supported by tabulated (general s) profiles.
pub const MAX_TABULATED_N: usize = 2;

impl KernelSpec {
    pub fn new(n: usize, s: f64, method: KernelMethod, quad_tol: f64) -> Result<Self> {
        let spec = Self { n, s, method, quad_tol };
        spec.validate()?;
        Ok(spec)
    }

    /// Closed form when one exists, quadrature otherwise.
    pub fn auto(n: usize, s: f64) -> Result<Self> {
        let method = if s == 1.0 || s == 0.5 { KernelMethod::ClosedForm } else { KernelMethod::RadialQuadrature };
        Self::new(n, s, method, 1e-10)
    }

    pub fn validate(&self) -> Result<()> {
        check_s(self.s)?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("spatial dimension n must be at least 1".into()));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("quad_tol must lie in (0,1), got {}", self.quad_tol)));
        }
        match self.method {
            KernelMethod::ClosedForm if self.s != 1.0 && self.s != 0.5 => {
                Err(Error::Unsupported(format!("closed-form kernel exists only for s ∈ {{1/2, 1}}, got s = {}", self.s)))
            }
            KernelMethod::RadialQuadrature if self.n > MAX_TABULATED_N => Err(Error::Unsupported(format!(
                "tabulated profiles are provided for n ≤ {MAX_TABULATED_N}; got n = {}",
                self.n
            ))),
            _ => Ok(()),
        }
    }
}

/// An evaluable kernel: the spec plus its radial profiles.
#[derive(Debug)]
pub struct HeatKernel {
    spec: KernelSpec,
    alpha: f64,
    base: Profile,
    grad: Profile,
    second: OnceLock<std::result::Result<Profile, Error>>,
    primitive: OnceLock<std::result::Result<TimePrimitive, Error>>,
}

impl HeatKernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let (base, grad) = match spec.method {
            KernelMethod::ClosedForm => (Profile::closed_form(spec.n, spec.s)?, Profile::closed_form(spec.n + 2, spec.s)?),
            KernelMethod::RadialQuadrature => {
                (Profile::tabulate(spec.n, spec.s, spec.quad_tol)?, Profile::tabulate(spec.n + 2, spec.s, spec.quad_tol)?)
            }
        };
        Ok(Self { spec, alpha: 2.0 * spec.s, base, grad, second: OnceLock::new(), primitive: OnceLock::new() })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn s(&self) -> f64 {
        self.spec.s
    }

    fn profile(&self, m: usize) -> Result<&Profile> {
        let n = self.spec.n;
        if m == n {
            Ok(&self.base)
        } else if m == n + 2 {
            Ok(&self.grad)
        } else if m == n + 4 {
            self.second
                .get_or_init(|| match self.spec.method {
                    KernelMethod::ClosedForm => Profile::closed_form(m, self.spec.s),
                    KernelMethod::RadialQuadrature => Profile::tabulate(m, self.spec.s, self.spec.quad_tol),
                })
                .as_ref()
                .map_err(Clone::clone)
        } else {
            Err(Error::Unsupported(format!("radial dimension {m} not available for n = {n}")))
        }
    }

    /// Φ_m for m ∈ {n, n+2, n+4}.
    pub fn profile_value(&self, m: usize, r: f64) -> Result<f64> {
        Ok(self.profile(m)?.value(r))
    }

    /// The rescaled variable ρ = r t^{−1/2s}.
    #[inline]
    fn rho(&self, r: f64, t: f64) -> f64 {
        if self.spec.s == 1.0 {
            r / t.sqrt()
        } else {
            r * t.powf(-1.0 / self.alpha)
        }
    }

    #[inline]
    fn radial_with(&self, p: &Profile, r: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let m = p.dimension() as f64;
        t.powf(-m / self.alpha) * p.value(self.rho(r, t))
    }

    /// P^{(m)}(r, t) for m ∈ {n, n+2, n+4}.
    pub fn radial(&self, m: usize, r: f64, t: f64) -> Result<f64> {
        Ok(self.radial_with(self.profile(m)?, r, t))
    }

    /// P_s(x, t); zero for t ≤ 0.
    pub fn eval(&self, p: &SPoint) -> f64 {
        self.value_at(p.x(), p.t())
    }

    pub fn value_at(&self, x: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if self.spec.method == KernelMethod::ClosedForm {
            let n = self.spec.n as f64;
            return if self.spec.s == 1.0 {
                (4.0 * PI * t).powf(-0.5 * n) * (-r2 / (4.0 * t)).exp()
            } else {
                poisson_constant(self.spec.n) * t / (r2 + t * t).powf(0.5 * (n + 1.0))
            };
        }
        self.radial_with(&self.base, r2.sqrt(), t)
    }

    /// ∇_x P_s(x, t); zero for t ≤ 0 and a singularity error at the origin.
    pub fn grad(&self, p: &SPoint) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.spec.n];
        self.grad_into(p.x(), p.t(), &mut out)?;
        Ok(out)
    }

    /// Allocation-free gradient evaluation.
    pub fn grad_into(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if t <= 0.0 {
            if t == 0.0 && r2 == 0.0 {
                return Err(Error::Singularity);
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            return Ok(());
        }
        let factor = if self.spec.method == KernelMethod::ClosedForm {
            let n = self.spec.n as f64;
            if self.spec.s == 1.0 {
                -(4.0 * PI * t).powf(-0.5 * n) * (-r2 / (4.0 * t)).exp() / (2.0 * t)
            } else {
                -(n + 1.0) * poisson_constant(self.spec.n) * t / (r2 + t * t).powf(0.5 * (n + 3.0))
            }
        } else {
            -2.0 * PI * self.radial_with(&self.grad, r2.sqrt(), t)
        };
        for (o, xi) in out.iter_mut().zip(x) {
            *o = factor * xi;
        }
        Ok(())
    }

    /// Gradient through the dimension-walk identity regardless of method.
    pub fn grad_dimension_walk(&self, p: &SPoint) -> Result<Vec<f64>> {
        if p.t() == 0.0 && p.spatial_norm() == 0.0 {
            return Err(Error::Singularity);
        }
        let f = -2.0 * PI * self.radial_with(&self.grad, p.spatial_norm(), p.t());
        Ok(p.x().iter().map(|v| f * v).collect())
    }

    /// Conjugate kernel (∇_x P_s)*(x̄) = ∇_x P_s(−x̄).
    pub fn conj_grad(&self, p: &SPoint) -> Result<Vec<f64>> {
        self.grad(&p.neg())
    }

    /// ∂_t ∇_x P_s(x, t).
    pub fn dt_grad(&self, p: &SPoint) -> Result<Vec<f64>> {
        let t = p.t();
        if t <= 0.0 {
            return self.grad(p).map(|g| g.iter().map(|_| 0.0).collect());
        }
        let r = p.spatial_norm();
        let m = (self.spec.n + 2) as f64;
        let p2 = self.radial(self.spec.n + 2, r, t)?;
        let p4 = self.radial(self.spec.n + 4, r, t)?;
        let dt_p2 = -(m * p2 - 2.0 * PI * r * r * p4) / (self.alpha * t);
        Ok(p.x().iter().map(|v| -2.0 * PI * v * dt_p2).collect())
    }

    /// ∂_t P_s(x, t).
    pub fn dt(&self, p: &SPoint) -> Result<f64> {
        let t = p.t();
        if t <= 0.0 {
            return Ok(0.0);
        }
        let r = p.spatial_norm();
        let n = self.spec.n as f64;
        let p0 = self.radial(self.spec.n, r, t)?;
        let p2 = self.radial(self.spec.n + 2, r, t)?;
        Ok(-(n * p0 - 2.0 * PI * r * r * p2) / (self.alpha * t))
    }

    /// Time primitive h(|z|, T) = ∫₀^T P(z, u) du (built on first use).
    pub fn time_primitive(&self) -> Result<&TimePrimitive> {
        self.primitive
            .get_or_init(|| TimePrimitive::build(self))
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// Γ((n+1)/2) π^{−(n+1)/2}.
pub fn poisson_constant(n: usize) -> f64 {
    let a = 0.5 * (n as f64 + 1.0);
    (libm::lgamma(a) - a * PI.ln()).exp()
}
