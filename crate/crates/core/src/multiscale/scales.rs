//! Density sequences θ_j, the stopping scales s_0 < … < s_m they induce, the
//! good/bad classification of scales and stopping intervals, and the chain of
//! inequalities relating σ-masses of those classes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::CantorTree;
use crate::error::{Error, Result};
use crate::quad::compensated_sum;

/// A scale j is good when p_j ≤ 40 θ_j.
pub const BAD_SCALE_FACTOR: f64 = 40.0;
/// An interval I is good when σ(I ∩ 𝒢) ≥ σ(I)/400.
pub const GOOD_INTERVAL_FRACTION: f64 = 1.0 / 400.0;
/// Float slack granted to every inequality of the suite.
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleParams {
    /// stopping threshold B > 1
    pub b: f64,
    /// intervals with at least this many scales are "long"
    pub n_l: usize,
}

impl Default for ScaleParams {
    fn default() -> Self {
        Self { b: 100.0, n_l: 10 }
    }
}

impl ScaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 1.0) {
            return Err(Error::InvalidArgument(format!("stopping threshold B = {} must exceed 1", self.b)));
        }
        if self.n_l == 0 {
            return Err(Error::InvalidArgument("long-interval cutoff N_L must be positive".into()));
        }
        Ok(())
    }

    /// The asymptotic argument needs N_L far above 400B⁴ + 1; desk-scale
    /// values only exercise the long/short split.
    pub fn n_l_warning(&self) -> Option<String> {
        let need = 400.0 * self.b.powi(4) + 1.0;
        ((self.n_l as f64) < need).then(|| {
            format!("N_L = {} is far below 400B^4+1 = {need:e}; long/short labels are illustrative only", self.n_l)
        })
    }
}

/// Stopping scales: s_0 = 0 and s_{j+1} is the least i > s_j with i = k,
/// θ_i > Bθ_{s_j} or θ_i < θ_{s_j}/B.
pub fn stop_scales(theta: &[f64], b: f64, k: usize) -> Result<Vec<usize>> {
    if !(b > 1.0) {
        return Err(Error::InvalidArgument(format!("stopping threshold B = {b} must exceed 1")));
    }
    if theta.len() < k + 1 {
        return Err(Error::InvalidArgument(format!("{} densities for k = {k}", theta.len())));
    }
    let mut stops = vec![0];
    let mut cur = 0;
    while cur < k {
        let base = theta[cur];
        let next = (cur + 1..=k).find(|&i| i == k || theta[i] > b * base || theta[i] < base / b).expect("i = k always stops");
        stops.push(next);
        cur = next;
    }
    Ok(stops)
}

/// p_j = Σ_{i≤j} θ_i ℓ_j/ℓ_i for the tree's own densities and sides.
pub fn p_of(tree: &CantorTree, j: usize) -> Result<f64> {
    if j > tree.k() {
        return Err(Error::InvalidArgument(format!("generation {j} beyond k = {}", tree.k())));
    }
    let theta = tree.thetas();
    Ok(p_sequence(&theta, tree.lambdas())[j])
}

/// p(Q) for the cube `i` of generation `j`; it depends on the generation only.
pub fn p_of_cube(tree: &CantorTree, j: usize, i: usize) -> Result<f64> {
    if j <= tree.k() && i >= tree.count(j) {
        return Err(Error::InvalidArgument(format!("cube {i} of generation {j} does not exist")));
    }
    p_of(tree, j)
}

fn p_sequence(theta: &[f64], lambdas: &[f64]) -> Vec<f64> {
    (0..theta.len())
        .map(|j| {
            // ℓ_j/ℓ_i accumulated from i = j downwards
            let mut ratio = 1.0;
            let mut terms = Vec::with_capacity(j + 1);
            for i in (0..=j).rev() {
                terms.push(theta[i] * ratio);
                if i > 0 {
                    ratio *= lambdas[i - 1];
                }
            }
            compensated_sum(terms)
        })
        .collect()
}

/// θ_j = ℓ_j^{−(n+1)} / ((d+1)^j d^{nj}) for the ratios λ_1..λ_k.
pub fn thetas_from_lambdas(n: usize, d: usize, lambdas: &[f64]) -> Vec<f64> {
    let b = ((d + 1) * d.pow(n as u32)) as f64;
    let mut out = vec![1.0];
    let mut theta = 1.0;
    for &l in lambdas {
        theta /= b * l.powi(n as i32 + 1);
        out.push(theta);
    }
    out
}

/// k ratios drawn uniformly from [τ₀/10, τ₀].
pub fn random_lambdas<R: Rng>(tau0: f64, k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.1 * tau0..=tau0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalInfo {
    /// s_j
    pub start: usize,
    /// s_{j+1} (exclusive)
    pub end: usize,
    pub sigma: f64,
    /// σ(I ∩ 𝒢)
    pub sigma_good: f64,
    pub good: bool,
    pub long: bool,
    /// least good scale in the interval
    pub j0: Option<usize>,
}

impl IntervalInfo {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleAnalysis {
    pub theta: Vec<f64>,
    /// λ_1..λ_k
    pub lambdas: Vec<f64>,
    /// σ([0, j]) = Σ_{i≤j} θ_i²
    pub sigma_prefix: Vec<f64>,
    pub p: Vec<f64>,
    pub params: ScaleParams,
    pub stop: Vec<usize>,
    /// p_j ≤ 40 θ_j, for j = 0..=k
    pub good_scale: Vec<bool>,
    pub intervals: Vec<IntervalInfo>,
    /// branching digit d when every λ_j < 1/d is known to hold
    pub young_d: Option<usize>,
    pub warnings: Vec<String>,
}

impl ScaleAnalysis {
    pub fn from_tree(tree: &CantorTree, params: ScaleParams) -> Result<Self> {
        let d = tree.params().d;
        Self::from_raw(tree.thetas(), tree.lambdas().to_vec(), Some(d), params)
    }

    pub fn from_lambdas(n: usize, d: usize, lambdas: &[f64], params: ScaleParams) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::InvalidArgument(format!("need n ≥ 1 and d ≥ 2, got n = {n}, d = {d}")));
        }
        Self::from_raw(thetas_from_lambdas(n, d, lambdas), lambdas.to_vec(), Some(d), params)
    }

    /// From explicit densities θ_0..θ_k and ratios λ_1..λ_k. The Young-type
    /// bound is only checked when `d` is given and every λ_j < 1/d.
    pub fn from_raw(theta: Vec<f64>, lambdas: Vec<f64>, d: Option<usize>, params: ScaleParams) -> Result<Self> {
        params.validate()?;
        if theta.is_empty() {
            return Err(Error::InvalidArgument("empty density sequence".into()));
        }
        let k = theta.len() - 1;
        if lambdas.len() != k {
            return Err(Error::InvalidArgument(format!("{} ratios for {} densities", lambdas.len(), theta.len())));
        }
        if let Some(bad) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidArgument(format!("density {bad} is not positive and finite")));
        }
        if let Some(bad) = lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0 && **l < 1.0)) {
            return Err(Error::InvalidArgument(format!("ratio {bad} outside (0, 1)")));
        }
        let mut warnings = Vec::new();
        if let Some(w) = params.n_l_warning() {
            warnings.push(w);
        }
        let young_d = match d {
            Some(d) if d >= 2 && lambdas.iter().all(|&l| l * d as f64 <= 1.0) => Some(d),
            Some(d) => {
                warnings.push(format!("some ratio exceeds 1/d = 1/{d}: Young-type bound not applicable"));
                None
            }
            None => {
                warnings.push("branching digit d unknown: Young-type bound not applicable".into());
                None
            }
        };
        let mut acc = crate::quad::CompensatedSum::new();
        let sigma_prefix = theta
            .iter()
            .map(|t| {
                acc.add(t * t);
                acc.value()
            })
            .collect();
        let p = p_sequence(&theta, &lambdas);
        let good_scale: Vec<bool> = p.iter().zip(&theta).map(|(p, t)| *p <= BAD_SCALE_FACTOR * t).collect();
        let stop = stop_scales(&theta, params.b, k)?;
        let intervals = stop
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let sigma = compensated_sum((a..b).map(|i| theta[i] * theta[i]));
                let sigma_good = compensated_sum((a..b).filter(|&i| good_scale[i]).map(|i| theta[i] * theta[i]));
                IntervalInfo {
                    start: a,
                    end: b,
                    sigma,
                    sigma_good,
                    good: sigma_good >= GOOD_INTERVAL_FRACTION * sigma,
                    long: b - a >= params.n_l,
                    j0: (a..b).find(|&i| good_scale[i]),
                }
            })
            .collect();
        Ok(Self { theta, lambdas, sigma_prefix, p, params, stop, good_scale, intervals, young_d, warnings })
    }

    pub fn k(&self) -> usize {
        self.theta.len() - 1
    }

    /// σ(A) = Σ_{j∈A} θ_j².
    pub fn sigma_of<I: IntoIterator<Item = usize>>(&self, set: I) -> f64 {
        compensated_sum(set.into_iter().map(|j| self.theta[j] * self.theta[j]))
    }

    /// Bad scales among 0..k−1.
    pub fn bad_scales(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| !self.good_scale[j]).collect()
    }

    /// Every structural invariant of the stopping construction, as a list of
    /// violations (empty when all hold).
    pub fn invariant_violations(&self) -> Vec<String> {
        let k = self.k();
        let mut out = Vec::new();
        if self.stop.first() != Some(&0) || self.stop.last() != Some(&k) {
            out.push(format!("stop set {:?} must start at 0 and end at k = {k}", self.stop));
        }
        if self.stop.windows(2).any(|w| w[0] >= w[1]) {
            out.push("stop set not strictly increasing".into());
        }
        let covered: usize = self.intervals.iter().map(IntervalInfo::len).sum();
        if covered != k {
            out.push(format!("intervals cover {covered} scales instead of {k}"));
        }
        let b = self.params.b;
        for iv in &self.intervals {
            let base = self.theta[iv.start];
            for i in iv.start..iv.end {
                let t = self.theta[i];
                if t > b * base || t < base / b {
                    out.push(format!("θ_{i} = {t:e} leaves [θ_{}/B, Bθ_{}]", iv.start, iv.start));
                }
            }
        }
        out
    }

    /// Evaluates the inequality chain with 1e-12 slack.
    pub fn lemma_suite(&self) -> LemmaReport {
        let k = self.k();
        let total = self.sigma_of(0..k);
        let mut checks = Vec::new();
        let mut warnings = Vec::new();

        checks.push(match self.young_d {
            Some(d) => {
                let c = d as f64 / (d as f64 - 1.0);
                LemmaCheck::le("young_bound", compensated_sum(self.p[..k].iter().map(|p| p * p)), c * c * total)
            }
            None => {
                warnings.push("Young-type bound skipped: densities not generated by ratios below 1/d".into());
                LemmaCheck::skipped("young_bound", "densities not generated by ratios below 1/d")
            }
        });

        checks.push(LemmaCheck::le("bad_scales_sigma", self.sigma_of(self.bad_scales()), GOOD_INTERVAL_FRACTION * total));

        let good_sum = compensated_sum(self.intervals.iter().filter(|iv| iv.good).map(|iv| iv.sigma));
        checks.push(LemmaCheck::le("good_intervals_sigma", total, 399.0 / 398.0 * good_sum));

        // j0 − s_j − c(s_{j+1} − s_j) ≤ 0 for every good interval; report the tightest
        let b4 = self.params.b.powi(4);
        let c = 400.0 * b4 / (400.0 * b4 + 1.0);
        let worst = self
            .intervals
            .iter()
            .filter(|iv| iv.good)
            .map(|iv| {
                let j0 = iv.j0.expect("a good interval contains a good scale");
                ((j0 - iv.start) as f64, c * iv.len() as f64)
            })
            .max_by(|x, y| (x.0 - x.1).total_cmp(&(y.0 - y.1)));
        checks.push(match worst {
            Some((lhs, rhs)) => LemmaCheck::le("first_good_scale_position", lhs, rhs),
            None => LemmaCheck::skipped("first_good_scale_position", "no good interval"),
        });

        let additive = compensated_sum(self.intervals.iter().map(|iv| iv.sigma));
        checks.push(LemmaCheck::eq("sigma_additivity", total, additive, 1e-14));

        let violations = self.invariant_violations();
        checks.push(LemmaCheck {
            name: "stop_invariants".into(),
            lhs: violations.len() as f64,
            rhs: 0.0,
            slack: -(violations.len() as f64),
            passed: violations.is_empty(),
            skipped: None,
        });
        warnings.extend(violations);
        let passed = checks.iter().all(|c| c.passed || c.skipped.is_some());
        LemmaReport { checks, warnings, passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs for inequalities, −|lhs − rhs| for identities
    pub slack: f64,
    pub passed: bool,
    /// reason the check was not evaluated
    pub skipped: Option<String>,
}

impl LemmaCheck {
    fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        Self { name: name.into(), lhs, rhs, slack: rhs - lhs, passed: lhs <= rhs + SLACK * rhs.abs().max(1.0), skipped: None }
    }

    fn eq(name: &str, lhs: f64, rhs: f64, rel: f64) -> Self {
        let diff = (lhs - rhs).abs();
        Self { name: name.into(), lhs, rhs, slack: -diff, passed: diff <= rel * lhs.abs().max(rhs.abs()), skipped: None }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self { name: name.into(), lhs: f64::NAN, rhs: f64::NAN, slack: f64::NAN, passed: false, skipped: Some(why.into()) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
    pub warnings: Vec<String>,
    /// every evaluated check passed
    pub passed: bool,
}

impl LemmaReport {
    pub fn check(&self, name: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}
