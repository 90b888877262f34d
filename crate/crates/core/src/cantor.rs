//! Corner-like s-parabolic Cantor sets.
//!
//! Each generation replaces a cube of side L by (d+1)·dⁿ children of side λL:
//! d children per spatial axis placed at offsets j(λ + l_d)L with
//! l_d = (1 − dλ)/(d − 1), and d + 1 children in time at offsets
//! j(λ^{2s} + l̃_d)L^{2s} with l̃_d = (1 − (d+1)λ^{2s})/d. The measure μ_k is
//! uniform on generation-k cubes, each of mass ((d+1)dⁿ)^{−k}.
//!
//! Cubes are addressed by mixed-radix digits; the flat index of a generation-j
//! cube is big-endian in base B = (d+1)dⁿ, so `parent = i / B`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_s_capacity, Error, Result};
use crate::geometry::{sp_dilate, Aabb, SPCube, SPoint};
use crate::quad::CompensatedSum;

/// Least d ≥ 2 with d + 1 < d^{2s}.
pub fn min_branching(s: f64) -> Result<usize> {
    check_s_capacity(s)?;
    let mut d = 2usize;
    while (d as f64 + 1.0) >= (d as f64).powf(2.0 * s) {
        d += 1;
        if d > 1_000_000 {
            return Err(Error::InvalidArgument(format!("no admissible branching found for s = {s}")));
        }
    }
    Ok(d)
}

/// Structural parameters of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SParams {
    pub n: usize,
    pub s: f64,
    pub d: usize,
    pub tau0: f64,
}

impl SParams {
    /// `d` defaults to [`min_branching`], `tau0` to 0.9/d.
    pub fn new(n: usize, s: f64, d: Option<usize>, tau0: Option<f64>) -> Result<Self> {
        check_s_capacity(s)?;
        if n == 0 {
            return Err(Error::InvalidArgument("spatial dimension n must be at least 1".into()));
        }
        let d = match d {
            Some(d) => {
                if d < 2 || (d as f64 + 1.0) >= (d as f64).powf(2.0 * s) {
                    return Err(Error::InvalidArgument(format!(
                        "branching d = {d} violates d ≥ 2 and d + 1 < d^(2s) at s = {s} (minimum is {})",
                        min_branching(s)?
                    )));
                }
                d
            }
            None => min_branching(s)?,
        };
        let tau0 = tau0.unwrap_or(0.9 / d as f64);
        if !(tau0 > 0.0 && tau0 < 1.0 / d as f64) {
            return Err(Error::InvalidArgument(format!("tau0 = {tau0} must lie in (0, 1/d) = (0, {})", 1.0 / d as f64)));
        }
        Ok(Self { n, s, d, tau0 })
    }

    /// (d+1)·dⁿ, the number of children per cube.
    pub fn branching(&self) -> usize {
        (self.d + 1) * self.d.pow(self.n as u32)
    }
}

/// ((d+1)dⁿ)^{−1/(n+1)}: the ratio that makes every θ_j equal to 1.
pub fn critical_ratio(p: &SParams) -> f64 {
    (p.branching() as f64).powf(-1.0 / (p.n as f64 + 1.0))
}

/// How the contraction ratios λ₁..λ_k are specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Constant(f64),
    List(Vec<f64>),
    #[serde(skip)]
    Critical,
}

impl LambdaSpec {
    /// Concrete ratios for k generations (a list is truncated to its first k entries).
    pub fn resolve(&self, p: &SParams, k: usize) -> Result<Vec<f64>> {
        match self {
            LambdaSpec::Constant(c) => Ok(vec![*c; k]),
            LambdaSpec::Critical => {
                let c = critical_ratio(p);
                if c > p.tau0 {
                    return Err(Error::InvalidArgument(format!(
                        "critical ratio {c} exceeds tau0 = {}; the θ ≡ 1 construction is not admissible here",
                        p.tau0
                    )));
                }
                Ok(vec![c; k])
            }
            LambdaSpec::List(v) => {
                if v.len() < k {
                    Err(Error::InvalidArgument(format!("lambda list has {} entries but k = {k}", v.len())))
                } else {
                    Ok(v[..k].to_vec())
                }
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            LambdaSpec::Constant(c) => format!("{c}"),
            LambdaSpec::Critical => "critical".into(),
            LambdaSpec::List(v) => format!("list:{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")),
        }
    }
}

/// Digit path from the root; digit r encodes the child chosen at generation r+1
/// as `temporal + (d+1)·(sp₀ + d·sp₁ + …)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CubeAddress {
    pub digits: Vec<usize>,
}

impl CubeAddress {
    pub fn new(digits: Vec<usize>) -> Self {
        Self { digits }
    }

    pub fn root() -> Self {
        Self::default()
    }

    /// Build from (spatial digits, temporal digit) pairs.
    pub fn from_parts(tree: &CantorTree, parts: &[(Vec<usize>, usize)]) -> Result<Self> {
        let d = tree.params.d;
        let mut digits = Vec::with_capacity(parts.len());
        for (sp, tm) in parts {
            if sp.len() != tree.params.n || sp.iter().any(|&v| v >= d) || *tm > d {
                return Err(Error::InvalidArgument(format!("invalid digit parts {sp:?}/{tm}")));
            }
            let mut spatial = 0;
            for &v in sp.iter().rev() {
                spatial = spatial * d + v;
            }
            digits.push(tm + (d + 1) * spatial);
        }
        Ok(Self { digits })
    }

    pub fn validate(&self, tree: &CantorTree) -> Result<()> {
        if self.digits.len() > tree.k() {
            return Err(Error::InvalidArgument(format!("address depth {} exceeds k = {}", self.digits.len(), tree.k())));
        }
        let b = tree.params.branching();
        if let Some(bad) = self.digits.iter().find(|&&v| v >= b) {
            return Err(Error::InvalidArgument(format!("digit {bad} out of range [0, {b})")));
        }
        Ok(())
    }

    /// Flat big-endian index within its generation.
    pub fn index(&self, tree: &CantorTree) -> usize {
        let b = tree.params.branching();
        self.digits.iter().fold(0, |acc, &v| acc * b + v)
    }
}

/// Anything that can measure axis-parallel boxes.
pub trait BoxMeasure: Sync {
    fn measure(&self, b: &Aabb) -> f64;
    fn total(&self) -> f64;
}

/// A built construction with all generations materialised.
#[derive(Debug, Clone)]
pub struct CantorTree {
    params: SParams,
    lambdas: Vec<f64>,
    ell: Vec<f64>,
    ell_t: Vec<f64>,
    corners: Vec<Vec<f64>>,
}

impl CantorTree {
    pub fn build(params: SParams, lambdas: &[f64], k: usize) -> Result<Self> {
        let p = SParams::new(params.n, params.s, Some(params.d), Some(params.tau0))?;
        if lambdas.len() != k {
            return Err(Error::InvalidArgument(format!("expected {k} contraction ratios, got {}", lambdas.len())));
        }
        for (j, &l) in lambdas.iter().enumerate() {
            if !(l > 0.0 && l <= p.tau0) {
                return Err(Error::InvalidArgument(format!(
                    "lambda_{} = {l} outside (0, tau0 = {}] (tau0 < 1/d = {})",
                    j + 1,
                    p.tau0,
                    1.0 / p.d as f64
                )));
            }
        }
        let n = p.n;
        let d = p.d;
        let two_s = 2.0 * p.s;
        let mut ell = vec![1.0];
        let mut ell_t = vec![1.0];
        for (j, &l) in lambdas.iter().enumerate() {
            ell.push(ell[j] * l);
            ell_t.push(ell[j + 1].powf(two_s));
        }
        let b = p.branching();
        let stride = n + 1;
        let mut corners = vec![vec![0.0; stride]];
        for r in 1..=k {
            let lam = lambdas[r - 1];
            let big_l = ell[r - 1];
            let big_lt = ell_t[r - 1];
            let ld = (1.0 - d as f64 * lam) / (d as f64 - 1.0);
            let lam_t = lam.powf(two_s);
            let ltd = (1.0 - (d as f64 + 1.0) * lam_t) / d as f64;
            let prev = &corners[r - 1];
            let count = prev.len() / stride;
            let mut next = Vec::with_capacity(count * b * stride);
            for pi in 0..count {
                let pc = &prev[pi * stride..(pi + 1) * stride];
                for digit in 0..b {
                    let tm = digit % (d + 1);
                    let mut sp = digit / (d + 1);
                    for axis in 0..n {
                        let j = (sp % d) as f64;
                        sp /= d;
                        next.push(pc[axis] + j * (lam + ld) * big_l);
                    }
                    next.push(pc[n] + tm as f64 * (lam_t + ltd) * big_lt);
                }
            }
            corners.push(next);
        }
        Ok(Self { params: p, lambdas: lambdas.to_vec(), ell, ell_t, corners })
    }

    pub fn params(&self) -> &SParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn s(&self) -> f64 {
        self.params.s
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn branching(&self) -> usize {
        self.params.branching()
    }

    /// ℓ_j = λ₁⋯λ_j.
    pub fn side(&self, j: usize) -> f64 {
        self.ell[j]
    }

    /// ℓ_j^{2s}.
    pub fn temporal_extent(&self, j: usize) -> f64 {
        self.ell_t[j]
    }

    /// (d+1)^j d^{nj}.
    pub fn count(&self, j: usize) -> usize {
        self.branching().pow(j as u32)
    }

    /// μ_k mass of one generation-j cube.
    pub fn cube_mass(&self, j: usize) -> f64 {
        (self.branching() as f64).powi(-(j as i32))
    }

    /// Minimal corner (x…, t) of cube `i` at generation `j`.
    pub fn corner(&self, j: usize, i: usize) -> &[f64] {
        let st = self.params.n + 1;
        &self.corners[j][i * st..(i + 1) * st]
    }

    pub fn cube(&self, j: usize, i: usize) -> SPCube {
        let c = self.corner(j, i);
        let n = self.params.n;
        SPCube::new(SPoint::new(c[..n].to_vec(), c[n]).expect("finite corner"), self.ell[j], self.params.s)
            .expect("positive side")
    }

    pub fn cube_box(&self, j: usize, i: usize) -> Aabb {
        let c = self.corner(j, i);
        let n = self.params.n;
        let mut hi: Vec<f64> = c[..n].iter().map(|v| v + self.ell[j]).collect();
        hi.push(c[n] + self.ell_t[j]);
        Aabb::new(c.to_vec(), hi)
    }

    /// Iterator over all generation-j cubes in index order.
    pub fn cubes(&self, j: usize) -> impl Iterator<Item = SPCube> + '_ {
        (0..self.count(j)).map(move |i| self.cube(j, i))
    }

    pub fn parent(&self, i: usize) -> usize {
        i / self.branching()
    }

    /// Index of the generation-`to` ancestor of generation-`from` cube `i`.
    pub fn ancestor(&self, from: usize, i: usize, to: usize) -> usize {
        debug_assert!(to <= from);
        i / self.branching().pow((from - to) as u32)
    }

    pub fn children(&self, i: usize) -> std::ops::Range<usize> {
        let b = self.branching();
        i * b..(i + 1) * b
    }

    pub fn cube_of(&self, addr: &CubeAddress) -> Result<SPCube> {
        addr.validate(self)?;
        Ok(self.cube(addr.digits.len(), addr.index(self)))
    }

    /// θ_j = 1 / ((d+1)^j d^{nj} ℓ_j^{n+1}).
    pub fn theta(&self, j: usize) -> Result<f64> {
        if j > self.k() {
            return Err(Error::InvalidArgument(format!("generation {j} exceeds k = {}", self.k())));
        }
        Ok(self.cube_mass(j) / self.ell[j].powi(self.params.n as i32 + 1))
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..=self.k()).map(|j| self.theta(j).unwrap()).collect()
    }

    /// Relative spatial gap l_d at generation j ≥ 1.
    pub fn gap_spatial(&self, j: usize) -> f64 {
        let d = self.params.d as f64;
        (1.0 - d * self.lambdas[j - 1]) / (d - 1.0)
    }

    /// Relative temporal gap l̃_d at generation j ≥ 1.
    pub fn gap_temporal(&self, j: usize) -> f64 {
        let d = self.params.d as f64;
        (1.0 - (d + 1.0) * self.lambdas[j - 1].powf(2.0 * self.params.s)) / d
    }

    /// c(τ₀, s) = min{(1−dτ₀)/(d−1), ((1−(d+1)τ₀^{2s})/d)^{1/2s}}: distinct
    /// generation-j cubes are at s-parabolic distance ≥ c·ℓ_{j−1}.
    pub fn separation_constant(&self) -> f64 {
        let d = self.params.d as f64;
        let t = self.params.tau0;
        let s = self.params.s;
        ((1.0 - d * t) / (d - 1.0)).min(((1.0 - (d + 1.0) * t.powf(2.0 * s)) / d).powf(1.0 / (2.0 * s)))
    }

    /// Exact μ_k measure of an axis-parallel box by tree descent.
    pub fn mu_of_box(&self, b: &Aabb) -> f64 {
        let mut acc = CompensatedSum::new();
        self.mu_descend(0, 0, b, &mut acc);
        acc.value()
    }

    fn mu_descend(&self, j: usize, i: usize, b: &Aabb, acc: &mut CompensatedSum) {
        let cb = self.cube_box(j, i);
        let inter = cb.intersect(b);
        if inter.is_empty() {
            return;
        }
        if b.contains_box(&cb) {
            acc.add(self.cube_mass(j));
            return;
        }
        if j == self.k() {
            acc.add(self.cube_mass(j) * inter.volume() / cb.volume());
            return;
        }
        for c in self.children(i) {
            self.mu_descend(j + 1, c, b, acc);
        }
    }

    /// Index permutation induced by the spatial mirror x ↦ 1 − x on axis `axis`.
    pub fn mirror_index_spatial(&self, j: usize, i: usize, axis: usize) -> usize {
        let d = self.params.d;
        let b = self.branching();
        let mut digits = Vec::with_capacity(j);
        let mut rest = i;
        for _ in 0..j {
            digits.push(rest % b);
            rest /= b;
        }
        let stride = (d + 1) * d.pow(axis as u32);
        let mut out = 0;
        for &digit in digits.iter().rev() {
            let sp_axis = (digit / stride) % d;
            let mirrored = digit - sp_axis * stride + (d - 1 - sp_axis) * stride;
            out = out * b + mirrored;
        }
        out
    }

    /// Index permutation induced by the time mirror t ↦ 1 − t.
    pub fn mirror_index_temporal(&self, j: usize, i: usize) -> usize {
        let d = self.params.d;
        let b = self.branching();
        let mut digits = Vec::with_capacity(j);
        let mut rest = i;
        for _ in 0..j {
            digits.push(rest % b);
            rest /= b;
        }
        let mut out = 0;
        for &digit in digits.iter().rev() {
            let tm = digit % (d + 1);
            out = out * b + (digit - tm + (d - tm));
        }
        out
    }
}

impl BoxMeasure for CantorTree {
    fn measure(&self, b: &Aabb) -> f64 {
        self.mu_of_box(b)
    }

    fn total(&self) -> f64 {
        1.0
    }
}

/// Lebesgue measure restricted to Q⁰ = [0,1]^{n+1}.
#[derive(Debug, Clone, Copy)]
pub struct UnitLebesgue {
    n: usize,
}

impl UnitLebesgue {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl BoxMeasure for UnitLebesgue {
    fn measure(&self, b: &Aabb) -> f64 {
        let unit = Aabb::new(vec![0.0; self.n + 1], vec![1.0; self.n + 1]);
        unit.intersect(b).volume()
    }

    fn total(&self) -> f64 {
        1.0
    }
}

/// Normalised surface measure on the bottom (earliest-time) face of a cube.
#[derive(Debug, Clone)]
pub struct FaceMeasure {
    lo: Vec<f64>,
    hi: Vec<f64>,
    t: f64,
}

impl FaceMeasure {
    pub fn bottom_face(q: &SPCube) -> Self {
        let b = q.to_box();
        let n = q.dim();
        Self { lo: b.lo[..n].to_vec(), hi: b.hi[..n].to_vec(), t: b.lo[n] }
    }
}

impl BoxMeasure for FaceMeasure {
    fn measure(&self, b: &Aabb) -> f64 {
        let n = self.lo.len();
        if !(b.lo[n] <= self.t && self.t <= b.hi[n]) {
            return 0.0;
        }
        let mut frac = 1.0;
        for i in 0..n {
            let w = (self.hi[i].min(b.hi[i]) - self.lo[i].max(b.lo[i])).max(0.0);
            frac *= w / (self.hi[i] - self.lo[i]);
        }
        frac
    }

    fn total(&self) -> f64 {
        1.0
    }
}

/// s-parabolic distance between two boxes (0 if they meet).
pub fn box_sp_distance(a: &Aabb, b: &Aabb, s: f64) -> f64 {
    let n = a.len() - 1;
    let gap = |i: usize| (b.lo[i] - a.hi[i]).max(a.lo[i] - b.hi[i]).max(0.0);
    let dx = (0..n).map(|i| gap(i) * gap(i)).sum::<f64>().sqrt();
    dx.max(gap(n).powf(1.0 / (2.0 * s)))
}

/// Outcome of [`growth_check`].
#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub trials: usize,
    /// max μ(Q)/ℓ(Q)^{n+1} over the sampled cubes
    pub max_ratio: f64,
    /// (d+1)dⁿκ
    pub bound: f64,
    pub passed: bool,
    pub worst_cube: Option<(Vec<f64>, f64)>,
}

/// Sample random s-parabolic cubes near the set and compare μ_k(Q)/ℓ^{n+1}
/// with (d+1)dⁿκ.
pub fn growth_check<R: Rng>(tree: &CantorTree, trials: usize, kappa: f64, rng: &mut R) -> Result<GrowthReport> {
    let thetas = tree.thetas();
    if let Some((j, th)) = thetas.iter().enumerate().find(|(_, &th)| th > kappa * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("θ_{j} = {th} exceeds κ = {kappa}")));
    }
    let n = tree.n();
    let s = tree.s();
    let k = tree.k();
    let lo_side = (0.05 * tree.side(k)).ln();
    let hi_side = 2f64.ln();
    let mut max_ratio: f64 = 0.0;
    let mut worst = None;
    for _ in 0..trials {
        let side = rng.random_range(lo_side..hi_side).exp();
        let anchor = tree.cube_box(k, rng.random_range(0..tree.count(k)));
        let side_t = side.powf(2.0 * s);
        let mut x = Vec::with_capacity(n);
        for i in 0..n {
            x.push(rng.random_range(anchor.lo[i] - side..anchor.hi[i]));
        }
        let t = rng.random_range(anchor.lo[n] - side_t..anchor.hi[n]);
        let q = SPCube::new(SPoint::new(x.clone(), t)?, side, s)?;
        let ratio = tree.mu_of_box(&q.to_box()) / side.powi(n as i32 + 1);
        if ratio > max_ratio {
            max_ratio = ratio;
            let mut c = x;
            c.push(t);
            worst = Some((c, side));
        }
    }
    let bound = tree.branching() as f64 * kappa;
    Ok(GrowthReport { trials, max_ratio, bound, passed: max_ratio <= bound * (1.0 + 1e-12), worst_cube: worst })
}

/// Least j₀ ≥ 0 with μ(3^{j₀+1}Q) ≤ 3^{n+2} μ(3^{j₀}Q) and μ(3^{j₀}Q) > 0.
pub fn doubling_search(q: &SPCube, mu: &dyn BoxMeasure, n: usize) -> Result<usize> {
    const MAX_STEPS: usize = 60;
    let beta = 3f64.powi(n as i32 + 2);
    let mut prev = mu.measure(&q.to_box());
    for j in 0..MAX_STEPS {
        let next = mu.measure(&sp_dilate(q, 3f64.powi(j as i32 + 1))?.to_box());
        if prev > 0.0 && next <= beta * prev {
            return Ok(j);
        }
        prev = next;
    }
    Err(Error::NotApplicable(format!("no (3, 3^(n+2))-doubling dilation within {MAX_STEPS} steps")))
}

/// μ of {x̄ ∈ 2Q : dist(x̄, ∂Q) ≤ αℓ}. Exact for n = 1; for n ≥ 2 the outer part
/// uses the ℓ∞-expanded box, an over-estimate.
pub fn shell_measure(q: &SPCube, mu: &dyn BoxMeasure, alpha: f64) -> f64 {
    let b = q.to_box();
    let n = q.dim();
    let a = alpha * q.side();
    let at = a.powf(2.0 * q.s());
    let two = sp_dilate(q, 2.0).expect("positive factor").to_box();
    let mut outer = b.clone();
    let mut inner = b.clone();
    for i in 0..=n {
        let e = if i < n { a } else { at };
        outer.lo[i] -= e;
        outer.hi[i] += e;
        inner.lo[i] += e;
        inner.hi[i] -= e;
    }
    let outer_mass = mu.measure(&outer.intersect(&two));
    let inner_mass = if inner.is_empty() { 0.0 } else { mu.measure(&inner) };
    (outer_mass - inner_mass).max(0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallBoundaryReport {
    pub passed: bool,
    /// α with the largest ratio μ(shell)/(αμ(2Q))
    pub worst_alpha: f64,
    pub worst_ratio: f64,
    /// μ(2Q) = 0: the predicate holds trivially
    pub vacuous: bool,
}

/// Check μ(shell_α) ≤ A α μ(2Q) on the given α grid.
pub fn small_boundary_check(q: &SPCube, mu: &dyn BoxMeasure, a: f64, alphas: &[f64]) -> Result<SmallBoundaryReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("A must be positive, got {a}")));
    }
    let m2 = mu.measure(&sp_dilate(q, 2.0)?.to_box());
    if m2 == 0.0 {
        return Ok(SmallBoundaryReport { passed: true, worst_alpha: f64::NAN, worst_ratio: 0.0, vacuous: true });
    }
    let mut worst_alpha = f64::NAN;
    let mut worst_ratio = f64::NEG_INFINITY;
    for &al in alphas {
        let ratio = shell_measure(q, mu, al) / (al * m2);
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_alpha = al;
        }
    }
    Ok(SmallBoundaryReport { passed: worst_ratio <= a * (1.0 + 1e-12), worst_alpha, worst_ratio, vacuous: false })
}
