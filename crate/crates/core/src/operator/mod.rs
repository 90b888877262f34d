//! The singular convolution operator
//!
//! 𝒫^s_μ f(x̄) = ∫ ∇_x P_s(x̄ − ȳ) f(ȳ) dμ(ȳ)
//!
//! for measures that are uniform on finitely many space-time boxes (the Cantor
//! measures μ_k, their restrictions and rescalings), together with the
//! conjugate operator (kernel ∇_x P_s(−x̄)), L²(μ) norms, the cube-averaged
//! matrix, operator-norm lower bounds and sampled sup-norms.
//!
//! Inner integrals over source boxes are done in closed form through the time
//! primitive of the kernel (exact for n = 1); outer integrals over target boxes
//! use graded tensor Gauss rules, see [`QuadratureSpec`].

mod boxfield;
mod engine;
mod grid;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use self::boxfield::BoxField;
use self::engine::{norm, Rules};
use self::grid::Grid;
use crate::cantor::CantorTree;
use crate::error::{check_s_capacity, Error, Result};
use crate::geometry::{sp_dilate, Aabb, SPCube, SPoint};
use crate::kernel::HeatKernel;
use crate::quad::{CompensatedSum, Rule};

/// Geometric ratio of the graded rules.
const GRADING_RATIO: f64 = 0.25;

/// Quadrature controls for all target-side integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Gauss nodes per axis: the whole rule for far pairs, per panel for near pairs.
    pub base_order: usize,
    /// Number of geometric refinements towards each face in the near-pair rule.
    pub near_refine: usize,
    /// A pair is near when its s-parabolic gap is below this many target sides.
    pub near_threshold: f64,
    /// Near-pair entries whose embedded error estimate exceeds this fraction of
    /// the target's total ∫|field| over all unit-density sources are flagged.
    pub target_rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { base_order: 8, near_refine: 4, near_threshold: 2.0, target_rel_tol: 1e-6 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base_order < 2 {
            return Err(Error::InvalidArgument(format!("quadrature base_order must be ≥ 2, got {}", self.base_order)));
        }
        if !(self.near_threshold >= 0.0 && self.near_threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("near_threshold must be finite and ≥ 0, got {}", self.near_threshold)));
        }
        if !(self.target_rel_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("target_rel_tol must be positive, got {}", self.target_rel_tol)));
        }
        Ok(())
    }

    /// The same specification with twice the Gauss order.
    pub fn doubled(&self) -> Self {
        Self { base_order: 2 * self.base_order, ..*self }
    }

    pub(crate) fn fine_rule(&self) -> Rule {
        Rule::graded(self.base_order, self.near_refine, GRADING_RATIO)
    }

    pub(crate) fn check_rule(&self) -> Rule {
        Rule::graded((self.base_order / 2).max(1), self.near_refine, GRADING_RATIO)
    }

    pub(crate) fn coarse_rule(&self) -> Rule {
        Rule::gauss(self.base_order)
    }

    /// Nodes per axis of the near-pair rule.
    pub fn fine_nodes_per_axis(&self) -> usize {
        self.base_order * 2 * (self.near_refine + 1)
    }
}

/// A measure with constant density on each of finitely many boxes in ℝ^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceMeasure {
    n: usize,
    s: f64,
    boxes: Vec<Aabb>,
    density: Vec<f64>,
}

impl PieceMeasure {
    pub fn new(n: usize, s: f64, boxes: Vec<Aabb>, density: Vec<f64>) -> Result<Self> {
        if boxes.len() != density.len() {
            return Err(Error::InvalidArgument(format!("{} boxes but {} densities", boxes.len(), density.len())));
        }
        for (b, d) in boxes.iter().zip(&density) {
            if b.len() != n + 1 || b.is_empty() {
                return Err(Error::InvalidArgument(format!("box {b:?} is empty or not in ℝ^{}", n + 1)));
            }
            if !(d.is_finite() && *d >= 0.0) {
                return Err(Error::InvalidArgument(format!("density {d} must be finite and non-negative")));
            }
        }
        Ok(Self { n, s, boxes, density })
    }

    /// μ_k: uniform on the generation-k cubes, each of mass ((d+1)dⁿ)^{−k}.
    pub fn from_tree(tree: &CantorTree) -> Self {
        let k = tree.k();
        let boxes: Vec<Aabb> = (0..tree.count(k)).map(|i| tree.cube_box(k, i)).collect();
        let mass = tree.cube_mass(k);
        let density = boxes.iter().map(|b| mass / b.volume()).collect();
        Self { n: tree.n(), s: tree.s(), boxes, density }
    }

    /// μ restricted to `r` (pieces clipped, empty ones dropped).
    pub fn restricted(&self, r: &Aabb) -> Self {
        let mut boxes = Vec::new();
        let mut density = Vec::new();
        for (b, d) in self.boxes.iter().zip(&self.density) {
            let c = b.intersect(r);
            if !c.is_empty() {
                boxes.push(c);
                density.push(*d);
            }
        }
        Self { n: self.n, s: self.s, boxes, density }
    }

    /// αμ.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self { density: self.density.iter().map(|d| d * alpha).collect(), ..self.clone() }
    }

    /// Push-forward under x̄ ↦ −x̄.
    pub fn negated(&self) -> Self {
        Self { boxes: self.boxes.iter().map(Aabb::neg).collect(), ..self.clone() }
    }

    /// Push-forward under t ↦ 2t₀ − t.
    pub fn time_mirrored(&self, t0: f64) -> Self {
        let n = self.n;
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                let mut m = b.clone();
                m.lo[n] = 2.0 * t0 - b.hi[n];
                m.hi[n] = 2.0 * t0 - b.lo[n];
                m
            })
            .collect();
        Self { boxes, ..self.clone() }
    }

    /// Push-forward under x_axis ↦ 2c − x_axis.
    pub fn space_mirrored(&self, axis: usize, c: f64) -> Self {
        let boxes = self
            .boxes
            .iter()
            .map(|b| {
                let mut m = b.clone();
                m.lo[axis] = 2.0 * c - b.hi[axis];
                m.hi[axis] = 2.0 * c - b.lo[axis];
                m
            })
            .collect();
        Self { boxes, ..self.clone() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }

    pub fn density(&self, i: usize) -> f64 {
        self.density[i]
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.density[i] * self.boxes[i].volume()
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.mass(i)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        crate::quad::compensated_sum(self.masses())
    }

    /// μ(r).
    pub fn mass_of_box(&self, r: &Aabb) -> f64 {
        crate::quad::compensated_sum(self.boxes.iter().zip(&self.density).map(|(b, d)| d * b.intersect(r).volume()))
    }
}

/// A function that is constant on each piece of the measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Constant(f64),
    PerPiece(Vec<f64>),
}

impl Weights {
    pub fn ones() -> Self {
        Weights::Constant(1.0)
    }

    /// χ of piece `i` among `len` pieces.
    pub fn indicator(len: usize, i: usize) -> Self {
        let mut v = vec![0.0; len];
        v[i] = 1.0;
        Weights::PerPiece(v)
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        match self {
            Weights::Constant(c) => *c,
            Weights::PerPiece(v) => v[i],
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        match self {
            Weights::PerPiece(v) if v.len() != len => {
                Err(Error::InvalidArgument(format!("{} weights for {len} pieces", v.len())))
            }
            Weights::PerPiece(v) if v.iter().any(|x| !x.is_finite()) => Err(Error::InvalidArgument("non-finite weight".into())),
            Weights::Constant(c) if !c.is_finite() => Err(Error::InvalidArgument("non-finite weight".into())),
            _ => Ok(()),
        }
    }
}

/// One n-vector per piece.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeVector {
    n: usize,
    data: Vec<f64>,
}

impl CubeVector {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || !data.len().is_multiple_of(n) {
            return Err(Error::InvalidArgument(format!("data length {} is not a multiple of n = {n}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite entry".into()));
        }
        Ok(Self { n, data })
    }

    pub fn zeros(n: usize, len: usize) -> Self {
        Self { n, data: vec![0.0; n * len] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }
}

/// Field values on the fine grid of one piece.
#[derive(Debug, Clone)]
pub struct NodeValues {
    axes: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    field: Vec<f64>,
    n: usize,
}

impl NodeValues {
    /// Calls `f(coordinates, Lebesgue weight, field)` for every node.
    pub fn for_each(&self, mut f: impl FnMut(&[f64], f64, &[f64])) {
        let g = Grid { axes: self.axes.clone(), weights: self.weights.clone() };
        let n = self.n;
        g.for_each(|i, c, w| f(c, w, &self.field[i * n..(i + 1) * n]));
    }

    pub fn len(&self) -> usize {
        self.field.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }
}

/// M[a][b] = μ(Q_a)^{−1} ∫_{Q_a}∫_{Q_b} ∇_x P_s(x̄ − ȳ) dμ(ȳ) dμ(x̄): the
/// μ-average over Q_a of the field of μ restricted to Q_b.
#[derive(Debug, Clone)]
pub struct PairKernelMatrix {
    n: usize,
    masses: Vec<f64>,
    entries: Vec<f64>,
    errors: Vec<f64>,
    flagged: Vec<(usize, usize)>,
}

impl PairKernelMatrix {
    pub fn count(&self) -> usize {
        self.masses.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn entry(&self, a: usize, b: usize) -> &[f64] {
        let c = self.count();
        &self.entries[(a * c + b) * self.n..(a * c + b + 1) * self.n]
    }

    /// Estimated absolute error of M[a][b] (zero for far pairs).
    pub fn error(&self, a: usize, b: usize) -> f64 {
        self.errors[a * self.count() + b]
    }

    /// Pairs whose error estimate exceeded the requested tolerance.
    pub fn flagged(&self) -> &[(usize, usize)] {
        &self.flagged
    }

    /// (Σ_b M[a][b] f_b)_a: the cube averages of 𝒫(fμ).
    pub fn apply(&self, f: &[f64]) -> CubeVector {
        let c = self.count();
        let n = self.n;
        let mut out = CubeVector::zeros(n, c);
        for a in 0..c {
            for comp in 0..n {
                let mut acc = CompensatedSum::new();
                for (b, fb) in f.iter().enumerate() {
                    acc.add(self.entry(a, b)[comp] * fb);
                }
                out.get_mut(a)[comp] = acc.value();
            }
        }
        out
    }

    /// K[a][b] = M[a][b] / μ(Q_b): the interaction per unit source mass.
    pub fn unit_mass_kernel(&self) -> Vec<f64> {
        let c = self.count();
        let mut k = self.entries.clone();
        for a in 0..c {
            for b in 0..c {
                let m = self.masses[b];
                for v in &mut k[(a * c + b) * self.n..(a * c + b + 1) * self.n] {
                    *v = if m > 0.0 { *v / m } else { 0.0 };
                }
            }
        }
        k
    }

    /// Largest singular value of the piecewise-constant restriction, see [`op_norm_lower`].
    pub fn op_norm_lower(&self) -> Result<OpNormEstimate> {
        op_norm_lower(&self.unit_mass_kernel(), self.n, &self.masses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OpNormEstimate {
    pub value: f64,
    /// power-iteration steps; 0 when a dense decomposition was used
    pub iterations: usize,
}

/// Piece counts up to which operator norms come from a dense eigen- or
/// singular-value decomposition. Power iteration stalls on the clustered top
/// spectra that the symmetric constructions produce, so it is only used for
/// larger problems, where the O(c³) decomposition is too costly.
pub const DENSE_LIMIT: usize = 1500;

/// A deterministic start vector without the mirror symmetries of the Cantor
/// construction.
fn generic_start(c: usize) -> Vec<f64> {
    (0..c).map(|i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract() * if i % 3 == 1 { -1.0 } else { 1.0 }).collect()
}

/// Largest singular value of B[a][b] = √(μ_a μ_b) K[a][b] (K: per-unit-mass
/// interaction, n-vector entries), i.e. the norm of f ↦ (Σ_b K[a][b] f_b μ_b)_a
/// from L²(μ) to L²(μ; ℝⁿ) on piecewise-constant f. Up to [`DENSE_LIMIT`]
/// pieces this is a dense singular value decomposition; beyond it, power
/// iteration on BᵀB from the constant function and from a generic vector, each
/// run until the estimate changes by less than 1e-10 relative, keeping the
/// larger value (the iterates increase monotonically, so every iterate is a
/// lower bound).
pub fn op_norm_lower(kernel: &[f64], n: usize, masses: &[f64]) -> Result<OpNormEstimate> {
    let c = masses.len();
    if kernel.len() != c * c * n {
        return Err(Error::InvalidArgument(format!("kernel has {} entries, expected {}", kernel.len(), c * c * n)));
    }
    if c == 0 {
        return Ok(OpNormEstimate { value: 0.0, iterations: 0 });
    }
    let sq: Vec<f64> = masses.iter().map(|m| m.max(0.0).sqrt()).collect();
    let mut b = vec![0.0; c * c * n];
    for a in 0..c {
        for j in 0..c {
            for comp in 0..n {
                let idx = (a * c + j) * n + comp;
                b[idx] = sq[a] * sq[j] * kernel[idx];
            }
        }
    }
    if b.iter().all(|v| *v == 0.0) {
        return Ok(OpNormEstimate { value: 0.0, iterations: 0 });
    }
    if c <= DENSE_LIMIT {
        let m = DMatrix::from_fn(c * n, c, |row, j| b[((row / n) * c + j) * n + row % n]);
        let value = m.singular_values().iter().copied().fold(0.0, f64::max);
        return Ok(OpNormEstimate { value, iterations: 0 });
    }
    // the constant function (√μ in these coordinates) and a generic start
    let constant: Vec<f64> = if sq.iter().any(|v| *v > 0.0) { sq.clone() } else { vec![1.0; c] };
    let generic: Vec<f64> = generic_start(c).iter().zip(&sq).map(|(g, s)| g * s).collect();
    let first = singular_power_iteration(&b, c, n, constant)?;
    let second = singular_power_iteration(&b, c, n, generic)?;
    Ok(OpNormEstimate { value: first.value.max(second.value), iterations: first.iterations + second.iterations })
}

fn singular_power_iteration(b: &[f64], c: usize, n: usize, mut g: Vec<f64>) -> Result<OpNormEstimate> {
    const MAX_ITER: usize = 20_000;
    let mut u = vec![0.0; c * n];
    let mut best: f64 = 0.0;
    for it in 1..=MAX_ITER {
        let gn = norm(&g);
        g.iter_mut().for_each(|v| *v /= gn);
        // u = B g
        for a in 0..c {
            for comp in 0..n {
                let mut acc = 0.0;
                for j in 0..c {
                    acc += b[(a * c + j) * n + comp] * g[j];
                }
                u[a * n + comp] = acc;
            }
        }
        let sigma = norm(&u);
        let prev = best;
        best = best.max(sigma);
        if sigma == 0.0 {
            // g lies in the kernel of B; restart from a generic vector
            g = (0..c).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
            continue;
        }
        if it > 1 && (sigma - prev).abs() <= 1e-10 * sigma {
            return Ok(OpNormEstimate { value: best, iterations: it });
        }
        // g = Bᵀ u
        for j in 0..c {
            let mut acc = 0.0;
            for a in 0..c {
                for comp in 0..n {
                    acc += b[(a * c + j) * n + comp] * u[a * n + comp];
                }
            }
            g[j] = acc;
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITER, best })
}

/// G[b][c] = ∫ 𝒫(μ|_{Q_b}) · 𝒫(μ|_{Q_c}) dμ: the quadratic form of 𝒫 on
/// piecewise-constant functions, ‖𝒫(fμ)‖²_{L²(μ)} = Σ_{b,c} f_b G[b][c] f_c.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    masses: Vec<f64>,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn count(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn entry(&self, b: usize, c: usize) -> f64 {
        self.entries[b * self.count() + c]
    }

    /// fᵀGf = ‖𝒫(fμ)‖²_{L²(μ)}.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let c = self.count();
        let mut acc = CompensatedSum::new();
        for b in 0..c {
            for (j, fj) in f.iter().enumerate() {
                acc.add(f[b] * self.entries[b * c + j] * fj);
            }
        }
        acc.value()
    }

    /// The norm of 𝒫 restricted to piecewise-constant functions:
    /// √λ_max of the pencil (G, D), D = diag(μ(Q_b)).
    ///
    /// Up to [`DENSE_LIMIT`] pieces, λ_max is the top eigenvalue of
    /// D^{−1/2}GD^{−1/2}, whose entries G[b][c]/√(μ_b μ_c) scale exactly under
    /// power-of-two scalings of μ. Larger problems use power iteration on
    /// D^{−1}G from two starts, keeping the larger value: the constant function
    /// (its Rayleigh quotient is ‖𝒫μ‖²/‖1‖², and the quotients only increase,
    /// so the result never falls below ‖𝒫μ‖/‖1‖) and a generic vector, which
    /// also reaches eigenvectors that the constant start misses by symmetry.
    pub fn op_norm_lower(&self) -> Result<OpNormEstimate> {
        let c = self.count();
        if c == 0 || self.entries.iter().all(|v| *v == 0.0) {
            return Ok(OpNormEstimate { value: 0.0, iterations: 0 });
        }
        if c <= DENSE_LIMIT {
            return Ok(OpNormEstimate { value: self.dense_lambda_max().max(0.0).sqrt(), iterations: 0 });
        }
        let constant = vec![1.0; c];
        let first = self.power_iteration(constant)?;
        let second = self.power_iteration(generic_start(c))?;
        Ok(OpNormEstimate { value: first.value.max(second.value), iterations: first.iterations + second.iterations })
    }

    fn dense_lambda_max(&self) -> f64 {
        let live: Vec<usize> = (0..self.count()).filter(|&b| self.masses[b] > 0.0).collect();
        let c = self.count();
        let scaled = DMatrix::from_fn(live.len(), live.len(), |i, j| {
            let (b, d) = (live[i], live[j]);
            let g = 0.5 * (self.entries[b * c + d] + self.entries[d * c + b]);
            g / (self.masses[b] * self.masses[d]).sqrt()
        });
        scaled.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn power_iteration(&self, mut x: Vec<f64>) -> Result<OpNormEstimate> {
        const MAX_ITER: usize = 20_000;
        let c = self.count();
        let mut gx = vec![0.0; c];
        let mut prev = 0.0;
        let mut best: f64 = 0.0;
        for it in 1..=MAX_ITER {
            let top = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if top == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= top);
            for b in 0..c {
                let mut acc = 0.0;
                for j in 0..c {
                    acc += self.entries[b * c + j] * x[j];
                }
                gx[b] = acc;
            }
            let num: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
            let den: f64 = x.iter().zip(&self.masses).map(|(a, m)| m * a * a).sum();
            let lambda = if den > 0.0 { num / den } else { 0.0 };
            best = best.max(lambda);
            if it > 1 && (lambda - prev).abs() <= 1e-10 * lambda.abs() {
                return Ok(OpNormEstimate { value: best.max(0.0).sqrt(), iterations: it });
            }
            prev = lambda;
            for (b, v) in x.iter_mut().enumerate() {
                *v = if self.masses[b] > 0.0 { gx[b] / self.masses[b] } else { 0.0 };
            }
        }
        if best == 0.0 {
            return Ok(OpNormEstimate { value: 0.0, iterations: 0 });
        }
        Err(Error::NoConvergence { iterations: MAX_ITER, best: best.max(0.0).sqrt() })
    }
}

/// Everything computed in one pass over all target pieces.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// ∫ |𝒫(fμ)|² dμ
    pub l2_sq: f64,
    /// ∫ |𝒫(fμ)| dμ
    pub abs_integral: f64,
    /// ∫ 𝒫(fμ) dμ
    pub signed_integral: Vec<f64>,
    /// μ-averages of 𝒫(fμ) over every piece
    pub averages: CubeVector,
    pub matrix: PairKernelMatrix,
    /// fine-grid field values per piece, when requested
    pub nodes: Option<Vec<NodeValues>>,
}

impl Analysis {
    /// |∫𝒫(fμ)dμ| / ∫|𝒫(fμ)|dμ.
    pub fn relative_cancellation(&self) -> f64 {
        if self.abs_integral == 0.0 {
            0.0
        } else {
            norm(&self.signed_integral) / self.abs_integral
        }
    }

    /// Number of near pairs whose error estimate exceeded the tolerance.
    pub fn flagged(&self) -> usize {
        self.matrix.flagged.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupNormEstimate {
    /// max |𝒫μ| over the samples
    pub value: f64,
    pub argmax: Vec<f64>,
    pub samples: usize,
    pub random_budget: usize,
}

/// 𝒫^s_μ for a fixed kernel, measure and quadrature.
pub struct Operator<'k> {
    kernel: &'k HeatKernel,
    bf: BoxField<'k>,
    rules: Rules,
    measure: PieceMeasure,
    quad: QuadratureSpec,
}

impl<'k> Operator<'k> {
    /// Requires s ∈ (1/2, 1], where the kernel singularity |x̄|^{−(n+1)} is
    /// integrable against (n+1)-dimensional measures.
    pub fn new(kernel: &'k HeatKernel, measure: PieceMeasure, quad: QuadratureSpec) -> Result<Self> {
        check_s_capacity(kernel.s())?;
        quad.validate()?;
        if kernel.n() != measure.n() || kernel.s() != measure.s() {
            return Err(Error::InvalidArgument(format!(
                "kernel (n={}, s={}) does not match measure (n={}, s={})",
                kernel.n(),
                kernel.s(),
                measure.n(),
                measure.s()
            )));
        }
        let prim = kernel.time_primitive()?;
        let bf = BoxField::new(prim, kernel.n(), kernel.s(), quad.base_order, quad.near_refine);
        Ok(Self { kernel, bf, rules: Rules::new(&quad), measure, quad })
    }

    /// Same kernel and quadrature on another measure.
    pub fn with_measure(&self, measure: PieceMeasure) -> Result<Operator<'k>> {
        Operator::new(self.kernel, measure, self.quad)
    }

    /// Same kernel and measure at another quadrature.
    pub fn with_quad(&self, quad: QuadratureSpec) -> Result<Operator<'k>> {
        Operator::new(self.kernel, self.measure.clone(), quad)
    }

    /// The conjugate operator, realised as 𝒫 for the measure reflected through
    /// the origin: 𝒫*_μ f(x̄) = 𝒫_{μ̃} f̃(−x̄) with μ̃ = (−id)#μ.
    pub fn conjugate(&self) -> Result<Operator<'k>> {
        self.with_measure(self.measure.negated())
    }

    pub fn measure(&self) -> &PieceMeasure {
        &self.measure
    }

    pub fn quad(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn kernel(&self) -> &HeatKernel {
        self.kernel
    }

    fn coords(&self, p: &SPoint) -> Result<Vec<f64>> {
        if p.dim() != self.measure.n() {
            return Err(Error::InvalidArgument(format!("point has {} spatial coordinates, expected {}", p.dim(), self.measure.n())));
        }
        let mut c = p.x().to_vec();
        c.push(p.t());
        Ok(c)
    }

    fn field_at(&self, w: &Weights, c: &[f64], eps: f64, negate_boxes: bool) -> Vec<f64> {
        let n = self.measure.n();
        let mut acc = vec![CompensatedSum::new(); n];
        let mut tmp = vec![0.0; n];
        for (i, b) in self.measure.boxes().iter().enumerate() {
            let wi = w.get(i) * self.measure.density(i);
            if wi == 0.0 {
                continue;
            }
            tmp.iter_mut().for_each(|v| *v = 0.0);
            if negate_boxes {
                self.bf.accumulate(c, &b.neg(), eps, wi, &mut tmp);
            } else {
                self.bf.accumulate(c, b, eps, wi, &mut tmp);
            }
            for (a, v) in acc.iter_mut().zip(&tmp) {
                a.add(*v);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// 𝒫_{μ,ε}(f)(p): the field of fμ with the open s-parabolic ball B(p, ε)
    /// removed (ε = 0: no truncation).
    pub fn field(&self, w: &Weights, p: &SPoint, eps: f64) -> Result<Vec<f64>> {
        w.check(self.measure.len())?;
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("truncation radius must be ≥ 0, got {eps}")));
        }
        Ok(self.field_at(w, &self.coords(p)?, eps, false))
    }

    /// 𝒫*_{μ,ε}(f)(p) = ∫_{|ȳ−p|≥ε} ∇_x P_s(ȳ − p) f(ȳ) dμ(ȳ).
    pub fn conj_field(&self, w: &Weights, p: &SPoint, eps: f64) -> Result<Vec<f64>> {
        w.check(self.measure.len())?;
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("truncation radius must be ≥ 0, got {eps}")));
        }
        let c: Vec<f64> = self.coords(p)?.iter().map(|v| -v).collect();
        Ok(self.field_at(w, &c, eps, true))
    }

    /// M[a][b] with its error estimate and flag.
    pub fn pair_integral(&self, a: usize, b: usize) -> Result<PairEntry> {
        let len = self.measure.len();
        if a >= len || b >= len {
            return Err(Error::InvalidArgument(format!("pair ({a}, {b}) out of range for {len} pieces")));
        }
        let tb = &self.measure.boxes()[a];
        let (v, err, flagged) = engine::pair(&self.bf, &self.rules, &self.quad, self.measure.s(), tb, &self.measure.boxes()[b]);
        let f = self.measure.density(b) / tb.volume();
        Ok(PairEntry { value: v.iter().map(|x| x * f).collect(), error: err * f, flagged })
    }

    /// One pass over all targets: L² and L¹ norms of 𝒫(fμ), its integral, cube
    /// averages and the averaged matrix.
    pub fn analyze(&self, w: &Weights, keep_nodes: bool) -> Result<Analysis> {
        w.check(self.measure.len())?;
        let outs = engine::run(&self.bf, &self.rules, &self.quad, &self.measure, w, keep_nodes);
        let c = self.measure.len();
        let n = self.measure.n();
        let masses = self.measure.masses();
        let mut entries = vec![0.0; c * c * n];
        let mut errors = vec![0.0; c * c];
        let mut flagged = Vec::new();
        for (a, out) in outs.iter().enumerate() {
            let vol = self.measure.boxes()[a].volume();
            for b in 0..c {
                let f = self.measure.density(b) / vol;
                for comp in 0..n {
                    entries[(a * c + b) * n + comp] = out.row[b * n + comp] * f;
                }
                errors[a * c + b] = out.row_err[b] * f;
            }
            flagged.extend(out.flagged.iter().map(|&b| (a, b)));
        }
        let matrix = PairKernelMatrix { n, masses: masses.clone(), entries, errors, flagged };
        let fvec: Vec<f64> = (0..c).map(|i| w.get(i)).collect();
        let averages = matrix.apply(&fvec);
        let mut signed = vec![CompensatedSum::new(); n];
        let mut l2 = CompensatedSum::new();
        let mut abs = CompensatedSum::new();
        for (a, out) in outs.iter().enumerate() {
            for (comp, acc) in signed.iter_mut().enumerate() {
                acc.add(masses[a] * averages.get(a)[comp]);
            }
            l2.add(self.measure.density(a) * out.l2);
            abs.add(self.measure.density(a) * out.abs);
        }
        let nodes = keep_nodes.then(|| outs.into_iter().map(|o| o.nodes.expect("nodes requested")).collect());
        Ok(Analysis {
            l2_sq: l2.value(),
            abs_integral: abs.value(),
            signed_integral: signed.iter().map(CompensatedSum::value).collect(),
            averages,
            matrix,
            nodes,
        })
    }

    /// The Gram matrix of the piece fields. Targets are processed in parallel
    /// chunks and summed in index order.
    pub fn gram(&self) -> Result<GramMatrix> {
        let c = self.measure.len();
        let mut entries = vec![0.0; c * c];
        let chunk = (2 * rayon::current_num_threads()).max(1);
        let mut start = 0;
        while start < c {
            let end = (start + chunk).min(c);
            let parts: Vec<Vec<f64>> = (start..end)
                .into_par_iter()
                .map(|a| engine::gram_target(&self.bf, &self.rules, &self.quad, &self.measure, a))
                .collect();
            for part in parts {
                for (e, v) in entries.iter_mut().zip(&part) {
                    *e += v;
                }
            }
            start = end;
        }
        Ok(GramMatrix { masses: self.measure.masses(), entries })
    }

    /// Lower bound for ‖𝒫‖_{L²(μ)→L²(μ)}: its norm on piecewise-constant functions.
    pub fn op_norm_lower(&self) -> Result<OpNormEstimate> {
        self.gram()?.op_norm_lower()
    }

    /// ‖𝒫(fμ)‖²_{L²(μ)}.
    pub fn l2_norm_sq(&self, w: &Weights) -> Result<f64> {
        Ok(self.analyze(w, false)?.l2_sq)
    }

    /// ‖𝒫*(fμ)‖²_{L²(μ)}.
    pub fn conj_l2_norm_sq(&self, w: &Weights) -> Result<f64> {
        self.conjugate()?.l2_norm_sq(w)
    }

    pub fn averaged_matrix(&self) -> Result<PairKernelMatrix> {
        Ok(self.analyze(&Weights::ones(), false)?.matrix)
    }

    /// The averaged matrix of the conjugate operator.
    pub fn conj_averaged_matrix(&self) -> Result<PairKernelMatrix> {
        self.conjugate()?.averaged_matrix()
    }

    /// μ-averages of 𝒫(fμ) over each piece.
    pub fn cube_averages(&self, w: &Weights) -> Result<CubeVector> {
        Ok(self.analyze(w, false)?.averages)
    }

    /// The μ-average of 𝒫(fμ) over piece `a`, by direct field evaluation at
    /// every node of the fine rule (no far-field splitting).
    pub fn field_average_direct(&self, a: usize, w: &Weights) -> Result<Vec<f64>> {
        w.check(self.measure.len())?;
        let b = self.measure.boxes().get(a).ok_or_else(|| Error::InvalidArgument(format!("piece {a} out of range")))?;
        let g = Grid::on_box(&self.rules.fine, b);
        let mut pts = Vec::with_capacity(g.len());
        g.for_each(|_, c, wt| pts.push((c.to_vec(), wt)));
        let vals: Vec<(Vec<f64>, f64)> = pts.into_par_iter().map(|(c, wt)| (self.field_at(w, &c, 0.0, false), wt)).collect();
        let n = self.measure.n();
        let vol = b.volume();
        Ok((0..n).map(|comp| crate::quad::compensated_sum(vals.iter().map(|(v, wt)| wt * v[comp])) / vol).collect())
    }

    /// Structured sample points: piece centres, the centres of the
    /// upper-right and lower-left corner subcubes, and points straddling each
    /// piece in time at dyadic s-parabolic distances.
    fn structured_samples(&self) -> Vec<Vec<f64>> {
        let n = self.measure.n();
        let s = self.measure.s();
        let mut out = Vec::new();
        for b in self.measure.boxes() {
            let center: Vec<f64> = b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect();
            let side = engine::box_scale(b, s);
            let sub = 0.25f64.powf(2.0 * s);
            let mut upper = Vec::with_capacity(n + 1);
            let mut lower = Vec::with_capacity(n + 1);
            for d in 0..n {
                let w = b.hi[d] - b.lo[d];
                upper.push(b.hi[d] - w / 8.0);
                lower.push(b.lo[d] + w / 8.0);
            }
            let tw = b.hi[n] - b.lo[n];
            upper.push(b.hi[n] - 0.5 * sub * tw);
            lower.push(b.lo[n] + 0.5 * sub * tw);
            out.push(center.clone());
            out.push(upper);
            out.push(lower);
            for m in 0..4 {
                let dt = (side * 0.5f64.powi(m)).powf(2.0 * s);
                let mut above = center.clone();
                above[n] = b.hi[n] + dt;
                let mut below = center.clone();
                below[n] = b.lo[n] - dt;
                out.push(above);
                out.push(below);
            }
        }
        out
    }

    /// max |𝒫μ| over structured samples plus `budget` uniform points in 2Q⁰
    /// (Q⁰ the unit cube): a lower bound for ‖𝒫μ‖_∞.
    pub fn sup_norm_estimate<R: Rng>(&self, budget: usize, rng: &mut R) -> Result<SupNormEstimate> {
        let n = self.measure.n();
        let mut pts = self.structured_samples();
        let big = sp_dilate(&SPCube::unit(n, self.measure.s()), 2.0)?.to_box();
        for _ in 0..budget {
            pts.push((0..=n).map(|d| rng.random_range(big.lo[d]..big.hi[d])).collect());
        }
        let w = Weights::ones();
        let vals: Vec<f64> = pts.par_iter().map(|c| norm(&self.field_at(&w, c, 0.0, false))).collect();
        let (mut best, mut arg) = (0.0, 0);
        for (i, v) in vals.iter().enumerate() {
            if *v > best {
                best = *v;
                arg = i;
            }
        }
        Ok(SupNormEstimate { value: best, argmax: pts[arg].clone(), samples: pts.len(), random_budget: budget })
    }
}

/// One entry of the averaged matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    pub value: Vec<f64>,
    pub error: f64,
    pub flagged: bool,
}
