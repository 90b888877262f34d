//! Capacity-level quantities for one generation of a Cantor construction and
//! sweeps over constructions.
//!
//! The comparison target is the density bound (Σ_{j≤k} θ_j²)^{−1/2}. Every
//! estimate below is dimensionless once multiplied by σ_k^{1/2} = (Σθ²)^{1/2};
//! the sweep reports the spread of those ratios.

mod sweep;

pub use sweep::{compute_row, run_sweep, standard_sweep, Spread, CapacityRow, RowOutcome, RunSpec, SweepReport, SweepSummary, CSV_HEADER};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::{growth_check, CantorTree};
use crate::error::{Error, Result};
use crate::geometry::{corner_subcube, sp_dilate, Aabb, Corner, SPCube, SPoint};
use crate::operator::{NodeValues, Operator, PieceMeasure, Weights};
use crate::quad::compensated_sum;

/// Tunables for the sampled estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityParams {
    /// uniform random points added to the structured sup-norm samples
    pub sup_budget: usize,
    /// random cubes for the growth constant
    pub growth_trials: usize,
    /// random points per corner subcube on top of the 2^{n+1} fixed ones
    pub corner_samples: usize,
    /// random cubes for the BMO estimator on top of every tree cube
    pub bmo_samples: usize,
    /// dilation of the BMO denominator μ(ρQ)
    pub bmo_rho: f64,
    /// largest acceptable max/min over a sweep for the dimensionless ratios
    pub spread_limit: f64,
    /// tolerated relative increase of gamma_plus_lower from k to k+1
    pub monotone_slack: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            sup_budget: 2000,
            growth_trials: 2000,
            corner_samples: 4,
            bmo_samples: 200,
            bmo_rho: 3.0,
            spread_limit: 10.0,
            monotone_slack: 0.05,
        }
    }
}

impl CapacityParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.bmo_rho >= 1.0) {
            v.push(format!("bmo_rho = {} must be at least 1", self.bmo_rho));
        }
        if !(self.spread_limit >= 1.0) {
            v.push(format!("spread_limit = {} must be at least 1", self.spread_limit));
        }
        if !(self.monotone_slack >= 0.0) {
            v.push(format!("monotone_slack = {} must be non-negative", self.monotone_slack));
        }
        v
    }
}

/// σ_k = Σ_{j≤k} θ_j².
pub fn sigma(tree: &CantorTree) -> f64 {
    compensated_sum(tree.thetas().iter().map(|t| t * t))
}

/// (Σ_{j≤k} θ_j²)^{−1/2}.
pub fn theorem_bound(tree: &CantorTree) -> f64 {
    1.0 / sigma(tree).sqrt()
}

/// μ_j: the uniform measure on the generation-j cubes of `tree` (j ≤ k).
pub fn generation_measure(tree: &CantorTree, j: usize) -> Result<PieceMeasure> {
    if j > tree.k() {
        return Err(Error::InvalidArgument(format!("generation {j} beyond k = {}", tree.k())));
    }
    let boxes: Vec<Aabb> = (0..tree.count(j)).map(|i| tree.cube_box(j, i)).collect();
    let density = boxes.iter().map(|b| tree.cube_mass(j) / b.volume()).collect();
    PieceMeasure::new(tree.n(), tree.s(), boxes, density)
}

/// Auxiliary capacity estimate 1/‖𝒫_{μ_j}‖ together with the operator-norm
/// bounds it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaAux {
    /// largest singular value of 𝒫_μ on μ-piecewise-constant functions
    pub opnorm_lower: f64,
    pub gamma_aux: f64,
    /// the same on the averaged (piece-to-piece compressed) matrix
    pub opnorm_proxy: f64,
}

/// 1/‖𝒫_{μ_j}‖ with the norm bounded below on piecewise-constant functions,
/// hence an upper estimate; scaling the measure by α divides it by α.
pub fn gamma_aux(op: &Operator<'_>) -> Result<GammaAux> {
    let opnorm = op.op_norm_lower()?.value;
    let proxy = op.averaged_matrix()?.op_norm_lower()?.value;
    if !(opnorm > 0.0) {
        return Err(Error::NotApplicable("operator vanishes on piecewise-constant functions".into()));
    }
    Ok(GammaAux { opnorm_lower: opnorm, gamma_aux: 1.0 / opnorm, opnorm_proxy: proxy })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaPlus {
    pub supnorm: f64,
    /// max μ(Q)/ℓ(Q)^{n+1} over the tree cubes and sampled cubes
    pub growth_constant: f64,
    pub value: f64,
    pub supnorm_argmax: Vec<f64>,
}

/// μ(E)/max(‖𝒫μ‖_∞, growth constant): the mass of the measure rescaled to be
/// admissible, with the sup norm replaced by a sampled lower bound.
pub fn gamma_plus_lower<R: Rng>(
    op: &Operator<'_>,
    tree: &CantorTree,
    params: &CapacityParams,
    sup_rng: &mut R,
    growth_rng: &mut R,
) -> Result<GammaPlus> {
    let sup = op.sup_norm_estimate(params.sup_budget, sup_rng)?;
    let growth = growth_constant(op.measure(), tree, params.growth_trials, growth_rng)?;
    let mass = op.measure().total_mass();
    Ok(GammaPlus { supnorm: sup.value, growth_constant: growth, value: mass / sup.value.max(growth), supnorm_argmax: sup.argmax })
}

/// Largest μ(Q)/ℓ(Q)^{n+1} seen over the tree cubes of every generation and
/// `trials` random cubes. The tree cubes carry density θ_j for the tree's own
/// measure; a rescaled measure is handled through its total mass.
fn growth_constant<R: Rng>(measure: &PieceMeasure, tree: &CantorTree, trials: usize, rng: &mut R) -> Result<f64> {
    let scale = measure.total_mass();
    let max_theta = tree.thetas().into_iter().fold(0.0, f64::max);
    let report = growth_check(tree, trials, max_theta * (1.0 + 1e-9), rng)?;
    Ok(scale * report.max_ratio.max(max_theta))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerConstant {
    /// min |𝒫(χ_Q μ)|/θ_k
    pub value: f64,
    /// max |𝒫(χ_Q μ)|/θ_k over the same samples
    pub max: f64,
    pub samples: usize,
    /// (cube, point) attaining the minimum
    pub argmin: (usize, Vec<f64>),
}

/// Fixed points of a cube: fractions 1/4 and 3/4 along every axis.
fn quarter_points(c: &SPCube) -> Vec<Vec<f64>> {
    let b = c.to_box();
    let dims = b.len();
    (0..1usize << dims)
        .map(|mask| (0..dims).map(|d| b.lo[d] + (b.hi[d] - b.lo[d]) * if mask >> d & 1 == 1 { 0.75 } else { 0.25 }).collect())
        .collect()
}

/// The corner estimate: |𝒫(χ_Q μ)| on the upper-right corner subcube of every
/// generation-k cube Q, or |𝒫*(χ_Q μ)| on the lower-left one, relative to θ_k.
pub fn corner_constant<R: Rng>(
    op: &Operator<'_>,
    tree: &CantorTree,
    which: Corner,
    random_per_cube: usize,
    rng: &mut R,
) -> Result<CornerConstant> {
    let k = tree.k();
    if op.measure().len() != tree.count(k) {
        return Err(Error::InvalidArgument("operator measure is not the generation-k measure of the tree".into()));
    }
    let theta = tree.theta(k)?;
    let n = tree.n();
    let mut jobs = Vec::new();
    for i in 0..tree.count(k) {
        let sub = corner_subcube(&tree.cube(k, i), which);
        let mut pts = quarter_points(&sub);
        let b = sub.to_box();
        for _ in 0..random_per_cube {
            pts.push((0..=n).map(|d| rng.random_range(b.lo[d]..b.hi[d])).collect());
        }
        jobs.extend(pts.into_iter().map(|p| (i, p)));
    }
    use rayon::prelude::*;
    let len = tree.count(k);
    let vals: Vec<f64> = jobs
        .par_iter()
        .map(|(i, c)| {
            let p = SPoint::new(c[..n].to_vec(), c[n])?;
            let w = Weights::indicator(len, *i);
            let f = match which {
                Corner::UpperRight => op.field(&w, &p, 0.0)?,
                Corner::LowerLeft => op.conj_field(&w, &p, 0.0)?,
            };
            Ok(f.iter().map(|v| v * v).sum::<f64>().sqrt() / theta)
        })
        .collect::<Result<_>>()?;
    let (mut lo, mut hi, mut arg) = (f64::INFINITY, 0.0f64, 0);
    for (j, v) in vals.iter().enumerate() {
        if *v < lo {
            lo = *v;
            arg = j;
        }
        hi = hi.max(*v);
    }
    Ok(CornerConstant { value: lo, max: hi, samples: vals.len(), argmin: jobs[arg].clone() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoEstimate {
    /// max over the sampled cubes of μ(ρQ)^{−1} ∫_Q |f − f_Q| dμ
    pub value: f64,
    pub cubes: usize,
    /// corner and side of the maximising cube
    pub argmax: (Vec<f64>, f64),
}

/// μ-weighted fine-grid nodes of one piece: coordinates, weight, field value.
struct PieceNodes {
    bbox: Aabb,
    nodes: Vec<(Vec<f64>, f64, Vec<f64>)>,
}

fn weighted_nodes(measure: &PieceMeasure, nodes: &[NodeValues]) -> Vec<PieceNodes> {
    nodes
        .iter()
        .enumerate()
        .map(|(a, nv)| {
            let rho = measure.density(a);
            let mut out = Vec::with_capacity(nv.len());
            nv.for_each(|c, w, f| out.push((c.to_vec(), w * rho, f.to_vec())));
            PieceNodes { bbox: measure.boxes()[a].clone(), nodes: out }
        })
        .collect()
}

/// The oscillation functional for one cube, or None if it misses every node.
fn oscillation(q: &SPCube, rho: f64, measure: &PieceMeasure, pieces: &[PieceNodes], scale: f64) -> Result<Option<f64>> {
    let b = q.to_box();
    let inside: Vec<_> = pieces
        .iter()
        .filter(|p| p.bbox.intersects(&b))
        .flat_map(|p| p.nodes.iter().filter(|(c, _, _)| b.contains(c)))
        .collect();
    let mass = compensated_sum(inside.iter().map(|(_, w, _)| *w));
    if inside.is_empty() || mass <= 0.0 {
        return Ok(None);
    }
    let dim = inside[0].2.len();
    let mean: Vec<f64> =
        (0..dim).map(|d| compensated_sum(inside.iter().map(|(_, w, f)| w * f[d] * scale)) / mass).collect();
    let dev = compensated_sum(inside.iter().map(|(_, w, f)| {
        w * f.iter().zip(&mean).map(|(v, m)| (v * scale - m).powi(2)).sum::<f64>().sqrt()
    }));
    let denom = measure.mass_of_box(&sp_dilate(q, rho)?.to_box());
    Ok(Some(dev / denom))
}

/// Sampled lower estimate of the BMO_ρ(μ) norm of `scale`·𝒫μ from the
/// fine-grid field values of [`Operator::analyze`], over every tree cube of
/// generations 0..=k and `random` further s-parabolic cubes near the set.
pub fn bmo_estimate<R: Rng>(
    tree: &CantorTree,
    measure: &PieceMeasure,
    nodes: &[NodeValues],
    scale: f64,
    rho: f64,
    random: usize,
    rng: &mut R,
) -> Result<BmoEstimate> {
    let pts = weighted_nodes(measure, nodes);
    let mut cubes: Vec<SPCube> = (0..=tree.k()).flat_map(|j| tree.cubes(j).collect::<Vec<_>>()).collect();
    let (n, s, k) = (tree.n(), tree.s(), tree.k());
    let (lo, hi) = ((0.5 * tree.side(k)).ln(), 0.0f64);
    for _ in 0..random {
        let side = rng.random_range(lo..hi).exp();
        let anchor = tree.cube_box(k, rng.random_range(0..tree.count(k)));
        let side_t = side.powf(2.0 * s);
        let x: Vec<f64> = (0..n).map(|d| rng.random_range(anchor.lo[d] - side..anchor.hi[d])).collect();
        let t = rng.random_range(anchor.lo[n] - side_t..anchor.hi[n]);
        cubes.push(SPCube::new(SPoint::new(x, t)?, side, s)?);
    }
    use rayon::prelude::*;
    let vals: Vec<Option<f64>> = cubes.par_iter().map(|q| oscillation(q, rho, measure, &pts, scale)).collect::<Result<_>>()?;
    let (mut best, mut arg) = (0.0, 0);
    let mut counted = 0;
    for (i, v) in vals.iter().enumerate() {
        if let Some(v) = v {
            counted += 1;
            if *v > best {
                best = *v;
                arg = i;
            }
        }
    }
    let q = &cubes[arg];
    let mut corner = q.corner().x().to_vec();
    corner.push(q.corner().t());
    Ok(BmoEstimate { value: best, cubes: counted, argmax: (corner, q.side()) })
}
