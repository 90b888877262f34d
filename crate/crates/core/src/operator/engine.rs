//! Per-target evaluation of the field of a piecewise-uniform measure.
//!
//! Each target box gets two tensor grids: a fine grid graded towards the
//! faces, on which the fields of near sources are evaluated exactly, and a
//! coarse Gauss grid for far sources, whose summed field is smooth on the
//! target and is interpolated onto the fine grid. A source is near when it
//! overlaps the target in time (its field is then non-analytic at the target's
//! bottom face) or lies within `near_threshold` target sides of it.
//! Sources entirely in the future of the target contribute nothing.

use rayon::prelude::*;

use super::boxfield::BoxField;
use super::grid::{interpolate, interpolate_adjoint, Grid};
use super::{NodeValues, PieceMeasure, QuadratureSpec, Weights};
use crate::cantor::box_sp_distance;
use crate::geometry::Aabb;

pub(crate) struct TargetOut {
    /// ∫_target |F|² dx̄ (Lebesgue)
    pub l2: f64,
    /// ∫_target |F| dx̄
    pub abs: f64,
    /// ∫_target F_b dx̄ for every unit-density source b, n components each
    pub row: Vec<f64>,
    /// error estimate of each row entry (zero for far sources)
    pub row_err: Vec<f64>,
    /// whether the near-pair error estimate exceeded the target tolerance
    pub flagged: Vec<usize>,
    pub nodes: Option<NodeValues>,
}

/// max(spatial widths, temporal width^{1/2s}): the side of the smallest
/// s-parabolic cube containing the box.
pub(crate) fn box_scale(b: &Aabb, s: f64) -> f64 {
    let n = b.len() - 1;
    let mut side = (b.hi[n] - b.lo[n]).powf(1.0 / (2.0 * s));
    for d in 0..n {
        side = side.max(b.hi[d] - b.lo[d]);
    }
    side
}

pub(crate) fn is_near(target: &Aabb, source: &Aabb, s: f64, threshold: f64) -> bool {
    let n = target.len() - 1;
    let overlap_t = source.lo[n] < target.hi[n] && target.lo[n] < source.hi[n];
    overlap_t || box_sp_distance(target, source, s) < threshold * box_scale(target, s)
}

pub(crate) struct Rules {
    pub fine: crate::quad::Rule,
    pub check: crate::quad::Rule,
    pub coarse: crate::quad::Rule,
}

impl Rules {
    pub fn new(q: &QuadratureSpec) -> Self {
        Self { fine: q.fine_rule(), check: q.check_rule(), coarse: q.coarse_rule() }
    }
}

fn integrate_into(values: &[f64], weights: &[f64], n: usize, out: &mut [f64]) {
    for c in 0..n {
        let mut acc = crate::quad::CompensatedSum::new();
        for (i, w) in weights.iter().enumerate() {
            acc.add(w * values[i * n + c]);
        }
        out[c] = acc.value();
    }
}

fn abs_integral(values: &[f64], weights: &[f64], n: usize) -> f64 {
    weights.iter().enumerate().map(|(i, w)| w * norm(&values[i * n..(i + 1) * n])).sum()
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Integral over `target` of the unit-density field of `source`, with an error
/// estimate from a lower-order rule on the same panels for near pairs.
pub(crate) fn pair(bf: &BoxField, rules: &Rules, quad: &QuadratureSpec, s: f64, target: &Aabb, source: &Aabb) -> (Vec<f64>, f64, bool) {
    let n = target.len() - 1;
    let mut val = vec![0.0; n];
    if source.lo[n] >= target.hi[n] {
        return (val, 0.0, false);
    }
    if is_near(target, source, s, quad.near_threshold) {
        let g = Grid::on_box(&rules.fine, target);
        let mut tmp = vec![0.0; g.len() * n];
        bf.on_grid(&g, source, &mut tmp);
        let w = g.flat_weights();
        integrate_into(&tmp, &w, n, &mut val);
        let scale = abs_integral(&tmp, &w, n);
        let err = check_estimate(bf, rules, target, source, &val);
        (val, err, err > quad.target_rel_tol * scale.max(f64::MIN_POSITIVE))
    } else {
        let g = Grid::on_box(&rules.coarse, target);
        let mut tmp = vec![0.0; g.len() * n];
        bf.on_grid(&g, source, &mut tmp);
        integrate_into(&tmp, &g.flat_weights(), n, &mut val);
        (val, 0.0, false)
    }
}

/// |fine − check| for one near pair.
fn check_estimate(bf: &BoxField, rules: &Rules, target: &Aabb, source: &Aabb, val: &[f64]) -> f64 {
    let n = val.len();
    let g = Grid::on_box(&rules.check, target);
    let mut tmp = vec![0.0; g.len() * n];
    bf.on_grid(&g, source, &mut tmp);
    let mut est = vec![0.0; n];
    integrate_into(&tmp, &g.flat_weights(), n, &mut est);
    let diff: Vec<f64> = val.iter().zip(&est).map(|(a, b)| a - b).collect();
    norm(&diff)
}

pub(crate) fn run(bf: &BoxField, rules: &Rules, quad: &QuadratureSpec, measure: &PieceMeasure, w: &Weights, keep_nodes: bool) -> Vec<TargetOut> {
    (0..measure.len()).into_par_iter().map(|a| target(bf, rules, quad, measure, w, keep_nodes, a)).collect()
}

fn target(bf: &BoxField, rules: &Rules, quad: &QuadratureSpec, measure: &PieceMeasure, w: &Weights, keep_nodes: bool, a: usize) -> TargetOut {
    let n = measure.n();
    let s = measure.s();
    let count = measure.len();
    let tb = &measure.boxes()[a];
    let fine = Grid::on_box(&rules.fine, tb);
    let coarse = Grid::on_box(&rules.coarse, tb);
    let fw = fine.flat_weights();
    let cw = coarse.flat_weights();
    let (nf, nc) = (fine.len(), coarse.len());
    let mut near_total = vec![0.0; nf * n];
    let mut far_total = vec![0.0; nc * n];
    let mut tmp_f = vec![0.0; nf * n];
    let mut tmp_c = vec![0.0; nc * n];
    let mut row = vec![0.0; count * n];
    let mut row_err = vec![0.0; count];
    let mut row_abs = 0.0;
    let mut any_far = false;
    for b in 0..count {
        let sb = &measure.boxes()[b];
        if sb.lo[n] >= tb.hi[n] {
            continue;
        }
        let wb = w.get(b) * measure.density(b);
        let entry = &mut row[b * n..(b + 1) * n];
        if is_near(tb, sb, s, quad.near_threshold) {
            bf.on_grid(&fine, sb, &mut tmp_f);
            integrate_into(&tmp_f, &fw, n, entry);
            row_abs += abs_integral(&tmp_f, &fw, n);
            row_err[b] = check_estimate(bf, rules, tb, sb, entry);
            if wb != 0.0 {
                for (t, v) in near_total.iter_mut().zip(&tmp_f) {
                    *t += wb * v;
                }
            }
        } else {
            bf.on_grid(&coarse, sb, &mut tmp_c);
            integrate_into(&tmp_c, &cw, n, entry);
            row_abs += abs_integral(&tmp_c, &cw, n);
            if wb != 0.0 {
                any_far = true;
                for (t, v) in far_total.iter_mut().zip(&tmp_c) {
                    *t += wb * v;
                }
            }
        }
    }
    // Entries enter row sums, so their errors are judged against the total
    // unit-density interaction of the target rather than their own size
    // (far-apart pairs sharing a time slab are tiny and relatively inexact).
    let limit = quad.target_rel_tol * row_abs.max(f64::MIN_POSITIVE);
    let flagged = (0..count).filter(|&b| row_err[b] > limit).collect();
    if any_far {
        let far_on_fine = interpolate(&far_total, n, &coarse, &fine);
        for (t, v) in near_total.iter_mut().zip(&far_on_fine) {
            *t += v;
        }
    }
    let mut l2 = crate::quad::CompensatedSum::new();
    let mut abs = crate::quad::CompensatedSum::new();
    for (i, wi) in fw.iter().enumerate() {
        let v = &near_total[i * n..(i + 1) * n];
        let sq: f64 = v.iter().map(|x| x * x).sum();
        l2.add(wi * sq);
        abs.add(wi * sq.sqrt());
    }
    let nodes = keep_nodes.then(|| NodeValues { axes: fine.axes.clone(), weights: fine.weights.clone(), field: near_total, n });
    TargetOut { l2: l2.value(), abs: abs.value(), row, row_err, flagged, nodes }
}

/// Contribution of target `a` to the Gram matrix
/// G[b][c] = ∫ F_b · F_c dμ (F_b the field of μ restricted to piece b),
/// as a dense row-major `count × count` block. Near fields are paired on the
/// fine grid, far fields on the coarse Gauss grid (exact for products of the
/// interpolants, which have degree < 2·order per axis) and mixed pairs through
/// the adjoint of the interpolation, so that fᵀGf reproduces the L² norm that
/// [`run`] computes for the same f.
pub(crate) fn gram_target(bf: &BoxField, rules: &Rules, quad: &QuadratureSpec, measure: &PieceMeasure, a: usize) -> Vec<f64> {
    let n = measure.n();
    let s = measure.s();
    let count = measure.len();
    let tb = &measure.boxes()[a];
    let fine = Grid::on_box(&rules.fine, tb);
    let coarse = Grid::on_box(&rules.coarse, tb);
    let fw = fine.flat_weights();
    let cw = coarse.flat_weights();
    let (nf, nc) = (fine.len(), coarse.len());
    let rho_a = measure.density(a);
    // near: (index, fine values weighted by √w, adjoint-projected W·F on coarse nodes)
    let mut near: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut far: Vec<(usize, Vec<f64>)> = Vec::new();
    for b in 0..count {
        let sb = &measure.boxes()[b];
        if sb.lo[n] >= tb.hi[n] {
            continue;
        }
        let rho_b = measure.density(b);
        if is_near(tb, sb, s, quad.near_threshold) {
            let mut v = vec![0.0; nf * n];
            bf.on_grid(&fine, sb, &mut v);
            let mut wv = v.clone();
            for i in 0..nf {
                for c in 0..n {
                    wv[i * n + c] *= fw[i] * rho_b;
                    v[i * n + c] *= fw[i].sqrt() * rho_b;
                }
            }
            let proj = interpolate_adjoint(&wv, n, &coarse, &fine);
            near.push((b, v, proj));
        } else {
            let mut v = vec![0.0; nc * n];
            bf.on_grid(&coarse, sb, &mut v);
            v.iter_mut().for_each(|x| *x *= rho_b);
            far.push((b, v));
        }
    }
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    let mut out = vec![0.0; count * count];
    let mut put = |b: usize, c: usize, v: f64| {
        out[b * count + c] = rho_a * v;
        out[c * count + b] = rho_a * v;
    };
    for (i, (b, fb, _)) in near.iter().enumerate() {
        for (c, fc, _) in &near[..=i] {
            put(*b, *c, dot(fb, fc));
        }
    }
    for (b, _, pb) in &near {
        for (c, gc) in &far {
            put(*b, *c, dot(pb, gc));
        }
    }
    let sw: Vec<f64> = cw.iter().map(|w| w.sqrt()).collect();
    let far_w: Vec<Vec<f64>> = far
        .iter()
        .map(|(_, g)| g.chunks(n).zip(&sw).flat_map(|(v, w)| v.iter().map(move |x| x * w)).collect())
        .collect();
    for i in 0..far.len() {
        for j in 0..=i {
            put(far[i].0, far[j].0, dot(&far_w[i], &far_w[j]));
        }
    }
    out
}
