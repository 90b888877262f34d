//! ∫_B ∇_x P_s(p − ȳ) dȳ over an axis-parallel space-time box B.
//!
//! Integrating ∂_{x_i} P along y_i leaves boundary values of P on the two faces
//! normal to axis i, and integrating those in time leaves differences of the
//! time primitive h(|z|, T). For n = 1 nothing else remains, so the box field
//! is exact up to the accuracy of h. For n ≥ 2 the remaining n − 1 transverse
//! coordinates are integrated with a graded rule split at the projection of p,
//! where the integrand peaks.

use crate::geometry::Aabb;
use crate::kernel::primitive::{TimeFactors, TimePrimitive};
use super::grid::Grid;
use crate::quad::Rule;

pub(crate) struct BoxField<'k> {
    prim: &'k TimePrimitive,
    n: usize,
    s: f64,
    transverse: Rule,
}

impl<'k> BoxField<'k> {
    pub(crate) fn new(prim: &'k TimePrimitive, n: usize, s: f64, order: usize, levels: usize) -> Self {
        Self { prim, n, s, transverse: Rule::graded(order, levels, 0.25) }
    }

    /// Adds `scale · ∫_b ∇_x P(p − ȳ) dȳ` to `out`, with the open s-parabolic
    /// ball of radius `eps` about p removed from b when `eps > 0`.
    /// `p` holds the n spatial coordinates followed by time.
    pub(crate) fn accumulate(&self, p: &[f64], b: &Aabb, eps: f64, scale: f64, out: &mut [f64]) {
        let n = self.n;
        let t = p[n];
        if t <= b.lo[n] {
            // the whole box lies in the future of p
            return;
        }
        if n == 1 {
            let mut v = self.slab(p[0], t, b.lo[0], b.hi[0], b.lo[1], b.hi[1]);
            if eps > 0.0 {
                let et = eps.powf(2.0 * self.s);
                let (x0, x1) = (b.lo[0].max(p[0] - eps), b.hi[0].min(p[0] + eps));
                let (u0, u1) = (b.lo[1].max(t - et), b.hi[1].min(t + et));
                if x0 < x1 && u0 < u1 {
                    v -= self.slab(p[0], t, x0, x1, u0, u1);
                }
            }
            out[0] += scale * v;
        } else {
            for axis in 0..n {
                out[axis] += scale * self.axis_field(p, b, axis, eps);
            }
        }
    }

    /// Unit-density box field at every node of `grid`, overwriting `out`
    /// (length `grid.len() · n`).
    pub(crate) fn on_grid(&self, grid: &Grid, b: &Aabb, out: &mut [f64]) {
        let n = self.n;
        if n == 1 {
            let (xs, ts) = (&grid.axes[0], &grid.axes[1]);
            let (x0, x1, u0, u1) = (b.lo[0], b.hi[0], b.lo[1], b.hi[1]);
            let f1: Vec<Option<TimeFactors>> = ts.iter().map(|t| (t - u0 > 0.0).then(|| self.prim.factors(t - u0))).collect();
            let f0: Vec<Option<TimeFactors>> = ts.iter().map(|t| (t - u1 > 0.0).then(|| self.prim.factors(t - u1))).collect();
            let mt = ts.len();
            for (i, &x) in xs.iter().enumerate() {
                let (a0, a1) = (x - x0, x - x1);
                let row = &mut out[i * mt..(i + 1) * mt];
                for j in 0..mt {
                    row[j] = match f1[j] {
                        None => 0.0,
                        Some(f) => {
                            let mut v = self.prim.eval_factored(a0, f) - self.prim.eval_factored(a1, f);
                            if let Some(g) = f0[j] {
                                v -= self.prim.eval_factored(a0, g) - self.prim.eval_factored(a1, g);
                            }
                            v
                        }
                    };
                }
            }
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        grid.for_each(|i, c, _| self.accumulate(c, b, 0.0, 1.0, &mut out[i * n..(i + 1) * n]));
    }

    /// One-dimensional box field: [h(a₀,T₁) − h(a₀,T₀)] − [h(a₁,T₁) − h(a₁,T₀)].
    #[inline]
    fn slab(&self, x: f64, t: f64, x0: f64, x1: f64, u0: f64, u1: f64) -> f64 {
        let t1 = t - u0;
        if t1 <= 0.0 {
            return 0.0;
        }
        let (a0, a1) = (x - x0, x - x1);
        let f1 = self.prim.factors(t1);
        let mut v = self.prim.eval_factored(a0, f1) - self.prim.eval_factored(a1, f1);
        let t0 = t - u1;
        if t0 > 0.0 {
            let f0 = self.prim.factors(t0);
            v -= self.prim.eval_factored(a0, f0) - self.prim.eval_factored(a1, f0);
        }
        v
    }

    #[inline]
    fn face(&self, a: f64, r2: f64, f1: TimeFactors, f0: Option<TimeFactors>) -> f64 {
        let z = (a * a + r2).sqrt();
        let mut v = self.prim.eval_factored(z, f1);
        if let Some(f0) = f0 {
            v -= self.prim.eval_factored(z, f0);
        }
        v
    }

    fn transverse_nodes(&self, x: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(2 * self.transverse.len());
        let pieces: &[(f64, f64)] = if lo < x && x < hi { &[(lo, x), (x, hi)] } else { &[(lo, hi)] };
        for &(a, b) in pieces {
            out.extend(self.transverse.scaled(a, b).map(|(y, w)| (x - y, w)));
        }
        out
    }

    fn axis_field(&self, p: &[f64], b: &Aabb, axis: usize, eps: f64) -> f64 {
        let n = self.n;
        let t = p[n];
        let f1 = self.prim.factors(t - b.lo[n]);
        let t0 = t - b.hi[n];
        let f0 = (t0 > 0.0).then(|| self.prim.factors(t0));
        let excl = if eps > 0.0 {
            let et = eps.powf(2.0 * self.s);
            let (u0, u1) = (b.lo[n].max(t - et), b.hi[n].min(t + et));
            (u0 < u1).then(|| {
                let e0 = t - u1;
                (self.prim.factors(t - u0), (e0 > 0.0).then(|| self.prim.factors(e0)))
            })
        } else {
            None
        };
        let dims: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
        let grids: Vec<Vec<(f64, f64)>> = dims.iter().map(|&j| self.transverse_nodes(p[j], b.lo[j], b.hi[j])).collect();
        let (xi, lo, hi) = (p[axis], b.lo[axis], b.hi[axis]);
        let mut idx = vec![0usize; dims.len()];
        let mut acc = 0.0;
        'outer: loop {
            let mut r2 = 0.0;
            let mut w = 1.0;
            for (g, &i) in grids.iter().zip(&idx) {
                r2 += g[i].0 * g[i].0;
                w *= g[i].1;
            }
            let mut v = self.face(xi - lo, r2, f1, f0) - self.face(xi - hi, r2, f1, f0);
            if let Some((e1, e0)) = excl {
                let r2e = eps * eps - r2;
                if r2e > 0.0 {
                    let c = r2e.sqrt();
                    let (c0, c1) = (lo.max(xi - c), hi.min(xi + c));
                    if c0 < c1 {
                        v -= self.face(xi - c0, r2, e1, e0) - self.face(xi - c1, r2, e1, e0);
                    }
                }
            }
            acc += w * v;
            for d in 0..idx.len() {
                idx[d] += 1;
                if idx[d] < grids[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        acc
    }
}
