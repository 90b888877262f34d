//! Tensor-product quadrature grids on boxes and barycentric interpolation
//! between them. Grid values are stored row-major over the space-time axes
//! (time fastest) with the n field components innermost.

use crate::geometry::Aabb;
use crate::quad::Rule;

#[derive(Debug, Clone)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl Grid {
    pub fn on_box(rule: &Rule, b: &Aabb) -> Self {
        let mut axes = Vec::with_capacity(b.len());
        let mut weights = Vec::with_capacity(b.len());
        for d in 0..b.len() {
            let (x, w): (Vec<f64>, Vec<f64>) = rule.scaled(b.lo[d], b.hi[d]).unzip();
            axes.push(x);
            weights.push(w);
        }
        Self { axes, weights }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// Calls `f(flat_index, coordinates, weight)` for every node in storage order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[f64], f64)) {
        let dims = self.axes.len();
        let mut idx = vec![0usize; dims];
        let mut coords: Vec<f64> = self.axes.iter().map(|a| a[0]).collect();
        let total = self.len();
        for flat in 0..total {
            let w: f64 = (0..dims).map(|d| self.weights[d][idx[d]]).product();
            f(flat, &coords, w);
            for d in (0..dims).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].len() {
                    coords[d] = self.axes[d][idx[d]];
                    break;
                }
                idx[d] = 0;
                coords[d] = self.axes[d][0];
            }
        }
    }

    /// Flat weights in storage order.
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|_, _, w| out.push(w));
        out
    }
}

/// Interpolation matrix (rows: targets, cols: nodes) of the Lagrange basis on
/// `nodes`, evaluated in barycentric form.
pub fn lagrange_matrix(nodes: &[f64], targets: &[f64]) -> Vec<f64> {
    let q = nodes.len();
    let bw: Vec<f64> = (0..q)
        .map(|k| {
            let mut p = 1.0;
            for j in 0..q {
                if j != k {
                    p *= nodes[k] - nodes[j];
                }
            }
            1.0 / p
        })
        .collect();
    let mut out = vec![0.0; targets.len() * q];
    for (i, &x) in targets.iter().enumerate() {
        let row = &mut out[i * q..(i + 1) * q];
        if let Some(k) = nodes.iter().position(|&v| v == x) {
            row[k] = 1.0;
            continue;
        }
        let mut denom = 0.0;
        for k in 0..q {
            let c = bw[k] / (x - nodes[k]);
            row[k] = c;
            denom += c;
        }
        row.iter_mut().for_each(|v| *v /= denom);
    }
    out
}

/// Applies `mat` (out_len × shape[axis]) along `axis` of a row-major array with
/// `comps` trailing components.
fn contract(values: &[f64], shape: &[usize], comps: usize, axis: usize, mat: &[f64], out_len: usize) -> Vec<f64> {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product::<usize>() * comps;
    let len = shape[axis];
    let mut out = vec![0.0; outer * out_len * inner];
    for o in 0..outer {
        for i in 0..out_len {
            let row = &mat[i * len..(i + 1) * len];
            let dst = &mut out[(o * out_len + i) * inner..(o * out_len + i + 1) * inner];
            for (k, &m) in row.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let src = &values[(o * len + k) * inner..(o * len + k + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
    out
}

/// Tensor interpolation of values given on `from` to the nodes of `to`.
pub fn interpolate(values: &[f64], comps: usize, from: &Grid, to: &Grid) -> Vec<f64> {
    let mut shape = from.shape();
    let mut cur = values.to_vec();
    for axis in 0..shape.len() {
        let mat = lagrange_matrix(&from.axes[axis], &to.axes[axis]);
        let out_len = to.axes[axis].len();
        cur = contract(&cur, &shape, comps, axis, &mat, out_len);
        shape[axis] = out_len;
    }
    cur
}

/// Adjoint of [`interpolate`]: maps values on the nodes of `to` back to the
/// nodes of `from`, so that ⟨interpolate(u), v⟩ = ⟨u, interpolate_adjoint(v)⟩.
pub fn interpolate_adjoint(values: &[f64], comps: usize, from: &Grid, to: &Grid) -> Vec<f64> {
    let mut shape = to.shape();
    let mut cur = values.to_vec();
    for axis in 0..shape.len() {
        let (p, q) = (to.axes[axis].len(), from.axes[axis].len());
        let mat = lagrange_matrix(&from.axes[axis], &to.axes[axis]);
        let mut tr = vec![0.0; p * q];
        for i in 0..p {
            for k in 0..q {
                tr[k * p + i] = mat[i * q + k];
            }
        }
        cur = contract(&cur, &shape, comps, axis, &tr, q);
        shape[axis] = q;
    }
    cur
}
