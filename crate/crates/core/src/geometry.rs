//! s-parabolic geometry on ℝⁿ×ℝ: points, cubes with temporal extent ℓ^{2s},
//! the homogeneous distance `max{|x−y|, |t−τ|^{1/(2s)}}`, dilations, temporal
//! reflections and corner subcubes.
//!
//! Spatial distances are Euclidean; the ℓ∞ norm is only used for membership.

use crate::error::{check_s, Error, Result};

/// A space-time point `(x, t)` with `x ∈ ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SPoint {
    x: Vec<f64>,
    t: f64,
}

impl SPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidArgument("spatial dimension must be at least 1".into()));
        }
        if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        Ok(Self { x, t })
    }

    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n.max(1)], t: 0.0 }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Point reflection through the space-time origin.
    pub fn neg(&self) -> Self {
        Self { x: self.x.iter().map(|v| -v).collect(), t: -self.t }
    }

    /// Anisotropic dilation δ_λ(x, t) = (λx, λ^{2s}t).
    pub fn dilate(&self, lambda: f64, s: f64) -> Self {
        Self { x: self.x.iter().map(|v| lambda * v).collect(), t: lambda.powf(2.0 * s) * self.t }
    }

    pub fn spatial_norm(&self) -> f64 {
        euclid(&self.x)
    }
}

pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Axis-parallel box in ℝ^{n+1}; the last coordinate is time. Boxes are closed
/// for membership purposes and have no shape constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Self { lo, hi }
    }

    /// Number of space-time coordinates (n + 1).
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| b <= a)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }

    pub fn intersect(&self, other: &Aabb) -> Aabb {
        let lo = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        Aabb { lo, hi }
    }

    /// True when the interiors overlap.
    pub fn intersects(&self, other: &Aabb) -> bool {
        !self.intersect(other).is_empty()
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.lo.iter().zip(&other.lo).all(|(a, b)| a <= b) && self.hi.iter().zip(&other.hi).all(|(a, b)| b <= a)
    }

    pub fn contains(&self, coords: &[f64]) -> bool {
        coords.iter().enumerate().all(|(i, c)| *c >= self.lo[i] && *c <= self.hi[i])
    }

    /// Reflection through the origin.
    pub fn neg(&self) -> Aabb {
        Aabb { lo: self.hi.iter().map(|v| -v).collect(), hi: self.lo.iter().map(|v| -v).collect() }
    }
}

/// An s-parabolic cube: spatial side ℓ and temporal extent ℓ^{2s}. Only ℓ is
/// stored, so the parabolic shape holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SPCube {
    corner: SPoint,
    side: f64,
    s: f64,
}

impl SPCube {
    pub fn new(corner: SPoint, side: f64, s: f64) -> Result<Self> {
        check_s(s)?;
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidArgument(format!("cube side must be positive, got {side}")));
        }
        Ok(Self { corner, side, s })
    }

    /// The unit cube `Q⁰ = [0,1]^{n+1}`.
    pub fn unit(n: usize, s: f64) -> Self {
        Self { corner: SPoint::origin(n), side: 1.0, s }
    }

    /// Cube with the given center.
    pub fn centered(center: &SPoint, side: f64, s: f64) -> Result<Self> {
        let half_t = 0.5 * side.powf(2.0 * s);
        let corner = SPoint::new(center.x.iter().map(|c| c - 0.5 * side).collect(), center.t - half_t)?;
        Self::new(corner, side, s)
    }

    pub fn corner(&self) -> &SPoint {
        &self.corner
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn dim(&self) -> usize {
        self.corner.dim()
    }

    pub fn temporal_extent(&self) -> f64 {
        self.side.powf(2.0 * self.s)
    }

    pub fn center(&self) -> SPoint {
        SPoint {
            x: self.corner.x.iter().map(|c| c + 0.5 * self.side).collect(),
            t: self.corner.t + 0.5 * self.temporal_extent(),
        }
    }

    pub fn to_box(&self) -> Aabb {
        let mut lo: Vec<f64> = self.corner.x.clone();
        lo.push(self.corner.t);
        let mut hi: Vec<f64> = self.corner.x.iter().map(|c| c + self.side).collect();
        hi.push(self.corner.t + self.temporal_extent());
        Aabb { lo, hi }
    }

    pub fn contains(&self, p: &SPoint) -> bool {
        let inside_x = p.x.iter().zip(&self.corner.x).all(|(v, c)| *v >= *c && *v <= c + self.side);
        inside_x && p.t >= self.corner.t && p.t <= self.corner.t + self.temporal_extent()
    }
}

/// Homogeneous s-parabolic distance `max{|x−y|, |t−τ|^{1/(2s)}}`.
pub fn sp_dist(p: &SPoint, q: &SPoint, s: f64) -> Result<f64> {
    check_s(s)?;
    if p.dim() != q.dim() {
        return Err(Error::InvalidArgument("points of different dimension".into()));
    }
    let dx = p.x.iter().zip(&q.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(dx.max(temporal_part((p.t - q.t).abs(), s)))
}

/// `|p|_{p_s}`, the distance to the origin.
pub fn sp_norm(p: &SPoint, s: f64) -> Result<f64> {
    sp_dist(p, &SPoint::origin(p.dim()), s)
}

#[inline]
fn temporal_part(dt: f64, s: f64) -> f64 {
    if s == 1.0 {
        dt.sqrt()
    } else if s == 0.5 {
        dt
    } else {
        dt.powf(1.0 / (2.0 * s))
    }
}

/// Concentric dilation: spatial side αℓ, temporal extent (αℓ)^{2s}.
pub fn sp_dilate(q: &SPCube, alpha: f64) -> Result<SPCube> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(q.clone());
    }
    SPCube::centered(&q.center(), alpha * q.side, q.s)
}

/// `(x, t) ↦ (x, 2t₀ − t)`.
pub fn temporal_reflect(p: &SPoint, t0: f64) -> SPoint {
    SPoint { x: p.x.clone(), t: 2.0 * t0 - p.t }
}

/// Which extreme vertex a corner subcube shares with its parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corner {
    /// Maximal in every spatial coordinate and in time.
    UpperRight,
    /// Minimal in every coordinate.
    LowerLeft,
}

/// Subcube of side ℓ/4 sharing the chosen extreme vertex of `q`.
pub fn corner_subcube(q: &SPCube, which: Corner) -> SPCube {
    let side = 0.25 * q.side;
    let corner = match which {
        Corner::LowerLeft => q.corner.clone(),
        Corner::UpperRight => {
            let child_t = side.powf(2.0 * q.s);
            SPoint {
                x: q.corner.x.iter().map(|c| c + q.side - side).collect(),
                t: q.corner.t + q.temporal_extent() - child_t,
            }
        }
    };
    SPCube { corner, side, s: q.s }
}

/// s-parabolic distance from `p` to the topological boundary of `q`.
///
/// Inside the cube the nearest boundary point is reached by a move normal to a
/// single face; outside, the distance to the closed cube separates across the
/// spatial and temporal factors.
pub fn boundary_dist(p: &SPoint, q: &SPCube) -> f64 {
    let s = q.s;
    let t_lo = q.corner.t;
    let t_hi = t_lo + q.temporal_extent();
    if q.contains(p) {
        let mut best = temporal_part((p.t - t_lo).min(t_hi - p.t), s);
        for (v, c) in p.x.iter().zip(&q.corner.x) {
            best = best.min((v - c).min(c + q.side - v));
        }
        best.max(0.0)
    } else {
        let dx2: f64 = p
            .x
            .iter()
            .zip(&q.corner.x)
            .map(|(v, c)| {
                let d = (c - v).max(v - (c + q.side)).max(0.0);
                d * d
            })
            .sum();
        let dt = (t_lo - p.t).max(p.t - t_hi).max(0.0);
        dx2.sqrt().max(temporal_part(dt, s))
    }
}
