//! S_Q f = (μ(Q)^{-1} ∫_Q f dμ) χ_Q and D_Q f = Σ_{P child of Q} S_P f − S_Q f
//! for f given by its generation-k cube averages. All cubes of one generation
//! carry equal μ_k mass, so parent averages are plain means of the children.

use rand::Rng;
use serde::Serialize;

use crate::cantor::CantorTree;
use crate::error::{Error, Result};
use crate::operator::CubeVector;
use crate::quad::CompensatedSum;

/// Above this many distinct pairs the orthogonality check samples.
const EXHAUSTIVE_PAIRS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct MartingaleDecomposition {
    n: usize,
    branching: usize,
    /// μ_k mass of one generation-j cube, j = 0..=k
    masses: Vec<f64>,
    /// S_j f on generation-j cubes, j = 0..=k
    averages: Vec<CubeVector>,
    /// D_j f = S_{j+1} f − S_j f on generation-(j+1) cubes, j = 0..k−1
    differences: Vec<CubeVector>,
}

/// Builds every S_j and D_j from the generation-k averages of f.
pub fn project(tree: &CantorTree, f: &CubeVector) -> Result<MartingaleDecomposition> {
    let k = tree.k();
    if f.len() != tree.count(k) {
        return Err(Error::InvalidArgument(format!("{} cube values for {} generation-{k} cubes", f.len(), tree.count(k))));
    }
    let n = f.n();
    let b = tree.branching();
    let mut averages = vec![f.clone()];
    for j in (0..k).rev() {
        let child = averages.last().expect("non-empty");
        let mut parent = CubeVector::zeros(n, tree.count(j));
        for q in 0..tree.count(j) {
            for c in 0..n {
                let mut acc = CompensatedSum::new();
                for p in tree.children(q) {
                    acc.add(child.get(p)[c]);
                }
                parent.get_mut(q)[c] = acc.value() / b as f64;
            }
        }
        averages.push(parent);
    }
    averages.reverse();
    let differences = (0..k)
        .map(|j| {
            let mut d = CubeVector::zeros(n, tree.count(j + 1));
            for p in 0..tree.count(j + 1) {
                let q = tree.parent(p);
                for c in 0..n {
                    d.get_mut(p)[c] = averages[j + 1].get(p)[c] - averages[j].get(q)[c];
                }
            }
            d
        })
        .collect();
    Ok(MartingaleDecomposition { n, branching: b, masses: (0..=k).map(|j| tree.cube_mass(j)).collect(), averages, differences })
}

impl MartingaleDecomposition {
    pub fn k(&self) -> usize {
        self.differences.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// S_j f on generation-j cubes.
    pub fn s(&self, j: usize) -> &CubeVector {
        &self.averages[j]
    }

    /// D_j f, stored by its values on generation-(j+1) cubes.
    pub fn d(&self, j: usize) -> &CubeVector {
        &self.differences[j]
    }

    /// μ_k-mean of f (S_0 f).
    pub fn mean(&self) -> &[f64] {
        self.averages[0].get(0)
    }

    fn children(&self, i: usize) -> std::ops::Range<usize> {
        i * self.branching..(i + 1) * self.branching
    }

    /// S_0 f + Σ_j D_j f, evaluated on generation-k cubes.
    pub fn reconstruct(&self) -> CubeVector {
        let k = self.k();
        let len = self.averages[k].len();
        let mut out = CubeVector::zeros(self.n, len);
        for i in 0..len {
            for c in 0..self.n {
                let mut acc = self.mean()[c];
                for j in 0..k {
                    let anc = i / self.branching.pow((k - j - 1) as u32);
                    acc += self.differences[j].get(anc)[c];
                }
                out.get_mut(i)[c] = acc;
            }
        }
        out
    }

    /// max |S_0 f + Σ D_j f − S_k f| over cubes and components.
    pub fn telescoping_residual(&self) -> f64 {
        let r = self.reconstruct();
        r.as_slice().iter().zip(self.averages[self.k()].as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// ‖S_j f‖²_{L²(μ_k)}.
    pub fn s_norm_sq(&self, j: usize) -> f64 {
        self.masses[j] * crate::quad::compensated_sum(self.averages[j].as_slice().iter().map(|v| v * v))
    }

    /// ‖D_Q f‖² for the generation-j cube Q = `i`.
    pub fn d_norm_sq(&self, j: usize, i: usize) -> f64 {
        let m = self.masses[j + 1];
        self.children(i).map(|p| m * self.differences[j].get(p).iter().map(|v| v * v).sum::<f64>()).sum()
    }

    /// ∫ D_Q f dμ_k for Q = (j, i); zero by construction up to rounding.
    pub fn d_integral(&self, j: usize, i: usize) -> Vec<f64> {
        let m = self.masses[j + 1];
        (0..self.n)
            .map(|c| crate::quad::compensated_sum(self.children(i).map(|p| m * self.differences[j].get(p)[c])))
            .collect()
    }

    /// ⟨D_{Q₁} f, D_{Q₂} f⟩_{L²(μ_k)} for Q = (generation, index), evaluated on
    /// the finer cube's children, where the product is piecewise constant.
    pub fn inner(&self, q1: (usize, usize), q2: (usize, usize)) -> f64 {
        let ((j1, i1), (j2, i2)) = if q1.0 <= q2.0 { (q1, q2) } else { (q2, q1) };
        // Q2 ⊂ Q1 iff the generation-j1 ancestor of Q2 is Q1
        if i2 / self.branching.pow((j2 - j1) as u32) != i1 {
            return 0.0;
        }
        let m = self.masses[j2 + 1];
        let mut acc = CompensatedSum::new();
        for p in self.children(i2) {
            let coarse = if j1 == j2 { p } else { i2 / self.branching.pow((j2 - j1 - 1) as u32) };
            let a = self.differences[j1].get(coarse);
            let b = self.differences[j2].get(p);
            acc.add(m * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>());
        }
        acc.value()
    }

    /// All cubes carrying a difference (generations 0..k−1) as (j, i).
    fn star_cubes(&self) -> Vec<(usize, usize)> {
        (0..self.k()).flat_map(|j| (0..self.averages[j].len()).map(move |i| (j, i))).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrthogonalityReport {
    /// max |⟨D_{Q₁}f, D_{Q₂}f⟩| over the checked distinct pairs
    pub max_abs: f64,
    /// max_abs / ‖S_k f‖²
    pub relative: f64,
    pub pairs: usize,
    pub exhaustive: bool,
}

/// Lemma-style orthogonality of distinct martingale differences: exhaustive up
/// to 10⁴ pairs; beyond that 10⁴ sampled pairs, half of them nested (the only
/// ones that are not orthogonal by disjointness).
pub fn orthogonality_check<R: Rng>(dec: &MartingaleDecomposition, rng: &mut R) -> OrthogonalityReport {
    let cubes = dec.star_cubes();
    let total = cubes.len() * cubes.len().saturating_sub(1) / 2;
    let norm = dec.s_norm_sq(dec.k());
    let mut max_abs: f64 = 0.0;
    let mut pairs = 0;
    let exhaustive = total <= EXHAUSTIVE_PAIRS;
    if exhaustive {
        for a in 0..cubes.len() {
            for b in a + 1..cubes.len() {
                max_abs = max_abs.max(dec.inner(cubes[a], cubes[b]).abs());
                pairs += 1;
            }
        }
    } else {
        let bf = dec.branching;
        while pairs < EXHAUSTIVE_PAIRS {
            let a = cubes[rng.random_range(0..cubes.len())];
            let b = if pairs % 2 == 0 && a.0 > 0 {
                // a strict ancestor of a
                let up = rng.random_range(1..=a.0);
                (a.0 - up, a.1 / bf.pow(up as u32))
            } else {
                cubes[rng.random_range(0..cubes.len())]
            };
            if a == b {
                continue;
            }
            max_abs = max_abs.max(dec.inner(a, b).abs());
            pairs += 1;
        }
    }
    OrthogonalityReport { max_abs, relative: if norm > 0.0 { max_abs / norm } else { max_abs }, pairs, exhaustive }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// ‖S_k f‖²
    pub lhs: f64,
    /// Σ_{Q ∈ 𝒬*} ‖D_Q f‖²
    pub rhs: f64,
    /// |μ_k-mean of f|²
    pub mean_sq: f64,
    /// |lhs − rhs| / lhs
    pub rel_diff: f64,
    /// |lhs − mean_sq − rhs| / lhs: the exact identity with the mean term
    pub pythagoras_residual: f64,
    /// max(1e-10, 2|mean|‖f‖/‖S_k f‖²)
    pub defect_bound: f64,
    pub degenerate: bool,
    pub passed: bool,
}

/// ‖S_k f‖² = Σ_Q ‖D_Q f‖², exact for μ_k-mean-zero f; otherwise off by |mean|².
pub fn energy_identity_check(dec: &MartingaleDecomposition) -> EnergyReport {
    let lhs = dec.s_norm_sq(dec.k());
    let mut rhs = CompensatedSum::new();
    for j in 0..dec.k() {
        for i in 0..dec.averages[j].len() {
            rhs.add(dec.d_norm_sq(j, i));
        }
    }
    let rhs = rhs.value();
    let mean_sq: f64 = dec.mean().iter().map(|v| v * v).sum();
    if lhs == 0.0 {
        return EnergyReport {
            lhs,
            rhs,
            mean_sq,
            rel_diff: 0.0,
            pythagoras_residual: 0.0,
            defect_bound: 1e-10,
            degenerate: true,
            passed: rhs == 0.0,
        };
    }
    let rel_diff = (lhs - rhs).abs() / lhs;
    let defect_bound = (2.0 * mean_sq.sqrt() * lhs.sqrt() / lhs).max(1e-10);
    EnergyReport {
        lhs,
        rhs,
        mean_sq,
        rel_diff,
        pythagoras_residual: (lhs - mean_sq - rhs).abs() / lhs,
        defect_bound,
        degenerate: false,
        passed: rel_diff <= defect_bound,
    }
}
