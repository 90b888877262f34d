//! The operator 𝒫 on Cantor measures against brute-force quadrature, Monte
//! Carlo, exact symmetries (causality, mirror planes, time reflection,
//! cancellation) and algebraic identities.

use parcap::cantor::{box_sp_distance, CantorTree, LambdaSpec, SParams};
use parcap::geometry::{corner_subcube, sp_dilate, temporal_reflect, Aabb, Corner, SPoint};
use parcap::kernel::{HeatKernel, KernelSpec};
use parcap::operator::{op_norm_lower, Operator, PieceMeasure, QuadratureSpec, Weights};
use parcap::quad::{integrate, AdaptiveOpts};
use parcap::rng::{stream_rng, Stream};
use rand::Rng;

fn tree(n: usize, s: f64, lambda: f64, k: usize) -> CantorTree {
    let p = SParams::new(n, s, None, None).unwrap();
    CantorTree::build(p, &LambdaSpec::Constant(lambda).resolve(&p, k).unwrap(), k).unwrap()
}

fn kernel(n: usize, s: f64) -> HeatKernel {
    HeatKernel::new(KernelSpec::auto(n, s).unwrap()).unwrap()
}

fn pt(x: &[f64], t: f64) -> SPoint {
    SPoint::new(x.to_vec(), t).unwrap()
}

fn small_quad() -> QuadratureSpec {
    QuadratureSpec { base_order: 4, near_refine: 2, ..QuadratureSpec::default() }
}

/// ∫_B ∂_x P(p − ȳ) dȳ for n = 1 by nested adaptive quadrature: the time lag
/// τ = p_t − u outermost (graded towards τ = 0), space innermost with
/// breakpoints at p_x and at multiples of the diffusion length τ^{1/2s}.
fn brute_box_field(k: &HeatKernel, p: (f64, f64), b: &Aabb) -> f64 {
    let (px, pt_) = p;
    let s = k.s();
    let (tau_lo, tau_hi) = ((pt_ - b.hi[1]).max(0.0), pt_ - b.lo[1]);
    if tau_hi <= 0.0 {
        return 0.0;
    }
    let opts = AdaptiveOpts { abs_tol: 1e-13, rel_tol: 1e-10, max_panels: 2000 };
    let mut tb = vec![tau_lo, tau_hi];
    for j in 1..60 {
        let v = tau_lo + (tau_hi - tau_lo) * 0.6f64.powi(j);
        tb.push(v);
    }
    tb.sort_by(f64::total_cmp);
    tb.dedup();
    let outer = |tau: f64| {
        if tau <= 0.0 {
            return 0.0;
        }
        let len = tau.powf(0.5 / s);
        let mut xb = vec![b.lo[0], b.hi[0]];
        for j in -3..12 {
            for v in [px - len * 2f64.powi(j), px, px + len * 2f64.powi(j)] {
                if v > b.lo[0] && v < b.hi[0] {
                    xb.push(v);
                }
            }
        }
        xb.sort_by(f64::total_cmp);
        xb.dedup();
        integrate(|y| k.grad(&pt(&[px - y], tau)).unwrap()[0], &xb, opts).value
    };
    integrate(outer, &tb, opts).value
}

fn scale_of(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn field_vanishes_below_temporal_support() {
    let t = tree(1, 1.0, 0.3, 2);
    let k = kernel(1, 1.0);
    let op = Operator::new(&k, PieceMeasure::from_tree(&t), QuadratureSpec::default()).unwrap();
    for x in [0.0, 0.4, 0.77, 1.5] {
        assert_eq!(op.field(&Weights::ones(), &pt(&[x], -0.01), 0.0).unwrap(), vec![0.0]);
        assert_eq!(op.field(&Weights::ones(), &pt(&[x], 0.0), 0.0).unwrap(), vec![0.0]);
        // the conjugate field looks forward in time
        assert_eq!(op.conj_field(&Weights::ones(), &pt(&[x], 1.01), 0.0).unwrap(), vec![0.0]);
    }
    assert!(op.conj_field(&Weights::ones(), &pt(&[0.2], -0.1), 0.0).unwrap()[0].abs() > 1e-6);
}

#[test]
fn field_is_odd_about_the_spatial_midplane() {
    for (s, lambda) in [(1.0, 0.3), (0.75, 0.2)] {
        let t = tree(1, s, lambda, 2);
        let k = kernel(1, s);
        let op = Operator::new(&k, PieceMeasure::from_tree(&t), QuadratureSpec::default()).unwrap();
        let w = Weights::ones();
        for tt in [0.05, 0.33, 0.6, 0.999, 1.4] {
            let scale = scale_of(&op.field(&w, &pt(&[0.3], tt), 0.0).unwrap());
            let mid = op.field(&w, &pt(&[0.5], tt), 0.0).unwrap()[0];
            // exact by symmetry up to rounding in the sum of primitive differences
            assert!(mid.abs() <= 1e-10 * scale.max(1e-300), "s={s} t={tt}: {mid} vs {scale}");
            // off cube edges, where the field is only Hölder-1/2 continuous for s = 3/4
            for x in [0.02, 0.1, 0.37, 0.93] {
                let a = op.field(&w, &pt(&[x], tt), 0.0).unwrap()[0];
                let b = op.field(&w, &pt(&[1.0 - x], tt), 0.0).unwrap()[0];
                assert!((a + b).abs() <= 1e-10 * a.abs().max(scale), "s={s} x={x} t={tt}: {a} {b}");
            }
        }
    }
}

#[test]
fn field_is_odd_about_midplanes_in_two_dimensions() {
    let t = tree(2, 1.0, 0.3, 1);
    let k = kernel(2, 1.0);
    let op = Operator::new(&k, PieceMeasure::from_tree(&t), small_quad()).unwrap();
    let w = Weights::ones();
    for tt in [0.2, 0.5, 1.2] {
        let f = op.field(&w, &pt(&[0.5, 0.5], tt), 0.0).unwrap();
        let r = op.field(&w, &pt(&[0.2, 0.5], tt), 0.0).unwrap();
        assert!(f[0].abs() <= 1e-10 * scale_of(&r) && f[1].abs() <= 1e-10 * scale_of(&r), "{f:?} vs {r:?}");
        assert!(r[1].abs() <= 1e-10 * r[0].abs(), "{r:?}");
        assert!(r[0] != 0.0);
    }
}

#[test]
fn corner_subcube_field_matches_dense_quadrature() {
    let t = tree(1, 1.0, 0.3, 1);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let theta = t.theta(1).unwrap();
    for i in 0..t.count(1) {
        let q = t.cube(1, i);
        let c = corner_subcube(&q, Corner::UpperRight).center();
        let got = op.field(&Weights::indicator(m.len(), i), &c, 0.0).unwrap()[0];
        let brute = m.density(i) * brute_box_field(&k, (c.x()[0], c.t()), &m.boxes()[i]);
        assert!((got - brute).abs() <= 1e-8 * brute.abs(), "cube {i}: {got} vs {brute}");
        assert!(got.abs() >= 0.01 * theta, "cube {i}: |field| = {} θ₁", got.abs() / theta);
    }
}

#[test]
fn pair_entries_vanish_for_later_sources() {
    let t = tree(1, 1.0, 0.3, 2);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let mat = op.averaged_matrix().unwrap();
    let mut zeros = 0;
    for a in 0..m.len() {
        for b in 0..m.len() {
            if m.boxes()[b].lo[1] >= m.boxes()[a].hi[1] {
                assert_eq!(mat.entry(a, b), &[0.0]);
                assert_eq!(op.pair_integral(a, b).unwrap().value, vec![0.0]);
                zeros += 1;
            }
        }
    }
    assert!(zeros > 0);
}

#[test]
fn far_pair_matches_refined_quadrature() {
    let t = tree(1, 1.0, 0.3, 2);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let quad = QuadratureSpec::default();
    let op = Operator::new(&k, m.clone(), quad).unwrap();
    // a source two time slabs earlier and spatially offset
    let (a, b) = (
        (0..m.len()).find(|&i| m.boxes()[i].lo[1] > 0.9 && m.boxes()[i].lo[0] > 0.6).unwrap(),
        (0..m.len()).find(|&i| m.boxes()[i].hi[1] < 0.1 && m.boxes()[i].hi[0] < 0.4).unwrap(),
    );
    let entry = op.pair_integral(a, b).unwrap();
    let ta = &m.boxes()[a];
    let w = Weights::indicator(m.len(), b);
    let (gx, gw) = parcap::quad::gauss_legendre(24);
    let mut acc = 0.0;
    for (xi, wi) in gx.iter().zip(&gw) {
        for (ti, wj) in gx.iter().zip(&gw) {
            let x = ta.lo[0] + 0.5 * (xi + 1.0) * (ta.hi[0] - ta.lo[0]);
            let tt = ta.lo[1] + 0.5 * (ti + 1.0) * (ta.hi[1] - ta.lo[1]);
            acc += 0.25 * wi * wj * op.field(&w, &pt(&[x], tt), 0.0).unwrap()[0];
        }
    }
    let brute = acc;
    assert!((entry.value[0] - brute).abs() <= quad.target_rel_tol * brute.abs(), "{} vs {brute}", entry.value[0]);
}

#[test]
fn near_pairs_are_stable_under_order_doubling() {
    for s in [1.0, 0.75] {
        let t = tree(1, s, 0.3, 2);
        let k = kernel(1, s);
        let m = PieceMeasure::from_tree(&t);
        let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
        let fine = op.with_quad(QuadratureSpec::default().doubled()).unwrap();
        let mat = op.averaged_matrix().unwrap();
        let side = t.side(2);
        let mut checked = 0;
        for a in [0, 7, 13, 35] {
            let row_max = (0..m.len()).map(|b| mat.entry(a, b)[0].abs()).fold(0.0, f64::max);
            // a cube's self-interaction averages to zero
            assert!(mat.entry(a, a)[0].abs() <= 1e-12 * row_max);
            // spatially offset neighbours (aligned columns average to zero by symmetry)
            let ba = &m.boxes()[a];
            for b in 0..m.len() {
                let bb = &m.boxes()[b];
                if bb.lo[0] == ba.lo[0] || bb.lo[1] >= ba.hi[1] || box_sp_distance(ba, bb, s) > 2.0 * side {
                    continue;
                }
                let e = op.pair_integral(a, b).unwrap();
                let f = fine.pair_integral(a, b).unwrap();
                assert!(!e.flagged && f.value[0] != 0.0);
                assert!((e.value[0] - f.value[0]).abs() <= 1e-6 * f.value[0].abs(), "s={s} ({a},{b}): {e:?} {f:?}");
                assert_eq!(e.value, mat.entry(a, b));
                checked += 1;
            }
        }
        assert!(checked >= 4);
    }
}

#[test]
fn zero_weights_give_zero_norm() {
    let t = tree(1, 0.75, 0.3, 1);
    let k = kernel(1, 0.75);
    let op = Operator::new(&k, PieceMeasure::from_tree(&t), QuadratureSpec::default()).unwrap();
    assert_eq!(op.l2_norm_sq(&Weights::Constant(0.0)).unwrap(), 0.0);
}

#[test]
fn lebesgue_norm_matches_monte_carlo() {
    let t = tree(1, 1.0, 0.3, 0);
    let k = kernel(1, 1.0);
    let op = Operator::new(&k, PieceMeasure::from_tree(&t), QuadratureSpec::default()).unwrap();
    let exact = op.l2_norm_sq(&Weights::ones()).unwrap();
    let mut rng = stream_rng(11, Stream::Tests);
    let samples = 1_000_000;
    let w = Weights::ones();
    let mut sum = 0.0;
    for _ in 0..samples {
        let p = pt(&[rng.random::<f64>()], rng.random::<f64>());
        sum += op.field(&w, &p, 0.0).unwrap()[0].powi(2);
    }
    let mc = sum / samples as f64;
    assert!(exact > 0.0);
    assert!((mc - exact).abs() <= 0.01 * exact, "mc={mc} quadrature={exact}");
}

#[test]
fn averaged_matrix_rows_match_direct_field_averages() {
    for (s, k_gen) in [(1.0, 2), (0.75, 1)] {
        let t = tree(1, s, 0.3, k_gen);
        let k = kernel(1, s);
        let op = Operator::new(&k, PieceMeasure::from_tree(&t), QuadratureSpec::default()).unwrap();
        let an = op.analyze(&Weights::ones(), false).unwrap();
        let row_sums = an.matrix.apply(&vec![1.0; t.count(k_gen)]);
        for a in (0..t.count(k_gen)).step_by(5) {
            let direct = op.field_average_direct(a, &Weights::ones()).unwrap()[0];
            let from_matrix = row_sums.get(a)[0];
            assert_eq!(from_matrix, an.averages.get(a)[0]);
            let row_scale: f64 = (0..t.count(k_gen)).map(|b| an.matrix.entry(a, b)[0].abs()).sum();
            assert!((direct - from_matrix).abs() <= 1e-10 * row_scale, "s={s} a={a}: {direct} vs {from_matrix}");
        }
    }
}

#[test]
fn averaged_matrix_transforms_under_spatial_mirror() {
    let t = tree(1, 1.0, 0.3, 2);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let mat = op.averaged_matrix().unwrap();
    let top = (0..m.len()).flat_map(|a| (0..m.len()).map(move |b| (a, b))).map(|(a, b)| mat.entry(a, b)[0].abs()).fold(0.0, f64::max);
    for a in 0..m.len() {
        for b in 0..m.len() {
            let (pa, pb) = (t.mirror_index_spatial(2, a, 0), t.mirror_index_spatial(2, b, 0));
            let (u, v) = (mat.entry(a, b)[0], mat.entry(pa, pb)[0]);
            assert!((u + v).abs() <= 1e-12 * top, "({a},{b}): {u} vs {v}");
        }
    }
    // the mirrored measure, built independently, has the negated matrix
    let mirrored = op.with_measure(m.space_mirrored(0, 0.5)).unwrap().averaged_matrix().unwrap();
    for a in 0..m.len() {
        for b in 0..m.len() {
            assert!((mirrored.entry(a, b)[0] + mat.entry(a, b)[0]).abs() <= 1e-12 * top);
        }
    }
}

#[test]
fn self_pairing_cancels() {
    for s in [1.0, 0.75] {
        let t = tree(1, s, 0.3, 2);
        let k = kernel(1, s);
        let m = PieceMeasure::from_tree(&t);
        let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
        let an = op.analyze(&Weights::ones(), false).unwrap();
        assert!(an.relative_cancellation() <= 1e-10, "s={s}: {}", an.relative_cancellation());
        // per generation-1 cube, through the restricted measure
        for i in 0..t.count(1) {
            let r = op.with_measure(m.restricted(&t.cube_box(1, i))).unwrap();
            let a = r.analyze(&Weights::ones(), false).unwrap();
            assert!(a.relative_cancellation() <= 1e-10, "s={s} cube {i}: {}", a.relative_cancellation());
        }
    }
}

#[test]
fn self_pairing_cancels_in_two_dimensions() {
    let t = tree(2, 1.0, 0.3, 1);
    let k = kernel(2, 1.0);
    let op = Operator::new(&k, PieceMeasure::from_tree(&t), small_quad()).unwrap();
    let an = op.analyze(&Weights::ones(), false).unwrap();
    assert!(an.abs_integral > 0.0);
    assert!(an.relative_cancellation() <= 1e-8, "{}", an.relative_cancellation());
}

#[test]
fn truncations_differ_by_the_annulus() {
    let t = tree(1, 1.0, 0.3, 1);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let w = Weights::ones();
    let p = (0.05, 0.06);
    let (e1, e2) = (0.01, 0.2);
    let f1 = op.field(&w, &pt(&[p.0], p.1), e1).unwrap()[0];
    let f2 = op.field(&w, &pt(&[p.0], p.1), e2).unwrap()[0];
    let ball = |e: f64| Aabb::new(vec![p.0 - e, p.1 - e * e], vec![p.0 + e, p.1 + e * e]);
    let mut annulus = 0.0;
    for (i, b) in m.boxes().iter().enumerate() {
        let (outer, inner) = (b.intersect(&ball(e2)), b.intersect(&ball(e1)));
        if !outer.is_empty() {
            annulus += m.density(i) * brute_box_field(&k, p, &outer);
        }
        if !inner.is_empty() {
            annulus -= m.density(i) * brute_box_field(&k, p, &inner);
        }
    }
    assert!(annulus.abs() > 0.0);
    assert!(((f1 - f2) - annulus).abs() <= 1e-7 * annulus.abs(), "{} vs {annulus}", f1 - f2);
    // ε = 0 against the full brute-force field
    let f0 = op.field(&w, &pt(&[p.0], p.1), 0.0).unwrap()[0];
    let full: f64 = m.boxes().iter().enumerate().map(|(i, b)| m.density(i) * brute_box_field(&k, p, b)).sum();
    assert!((f0 - full).abs() <= 1e-7 * full.abs(), "{f0} vs {full}");
}

#[test]
fn field_is_linear_in_the_weights() {
    let t = tree(1, 0.75, 0.3, 2);
    let k = kernel(1, 0.75);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let mut rng = stream_rng(3, Stream::Tests);
    let f: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..m.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (alpha, beta) = (0.7, -2.3);
    let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| alpha * a + beta * b).collect();
    for _ in 0..10 {
        let p = pt(&[rng.random_range(-0.2..1.2)], rng.random_range(0.0..1.3));
        let eps = if rng.random::<bool>() { 0.0 } else { 0.05 };
        let ff = op.field(&Weights::PerPiece(f.clone()), &p, eps).unwrap()[0];
        let fg = op.field(&Weights::PerPiece(g.clone()), &p, eps).unwrap()[0];
        let fh = op.field(&Weights::PerPiece(h.clone()), &p, eps).unwrap()[0];
        assert!((fh - (alpha * ff + beta * fg)).abs() <= 1e-12 * (ff.abs() + fg.abs()).max(1e-300));
    }
}

/// Index of the piece whose box is the temporal reflection of piece `i` about `t0`.
fn reflected_piece(m: &PieceMeasure, i: usize, t0: f64) -> usize {
    let b = &m.boxes()[i];
    let (lo, hi) = (2.0 * t0 - b.hi[1], 2.0 * t0 - b.lo[1]);
    (0..m.len())
        .find(|&j| {
            let c = &m.boxes()[j];
            (c.lo[0] - b.lo[0]).abs() < 1e-12 && (c.lo[1] - lo).abs() < 1e-12 && (c.hi[1] - hi).abs() < 1e-12
        })
        .expect("measure is symmetric under the reflection")
}

#[test]
fn reflection_identity_on_generation_one_cubes() {
    for s in [1.0, 0.75] {
        let t = tree(1, s, 0.3, 2);
        let k = kernel(1, s);
        let m = PieceMeasure::from_tree(&t);
        let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
        let mut rng = stream_rng(5, Stream::Reflection);
        for q in 0..t.count(1) {
            let cube = t.cube(1, q);
            let t0 = cube.corner().t() + 0.5 * cube.temporal_extent();
            let qb = cube.to_box();
            // random weights supported on the cube, and their reflection
            let w: Vec<f64> = (0..m.len()).map(|i| if qb.contains_box(&m.boxes()[i]) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let wr: Vec<f64> = (0..m.len()).map(|i| if w[i] == 0.0 { 0.0 } else { w[reflected_piece(&m, i, t0)] }).collect();
            let big = sp_dilate(&cube, 2.0).unwrap().to_box();
            for _ in 0..10 {
                let x = pt(&[rng.random_range(big.lo[0]..big.hi[0])], rng.random_range(big.lo[1]..big.hi[1]));
                let conj = op.conj_field(&Weights::PerPiece(wr.clone()), &x, 0.0).unwrap()[0];
                let direct = op.field(&Weights::PerPiece(w.clone()), &temporal_reflect(&x, t0), 0.0).unwrap()[0];
                let scale = conj.abs().max(direct.abs()).max(1e-300);
                assert!((conj + direct).abs() <= 1e-4 * scale, "s={s} cube {q}: {conj} vs {direct}");
            }
        }
    }
}

#[test]
fn conjugate_norm_equals_time_mirrored_norm() {
    for s in [1.0, 0.75] {
        let t = tree(1, s, 0.3, 2);
        let k = kernel(1, s);
        let m = PieceMeasure::from_tree(&t);
        let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
        let conj = op.conj_l2_norm_sq(&Weights::ones()).unwrap();
        let t_hi = m.boxes().iter().map(|b| b.hi[1]).fold(0.0, f64::max);
        let mirrored = op.with_measure(m.time_mirrored(0.5 * t_hi)).unwrap().l2_norm_sq(&Weights::ones()).unwrap();
        assert!((conj - mirrored).abs() <= 1e-8 * mirrored, "s={s}: {conj} vs {mirrored}");
        let plain = op.l2_norm_sq(&Weights::ones()).unwrap();
        assert!(conj > 0.0 && plain > 0.0);
    }
}

#[test]
fn op_norm_examples() {
    assert_eq!(op_norm_lower(&[0.0; 4], 1, &[0.5, 0.5]).unwrap().value, 0.0);
    let one = op_norm_lower(&[-3.0], 1, &[0.25]).unwrap().value;
    assert!((one - 0.75).abs() < 1e-15, "{one}");
    // diagonal kernel: the largest |k_i|·μ_i
    let diag = op_norm_lower(&[2.0, 0.0, 0.0, 5.0], 1, &[0.5, 0.1]).unwrap().value;
    assert!((diag - 1.0).abs() < 1e-9, "{diag}");

    let t = tree(1, 1.0, 0.3, 2);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let l2 = op.l2_norm_sq(&Weights::ones()).unwrap();
    let gram = op.gram().unwrap();
    assert!((gram.quadratic_form(&vec![1.0; m.len()]) - l2).abs() <= 1e-12 * l2);
    let norm = gram.op_norm_lower().unwrap().value;
    assert!(norm >= (l2 / m.total_mass()).sqrt(), "{norm} vs {}", (l2 / m.total_mass()).sqrt());
    // the cube-averaged proxy is dominated by the full restriction
    let proxy = op.averaged_matrix().unwrap().op_norm_lower().unwrap().value;
    assert!(proxy > 0.0 && proxy <= norm * (1.0 + 1e-9), "{proxy} vs {norm}");
    // exact scaling with the mass
    let scaled = op.with_measure(m.scaled(3.0)).unwrap().gram().unwrap().op_norm_lower().unwrap().value;
    assert!((scaled - 3.0 * norm).abs() <= 1e-8 * norm);
}

#[test]
fn sup_norm_estimate_properties() {
    let t = tree(1, 1.0, 0.3, 1);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    let est = op.sup_norm_estimate(200, &mut stream_rng(7, Stream::SupNorm)).unwrap();
    assert!(est.value.is_finite() && est.value > 0.0);
    let far = op.field(&Weights::ones(), &pt(&[4.0], 3.0), 0.0).unwrap()[0].abs();
    assert!(far <= est.value);
    let again = op.sup_norm_estimate(200, &mut stream_rng(7, Stream::SupNorm)).unwrap();
    assert_eq!(est, again);
    let scaled = op.with_measure(m.scaled(3.0)).unwrap().sup_norm_estimate(200, &mut stream_rng(7, Stream::SupNorm)).unwrap();
    assert!((scaled.value - 3.0 * est.value).abs() <= 1e-14 * scaled.value);
    let bigger = op.sup_norm_estimate(2000, &mut stream_rng(7, Stream::SupNorm)).unwrap();
    assert!(bigger.value >= est.value && (bigger.value - est.value) <= 0.05 * est.value, "{} vs {}", bigger.value, est.value);
}

#[test]
fn invalid_inputs_are_rejected() {
    let t = tree(1, 1.0, 0.3, 1);
    let k = kernel(1, 1.0);
    let m = PieceMeasure::from_tree(&t);
    assert!(Operator::new(&k, m.clone(), QuadratureSpec { base_order: 1, ..QuadratureSpec::default() }).is_err());
    let half = kernel(1, 0.5);
    assert!(Operator::new(&half, m.clone(), QuadratureSpec::default()).is_err());
    let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).unwrap();
    assert!(op.field(&Weights::PerPiece(vec![1.0; 3]), &pt(&[0.1], 0.5), 0.0).is_err());
    assert!(op.field(&Weights::ones(), &pt(&[0.1, 0.2], 0.5), 0.0).is_err());
    assert!(op.field(&Weights::ones(), &pt(&[0.1], 0.5), -1.0).is_err());
}
