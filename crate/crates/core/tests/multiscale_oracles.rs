//! Martingale differences against dense generation-k evaluation, the energy
//! identity on computed operator averages, and the stopping-scale inequalities
//! on random ratio sequences.

use std::time::Instant;

use parcap::cantor::{CantorTree, LambdaSpec, SParams};
use parcap::kernel::{HeatKernel, KernelSpec};
use parcap::multiscale::{
    energy_identity_check, orthogonality_check, p_of, p_of_cube, project, random_lambdas, stop_scales,
    thetas_from_lambdas, ScaleAnalysis, ScaleParams,
};
use parcap::operator::{CubeVector, Operator, PieceMeasure, QuadratureSpec, Weights};
use parcap::rng::{stream_rng, Stream};
use rand::Rng;

fn tree(n: usize, s: f64, lambdas: LambdaSpec, k: usize) -> CantorTree {
    let p = SParams::new(n, s, None, None).unwrap();
    CantorTree::build(p, &lambdas.resolve(&p, k).unwrap(), k).unwrap()
}

fn random_vector(n: usize, len: usize, seed: u64) -> CubeVector {
    let mut rng = stream_rng(seed, Stream::Tests);
    CubeVector::new(n, (0..n * len).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// D_Q f written out on every generation-k cube.
fn dense_difference(t: &CantorTree, f: &CubeVector, j: usize, q: usize) -> Vec<Vec<f64>> {
    let k = t.k();
    let avg = |gen: usize, idx: usize| -> Vec<f64> {
        let span = t.branching().pow((k - gen) as u32);
        let mut s = vec![0.0; f.n()];
        for leaf in idx * span..(idx + 1) * span {
            for (c, v) in f.get(leaf).iter().enumerate() {
                s[c] += v / span as f64;
            }
        }
        s
    };
    let sq = avg(j, q);
    (0..t.count(k))
        .map(|leaf| {
            if t.ancestor(k, leaf, j) != q {
                return vec![0.0; f.n()];
            }
            let child = t.ancestor(k, leaf, j + 1);
            avg(j + 1, child).iter().zip(&sq).map(|(a, b)| a - b).collect()
        })
        .collect()
}

#[test]
fn constant_input_is_fixed_by_every_projection() {
    let t = tree(1, 1.0, LambdaSpec::Constant(0.3), 3);
    let dec = project(&t, &CubeVector::new(1, vec![-1.5; t.count(3)]).unwrap()).unwrap();
    for j in 0..=3 {
        assert!(dec.s(j).as_slice().iter().all(|v| *v == -1.5));
    }
    for j in 0..3 {
        assert!(dec.d(j).as_slice().iter().all(|v| *v == 0.0));
    }
    let e = energy_identity_check(&dec);
    assert_eq!(e.mean_sq, 2.25);
    assert!((e.lhs - e.rhs - 2.25).abs() <= 1e-14);
    assert!(e.rel_diff <= e.defect_bound);
}

#[test]
fn indicator_telescopes_exactly() {
    let t = tree(1, 1.0, LambdaSpec::Constant(0.3), 3);
    for leaf in [0, 77, t.count(3) - 1] {
        let mut v = vec![0.0; t.count(3)];
        v[leaf] = 1.0;
        let dec = project(&t, &CubeVector::new(1, v).unwrap()).unwrap();
        assert!(dec.telescoping_residual() <= 1e-14, "{}", dec.telescoping_residual());
    }
}

#[test]
fn random_vectors_satisfy_martingale_identities() {
    for (n, k, comps) in [(1, 3, 1), (1, 2, 3), (2, 2, 2)] {
        let t = tree(n, 1.0, LambdaSpec::Constant(0.3), k);
        let f = random_vector(comps, t.count(k), 11 + k as u64);
        let dec = project(&t, &f).unwrap();
        assert!(dec.telescoping_residual() <= 1e-14);
        let norm = dec.s_norm_sq(k);
        for j in 0..k {
            for q in 0..t.count(j) {
                for v in dec.d_integral(j, q) {
                    assert!(v.abs() <= 1e-14 * norm.sqrt(), "∫D = {v}");
                }
            }
        }
        let orth = orthogonality_check(&dec, &mut stream_rng(3, Stream::Orthogonality));
        assert!(orth.relative <= 1e-12, "{orth:?}");
        let e = energy_identity_check(&dec);
        assert!(e.pythagoras_residual <= 1e-12, "{e:?}");
        assert!(e.rel_diff <= e.defect_bound);
    }
}

#[test]
fn inner_products_match_dense_evaluation() {
    let t = tree(1, 1.0, LambdaSpec::Constant(0.3), 3);
    let f = random_vector(1, t.count(3), 5);
    let dec = project(&t, &f).unwrap();
    let m = t.cube_mass(3);
    let pairs = [((0, 0), (1, 2)), ((0, 0), (2, 13)), ((1, 2), (2, 13)), ((1, 2), (1, 2)), ((2, 7), (2, 7)), ((1, 0), (2, 13))];
    for (a, b) in pairs {
        let da = dense_difference(&t, &f, a.0, a.1);
        let db = dense_difference(&t, &f, b.0, b.1);
        let dense: f64 = da.iter().zip(&db).map(|(x, y)| m * x[0] * y[0]).sum();
        let got = dec.inner(a, b);
        if a == b {
            assert!((got - dense).abs() <= 1e-13 * dense, "{a:?}: {got} {dense}");
            assert!((got - dec.d_norm_sq(a.0, a.1)).abs() <= 1e-15 * got);
        } else {
            // nested pairs cancel to rounding, disjoint ones exactly
            assert!(got.abs() <= 1e-14 && dense.abs() <= 1e-14, "{a:?} {b:?}: {got} {dense}");
        }
    }
    assert_eq!(dec.inner((1, 0), (2, 13)), 0.0);
}

#[test]
fn large_trees_are_sampled_with_nested_pairs() {
    let t = tree(1, 1.0, LambdaSpec::Constant(0.3), 4);
    let dec = project(&t, &random_vector(1, t.count(4), 9)).unwrap();
    let orth = orthogonality_check(&dec, &mut stream_rng(3, Stream::Orthogonality));
    assert!(!orth.exhaustive);
    assert_eq!(orth.pairs, 10_000);
    assert!(orth.relative <= 1e-12);
    let again = orthogonality_check(&dec, &mut stream_rng(3, Stream::Orthogonality));
    assert_eq!(orth.max_abs, again.max_abs);
}

#[test]
fn energy_identity_on_operator_averages() {
    let t = tree(1, 1.0, LambdaSpec::Constant(0.3), 2);
    let k = HeatKernel::new(KernelSpec::auto(1, 1.0).unwrap()).unwrap();
    for quad in [QuadratureSpec::default(), QuadratureSpec::default().doubled()] {
        let op = Operator::new(&k, PieceMeasure::from_tree(&t), quad).unwrap();
        let f = op.cube_averages(&Weights::ones()).unwrap();
        let dec = project(&t, &f).unwrap();
        let norm = dec.s_norm_sq(2).sqrt();
        for j in 0..2 {
            for q in 0..t.count(j) {
                assert!(dec.d_integral(j, q)[0].abs() <= 1e-12 * norm);
            }
        }
        let e = energy_identity_check(&dec);
        assert!(!e.degenerate);
        assert!(e.rel_diff <= 1e-4 && e.rel_diff <= e.defect_bound, "{e:?}");
        assert!(e.pythagoras_residual <= 1e-12);
    }
}

#[test]
fn p_values_and_recursion() {
    let t = tree(1, 1.0, LambdaSpec::Critical, 4);
    assert_eq!(p_of(&t, 0).unwrap(), 1.0);
    let l = t.lambdas()[0];
    assert!((l - 0.40825).abs() < 1e-5);
    let p2 = p_of(&t, 2).unwrap();
    assert!((p2 - (1.0 + l + l * l)).abs() < 1e-12 && (p2 - 1.5749).abs() < 1e-4, "{p2}");
    assert_eq!(p_of_cube(&t, 2, 35).unwrap(), p2);
    assert!(p_of_cube(&t, 2, 36).is_err());
    assert!(p_of(&t, 5).is_err());

    let mut rng = stream_rng(1, Stream::Lambda);
    let lambdas = random_lambdas(0.45, 10, &mut rng);
    let a = ScaleAnalysis::from_lambdas(1, 2, &lambdas, ScaleParams::default()).unwrap();
    for j in 1..=10 {
        let parent = (a.p[j] - a.theta[j]) / lambdas[j - 1];
        assert!((parent - a.p[j - 1]).abs() <= 1e-13 * a.p[j - 1], "j={j}");
    }
}

#[test]
fn stopping_examples() {
    assert_eq!(stop_scales(&[1.0, 1.0, 9.0, 1.0], 3.0, 3).unwrap(), vec![0, 2, 3]);
    for b in [1.5, 100.0] {
        assert_eq!(stop_scales(&[4.0; 8], b, 7).unwrap(), vec![0, 7]);
    }
    let a = ScaleAnalysis::from_raw(vec![1.0, 1.0, 9.0, 1.0], vec![0.3; 3], None, ScaleParams { b: 3.0, n_l: 2 }).unwrap();
    let spans: Vec<_> = a.intervals.iter().map(|iv| (iv.start, iv.end, iv.long)).collect();
    assert_eq!(spans, vec![(0, 2, true), (2, 3, false)]);
    assert!(a.invariant_violations().is_empty());
}

#[test]
fn classification_examples() {
    let t = tree(1, 1.0, LambdaSpec::Critical, 8);
    let a = ScaleAnalysis::from_tree(&t, ScaleParams::default()).unwrap();
    assert!(a.good_scale.iter().all(|g| *g));
    assert!(a.p.iter().all(|p| *p <= 1.0 / (1.0 - t.lambdas()[0]) + 1e-12));
    let r = a.lemma_suite();
    assert!(r.passed);
    assert_eq!(r.check("bad_scales_sigma").unwrap().lhs, 0.0);

    // a single dominant early density makes the following scales bad
    let all_bad = ScaleAnalysis::from_raw(vec![1000.0, 20.0, 20.0], vec![0.99, 0.99], None, ScaleParams::default()).unwrap();
    assert_eq!(all_bad.good_scale, vec![true, false, false]);
    let tail = ScaleAnalysis::from_raw(vec![1000.0, 20.0, 20.0, 20.0], vec![0.99; 3], None, ScaleParams::default()).unwrap();
    assert_eq!(tail.stop, vec![0, 3]);
    assert!(tail.good_scale[0]);
}

#[test]
fn interval_of_bad_scales_is_bad() {
    // θ_2 drops below θ_1/B and opens the singleton interval [2, 3), whose only
    // scale carries p_2 ≈ 0.9·θ_1 ≫ 40θ_2
    let a = ScaleAnalysis::from_raw(vec![1.0, 2000.0, 20.0, 20.0], vec![0.9; 3], None, ScaleParams { b: 60.0, n_l: 10 })
        .unwrap();
    assert_eq!(a.stop, vec![0, 1, 2, 3]);
    assert_eq!(a.good_scale, vec![true, true, false, false]);
    let last = a.intervals.last().unwrap();
    assert_eq!((last.start, last.end), (2, 3));
    assert!(!last.good && last.j0.is_none() && last.sigma_good == 0.0);
    assert!(a.intervals[..2].iter().all(|iv| iv.good));
}

#[test]
fn first_good_scale_on_a_constructed_interval() {
    // θ = (50, 1, …, 1): scales 1 and 2 are bad, 3.. are good; one interval [0, 12)
    let mut theta = vec![50.0];
    theta.extend(std::iter::repeat_n(1.0, 12));
    let a = ScaleAnalysis::from_raw(theta, vec![0.9; 12], None, ScaleParams::default()).unwrap();
    assert_eq!(a.stop, vec![0, 12]);
    assert_eq!(a.good_scale[..4], [true, false, false, true]);
    let iv = &a.intervals[0];
    assert!(iv.good);
    assert_eq!(iv.j0, Some(0));
    let r = a.lemma_suite();
    let c = r.check("first_good_scale_position").unwrap();
    assert!(c.passed && c.slack > 11.0, "{c:?}");
    assert!(r.check("young_bound").unwrap().skipped.is_some());
}

#[test]
fn random_ratio_sequences_satisfy_the_inequality_chain() {
    let start = Instant::now();
    let mut rng = stream_rng(2024, Stream::Lambda);
    let mut stops_seen = 0;
    for (n, d) in [(1, 2), (2, 2), (1, 3)] {
        let tau0 = SParams::new(n, 1.0, Some(d), None).unwrap().tau0;
        for _ in 0..100 {
            let lambdas = random_lambdas(tau0, 12, &mut rng);
            let a = ScaleAnalysis::from_lambdas(n, d, &lambdas, ScaleParams::default()).unwrap();
            assert_eq!(a.theta, thetas_from_lambdas(n, d, &lambdas));
            let r = a.lemma_suite();
            assert!(r.passed, "{:?}", r.checks);
            assert!(r.checks.iter().all(|c| c.skipped.is_none() || c.name == "first_good_scale_position"));
            stops_seen += a.stop.len() - 2;
        }
    }
    assert!(stops_seen > 0, "the sequences never triggered rules (b)/(c)");
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn invalid_scale_inputs_are_rejected() {
    let p = ScaleParams::default();
    assert!(ScaleAnalysis::from_raw(vec![], vec![], None, p).is_err());
    assert!(ScaleAnalysis::from_raw(vec![1.0, 2.0], vec![], None, p).is_err());
    assert!(ScaleAnalysis::from_raw(vec![1.0, -2.0], vec![0.5], None, p).is_err());
    assert!(ScaleAnalysis::from_raw(vec![1.0, 2.0], vec![1.5], None, p).is_err());
    assert!(ScaleAnalysis::from_raw(vec![1.0], vec![], None, ScaleParams { b: 1.0, n_l: 3 }).is_err());
    assert!(ScaleAnalysis::from_raw(vec![1.0], vec![], None, ScaleParams { b: 2.0, n_l: 0 }).is_err());
    assert!(ScaleParams::default().n_l_warning().is_some());
}
