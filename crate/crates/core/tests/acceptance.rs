//! Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the report.
//! The sweep criteria (9–11, 13) drive the `parcap` binary end to end.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use parcap::cantor::{CantorTree, LambdaSpec, SParams};
use parcap::geometry::{sp_dilate, temporal_reflect, Aabb, SPCube, SPoint};
use parcap::kernel::{kernel_bound_audit, AuditGrid, HeatKernel, KernelMethod, KernelSpec};
use parcap::multiscale::{energy_identity_check, orthogonality_check, project, random_lambdas, ScaleAnalysis, ScaleParams};
use parcap::operator::{CubeVector, Operator, PieceMeasure, QuadratureSpec, Weights};
use parcap::quad::{integrate, AdaptiveOpts};
use parcap::rng::{stream_rng, Stream};
use rand::Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn pt(x: &[f64], t: f64) -> SPoint {
    SPoint::new(x.to_vec(), t).unwrap()
}

fn kernel(n: usize, s: f64, method: KernelMethod) -> HeatKernel {
    HeatKernel::new(KernelSpec::new(n, s, method, 1e-10).unwrap()).unwrap()
}

fn tree(s: f64, lambda: LambdaSpec, k: usize) -> CantorTree {
    let p = SParams::new(1, s, None, None).unwrap();
    CantorTree::build(p, &lambda.resolve(&p, k).unwrap(), k).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// 1. Numeric Fourier inversion against the Gaussian and Poisson closed forms.
fn kernel_closed_forms() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for s in [1.0, 0.5] {
        let (q, c) = (kernel(1, s, KernelMethod::RadialQuadrature), kernel(1, s, KernelMethod::ClosedForm));
        for x in [0.0, 0.2, 0.7, 1.5, 3.0] {
            for t in [0.1, 1.0, 4.0] {
                worst = worst.max(rel(q.eval(&pt(&[x], t)), c.eval(&pt(&[x], t))));
                points += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-6 && secs < 5.0, format!("{points} points, max rel err {worst:.2e} (≤ 1e-6), {secs:.2} s (< 5 s)"))
}

/// 2. Dimension-walk gradient against central differences and closed forms.
fn gradient_correctness() -> Outcome {
    let mut worst_fd: f64 = 0.0;
    for s in [0.75, 1.0] {
        let k = kernel(1, s, KernelMethod::RadialQuadrature);
        for x in [0.1f64, 0.3, 0.8, 1.5, 2.5] {
            for t in [0.2, 0.5, 1.0, 2.0] {
                let h = 1e-4 * x;
                let fd = (k.eval(&pt(&[x + h], t)) - k.eval(&pt(&[x - h], t))) / (2.0 * h);
                let g = k.grad_dimension_walk(&pt(&[x], t)).map_err(|e| e.to_string())?[0];
                worst_fd = worst_fd.max(rel(g, fd));
            }
        }
    }
    let mut worst_cf: f64 = 0.0;
    for (n, s) in [(1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0)] {
        let k = kernel(n, s, KernelMethod::ClosedForm);
        for (x, t) in [(0.3, 0.2), (1.0, 1.0), (2.5, 0.7), (0.05, 3.0)] {
            let mut v = vec![0.0; n];
            v[0] = x;
            v[n - 1] += 0.5 * x;
            let a = k.grad(&pt(&v, t)).map_err(|e| e.to_string())?;
            let b = k.grad_dimension_walk(&pt(&v, t)).map_err(|e| e.to_string())?;
            for (u, w) in a.iter().zip(&b) {
                worst_cf = worst_cf.max(rel(*w, *u));
            }
        }
    }
    check(
        worst_fd <= 1e-5 && worst_cf <= 1e-10,
        format!("finite differences: max rel err {worst_fd:.2e} (≤ 1e-5, 40 points); closed forms: {worst_cf:.2e} (≤ 1e-10)"),
    )
}

/// ∫_ℝ P(x, t) dx: adaptive quadrature up to 800 t^{1/2s} plus the exact
/// series for the remaining tail.
fn total_mass_1d(k: &HeatKernel, t: f64) -> f64 {
    let alpha = 2.0 * k.s();
    let cut = 800.0;
    let scale = t.powf(1.0 / alpha);
    let mut breaks = vec![0.0];
    let mut b = 1e-3 * scale;
    while b < cut * scale {
        breaks.push(b);
        b *= 1.5;
    }
    breaks.push(cut * scale);
    let body = integrate(|x| k.eval(&pt(&[x], t)), &breaks, AdaptiveOpts { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 20_000 }).value;
    let tail: f64 = if alpha < 2.0 {
        (1..40)
            .map(|j| parcap::kernel::series::tail_coefficient(1, alpha, j) * cut.powf(-alpha * j as f64) / (alpha * j as f64))
            .sum()
    } else {
        0.0
    };
    2.0 * (body + tail)
}

/// 3. Unit mass in space for every positive time.
fn normalization() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in [0.6, 0.75, 1.0] {
        let k = kernel(1, s, KernelMethod::RadialQuadrature);
        for t in [0.1, 1.0] {
            worst = worst.max((total_mass_1d(&k, t) - 1.0).abs());
        }
    }
    check(worst <= 1e-6, format!("max |∫P dx − 1| = {worst:.2e} (≤ 1e-6)"))
}

/// 4. Two-sided model bound: exact at s = 1/2, a positive finite bracket otherwise.
///
/// At s = 1 the kernel is Gaussian and decays faster than any power, so the
/// ratio to the power-law profile underflows to zero at the far corner of the
/// standard grid; this check is expected to report that honestly.
fn bound_audit() -> Outcome {
    let half = kernel_bound_audit(KernelSpec::auto(1, 0.5).unwrap(), &AuditGrid::standard(1, 0.5)).map_err(|e| e.to_string())?;
    let spread = half.bg.spread();
    let mut detail = format!("s=0.5 spread {spread:.2e} (≤ 1e-10)");
    let mut ok = spread <= 1e-10;
    for s in [0.75, 1.0] {
        let r = kernel_bound_audit(KernelSpec::auto(1, s).unwrap(), &AuditGrid::standard(1, s)).map_err(|e| e.to_string())?;
        ok &= r.bg.inf > 0.0 && r.bg.sup.is_finite();
        detail.push_str(&format!("; s={s} bracket [{:.3e}, {:.3e}]", r.bg.inf, r.bg.sup));
    }
    check(ok, detail)
}

/// 5. Generation-one geometry and cube counts.
fn construction_fidelity() -> Outcome {
    let t = tree(1.0, LambdaSpec::Constant(0.3), 1);
    let mut xs = Vec::new();
    let mut ts = Vec::new();
    for i in 0..t.count(1) {
        let b = t.cube_box(1, i);
        xs.push((b.lo[0], b.hi[0]));
        ts.push((b.lo[1], b.hi[1]));
    }
    let has = |v: &[(f64, f64)], want: (f64, f64), times: usize| {
        v.iter().filter(|p| (p.0 - want.0).abs() <= 1e-15 && (p.1 - want.1).abs() <= 1e-15).count() == times
    };
    let mut ok = [(0.0, 0.3), (0.7, 1.0)].iter().all(|&w| has(&xs, w, 3));
    ok &= [(0.0, 0.09), (0.455, 0.545), (0.91, 1.0)].iter().all(|&w| has(&ts, w, 2));
    ok &= (t.gap_spatial(1) - 0.4).abs() <= 1e-15 && (t.gap_temporal(1) - 0.365).abs() <= 1e-15;
    for k in 0..=4 {
        let t = tree(1.0, LambdaSpec::Constant(0.3), k);
        ok &= t.count(k) == 3usize.pow(k as u32) * 2usize.pow(k as u32);
        ok &= t.cubes(k).count() == t.count(k);
    }
    check(ok, "gaps 0.4 / 0.365 and endpoints to 1e-15; counts 6^k for k ≤ 4".into())
}

/// 6. ∫_R 𝒫(χ_R μ_k) dμ_k vanishes for Q⁰, every generation-1 cube and random cubes.
///
/// The identity is exact: every restriction of μ_k to a box is a product of a
/// spatial and a temporal measure, and ∂ₓP is odd in space. The computed
/// values sit at rounding level, where halving the quadrature error cannot
/// shrink them further, so a region passes either by shrinking ≥ 10× when the
/// order doubles or by staying below the rounding floor at both orders.
fn cancellation() -> Outcome {
    const FLOOR: f64 = 1e-11;
    let mut worst_std: f64 = 0.0;
    let mut regions = 0;
    let mut failures = Vec::new();
    for s in [1.0, 0.75] {
        let t = tree(s, LambdaSpec::Constant(0.3), 2);
        let k = HeatKernel::new(KernelSpec::auto(1, s).unwrap()).unwrap();
        let m = PieceMeasure::from_tree(&t);
        let mut boxes: Vec<Aabb> = vec![t.cube_box(0, 0)];
        boxes.extend((0..t.count(1)).map(|i| t.cube_box(1, i)));
        let mut rng = stream_rng(7, Stream::RandomBoxes);
        let mut random = 0;
        while random < 20 {
            let side: f64 = rng.random_range(0.1..0.8);
            let corner = pt(&[rng.random_range(-0.1..1.0 - 0.5 * side)], rng.random_range(-0.1..1.0 - 0.5 * side.powf(2.0 * s)));
            let r = SPCube::new(corner, side, s).unwrap().to_box();
            if m.mass_of_box(&r) > 0.0 {
                boxes.push(r);
                random += 1;
            }
        }
        for r in &boxes {
            let mr = m.restricted(r);
            let c = |q: QuadratureSpec| -> Result<f64, String> {
                let op = Operator::new(&k, mr.clone(), q).map_err(|e| e.to_string())?;
                Ok(op.analyze(&Weights::ones(), false).map_err(|e| e.to_string())?.relative_cancellation())
            };
            let (a, b) = (c(QuadratureSpec::default())?, c(QuadratureSpec::default().doubled())?);
            worst_std = worst_std.max(a);
            regions += 1;
            let converging = b <= a / 10.0 || (a <= FLOOR && b <= FLOOR);
            if a > 1e-4 || !converging {
                failures.push(format!("s={s} {r:?}: {a:.2e} → {b:.2e}"));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{regions} regions, max relative cancellation {worst_std:.2e} (≤ 1e-4; shrink ≥ 10× or below {FLOOR:e} at both orders){}",
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    )
}

/// 7. Martingale identities on random vectors and on computed field averages.
fn martingale_exactness() -> Outcome {
    let t = tree(1.0, LambdaSpec::Constant(0.3), 3);
    let (mut orth, mut tele, mut pyth): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..5u64 {
        let mut rng = stream_rng(seed, Stream::Tests);
        let f = CubeVector::new(1, (0..t.count(3)).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let dec = project(&t, &f).map_err(|e| e.to_string())?;
        orth = orth.max(orthogonality_check(&dec, &mut stream_rng(seed, Stream::Orthogonality)).relative);
        tele = tele.max(dec.telescoping_residual());
        pyth = pyth.max(energy_identity_check(&dec).pythagoras_residual);
    }
    let small = tree(1.0, LambdaSpec::Constant(0.3), 2);
    let k = HeatKernel::new(KernelSpec::auto(1, 1.0).unwrap()).unwrap();
    let op = Operator::new(&k, PieceMeasure::from_tree(&small), QuadratureSpec::default()).map_err(|e| e.to_string())?;
    let avg = op.cube_averages(&Weights::ones()).map_err(|e| e.to_string())?;
    let e = energy_identity_check(&project(&small, &avg).map_err(|e| e.to_string())?);
    check(
        orth <= 1e-12 && tele <= 1e-14 && pyth <= 1e-12 && e.rel_diff <= e.defect_bound,
        format!(
            "orthogonality {orth:.1e} (≤ 1e-12), telescoping {tele:.1e} (≤ 1e-14), Pythagoras {pyth:.1e} (≤ 1e-12); energy identity on field averages {:.1e} within defect bound {:.1e}",
            e.rel_diff, e.defect_bound
        ),
    )
}

/// 8. The stopping-scale inequality chain on random ratio sequences.
fn inequality_suite() -> Outcome {
    let start = Instant::now();
    let tau0 = SParams::new(1, 1.0, Some(2), None).unwrap().tau0;
    let mut rng = stream_rng(2024, Stream::Lambda);
    let mut failed = Vec::new();
    let mut first_good_checked = 0;
    for i in 0..100 {
        let lambdas = random_lambdas(tau0, 12, &mut rng);
        let a = ScaleAnalysis::from_lambdas(1, 2, &lambdas, ScaleParams::default()).map_err(|e| e.to_string())?;
        let r = a.lemma_suite();
        for c in &r.checks {
            if !c.passed {
                failed.push(format!("sequence {i}: {}", c.name));
            }
            if c.name == "first_good_scale_position" && c.skipped.is_none() {
                first_good_checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        failed.is_empty() && secs < 1.0,
        format!(
            "100 sequences, k=12: Young, bad-scale, good-interval and first-good-scale bounds ({first_good_checked} applicable) {}; {secs:.3} s (< 1 s)",
            if failed.is_empty() { "all hold".to_string() } else { format!("fail: {}", failed.join(", ")) }
        ),
    )
}

/// Both sweep runs, shared by criteria 9–11 and 13.
struct Sweeps {
    summary: Value,
    csv: [Vec<u8>; 2],
    secs: f64,
}

fn run_sweeps(dir: &Path) -> Result<Sweeps, String> {
    let config = dir.join("sweep.toml");
    std::fs::write(&config, "# standard sweep\n").map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    let mut secs = 0.0;
    for workers in ["1", "2"] {
        let out = dir.join(format!("w{workers}"));
        let start = Instant::now();
        let o = Command::new(env!("CARGO_BIN_EXE_parcap"))
            .args(["capacity-sweep", "--seed", "7", "--workers", workers, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if workers == "1" {
            secs = start.elapsed().as_secs_f64();
        }
        if !o.status.success() {
            return Err(format!("sweep exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stdout)));
        }
        csv.push(std::fs::read(out.join("capacity.csv")).map_err(|e| e.to_string())?);
    }
    let json: Value = serde_json::from_slice(&std::fs::read(dir.join("w1").join("capacity.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(Sweeps { summary: json["summary"].clone(), csv: [csv[0].clone(), csv[1].clone()], secs })
}

fn spread(summary: &Value, key: &str) -> Option<(f64, f64, f64)> {
    let s = &summary[key];
    Some((s["min"].as_f64()?, s["max"].as_f64()?, s["spread"].as_f64()?))
}

/// 9. ‖𝒫μ_k‖² / σ_k stays in a bounded band across the sweep.
fn two_sided_energy(sw: &Result<Sweeps, String>) -> Outcome {
    let sw = sw.as_ref().map_err(|e| e.clone())?;
    let rows = sw.summary["rows"].as_u64().unwrap_or(0);
    let failures = sw.summary["failures"].as_u64().unwrap_or(u64::MAX);
    let Some((lo, hi, sp)) = spread(&sw.summary, "l2_ratio") else {
        return Err("no positive l2 ratios".into());
    };
    check(
        rows == 13 && failures == 0 && lo > 0.0 && sp <= 10.0 && sw.secs <= 600.0,
        format!("{rows} rows, l2_sq/σ_k in [{lo:.4}, {hi:.4}], spread {sp:.2} (≤ 10); sweep {:.0} s (≤ 600 s)", sw.secs),
    )
}

/// 10. Corner lower-bound constant.
fn corner_constant(sw: &Result<Sweeps, String>) -> Outcome {
    let sw = sw.as_ref().map_err(|e| e.clone())?;
    let Some((lo, hi, sp)) = spread(&sw.summary, "corner_const") else {
        return Err("no positive corner constants".into());
    };
    check(lo >= 0.01 && sp <= 5.0, format!("corner constant in [{lo:.4}, {hi:.4}] (≥ 0.01), spread {sp:.2} (≤ 5)"))
}

/// 11. Both capacity estimates track σ_k^{−1/2}; critical rows hit the bound exactly.
fn capacity_sandwich(sw: &Result<Sweeps, String>) -> Outcome {
    let sw = sw.as_ref().map_err(|e| e.clone())?;
    let (Some(plus), Some(aux)) = (spread(&sw.summary, "gamma_plus_ratio"), spread(&sw.summary, "gamma_aux_ratio")) else {
        return Err("missing capacity ratios".into());
    };
    let dev = sw.summary["critical_bound_dev"].as_f64().unwrap_or(f64::INFINITY);
    check(
        plus.0 > 0.0 && aux.0 > 0.0 && plus.2 <= 10.0 && aux.2 <= 10.0 && dev <= 1e-12,
        format!(
            "gamma_plus·σ^½ spread {:.2}, gamma_aux·σ^½ spread {:.2} (≤ 10); θ≡1 bound deviation {dev:.1e} (≤ 1e-12)",
            plus.2, aux.2
        ),
    )
}

/// 12. The conjugate field is the time reflection of the direct field.
fn reflection_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for s in [1.0, 0.75] {
        let t = tree(s, LambdaSpec::Constant(0.3), 2);
        let k = HeatKernel::new(KernelSpec::auto(1, s).unwrap()).unwrap();
        let m = PieceMeasure::from_tree(&t);
        let op = Operator::new(&k, m.clone(), QuadratureSpec::default()).map_err(|e| e.to_string())?;
        let mut rng = stream_rng(5, Stream::Reflection);
        for q in 0..t.count(1) {
            let cube = t.cube(1, q);
            let t0 = cube.corner().t() + 0.5 * cube.temporal_extent();
            let qb = cube.to_box();
            let inside: Vec<bool> = m.boxes().iter().map(|b| qb.contains_box(b)).collect();
            // the measure on the cube is symmetric under reflection about t0
            let w = Weights::PerPiece(inside.iter().map(|&i| if i { 1.0 } else { 0.0 }).collect());
            let big = sp_dilate(&cube, 2.0).unwrap().to_box();
            for _ in 0..10 {
                let x = pt(&[rng.random_range(big.lo[0]..big.hi[0])], rng.random_range(big.lo[1]..big.hi[1]));
                let conj = op.conj_field(&w, &x, 0.0).map_err(|e| e.to_string())?[0];
                let direct = op.field(&w, &temporal_reflect(&x, t0), 0.0).map_err(|e| e.to_string())?[0];
                let scale = conj.abs().max(direct.abs());
                if scale > 0.0 {
                    worst = worst.max((conj + direct).abs() / scale);
                }
                points += 1;
            }
        }
    }
    check(worst <= 1e-4, format!("{points} points, max relative mismatch {worst:.2e} (≤ 1e-4)"))
}

/// 13. Byte-identical sweep CSVs under different worker counts.
fn determinism(sw: &Result<Sweeps, String>) -> Outcome {
    let sw = sw.as_ref().map_err(|e| e.clone())?;
    check(
        sw.csv[0] == sw.csv[1] && !sw.csv[0].is_empty(),
        format!("capacity.csv with 1 and 2 workers: {} bytes each, identical = {}", sw.csv[0].len(), sw.csv[0] == sw.csv[1]),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    })
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let sweeps = run_sweeps(tmp.path());
    let results: Vec<(&str, Outcome)> = vec![
        ("kernel closed-form agreement", guarded(kernel_closed_forms)),
        ("gradient correctness", guarded(gradient_correctness)),
        ("normalization", guarded(normalization)),
        ("Blumenthal–Getoor audit", guarded(bound_audit)),
        ("construction fidelity", guarded(construction_fidelity)),
        ("cancellation", guarded(cancellation)),
        ("martingale exactness", guarded(martingale_exactness)),
        ("inequality suite", guarded(inequality_suite)),
        ("two-sided L² energy", guarded(|| two_sided_energy(&sweeps))),
        ("corner constant", guarded(|| corner_constant(&sweeps))),
        ("capacity sandwich trend", guarded(|| capacity_sandwich(&sweeps))),
        ("reflection identity", guarded(reflection_identity)),
        ("determinism", guarded(|| determinism(&sweeps))),
    ];
    let mut failed = Vec::new();
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d}", i + 1),
            Err(d) => {
                println!("criterion {:>2} FAIL  {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
