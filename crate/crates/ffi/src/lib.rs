//! C ABI over `parcap`.
//!
//! Objects are exposed as opaque handles created by `*_new` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`ParcapStatus`]; on failure a description is available from
//! [`parcap_last_error`] on the same thread. Panics never cross the boundary:
//! they are reported as [`ParcapStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use parcap::cantor::{CantorTree, SParams};
use parcap::capacity::{gamma_aux, sigma, theorem_bound};
use parcap::geometry::{Aabb, SPoint};
use parcap::kernel::{HeatKernel, KernelSpec};
use parcap::operator::{Operator, PieceMeasure, QuadratureSpec, Weights};
use parcap::Error;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParcapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SOutOfRange = 3,
    Singularity = 4,
    Quadrature = 5,
    NoConvergence = 6,
    NotApplicable = 7,
    Unsupported = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&Error> for ParcapStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::SOutOfRange { .. } => Self::SOutOfRange,
            Error::InvalidArgument(_) => Self::InvalidArgument,
            Error::Singularity => Self::Singularity,
            Error::Quadrature { .. } => Self::Quadrature,
            Error::NoConvergence { .. } => Self::NoConvergence,
            Error::NotApplicable(_) => Self::NotApplicable,
            Error::Unsupported(_) => Self::Unsupported,
        }
    }
}

/// The fractional heat kernel P^s in ℝ^{n+1}.
pub struct ParcapKernel {
    kernel: HeatKernel,
}

/// An s-parabolic Cantor construction up to generation k.
pub struct ParcapTree {
    tree: CantorTree,
}

/// 𝒫^s applied to the uniform measure on the generation-k cubes of a tree.
pub struct ParcapOperator {
    kernel: HeatKernel,
    measure: PieceMeasure,
    quad: QuadratureSpec,
}

impl ParcapOperator {
    fn op(&self) -> parcap::Result<Operator<'_>> {
        Operator::new(&self.kernel, self.measure.clone(), self.quad)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: ParcapStatus, msg: impl Into<String>) -> ParcapStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), ParcapStatus>) -> ParcapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ParcapStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(ParcapStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib<T>(r: parcap::Result<T>) -> Result<T, ParcapStatus> {
    r.map_err(|e| fail(ParcapStatus::from(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, ParcapStatus> {
    p.as_ref().ok_or_else(|| fail(ParcapStatus::NullPointer, "null handle"))
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], ParcapStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ParcapStatus::NullPointer, "null input array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, ParcapStatus> {
    p.as_mut().ok_or_else(|| fail(ParcapStatus::NullPointer, "null output pointer"))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], ParcapStatus> {
    if len < need {
        return Err(fail(ParcapStatus::BufferTooSmall, format!("output buffer holds {len} values, {need} needed")));
    }
    if p.is_null() {
        return Err(fail(ParcapStatus::NullPointer, "null output array"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn point(x: &[f64], t: f64) -> Result<SPoint, ParcapStatus> {
    lib(SPoint::new(x.to_vec(), t))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn parcap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn parcap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the kernel for dimension `n ≥ 1` and order `s ∈ (0, 1]`.
///
/// # Safety
/// `out_kernel` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn parcap_kernel_new(n: usize, s: f64, out_kernel: *mut *mut ParcapKernel) -> ParcapStatus {
    guard(|| {
        let slot = out(out_kernel)?;
        let kernel = lib(KernelSpec::auto(n, s).and_then(HeatKernel::new))?;
        *slot = Box::into_raw(Box::new(ParcapKernel { kernel }));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be NULL or a handle from [`parcap_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn parcap_kernel_free(kernel: *mut ParcapKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// P^s(x, t) for `x` of length n.
///
/// # Safety
/// `x` must point to `n` readable doubles and `value` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn parcap_kernel_value(
    kernel: *const ParcapKernel,
    x: *const f64,
    n: usize,
    t: f64,
    value: *mut f64,
) -> ParcapStatus {
    guard(|| {
        let k = &deref(kernel)?.kernel;
        let x = slice(x, n)?;
        if n != k.n() {
            return Err(fail(ParcapStatus::InvalidArgument, format!("point has {n} coordinates, kernel has n = {}", k.n())));
        }
        let p = point(x, t)?;
        *out(value)? = k.eval(&p);
        Ok(())
    })
}

/// ∇ₓP^s(x, t) written to `grad[0..n]`.
///
/// # Safety
/// `x` must point to `n` readable doubles and `grad` to `grad_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn parcap_kernel_grad(
    kernel: *const ParcapKernel,
    x: *const f64,
    n: usize,
    t: f64,
    grad: *mut f64,
    grad_len: usize,
) -> ParcapStatus {
    guard(|| {
        let k = &deref(kernel)?.kernel;
        let x = slice(x, n)?;
        if n != k.n() {
            return Err(fail(ParcapStatus::InvalidArgument, format!("point has {n} coordinates, kernel has n = {}", k.n())));
        }
        let g = lib(k.grad(&point(x, t)?))?;
        out_slice(grad, grad_len, n)?[..n].copy_from_slice(&g);
        Ok(())
    })
}

/// Builds a construction. `d = 0` selects the smallest admissible branching
/// digit and `tau0 ≤ 0` the default ratio bound; `lambdas` holds one ratio per
/// generation, or a single ratio used for all `k` generations.
///
/// # Safety
/// `lambdas` must point to `lambdas_len` readable doubles and `out_tree` to
/// writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_new(
    n: usize,
    s: f64,
    d: usize,
    tau0: f64,
    lambdas: *const f64,
    lambdas_len: usize,
    k: usize,
    out_tree: *mut *mut ParcapTree,
) -> ParcapStatus {
    guard(|| {
        let slot = out(out_tree)?;
        let l = slice(lambdas, lambdas_len)?;
        let l: Vec<f64> = if l.len() == 1 && k != 1 { vec![l[0]; k] } else { l.to_vec() };
        let params = lib(SParams::new(n, s, (d > 0).then_some(d), (tau0 > 0.0).then_some(tau0)))?;
        let tree = lib(CantorTree::build(params, &l, k))?;
        *slot = Box::into_raw(Box::new(ParcapTree { tree }));
        Ok(())
    })
}

/// # Safety
/// `tree` must be NULL or a handle from [`parcap_tree_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_free(tree: *mut ParcapTree) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Number of generation-`j` cubes, or 0 for a NULL handle or `j > k`.
///
/// # Safety
/// `tree` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_count(tree: *const ParcapTree, j: usize) -> usize {
    match tree.as_ref() {
        Some(t) if j <= t.tree.k() => t.tree.count(j),
        _ => 0,
    }
}

/// The growth ratio θ_j = μ(Q)/ℓ_j^{n+1} of generation-`j` cubes.
///
/// # Safety
/// `tree` must be a live handle and `theta` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_theta(tree: *const ParcapTree, j: usize, theta: *mut f64) -> ParcapStatus {
    guard(|| {
        let t = &deref(tree)?.tree;
        *out(theta)? = lib(t.theta(j))?;
        Ok(())
    })
}

/// Lower corner (`n + 1` values) and side of cube `i` of generation `j`.
///
/// # Safety
/// `tree` must be a live handle, `corner` must hold `corner_len` doubles and
/// `side` must be writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_cube(
    tree: *const ParcapTree,
    j: usize,
    i: usize,
    corner: *mut f64,
    corner_len: usize,
    side: *mut f64,
) -> ParcapStatus {
    guard(|| {
        let t = &deref(tree)?.tree;
        if j > t.k() || i >= t.count(j) {
            return Err(fail(ParcapStatus::InvalidArgument, format!("no cube {i} in generation {j}")));
        }
        let c = t.corner(j, i);
        out_slice(corner, corner_len, c.len())?[..c.len()].copy_from_slice(c);
        *out(side)? = t.side(j);
        Ok(())
    })
}

/// μ of the box [lo, hi] ⊂ ℝ^{n+1}.
///
/// # Safety
/// `lo` and `hi` must each point to `len` readable doubles; `mass` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_mass_of_box(
    tree: *const ParcapTree,
    lo: *const f64,
    hi: *const f64,
    len: usize,
    mass: *mut f64,
) -> ParcapStatus {
    guard(|| {
        let t = &deref(tree)?.tree;
        if len != t.n() + 1 {
            return Err(fail(ParcapStatus::InvalidArgument, format!("box has {len} coordinates, expected {}", t.n() + 1)));
        }
        let (lo, hi) = (slice(lo, len)?, slice(hi, len)?);
        if lo.iter().zip(hi).any(|(a, b)| a.is_nan() || b.is_nan() || a > b) {
            return Err(fail(ParcapStatus::InvalidArgument, "box needs lo ≤ hi in every coordinate"));
        }
        *out(mass)? = t.mu_of_box(&Aabb::new(lo.to_vec(), hi.to_vec()));
        Ok(())
    })
}

/// σ_k = Σ_{j≤k} θ_j² and the capacity lower bound σ_k^{−1/2} for the
/// generation-k set.
///
/// # Safety
/// `tree` must be a live handle; `sigma_out` and `bound` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_tree_bound(tree: *const ParcapTree, sigma_out: *mut f64, bound: *mut f64) -> ParcapStatus {
    guard(|| {
        let t = &deref(tree)?.tree;
        *out(sigma_out)? = sigma(t);
        *out(bound)? = theorem_bound(t);
        Ok(())
    })
}

/// Operator for the uniform probability on the finest cubes of `tree`, with
/// Gauss order `base_order` (0: default).
///
/// # Safety
/// `tree` must be a live handle and `out_op` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_operator_new(
    tree: *const ParcapTree,
    base_order: usize,
    out_op: *mut *mut ParcapOperator,
) -> ParcapStatus {
    guard(|| {
        let t = &deref(tree)?.tree;
        let slot = out(out_op)?;
        let mut quad = QuadratureSpec::default();
        if base_order > 0 {
            quad.base_order = base_order;
        }
        let kernel = lib(KernelSpec::auto(t.n(), t.s()).and_then(HeatKernel::new))?;
        let handle = ParcapOperator { kernel, measure: PieceMeasure::from_tree(t), quad };
        lib(handle.op())?;
        *slot = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// # Safety
/// `op` must be NULL or a handle from [`parcap_operator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn parcap_operator_free(op: *mut ParcapOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// 𝒫μ(x, t) (or the conjugate field when `conjugate` is nonzero), truncated
/// to |ȳ − x̄| > eps, written to `field[0..n]`.
///
/// # Safety
/// `x` must point to `n` readable doubles and `field` to `field_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn parcap_operator_field(
    op: *const ParcapOperator,
    x: *const f64,
    n: usize,
    t: f64,
    eps: f64,
    conjugate: i32,
    field: *mut f64,
    field_len: usize,
) -> ParcapStatus {
    guard(|| {
        let h = deref(op)?;
        let o = lib(h.op())?;
        let p = point(slice(x, n)?, t)?;
        let w = Weights::ones();
        let v = lib(if conjugate != 0 { o.conj_field(&w, &p, eps) } else { o.field(&w, &p, eps) })?;
        out_slice(field, field_len, v.len())?[..v.len()].copy_from_slice(&v);
        Ok(())
    })
}

/// ‖𝒫μ‖²_{L²(μ)} and the relative cancellation |∫𝒫μ dμ| / ∫|𝒫μ| dμ.
///
/// # Safety
/// `op` must be a live handle; `l2_sq` and `cancellation` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_operator_l2(op: *const ParcapOperator, l2_sq: *mut f64, cancellation: *mut f64) -> ParcapStatus {
    guard(|| {
        let a = lib(lib(deref(op)?.op())?.analyze(&Weights::ones(), false))?;
        *out(l2_sq)? = a.l2_sq;
        *out(cancellation)? = a.relative_cancellation();
        Ok(())
    })
}

/// Lower bound for the operator norm on L²(μ) and the capacity estimate
/// 1/‖𝒫_μ‖ derived from it.
///
/// # Safety
/// `op` must be a live handle; `opnorm` and `gamma` writable.
#[no_mangle]
pub unsafe extern "C" fn parcap_operator_gamma_aux(op: *const ParcapOperator, opnorm: *mut f64, gamma: *mut f64) -> ParcapStatus {
    guard(|| {
        let g = lib(gamma_aux(&lib(deref(op)?.op())?))?;
        *out(opnorm)? = g.opnorm_lower;
        *out(gamma)? = g.gamma_aux;
        Ok(())
    })
}
