//! C ABI over the iterreg solvers.
//!
//! Every function returns an [`IrStatus`]; on failure the message is available
//! from [`ir_last_error`] on the same thread. Objects cross the boundary as
//! opaque handles that must be released with their `_free` function. Vectors
//! are passed as pointer plus length and copied on entry.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array2, ArrayView1};

use iterreg::linops::{self, Blur, EntryMask, LinearOperator};
use iterreg::regularizers::{InnerSchedule, Penalty, Regularizer};
use iterreg::solvers::{self, SolverConfig, SolverTrace, Variant};
use iterreg::stopping::{self, StoppingCertificate};
use iterreg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Diverged = 5,
    Unsupported = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrVariant {
    Dgd = 0,
    Adgd = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrPenalty {
    Zero = 0,
    L1 = 1,
    /// Nuclear norm of a `rows x cols` row-major matrix.
    Nuclear = 2,
    /// Isotropic total variation of a `rows x cols` row-major image.
    Tv = 3,
}

/// Solver settings; start from [`ir_solve_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrSolveOptions {
    pub variant: IrVariant,
    pub max_iterations: usize,
    /// Dual step; zero or negative selects the automatic step.
    pub step: f64,
    pub record_every: usize,
    pub store_iterates: bool,
    pub track_dual_objective: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrTraceInfo {
    pub variant: IrVariant,
    pub alpha: f64,
    pub gamma: f64,
    /// `sqrt(alpha / gamma)`, the norm the step was sized for.
    pub step_norm: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub records: usize,
    pub primal_dim: usize,
    pub dual_dim: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IrCertificate {
    pub variant: IrVariant,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub t_delta: usize,
    pub final_bound: f64,
}

pub struct IrOperator(LinearOperator);

pub struct IrRegularizer(Regularizer);

pub struct IrTrace(SolverTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(IrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => IrStatus::DimensionMismatch,
            Error::InvalidArgument(_) | Error::Config(_) | Error::Parse { .. } => IrStatus::InvalidArgument,
            Error::NonFinite(_) => IrStatus::NonFinite,
            Error::Diverged { .. } => IrStatus::Diverged,
            Error::Unsupported(_) => IrStatus::Unsupported,
            Error::SvdFailed { .. } => IrStatus::Numerical,
            Error::Io { .. } | Error::Json(_) => IrStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> IrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            IrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IrStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(IrStatus::NullPointer, format!("{name} is null"))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output(src: &[f64], dst: *mut f64, len: usize, name: &str) -> FfiResult<()> {
    if len != src.len() {
        return Err(Failure(
            IrStatus::DimensionMismatch,
            format!("{name}: buffer length {len}, result length {}", src.len()),
        ));
    }
    if len > 0 {
        if dst.is_null() {
            return Err(null(name));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
    }
    Ok(())
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(name));
    }
    *out = value;
    Ok(())
}

fn variant(v: IrVariant) -> Variant {
    match v {
        IrVariant::Dgd => Variant::Dgd,
        IrVariant::Adgd => Variant::Adgd,
    }
}

fn ir_variant(v: Variant) -> IrVariant {
    match v {
        Variant::Dgd => IrVariant::Dgd,
        Variant::Adgd => IrVariant::Adgd,
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ir_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ir_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Dense `rows x cols` operator from row-major `data`.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_dense(
    data: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut IrOperator,
) -> IrStatus {
    guard(|| {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(IrStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let values = input(data, len, "data")?.to_vec();
        let x = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Failure(IrStatus::InvalidArgument, e.to_string()))?;
        emit(out, IrOperator(LinearOperator::Dense(x)))
    })
}

/// Entry-sampling operator on a `rows x cols` grid; `indices` are row-major
/// flat positions.
///
/// # Safety
/// `indices` must point to `count` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_mask(
    rows: usize,
    cols: usize,
    indices: *const usize,
    count: usize,
    out: *mut *mut IrOperator,
) -> IrStatus {
    guard(|| {
        let flat = if count == 0 {
            Vec::new()
        } else if indices.is_null() {
            return Err(null("indices"));
        } else {
            std::slice::from_raw_parts(indices, count).to_vec()
        };
        let mask = EntryMask::from_flat(rows, cols, flat)?;
        emit(out, IrOperator(LinearOperator::EntryMask(mask)))
    })
}

/// Circular Gaussian blur of a `rows x cols` image.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_gaussian_blur(
    rows: usize,
    cols: usize,
    sigma: f64,
    radius: usize,
    out: *mut *mut IrOperator,
) -> IrStatus {
    guard(|| {
        let blur = Blur::gaussian(rows, cols, sigma, radius)?;
        emit(out, IrOperator(LinearOperator::Blur(blur)))
    })
}

/// `outer ∘ inner`. Both inputs are copied and stay owned by the caller.
///
/// # Safety
/// Handles must be valid or null; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_compose(
    outer: *const IrOperator,
    inner: *const IrOperator,
    out: *mut *mut IrOperator,
) -> IrStatus {
    guard(|| {
        let outer = handle(outer, "outer")?.0.clone();
        let inner = handle(inner, "inner")?.0.clone();
        emit(out, IrOperator(LinearOperator::compose(outer, inner)?))
    })
}

/// # Safety
/// `op` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_free(op: *mut IrOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` must be a valid handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_dims(
    op: *const IrOperator,
    domain: *mut usize,
    codomain: *mut usize,
) -> IrStatus {
    guard(|| {
        let op = &handle(op, "op")?.0;
        write(domain, op.domain_dim(), "domain")?;
        write(codomain, op.codomain_dim(), "codomain")
    })
}

/// # Safety
/// `x` must hold `x_len` doubles and `out` must have room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_apply(
    op: *const IrOperator,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> IrStatus {
    guard(|| {
        let op = &handle(op, "op")?.0;
        let r = op.apply(ArrayView1::from(input(x, x_len, "x")?))?;
        output(r.as_slice().unwrap(), out, out_len, "out")
    })
}

/// # Safety
/// `u` must hold `u_len` doubles and `out` must have room for `out_len`.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_adjoint(
    op: *const IrOperator,
    u: *const f64,
    u_len: usize,
    out: *mut f64,
    out_len: usize,
) -> IrStatus {
    guard(|| {
        let op = &handle(op, "op")?.0;
        let r = op.adjoint(ArrayView1::from(input(u, u_len, "u")?))?;
        output(r.as_slice().unwrap(), out, out_len, "out")
    })
}

/// Largest singular value by the power method.
///
/// # Safety
/// `op` must be a valid handle; `norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_operator_norm(op: *const IrOperator, norm: *mut f64) -> IrStatus {
    guard(|| {
        let est = linops::op_norm_default(&handle(op, "op")?.0)?;
        write(norm, est.value, "norm")
    })
}

/// `penalty + (alpha/2)||.||^2`. `rows` and `cols` are read for the nuclear
/// and total-variation penalties only.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_regularizer_new(
    alpha: f64,
    penalty: IrPenalty,
    rows: usize,
    cols: usize,
    out: *mut *mut IrRegularizer,
) -> IrStatus {
    guard(|| {
        let penalty = match penalty {
            IrPenalty::Zero => Penalty::Zero,
            IrPenalty::L1 => Penalty::L1,
            IrPenalty::Nuclear => Penalty::Nuclear { rows, cols },
            IrPenalty::Tv => Penalty::Tv { rows, cols, inner: InnerSchedule::default() },
        };
        emit(out, IrRegularizer(Regularizer::new(alpha, penalty)?))
    })
}

/// # Safety
/// `reg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ir_regularizer_free(reg: *mut IrRegularizer) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

/// `argmin_u penalty(u) + (alpha/2)||u - w||^2`.
///
/// # Safety
/// `w` must hold `len` doubles and `out` must have room for `len`.
#[no_mangle]
pub unsafe extern "C" fn ir_regularizer_prox(
    reg: *mut IrRegularizer,
    w: *const f64,
    len: usize,
    out: *mut f64,
) -> IrStatus {
    guard(|| {
        let reg = &mut handle_mut(reg, "reg")?.0;
        let r = reg.prox(ArrayView1::from(input(w, len, "w")?))?;
        output(r.point.as_slice().unwrap(), out, len, "out")
    })
}

/// Gradient of the convex conjugate at `v`, `prox(v / alpha)`.
///
/// # Safety
/// `v` must hold `len` doubles and `out` must have room for `len`.
#[no_mangle]
pub unsafe extern "C" fn ir_regularizer_dual_gradient(
    reg: *mut IrRegularizer,
    v: *const f64,
    len: usize,
    out: *mut f64,
) -> IrStatus {
    guard(|| {
        let reg = &mut handle_mut(reg, "reg")?.0;
        let g = reg.dual_gradient(ArrayView1::from(input(v, len, "v")?))?;
        output(g.as_slice().unwrap(), out, len, "out")
    })
}

#[no_mangle]
pub extern "C" fn ir_solve_options_default() -> IrSolveOptions {
    IrSolveOptions {
        variant: IrVariant::Adgd,
        max_iterations: 1000,
        step: 0.0,
        record_every: 1,
        store_iterates: false,
        track_dual_objective: true,
    }
}

/// Runs DGD or ADGD on `op`, `y`. A null `options` means the defaults.
///
/// # Safety
/// Handles must be valid; `y` must hold `y_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_solve(
    op: *const IrOperator,
    y: *const f64,
    y_len: usize,
    reg: *mut IrRegularizer,
    options: *const IrSolveOptions,
    out: *mut *mut IrTrace,
) -> IrStatus {
    guard(|| {
        let op = &handle(op, "op")?.0;
        let reg = &mut handle_mut(reg, "reg")?.0;
        let y = ArrayView1::from(input(y, y_len, "y")?);
        let o = options.as_ref().copied().unwrap_or_else(|| ir_solve_options_default());
        let mut cfg = SolverConfig::new(variant(o.variant), o.max_iterations).recording_every(o.record_every.max(1));
        if o.step > 0.0 {
            cfg = cfg.with_step(o.step);
        }
        if o.store_iterates {
            cfg = cfg.storing_iterates();
        }
        if !o.track_dual_objective {
            cfg = cfg.without_dual_objective();
        }
        let trace = solvers::run(op, y, reg, &cfg, &mut [])?;
        emit(out, IrTrace(trace))
    })
}

/// # Safety
/// `trace` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_free(trace: *mut IrTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a valid handle; `info` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_info(trace: *const IrTrace, info: *mut IrTraceInfo) -> IrStatus {
    guard(|| {
        let t = &handle(trace, "trace")?.0;
        let value = IrTraceInfo {
            variant: ir_variant(t.variant),
            alpha: t.alpha,
            gamma: t.gamma,
            step_norm: (t.alpha / t.gamma).sqrt(),
            iterations: t.iterations,
            inner_iterations: t.inner_iterations,
            records: t.records.len(),
            primal_dim: t.final_primal.len(),
            dual_dim: t.final_dual.len(),
        };
        write(info, value, "info")
    })
}

/// The solver's estimate after the last iteration: the running mean for DGD,
/// the last primal iterate for ADGD.
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_output(trace: *const IrTrace, out: *mut f64, len: usize) -> IrStatus {
    guard(|| {
        let t = &handle(trace, "trace")?.0;
        output(t.final_output().as_slice().unwrap(), out, len, "out")
    })
}

/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_final_dual(trace: *const IrTrace, out: *mut f64, len: usize) -> IrStatus {
    guard(|| {
        let t = &handle(trace, "trace")?.0;
        output(t.final_dual.as_slice().unwrap(), out, len, "out")
    })
}

/// Iteration index and dual objective of record `index`.
///
/// # Safety
/// `trace` must be a valid handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_dual_objective(
    trace: *const IrTrace,
    index: usize,
    t: *mut usize,
    value: *mut f64,
) -> IrStatus {
    guard(|| {
        let trace = &handle(trace, "trace")?.0;
        let rec = trace.records.get(index).ok_or_else(|| {
            Failure(IrStatus::InvalidArgument, format!("record {index} of {}", trace.records.len()))
        })?;
        let d = rec
            .dual_objective
            .ok_or_else(|| Failure(IrStatus::Unsupported, "dual objective was not tracked".into()))?;
        write(t, rec.t, "t")?;
        write(value, d, "value")
    })
}

/// Estimate stored at record `index` (needs `store_iterates`).
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ir_trace_iterate(
    trace: *const IrTrace,
    index: usize,
    out: *mut f64,
    len: usize,
) -> IrStatus {
    guard(|| {
        let trace = &handle(trace, "trace")?.0;
        let rec = trace.records.get(index).ok_or_else(|| {
            Failure(IrStatus::InvalidArgument, format!("record {index} of {}", trace.records.len()))
        })?;
        let it = rec
            .iterates
            .as_ref()
            .ok_or_else(|| Failure(IrStatus::Unsupported, "iterates were not stored".into()))?;
        let w = it.averaged.as_ref().unwrap_or(&it.primal);
        output(w.as_slice().unwrap(), out, len, "out")
    })
}

/// A-priori stopping time and error bound. A non-positive `c` selects the
/// default constant.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_certificate(
    variant_: IrVariant,
    operator_norm: f64,
    dual_norm: f64,
    alpha: f64,
    delta: f64,
    c: f64,
    out: *mut IrCertificate,
) -> IrStatus {
    guard(|| {
        let c = (c > 0.0).then_some(c);
        let cert = stopping::make_certificate(variant(variant_), operator_norm, dual_norm, alpha, delta, c)?;
        let value = IrCertificate {
            variant: variant_,
            a: cert.a,
            b: cert.b,
            c: cert.c,
            delta: cert.delta,
            t_delta: cert.t_delta,
            final_bound: cert.final_bound,
        };
        write(out, value, "out")
    })
}

/// Error bound of `cert` at iteration `t`.
///
/// # Safety
/// `cert` must point to a certificate; `bound` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_certificate_bound(cert: *const IrCertificate, t: usize, bound: *mut f64) -> IrStatus {
    guard(|| {
        let c = handle(cert, "cert")?;
        let cert = StoppingCertificate {
            variant: variant(c.variant),
            a: c.a,
            b: c.b,
            c: c.c,
            delta: c.delta,
            t_delta: c.t_delta,
            final_bound: c.final_bound,
        };
        write(bound, cert.bound_at(t)?, "bound")
    })
}
