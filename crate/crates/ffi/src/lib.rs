//! C interface to the z2sync library.
//!
//! Objects are opaque handles released with their `*_free` function. Every
//! fallible call returns a [`Z2Status`]; on failure the message is available
//! from [`z2_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use z2sync::gibbs::SamplerOptions;
use z2sync::io::{load_instance, save_instance};
use z2sync::model::{beta_of, generate_instance, LatticeInstance, ModelParams};
use z2sync::multiscale::check_scale_conditions;
use z2sync::pipeline::{run_pipeline, PipelineConfig, PipelineOutcome};
use z2sync::renorm::RenormOptions;
use z2sync::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Z2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Geometry = 4,
    TooLarge = 5,
    NotFound = 6,
    Format = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Model parameters. `p` must lie in `[0, 1/2]`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct Z2Params {
    pub d: u32,
    pub n: i64,
    pub p: f64,
    pub eta: f64,
    pub range_l: u32,
    pub seed: u64,
}

/// Pipeline controls. `scale` must be a positive multiple of 6.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct Z2SyncOptions {
    pub scale: i64,
    pub kappa: u32,
    pub t: f64,
    pub burn_in: u64,
    pub sweeps: u64,
    pub risk_pairs: u64,
}

/// Scalar results of a pipeline run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct Z2SyncSummary {
    pub risk: f64,
    pub risk_se: f64,
    pub risk_exact: f64,
    pub p_hat: f64,
    pub delta_hat: f64,
    pub blocks: u64,
    pub covered: u64,
    pub edges: u64,
    pub disagreements: u64,
}

/// Scale-condition values with their truncation tails.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct Z2ScaleReport {
    pub a1: f64,
    pub a2: f64,
    pub a2_tail: f64,
    pub a3: f64,
    pub a3_tail: f64,
    pub all_pass: bool,
}

/// Planted signs, observations and Gaussian side information.
pub struct Z2Instance {
    inner: LatticeInstance,
}

/// Outcome of a pipeline run with the per-vertex sign estimates.
pub struct Z2SyncResult {
    outcome: PipelineOutcome,
    vertices: Vec<usize>,
    signs: Vec<i8>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> Z2Status {
    match err {
        Error::InvalidParameter { .. } => Z2Status::InvalidParameter,
        Error::Domain(_) => Z2Status::Domain,
        Error::Geometry(_) => Z2Status::Geometry,
        Error::TooLarge(_) => Z2Status::TooLarge,
        Error::NotFound(_) => Z2Status::NotFound,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => Z2Status::Format,
        Error::Io(_) => Z2Status::Io,
    }
}

/// Run `f`, recording any error or panic.
fn guard<F: FnOnce() -> Result<(), (Z2Status, String)>>(f: F) -> Z2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            Z2Status::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            Z2Status::Panic
        }
    }
}

fn lib<T>(r: z2sync::Result<T>) -> Result<T, (Z2Status, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (Z2Status, String) {
    (Z2Status::NullPointer, format!("`{what}` is null"))
}

fn model_params(p: &Z2Params) -> z2sync::Result<ModelParams> {
    ModelParams::new_closed(p.d as usize, p.n, p.p, p.eta, p.range_l as usize, p.seed)
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, (Z2Status, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| (Z2Status::InvalidParameter, "path is not valid UTF-8".to_string()))?;
    Ok(Path::new(s))
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn z2_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn z2_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Lattice inverse temperature `1/2 ln((1 - p) / p)` for `0 < p < 1/2`.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_beta_of(p: f64, out: *mut f64) -> Z2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(beta_of(p))?;
        Ok(())
    })
}

/// Draw an instance.
///
/// # Safety
/// `params` must be null or valid for a read; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_generate(params: *const Z2Params, out: *mut *mut Z2Instance) -> Z2Status {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lib(model_params(params).and_then(|p| generate_instance(&p)))?;
        *out = Box::into_raw(Box::new(Z2Instance { inner }));
        Ok(())
    })
}

/// Release an instance. Null is ignored.
///
/// # Safety
/// `inst` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_free(inst: *mut Z2Instance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of lattice vertices, 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_num_vertices(inst: *const Z2Instance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.num_vertices())
}

/// Copy the planted signs (row-major over the box) into `out`.
///
/// # Safety
/// `inst` must be null or a live handle; `out` null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_theta(inst: *const Z2Instance, out: *mut i8, len: usize) -> Z2Status {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let theta = inst.inner.theta_vec();
        if len < theta.len() {
            return Err((Z2Status::BufferTooSmall, format!("need {} entries, got {len}", theta.len())));
        }
        ptr::copy_nonoverlapping(theta.as_ptr(), out, theta.len());
        Ok(())
    })
}

/// Write an instance in the binary instance format.
///
/// # Safety
/// `inst` must be null or a live handle; `path` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_save(inst: *const Z2Instance, path: *const c_char) -> Z2Status {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("inst"))?;
        lib(save_instance(path_arg(path)?, &inst.inner))
    })
}

/// Read an instance written by [`z2_instance_save`] or the command line tool.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_instance_load(path: *const c_char, out: *mut *mut Z2Instance) -> Z2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lib(load_instance(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(Z2Instance { inner }));
        Ok(())
    })
}

/// Run the full pipeline on the instance described by `params`. The
/// Gaussian range is set to twice the block scale.
///
/// # Safety
/// `params` and `opts` must be null or valid for reads; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_sync_run(
    params: *const Z2Params,
    opts: *const Z2SyncOptions,
    out: *mut *mut Z2SyncResult,
) -> Z2Status {
    guard(|| {
        let params = params.as_ref().ok_or_else(|| null("params"))?;
        let opts = opts.as_ref().ok_or_else(|| null("opts"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sampler = SamplerOptions {
            burn_in: opts.burn_in as usize,
            sweeps: opts.sweeps as usize,
        };
        lib(sampler.validate())?;
        let cfg = PipelineConfig {
            model: lib(model_params(params))?,
            scale: opts.scale,
            kappa: opts.kappa,
            t: opts.t,
            renorm: RenormOptions {
                sampler,
                ..Default::default()
            },
            risk_pairs: opts.risk_pairs as usize,
        };
        let run = lib(run_pipeline(&cfg))?;
        *out = Box::into_raw(Box::new(Z2SyncResult {
            outcome: run.outcome,
            vertices: run.estimate.vertices,
            signs: run.estimate.signs,
        }));
        Ok(())
    })
}

/// Release a pipeline result. Null is ignored.
///
/// # Safety
/// `res` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn z2_sync_result_free(res: *mut Z2SyncResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Scalar results of a run.
///
/// # Safety
/// `res` must be null or a live handle; `out` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_sync_result_summary(res: *const Z2SyncResult, out: *mut Z2SyncSummary) -> Z2Status {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = &res.outcome;
        *out = Z2SyncSummary {
            risk: o.risk.value,
            risk_se: o.risk.se,
            risk_exact: o.risk_exact,
            p_hat: o.p_hat,
            delta_hat: o.delta_hat,
            blocks: o.blocks as u64,
            covered: o.covered as u64,
            edges: o.edges as u64,
            disagreements: o.disagreements as u64,
        };
        Ok(())
    })
}

/// Copy the covered vertex indices and their estimated signs. Both buffers
/// need `summary.covered` entries.
///
/// # Safety
/// `res` must be null or a live handle; each buffer null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn z2_sync_result_signs(
    res: *const Z2SyncResult,
    vertices: *mut u64,
    signs: *mut i8,
    len: usize,
) -> Z2Status {
    guard(|| {
        let res = res.as_ref().ok_or_else(|| null("res"))?;
        if vertices.is_null() || signs.is_null() {
            return Err(null("vertices/signs"));
        }
        let n = res.vertices.len();
        if len < n {
            return Err((Z2Status::BufferTooSmall, format!("need {n} entries, got {len}")));
        }
        for (i, (&v, &s)) in res.vertices.iter().zip(&res.signs).enumerate() {
            *vertices.add(i) = v as u64;
            *signs.add(i) = s;
        }
        Ok(())
    })
}

/// Evaluate the block-size conditions for `kappa` in dimension `d`.
///
/// # Safety
/// `out` must be null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn z2_check_scales(kappa: u32, d: u32, out: *mut Z2ScaleReport) -> Z2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = lib(check_scale_conditions(kappa, d as usize))?;
        *out = Z2ScaleReport {
            a1: r.a1.value,
            a2: r.a2.value,
            a2_tail: r.a2.tail_bound,
            a3: r.a3.value,
            a3_tail: r.a3.tail_bound,
            all_pass: r.all_pass,
        };
        Ok(())
    })
}
