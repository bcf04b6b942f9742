//! C ABI for the nematic solver.
//!
//! Objects cross the boundary as opaque handles created by `nematic_*`
//! constructors and released by the matching `*_free`. Every fallible call
//! returns a [`NematicStatus`]; on failure the message is kept per thread
//! and read back with [`nematic_last_error`]. Panics are caught and reported
//! as [`NematicStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nematic::cli::{build_pair, certify_with, energy_summary, provenance, write_run, CliError, RunConfig};
use nematic::fields::{
    read_trajectory_file, DirectorField, DomainKind, Field, FieldError, Grid, Trajectory,
};
use nematic::solvers::{run_to_steady, SolverError};
use nematic::tensor::Vec3;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NematicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Io = 4,
    NoConvergence = 5,
    CertificationFailed = 6,
    Panic = 7,
}

/// Parsed and validated run configuration.
pub struct NematicConfig(RunConfig);

/// Unit director field on a grid.
pub struct NematicDirector(DirectorField);

/// Stored run: field samples plus per-step records.
pub struct NematicTrajectory(Trajectory);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NematicEnergy {
    pub elastic: f64,
    pub magnetic: f64,
    pub dxq_norm: f64,
    pub el_residual: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NematicRecord {
    pub time: f64,
    pub elastic: f64,
    pub magnetic: f64,
    pub kinetic: f64,
    pub dissipation: f64,
    pub dxq_norm: f64,
    pub sym_grad_norm: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NematicCertificate {
    pub min_margin: f64,
    pub c: f64,
    pub k: f64,
    pub theta_coefficient: f64,
    pub samples: usize,
    pub passes: bool,
}

struct Failure(NematicStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match &e {
            CliError::Usage(_) | CliError::Config(_) => NematicStatus::InvalidConfig,
            CliError::Output { .. } => NematicStatus::Io,
            CliError::Input { source: FieldError::Io(_), .. } | CliError::Field(FieldError::Io(_)) => NematicStatus::Io,
            CliError::NoConvergence(_) => NematicStatus::NoConvergence,
            CliError::CertificationFailed { .. } => NematicStatus::CertificationFailed,
            _ => NematicStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<FieldError> for Failure {
    fn from(e: FieldError) -> Self {
        let status = match e {
            FieldError::Io(_) => NematicStatus::Io,
            _ => NematicStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        CliError::from(e).into()
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn guard(f: impl FnOnce() -> Result<NematicStatus, Failure>) -> NematicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            NematicStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(NematicStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NematicStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nematic_version() -> *const c_char {
    concat!("nematic ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full length
/// including the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nematic_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_config_parse(text: *const c_char, out: *mut *mut NematicConfig) -> NematicStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(text, "text")?;
        let cfg = RunConfig::parse(text).map_err(CliError::from)?;
        put(out, NematicConfig(cfg));
        Ok(NematicStatus::Ok)
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`nematic_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nematic_config_free(cfg: *mut NematicConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Configured initial director on the configured grid.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_director_initial(
    cfg: *const NematicConfig,
    out: *mut *mut NematicDirector,
) -> NematicStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, NematicDirector(cfg.initial_director(&cfg.grid)?));
        Ok(NematicStatus::Ok)
    })
}

/// Director from `3·nx·ny·nz` values in x-fastest node order. Every node
/// must be unit length.
///
/// # Safety
/// `dims` and `spacing` must point to three elements, `values` to `len`
/// doubles; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_director_from_values(
    dims: *const usize,
    spacing: *const f64,
    periodic: bool,
    values: *const f64,
    len: usize,
    out: *mut *mut NematicDirector,
) -> NematicStatus {
    guard(|| {
        if dims.is_null() || spacing.is_null() || values.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let dims: [usize; 3] = std::slice::from_raw_parts(dims, 3).try_into().expect("three");
        let spacing: [f64; 3] = std::slice::from_raw_parts(spacing, 3).try_into().expect("three");
        let kind = if periodic { DomainKind::Periodic } else { DomainKind::Dirichlet };
        let grid = Grid::new(dims, spacing, kind)?;
        if len != 3 * grid.len() {
            return Err(FieldError::LengthMismatch { expected: 3 * grid.len(), found: len }.into());
        }
        let xs = std::slice::from_raw_parts(values, len);
        let field = Field { grid, values: xs.chunks_exact(3).map(|c| Vec3([c[0], c[1], c[2]])).collect() };
        put(out, NematicDirector(DirectorField::new(field)?));
        Ok(NematicStatus::Ok)
    })
}

/// Number of grid nodes.
///
/// # Safety
/// `d` must be a live director handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_director_nodes(d: *const NematicDirector) -> usize {
    d.as_ref().map_or(0, |d| d.0.grid().len())
}

/// Copies the `3·nodes` components into `out`.
///
/// # Safety
/// `d` must be a live director handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nematic_director_values(d: *const NematicDirector, out: *mut f64, len: usize) -> NematicStatus {
    guard(|| {
        let d = &deref(d, "director")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = 3 * d.grid().len();
        if len != n {
            return Err(FieldError::LengthMismatch { expected: n, found: len }.into());
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (chunk, v) in dst.chunks_exact_mut(3).zip(d.values()) {
            chunk.copy_from_slice(&v.0);
        }
        Ok(NematicStatus::Ok)
    })
}

/// # Safety
/// `d` must be null or a live director handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_director_free(d: *mut NematicDirector) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Elastic and magnetic energy plus both residual norms of `d` under the
/// constants of `cfg`.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_energy(
    cfg: *const NematicConfig,
    d: *const NematicDirector,
    out: *mut NematicEnergy,
) -> NematicStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        let d = &deref(d, "director")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let e = energy_summary(cfg, d);
        *out = NematicEnergy { elastic: e.elastic, magnetic: e.magnetic, dxq_norm: e.dxq_norm, el_residual: e.el_residual };
        Ok(NematicStatus::Ok)
    })
}

unsafe fn finish(result: Result<Trajectory, SolverError>, out: *mut *mut NematicTrajectory) -> Result<NematicStatus, Failure> {
    match result {
        Ok(t) => {
            put(out, NematicTrajectory(t));
            Ok(NematicStatus::Ok)
        }
        Err(SolverError::NoConvergence { steps, dxq_norm, sym_grad_norm, trajectory }) => {
            set_error(format!(
                "no steady state after {steps} steps (|d x q| = {dxq_norm:e}, |(grad v)_sym| = {sym_grad_norm:e})"
            ));
            put(out, NematicTrajectory(*trajectory));
            Ok(NematicStatus::NoConvergence)
        }
        Err(e) => Err(e.into()),
    }
}

/// Gradient flow from `d`, or from the configured initial director when `d`
/// is null. On `NoConvergence` the partial trajectory is still returned.
///
/// # Safety
/// `cfg` must be live, `d` null or live, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_gradflow(
    cfg: *const NematicConfig,
    d: *const NematicDirector,
    out: *mut *mut NematicTrajectory,
) -> NematicStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = match d.as_ref() {
            Some(d) => d.0.clone(),
            None => cfg.initial_director(&cfg.grid)?,
        };
        let solver = cfg.solver_for(d.grid());
        finish(run_to_steady(d, None, &cfg.frank, None, &solver), out)
    })
}

/// Coupled run from the configured initial data; needs a periodic grid and
/// Leslie coefficients.
///
/// # Safety
/// `cfg` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_flow(cfg: *const NematicConfig, out: *mut *mut NematicTrajectory) -> NematicStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if cfg.grid.kind != DomainKind::Periodic {
            return Err(CliError::Usage("flow requires grid.domain = periodic".into()).into());
        }
        let l = cfg.leslie.ok_or_else(|| CliError::Usage("flow requires leslie.mu1..mu6 and leslie.lambda".into()))?;
        let d = cfg.initial_director(&cfg.grid)?;
        let v = cfg.initial_velocity(&cfg.grid);
        let solver = cfg.solver_for(&cfg.grid);
        finish(run_to_steady(d, v, &cfg.frank, Some(&l), &solver), out)
    })
}

/// Loads a trajectory file; step records are not stored in it.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_read(path: *const c_char, out: *mut *mut NematicTrajectory) -> NematicStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let traj = Trajectory::from_snapshots(read_trajectory_file(&PathBuf::from(path))?)?;
        put(out, NematicTrajectory(traj));
        Ok(NematicStatus::Ok)
    })
}

/// Writes `trajectory.snap` and `timeseries.csv` into directory `dir`.
///
/// # Safety
/// Handles must be live and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_write(
    traj: *const NematicTrajectory,
    cfg: *const NematicConfig,
    dir: *const c_char,
) -> NematicStatus {
    guard(|| {
        let traj = &deref(traj, "trajectory")?.0;
        let cfg = &deref(cfg, "cfg")?.0;
        let dir = c_str(dir, "dir")?;
        write_run(&PathBuf::from(dir), &provenance(cfg, "ffi"), traj)?;
        Ok(NematicStatus::Ok)
    })
}

/// # Safety
/// `traj` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_samples(traj: *const NematicTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.samples.len())
}

/// # Safety
/// `traj` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_records(traj: *const NematicTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `traj` must be a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_converged(traj: *const NematicTrajectory) -> bool {
    traj.as_ref().is_some_and(|t| t.0.converged)
}

/// Step record `index`.
///
/// # Safety
/// `traj` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_record(
    traj: *const NematicTrajectory,
    index: usize,
    out: *mut NematicRecord,
) -> NematicStatus {
    guard(|| {
        let traj = &deref(traj, "trajectory")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = traj.records.get(index).ok_or_else(|| {
            Failure(NematicStatus::InvalidArgument, format!("record {index} out of range ({})", traj.records.len()))
        })?;
        *out = NematicRecord {
            time: r.time,
            elastic: r.elastic,
            magnetic: r.magnetic,
            kinetic: r.kinetic,
            dissipation: r.dissipation,
            dxq_norm: r.dxq_norm,
            sym_grad_norm: r.sym_grad_norm,
        };
        Ok(NematicStatus::Ok)
    })
}

/// Director of the last sample as a new handle.
///
/// # Safety
/// `traj` must be live and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_final_director(
    traj: *const NematicTrajectory,
    out: *mut *mut NematicDirector,
) -> NematicStatus {
    guard(|| {
        let traj = &deref(traj, "trajectory")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let last = traj.last().ok_or_else(|| Failure(NematicStatus::InvalidArgument, "trajectory has no samples".into()))?;
        put(out, NematicDirector(DirectorField::new(last.d.clone())?));
        Ok(NematicStatus::Ok)
    })
}

/// # Safety
/// `traj` must be null or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn nematic_trajectory_free(traj: *mut NematicTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Relative energy inequality of `traj` against the configured pair with the
/// configured constants. Returns `CertificationFailed` (with `out` filled)
/// when the minimum margin is below `−diag.tol`.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nematic_certify(
    cfg: *const NematicConfig,
    traj: *const NematicTrajectory,
    out: *mut NematicCertificate,
) -> NematicStatus {
    guard(|| {
        let cfg = &deref(cfg, "cfg")?.0;
        let traj = &deref(traj, "trajectory")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let pair = build_pair(cfg, traj)?;
        let r = certify_with(cfg, traj, &pair, cfg.diag.c)?;
        let passes = r.passes(cfg.diag.tol);
        *out = NematicCertificate {
            min_margin: r.min_margin,
            c: r.c,
            k: r.k_coercivity,
            theta_coefficient: r.theta_coefficient,
            samples: r.times.len(),
            passes,
        };
        if passes {
            Ok(NematicStatus::Ok)
        } else {
            set_error(format!("certification FAIL: min margin {:e} below -{:e}", r.min_margin, cfg.diag.tol));
            Ok(NematicStatus::CertificationFailed)
        }
    })
}
