//! C interface to the graphdiff library.
//!
//! Graphs and kernels are handed out as opaque pointers and released with the
//! matching `*_free` function. Every fallible call returns a [`GdStatus`];
//! the message for the most recent failure on the calling thread is available
//! from [`gd_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graphdiff::asymptotics::{profile_value, ProfileParams};
use graphdiff::experiments::{run_experiment, RunOptions};
use graphdiff::scenario::parse_scenario;
use graphdiff::{builtin_kernel, Error, GraphPoint, GraphSpec, Kernel, KernelParams, MetricGraph};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidGraph = 3,
    InvalidArgument = 4,
    InvalidKernel = 5,
    InvalidScenario = 6,
    Io = 7,
    Solver = 8,
    ChecksFailed = 9,
    Panic = 10,
}

/// Opaque graph handle.
pub struct GdGraph(MetricGraph);

/// Opaque kernel handle.
pub struct GdKernel(Kernel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> GdStatus {
    use Error::*;
    match e {
        EmptyGraph
        | UnknownVertex { .. }
        | DuplicateVertex(_)
        | NonPositiveLength { .. }
        | InfiniteEdgeWithTwoEndpoints { .. }
        | FiniteEdgeWithoutTerminal { .. }
        | Disconnected(_)
        | NoInfiniteEdge
        | LowDegree { .. } => GdStatus::InvalidGraph,
        UnknownKernel(_) | Inadmissible(_) | KernelUnresolved { .. } => GdStatus::InvalidKernel,
        Scenario { .. } => GdStatus::InvalidScenario,
        Io { .. } => GdStatus::Io,
        Solver(_) | ExplicitUnstable { .. } | TooDense { .. } => GdStatus::Solver,
        _ => GdStatus::InvalidArgument,
    }
}

struct Failure(GdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> GdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(GdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn graph_arg<'a>(g: *const GdGraph) -> FfiResult<&'a MetricGraph> {
    g.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

unsafe fn kernel_arg<'a>(k: *const GdKernel) -> FfiResult<&'a Kernel> {
    k.as_ref().map(|k| &k.0).ok_or_else(|| null("kernel"))
}

fn opt(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

fn graph_from_yaml(text: &str) -> FfiResult<MetricGraph> {
    let spec: GraphSpec =
        serde_yaml::from_str(text).map_err(|e| Failure(GdStatus::InvalidGraph, format!("graph description: {e}")))?;
    Ok(spec.build()?)
}

/// Builds a graph from a YAML description (`vertices`, `edges`, optional
/// `strict_topology` and `allow_compact`; other keys are ignored, so a
/// scenario file works too).
///
/// # Safety
/// `yaml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_from_yaml(yaml: *const c_char, out: *mut *mut GdGraph) -> GdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let g = graph_from_yaml(str_arg(yaml, "yaml")?)?;
        *out = Box::into_raw(Box::new(GdGraph(g)));
        Ok(())
    })
}

/// Same as [`gd_graph_from_yaml`] but reads the description from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_from_file(path: *const c_char, out: *mut *mut GdGraph) -> GdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let text = std::fs::read_to_string(path).map_err(|e| Failure(GdStatus::Io, format!("reading {path}: {e}")))?;
        let g = graph_from_yaml(&text)?;
        *out = Box::into_raw(Box::new(GdGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must come from a graph constructor and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_free(g: *mut GdGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of vertices, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_num_vertices(g: *const GdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_vertices())
}

/// Number of edges, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_num_edges(g: *const GdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Number of infinite edges, 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_num_infinite(g: *const GdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_infinite())
}

/// Length of edge `edge`; `INFINITY` for a ray.
///
/// # Safety
/// `g` must be a live graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_edge_length(g: *const GdGraph, edge: usize, out: *mut f64) -> GdStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let out = out_arg(out, "out")?;
        if edge >= g.num_edges() {
            return Err(Failure(
                GdStatus::InvalidArgument,
                format!("edge {edge} out of range ({} edges)", g.num_edges()),
            ));
        }
        *out = g.edges()[edge].length;
        Ok(())
    })
}

/// Shortest-path distance between `(e1, x1)` and `(e2, x2)`.
///
/// # Safety
/// `g` must be a live graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_graph_distance(
    g: *const GdGraph,
    e1: usize,
    x1: f64,
    e2: usize,
    x2: f64,
    out: *mut f64,
) -> GdStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let out = out_arg(out, "out")?;
        *out = g.graph_distance(GraphPoint::new(e1, x1), GraphPoint::new(e2, x2))?;
        Ok(())
    })
}

/// Large-time profile with mass `mass` and diffusion constant `a`, at point
/// `(edge, x)` and time `t > 0`.
///
/// # Safety
/// `g` must be a live graph handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_profile_value(
    g: *const GdGraph,
    mass: f64,
    a: f64,
    edge: usize,
    x: f64,
    t: f64,
    out: *mut f64,
) -> GdStatus {
    guard(|| {
        let g = graph_arg(g)?;
        let out = out_arg(out, "out")?;
        let params = ProfileParams::for_graph(g, mass, a)?;
        *out = profile_value(g, &params, GraphPoint::new(edge, x), t)?;
        Ok(())
    })
}

/// Builds one of the named kernels (`tent`, `indicator`,
/// `truncated_gaussian`, ...). Pass NaN for `height`, `radius` or `sigma`
/// to keep the default. With `normalize` set the kernel is rescaled to unit
/// second moment.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_kernel_builtin(
    name: *const c_char,
    height: f64,
    radius: f64,
    sigma: f64,
    normalize: bool,
    out: *mut *mut GdKernel,
) -> GdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        let params = KernelParams {
            height: opt(height),
            radius: opt(radius),
            sigma: opt(sigma),
        };
        let mut k = builtin_kernel(name, &params)?;
        if normalize {
            k = k.normalize_unit_second_moment()?;
        }
        *out = Box::into_raw(Box::new(GdKernel(k)));
        Ok(())
    })
}

/// # Safety
/// `k` must come from [`gd_kernel_builtin`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gd_kernel_free(k: *mut GdKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Writes the L1 norm, half the second moment and the support radius of the
/// profile. Any of the output pointers may be null.
///
/// # Safety
/// `k` must be a live kernel handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gd_kernel_moments(
    k: *const GdKernel,
    l1_norm: *mut f64,
    second_moment_half: *mut f64,
    support: *mut f64,
) -> GdStatus {
    guard(|| {
        let k = kernel_arg(k)?;
        if let Some(p) = l1_norm.as_mut() {
            *p = k.l1_norm();
        }
        if let Some(p) = second_moment_half.as_mut() {
            *p = k.second_moment_half();
        }
        if let Some(p) = support.as_mut() {
            *p = k.support_radius();
        }
        Ok(())
    })
}

/// Rescaled kernel `J_eps(r)` for `eps > 0`.
///
/// # Safety
/// `k` must be a live kernel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_kernel_eval(k: *const GdKernel, eps: f64, r: f64, out: *mut f64) -> GdStatus {
    guard(|| {
        let k = kernel_arg(k)?;
        let out = out_arg(out, "out")?;
        *out = k.rescaled(eps, r)?;
        Ok(())
    })
}

/// Runs the scenario at `path`, writing outputs to `out_dir` (null for no
/// output). `all_passed` receives whether every check passed; a failing check
/// also returns `GD_STATUS_CHECKS_FAILED`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_dir` null or a
/// NUL-terminated string, and `all_passed` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gd_run_scenario(
    path: *const c_char,
    out_dir: *const c_char,
    all_passed: *mut bool,
) -> GdStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(str_arg(out_dir, "out_dir")?).to_path_buf())
        };
        let s = parse_scenario(Path::new(path))?;
        let summary = run_experiment(&s, &RunOptions { out, ..Default::default() })?;
        if let Some(p) = all_passed.as_mut() {
            *p = summary.all_passed;
        }
        if summary.all_passed {
            Ok(())
        } else {
            let failed: Vec<&str> = summary
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| c.name.as_str())
                .collect();
            Err(Failure(GdStatus::ChecksFailed, format!("failed checks: {}", failed.join(", "))))
        }
    })
}
