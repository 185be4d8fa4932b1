//! C ABI for the citygraph generator.
//!
//! The surface follows the usual opaque-handle pattern: configurations and
//! generated graphs live behind pointers created and destroyed here, every
//! fallible call returns a `CgStatus`, and the last error message of the
//! calling thread is available via [`cg_last_error_message`]. The header
//! `include/citygraph.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use citygraph::analysis;
use citygraph::config::RunConfig;
use citygraph::error::Error;
use citygraph::geo::Grid;
use citygraph::graph::SocialGraph;
use citygraph::pipeline;

/// Status codes returned by every fallible call. The numeric values match
/// the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgStatus {
    CgOk = 0,
    CgErrConfig = 2,
    CgErrFeasibility = 3,
    CgErrIo = 4,
    CgErrNullPointer = 5,
    CgErrInvalidUtf8 = 6,
    CgErrPanic = 7,
}

/// Opaque run configuration.
pub struct CgConfig {
    inner: RunConfig,
}

/// Opaque generated graph plus the grid it lives on.
pub struct CgGraph {
    graph: SocialGraph,
    grid: Grid,
    mu: f64,
    mu_max: f64,
    seed: u64,
    path_length_sample: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> CgStatus {
    match err.exit_code() {
        3 => CgStatus::CgErrFeasibility,
        4 => CgStatus::CgErrIo,
        _ => CgStatus::CgErrConfig,
    }
}

fn fail(err: Error) -> CgStatus {
    set_last_error(&err.to_string());
    status_of(&err)
}

fn guard<F: FnOnce() -> CgStatus>(f: F) -> CgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            CgStatus::CgErrPanic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, CgStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(CgStatus::CgErrNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        CgStatus::CgErrInvalidUtf8
    })
}

/// Message of the most recent error on this thread; the pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a run configuration from a JSON file. On success writes a handle
/// to `out`; free it with `cg_config_free`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_config_from_file(
    path: *const c_char,
    out: *mut *mut CgConfig,
) -> CgStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null output pointer");
            return CgStatus::CgErrNullPointer;
        }
        let path = match cstr_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match RunConfig::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CgConfig { inner }));
                CgStatus::CgOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a run configuration from a JSON string; relative input paths are
/// resolved against the current working directory.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_config_from_json(
    json: *const c_char,
    out: *mut *mut CgConfig,
) -> CgStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("null output pointer");
            return CgStatus::CgErrNullPointer;
        }
        let json = match cstr_arg(json) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match serde_json::from_str::<RunConfig>(json) {
            Ok(mut inner) => {
                inner.resolve_inputs(Path::new("."));
                *out = Box::into_raw(Box::new(CgConfig { inner }));
                CgStatus::CgOk
            }
            Err(e) => {
                set_last_error(&format!("configuration JSON: {e}"));
                CgStatus::CgErrConfig
            }
        }
    })
}

/// Overrides the seed of a loaded configuration.
///
/// # Safety
/// `config` must be a live handle from `cg_config_from_*`.
#[no_mangle]
pub unsafe extern "C" fn cg_config_set_seed(config: *mut CgConfig, seed: u64) -> CgStatus {
    if config.is_null() {
        set_last_error("null config handle");
        return CgStatus::CgErrNullPointer;
    }
    (*config).inner.seed = seed;
    CgStatus::CgOk
}

/// Validates a configuration without running it.
///
/// # Safety
/// `config` must be a live handle from `cg_config_from_*`.
#[no_mangle]
pub unsafe extern "C" fn cg_config_validate(config: *const CgConfig) -> CgStatus {
    guard(|| {
        if config.is_null() {
            set_last_error("null config handle");
            return CgStatus::CgErrNullPointer;
        }
        match (*config).inner.validate() {
            Ok(()) => CgStatus::CgOk,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `config` must be a handle from `cg_config_from_*` not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn cg_config_free(config: *mut CgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs one generation (population, households, friendship layer) with the
/// configuration's seed. On success writes a graph handle to `out`; free it
/// with `cg_graph_free`.
///
/// # Safety
/// `config` must be a live config handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_generate(config: *const CgConfig, out: *mut *mut CgGraph) -> CgStatus {
    guard(|| {
        if config.is_null() || out.is_null() {
            set_last_error("null handle");
            return CgStatus::CgErrNullPointer;
        }
        let cfg = &(*config).inner;
        let result = cfg
            .validate()
            .and_then(|()| pipeline::load_inputs(cfg))
            .and_then(|inputs| {
                pipeline::generate(cfg, &inputs, cfg.seed).map(|r| (inputs.grid.clone(), r))
            });
        match result {
            Ok((grid, generation)) => {
                *out = Box::into_raw(Box::new(CgGraph {
                    graph: generation.graph,
                    grid,
                    mu: cfg.mu,
                    mu_max: generation.mu_max,
                    seed: generation.seed,
                    path_length_sample: cfg.path_length_sample,
                }));
                CgStatus::CgOk
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `graph` must be a handle from `cg_generate` not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_free(graph: *mut CgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_node_count(graph: *const CgGraph) -> u64 {
    if graph.is_null() {
        return 0;
    }
    (*graph).graph.node_count() as u64
}

/// Edge count of one layer: 0 = household, 1 = friendship, 2 = flattened
/// simple graph.
///
/// # Safety
/// `graph` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_edge_count(graph: *const CgGraph, layer: i32) -> u64 {
    if graph.is_null() {
        return 0;
    }
    let g = &(*graph).graph;
    match layer {
        0 => g.household_edges.len() as u64,
        1 => g.friendship_edges.len() as u64,
        _ => g.simple_edges().len() as u64,
    }
}

/// Mean degree of the flattened graph.
///
/// # Safety
/// `graph` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_mean_degree(graph: *const CgGraph) -> f64 {
    if graph.is_null() {
        return f64::NAN;
    }
    (*graph).graph.mean_degree()
}

/// Largest feasible mean friendship degree for the generated context.
///
/// # Safety
/// `graph` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_mu_max(graph: *const CgGraph) -> f64 {
    if graph.is_null() {
        return f64::NAN;
    }
    (*graph).mu_max
}

/// Degree of `node` in the flattened graph, or -1 if out of range.
///
/// # Safety
/// `graph` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_degree(graph: *const CgGraph, node: u64) -> i64 {
    if graph.is_null() {
        return -1;
    }
    let g = &(*graph).graph;
    if node >= g.node_count() as u64 {
        set_last_error(&format!("node {node} out of range"));
        return -1;
    }
    g.adjacency().degree(node as usize) as i64
}

/// Writes nodes.csv, edges.csv and households.csv into `dir`.
///
/// # Safety
/// `graph` must be a live graph handle and `dir` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_write_csv(graph: *const CgGraph, dir: *const c_char) -> CgStatus {
    guard(|| {
        if graph.is_null() {
            set_last_error("null graph handle");
            return CgStatus::CgErrNullPointer;
        }
        let dir = match cstr_arg(dir) {
            Ok(d) => d,
            Err(status) => return status,
        };
        let dir = Path::new(dir);
        let g = &*graph;
        let write = || -> Result<(), Error> {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
            citygraph::io::write_nodes_csv(&dir.join("nodes.csv"), &g.graph.persons, &g.grid)?;
            citygraph::io::write_edges_csv(
                &dir.join("edges.csv"),
                &g.graph.household_edges,
                &g.graph.friendship_edges,
            )
        };
        match write() {
            Ok(()) => CgStatus::CgOk,
            Err(e) => fail(e),
        }
    })
}

/// Runs the full metric suite and returns it as a JSON document allocated
/// by the library; free it with `cg_string_free`.
///
/// # Safety
/// `graph` must be a live graph handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cg_graph_metrics_json(
    graph: *const CgGraph,
    out_json: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        if graph.is_null() || out_json.is_null() {
            set_last_error("null handle");
            return CgStatus::CgErrNullPointer;
        }
        let g = &*graph;
        let analysis = match analysis::analyze(
            &g.graph,
            &g.grid,
            g.mu,
            g.path_length_sample,
            g.seed,
        ) {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let json = match serde_json::to_string_pretty(&analysis.report) {
            Ok(j) => j,
            Err(e) => {
                set_last_error(&format!("serialize metrics: {e}"));
                return CgStatus::CgErrIo;
            }
        };
        match CString::new(json) {
            Ok(cstring) => {
                *out_json = cstring.into_raw();
                CgStatus::CgOk
            }
            Err(_) => {
                set_last_error("metrics JSON contained a NUL byte");
                CgStatus::CgErrIo
            }
        }
    })
}

/// Frees a string allocated by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by `cg_graph_metrics_json`
/// (or null), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// Quiet the unused-import lint for ptr used only in doc examples.
const _: *const u8 = ptr::null();
