//! C ABI for the h2atlas engine.
//!
//! Every function returns an [`H2aStatus`]; on failure the message is kept
//! per thread and read with [`h2a_last_error`]. Objects are opaque handles
//! released with their matching `_free` function. Strings handed out by the
//! library are released with [`h2a_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use h2atlas::eligibility::BufferMap;
use h2atlas::h2opt::{cost_potential_curve, solve_node, CurveConfig, NodeModel, TemporalResolution};
use h2atlas::placement::capacity_from_area;
use h2atlas::service::pipeline::{layer_csv, layer_geojson, read_curve_csv, read_eligibility, whatif_eligibility};
use h2atlas::service::{run_pipeline, PipelineOptions, RunConfig, RunOutcome, Store};
use h2atlas::tech::Tech;
use h2atlas::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H2aStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Config = 4,
    Io = 5,
    Domain = 6,
    Infeasible = 7,
    Solver = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Result store rooted at a directory.
pub struct H2aStore {
    store: Store,
}

/// Stored eligibility of one region in one run; supports what-if buffers.
pub struct H2aEligibility {
    store: Store,
    run_id: String,
    gid: String,
    tech: Tech,
    fraction: f64,
}

/// Single-region node model for the capacity-expansion LP.
pub struct H2aNode {
    model: NodeModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(H2aStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::Json(_) => H2aStatus::InvalidArgument,
            Error::NotFound(_) => H2aStatus::NotFound,
            Error::Config(_) => H2aStatus::Config,
            Error::Io(_) | Error::File { .. } | Error::Csv(_) => H2aStatus::Io,
            Error::Infeasible(_) => H2aStatus::Infeasible,
            Error::Solver(_) => H2aStatus::Solver,
            _ => H2aStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(H2aStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> H2aStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            H2aStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            H2aStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(H2aStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{name} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(H2aStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(H2aStatus::NullPointer, format!("{name} is null")))
}

fn give_string(s: String, out: &mut *mut c_char) -> Result<(), Failure> {
    *out = CString::new(s).map_err(|_| invalid("output contains NUL"))?.into_raw();
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn h2a_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn h2a_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn h2a_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// PV capacity in GWp for `area_km2` of land at `m2_per_kwp`.
///
/// # Safety
/// `out_gw` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_pv_capacity_from_area(area_km2: f64, m2_per_kwp: f64, out_gw: *mut f64) -> H2aStatus {
    guard(|| {
        let out = out_arg(out_gw, "out_gw")?;
        *out = capacity_from_area(area_km2, m2_per_kwp)?;
        Ok(())
    })
}

/// Opens (creating if needed) a result store.
///
/// # Safety
/// `root` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_store_open(root: *const c_char, out: *mut *mut H2aStore) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = Store::open(PathBuf::from(str_arg(root, "root")?))?;
        *out = Box::into_raw(Box::new(H2aStore { store }));
        Ok(())
    })
}

/// # Safety
/// `store` must come from [`h2a_store_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn h2a_store_free(store: *mut H2aStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Runs the pipeline for a config file. Writes the 16-character run id and a
/// trailing NUL into `run_id_buf` (at least 17 bytes) and whether the run
/// was already cached. `threads` of 0 uses all cores.
///
/// # Safety
/// Pointers must be valid; `run_id_buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn h2a_run(
    store: *const H2aStore,
    config_path: *const c_char,
    threads: u32,
    run_id_buf: *mut c_char,
    buf_len: usize,
    out_cached: *mut bool,
) -> H2aStatus {
    guard(|| {
        let store = handle(store, "store")?;
        let config = RunConfig::read(str_arg(config_path, "config_path")?)?;
        if run_id_buf.is_null() {
            return Err(Failure(H2aStatus::NullPointer, "run_id_buf is null".into()));
        }
        let opts = PipelineOptions {
            threads: (threads > 0).then_some(threads as usize),
        };
        let outcome = run_pipeline(&store.store, &config, opts)?;
        let id = &outcome.manifest().run_id;
        if buf_len < id.len() + 1 {
            return Err(Failure(H2aStatus::BufferTooSmall, format!("run id needs {} bytes", id.len() + 1)));
        }
        ptr::copy_nonoverlapping(id.as_ptr().cast::<c_char>(), run_id_buf, id.len());
        *run_id_buf.add(id.len()) = 0;
        if let Some(c) = out_cached.as_mut() {
            *c = matches!(outcome, RunOutcome::Cached(_));
        }
        Ok(())
    })
}

/// Cost-potential curve CSV of a region. Free the result with [`h2a_string_free`].
///
/// # Safety
/// Pointers must be valid NUL-terminated strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_curve_csv(
    store: *const H2aStore,
    run_id: *const c_char,
    gid: *const c_char,
    out: *mut *mut c_char,
) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = handle(store, "store")?;
        let text = read_curve_csv(&store.store, str_arg(run_id, "run_id")?, str_arg(gid, "gid")?)?;
        give_string(text, out)
    })
}

/// Map layer as GeoJSON (`csv == false`) or CSV. Free with [`h2a_string_free`].
///
/// # Safety
/// Pointers must be valid NUL-terminated strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_layer_export(
    store: *const H2aStore,
    run_id: *const c_char,
    layer: *const c_char,
    csv: bool,
    out: *mut *mut c_char,
) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = handle(store, "store")?;
        let (run_id, layer) = (str_arg(run_id, "run_id")?, str_arg(layer, "layer")?);
        let text = if csv {
            layer_csv(&store.store, run_id, layer)?
        } else {
            serde_json::to_string(&layer_geojson(&store.store, run_id, layer)?).map_err(Error::from)?
        };
        give_string(text, out)
    })
}

/// Loads the stored eligibility of `gid` for `tech` ("wind" or "pv").
///
/// # Safety
/// Pointers must be valid NUL-terminated strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_eligibility_open(
    store: *const H2aStore,
    run_id: *const c_char,
    gid: *const c_char,
    tech: *const c_char,
    out: *mut *mut H2aEligibility,
) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let store = handle(store, "store")?;
        let tech: Tech = str_arg(tech, "tech")?.parse()?;
        let (run_id, gid) = (str_arg(run_id, "run_id")?, str_arg(gid, "gid")?);
        let r = read_eligibility(&store.store, run_id, gid, tech)?;
        *out = Box::into_raw(Box::new(H2aEligibility {
            store: store.store.clone(),
            run_id: run_id.to_string(),
            gid: gid.to_string(),
            tech,
            fraction: r.eligible_fraction,
        }));
        Ok(())
    })
}

/// Stored eligible fraction.
///
/// # Safety
/// `elig` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_eligibility_fraction(elig: *const H2aEligibility, out: *mut f64) -> H2aStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(elig, "elig")?.fraction;
        Ok(())
    })
}

/// Eligible fraction with `n` buffer overrides (criterion id, meters).
///
/// # Safety
/// `ids` and `meters` must each hold `n` elements (may be null when `n == 0`).
#[no_mangle]
pub unsafe extern "C" fn h2a_eligibility_whatif(
    elig: *const H2aEligibility,
    ids: *const u8,
    meters: *const f64,
    n: usize,
    out_fraction: *mut f64,
) -> H2aStatus {
    guard(|| {
        let e = handle(elig, "elig")?;
        let out = out_arg(out_fraction, "out_fraction")?;
        let mut overrides = BufferMap::new();
        if n > 0 {
            if ids.is_null() || meters.is_null() {
                return Err(Failure(H2aStatus::NullPointer, "ids or meters is null".into()));
            }
            let ids = std::slice::from_raw_parts(ids, n);
            let meters = std::slice::from_raw_parts(meters, n);
            overrides.extend(ids.iter().copied().zip(meters.iter().copied()));
        }
        *out = whatif_eligibility(&e.store, &e.run_id, &e.gid, e.tech, &overrides)?.eligible_fraction;
        Ok(())
    })
}

/// # Safety
/// `elig` must come from [`h2a_eligibility_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn h2a_eligibility_free(elig: *mut H2aEligibility) {
    if !elig.is_null() {
        drop(Box::from_raw(elig));
    }
}

/// Parses a node model from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_node_from_json(json: *const c_char, out: *mut *mut H2aNode) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model: NodeModel = serde_json::from_str(str_arg(json, "json")?).map_err(Error::from)?;
        model.validate()?;
        *out = Box::into_raw(Box::new(H2aNode { model }));
        Ok(())
    })
}

/// Solves the node for `demand_t` tonnes of H₂ per year over `days`
/// representative days (0 for every hour). Writes LCOH in €/kg and the
/// annual cost in €.
///
/// # Safety
/// `node` must be a live handle; outputs valid for writes (`out_cost` may be null).
#[no_mangle]
pub unsafe extern "C" fn h2a_node_solve(
    node: *const H2aNode,
    demand_t: f64,
    days: u32,
    out_lcoh: *mut f64,
    out_cost: *mut f64,
) -> H2aStatus {
    guard(|| {
        let node = handle(node, "node")?;
        let out = out_arg(out_lcoh, "out_lcoh")?;
        let resolution = match days {
            0 => TemporalResolution::Hourly,
            d => TemporalResolution::RepresentativeDays { days: d as usize },
        };
        let res = solve_node(&node.model, demand_t, resolution)?;
        *out = res.lcoh;
        if let Some(c) = out_cost.as_mut() {
            *c = res.annual_cost;
        }
        Ok(())
    })
}

/// Cost-potential curve of the node as JSON. `config_json` may be null for
/// defaults. Free the result with [`h2a_string_free`].
///
/// # Safety
/// `node` must be a live handle; strings NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn h2a_node_curve_json(
    node: *const H2aNode,
    config_json: *const c_char,
    out: *mut *mut c_char,
) -> H2aStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let node = handle(node, "node")?;
        let config: CurveConfig = if config_json.is_null() {
            CurveConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(Error::from)?
        };
        let curve = cost_potential_curve(&node.model, &config)?;
        give_string(serde_json::to_string(&curve).map_err(Error::from)?, out)
    })
}

/// # Safety
/// `node` must come from [`h2a_node_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn h2a_node_free(node: *mut H2aNode) {
    if !node.is_null() {
        drop(Box::from_raw(node));
    }
}
