//! C ABI over `flexray-core`.
//!
//! Clusters and traces are opaque handles owned by the caller and released
//! with the matching `*_free` function. Strings returned through `out`
//! parameters are NUL-terminated UTF-8 and must be released with
//! [`flexray_string_free`]. Every entry point returns a [`FlexrayStatus`];
//! negative values are errors, and [`flexray_last_error`] describes the most
//! recent one on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use flexray_core::cli::inputs_from_jsonl;
use flexray_core::engine::{simulate_with, CollisionPolicy, SimError, Trace};
use flexray_core::monitor::{MonitorError, Predicate};
use flexray_core::protocol::ClusterConfig;
use flexray_core::refinement::{gen_inputs, run_campaign_with_jobs, trial_rng, CampaignConfig};
use flexray_core::verdict::Verdict;

/// Result codes. Non-negative values are outcomes, negative values errors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexrayStatus {
    Ok = 0,
    /// A predicate, assumption or campaign found a violation.
    Violated = 1,
    /// A monitor's precondition did not hold.
    Refused = 2,
    /// The simulation hit a bus collision; the partial trace is returned.
    Collision = 3,
    NullArgument = -1,
    InvalidUtf8 = -2,
    ParseError = -3,
    ShapeError = -4,
    InvalidConfig = -5,
    UnknownPredicate = -6,
    Panic = -99,
}

/// Opaque cluster configuration.
pub struct FlexrayCluster(ClusterConfig);

/// Opaque simulation trace.
pub struct FlexrayTrace(Trace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(FlexrayStatus);

fn fail(status: FlexrayStatus, msg: impl Into<String>) -> Fail {
    set_error(msg);
    Fail(status)
}

fn guard(f: impl FnOnce() -> Result<FlexrayStatus, Fail>) -> FlexrayStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s))) => s,
        Err(_) => {
            set_error("internal panic");
            FlexrayStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(fail(FlexrayStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(FlexrayStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| fail(FlexrayStatus::NullArgument, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(fail(FlexrayStatus::NullArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("NUL removed")
        .into_raw()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn flexray_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn flexray_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn flexray_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `{"nodes":[{"schedule":[..],"cycle_length":L},..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_cluster_from_json(
    json: *const c_char,
    out: *mut *mut FlexrayCluster,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let cluster = ClusterConfig::from_json(text)
            .map_err(|e| fail(FlexrayStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(FlexrayCluster(cluster)));
        Ok(FlexrayStatus::Ok)
    })
}

/// # Safety
/// `cluster` must be NULL or a handle from [`flexray_cluster_from_json`].
#[no_mangle]
pub unsafe extern "C" fn flexray_cluster_free(cluster: *mut FlexrayCluster) {
    if !cluster.is_null() {
        drop(Box::from_raw(cluster));
    }
}

/// Number of nodes, 0 for NULL.
///
/// # Safety
/// `cluster` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flexray_cluster_node_count(cluster: *const FlexrayCluster) -> usize {
    cluster.as_ref().map_or(0, |c| c.0.len())
}

/// Static assumption check. Writes a JSON array of verdicts to `out_json`
/// and returns `Ok` or `Violated`.
///
/// # Safety
/// `cluster` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_cluster_validate(
    cluster: *const FlexrayCluster,
    out_json: *mut *mut c_char,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let cluster = ref_arg(cluster, "cluster")?;
        let verdicts = cluster.0.static_verdicts();
        let ok = verdicts.iter().all(|(_, v)| v.holds());
        let reports: Vec<_> = verdicts.iter().map(|(n, v)| v.report(n)).collect();
        *out_json = into_c_string(serde_json::to_string(&reports).expect("serialisable"));
        Ok(if ok {
            FlexrayStatus::Ok
        } else {
            FlexrayStatus::Violated
        })
    })
}

unsafe fn finish_simulation(
    cluster: &ClusterConfig,
    inputs: &[flexray_core::TimedStreamPrefix<flexray_core::Frame>],
    horizon: u64,
    continue_on_collision: bool,
    out: *mut *mut FlexrayTrace,
) -> Result<FlexrayStatus, Fail> {
    let policy = if continue_on_collision {
        CollisionPolicy::RecordAndContinue
    } else {
        CollisionPolicy::Abort
    };
    let (trace, status) = match simulate_with(cluster, inputs, horizon, policy) {
        Ok(sim) if sim.collisions.is_empty() => (sim.trace, FlexrayStatus::Ok),
        Ok(sim) => {
            let c = &sim.collisions[0];
            set_error(format!(
                "{} bus collisions, first at t={}",
                sim.collisions.len(),
                c.t
            ));
            (sim.trace, FlexrayStatus::Collision)
        }
        Err(SimError::Collision { collision, partial }) => {
            set_error(format!(
                "bus collision at t={} between nodes {:?}",
                collision.t, collision.senders
            ));
            (partial, FlexrayStatus::Collision)
        }
        Err(e @ SimError::InvalidNode { .. }) => {
            return Err(fail(FlexrayStatus::InvalidConfig, e.to_string()))
        }
        Err(e) => return Err(fail(FlexrayStatus::ShapeError, e.to_string())),
    };
    *out = Box::into_raw(Box::new(FlexrayTrace(trace)));
    Ok(status)
}

/// Simulates `horizon` ticks with inputs generated from `seed`.
///
/// On `Collision` a trace is still written to `out` (truncated unless
/// `continue_on_collision`).
///
/// # Safety
/// `cluster` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_simulate_seeded(
    cluster: *const FlexrayCluster,
    seed: u64,
    horizon: u64,
    continue_on_collision: bool,
    out: *mut *mut FlexrayTrace,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cluster = &ref_arg(cluster, "cluster")?.0;
        let inputs = gen_inputs(&mut trial_rng(seed, 0), cluster, horizon);
        finish_simulation(cluster, &inputs, horizon, continue_on_collision, out)
    })
}

/// Simulates with inputs given as JSONL, one `{"t":..,"returns":[..]}`
/// object per tick.
///
/// # Safety
/// `cluster` must be a live handle, `inputs_jsonl` a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_simulate_inputs(
    cluster: *const FlexrayCluster,
    inputs_jsonl: *const c_char,
    horizon: u64,
    continue_on_collision: bool,
    out: *mut *mut FlexrayTrace,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cluster = &ref_arg(cluster, "cluster")?.0;
        let text = str_arg(inputs_jsonl, "inputs_jsonl")?;
        let inputs = inputs_from_jsonl(text, cluster.len())
            .map_err(|e| fail(FlexrayStatus::ParseError, e))?;
        finish_simulation(cluster, &inputs, horizon, continue_on_collision, out)
    })
}

/// # Safety
/// `jsonl` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_trace_from_jsonl(
    jsonl: *const c_char,
    out: *mut *mut FlexrayTrace,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(jsonl, "jsonl")?;
        let trace =
            Trace::from_jsonl(text).map_err(|e| fail(FlexrayStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(FlexrayTrace(trace)));
        Ok(FlexrayStatus::Ok)
    })
}

/// # Safety
/// `trace` must be a live handle; `out_jsonl` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_trace_to_jsonl(
    trace: *const FlexrayTrace,
    out_jsonl: *mut *mut c_char,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out_jsonl, "out_jsonl")?;
        let trace = ref_arg(trace, "trace")?;
        *out_jsonl = into_c_string(trace.0.to_jsonl());
        Ok(FlexrayStatus::Ok)
    })
}

/// Number of ticks in the trace, 0 for NULL.
///
/// # Safety
/// `trace` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flexray_trace_horizon(trace: *const FlexrayTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.0.horizon())
}

/// # Safety
/// `trace` must be NULL or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn flexray_trace_free(trace: *mut FlexrayTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Evaluates one named predicate (`frame_transmission`, `broadcast`,
/// `send`, `receive`, `msg_bounds`, `self_exclusion`, `bus_conservation`).
/// Writes `{"predicate":..,"holds":..,"violation":..,"refused":..}`.
///
/// # Safety
/// Handles must be live, `predicate` NUL-terminated, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_check(
    trace: *const FlexrayTrace,
    cluster: *const FlexrayCluster,
    predicate: *const c_char,
    out_json: *mut *mut c_char,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out_json, "out_json")?;
        let trace = &ref_arg(trace, "trace")?.0;
        let cluster = &ref_arg(cluster, "cluster")?.0;
        let name = str_arg(predicate, "predicate")?;
        let p: Predicate = name
            .parse()
            .map_err(|e: MonitorError| fail(FlexrayStatus::UnknownPredicate, e.to_string()))?;
        let verdict = p
            .evaluate(trace, cluster)
            .map_err(|e| fail(FlexrayStatus::ShapeError, e.to_string()))?;
        *out_json =
            into_c_string(serde_json::to_string(&verdict.report(p.name())).expect("serialisable"));
        Ok(match verdict {
            Verdict::Holds => FlexrayStatus::Ok,
            Verdict::Violated(_) => FlexrayStatus::Violated,
            Verdict::Refused(_) => FlexrayStatus::Refused,
        })
    })
}

/// Runs a campaign described by a JSON `CampaignConfig` and writes the
/// report. Returns `Violated` iff the report lists failures.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_report` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flexray_run_campaign(
    config_json: *const c_char,
    jobs: usize,
    out_report: *mut *mut c_char,
) -> FlexrayStatus {
    guard(|| {
        out_arg(out_report, "out_report")?;
        let text = str_arg(config_json, "config_json")?;
        let cfg: CampaignConfig = serde_json::from_str(text)
            .map_err(|e| fail(FlexrayStatus::ParseError, e.to_string()))?;
        let report = run_campaign_with_jobs(&cfg, jobs.max(1))
            .map_err(|e| fail(FlexrayStatus::InvalidConfig, e.to_string()))?;
        *out_report = into_c_string(report.to_json());
        Ok(if report.passed() {
            FlexrayStatus::Ok
        } else {
            FlexrayStatus::Violated
        })
    })
}
