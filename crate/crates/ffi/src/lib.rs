//! C ABI over the planner. Objects cross the boundary as opaque handles or JSON
//! strings. Every fallible call returns an `SpStatus`; on failure the message is
//! available from `sp_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sketchplan::lmp::extract_program;
use sketchplan::orchestrator::{run_approach, Approach, OrchestratorConfig, ReplayBackend};
use sketchplan::solver::{solve, SolveConfig};
use sketchplan::tasks::{self, CheckerRegistry, TaskError};
use sketchplan::{Config, EnvKind, Simulator, WorldState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    UnknownTask = 4,
    UnknownName = 5,
    SceneFailure = 6,
    ProgramError = 7,
    /// The solver used its whole budget; the outcome JSON is still written.
    Exhausted = 8,
    BackendError = 9,
    Panic = 10,
}

/// Opaque configuration handle.
pub struct SpConfig(Config);

/// Opaque world state handle.
pub struct SpWorld(WorldState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(SpStatus, String);

impl Fail {
    fn new(code: SpStatus, msg: impl std::fmt::Display) -> Self {
        Fail(code, msg.to_string())
    }
}

type FfiResult<T> = Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<SpStatus>) -> SpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(code)) => code,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Fail::new(SpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::new(SpStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Fail::new(SpStatus::NullArgument, format!("{what} is null")))
}

unsafe fn config_or_default(p: *const SpConfig) -> Config {
    p.as_ref().map(|c| c.0.clone()).unwrap_or_default()
}

unsafe fn out_arg<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(Fail::new(SpStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|e| Fail::new(SpStatus::InvalidUtf8, e))?;
    if out.is_null() {
        return Err(Fail::new(SpStatus::NullArgument, "output string pointer is null"));
    }
    out.write(c.into_raw());
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> FfiResult<String> {
    serde_json::to_string(v).map_err(|e| Fail::new(SpStatus::InvalidJson, e))
}

fn task_fail(e: TaskError) -> Fail {
    match e {
        TaskError::UnknownTask(_) => Fail::new(SpStatus::UnknownTask, e),
        TaskError::UnknownChecker(_) | TaskError::DuplicateChecker(_) => Fail::new(SpStatus::UnknownName, e),
        _ => Fail::new(SpStatus::SceneFailure, e),
    }
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_config_default(out: *mut *mut SpConfig) -> SpStatus {
    guard(|| {
        out_arg(out, Box::into_raw(Box::new(SpConfig(Config::default()))), "out")?;
        Ok(SpStatus::Ok)
    })
}

/// Default configuration with the fields present in `json` overridden.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_config_from_json(json: *const c_char, out: *mut *mut SpConfig) -> SpStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let c = Config::from_json(text).map_err(|e| Fail::new(SpStatus::InvalidJson, e))?;
        out_arg(out, Box::into_raw(Box::new(SpConfig(c))), "out")?;
        Ok(SpStatus::Ok)
    })
}

/// # Safety
/// `c` must come from `sp_config_*` and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sp_config_free(c: *mut SpConfig) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Seeded initial scene for a catalog task. `config` may be null.
///
/// # Safety
/// Pointers must be valid; `task` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sp_world_for_task(
    task: *const c_char,
    seed: u64,
    config: *const SpConfig,
    out: *mut *mut SpWorld,
) -> SpStatus {
    guard(|| {
        let spec = tasks::find_task(str_arg(task, "task")?).map_err(task_fail)?;
        let s = tasks::make_initial_state(&spec, seed, &config_or_default(config)).map_err(task_fail)?;
        out_arg(out, Box::into_raw(Box::new(SpWorld(s))), "out")?;
        Ok(SpStatus::Ok)
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_world_from_json(json: *const c_char, out: *mut *mut SpWorld) -> SpStatus {
    guard(|| {
        let s: WorldState =
            serde_json::from_str(str_arg(json, "json")?).map_err(|e| Fail::new(SpStatus::InvalidJson, e))?;
        out_arg(out, Box::into_raw(Box::new(SpWorld(s))), "out")?;
        Ok(SpStatus::Ok)
    })
}

/// Serializes the world. Free the result with `sp_string_free`.
///
/// # Safety
/// `world` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_world_to_json(world: *const SpWorld, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        let w = ref_arg(world, "world")?;
        out_string(out, to_json(&w.0)?)?;
        Ok(SpStatus::Ok)
    })
}

/// Top-down SVG of the world. `config` may be null.
///
/// # Safety
/// `world` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_world_svg(
    world: *const SpWorld,
    config: *const SpConfig,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        let w = ref_arg(world, "world")?;
        out_string(out, sketchplan::bench::svg_string(&w.0, &config_or_default(config)))?;
        Ok(SpStatus::Ok)
    })
}

/// # Safety
/// `w` must come from `sp_world_*` and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sp_world_free(w: *mut SpWorld) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Extracts the program from `response` and samples its parameters against
/// `world` in environment `env`. Writes the solver outcome as JSON and returns
/// `Ok` when solved, `Exhausted` when the budget ran out.
///
/// # Safety
/// String arguments must be NUL-terminated; `world` live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_solve(
    world: *const SpWorld,
    env: *const c_char,
    response: *const c_char,
    budget: usize,
    seed: u64,
    config: *const SpConfig,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        let w = ref_arg(world, "world")?;
        let env_name = str_arg(env, "env")?;
        let env = EnvKind::parse(env_name)
            .ok_or_else(|| Fail::new(SpStatus::UnknownName, format!("unknown environment `{env_name}`")))?;
        let program = extract_program(str_arg(response, "response")?).map_err(|e| Fail::new(SpStatus::ProgramError, e))?;
        let sim = Simulator::new(env, config_or_default(config));
        let registry = sim.config.registry(env).to_vec();
        let r = solve(&program, &w.0, &sim, &registry, &SolveConfig::new(budget, seed))
            .map_err(|e| Fail::new(SpStatus::ProgramError, e))?;
        let solved = r.is_solved();
        out_string(out, to_json(&r)?)?;
        Ok(if solved { SpStatus::Ok } else { SpStatus::Exhausted })
    })
}

/// Runs the goal checker of `task` on `world`. `diagnostics` may be null.
///
/// # Safety
/// `task` NUL-terminated; `world` live; `success` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_check_goal(
    task: *const c_char,
    world: *const SpWorld,
    config: *const SpConfig,
    success: *mut bool,
    diagnostics: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        let spec = tasks::find_task(str_arg(task, "task")?).map_err(task_fail)?;
        let w = ref_arg(world, "world")?;
        let v = CheckerRegistry::builtin()
            .evaluate(&spec, &w.0, &config_or_default(config))
            .map_err(task_fail)?;
        out_arg(success, v.success, "success")?;
        if !diagnostics.is_null() {
            out_string(diagnostics, v.diagnostics)?;
        }
        Ok(SpStatus::Ok)
    })
}

/// Runs one episode of `approach` on `task` with a replayed model. `responses`
/// is a JSON array of response strings served in order. Writes the episode log
/// as JSON.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sp_run_episode(
    task: *const c_char,
    approach: *const c_char,
    seed: u64,
    responses: *const c_char,
    config: *const SpConfig,
    out: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        let spec = tasks::find_task(str_arg(task, "task")?).map_err(task_fail)?;
        let name = str_arg(approach, "approach")?;
        let approach =
            Approach::parse(name).ok_or_else(|| Fail::new(SpStatus::UnknownName, format!("unknown approach `{name}`")))?;
        let responses: Vec<String> =
            serde_json::from_str(str_arg(responses, "responses")?).map_err(|e| Fail::new(SpStatus::InvalidJson, e))?;
        let config = config_or_default(config);
        let s0 = tasks::make_initial_state(&spec, seed, &config).map_err(task_fail)?;
        let backend = ReplayBackend::new(responses);
        let mut log = run_approach(approach, &spec, &s0, &backend, &OrchestratorConfig::new(config, seed))
            .map_err(|e| Fail::new(SpStatus::BackendError, e))?;
        log.zero_timings();
        out_string(out, to_json(&log)?)?;
        Ok(SpStatus::Ok)
    })
}
