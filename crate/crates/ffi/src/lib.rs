//! C ABI over `privroute`.
//!
//! Every fallible function returns a [`PrStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`pr_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use privroute::counter::{EpsilonPrime, PrivateCounter};
use privroute::dynamics::{run_br_exact, run_br_private, EngineConfig, RunOutcome};
use privroute::game::{Game, PlayerType};
use privroute::harness::evaluate_profile;
use privroute::params::PrivateParams;
use privroute::scenario::Scenario;
use privroute::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Infeasible = 5,
    Exhausted = 6,
    Io = 7,
    Panic = 8,
}

/// Parsed and validated scenario.
pub struct PrScenario {
    game: Game,
    types: Vec<PlayerType>,
}

/// Result of one engine run.
pub struct PrOutcome {
    outcome: RunOutcome,
    max_regret: f64,
}

pub struct PrCounter {
    inner: PrivateCounter,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrDims {
    pub n: usize,
    pub m: usize,
    pub max_route_len: usize,
    pub sensitivity: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrParams {
    pub t: u64,
    pub k: u64,
    pub epsilon_prime: f64,
    pub count_error: f64,
    pub delta_t: f64,
    pub feasible: bool,
    pub eta: f64,
    pub eta_prime: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PrStatus {
    match err {
        Error::Parse { .. } => PrStatus::Parse,
        Error::InfeasibleAlpha { .. } => PrStatus::Infeasible,
        Error::StreamExhausted { .. } => PrStatus::Exhausted,
        Error::Io(_) => PrStatus::Io,
        _ => PrStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PrStatus, String)>) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside privroute");
            PrStatus::Panic
        }
    }
}

fn lib<T>(r: privroute::Result<T>) -> Result<T, (PrStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PrStatus, String) {
    (PrStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PrStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (PrStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn scenario_handle(sc: Scenario) -> Result<*mut PrScenario, (PrStatus, String)> {
    let (game, types) = lib(sc.game())?;
    Ok(Box::into_raw(Box::new(PrScenario { game, types })))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses scenario text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_scenario_parse(text: *const c_char, out: *mut *mut PrScenario) -> PrStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let handle = scenario_handle(lib(Scenario::parse_str(text))?)?;
        write_out(out, handle, "out")
    })
}

/// Reads and parses a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_scenario_load(path: *const c_char, out: *mut *mut PrScenario) -> PrStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let handle = scenario_handle(lib(Scenario::from_path(path))?)?;
        write_out(out, handle, "out")
    })
}

/// # Safety
/// `scenario` must come from `pr_scenario_parse`/`pr_scenario_load` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pr_scenario_free(scenario: *mut PrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_scenario_dims(scenario: *const PrScenario, out: *mut PrDims) -> PrStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let dims = PrDims {
            n: sc.game.n(),
            m: sc.game.m(),
            max_route_len: sc.game.max_route_len(),
            sensitivity: sc.game.sensitivity(),
        };
        write_out(out, dims, "out")
    })
}

/// Derived private-engine parameters. An infeasible α is reported through
/// `feasible`, not as an error.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_params_derive(
    scenario: *const PrScenario,
    alpha: f64,
    epsilon: f64,
    beta: f64,
    out: *mut PrParams,
) -> PrStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        let p = lib(PrivateParams::for_game(&sc.game, alpha, epsilon, beta))?;
        let params = PrParams {
            t: p.t,
            k: p.k,
            epsilon_prime: p.epsilon_prime,
            count_error: p.count_error,
            delta_t: p.cost_error,
            feasible: p.feasible,
            eta: p.eta,
            eta_prime: p.eta_prime,
        };
        write_out(out, params, "out")
    })
}

fn outcome_handle(sc: &PrScenario, outcome: RunOutcome) -> Result<*mut PrOutcome, (PrStatus, String)> {
    let profile = outcome.final_profile.as_ref().unwrap_or(&outcome.halted_profile);
    let metrics = lib(evaluate_profile(&sc.game, &sc.types, profile))?;
    Ok(Box::into_raw(Box::new(PrOutcome {
        max_regret: metrics.max_regret,
        outcome,
    })))
}

/// Exact dynamics with the default schedule for `alpha`.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_run_exact(scenario: *const PrScenario, alpha: f64, out: *mut *mut PrOutcome) -> PrStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = lib(EngineConfig::exact(&sc.game, alpha))?;
        let outcome = lib(run_br_exact(&sc.game, &sc.types, &config))?;
        write_out(out, outcome_handle(sc, outcome)?, "out")
    })
}

/// Private dynamics. Returns `PR_STATUS_INFEASIBLE` when α fails the gate.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_run_private(
    scenario: *const PrScenario,
    epsilon: f64,
    beta: f64,
    alpha: f64,
    seed: u64,
    out: *mut *mut PrOutcome,
) -> PrStatus {
    guard(|| {
        let sc = deref(scenario, "scenario")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let run = lib(run_br_private(&sc.game, &sc.types, epsilon, beta, alpha, seed))?;
        write_out(out, outcome_handle(sc, run.outcome)?, "out")
    })
}

/// # Safety
/// `outcome` must come from a `pr_run_*` call or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pr_outcome_free(outcome: *mut PrOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_outcome_converged(outcome: *const PrOutcome, out: *mut bool) -> PrStatus {
    guard(|| write_out(out, deref(outcome, "outcome")?.outcome.converged(), "out"))
}

/// Exact max regret of the final profile (or the halted one after a failure).
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_outcome_max_regret(outcome: *const PrOutcome, out: *mut f64) -> PrStatus {
    guard(|| write_out(out, deref(outcome, "outcome")?.max_regret, "out"))
}

/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_outcome_turns(outcome: *const PrOutcome, out: *mut u64) -> PrStatus {
    guard(|| write_out(out, deref(outcome, "outcome")?.outcome.turns_played(), "out"))
}

/// Accepted moves of `player`.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_outcome_move_count(outcome: *const PrOutcome, player: usize, out: *mut u64) -> PrStatus {
    guard(|| {
        let o = &deref(outcome, "outcome")?.outcome;
        let count = *o.move_counts.get(player).ok_or_else(|| {
            (
                PrStatus::InvalidArgument,
                format!(
                    "invalid-player: index {player} out of range for {} players",
                    o.move_counts.len()
                ),
            )
        })?;
        write_out(out, count, "out")
    })
}

/// New binary-mechanism counter. Pass `INFINITY` as `epsilon_prime` for a
/// noiseless counter.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_counter_new(
    budget: u64,
    epsilon_prime: f64,
    seed: u64,
    out: *mut *mut PrCounter,
) -> PrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let eps = lib(EpsilonPrime::new(epsilon_prime))?;
        let inner = lib(PrivateCounter::new(budget, eps, seed))?;
        write_out(out, Box::into_raw(Box::new(PrCounter { inner })), "out")
    })
}

/// Feeds one symbol in {-1, 0, 1} and writes the noisy count.
///
/// # Safety
/// `counter` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_counter_feed(counter: *mut PrCounter, symbol: i8, out: *mut f64) -> PrStatus {
    guard(|| {
        let c = counter.as_mut().ok_or_else(|| null("counter"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = lib(c.inner.feed(symbol))?;
        write_out(out, y, "out")
    })
}

/// # Safety
/// `counter` must come from `pr_counter_new` or be NULL.
#[no_mangle]
pub unsafe extern "C" fn pr_counter_free(counter: *mut PrCounter) {
    if !counter.is_null() {
        drop(Box::from_raw(counter));
    }
}

/// High-probability counter error bound.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_error_bound(
    stream_len: u64,
    beta_prime: f64,
    epsilon_prime: f64,
    out: *mut f64,
) -> PrStatus {
    guard(|| {
        write_out(
            out,
            lib(privroute::error_bound(stream_len, beta_prime, epsilon_prime))?,
            "out",
        )
    })
}
