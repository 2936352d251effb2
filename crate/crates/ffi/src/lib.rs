//! C ABI for `linkbsd`.
//!
//! Every fallible call returns an [`LbStatus`]; on failure the message is
//! available from [`lb_last_error`] on the same thread. Strings handed out by
//! this library must be released with [`lb_string_free`], handles with their
//! matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use linkbsd::bsd::{learn_stump, Feature, Rule, ThresholdRuleSet};
use linkbsd::config::ConfigFile;
use linkbsd::datasets::{builtin, to_labeled};
use linkbsd::explorer::{default_library, evaluate, explore, results_csv, DesignSpace};
use linkbsd::optics::{
    parse_sequence, preamp_power, rx_power, ComponentLibrary, ComponentSpec, LinkDesign, PowerDbm,
    WavelengthNm,
};
use linkbsd::signal::{ber_from_q, estimate_ber, FitConfig, QFactor, SignalSamples};
use linkbsd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration, sequence or argument.
    InvalidArgument = 3,
    /// Degenerate or malformed data.
    DataError = 4,
    Panic = 5,
}

/// Component library handle.
pub struct LbLibrary(ComponentLibrary);

/// Threshold rule set handle.
pub struct LbRules(ThresholdRuleSet);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LbBer {
    pub prob: f64,
    /// Exact even when `prob` underflows.
    pub log10: f64,
}

pub const LB_RULE_RX_NO_AMP: u32 = 1;
pub const LB_RULE_PREAMP: u32 = 2;
pub const LB_RULE_RX_WITH_AMP: u32 = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LbVerdict {
    pub pass: bool,
    pub rx_dbm: f64,
    /// NaN when the design has no amplifier.
    pub preamp_dbm: f64,
    pub min_margin_db: f64,
    /// Bitwise OR of `LB_RULE_*` for every violated floor.
    pub failed_rules: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::MalformedSequence { .. }
            | Error::Config(_)
            | Error::InvalidInput(_)
            | Error::Json(_) => LbStatus::InvalidArgument,
            _ => LbStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LbStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(LbStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LbStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure(LbStatus::NullPointer, format!("{what} is NULL")))
}

fn owned_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(LbStatus::DataError, "output contains a nul byte".into()))
}

fn arg(msg: impl Into<String>) -> Failure {
    Failure(LbStatus::InvalidArgument, msg.into())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library calibrated on the built-in no-amplifier table.
#[no_mangle]
pub extern "C" fn lb_library_default() -> *mut LbLibrary {
    catch_unwind(|| Box::into_raw(Box::new(LbLibrary(default_library()))))
        .unwrap_or(ptr::null_mut())
}

/// Parses a library config document (same format as the `--library` file).
///
/// # Safety
/// `json` must be a NUL-terminated string; the out pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_library_from_json(
    json: *const c_char,
    out_lib: *mut *mut LbLibrary,
) -> LbStatus {
    guard(|| {
        let slot = out(out_lib, "out_lib")?;
        let cfg = ConfigFile::parse(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(LbLibrary(cfg.library)));
        Ok(())
    })
}

/// # Safety
/// `lib` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lb_library_free(lib: *mut LbLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

#[no_mangle]
pub extern "C" fn lb_rules_default() -> *mut LbRules {
    Box::into_raw(Box::new(LbRules(ThresholdRuleSet::default())))
}

/// Reads the `rules` object of a config document; missing fields keep defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; the out pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_rules_from_json(
    json: *const c_char,
    out_rules: *mut *mut LbRules,
) -> LbStatus {
    guard(|| {
        let slot = out(out_rules, "out_rules")?;
        let cfg = ConfigFile::parse(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(LbRules(cfg.rules.unwrap_or_default())));
        Ok(())
    })
}

/// # Safety
/// `rules` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lb_rules_free(rules: *mut LbRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// # Safety
/// `out_ber` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_ber_from_q(q: f64, out_ber: *mut LbBer) -> LbStatus {
    guard(|| {
        let slot = out(out_ber, "out_ber")?;
        let b = ber_from_q(QFactor::new(q)?);
        *slot = LbBer {
            prob: b.prob,
            log10: b.log10,
        };
        Ok(())
    })
}

/// Fits the two-level mixture to `len` amplitudes and reports Q and BER.
///
/// # Safety
/// `samples` must point to `len` readable doubles; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn lb_estimate_ber(
    samples: *const f64,
    len: usize,
    out_q: *mut f64,
    out_ber: *mut LbBer,
) -> LbStatus {
    guard(|| {
        if samples.is_null() {
            return Err(Failure(LbStatus::NullPointer, "samples is NULL".into()));
        }
        let q_slot = out(out_q, "out_q")?;
        let ber_slot = out(out_ber, "out_ber")?;
        let data = std::slice::from_raw_parts(samples, len).to_vec();
        let est = estimate_ber(&SignalSamples::new(data)?, FitConfig::default())?;
        *q_slot = est.q.value();
        *ber_slot = LbBer {
            prob: est.ber.prob,
            log10: est.ber.log10,
        };
        Ok(())
    })
}

/// Propagates and classifies one design. `right` may be NULL; `amp_gain_db`
/// NaN means no amplifier.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out_verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn lb_classify(
    lib: *const LbLibrary,
    rules: *const LbRules,
    left: *const c_char,
    right: *const c_char,
    amp_gain_db: f64,
    launch_dbm: f64,
    wavelength_nm: f64,
    out_verdict: *mut LbVerdict,
) -> LbStatus {
    guard(|| {
        let lib = &lib
            .as_ref()
            .ok_or_else(|| Failure(LbStatus::NullPointer, "lib is NULL".into()))?
            .0;
        let rules = &rules
            .as_ref()
            .ok_or_else(|| Failure(LbStatus::NullPointer, "rules is NULL".into()))?
            .0;
        let slot = out(out_verdict, "out_verdict")?;
        let left = parse_sequence(text(left, "left")?)?;
        let right = if right.is_null() {
            parse_sequence("")?
        } else {
            parse_sequence(text(right, "right")?)?
        };
        let wl = WavelengthNm::new(wavelength_nm).map_err(|e| arg(e.to_string()))?;
        let amp = if amp_gain_db.is_nan() {
            if !right.is_empty() {
                return Err(arg("a right box needs an amplifier gain"));
            }
            None
        } else {
            Some(ComponentSpec::amplifier(amp_gain_db, &[wl])?)
        };
        let design = LinkDesign::new(left, amp, right, PowerDbm::new(launch_dbm)?, wl)?;
        let (trace, verdict) = evaluate(&design, lib, rules)?;
        let failed_rules = verdict.failed_rules.iter().fold(0, |acc, r| {
            acc | match r {
                Rule::RxFloorNoAmp => LB_RULE_RX_NO_AMP,
                Rule::PreampFloor => LB_RULE_PREAMP,
                Rule::RxFloorWithAmp => LB_RULE_RX_WITH_AMP,
            }
        });
        *slot = LbVerdict {
            pass: verdict.decision.is_pass(),
            rx_dbm: rx_power(&trace).value(),
            preamp_dbm: preamp_power(&trace).map_or(f64::NAN, PowerDbm::value),
            min_margin_db: verdict.min_margin(),
            failed_rules,
        };
        Ok(())
    })
}

/// Learns a decision stump on a built-in table (`"table1"` or `"table2"`)
/// and returns it as JSON.
///
/// # Safety
/// Strings NUL-terminated; `out_json` writable. Free the result with [`lb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn lb_learn_stump(
    table: *const c_char,
    feature: *const c_char,
    tolerance_log10: f64,
    out_json: *mut *mut c_char,
) -> LbStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let name = text(table, "table")?;
        let ds = builtin(name).ok_or_else(|| arg(format!("unknown table {name:?}")))?;
        let feature: Feature = text(feature, "feature")?.parse()?;
        let data = to_labeled(&ds, &[feature], tolerance_log10)
            .map_err(|e| Failure(LbStatus::DataError, e.to_string()))?;
        let stump = learn_stump(&data, feature)?;
        *slot = owned_string(stump.to_json()?)?;
        Ok(())
    })
}

/// Explores a design space (JSON, same format as the `explore` command) and
/// returns the ranked results as CSV.
///
/// # Safety
/// Handles must be live; `space_json` NUL-terminated; `out_csv` writable.
/// Free the result with [`lb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn lb_explore(
    lib: *const LbLibrary,
    rules: *const LbRules,
    space_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> LbStatus {
    guard(|| {
        let lib = &lib
            .as_ref()
            .ok_or_else(|| Failure(LbStatus::NullPointer, "lib is NULL".into()))?
            .0;
        let rules = &rules
            .as_ref()
            .ok_or_else(|| Failure(LbStatus::NullPointer, "rules is NULL".into()))?
            .0;
        let slot = out(out_csv, "out_csv")?;
        let space = DesignSpace::from_json(text(space_json, "space_json")?)?;
        *slot = owned_string(results_csv(&explore(&space, lib, rules)?))?;
        Ok(())
    })
}
