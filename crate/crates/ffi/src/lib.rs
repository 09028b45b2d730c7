//! C ABI over the cvqueue closed forms and estimator streams.
//!
//! Configurations and estimator streams are opaque handles created by
//! `cvq_*_new` and released by the matching `cvq_*_free`. Every fallible
//! call returns a [`CvqStatus`] and writes its result through an out
//! pointer; on failure [`cvq_last_error`] describes what went wrong on the
//! calling thread. Absent times in [`CvqObservation`] are NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cvqueue::analytic::{self, NotLastMethod, VdMethod};
use cvqueue::config::SignalDemandConfig;
use cvqueue::error::Error;
use cvqueue::estimators::{EstimatorKind, EstimatorStream};
use cvqueue::model::{CvObservation, Scenario};
use cvqueue::overflow::{self, OverflowKind, OverflowModel, VdApprox};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoConnectedVehicles = 3,
    Divergent = 4,
    InvalidObservation = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqEstimator {
    KnownNoQ = 0,
    KnownWithQ = 1,
    KnownWithQNoSensor = 2,
    Estimator1 = 3,
    Estimator2 = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqOverflow {
    None = 0,
    AkcelikSteady = 1,
    Viti15 = 2,
    Medhi4th = 3,
    HeuristicExp = 4,
    AkcelikCycle = 5,
    VitiCycle = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqNotLast {
    PaperClosedForm = 0,
    ExactIntegral = 1,
    ThinnedIntegral = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqVd {
    Compositional = 0,
    Eq4Closed = 1,
    Eq7Closed = 2,
    Exact = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqVdApprox {
    Eq14 = 0,
    Eq16Sensor = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqScenario {
    NoCv = 0,
    LastIsLastNewArrivals = 1,
    LastNotLastNewArrivals = 2,
    LastIsLastOverflow = 3,
    LastNotLastOverflow = 4,
}

/// One cycle's connected-vehicle observation. Times that do not apply are
/// NaN: `t`/`t_prime` for red arrivals, `tau`/`tau_prime` for overflow-era
/// vehicles on the previous cycle's clock.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvqObservation {
    pub m: u32,
    pub l: u32,
    pub t: f64,
    pub last_is_last: bool,
    pub l_prime: u32,
    pub t_prime: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub last_in_overflow: bool,
    pub sensor: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CvqEstimate {
    pub estimate: f64,
    pub scenario: CvqScenario,
    pub delta: f64,
    pub cond_variance: f64,
}

/// Opaque signal and demand configuration.
pub struct CvqConfig(SignalDemandConfig);

/// Opaque per-approach estimator state.
pub struct CvqStream(EstimatorStream);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CvqStatus {
    match e {
        Error::NoConnectedVehicles { .. } => CvqStatus::NoConnectedVehicles,
        Error::Divergent { .. } => CvqStatus::Divergent,
        Error::InvalidObservation(_) => CvqStatus::InvalidObservation,
        _ => CvqStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Error>>(f: F) -> CvqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvqStatus::Ok,
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            CvqStatus::Panic
        }
    }
}

fn null_error() -> Error {
    Error::InvalidConfig("null pointer".into())
}

unsafe fn config_ref<'a>(cfg: *const CvqConfig) -> Result<&'a SignalDemandConfig, Error> {
    cfg.as_ref().map(|c| &c.0).ok_or_else(null_error)
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Error> {
    if out.is_null() {
        return Err(null_error());
    }
    out.write(value);
    Ok(())
}

fn null_status(any_null: bool) -> Option<CvqStatus> {
    any_null.then(|| {
        set_error("null pointer");
        CvqStatus::NullPointer
    })
}

fn opt(x: f64) -> Option<f64> {
    (!x.is_nan()).then_some(x)
}

fn estimator_kind(e: CvqEstimator) -> EstimatorKind {
    match e {
        CvqEstimator::KnownNoQ => EstimatorKind::KnownNoQ,
        CvqEstimator::KnownWithQ => EstimatorKind::KnownWithQ,
        CvqEstimator::KnownWithQNoSensor => EstimatorKind::KnownWithQNoSensor,
        CvqEstimator::Estimator1 => EstimatorKind::Estimator1,
        CvqEstimator::Estimator2 => EstimatorKind::Estimator2,
    }
}

fn overflow_model(o: CvqOverflow) -> Option<OverflowModel> {
    let kind = match o {
        CvqOverflow::None => return None,
        CvqOverflow::AkcelikSteady => OverflowKind::AkcelikSteady,
        CvqOverflow::Viti15 => OverflowKind::Viti15,
        CvqOverflow::Medhi4th => OverflowKind::Medhi4th,
        CvqOverflow::HeuristicExp => OverflowKind::HeuristicExp,
        CvqOverflow::AkcelikCycle => OverflowKind::AkcelikCycle,
        CvqOverflow::VitiCycle => OverflowKind::VitiCycle,
    };
    Some(OverflowModel::new(kind))
}

fn scenario_code(s: Scenario) -> CvqScenario {
    match s {
        Scenario::NoCv => CvqScenario::NoCv,
        Scenario::LastCvIsLastNewArrivals => CvqScenario::LastIsLastNewArrivals,
        Scenario::LastCvNotLastNewArrivals => CvqScenario::LastNotLastNewArrivals,
        Scenario::LastCvIsLastOverflow => CvqScenario::LastIsLastOverflow,
        Scenario::LastCvNotLastOverflow => CvqScenario::LastNotLastOverflow,
    }
}

/// Message for the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Validates parameters and creates a configuration handle.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn cvq_config_new(
    lambda: f64,
    p: f64,
    red: f64,
    green: f64,
    discharge_headway: f64,
    out: *mut *mut CvqConfig,
) -> CvqStatus {
    if let Some(s) = null_status(out.is_null()) {
        return s;
    }
    guard(|| {
        let cfg = SignalDemandConfig::new(lambda, p, red, green, discharge_headway)?;
        write_out(out, Box::into_raw(Box::new(CvqConfig(cfg))))
    })
}

/// # Safety
/// `cfg` must come from [`cvq_config_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cvq_config_free(cfg: *mut CvqConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Volume-to-capacity ratio `lambda C / X`.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_config_rho(cfg: *const CvqConfig, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| write_out(out, config_ref(cfg)?.rho()))
}

/// Mean last-CV join time, with or without range sensors.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_expected_t(cfg: *const CvqConfig, sensor: bool, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| write_out(out, analytic::expected_t(config_ref(cfg)?, sensor)?))
}

/// Mean last-CV position, with or without range sensors.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_expected_l(cfg: *const CvqConfig, sensor: bool, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| write_out(out, analytic::expected_l(config_ref(cfg)?, sensor)?))
}

/// Probability that the last CV is not the last queued vehicle.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_prob_not_last(cfg: *const CvqConfig, method: CvqNotLast, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    let method = match method {
        CvqNotLast::PaperClosedForm => NotLastMethod::PaperClosedForm,
        CvqNotLast::ExactIntegral => NotLastMethod::ExactIntegral,
        CvqNotLast::ThinnedIntegral => NotLastMethod::ThinnedIntegral,
    };
    guard(|| write_out(out, analytic::prob_not_last(config_ref(cfg)?, method)?))
}

/// Error variance without overflow.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_variance_d(cfg: *const CvqConfig, sensor: bool, method: CvqVd, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    let method = match method {
        CvqVd::Compositional => VdMethod::Compositional,
        CvqVd::Eq4Closed => VdMethod::Eq4Closed,
        CvqVd::Eq7Closed => VdMethod::Eq7Closed,
        CvqVd::Exact => VdMethod::Exact,
    };
    guard(|| write_out(out, analytic::variance_d_no_overflow(config_ref(cfg)?, sensor, method)?))
}

/// Steady-state mean overflow queue. `CVQ_OVERFLOW_NONE` writes 0.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_expected_q(cfg: *const CvqConfig, model: CvqOverflow, out: *mut f64) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| {
        let value = match overflow_model(model) {
            Some(m) => overflow::expected_q(&m, config_ref(cfg)?)?.value,
            None => 0.0,
        };
        write_out(out, value)
    })
}

/// Approximate error variance with an overflow queue.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_approx_variance_d(
    cfg: *const CvqConfig,
    model: CvqOverflow,
    variant: CvqVdApprox,
    out: *mut f64,
) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| {
        let m = overflow_model(model).ok_or_else(|| Error::InvalidConfig("needs an overflow model".into()))?;
        let v = match variant {
            CvqVdApprox::Eq14 => VdApprox::Eq14,
            CvqVdApprox::Eq16Sensor => VdApprox::Eq16Sensor,
        };
        write_out(out, overflow::approx_variance_d(config_ref(cfg)?, &m, v)?)
    })
}

/// Creates an estimator stream. The configuration is copied.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_stream_new(
    cfg: *const CvqConfig,
    estimator: CvqEstimator,
    sensor: bool,
    model: CvqOverflow,
    out: *mut *mut CvqStream,
) -> CvqStatus {
    if let Some(s) = null_status(cfg.is_null() || out.is_null()) {
        return s;
    }
    guard(|| {
        let stream = EstimatorStream::new(estimator_kind(estimator), sensor, *config_ref(cfg)?, overflow_model(model))?;
        write_out(out, Box::into_raw(Box::new(CvqStream(stream))))
    })
}

/// # Safety
/// `stream` must come from [`cvq_stream_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cvq_stream_free(stream: *mut CvqStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// Estimates the queue of cycle `cycle` (1-based) from one observation.
///
/// # Safety
/// `stream` must be a live handle, `obs` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cvq_stream_estimate(
    stream: *mut CvqStream,
    obs: *const CvqObservation,
    cycle: u32,
    out: *mut CvqEstimate,
) -> CvqStatus {
    if let Some(s) = null_status(stream.is_null() || obs.is_null() || out.is_null()) {
        return s;
    }
    guard(|| {
        let o = &*obs;
        let observation = CvObservation {
            m: o.m,
            l: o.l,
            t: opt(o.t),
            last_is_last: o.last_is_last,
            l_prime: o.l_prime,
            t_prime: opt(o.t_prime),
            tau: opt(o.tau),
            tau_prime: opt(o.tau_prime),
            last_in_overflow: o.last_in_overflow,
            sensor: o.sensor,
        };
        let r = (*stream).0.estimate(&observation, cycle)?;
        write_out(
            out,
            CvqEstimate {
                estimate: r.estimate,
                scenario: scenario_code(r.scenario),
                delta: r.delta,
                cond_variance: r.cond_variance,
            },
        )
    })
}
