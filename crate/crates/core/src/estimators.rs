//! Per-cycle queue length estimators.
//!
//! Known-parameter estimators take `(lambda, p)` from the configuration.
//! Unknown-parameter estimators infer them from the current cycle's CVs:
//!
//! * `Estimator1`: `p = m / l`, `lambda = l / R`, giving `l + (l - m)(1 - t/R)`.
//! * `Estimator2`: `p = m t / (m t + (l - m) R)`, `lambda = (l - m)/t + m/R`,
//!   giving `m + R (l - m) / t`.
//!
//! Both extrapolate `theta = (1 - p) lambda` non-CV arrivals over the slack
//! after the last observed join.
//!
//! Overflow-era join times use the previous cycle's clock: `C - tau'` is the
//! time from the follower's join to the start of the current red. A follower
//! that is itself a red arrival at `t'` has `tau' = C + t'`, so the overflow
//! formula reduces to the red-arrival one.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::SignalDemandConfig;
use crate::error::{Error, Result};
use crate::model::{CvObservation, EstimateResult, Scenario};
use crate::overflow::{expected_q_cycle, OverflowKind, OverflowModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// No overflow queue, known parameters.
    KnownNoQ,
    /// Overflow-aware, known parameters, range sensors used.
    KnownWithQ,
    /// Overflow-aware, known parameters, no range sensors.
    KnownWithQNoSensor,
    Estimator1,
    Estimator2,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::KnownNoQ,
        EstimatorKind::KnownWithQ,
        EstimatorKind::KnownWithQNoSensor,
        EstimatorKind::Estimator1,
        EstimatorKind::Estimator2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::KnownNoQ => "known_no_q",
            EstimatorKind::KnownWithQ => "known_with_q",
            EstimatorKind::KnownWithQNoSensor => "known_with_q_no_sensor",
            EstimatorKind::Estimator1 => "estimator1",
            EstimatorKind::Estimator2 => "estimator2",
        }
    }

    pub fn needs_known_params(self) -> bool {
        !matches!(self, EstimatorKind::Estimator1 | EstimatorKind::Estimator2)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                what: "estimator",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    Est1,
    Est2,
    /// Exponentially weighted history of earlier cycles.
    Rolling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamEstimates {
    pub p_hat: f64,
    pub lambda_hat: f64,
    pub source: ParamSource,
    /// `lambda_hat` was cut back to the physical ceiling.
    pub clamped: bool,
}

/// `l + (1 - m/l)(l/R)(R - t)`.
pub fn estimator1_long(l: f64, m: f64, t: f64, red: f64) -> f64 {
    l + (1.0 - m / l) * (l / red) * (red - t)
}

/// `l + (l - m)(1 - t/R)`.
pub fn estimator1_closed(l: f64, m: f64, t: f64, red: f64) -> f64 {
    l + (l - m) * (1.0 - t / red)
}

/// `l + (1 - p2)(lambda2)(R - t)` with the second parameter pair.
pub fn estimator2_long(l: f64, m: f64, t: f64, red: f64) -> f64 {
    let p_hat = m * t / (m * t + (l - m) * red);
    let lambda_hat = (l - m) / t + m / red;
    l + (1.0 - p_hat) * lambda_hat * (red - t)
}

/// `m + R (l - m) / t`.
pub fn estimator2_closed(l: f64, m: f64, t: f64, red: f64) -> f64 {
    m + red * (l - m) / t
}

fn unknown_source(kind: EstimatorKind) -> Result<ParamSource> {
    match kind {
        EstimatorKind::Estimator1 => Ok(ParamSource::Est1),
        EstimatorKind::Estimator2 => Ok(ParamSource::Est2),
        other => Err(Error::InvalidConfig(format!(
            "{other} does not estimate its own parameters"
        ))),
    }
}

/// Per-cycle parameter estimates. `Estimator2` needs the last CV to be a red
/// arrival with `0 < t < R` and falls back to `Estimator1` otherwise.
pub fn param_estimates(obs: &CvObservation, red: f64, kind: EstimatorKind) -> Result<ParamEstimates> {
    let mut source = unknown_source(kind)?;
    if obs.m == 0 {
        return Err(Error::InvalidObservation("no CV to estimate parameters from".into()));
    }
    if obs.l < obs.m {
        return Err(Error::InvalidObservation(format!("l = {} < m = {}", obs.l, obs.m)));
    }
    let (l, m) = (f64::from(obs.l), f64::from(obs.m));
    let usable_t = obs.t.filter(|&t| t > 0.0 && t < red);
    if source == ParamSource::Est2 && usable_t.is_none() {
        log::debug!("estimator2 fallback to estimator1 (t = {:?})", obs.t);
        source = ParamSource::Est1;
    }
    let (p_hat, lambda_hat) = match (source, usable_t) {
        (ParamSource::Est2, Some(t)) => (m * t / (m * t + (l - m) * red), (l - m) / t + m / red),
        _ => (m / l, l / red),
    };
    Ok(ParamEstimates {
        p_hat: p_hat.clamp(0.0, 1.0),
        lambda_hat: lambda_hat.max(0.0),
        source,
        clamped: false,
    })
}

/// Unknown-parameter estimate for a red-arrival last CV without overflow.
pub fn estimate_unknown_params(obs: &CvObservation, red: f64, kind: EstimatorKind) -> Result<EstimateResult> {
    let params = param_estimates(obs, red, kind)?;
    if obs.last_in_overflow {
        return Err(Error::InvalidObservation("last CV belongs to the overflow queue".into()));
    }
    let t = obs.t.ok_or_else(|| Error::InvalidObservation("missing join time".into()))?;
    if !(0.0..red).contains(&t) {
        return Err(Error::InvalidObservation(format!("join time {t} outside [0, {red})")));
    }
    let (l, m) = (f64::from(obs.l), f64::from(obs.m));
    let estimate = match params.source {
        ParamSource::Est2 if obs.l > obs.m => estimator2_long(l, m, t, red),
        _ => estimator1_closed(l, m, t, red),
    };
    let theta = (1.0 - params.p_hat) * params.lambda_hat;
    Ok(EstimateResult {
        estimate,
        scenario: obs.scenario(),
        delta: red - t,
        cond_variance: theta * (red - t),
        theta,
        p_used: params.p_hat,
        lambda_used: params.lambda_hat,
    })
}

/// The shared five-case form. With `sensor` the follower information and the
/// last-vehicle flag are used; without it the three-case form applies.
fn five_case(
    obs: &CvObservation,
    p: f64,
    lambda: f64,
    red: f64,
    cycle: f64,
    e_qi: f64,
    sensor: bool,
) -> Result<EstimateResult> {
    if sensor && !obs.sensor {
        return Err(Error::InvalidObservation(
            "sensor estimator needs an observation with follower information".into(),
        ));
    }
    let theta = (1.0 - p) * lambda;
    let l = f64::from(obs.l);
    let scenario = obs.scenario();
    let (estimate, delta, cond_variance) = match scenario {
        Scenario::NoCv => ((1.0 - p) * (e_qi + theta * red), red, theta * red),
        _ if obs.last_in_overflow => {
            let tau = if !sensor {
                obs.tau
            } else if obs.last_is_last {
                None
            } else {
                Some(obs.tau_prime.ok_or_else(|| {
                    Error::InvalidConfig("overflow scenario without follower join time".into())
                })?)
            };
            match tau {
                None => (l + theta * red, red, theta * red),
                Some(tau) => {
                    let slack = cycle - tau;
                    let bump = if sensor { 1.0 } else { 0.0 };
                    (l + bump + theta * slack + theta * red, slack, theta * (slack + red))
                }
            }
        }
        _ => {
            let t = obs.t.ok_or_else(|| Error::InvalidObservation("missing join time".into()))?;
            if !sensor {
                (l + theta * (red - t), red - t, theta * (red - t))
            } else if obs.last_is_last {
                (l, 0.0, 0.0)
            } else {
                let t_prime = obs.t_prime.ok_or_else(|| {
                    Error::InvalidObservation("follower detected without join time".into())
                })?;
                (l + 1.0 + theta * (red - t_prime), red - t_prime, theta * (red - t_prime))
            }
        }
    };
    Ok(EstimateResult {
        estimate,
        scenario,
        delta,
        cond_variance,
        theta,
        p_used: p,
        lambda_used: lambda,
    })
}

/// Known-parameter estimate without an overflow queue. With no CV in the queue
/// the estimate is the mean non-CV count `theta R`.
pub fn estimate_no_q(obs: &CvObservation, cfg: &SignalDemandConfig, sensor: bool) -> Result<EstimateResult> {
    if obs.last_in_overflow {
        return Err(Error::InvalidObservation(
            "no-overflow estimator given an overflow-era CV".into(),
        ));
    }
    let mut result = five_case(obs, cfg.p(), cfg.lambda(), cfg.red(), cfg.cycle(), 0.0, sensor)?;
    if result.scenario == Scenario::NoCv {
        result.estimate = cfg.theta() * cfg.red();
    }
    Ok(result)
}

/// Known-parameter estimate with the overflow queue mean from `model` at
/// cycle `i`.
pub fn estimate_with_q(
    obs: &CvObservation,
    cfg: &SignalDemandConfig,
    model: &OverflowModel,
    sensor: bool,
    i: u32,
) -> Result<EstimateResult> {
    let e_qi = expected_q_cycle(model, cfg, i)?.value;
    five_case(obs, cfg.p(), cfg.lambda(), cfg.red(), cfg.cycle(), e_qi, sensor)
}

/// Largest volume-to-capacity ratio fed to steady-state overflow formulas
/// when the rate is estimated.
pub const RHO_HAT_CAP: f64 = 0.99;

/// Overflow mean at cycle `i` under an estimated rate. Returns the value and
/// whether any clamp fired.
fn overflow_mean_hat(
    model: Option<&OverflowModel>,
    cfg: &SignalDemandConfig,
    lambda_hat: f64,
    i: u32,
) -> Result<(f64, bool)> {
    let Some(model) = model else {
        return Ok((0.0, false));
    };
    if lambda_hat <= 0.0 {
        return Ok((0.0, false));
    }
    let mut lambda = lambda_hat;
    let mut capped = false;
    let ceiling = RHO_HAT_CAP * cfg.capacity_per_cycle() / cfg.cycle();
    if model.kind != OverflowKind::AkcelikCycle && lambda > ceiling {
        lambda = ceiling;
        capped = true;
    }
    let q = expected_q_cycle(model, &cfg.with_lambda(lambda)?, i)?;
    Ok((q.value, capped || q.clamped))
}

/// Unknown-parameter estimate with an overflow queue: the per-cycle
/// parameter estimates plugged into the five-case form, with the overflow
/// mean evaluated at `rho_hat = lambda_hat C / X`. Only the signal timing of
/// `cfg` is used. `model = None` means no overflow term.
pub fn estimate_unknown_with_q(
    obs: &CvObservation,
    cfg: &SignalDemandConfig,
    kind: EstimatorKind,
    i: u32,
    model: Option<&OverflowModel>,
    sensor: bool,
) -> Result<(EstimateResult, ParamEstimates)> {
    let mut params = param_estimates(obs, cfg.red(), kind)?;
    let ceiling = 2.0 * cfg.capacity_per_cycle() / cfg.cycle();
    if params.lambda_hat > ceiling {
        params.lambda_hat = ceiling;
        params.clamped = true;
    }
    let (e_qi, capped) = overflow_mean_hat(model, cfg, params.lambda_hat, i)?;
    params.clamped |= capped;
    let result = five_case(obs, params.p_hat, params.lambda_hat, cfg.red(), cfg.cycle(), e_qi, sensor)?;
    Ok((result, params))
}

/// Replaces the last CV by its detected follower, so unknown-parameter
/// estimators can run on `(l', t')` instead of `(l, t)`. Observations
/// without a follower are returned with follower information dropped.
pub fn substitute_follower(obs: &CvObservation, cycle: f64) -> CvObservation {
    let mut out = obs.without_sensor();
    if obs.m == 0 || obs.last_is_last || !obs.sensor {
        return out;
    }
    out.l = obs.l_prime;
    out.l_prime = out.l;
    out.last_is_last = true;
    if let Some(t) = obs.t_prime {
        out.t = Some(t);
        out.tau = None;
        out.last_in_overflow = false;
    } else if let Some(tau) = obs.tau_prime {
        if tau >= cycle {
            out.t = Some(tau - cycle);
            out.tau = None;
            out.last_in_overflow = false;
        } else {
            out.tau = Some(tau);
        }
    }
    out
}

/// Counters for clamps and fallbacks over one estimator stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StreamDiagnostics {
    pub cycles: u64,
    pub param_clamps: u64,
    pub estimator2_fallbacks: u64,
    pub history_fallbacks: u64,
    /// Cycles with no CV before any history existed.
    pub cold_starts: u64,
}

/// One approach's estimator state. Unknown-parameter kinds keep an
/// exponentially weighted history of `(p_hat, lambda_hat)` to cover cycles
/// without CVs.
#[derive(Debug, Clone)]
pub struct EstimatorStream {
    kind: EstimatorKind,
    sensor: bool,
    cfg: SignalDemandConfig,
    model: Option<OverflowModel>,
    history: Option<(f64, f64)>,
    diagnostics: StreamDiagnostics,
}

impl EstimatorStream {
    /// Weight on history in the rolling average.
    pub const HISTORY_WEIGHT: f64 = 0.9;

    pub fn new(kind: EstimatorKind, sensor: bool, cfg: SignalDemandConfig, model: Option<OverflowModel>) -> Result<Self> {
        if matches!(kind, EstimatorKind::KnownWithQ | EstimatorKind::KnownWithQNoSensor) && model.is_none() {
            return Err(Error::InvalidConfig(format!("{kind} needs an overflow model")));
        }
        if kind == EstimatorKind::KnownWithQNoSensor && sensor {
            return Err(Error::InvalidConfig(format!("{kind} cannot use range sensors")));
        }
        Ok(EstimatorStream {
            kind,
            sensor,
            cfg,
            model,
            history: None,
            diagnostics: StreamDiagnostics::default(),
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn sensor(&self) -> bool {
        self.sensor
    }

    pub fn diagnostics(&self) -> StreamDiagnostics {
        self.diagnostics
    }

    /// Smoothed `(p, lambda)` history, if any cycle had a CV yet.
    pub fn history(&self) -> Option<(f64, f64)> {
        self.history
    }

    /// Estimates the queue for cycle `i` (1-based) from one observation.
    pub fn estimate(&mut self, obs: &CvObservation, i: u32) -> Result<EstimateResult> {
        self.diagnostics.cycles += 1;
        match self.kind {
            EstimatorKind::KnownNoQ => estimate_no_q(obs, &self.cfg, self.sensor),
            EstimatorKind::KnownWithQ | EstimatorKind::KnownWithQNoSensor => {
                let model = self.model.as_ref().expect("checked at construction");
                estimate_with_q(obs, &self.cfg, model, self.sensor, i)
            }
            EstimatorKind::Estimator1 | EstimatorKind::Estimator2 => self.estimate_unknown(obs, i),
        }
    }

    fn estimate_unknown(&mut self, obs: &CvObservation, i: u32) -> Result<EstimateResult> {
        if obs.m == 0 {
            return self.from_history(obs, i);
        }
        let (result, params) =
            estimate_unknown_with_q(obs, &self.cfg, self.kind, i, self.model.as_ref(), self.sensor)?;
        if params.clamped {
            self.diagnostics.param_clamps += 1;
        }
        if self.kind == EstimatorKind::Estimator2 && params.source == ParamSource::Est1 {
            self.diagnostics.estimator2_fallbacks += 1;
        }
        let w = Self::HISTORY_WEIGHT;
        self.history = Some(match self.history {
            None => (params.p_hat, params.lambda_hat),
            Some((p, lambda)) => (
                w * p + (1.0 - w) * params.p_hat,
                w * lambda + (1.0 - w) * params.lambda_hat,
            ),
        });
        Ok(result)
    }

    fn from_history(&mut self, obs: &CvObservation, i: u32) -> Result<EstimateResult> {
        let red = self.cfg.red();
        let Some((p, lambda)) = self.history else {
            self.diagnostics.cold_starts += 1;
            return Ok(EstimateResult {
                estimate: 0.0,
                scenario: Scenario::NoCv,
                delta: red,
                cond_variance: 0.0,
                theta: 0.0,
                p_used: 0.0,
                lambda_used: 0.0,
            });
        };
        self.diagnostics.history_fallbacks += 1;
        let (e_qi, capped) = overflow_mean_hat(self.model.as_ref(), &self.cfg, lambda, i)?;
        if capped {
            self.diagnostics.param_clamps += 1;
        }
        five_case(obs, p, lambda, red, self.cfg.cycle(), e_qi, self.sensor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn cfg(lambda: f64, p: f64) -> SignalDemandConfig {
        SignalDemandConfig::reference(lambda, p).unwrap()
    }

    #[test]
    fn sensor_estimate_reference_scene() {
        let obs = CvObservation::new_arrival(3, 9, 35.0, Some(38.0));
        let r = estimate_no_q(&obs, &cfg(0.239, 0.3), true).unwrap();
        assert_abs_diff_eq!(r.estimate, 10.0 + 0.7 * 0.239 * 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.estimate, 11.17, epsilon = 5e-3);
        assert_abs_diff_eq!(r.delta, 7.0, epsilon = 1e-12);
        assert_eq!(r.scenario, Scenario::LastCvNotLastNewArrivals);
    }

    #[test]
    fn last_vehicle_and_zero_slack() {
        let c = cfg(0.239, 0.3);
        let last = CvObservation::new_arrival(2, 7, 20.0, None);
        let r = estimate_no_q(&last, &c, true).unwrap();
        assert_eq!((r.estimate, r.cond_variance), (7.0, 0.0));
        let edge = CvObservation::new_arrival(2, 7, 20.0, Some(45.0));
        assert_eq!(estimate_no_q(&edge, &c, true).unwrap().estimate, 8.0);
    }

    #[test]
    fn sensor_off_uses_baseline() {
        let c = cfg(0.239, 0.3);
        let obs = CvObservation::new_arrival(3, 9, 35.0, Some(38.0)).without_sensor();
        let r = estimate_no_q(&obs, &c, false).unwrap();
        assert_abs_diff_eq!(r.estimate, 9.0 + c.theta() * 10.0, epsilon = 1e-12);
        assert!(estimate_no_q(&obs, &c, true).is_err());
    }

    #[test]
    fn no_cv_estimate() {
        let c = cfg(0.239, 0.3);
        let r = estimate_no_q(&CvObservation::no_cv(true), &c, true).unwrap();
        assert_abs_diff_eq!(r.estimate, 0.7 * 0.239 * 45.0, epsilon = 1e-12);
        assert_eq!(r.scenario, Scenario::NoCv);
    }

    #[test]
    fn overflow_cases() {
        let c = cfg(0.218, 0.3);
        let model = OverflowModel::new(OverflowKind::AkcelikSteady);
        let theta = 0.7 * 0.218;
        // NoCv with E(Q) = 1.6 (rho = 0.8 under the reference cycle).
        let rho_08 = SignalDemandConfig::reference_at_rho(0.8, 0.3).unwrap();
        let r = estimate_with_q(&CvObservation::no_cv(true), &rho_08, &model, true, 1).unwrap();
        let th = rho_08.theta();
        assert_abs_diff_eq!(r.estimate, 0.7 * (1.6 + th * 45.0), epsilon = 1e-9);
        let r = five_case(&CvObservation::no_cv(true), 0.3, 0.218, 45.0, 88.2, 1.6, true).unwrap();
        assert_abs_diff_eq!(r.estimate, 5.93, epsilon = 5e-3);
        // Red arrival, last.
        let last = CvObservation::new_arrival(4, 12, 30.0, None);
        assert_eq!(estimate_with_q(&last, &c, &model, true, 1).unwrap().estimate, 12.0);
        // Overflow, not last, follower joined 10 s before the boundary.
        let ov = CvObservation::overflow(1, 2, c.cycle() - 15.0, Some(c.cycle() - 10.0));
        let r = estimate_with_q(&ov, &c, &model, true, 1).unwrap();
        assert_abs_diff_eq!(r.estimate, 3.0 + theta * 10.0 + theta * 45.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.estimate, 11.39, epsilon = 5e-3);
        assert_abs_diff_eq!(r.delta, 10.0, epsilon = 1e-9);
        // Overflow, last.
        let ovl = CvObservation::overflow(1, 2, 80.0, None);
        let r = estimate_with_q(&ovl, &c, &model, true, 1).unwrap();
        assert_abs_diff_eq!(r.estimate, 2.0 + theta * 45.0, epsilon = 1e-12);
        // Without sensor the last CV's own time is used.
        let r = estimate_with_q(&ov.without_sensor(), &c, &model, false, 1).unwrap();
        assert_abs_diff_eq!(r.estimate, 2.0 + theta * 15.0 + theta * 45.0, epsilon = 1e-12);
    }

    #[test]
    fn overflow_follower_in_red_matches_red_formula() {
        let c = cfg(0.218, 0.3);
        let model = OverflowModel::new(OverflowKind::AkcelikSteady);
        let ov = CvObservation::overflow(1, 2, 80.0, Some(c.cycle() + 12.0));
        let r = estimate_with_q(&ov, &c, &model, true, 1).unwrap();
        let expect = 3.0 + c.theta() * (-12.0) + c.theta() * 45.0;
        assert_abs_diff_eq!(r.estimate, expect, epsilon = 1e-9);
        let mut missing = ov;
        missing.tau_prime = None;
        assert!(matches!(
            estimate_with_q(&missing, &c, &model, true, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unknown_parameter_examples() {
        let obs = CvObservation::new_arrival(3, 9, 35.0, Some(38.0)).without_sensor();
        let e1 = estimate_unknown_params(&obs, 45.0, EstimatorKind::Estimator1).unwrap();
        assert_abs_diff_eq!(e1.estimate, 9.0 + 6.0 * 10.0 / 45.0, epsilon = 1e-12);
        let e2 = estimate_unknown_params(&obs, 45.0, EstimatorKind::Estimator2).unwrap();
        assert_abs_diff_eq!(e2.estimate, 3.0 + 45.0 * 6.0 / 35.0, epsilon = 1e-12);
        let all_cv = CvObservation::new_arrival(5, 5, 12.0, None);
        for kind in [EstimatorKind::Estimator1, EstimatorKind::Estimator2] {
            assert_eq!(estimate_unknown_params(&all_cv, 45.0, kind).unwrap().estimate, 5.0);
        }
        assert!(estimate_unknown_params(&CvObservation::no_cv(false), 45.0, EstimatorKind::Estimator1).is_err());
        assert!(estimate_unknown_params(&obs, 45.0, EstimatorKind::KnownNoQ).is_err());
    }

    #[test]
    fn estimator2_falls_back_at_time_zero() {
        let obs = CvObservation::new_arrival(1, 4, 0.0, None);
        let p = param_estimates(&obs, 45.0, EstimatorKind::Estimator2).unwrap();
        assert_eq!(p.source, ParamSource::Est1);
        let r = estimate_unknown_params(&obs, 45.0, EstimatorKind::Estimator2).unwrap();
        assert_abs_diff_eq!(r.estimate, estimator1_closed(4.0, 1.0, 0.0, 45.0), epsilon = 1e-12);
    }

    #[test]
    fn unknown_with_full_penetration_returns_l() {
        let c = cfg(0.239, 0.3);
        let obs = CvObservation::new_arrival(6, 6, 40.0, None);
        let model = OverflowModel::new(OverflowKind::VitiCycle);
        for kind in [EstimatorKind::Estimator1, EstimatorKind::Estimator2] {
            let (r, p) = estimate_unknown_with_q(&obs, &c, kind, 50, Some(&model), true).unwrap();
            assert_eq!(p.p_hat, 1.0);
            assert_eq!(r.estimate, 6.0);
        }
    }

    #[test]
    fn unknown_with_q_below_onset_reduces_to_no_q() {
        let c = cfg(0.239, 0.3);
        let obs = CvObservation::new_arrival(3, 9, 35.0, None).without_sensor();
        let model = OverflowModel::new(OverflowKind::VitiCycle);
        // lambda_hat = 9/45 = 0.2 -> rho_hat = 0.735 > rho_o, pick a lighter scene.
        let light = CvObservation::new_arrival(3, 6, 35.0, None).without_sensor();
        let (r, _) = estimate_unknown_with_q(&light, &c, EstimatorKind::Estimator1, 500, Some(&model), false).unwrap();
        let plain = estimate_unknown_params(&light, 45.0, EstimatorKind::Estimator1).unwrap();
        assert_abs_diff_eq!(r.estimate, plain.estimate, epsilon = 1e-12);
        let (r, _) = estimate_unknown_with_q(&obs, &c, EstimatorKind::Estimator1, 500, None, false).unwrap();
        let plain = estimate_unknown_params(&obs, 45.0, EstimatorKind::Estimator1).unwrap();
        assert_abs_diff_eq!(r.estimate, plain.estimate, epsilon = 1e-12);
    }

    #[test]
    fn lambda_hat_is_clamped() {
        let c = cfg(0.239, 0.3);
        // Estimator2 with a tiny t gives a huge rate.
        let obs = CvObservation::new_arrival(1, 20, 0.01, None).without_sensor();
        let (_, p) = estimate_unknown_with_q(&obs, &c, EstimatorKind::Estimator2, 1, None, false).unwrap();
        assert!(p.clamped);
        assert_abs_diff_eq!(p.lambda_hat, 48.0 / 88.2, epsilon = 1e-12);
    }

    #[test]
    fn stream_uses_history_without_cvs() {
        let c = cfg(0.239, 0.3);
        let mut s = EstimatorStream::new(EstimatorKind::Estimator1, false, c, None).unwrap();
        let cold = s.estimate(&CvObservation::no_cv(false), 1).unwrap();
        assert_eq!(cold.estimate, 0.0);
        let obs = CvObservation::new_arrival(3, 9, 35.0, None).without_sensor();
        s.estimate(&obs, 2).unwrap();
        let (p, lambda) = s.history().unwrap();
        assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lambda, 0.2, epsilon = 1e-12);
        let r = s.estimate(&CvObservation::no_cv(false), 3).unwrap();
        assert_abs_diff_eq!(r.estimate, (2.0 / 3.0) * (2.0 / 3.0) * 0.2 * 45.0, epsilon = 1e-12);
        let obs2 = CvObservation::new_arrival(1, 1, 10.0, None).without_sensor();
        s.estimate(&obs2, 4).unwrap();
        let (p, _) = s.history().unwrap();
        assert_abs_diff_eq!(p, 0.9 / 3.0 + 0.1, epsilon = 1e-12);
        let d = s.diagnostics();
        assert_eq!((d.cycles, d.cold_starts, d.history_fallbacks), (4, 1, 1));
    }

    #[test]
    fn stream_validates_kind() {
        let c = cfg(0.239, 0.3);
        assert!(EstimatorStream::new(EstimatorKind::KnownWithQ, true, c, None).is_err());
        let m = Some(OverflowModel::new(OverflowKind::AkcelikSteady));
        assert!(EstimatorStream::new(EstimatorKind::KnownWithQNoSensor, true, c, m).is_err());
    }

    #[test]
    fn follower_substitution() {
        let obs = CvObservation::new_arrival(3, 9, 35.0, Some(38.0));
        let s = substitute_follower(&obs, 88.2);
        assert_eq!((s.l, s.t, s.m), (10, Some(38.0), 3));
        let ov = CvObservation::overflow(1, 2, 80.0, Some(88.2 + 4.0));
        let s = substitute_follower(&ov, 88.2);
        assert!(!s.last_in_overflow);
        assert_abs_diff_eq!(s.t.unwrap(), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.to_string().parse::<EstimatorKind>().unwrap(), k);
        }
    }

    fn valid_triple() -> impl Strategy<Value = (u32, u32, f64)> {
        (1u32..60).prop_flat_map(|l| (Just(l), 1..=l, 1e-3f64..45.0))
    }

    proptest! {
        #[test]
        fn estimator2_forms_agree((l, m, t) in valid_triple()) {
            let (l, m) = (f64::from(l), f64::from(m));
            let long = estimator2_long(l, m, t, 45.0);
            let closed = estimator2_closed(l, m, t, 45.0);
            prop_assert!((long - closed).abs() <= 1e-12 * closed.abs());
        }

        #[test]
        fn estimator1_forms_agree((l, m, t) in valid_triple()) {
            let (l, m) = (f64::from(l), f64::from(m));
            assert_relative_eq!(estimator1_long(l, m, t, 45.0), estimator1_closed(l, m, t, 45.0), max_relative = 1e-12);
        }

        #[test]
        fn estimates_never_below_l(
            (l, m, t) in valid_triple(),
            follower in proptest::option::of(0.0f64..45.0),
            p in 0.0f64..=1.0,
            lambda in 0.01f64..0.5,
        ) {
            let follower = follower.map(|f| f.max(t));
            let obs = CvObservation::new_arrival(m, l, t, follower);
            let c = SignalDemandConfig::reference(lambda, p).unwrap();
            for sensor in [true, false] {
                let o = if sensor { obs } else { obs.without_sensor() };
                let r = estimate_no_q(&o, &c, sensor).unwrap();
                prop_assert!(r.estimate >= f64::from(l));
            }
            for kind in [EstimatorKind::Estimator1, EstimatorKind::Estimator2] {
                let r = estimate_unknown_params(&obs.without_sensor(), 45.0, kind).unwrap();
                prop_assert!(r.estimate >= f64::from(l) - 1e-9);
            }
        }
    }
}
