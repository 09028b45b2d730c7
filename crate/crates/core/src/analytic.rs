//! Closed-form moments and error variances for the case without an overflow
//! queue, with and without range sensors.
//!
//! Conventions: `E(T)`, `E(L)` and friends are the printed closed forms. The
//! simulator shows they equal expectations taken over *all* cycles with the
//! observation zero-filled when no CV is present (`T = 0`, `L = 0`), not the
//! expectation conditional on `m > 0`; see the `oracle` module.

use serde::Serialize;

use crate::config::SignalDemandConfig;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_default, QuadResult};

fn require_cvs(cfg: &SignalDemandConfig) -> Result<()> {
    if cfg.p() > 0.0 {
        Ok(())
    } else {
        Err(Error::NoConnectedVehicles {
            p: cfg.p(),
            lambda: cfg.lambda(),
        })
    }
}

/// `1 - exp(-lambda p R)`: probability that at least one CV is queued.
pub fn prob_some_cv(cfg: &SignalDemandConfig) -> f64 {
    -(-cfg.lambda() * cfg.p() * cfg.red()).exp_m1()
}

/// Density of the last CV's join time given at least one CV,
/// `lambda p exp(-p lambda (R - t)) / (1 - exp(-lambda p R))` on `[0, R)`.
pub fn density_t(t: f64, cfg: &SignalDemandConfig) -> Result<f64> {
    require_cvs(cfg)?;
    if !(0.0..cfg.red()).contains(&t) {
        return Ok(0.0);
    }
    let rate = cfg.lambda() * cfg.p();
    Ok(rate * (-rate * (cfg.red() - t)).exp() / prob_some_cv(cfg))
}

/// Expected last-CV position: `lambda R - (1 - e^{-lambda p R}) / p` without a
/// sensor, and the same with denominator `p + (1 - p)` with one.
pub fn expected_l(cfg: &SignalDemandConfig, sensor: bool) -> Result<f64> {
    let denom = if sensor {
        cfg.p() + (1.0 - cfg.p())
    } else {
        require_cvs(cfg)?;
        cfg.p()
    };
    Ok(cfg.red_load() - prob_some_cv(cfg) / denom)
}

/// Expected last-CV join time: `R - (1 - e^{-lambda p R}) / (lambda p)`,
/// minus a further `(1 - p) / lambda` with a sensor.
pub fn expected_t(cfg: &SignalDemandConfig, sensor: bool) -> Result<f64> {
    require_cvs(cfg)?;
    let base = prob_some_cv(cfg) / (cfg.lambda() * cfg.p());
    let extra = if sensor {
        (1.0 - cfg.p()) / cfg.lambda()
    } else {
        0.0
    };
    Ok(cfg.red() - (base + extra))
}

/// How `P(L != lv)` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NotLastMethod {
    /// `1 - p (1 - e^{-(1+p) lambda R}) / (1 + p)` as printed.
    PaperClosedForm,
    /// `E[1 - e^{-lambda (R - T)}]` under the density of `T`, by quadrature.
    ExactIntegral,
    /// `E[1 - e^{-theta (R - T)}]` under the density of `T`, by quadrature.
    /// Only non-CVs can arrive after the last CV, so the no-arrival gap uses
    /// the non-CV rate.
    ThinnedIntegral,
}

impl NotLastMethod {
    pub const ALL: [NotLastMethod; 3] = [
        NotLastMethod::PaperClosedForm,
        NotLastMethod::ExactIntegral,
        NotLastMethod::ThinnedIntegral,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NotLastMethod::PaperClosedForm => "paper_closed_form",
            NotLastMethod::ExactIntegral => "exact_integral",
            NotLastMethod::ThinnedIntegral => "thinned_integral",
        }
    }
}

/// Integrates `g(t) f(t)` over `[0, R)`.
pub fn expect_under_density<G: Fn(f64) -> f64>(cfg: &SignalDemandConfig, g: G) -> Result<QuadResult> {
    require_cvs(cfg)?;
    let rate = cfg.lambda() * cfg.p();
    let norm = prob_some_cv(cfg);
    let red = cfg.red();
    Ok(integrate_default(
        |t| g(t) * rate * (-rate * (red - t)).exp() / norm,
        0.0,
        red,
    ))
}

/// Probability that the last CV is not the last queued vehicle.
pub fn prob_not_last(cfg: &SignalDemandConfig, method: NotLastMethod) -> Result<f64> {
    require_cvs(cfg)?;
    let (p, red) = (cfg.p(), cfg.red());
    match method {
        NotLastMethod::PaperClosedForm => {
            let decay = (-(1.0 + p) * cfg.red_load()).exp();
            Ok(1.0 - p * (1.0 - decay) / (1.0 + p))
        }
        NotLastMethod::ExactIntegral => {
            let lambda = cfg.lambda();
            Ok(expect_under_density(cfg, |t| -(-lambda * (red - t)).exp_m1())?.value)
        }
        NotLastMethod::ThinnedIntegral => {
            let theta = cfg.theta();
            Ok(expect_under_density(cfg, |t| -(-theta * (red - t)).exp_m1())?.value)
        }
    }
}

/// Closed forms for the steady-state error variance `V(D)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VdMethod {
    /// `theta [R - E(T')] P(L != lv)` from the printed `E(T')` and the
    /// exact-integral `P(L != lv)`. Without a sensor: `theta [R - E(T)]`.
    Compositional,
    /// `p (1 - e^{-p lambda R (1+p)}) / (1 + p)` as printed.
    Eq4Closed,
    /// `(1-p) [(1 - e^{-p lambda R}) / p - (1 - p)] P(L != lv)` as printed,
    /// with the printed closed-form `P(L != lv)`.
    Eq7Closed,
    /// Exact variance of the known-parameter estimator over all cycles
    /// (no-CV cycles estimated by `theta R`), from the thinned Poisson
    /// construction: with sensor
    /// `(1-p)(1-e^{-p lambda R})/p - (1-e^{-p lambda R}) + p (1-e^{-lambda R})`.
    Exact,
}

impl VdMethod {
    pub const ALL: [VdMethod; 4] = [
        VdMethod::Compositional,
        VdMethod::Eq4Closed,
        VdMethod::Eq7Closed,
        VdMethod::Exact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VdMethod::Compositional => "compositional",
            VdMethod::Eq4Closed => "eq4_closed",
            VdMethod::Eq7Closed => "eq7_closed",
            VdMethod::Exact => "exact",
        }
    }
}

/// Error variance without a range sensor, `(1-p)(1-e^{-p lambda R})/p`.
pub fn no_sensor_baseline(cfg: &SignalDemandConfig) -> Result<f64> {
    require_cvs(cfg)?;
    Ok((1.0 - cfg.p()) * prob_some_cv(cfg) / cfg.p())
}

/// Steady-state `V(D)` without overflow. With `sensor = false` every method
/// returns its no-sensor form, which is the baseline for all but
/// `Compositional` (where it is `theta [R - E(T)]`, the same value).
pub fn variance_d_no_overflow(cfg: &SignalDemandConfig, sensor: bool, method: VdMethod) -> Result<f64> {
    require_cvs(cfg)?;
    if !sensor {
        return match method {
            VdMethod::Compositional => Ok(cfg.theta() * (cfg.red() - expected_t(cfg, false)?)),
            _ => no_sensor_baseline(cfg),
        };
    }
    let p = cfg.p();
    match method {
        VdMethod::Compositional => {
            let slack = cfg.red() - expected_t(cfg, true)?;
            Ok(cfg.theta() * slack * prob_not_last(cfg, NotLastMethod::ExactIntegral)?)
        }
        VdMethod::Eq4Closed => {
            Ok(p * (1.0 - (-p * cfg.red_load() * (1.0 + p)).exp()) / (1.0 + p))
        }
        VdMethod::Eq7Closed => {
            let bracket = prob_some_cv(cfg) / p - (1.0 - p);
            Ok((1.0 - p) * bracket * prob_not_last(cfg, NotLastMethod::PaperClosedForm)?)
        }
        VdMethod::Exact => {
            let some_cv = prob_some_cv(cfg);
            let any_arrival = -(-cfg.red_load()).exp_m1();
            Ok((1.0 - p) * some_cv / p - some_cv + p * any_arrival)
        }
    }
}

/// Summary of the no-overflow closed forms at one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoOverflowMoments {
    pub e_l: f64,
    pub e_l_prime: f64,
    pub e_t: f64,
    pub e_t_prime: f64,
    pub p_not_last: f64,
    /// No-sensor baseline.
    pub v_d: f64,
    /// Compositional form with sensor.
    pub v_d_sensor: f64,
}

impl NoOverflowMoments {
    pub fn compute(cfg: &SignalDemandConfig) -> Result<Self> {
        Ok(NoOverflowMoments {
            e_l: expected_l(cfg, false)?,
            e_l_prime: expected_l(cfg, true)?,
            e_t: expected_t(cfg, false)?,
            e_t_prime: expected_t(cfg, true)?,
            p_not_last: prob_not_last(cfg, NotLastMethod::ExactIntegral)?,
            v_d: no_sensor_baseline(cfg)?,
            v_d_sensor: variance_d_no_overflow(cfg, true, VdMethod::Compositional)?,
        })
    }
}

/// One point of the sensor-improvement curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub p: f64,
    pub lambda: f64,
    /// Mean queue `lambda R`.
    pub e_n: f64,
    pub v_d_off: f64,
    pub v_d_on: f64,
    /// `100 (V_off - V_on) / E(N)`, percentage points of the variance-to-mean ratio.
    pub pct_delta_vmr: f64,
    /// `100 (sqrt V_off - sqrt V_on) / E(N)`, percentage points of the coefficient of variation.
    pub pct_delta_cov: f64,
    /// `sqrt V_off - sqrt V_on`, vehicles per cycle.
    pub delta_sqrt_vd: f64,
}

impl ImprovementRow {
    pub fn from_variances(p: f64, lambda: f64, e_n: f64, v_d_off: f64, v_d_on: f64) -> Self {
        let delta_sqrt_vd = v_d_off.sqrt() - v_d_on.sqrt();
        ImprovementRow {
            p,
            lambda,
            e_n,
            v_d_off,
            v_d_on,
            pct_delta_vmr: 100.0 * (v_d_off - v_d_on) / e_n,
            pct_delta_cov: 100.0 * delta_sqrt_vd / e_n,
            delta_sqrt_vd,
        }
    }
}

/// Sensor-off vs sensor-on error measures across a grid of configurations.
/// The sensor-off side is always the no-sensor baseline; `sensor_form`
/// selects the closed form used for the sensor-on side.
pub fn improvement_curves(grid: &[SignalDemandConfig], sensor_form: VdMethod) -> Result<Vec<ImprovementRow>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter()
        .map(|cfg| {
            Ok(ImprovementRow::from_variances(
                cfg.p(),
                cfg.lambda(),
                cfg.red_load(),
                no_sensor_baseline(cfg)?,
                variance_d_no_overflow(cfg, true, sensor_form)?,
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{REFERENCE_LAMBDAS, REFERENCE_P_GRID};
    use approx::assert_abs_diff_eq;

    fn cfg(lambda: f64, p: f64) -> SignalDemandConfig {
        SignalDemandConfig::reference(lambda, p).unwrap()
    }

    #[test]
    fn density_normalises_and_matches_endpoint() {
        let c = cfg(0.239, 0.5);
        let mass = expect_under_density(&c, |_| 1.0).unwrap();
        assert_abs_diff_eq!(mass.value, 1.0, epsilon = 1e-9);
        // f(R-) = lambda p / (1 - e^{-lambda p R})
        let end = density_t(45.0 - 1e-12, &c).unwrap();
        assert_abs_diff_eq!(end, 0.1195 / 0.995_380, epsilon = 2e-6);
        assert_eq!(density_t(50.0, &c).unwrap(), 0.0);
        assert!(density_t(10.0, &cfg(0.239, 0.0)).is_err());
    }

    #[test]
    fn density_normalises_over_the_grid() {
        for &lambda in &REFERENCE_LAMBDAS {
            for &p in &REFERENCE_P_GRID {
                let mass = expect_under_density(&cfg(lambda, p), |_| 1.0).unwrap();
                assert!((mass.value - 1.0).abs() < 1e-9, "{lambda} {p}: {}", mass.value);
            }
        }
    }

    #[test]
    fn expected_l_values() {
        let c = cfg(0.239, 0.5);
        assert_abs_diff_eq!(expected_l(&c, false).unwrap(), 10.755 - 0.995_380 / 0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(expected_l(&c, true).unwrap(), 10.755 - 0.995_380, epsilon = 1e-5);
        assert!(expected_l(&cfg(0.239, 0.0), false).is_err());
        // At p = 1 the two variants coincide.
        let full = cfg(0.239, 1.0);
        assert_abs_diff_eq!(
            expected_l(&full, false).unwrap(),
            expected_l(&full, true).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_t_values() {
        let c = cfg(0.239, 0.5);
        let et = expected_t(&c, false).unwrap();
        assert_abs_diff_eq!(et, 45.0 - 0.995_380 / 0.1195, epsilon = 1e-4);
        assert_abs_diff_eq!(expected_t(&c, true).unwrap(), et - 0.5 / 0.239, epsilon = 1e-9);
        let full = cfg(0.239, 1.0);
        let limit = 45.0 - (1.0 - (-0.239f64 * 45.0).exp()) / 0.239;
        assert_abs_diff_eq!(expected_t(&full, false).unwrap(), limit, epsilon = 1e-12);
        assert_abs_diff_eq!(expected_t(&full, true).unwrap(), limit, epsilon = 1e-12);
    }

    #[test]
    fn expected_t_is_zero_filled_mean_of_density() {
        // The printed E(T) equals P(m > 0) times the mean of f(t), i.e. the
        // mean over all cycles with T = 0 when no CV is queued.
        for &(lambda, p) in &[(0.239, 0.5), (0.111, 0.05), (0.267, 0.9)] {
            let c = cfg(lambda, p);
            let mean_f = expect_under_density(&c, |t| t).unwrap().value;
            assert_abs_diff_eq!(
                prob_some_cv(&c) * mean_f,
                expected_t(&c, false).unwrap(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn prob_not_last_limits() {
        let full = cfg(0.239, 1.0);
        let expect = 1.0 - (1.0 - (-2.0 * 0.239f64 * 45.0).exp()) / 2.0;
        assert_abs_diff_eq!(
            prob_not_last(&full, NotLastMethod::PaperClosedForm).unwrap(),
            expect,
            epsilon = 1e-12
        );
        // Tiny load: nothing can queue behind the last CV, but the printed
        // form tends to 1 instead.
        let tiny = SignalDemandConfig::new(1e-6, 0.5, 1.0, 1.0, 1.0).unwrap();
        for m in [NotLastMethod::ExactIntegral, NotLastMethod::ThinnedIntegral] {
            assert!(prob_not_last(&tiny, m).unwrap() < 1e-5, "{m:?}");
        }
        let printed = prob_not_last(&tiny, NotLastMethod::PaperClosedForm).unwrap();
        assert_abs_diff_eq!(printed, 1.0, epsilon = 1e-5);
        // Thinned gap at p = 1: a CV can never be followed by a non-CV.
        assert_abs_diff_eq!(
            prob_not_last(&full, NotLastMethod::ThinnedIntegral).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn exact_integral_has_closed_form() {
        // E[1 - e^{-lambda (R - T)}] = 1 - p (1 - e^{-(1+p) lambda R}) / ((1+p)(1 - e^{-p lambda R}))
        let c = cfg(0.133, 0.1);
        let p = 0.1;
        let closed = 1.0
            - p * (1.0 - (-(1.0 + p) * c.red_load()).exp()) / ((1.0 + p) * prob_some_cv(&c));
        assert_abs_diff_eq!(
            prob_not_last(&c, NotLastMethod::ExactIntegral).unwrap(),
            closed,
            epsilon = 1e-10
        );
    }

    #[test]
    fn every_variance_vanishes_at_full_penetration_except_eq4() {
        let full = cfg(0.2, 1.0);
        for m in [VdMethod::Compositional, VdMethod::Eq7Closed, VdMethod::Exact] {
            assert_abs_diff_eq!(variance_d_no_overflow(&full, true, m).unwrap(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(variance_d_no_overflow(&full, false, m).unwrap(), 0.0, epsilon = 1e-15);
        }
        // The printed closed form keeps (1 - e^{-2 lambda R}) / 2 at p = 1.
        let eq4 = variance_d_no_overflow(&full, true, VdMethod::Eq4Closed).unwrap();
        assert_abs_diff_eq!(eq4, (1.0 - (-18.0f64).exp()) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn printed_closed_forms_disagree() {
        let c = cfg(0.133, 0.1);
        let eq4 = variance_d_no_overflow(&c, true, VdMethod::Eq4Closed).unwrap();
        let eq7 = variance_d_no_overflow(&c, true, VdMethod::Eq7Closed).unwrap();
        log::info!("eq4 = {eq4}, eq7 = {eq7}");
        assert!((eq4 - eq7).abs() > 1.0);
    }

    #[test]
    fn baseline_decreases_in_p() {
        for &lambda in &REFERENCE_LAMBDAS {
            let mut prev = f64::INFINITY;
            for k in 1..100 {
                let v = no_sensor_baseline(&cfg(lambda, k as f64 / 100.0)).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn sensor_forms_dominate_baseline_on_grid() {
        for &lambda in &REFERENCE_LAMBDAS {
            for &p in &REFERENCE_P_GRID {
                let c = cfg(lambda, p);
                let base = no_sensor_baseline(&c).unwrap();
                for m in [VdMethod::Compositional, VdMethod::Exact] {
                    let v = variance_d_no_overflow(&c, true, m).unwrap();
                    assert!(v <= base, "{m:?} at ({lambda}, {p}): {v} > {base}");
                }
            }
        }
    }

    #[test]
    fn moments_invariants() {
        for &lambda in &REFERENCE_LAMBDAS {
            for &p in &REFERENCE_P_GRID {
                let m = NoOverflowMoments::compute(&cfg(lambda, p)).unwrap();
                assert!((0.0..=1.0).contains(&m.p_not_last));
                assert!(m.e_t <= 45.0 && m.e_t_prime <= m.e_t);
                assert!(m.e_l_prime >= m.e_l);
            }
        }
    }

    #[test]
    fn improvement_row_definitions() {
        let row = ImprovementRow::from_variances(0.1, 0.133, 5.985, 4.0, 3.0);
        assert_abs_diff_eq!(row.pct_delta_vmr, 100.0 / 5.985, epsilon = 1e-12);
        assert_abs_diff_eq!(row.delta_sqrt_vd, 2.0 - 3f64.sqrt(), epsilon = 1e-12);
        assert!(improvement_curves(&[], VdMethod::Eq7Closed).is_err());
    }
}
