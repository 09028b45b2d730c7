//! Overflow-queue moments and the approximate mean and error variance of the
//! total queue when an overflow queue is present.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::analytic::{expected_l, expected_t, prob_not_last, prob_some_cv, NotLastMethod};
use crate::config::SignalDemandConfig;
use crate::error::{Error, Result};

/// Mean overflow queue formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowKind {
    /// `rho^2 / (2 (1 - rho))`.
    AkcelikSteady,
    /// `1.5 (rho - rho_o) / (1 - rho)`.
    Viti15,
    /// `(2 rho - 1) rho^4 / (2 (1 - rho))`.
    Medhi4th,
    /// `rho / (2 (1 - rho)) exp(-[((1 - rho) sqrt(R/2) - R (1 - rho)^2) / 4])`.
    HeuristicExp,
    /// Time-dependent cycle-indexed form.
    AkcelikCycle,
    /// `E(Q) (1 - e^{-beta i})` with the `Viti15` steady state.
    VitiCycle,
}

impl OverflowKind {
    pub const ALL: [OverflowKind; 6] = [
        OverflowKind::AkcelikSteady,
        OverflowKind::Viti15,
        OverflowKind::Medhi4th,
        OverflowKind::HeuristicExp,
        OverflowKind::AkcelikCycle,
        OverflowKind::VitiCycle,
    ];

    pub const STEADY: [OverflowKind; 4] = [
        OverflowKind::AkcelikSteady,
        OverflowKind::Viti15,
        OverflowKind::Medhi4th,
        OverflowKind::HeuristicExp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OverflowKind::AkcelikSteady => "akcelik_steady",
            OverflowKind::Viti15 => "viti15",
            OverflowKind::Medhi4th => "medhi4th",
            OverflowKind::HeuristicExp => "heuristic_exp",
            OverflowKind::AkcelikCycle => "akcelik_cycle",
            OverflowKind::VitiCycle => "viti_cycle",
        }
    }

    pub fn is_cycle_indexed(self) -> bool {
        matches!(self, OverflowKind::AkcelikCycle | OverflowKind::VitiCycle)
    }
}

impl fmt::Display for OverflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OverflowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OverflowKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                what: "overflow model",
                name: s.to_string(),
            })
    }
}

/// Which rendering of the cycle-indexed Akcelik formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AkcelikForm {
    /// `(X i (rho - 1) / 4) sqrt((rho - 1)^2 + 12 (rho - rho_o) / (X i))`.
    /// Non-positive whenever `rho < 1`, so it clamps to zero there.
    Printed,
    /// `(X i / 4) [(rho - 1) + sqrt((rho - 1)^2 + 12 (rho - rho_o) / (X i))]`,
    /// which tends to the `Viti15` steady state as `i` grows.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverflowModel {
    pub kind: OverflowKind,
    /// Per-cycle convergence rate for `VitiCycle`.
    pub beta: f64,
    pub akcelik_form: AkcelikForm,
}

impl OverflowModel {
    pub const DEFAULT_BETA: f64 = 0.1;

    pub fn new(kind: OverflowKind) -> Self {
        OverflowModel {
            kind,
            beta: Self::DEFAULT_BETA,
            akcelik_form: AkcelikForm::Printed,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_akcelik_form(mut self, form: AkcelikForm) -> Self {
        self.akcelik_form = form;
        self
    }
}

/// A formula value after clamping negative or complex intermediates to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

impl Clamped {
    fn floor_zero(raw: f64) -> Self {
        if raw < 0.0 || raw.is_nan() {
            Clamped { value: 0.0, clamped: true }
        } else {
            Clamped { value: raw, clamped: false }
        }
    }
}

fn require_stable(cfg: &SignalDemandConfig) -> Result<f64> {
    let rho = cfg.rho();
    if rho < 1.0 {
        Ok(rho)
    } else {
        Err(Error::Divergent { rho })
    }
}

fn viti_steady(rho: f64, rho_o: f64) -> Clamped {
    Clamped::floor_zero(1.5 * (rho - rho_o) / (1.0 - rho))
}

/// Steady-state mean overflow queue. Cycle-indexed kinds return their
/// `i -> infinity` limit, the `Viti15` value.
pub fn expected_q(model: &OverflowModel, cfg: &SignalDemandConfig) -> Result<Clamped> {
    let rho = require_stable(cfg)?;
    let slack = 1.0 - rho;
    Ok(match model.kind {
        OverflowKind::AkcelikSteady => Clamped::floor_zero(rho * rho / (2.0 * slack)),
        OverflowKind::Viti15 | OverflowKind::AkcelikCycle | OverflowKind::VitiCycle => {
            viti_steady(rho, cfg.rho_o())
        }
        OverflowKind::Medhi4th => {
            Clamped::floor_zero((2.0 * rho - 1.0) * rho.powi(4) / (2.0 * slack))
        }
        OverflowKind::HeuristicExp => {
            let red = cfg.red();
            let exponent = (slack * (red / 2.0).sqrt() - red * slack * slack) / 4.0;
            Clamped::floor_zero(rho / (2.0 * slack) * (-exponent).exp())
        }
    })
}

/// Steady-state overflow variance `[4 (1-rho) rho^3 + 3 rho^4] / (12 (1-rho)^2)`.
pub fn variance_q(cfg: &SignalDemandConfig) -> Result<f64> {
    let rho = require_stable(cfg)?;
    let slack = 1.0 - rho;
    Ok((4.0 * slack * rho.powi(3) + 3.0 * rho.powi(4)) / (12.0 * slack * slack))
}

/// Mean overflow queue at cycle `i` (1-based). Steady kinds ignore `i`.
pub fn expected_q_cycle(model: &OverflowModel, cfg: &SignalDemandConfig, i: u32) -> Result<Clamped> {
    if i == 0 {
        return Err(Error::InvalidConfig("cycle index starts at 1".into()));
    }
    match model.kind {
        OverflowKind::AkcelikCycle => {
            let rho = cfg.rho();
            let xi = cfg.capacity_per_cycle() * f64::from(i);
            let radicand = (rho - 1.0).powi(2) + 12.0 * (rho - cfg.rho_o()) / xi;
            if radicand < 0.0 {
                return Ok(Clamped { value: 0.0, clamped: true });
            }
            let raw = match model.akcelik_form {
                AkcelikForm::Printed => xi * (rho - 1.0) / 4.0 * radicand.sqrt(),
                AkcelikForm::Standard => xi / 4.0 * ((rho - 1.0) + radicand.sqrt()),
            };
            Ok(Clamped::floor_zero(raw))
        }
        OverflowKind::VitiCycle => {
            let steady = expected_q(model, cfg)?;
            Ok(Clamped {
                value: steady.value * -(-model.beta * f64::from(i)).exp_m1(),
                clamped: steady.clamped,
            })
        }
        _ => expected_q(model, cfg),
    }
}

/// Approximate probabilities that the last CV is in the overflow queue, among
/// the red arrivals, or absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioProbs {
    pub p_in_q: f64,
    pub p_in_a: f64,
    pub p_zero: f64,
}

/// Fitted multiplier on `E(Q)` in the scenario probabilities.
pub fn q_multiplier(p: f64) -> f64 {
    9.87 * p * p - 4.62 * p + 0.991
}

pub fn scenario_probs(cfg: &SignalDemandConfig, e_q: f64) -> Result<ScenarioProbs> {
    if !(e_q >= 0.0) {
        return Err(Error::InvalidConfig(format!("E(Q) must be nonnegative, got {e_q}")));
    }
    let p = cfg.p();
    if p <= 0.0 {
        return Err(Error::NoConnectedVehicles { p, lambda: cfg.lambda() });
    }
    let none_in_red = (-p * cfg.red_load()).exp();
    let none_at_all = (-p * (cfg.red_load() + q_multiplier(p) * e_q)).exp();
    Ok(ScenarioProbs {
        p_in_q: none_in_red - none_at_all,
        p_in_a: -(-p * cfg.red_load()).exp_m1(),
        p_zero: none_at_all,
    })
}

struct Ingredients {
    e_q: f64,
    probs: ScenarioProbs,
    theta_r: f64,
}

fn ingredients(cfg: &SignalDemandConfig, model: &OverflowModel) -> Result<Ingredients> {
    let e_q = expected_q(model, cfg)?.value;
    Ok(Ingredients {
        e_q,
        probs: scenario_probs(cfg, e_q)?,
        theta_r: cfg.theta() * cfg.red(),
    })
}

/// Three-scenario approximation of `E(N)` with an overflow queue.
pub fn approx_expected_n(cfg: &SignalDemandConfig, model: &OverflowModel) -> Result<f64> {
    let Ingredients { e_q, probs, theta_r } = ingredients(cfg, model)?;
    let p = cfg.p();
    Ok(probs.p_in_q * (e_q + theta_r)
        + probs.p_in_a * (e_q + cfg.red_load())
        + probs.p_zero * ((1.0 - p) * (e_q + theta_r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VdApprox {
    /// Without range sensors.
    Eq14,
    /// With range sensors, as printed.
    Eq16Sensor,
}

impl VdApprox {
    pub fn as_str(self) -> &'static str {
        match self {
            VdApprox::Eq14 => "eq14",
            VdApprox::Eq16Sensor => "eq16_sensor",
        }
    }
}

/// Approximate `V(D)` with an overflow queue.
pub fn approx_variance_d(cfg: &SignalDemandConfig, model: &OverflowModel, variant: VdApprox) -> Result<f64> {
    let Ingredients { e_q, probs, theta_r } = ingredients(cfg, model)?;
    let p = cfg.p();
    let q = 1.0 - p;
    let v_q = variance_q(cfg)?;
    let none_seen = probs.p_zero * (q * (v_q + theta_r));
    Ok(match variant {
        VdApprox::Eq14 => {
            probs.p_in_q * (q * -(-p * e_q).exp_m1() / p + theta_r)
                + probs.p_in_a * (q * prob_some_cv(cfg) / p)
                + none_seen
        }
        VdApprox::Eq16Sensor => {
            let in_q = q * p * -(-(1.0 + p) * e_q).exp_m1() / (1.0 + p) - p * theta_r;
            let in_a = (q * prob_some_cv(cfg) / p - q)
                * prob_not_last(cfg, NotLastMethod::PaperClosedForm)?;
            probs.p_in_q * in_q + probs.p_in_a * in_a + none_seen
        }
    })
}

/// Moments that the five-scenario mean needs from outside this module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyInputs {
    /// Mean last-CV position.
    pub e_l: f64,
    /// Mean join time used in the red-arrival, not-last term.
    pub e_tau: f64,
    /// Mean overflow-era follower join time on the previous cycle's clock.
    pub e_tau_prime: f64,
}

impl SteadyInputs {
    /// `E(L)` from the no-overflow form shifted by `E(Q)`, `E(T)` for the join
    /// time and `C - E(Q) / (2 lambda)` for the follower: the mean overflow
    /// vehicle joined half the overflow backlog's arrival span before red.
    pub fn defaults(cfg: &SignalDemandConfig, model: &OverflowModel) -> Result<Self> {
        let e_q = expected_q(model, cfg)?.value;
        Ok(SteadyInputs {
            e_l: expected_l(cfg, false)? + e_q,
            e_tau: expected_t(cfg, false)?,
            e_tau_prime: cfg.cycle() - e_q / (2.0 * cfg.lambda()),
        })
    }
}

/// Five-scenario mean of `N`, splitting the overflow and red-arrival cases by
/// whether the last CV is the last queued vehicle.
pub fn steady_expected_n(cfg: &SignalDemandConfig, model: &OverflowModel, inputs: &SteadyInputs) -> Result<f64> {
    let Ingredients { e_q, probs, theta_r } = ingredients(cfg, model)?;
    let theta = cfg.theta();
    let not_last = prob_not_last(cfg, NotLastMethod::ExactIntegral)?;
    let last = 1.0 - not_last;
    let SteadyInputs { e_l, e_tau, e_tau_prime } = *inputs;
    Ok(probs.p_in_q * not_last * (e_l + theta * (cfg.cycle() - e_tau_prime) + theta_r)
        + probs.p_in_q * last * (e_l + theta_r)
        + probs.p_in_a * not_last * (e_l + 1.0 + theta * (cfg.red() - e_tau))
        + probs.p_in_a * last * e_l
        + probs.p_zero * ((1.0 - cfg.p()) * (e_q + theta_r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::REFERENCE_P_GRID;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn at_rho(rho: f64, p: f64) -> SignalDemandConfig {
        SignalDemandConfig::reference_at_rho(rho, p).unwrap()
    }

    fn eq(kind: OverflowKind, rho: f64) -> f64 {
        expected_q(&OverflowModel::new(kind), &at_rho(rho, 0.3)).unwrap().value
    }

    #[test]
    fn akcelik_steady_values() {
        assert_abs_diff_eq!(eq(OverflowKind::AkcelikSteady, 0.98), 24.01, epsilon = 1e-9);
        assert_abs_diff_eq!(eq(OverflowKind::AkcelikSteady, 0.8), 1.6, epsilon = 1e-12);
    }

    #[test]
    fn clamps_below_onset() {
        let rho_o = 0.67 + 24.0 / 600.0;
        let at = expected_q(&OverflowModel::new(OverflowKind::Viti15), &at_rho(rho_o, 0.3)).unwrap();
        assert_abs_diff_eq!(at.value, 0.0, epsilon = 1e-12);
        let below = expected_q(&OverflowModel::new(OverflowKind::Viti15), &at_rho(0.5, 0.3)).unwrap();
        assert!(below.clamped && below.value == 0.0);
        let medhi = expected_q(&OverflowModel::new(OverflowKind::Medhi4th), &at_rho(0.4, 0.3)).unwrap();
        assert!(medhi.clamped && medhi.value == 0.0);
    }

    #[test]
    fn steady_kinds_diverge_at_capacity() {
        let cfg = SignalDemandConfig::reference(0.3, 0.3).unwrap();
        for kind in OverflowKind::ALL {
            assert!(matches!(
                expected_q(&OverflowModel::new(kind), &cfg),
                Err(Error::Divergent { .. })
            ));
        }
        assert!(variance_q(&cfg).is_err());
    }

    #[test]
    fn variance_values() {
        assert_abs_diff_eq!(variance_q(&at_rho(0.8, 0.3)).unwrap(), 1.6384 / 0.48, epsilon = 1e-9);
        assert_abs_diff_eq!(variance_q(&at_rho(0.6, 0.3)).unwrap(), 0.3825, epsilon = 1e-9);
        assert!(variance_q(&at_rho(1e-6, 0.3)).unwrap() < 1e-15);
    }

    #[test]
    fn monotone_in_rho_except_heuristic() {
        for kind in [OverflowKind::AkcelikSteady, OverflowKind::Viti15, OverflowKind::Medhi4th] {
            let mut prev = 0.0;
            for k in 1..=99 {
                let v = eq(kind, k as f64 / 100.0);
                assert!(v >= prev, "{kind} at rho={}", k as f64 / 100.0);
                prev = v;
            }
        }
        // The printed exponential form blows up at light load.
        assert!(eq(OverflowKind::HeuristicExp, 0.1) > eq(OverflowKind::HeuristicExp, 0.8));
    }

    #[test]
    fn viti_cycle_example_and_saturation() {
        let model = OverflowModel::new(OverflowKind::VitiCycle);
        let cfg = at_rho(0.88, 0.3);
        let v10 = expected_q_cycle(&model, &cfg, 10).unwrap().value;
        assert_abs_diff_eq!(v10, 2.125 * (1.0 - (-1.0f64).exp()), epsilon = 1e-9);
        let steady = expected_q(&model, &cfg).unwrap().value;
        let mut prev = 0.0;
        for i in 1..500 {
            let v = expected_q_cycle(&model, &cfg, i).unwrap().value;
            assert!(v >= prev && v <= steady);
            prev = v;
        }
        assert_abs_diff_eq!(prev, steady, epsilon = 1e-12);
        assert!(expected_q_cycle(&model, &cfg, 0).is_err());
    }

    #[test]
    fn akcelik_cycle_forms() {
        let printed = OverflowModel::new(OverflowKind::AkcelikCycle);
        let standard = printed.with_akcelik_form(AkcelikForm::Standard);
        // Below onset with small i the radicand goes negative.
        let light = at_rho(0.3, 0.3);
        let v = expected_q_cycle(&printed, &light, 1).unwrap();
        assert!(v.clamped && v.value == 0.0);
        // The printed product is never positive below capacity.
        for &rho in &[0.6, 0.8, 0.88, 0.98] {
            for i in [1, 10, 100] {
                assert_eq!(expected_q_cycle(&printed, &at_rho(rho, 0.3), i).unwrap().value, 0.0);
            }
        }
        // The standard form approaches the Viti steady state.
        let cfg = at_rho(0.88, 0.3);
        let far = expected_q_cycle(&standard, &cfg, 1_000_000).unwrap().value;
        assert_abs_diff_eq!(far, 2.125, epsilon = 1e-3);
        // Oversaturated: both forms grow with i.
        let over = SignalDemandConfig::reference(0.3, 0.3).unwrap();
        let a = expected_q_cycle(&standard, &over, 10).unwrap().value;
        let b = expected_q_cycle(&standard, &over, 20).unwrap().value;
        assert!(b > a && a > 0.0);
        assert!(expected_q_cycle(&printed, &over, 10).unwrap().value > 0.0);
    }

    #[test]
    fn scenario_example() {
        let cfg = SignalDemandConfig::reference(0.218, 0.2).unwrap();
        let probs = scenario_probs(&cfg, 1.6).unwrap();
        assert_abs_diff_eq!(q_multiplier(0.2), 0.4618, epsilon = 1e-12);
        assert_abs_diff_eq!(probs.p_in_a, 0.8594, epsilon = 1e-4);
        assert_abs_diff_eq!(probs.p_zero, 0.1212, epsilon = 1e-4);
        assert_abs_diff_eq!(probs.p_in_q, 0.0194, epsilon = 1e-4);
        let none = scenario_probs(&cfg, 0.0).unwrap();
        assert_eq!(none.p_in_q, 0.0);
        assert!(scenario_probs(&cfg, -1.0).is_err());
        assert!(scenario_probs(&cfg.with_p(0.0).unwrap(), 1.0).is_err());
    }

    proptest! {
        #[test]
        fn scenario_probs_sum_to_one(p in 1e-6f64..=1.0, load in 0.0f64..40.0, e_q in 0.0f64..60.0) {
            let cfg = SignalDemandConfig::new(load / 45.0 + 1e-9, p, 45.0, 43.2, 1.8).unwrap();
            let s = scenario_probs(&cfg, e_q).unwrap();
            for v in [s.p_in_q, s.p_in_a, s.p_zero] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((s.p_in_q + s.p_in_a + s.p_zero - 1.0).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn full_penetration_zeroes_both_approximations() {
        for &rho in &[0.6, 0.8, 0.88] {
            let cfg = at_rho(rho, 1.0);
            let model = OverflowModel::new(OverflowKind::AkcelikSteady);
            for v in [VdApprox::Eq14, VdApprox::Eq16Sensor] {
                assert_abs_diff_eq!(approx_variance_d(&cfg, &model, v).unwrap(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eq14_is_nonnegative_and_sensor_helps_at_reference_point() {
        let model = OverflowModel::new(OverflowKind::AkcelikSteady);
        for &rho in &[0.6, 0.7, 0.8, 0.88] {
            for &p in &REFERENCE_P_GRID {
                assert!(approx_variance_d(&at_rho(rho, p), &model, VdApprox::Eq14).unwrap() >= 0.0);
            }
        }
        let cfg = at_rho(0.8, 0.1);
        let off = approx_variance_d(&cfg, &model, VdApprox::Eq14).unwrap();
        let on = approx_variance_d(&cfg, &model, VdApprox::Eq16Sensor).unwrap();
        assert!(on <= off, "{on} > {off}");
    }

    #[test]
    fn expected_n_limits() {
        // Light load: no overflow, so the mean is lambda R up to the no-CV term.
        let cfg = at_rho(0.3, 0.5);
        let model = OverflowModel::new(OverflowKind::Viti15);
        let n = approx_expected_n(&cfg, &model).unwrap();
        let s = scenario_probs(&cfg, 0.0).unwrap();
        let expect = s.p_in_a * cfg.red_load() + s.p_zero * 0.5 * cfg.theta() * 45.0;
        assert_abs_diff_eq!(n, expect, epsilon = 1e-12);
        // p = 1: the theta terms vanish.
        let full = at_rho(0.8, 1.0);
        let m = OverflowModel::new(OverflowKind::AkcelikSteady);
        let s = scenario_probs(&full, 1.6).unwrap();
        let n = approx_expected_n(&full, &m).unwrap();
        assert_abs_diff_eq!(n, s.p_in_q * 1.6 + s.p_in_a * (1.6 + full.red_load()), epsilon = 1e-12);
    }

    #[test]
    fn five_scenario_mean_collapses_when_splits_merge() {
        // With inputs chosen so the split brackets agree, the lv split merges
        // into a single weighted term per scenario.
        let cfg = at_rho(0.8, 0.3);
        let model = OverflowModel::new(OverflowKind::AkcelikSteady);
        let inputs = SteadyInputs {
            e_l: 7.0,
            e_tau: cfg.red() + 1.0 / cfg.theta(),
            e_tau_prime: cfg.cycle(),
        };
        let n = steady_expected_n(&cfg, &model, &inputs).unwrap();
        let s = scenario_probs(&cfg, 1.6).unwrap();
        let theta_r = cfg.theta() * cfg.red();
        let expect = s.p_in_q * (7.0 + theta_r) + s.p_in_a * 7.0 + s.p_zero * 0.7 * (1.6 + theta_r);
        assert_abs_diff_eq!(n, expect, epsilon = 1e-9);
        // Full penetration keeps only the position terms.
        let full = at_rho(0.8, 1.0);
        let d = SteadyInputs::defaults(&full, &model).unwrap();
        let s = scenario_probs(&full, 1.6).unwrap();
        let n = steady_expected_n(&full, &model, &d).unwrap();
        let not_last = prob_not_last(&full, NotLastMethod::ExactIntegral).unwrap();
        assert_abs_diff_eq!(n, (s.p_in_q + s.p_in_a) * d.e_l + s.p_in_a * not_last, epsilon = 1e-9);
    }

    #[test]
    fn names_round_trip() {
        for kind in OverflowKind::ALL {
            assert_eq!(kind.to_string().parse::<OverflowKind>().unwrap(), kind);
        }
        assert!("akcelik".parse::<OverflowKind>().is_err());
    }
}
