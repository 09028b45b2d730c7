//! Independent checks of the closed forms: Monte Carlo over simulated red
//! phases, adaptive quadrature over the last-CV time density, and long
//! overflow-queue simulations.
//!
//! Reports annotate each registered variant with a verdict and never pick a
//! winner.
//!
//! Zero-filled convention: cycles without a CV contribute `T = T' = L = L' = 0`.
//! Moment reports use this as the primary oracle and carry the mean
//! conditional on `m > 0` alongside, with `@conditional` verdicts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{
    expect_under_density, expected_l, expected_t, prob_not_last, prob_some_cv,
    variance_d_no_overflow, NotLastMethod, VdMethod,
};
use crate::config::SignalDemandConfig;
use crate::error::{Error, Result};
use crate::estimators::{estimate_no_q, estimate_with_q};
use crate::model::CycleOutcome;
use crate::overflow::{
    approx_expected_n, approx_variance_d, expected_q, expected_q_cycle, scenario_probs,
    steady_expected_n, variance_q, AkcelikForm, OverflowKind, OverflowModel, SteadyInputs,
    VdApprox,
};
use crate::sim::{observe, ApproachSim};
use crate::stats::{batch_means, batch_variance, MeanSe, DEFAULT_BATCHES};

/// Agreement band in standard errors.
pub const SE_MULTIPLIER: f64 = 3.0;
/// Fewest cycles with a CV for a conclusive Monte Carlo verdict.
pub const MIN_CONDITIONING: usize = 100;
/// Smallest Monte Carlo sample accepted.
pub const MIN_SAMPLES: usize = 10_000;

const MOMENT_STREAM: u64 = 0x4d43;
const OVERFLOW_STREAM: u64 = 0x4f56;
const CYCLE_STREAM: u64 = 0x4359;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub variants: BTreeMap<String, f64>,
    pub oracle: MeanSe,
    pub verdicts: BTreeMap<String, bool>,
    /// Mean conditional on at least one CV, for zero-filled quantities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional: Option<MeanSe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OracleReport {
    fn new(quantity: impl Into<String>, oracle: MeanSe) -> Self {
        OracleReport {
            quantity: quantity.into(),
            variants: BTreeMap::new(),
            oracle,
            verdicts: BTreeMap::new(),
            conditional: None,
            note: None,
        }
    }

    fn variant(mut self, name: &str, value: f64) -> Self {
        self.variants.insert(name.to_string(), value);
        self
    }

    /// Fills verdicts at `SE_MULTIPLIER` standard errors.
    fn judge(mut self) -> Self {
        for (name, &v) in &self.variants {
            self.verdicts.insert(name.clone(), self.oracle.agrees(v, SE_MULTIPLIER));
            if let Some(cond) = self.conditional {
                self.verdicts
                    .insert(format!("{name}@conditional"), cond.agrees(v, SE_MULTIPLIER));
            }
        }
        self
    }

    /// Fills verdicts against a fixed absolute tolerance.
    fn judge_within(mut self, tol: f64) -> Self {
        for (name, &v) in &self.variants {
            self.verdicts.insert(name.clone(), (v - self.oracle.value).abs() <= tol);
        }
        self
    }

    pub fn verdict(&self, variant: &str) -> Option<bool> {
        self.verdicts.get(variant).copied()
    }

    pub fn is_inconclusive(&self) -> bool {
        self.verdicts.is_empty()
    }
}

/// Quantities checked against simulated red phases without overflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentQuantity {
    ExpectedT,
    ExpectedTPrime,
    ExpectedL,
    ExpectedLPrime,
    ProbNotLast,
    VdSensor,
    VdNoSensor,
}

impl MomentQuantity {
    pub const ALL: [MomentQuantity; 7] = [
        MomentQuantity::ExpectedT,
        MomentQuantity::ExpectedTPrime,
        MomentQuantity::ExpectedL,
        MomentQuantity::ExpectedLPrime,
        MomentQuantity::ProbNotLast,
        MomentQuantity::VdSensor,
        MomentQuantity::VdNoSensor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MomentQuantity::ExpectedT => "e_t",
            MomentQuantity::ExpectedTPrime => "e_t_prime",
            MomentQuantity::ExpectedL => "e_l",
            MomentQuantity::ExpectedLPrime => "e_l_prime",
            MomentQuantity::ProbNotLast => "p_not_last",
            MomentQuantity::VdSensor => "v_d_sensor",
            MomentQuantity::VdNoSensor => "v_d_no_sensor",
        }
    }
}

impl fmt::Display for MomentQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MomentQuantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MomentQuantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| Error::UnknownName { what: "oracle quantity", name: s.to_string() })
    }
}

/// Per-cycle facts the moment oracles need.
#[derive(Debug, Clone, Copy)]
struct Sample {
    has_cv: bool,
    t: f64,
    t_prime: f64,
    l: f64,
    l_prime: f64,
    not_last: bool,
    d_sensor: f64,
    d_no_sensor: f64,
}

fn sample_cycle(cfg: &SignalDemandConfig, outcome: &CycleOutcome) -> Result<Sample> {
    let on = observe(cfg, outcome, true);
    let off = on.without_sensor();
    let n = f64::from(outcome.total_queue);
    let d_sensor = n - estimate_no_q(&on, cfg, true)?.estimate;
    let d_no_sensor = n - estimate_no_q(&off, cfg, false)?.estimate;
    let t = on.t.unwrap_or(0.0);
    Ok(Sample {
        has_cv: on.m > 0,
        t,
        t_prime: on.t_prime.unwrap_or(t),
        l: f64::from(on.l),
        l_prime: f64::from(on.l_prime),
        not_last: on.m > 0 && !on.last_is_last,
        d_sensor,
        d_no_sensor,
    })
}

/// Simulates `n` independent red phases in `DEFAULT_BATCHES` substreams.
fn moment_samples(cfg: &SignalDemandConfig, n: usize, seed: u64) -> Result<Vec<Sample>> {
    let size = n / DEFAULT_BATCHES;
    let batches: Result<Vec<Vec<Sample>>> = (0..DEFAULT_BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = if b + 1 == DEFAULT_BATCHES { n - size * b } else { size };
            ApproachSim::for_replication(*cfg, seed, &[MOMENT_STREAM, b as u64], false)
                .take(count)
                .map(|o| sample_cycle(cfg, &o))
                .collect()
        })
        .collect();
    Ok(batches?.into_iter().flatten().collect())
}

fn zero_filled(samples: &[Sample], f: fn(&Sample) -> f64) -> (MeanSe, MeanSe) {
    let all: Vec<f64> = samples.iter().map(f).collect();
    let cond: Vec<f64> = samples.iter().filter(|s| s.has_cv).map(f).collect();
    (batch_means(&all, DEFAULT_BATCHES), batch_means(&cond, DEFAULT_BATCHES))
}

fn moment_report(cfg: &SignalDemandConfig, q: MomentQuantity, samples: &[Sample]) -> Result<OracleReport> {
    let with_cv = samples.iter().filter(|s| s.has_cv).count();
    let zero_filled_report = |f: fn(&Sample) -> f64| {
        let (all, cond) = zero_filled(samples, f);
        let mut r = OracleReport::new(q.as_str(), all);
        r.conditional = Some(cond);
        r
    };
    let report = match q {
        MomentQuantity::ExpectedT => {
            zero_filled_report(|s| s.t).variant("printed", expected_t(cfg, false)?)
        }
        MomentQuantity::ExpectedTPrime => {
            zero_filled_report(|s| s.t_prime).variant("printed", expected_t(cfg, true)?)
        }
        MomentQuantity::ExpectedL => {
            zero_filled_report(|s| s.l).variant("printed", expected_l(cfg, false)?)
        }
        MomentQuantity::ExpectedLPrime => {
            zero_filled_report(|s| s.l_prime).variant("printed_literal", expected_l(cfg, true)?)
        }
        MomentQuantity::ProbNotLast => {
            let cond: Vec<f64> = samples
                .iter()
                .filter(|s| s.has_cv)
                .map(|s| if s.not_last { 1.0 } else { 0.0 })
                .collect();
            let mut r = OracleReport::new(q.as_str(), batch_means(&cond, DEFAULT_BATCHES));
            for m in NotLastMethod::ALL {
                r = r.variant(m.as_str(), prob_not_last(cfg, m)?);
            }
            r
        }
        MomentQuantity::VdSensor | MomentQuantity::VdNoSensor => {
            let sensor = q == MomentQuantity::VdSensor;
            let d: Vec<f64> = samples
                .iter()
                .map(|s| if sensor { s.d_sensor } else { s.d_no_sensor })
                .collect();
            let mut r = OracleReport::new(q.as_str(), batch_variance(&d, DEFAULT_BATCHES));
            for m in VdMethod::ALL {
                r = r.variant(m.as_str(), variance_d_no_overflow(cfg, sensor, m)?);
            }
            r
        }
    };
    if with_cv < MIN_CONDITIONING {
        let mut r = report;
        r.note = Some(format!("inconclusive: {with_cv} of {} cycles had a CV", samples.len()));
        return Ok(r);
    }
    Ok(report.judge())
}

fn check_moment_inputs(cfg: &SignalDemandConfig, n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!("oracle needs at least {MIN_SAMPLES} samples, got {n}")));
    }
    if cfg.p() <= 0.0 {
        return Err(Error::NoConnectedVehicles { p: cfg.p(), lambda: cfg.lambda() });
    }
    Ok(())
}

/// Checks one quantity against `n` simulated red phases.
pub fn mc_conditional_oracle(cfg: &SignalDemandConfig, quantity: MomentQuantity, n: usize, seed: u64) -> Result<OracleReport> {
    check_moment_inputs(cfg, n)?;
    let samples = moment_samples(cfg, n, seed)?;
    moment_report(cfg, quantity, &samples)
}

/// Every moment quantity against one shared set of `n` simulated red phases.
pub fn mc_moment_oracles(cfg: &SignalDemandConfig, n: usize, seed: u64) -> Result<Vec<OracleReport>> {
    check_moment_inputs(cfg, n)?;
    let samples = moment_samples(cfg, n, seed)?;
    MomentQuantity::ALL.iter().map(|&q| moment_report(cfg, q, &samples)).collect()
}

/// Functionals of the last-CV time density checked by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadFunctional {
    Normalization,
    /// `E[1 - e^{-lambda (R - T)}]`.
    NotLastKernel,
    /// `E[1 - e^{-theta (R - T)}]`.
    ThinnedKernel,
    Mean,
}

impl QuadFunctional {
    pub const ALL: [QuadFunctional; 4] = [
        QuadFunctional::Normalization,
        QuadFunctional::NotLastKernel,
        QuadFunctional::ThinnedKernel,
        QuadFunctional::Mean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuadFunctional::Normalization => "normalization",
            QuadFunctional::NotLastKernel => "not_last_kernel",
            QuadFunctional::ThinnedKernel => "thinned_kernel",
            QuadFunctional::Mean => "mean",
        }
    }
}

/// Closed form of `E[1 - e^{-theta (R - T)}]`:
/// `1 - p (1 - e^{-lambda R}) / (1 - e^{-p lambda R})`.
pub fn thinned_not_last_closed(cfg: &SignalDemandConfig) -> f64 {
    1.0 - cfg.p() * -(-cfg.red_load()).exp_m1() / prob_some_cv(cfg)
}

pub fn quadrature_oracle(cfg: &SignalDemandConfig, functional: QuadFunctional) -> Result<OracleReport> {
    let (lambda, theta, red) = (cfg.lambda(), cfg.theta(), cfg.red());
    let quad = match functional {
        QuadFunctional::Normalization => expect_under_density(cfg, |_| 1.0)?,
        QuadFunctional::NotLastKernel => expect_under_density(cfg, |t| -(-lambda * (red - t)).exp_m1())?,
        QuadFunctional::ThinnedKernel => expect_under_density(cfg, |t| -(-theta * (red - t)).exp_m1())?,
        QuadFunctional::Mean => expect_under_density(cfg, |t| t)?,
    };
    let oracle = MeanSe { value: quad.value, se: quad.abs_error };
    let r = OracleReport::new(functional.as_str(), oracle);
    Ok(match functional {
        QuadFunctional::Normalization => r.variant("unity", 1.0).judge_within(1e-9),
        QuadFunctional::NotLastKernel => r
            .variant(NotLastMethod::PaperClosedForm.as_str(), prob_not_last(cfg, NotLastMethod::PaperClosedForm)?)
            .variant("exact_closed_form", 1.0 - cfg.p() * -(-(1.0 + cfg.p()) * cfg.red_load()).exp_m1()
                / ((1.0 + cfg.p()) * prob_some_cv(cfg)))
            .judge_within(1e-8),
        QuadFunctional::ThinnedKernel => r
            .variant("thinned_closed_form", thinned_not_last_closed(cfg))
            .judge_within(1e-8),
        QuadFunctional::Mean => {
            let e_t = expected_t(cfg, false)?;
            r.variant("printed_e_t", e_t)
                .variant("printed_e_t_over_p_some_cv", e_t / prob_some_cv(cfg))
                .judge_within(1e-8 * red)
        }
    })
}

/// Simulation layout for the overflow oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverflowOracleRun {
    pub cycles: u32,
    pub warmup: u32,
    pub replications: u32,
    pub seed: u64,
}

impl Default for OverflowOracleRun {
    fn default() -> Self {
        OverflowOracleRun { cycles: 20_000, warmup: 200, replications: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowQuantity {
    ExpectedQ,
    VarianceQ,
    ProbInQ,
    ProbInA,
    ProbZero,
    ExpectedN,
    VdNoSensor,
    VdSensor,
}

impl OverflowQuantity {
    pub const ALL: [OverflowQuantity; 8] = [
        OverflowQuantity::ExpectedQ,
        OverflowQuantity::VarianceQ,
        OverflowQuantity::ProbInQ,
        OverflowQuantity::ProbInA,
        OverflowQuantity::ProbZero,
        OverflowQuantity::ExpectedN,
        OverflowQuantity::VdNoSensor,
        OverflowQuantity::VdSensor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OverflowQuantity::ExpectedQ => "e_q",
            OverflowQuantity::VarianceQ => "v_q",
            OverflowQuantity::ProbInQ => "p_in_q",
            OverflowQuantity::ProbInA => "p_in_a",
            OverflowQuantity::ProbZero => "p_zero",
            OverflowQuantity::ExpectedN => "e_n",
            OverflowQuantity::VdNoSensor => "v_d_no_sensor",
            OverflowQuantity::VdSensor => "v_d_sensor",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OverflowSample {
    q: f64,
    n: f64,
    in_q: bool,
    in_a: bool,
    d_no_sensor: f64,
    d_sensor: f64,
}

fn overflow_samples(cfg: &SignalDemandConfig, model: &OverflowModel, run: &OverflowOracleRun) -> Result<Vec<OverflowSample>> {
    if run.warmup >= run.cycles || run.replications == 0 {
        return Err(Error::InvalidConfig("overflow oracle needs cycles > warm-up and a replication".into()));
    }
    let reps: Result<Vec<Vec<OverflowSample>>> = (0..run.replications)
        .into_par_iter()
        .map(|rep| {
            ApproachSim::for_replication(*cfg, run.seed, &[OVERFLOW_STREAM, u64::from(rep)], true)
                .take(run.cycles as usize)
                .skip(run.warmup as usize)
                .map(|o| {
                    let on = observe(cfg, &o, true);
                    let n = f64::from(o.total_queue);
                    let i = o.cycle_index;
                    Ok(OverflowSample {
                        q: f64::from(o.overflow_in),
                        n,
                        in_q: on.m > 0 && on.last_in_overflow,
                        in_a: on.m > 0 && !on.last_in_overflow,
                        d_no_sensor: n - estimate_with_q(&on.without_sensor(), cfg, model, false, i)?.estimate,
                        d_sensor: n - estimate_with_q(&on, cfg, model, true, i)?.estimate,
                    })
                })
                .collect()
        })
        .collect();
    Ok(reps?.into_iter().flatten().collect())
}

fn overflow_report(
    cfg: &SignalDemandConfig,
    model: &OverflowModel,
    q: OverflowQuantity,
    samples: &[OverflowSample],
) -> Result<OracleReport> {
    let column = |f: fn(&OverflowSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let indicator = |b: bool| if b { 1.0 } else { 0.0 };
    let e_q = expected_q(model, cfg)?.value;
    let probs = scenario_probs(cfg, e_q)?;
    let r = match q {
        OverflowQuantity::ExpectedQ => {
            let mut r = OracleReport::new(q.as_str(), batch_means(&column(|s| s.q), DEFAULT_BATCHES));
            for kind in OverflowKind::STEADY {
                r = r.variant(kind.as_str(), expected_q(&OverflowModel::new(kind), cfg)?.value);
            }
            r
        }
        OverflowQuantity::VarianceQ => {
            OracleReport::new(q.as_str(), batch_variance(&column(|s| s.q), DEFAULT_BATCHES))
                .variant("medhi_pk", variance_q(cfg)?)
        }
        OverflowQuantity::ProbInQ => {
            let xs: Vec<f64> = samples.iter().map(|s| indicator(s.in_q)).collect();
            OracleReport::new(q.as_str(), batch_means(&xs, DEFAULT_BATCHES)).variant("fitted", probs.p_in_q)
        }
        OverflowQuantity::ProbInA => {
            let xs: Vec<f64> = samples.iter().map(|s| indicator(s.in_a)).collect();
            OracleReport::new(q.as_str(), batch_means(&xs, DEFAULT_BATCHES)).variant("fitted", probs.p_in_a)
        }
        OverflowQuantity::ProbZero => {
            let xs: Vec<f64> = samples.iter().map(|s| indicator(!s.in_q && !s.in_a)).collect();
            OracleReport::new(q.as_str(), batch_means(&xs, DEFAULT_BATCHES)).variant("fitted", probs.p_zero)
        }
        OverflowQuantity::ExpectedN => {
            OracleReport::new(q.as_str(), batch_means(&column(|s| s.n), DEFAULT_BATCHES))
                .variant("three_scenario", approx_expected_n(cfg, model)?)
                .variant(
                    "five_scenario",
                    steady_expected_n(cfg, model, &SteadyInputs::defaults(cfg, model)?)?,
                )
        }
        OverflowQuantity::VdNoSensor => {
            OracleReport::new(q.as_str(), batch_variance(&column(|s| s.d_no_sensor), DEFAULT_BATCHES))
                .variant(VdApprox::Eq14.as_str(), approx_variance_d(cfg, model, VdApprox::Eq14)?)
        }
        OverflowQuantity::VdSensor => {
            OracleReport::new(q.as_str(), batch_variance(&column(|s| s.d_sensor), DEFAULT_BATCHES))
                .variant(VdApprox::Eq16Sensor.as_str(), approx_variance_d(cfg, model, VdApprox::Eq16Sensor)?)
        }
    };
    Ok(r.judge())
}

/// Checks overflow-queue closed forms against long simulated runs. `model`
/// supplies the `E(Q)` used by the scenario probabilities and estimators.
pub fn overflow_oracles(
    cfg: &SignalDemandConfig,
    model: &OverflowModel,
    run: &OverflowOracleRun,
) -> Result<Vec<OracleReport>> {
    let samples = overflow_samples(cfg, model, run)?;
    OverflowQuantity::ALL
        .iter()
        .map(|&q| overflow_report(cfg, model, q, &samples))
        .collect()
}

/// Mean overflow at cycle `i` across `replications` runs that start empty,
/// against the cycle-indexed forms.
pub fn cycle_overflow_oracle(
    cfg: &SignalDemandConfig,
    i: u32,
    replications: u32,
    seed: u64,
    beta: f64,
) -> Result<OracleReport> {
    if i == 0 || replications < DEFAULT_BATCHES as u32 {
        return Err(Error::InvalidConfig(format!(
            "need i >= 1 and at least {DEFAULT_BATCHES} replications"
        )));
    }
    let qs: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let outcome = ApproachSim::for_replication(*cfg, seed, &[CYCLE_STREAM, u64::from(rep)], true)
                .nth(i as usize - 1)
                .expect("simulator never ends");
            f64::from(outcome.overflow_in)
        })
        .collect();
    let printed = OverflowModel::new(OverflowKind::AkcelikCycle);
    let standard = printed.with_akcelik_form(AkcelikForm::Standard);
    let viti = OverflowModel::new(OverflowKind::VitiCycle).with_beta(beta);
    Ok(OracleReport::new(format!("e_q_cycle_{i}"), batch_means(&qs, DEFAULT_BATCHES))
        .variant("akcelik_cycle_printed", expected_q_cycle(&printed, cfg, i)?.value)
        .variant("akcelik_cycle_standard", expected_q_cycle(&standard, cfg, i)?.value)
        .variant("viti_cycle", expected_q_cycle(&viti, cfg, i)?.value)
        .judge())
}

/// Closed-form operations and the oracle quantity that checks each.
pub const COVERAGE: &[(&str, &str)] = &[
    ("analytic::density_t", "normalization"),
    ("analytic::expected_t", "e_t"),
    ("analytic::expected_t(sensor)", "e_t_prime"),
    ("analytic::expected_l", "e_l"),
    ("analytic::expected_l(sensor)", "e_l_prime"),
    ("analytic::prob_not_last", "p_not_last"),
    ("analytic::variance_d_no_overflow", "v_d_sensor"),
    ("analytic::no_sensor_baseline", "v_d_no_sensor"),
    ("overflow::expected_q", "e_q"),
    ("overflow::variance_q", "v_q"),
    ("overflow::expected_q_cycle", "e_q_cycle"),
    ("overflow::scenario_probs", "p_in_q"),
    ("overflow::approx_expected_n", "e_n"),
    ("overflow::steady_expected_n", "e_n"),
    ("overflow::approx_variance_d(eq14)", "v_d_no_sensor"),
    ("overflow::approx_variance_d(eq16_sensor)", "v_d_sensor"),
];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadrature_reports() {
        let cfg = SignalDemandConfig::reference(0.239, 0.5).unwrap();
        let norm = quadrature_oracle(&cfg, QuadFunctional::Normalization).unwrap();
        assert_eq!(norm.verdict("unity"), Some(true));
        let kernel = quadrature_oracle(&cfg, QuadFunctional::NotLastKernel).unwrap();
        assert_eq!(kernel.verdict("exact_closed_form"), Some(true));
        assert_eq!(kernel.verdict("paper_closed_form"), Some(false));
        let thin = quadrature_oracle(&cfg, QuadFunctional::ThinnedKernel).unwrap();
        assert_eq!(thin.verdict("thinned_closed_form"), Some(true));
        let mean = quadrature_oracle(&cfg, QuadFunctional::Mean).unwrap();
        assert_eq!(mean.verdict("printed_e_t_over_p_some_cv"), Some(true));
        assert_eq!(mean.verdict("printed_e_t"), Some(false));
    }

    #[test]
    fn thinned_closed_form_matches_method() {
        let cfg = SignalDemandConfig::reference(0.239, 0.5).unwrap();
        assert_abs_diff_eq!(
            thinned_not_last_closed(&cfg),
            prob_not_last(&cfg, NotLastMethod::ThinnedIntegral).unwrap(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn small_samples_are_rejected() {
        let cfg = SignalDemandConfig::reference(0.239, 0.5).unwrap();
        assert!(mc_conditional_oracle(&cfg, MomentQuantity::ExpectedT, 100, 1).is_err());
        let none = cfg.with_p(0.0).unwrap();
        assert!(mc_conditional_oracle(&none, MomentQuantity::ExpectedT, 20_000, 1).is_err());
    }

    #[test]
    fn rare_cvs_are_inconclusive() {
        let cfg = SignalDemandConfig::reference(0.111, 0.0001).unwrap();
        let r = mc_conditional_oracle(&cfg, MomentQuantity::ExpectedT, 10_000, 3).unwrap();
        assert!(r.is_inconclusive());
        assert!(r.note.is_some());
    }

    #[test]
    fn report_serializes_with_required_keys() {
        let cfg = SignalDemandConfig::reference(0.239, 0.5).unwrap();
        let r = quadrature_oracle(&cfg, QuadFunctional::Normalization).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["quantity", "variants", "oracle", "verdicts"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["oracle"].get("value").is_some() && v["oracle"].get("se").is_some());
    }
}
