//! Signal timing, demand and observation parameters, plus the flat
//! `key = value` run configuration file.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::overflow::OverflowKind;

/// Effective red used throughout the reference experiments, seconds.
pub const REFERENCE_RED: f64 = 45.0;
/// Effective green used throughout the reference experiments, seconds.
pub const REFERENCE_GREEN: f64 = 43.2;
/// Saturation discharge headway, seconds per vehicle.
pub const REFERENCE_HEADWAY: f64 = 1.8;

/// Reference arrival rates, vehicles/second.
pub const REFERENCE_LAMBDAS: [f64; 7] = [0.111, 0.133, 0.163, 0.190, 0.218, 0.239, 0.267];
/// Volume-to-capacity ratios quoted for [`REFERENCE_LAMBDAS`] (rounded).
pub const REFERENCE_RHOS: [f64; 7] = [0.41, 0.49, 0.60, 0.70, 0.80, 0.88, 0.98];
/// Market penetration grid used for the overflow experiments.
pub const REFERENCE_P_GRID: [f64; 11] = [0.001, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// A validated signal/demand configuration. Derived quantities are filled on
/// construction and the value is immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalDemandConfig {
    lambda: f64,
    p: f64,
    red: f64,
    green: f64,
    discharge_headway: f64,
    cycle: f64,
    capacity_per_cycle: f64,
    rho: f64,
    rho_o: f64,
}

/// Non-fatal findings from [`SignalDemandConfig::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigWarning {
    /// rho >= 1: steady-state overflow formulas diverge, simulation is still valid.
    Oversaturated { rho: f64 },
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::Oversaturated { rho } => write!(
                f,
                "volume-to-capacity ratio {rho:.5} >= 1: steady-state overflow formulas diverge"
            ),
        }
    }
}

impl SignalDemandConfig {
    /// Validates the primary parameters and fills the derived fields.
    pub fn new(lambda: f64, p: f64, red: f64, green: f64, discharge_headway: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidConfig(format!("p = {p} outside [0, 1]")));
        }
        for (name, v) in [
            ("lambda", lambda),
            ("red", red),
            ("green", green),
            ("discharge_headway", discharge_headway),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        let cycle = red + green;
        let capacity_per_cycle = green / discharge_headway;
        let cfg = SignalDemandConfig {
            lambda,
            p,
            red,
            green,
            discharge_headway,
            cycle,
            capacity_per_cycle,
            rho: lambda * cycle / capacity_per_cycle,
            rho_o: 0.67 + capacity_per_cycle / 600.0,
        };
        for w in cfg.warnings() {
            log::warn!("{w}");
        }
        Ok(cfg)
    }

    /// Reference signal timing (45 s red, 43.2 s green, 1.8 s headway).
    pub fn reference(lambda: f64, p: f64) -> Result<Self> {
        Self::new(lambda, p, REFERENCE_RED, REFERENCE_GREEN, REFERENCE_HEADWAY)
    }

    /// Reference timing with the arrival rate chosen to hit a target rho.
    pub fn reference_at_rho(rho: f64, p: f64) -> Result<Self> {
        let capacity = REFERENCE_GREEN / REFERENCE_HEADWAY;
        let lambda = rho * capacity / (REFERENCE_RED + REFERENCE_GREEN);
        Self::reference(lambda, p)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(lambda, self.p, self.red, self.green, self.discharge_headway)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.lambda, p, self.red, self.green, self.discharge_headway)
    }

    pub fn warnings(&self) -> Vec<ConfigWarning> {
        if self.rho >= 1.0 {
            vec![ConfigWarning::Oversaturated { rho: self.rho }]
        } else {
            Vec::new()
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn red(&self) -> f64 {
        self.red
    }
    pub fn green(&self) -> f64 {
        self.green
    }
    pub fn discharge_headway(&self) -> f64 {
        self.discharge_headway
    }
    pub fn cycle(&self) -> f64 {
        self.cycle
    }
    /// Real-valued capacity g/h, used by the closed forms.
    pub fn capacity_per_cycle(&self) -> f64 {
        self.capacity_per_cycle
    }
    /// Whole vehicles the simulator discharges per green, floor(g/h).
    pub fn discharged_per_green(&self) -> u32 {
        // g/h is computed in floating point; 43.2/1.8 lands a hair under 24.
        (self.capacity_per_cycle + 1e-9).floor() as u32
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn rho_o(&self) -> f64 {
        self.rho_o
    }
    /// Non-CV arrival rate (1 - p) * lambda.
    pub fn theta(&self) -> f64 {
        (1.0 - self.p) * self.lambda
    }
    /// Mean red-phase arrivals lambda * R.
    pub fn red_load(&self) -> f64 {
        self.lambda * self.red
    }
}

/// Which sensor settings a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorMode {
    On,
    Off,
    Both,
}

impl SensorMode {
    pub fn flags(self) -> &'static [bool] {
        match self {
            SensorMode::On => &[true],
            SensorMode::Off => &[false],
            SensorMode::Both => &[false, true],
        }
    }
}

impl FromStr for SensorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "on" => Ok(SensorMode::On),
            "off" => Ok(SensorMode::Off),
            "both" => Ok(SensorMode::Both),
            _ => Err(Error::UnknownName {
                what: "sensor mode",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for SensorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorMode::On => "on",
            SensorMode::Off => "off",
            SensorMode::Both => "both",
        })
    }
}

/// Contents of a run configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub signal: SignalDemandConfig,
    pub seed: u64,
    pub cycles: u32,
    pub replications: u32,
    /// `None` disables the overflow queue.
    pub overflow_model: Option<OverflowKind>,
    pub estimator: EstimatorKind,
    pub sensor: SensorMode,
}

const KEYS: [&str; 11] = [
    "lambda",
    "p",
    "red",
    "green",
    "discharge_headway",
    "seed",
    "cycles",
    "replications",
    "overflow_model",
    "estimator",
    "sensor",
];

impl RunConfig {
    pub fn with_defaults(signal: SignalDemandConfig) -> Self {
        RunConfig {
            signal,
            seed: 0,
            cycles: 100_000,
            replications: 1,
            overflow_model: None,
            estimator: EstimatorKind::KnownNoQ,
            sensor: SensorMode::Both,
        }
    }

    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// ignored; unknown or repeated keys are errors. `lambda` and `p` are
    /// required, everything else defaults to the reference setup.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigSyntax {
                line: line_no,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
            if values.insert(known, (line_no, value)).is_some() {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }

        fn num<T: FromStr>(
            values: &BTreeMap<&str, (usize, &str)>,
            key: &str,
            default: Option<T>,
        ) -> Result<T> {
            match values.get(key) {
                Some((line, v)) => v.parse().map_err(|_| Error::ConfigSyntax {
                    line: *line,
                    message: format!("cannot parse `{v}` for `{key}`"),
                }),
                None => default.ok_or_else(|| {
                    Error::InvalidConfig(format!("missing required key `{key}`"))
                }),
            }
        }

        let signal = SignalDemandConfig::new(
            num(&values, "lambda", None)?,
            num(&values, "p", None)?,
            num(&values, "red", Some(REFERENCE_RED))?,
            num(&values, "green", Some(REFERENCE_GREEN))?,
            num(&values, "discharge_headway", Some(REFERENCE_HEADWAY))?,
        )?;
        let mut run = RunConfig::with_defaults(signal);
        run.seed = num(&values, "seed", Some(run.seed))?;
        run.cycles = num(&values, "cycles", Some(run.cycles))?;
        run.replications = num(&values, "replications", Some(run.replications))?;
        if let Some((_, v)) = values.get("overflow_model") {
            run.overflow_model = match *v {
                "none" => None,
                other => Some(other.parse()?),
            };
        }
        if let Some((_, v)) = values.get("estimator") {
            run.estimator = v.parse()?;
        }
        if let Some((_, v)) = values.get("sensor") {
            run.sensor = v.parse()?;
        }
        if run.cycles == 0 || run.replications == 0 {
            return Err(Error::InvalidConfig(
                "cycles and replications must be at least 1".into(),
            ));
        }
        Ok(run)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

impl fmt::Display for RunConfig {
    /// Writes every key; `RunConfig::parse` of the output reproduces `self`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.signal;
        writeln!(f, "lambda = {}", s.lambda)?;
        writeln!(f, "p = {}", s.p)?;
        writeln!(f, "red = {}", s.red)?;
        writeln!(f, "green = {}", s.green)?;
        writeln!(f, "discharge_headway = {}", s.discharge_headway)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "cycles = {}", self.cycles)?;
        writeln!(f, "replications = {}", self.replications)?;
        match self.overflow_model {
            Some(kind) => writeln!(f, "overflow_model = {kind}")?,
            None => writeln!(f, "overflow_model = none")?,
        }
        writeln!(f, "estimator = {}", self.estimator)?;
        writeln!(f, "sensor = {}", self.sensor)
    }
}
