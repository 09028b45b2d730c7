//! Ground-truth cycle records, what connected vehicles reveal about them, and
//! estimator outputs.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Ground truth for one cycle at the end of red.
///
/// Vehicles are stored front-to-back. The first `overflow_in` entries are
/// carried over from earlier cycles; their `stop_times` are on this cycle's
/// clock and therefore negative. Red arrivals follow with times in `[0, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    /// 1-based cycle index.
    pub cycle_index: u32,
    pub overflow_in: u32,
    pub red_arrivals: u32,
    pub total_queue: u32,
    pub stop_times: Vec<f64>,
    pub cv_flags: Vec<bool>,
}

impl CycleOutcome {
    pub fn is_overflow_member(&self, position: usize) -> bool {
        position < self.overflow_in as usize
    }

    /// Checks the structural invariants of a cycle record.
    pub fn check(&self, red: f64) -> Result<()> {
        let n = self.total_queue as usize;
        if self.overflow_in + self.red_arrivals != self.total_queue
            || self.stop_times.len() != n
            || self.cv_flags.len() != n
        {
            return Err(Error::InvalidObservation("queue counts disagree".into()));
        }
        if self.stop_times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidObservation("stop times out of order".into()));
        }
        let red_times = &self.stop_times[self.overflow_in as usize..];
        if red_times.iter().any(|&t| !(0.0..red).contains(&t)) {
            return Err(Error::InvalidObservation("red arrival outside [0, R)".into()));
        }
        Ok(())
    }
}

/// The five mutually exclusive observation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Last CV is a red arrival and nothing is queued behind it.
    LastCvIsLastNewArrivals,
    /// Last CV is a red arrival with at least one vehicle behind it.
    LastCvNotLastNewArrivals,
    /// Last CV belongs to the overflow queue and nothing is queued behind it.
    LastCvIsLastOverflow,
    /// Last CV belongs to the overflow queue with at least one vehicle behind it.
    LastCvNotLastOverflow,
    NoCv,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::LastCvIsLastNewArrivals,
        Scenario::LastCvNotLastNewArrivals,
        Scenario::LastCvIsLastOverflow,
        Scenario::LastCvNotLastOverflow,
        Scenario::NoCv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::LastCvIsLastNewArrivals => "last_new",
            Scenario::LastCvNotLastNewArrivals => "not_last_new",
            Scenario::LastCvIsLastOverflow => "last_overflow",
            Scenario::LastCvNotLastOverflow => "not_last_overflow",
            Scenario::NoCv => "no_cv",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::UnknownName {
                what: "scenario",
                name: s.to_string(),
            })
    }
}

/// What the infrastructure learns from the connected vehicles in one cycle.
///
/// Times for red arrivals (`t`, `t_prime`) are seconds from red start.
/// Overflow-era times (`tau`, `tau_prime`) are on the previous cycle's clock,
/// so `C - tau` is the time from that join until the current red started.
/// A vehicle carried over more than one cycle has a negative `tau`; a
/// follower that is itself a red arrival has `tau_prime = C + t'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CvObservation {
    pub m: u32,
    /// 1-based position of the last CV from the stop bar, 0 if none.
    pub l: u32,
    pub t: Option<f64>,
    /// Ground truth: the last CV is the last queued vehicle.
    pub last_is_last: bool,
    pub l_prime: u32,
    pub t_prime: Option<f64>,
    pub tau: Option<f64>,
    pub tau_prime: Option<f64>,
    pub last_in_overflow: bool,
    /// Whether follower information (l', t', tau') was captured.
    pub sensor: bool,
}

impl CvObservation {
    pub fn no_cv(sensor: bool) -> Self {
        CvObservation {
            m: 0,
            l: 0,
            t: None,
            last_is_last: false,
            l_prime: 0,
            t_prime: None,
            tau: None,
            tau_prime: None,
            last_in_overflow: false,
            sensor,
        }
    }

    /// Last CV is a red arrival at `t`; `follower` is the join time of the
    /// vehicle behind it, `None` if there is none. Sensor information is on.
    pub fn new_arrival(m: u32, l: u32, t: f64, follower: Option<f64>) -> Self {
        CvObservation {
            m,
            l,
            t: Some(t),
            last_is_last: follower.is_none(),
            l_prime: if follower.is_some() { l + 1 } else { l },
            t_prime: follower,
            tau: None,
            tau_prime: None,
            last_in_overflow: false,
            sensor: true,
        }
    }

    /// Last CV is an overflow-era vehicle that joined at `tau` on the previous
    /// cycle's clock; `follower_tau` likewise. Sensor information is on.
    pub fn overflow(m: u32, l: u32, tau: f64, follower_tau: Option<f64>) -> Self {
        CvObservation {
            m,
            l,
            t: None,
            last_is_last: follower_tau.is_none(),
            l_prime: if follower_tau.is_some() { l + 1 } else { l },
            t_prime: None,
            tau: Some(tau),
            tau_prime: follower_tau,
            last_in_overflow: true,
            sensor: true,
        }
    }

    /// Drops follower information, as seen by a CV without a range sensor.
    pub fn without_sensor(mut self) -> Self {
        self.sensor = false;
        self.l_prime = self.l;
        self.t_prime = None;
        self.tau_prime = None;
        self
    }

    pub fn scenario(&self) -> Scenario {
        match (self.m, self.last_in_overflow, self.last_is_last) {
            (0, _, _) => Scenario::NoCv,
            (_, false, true) => Scenario::LastCvIsLastNewArrivals,
            (_, false, false) => Scenario::LastCvNotLastNewArrivals,
            (_, true, true) => Scenario::LastCvIsLastOverflow,
            (_, true, false) => Scenario::LastCvNotLastOverflow,
        }
    }

    /// Join time of the last CV on the current cycle's clock.
    pub fn last_cv_time(&self, cycle: f64) -> Option<f64> {
        self.t.or(self.tau.map(|tau| tau - cycle))
    }
}

/// Output of one estimator call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateResult {
    pub estimate: f64,
    pub scenario: Scenario,
    /// Slack time the unseen arrivals are extrapolated over, seconds.
    pub delta: f64,
    pub cond_variance: f64,
    pub theta: f64,
    pub p_used: f64,
    pub lambda_used: f64,
}
