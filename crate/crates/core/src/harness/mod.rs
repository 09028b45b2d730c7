//! Experiment sweeps over `(lambda, p)` grids, figure tables and the
//! acceptance suite.
//!
//! Every cell draws from the substream `[SWEEP_STREAM, lambda bits, p bits,
//! rep]`, so a cell's numbers do not depend on which other cells share the
//! sweep or how many worker threads run it.

mod acceptance;
mod figures;

pub use acceptance::*;
pub use figures::*;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    RunConfig, SignalDemandConfig, REFERENCE_GREEN, REFERENCE_HEADWAY, REFERENCE_LAMBDAS, REFERENCE_P_GRID,
    REFERENCE_RED,
};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, EstimatorStream, StreamDiagnostics};
use crate::overflow::{OverflowKind, OverflowModel};
use crate::sim::{observe, run_replication, SimRun};
use crate::stats::{ErrorAccumulator, ErrorSummary};

/// Volume-to-capacity ratios of the overflow experiments.
pub const OVERFLOW_RHOS: [f64; 5] = [0.6, 0.7, 0.8, 0.88, 0.98];

/// Default cap on `cells * replications * cycles`.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Cycles per cell in the no-overflow experiments.
pub const NO_OVERFLOW_CYCLES: u32 = 100_000;
/// Recorded cycles per replication in the overflow experiments.
pub const OVERFLOW_CYCLES: u32 = 1000;
pub const OVERFLOW_REPLICATIONS: u32 = 3;
pub const OVERFLOW_WARMUP: u32 = 100;

const SWEEP_STREAM: u64 = 0x5357;

/// A grid of `(lambda, p)` cells and what to run in each.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Signal timing; its `lambda` and `p` are replaced per cell.
    pub base: SignalDemandConfig,
    pub lambdas: Vec<f64>,
    pub ps: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    /// `None` runs without an overflow queue.
    pub overflow_model: Option<OverflowModel>,
    pub sensor_modes: Vec<bool>,
    pub seed: u64,
    /// Recorded cycles per replication.
    pub cycles: u32,
    pub replications: u32,
    pub warmup: u32,
    pub budget: u64,
    /// Keep per-cycle estimate records.
    pub record_cycles: bool,
    /// Where `run_sweep` writes its CSVs, if anywhere.
    pub outputs: Option<PathBuf>,
}

fn reference_base() -> SignalDemandConfig {
    SignalDemandConfig::reference(REFERENCE_LAMBDAS[0], 0.5).expect("reference timing is valid")
}

/// Arrival rate that gives `rho` under the reference timing.
pub fn reference_lambda_at(rho: f64) -> f64 {
    rho * (REFERENCE_GREEN / REFERENCE_HEADWAY) / (REFERENCE_RED + REFERENCE_GREEN)
}

impl ExperimentSpec {
    /// Reference lambdas and p grid, known-parameter estimator without
    /// overflow, both sensor settings, `10^5` cycles per cell.
    pub fn no_overflow(seed: u64) -> Self {
        ExperimentSpec {
            base: reference_base(),
            lambdas: REFERENCE_LAMBDAS.to_vec(),
            ps: REFERENCE_P_GRID.to_vec(),
            estimators: vec![EstimatorKind::KnownNoQ],
            overflow_model: None,
            sensor_modes: vec![false, true],
            seed,
            cycles: NO_OVERFLOW_CYCLES,
            replications: 1,
            warmup: 0,
            budget: DEFAULT_BUDGET,
            record_cycles: false,
            outputs: None,
        }
    }

    /// `OVERFLOW_RHOS` by the p grid with the steady-state Akcelik queue,
    /// 3 replications of 1000 cycles after 100 warm-up cycles.
    pub fn overflow(seed: u64) -> Self {
        ExperimentSpec {
            base: reference_base(),
            lambdas: OVERFLOW_RHOS.iter().map(|&r| reference_lambda_at(r)).collect(),
            ps: REFERENCE_P_GRID.to_vec(),
            estimators: vec![EstimatorKind::KnownWithQ, EstimatorKind::KnownWithQNoSensor],
            overflow_model: Some(OverflowModel::new(OverflowKind::AkcelikSteady)),
            sensor_modes: vec![false, true],
            seed,
            cycles: OVERFLOW_CYCLES,
            replications: OVERFLOW_REPLICATIONS,
            warmup: OVERFLOW_WARMUP,
            budget: DEFAULT_BUDGET,
            record_cycles: false,
            outputs: None,
        }
    }

    /// One cell from a run configuration. Overflow runs get the default
    /// warm-up on top of the configured cycles.
    pub fn from_run_config(rc: &RunConfig) -> Self {
        let sensor_modes = rc.sensor.flags().to_vec();
        ExperimentSpec {
            base: rc.signal,
            lambdas: vec![rc.signal.lambda()],
            ps: vec![rc.signal.p()],
            estimators: vec![rc.estimator],
            overflow_model: rc.overflow_model.map(OverflowModel::new),
            sensor_modes,
            seed: rc.seed,
            cycles: rc.cycles,
            replications: rc.replications,
            warmup: if rc.overflow_model.is_some() { OVERFLOW_WARMUP } else { 0 },
            budget: DEFAULT_BUDGET,
            record_cycles: false,
            outputs: None,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.lambdas.len() * self.ps.len()
    }

    /// Simulated cycles the sweep asks for, warm-up included.
    pub fn requested_cycles(&self) -> u64 {
        self.n_cells() as u64 * u64::from(self.replications) * (u64::from(self.cycles) + u64::from(self.warmup))
    }

    /// `(estimator, sensor)` pairs that make sense together.
    pub fn streams(&self) -> Vec<(EstimatorKind, bool)> {
        let mut out = Vec::new();
        for &kind in &self.estimators {
            for &sensor in &self.sensor_modes {
                if kind == EstimatorKind::KnownWithQNoSensor && sensor {
                    continue;
                }
                if !out.contains(&(kind, sensor)) {
                    out.push((kind, sensor));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.ps.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if self.estimators.is_empty() || self.sensor_modes.is_empty() {
            return Err(Error::InvalidConfig("need at least one estimator and sensor mode".into()));
        }
        if self.streams().is_empty() {
            return Err(Error::InvalidConfig(
                "known_with_q_no_sensor needs sensor mode off or both".into(),
            ));
        }
        if self.cycles == 0 || self.replications == 0 {
            return Err(Error::InvalidConfig("cycles and replications must be at least 1".into()));
        }
        for &kind in &self.estimators {
            match (kind, self.overflow_model.is_some()) {
                (EstimatorKind::KnownNoQ, true) => {
                    return Err(Error::InvalidConfig("known_no_q needs a run without overflow".into()))
                }
                (EstimatorKind::KnownWithQ | EstimatorKind::KnownWithQNoSensor, false) => {
                    return Err(Error::InvalidConfig(format!("{kind} needs an overflow model")))
                }
                _ => {}
            }
        }
        let requested = self.requested_cycles();
        if requested > self.budget {
            return Err(Error::BudgetExceeded { requested, cap: self.budget });
        }
        for &lambda in &self.lambdas {
            for &p in &self.ps {
                self.cell_config(lambda, p)?;
            }
        }
        Ok(())
    }

    fn cell_config(&self, lambda: f64, p: f64) -> Result<SignalDemandConfig> {
        SignalDemandConfig::new(lambda, p, self.base.red(), self.base.green(), self.base.discharge_headway())
    }
}

/// Zero-filled means over every recorded cycle of a cell (a cycle without a
/// CV contributes `0` to `t` and `l`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct EmpiricalMoments {
    pub e_t: f64,
    pub e_t_prime: f64,
    pub e_l: f64,
    pub e_l_prime: f64,
    pub e_n: f64,
    pub e_q: f64,
    /// Share of cycles with at least one CV.
    pub p_some_cv: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct MomentSums {
    n: f64,
    t: f64,
    t_prime: f64,
    l: f64,
    l_prime: f64,
    total: f64,
    q: f64,
    some_cv: f64,
}

impl MomentSums {
    fn finish(&self) -> EmpiricalMoments {
        let n = self.n.max(1.0);
        EmpiricalMoments {
            e_t: self.t / n,
            e_t_prime: self.t_prime / n,
            e_l: self.l / n,
            e_l_prime: self.l_prime / n,
            e_n: self.total / n,
            e_q: self.q / n,
            p_some_cv: self.some_cv / n,
        }
    }
}

/// One per-cycle estimate row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub rep: u32,
    pub cycle: u32,
    pub estimator: &'static str,
    pub sensor: &'static str,
    pub scenario: &'static str,
    pub l: u32,
    /// `t` for a red-arrival CV, `tau` for an overflow-era one.
    pub t: Option<f64>,
    pub m: u32,
    pub estimate: f64,
    #[serde(rename = "true_N")]
    pub true_n: u32,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamResult {
    pub estimator: EstimatorKind,
    pub sensor: bool,
    pub summary: ErrorSummary,
    /// Counters summed over replications.
    pub diagnostics: StreamDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub lambda: f64,
    pub p: f64,
    pub rho: f64,
    pub moments: EmpiricalMoments,
    pub streams: Vec<StreamResult>,
    pub records: Vec<EstimateRecord>,
}

impl CellResult {
    pub fn stream(&self, kind: EstimatorKind, sensor: bool) -> Option<&StreamResult> {
        self.streams.iter().find(|s| s.estimator == kind && s.sensor == sensor)
    }
}

/// Everything a sweep produced, cells in `lambda`-major grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub base: SignalDemandConfig,
    pub overflow_model: Option<OverflowModel>,
    pub cells: Vec<CellResult>,
}

const GRID_MATCH: f64 = 1e-9;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= GRID_MATCH
}

fn sensor_name(sensor: bool) -> &'static str {
    if sensor {
        "on"
    } else {
        "off"
    }
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    lambda: f64,
    p: f64,
    rho: f64,
    estimator: &'static str,
    sensor: &'static str,
    n_cycles: u64,
    n_replications: u32,
    mean_true: f64,
    mean_est: f64,
    bias: f64,
    std_err_bias: f64,
    v_d: f64,
    std_err_v_d: f64,
    vmr: f64,
    cov: f64,
    mae: f64,
    param_clamps: u64,
    estimator2_fallbacks: u64,
    history_fallbacks: u64,
    cold_starts: u64,
}

impl SweepOutput {
    pub fn cell(&self, lambda: f64, p: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| same(c.lambda, lambda) && same(c.p, p))
    }

    /// Summary table, one row per cell and stream.
    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for cell in &self.cells {
            for s in &cell.streams {
                let e = &s.summary;
                let d = &s.diagnostics;
                w.serialize(SummaryRow {
                    lambda: cell.lambda,
                    p: cell.p,
                    rho: cell.rho,
                    estimator: s.estimator.as_str(),
                    sensor: sensor_name(s.sensor),
                    n_cycles: e.n_cycles,
                    n_replications: e.n_replications,
                    mean_true: e.mean_true,
                    mean_est: e.mean_est,
                    bias: e.bias,
                    std_err_bias: e.std_err_bias,
                    v_d: e.v_d,
                    std_err_v_d: e.std_err_v_d,
                    vmr: e.vmr,
                    cov: e.cov,
                    mae: e.mae,
                    param_clamps: d.param_clamps,
                    estimator2_fallbacks: d.estimator2_fallbacks,
                    history_fallbacks: d.history_fallbacks,
                    cold_starts: d.cold_starts,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Per-cycle estimates of one cell with header
    /// `rep,cycle,estimator,sensor,scenario,l,t,m,estimate,true_N,error`.
    pub fn write_estimates_csv<W: std::io::Write>(cell: &CellResult, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &cell.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `summary.csv` and, for cells with records,
    /// `estimates/lambda_<lambda>_p_<p>.csv` under `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let summary = dir.join("summary.csv");
        self.write_summary_csv(BufWriter::new(File::create(&summary)?))?;
        let mut written = vec![summary];
        for cell in self.cells.iter().filter(|c| !c.records.is_empty()) {
            let sub = dir.join("estimates");
            std::fs::create_dir_all(&sub)?;
            let path = sub.join(format!("lambda_{}_p_{}.csv", cell.lambda, cell.p));
            Self::write_estimates_csv(cell, BufWriter::new(File::create(&path)?))?;
            written.push(path);
        }
        Ok(written)
    }
}

fn run_cell(spec: &ExperimentSpec, lambda: f64, p: f64) -> Result<CellResult> {
    let cfg = spec.cell_config(lambda, p)?;
    let run = SimRun::new(cfg, spec.seed, spec.cycles + spec.warmup, spec.replications, spec.warmup)?;
    let with_overflow = spec.overflow_model.is_some();
    let prefix = [SWEEP_STREAM, lambda.to_bits(), p.to_bits()];
    let pairs = spec.streams();
    let per_stream = spec.cycles as usize * spec.replications as usize;
    let mut accs: Vec<ErrorAccumulator> = pairs.iter().map(|_| ErrorAccumulator::with_capacity(per_stream)).collect();
    let mut diags = vec![StreamDiagnostics::default(); pairs.len()];
    let mut sums = MomentSums::default();
    let mut records = Vec::new();

    for rep in 0..spec.replications {
        let mut streams: Vec<EstimatorStream> = pairs
            .iter()
            .map(|&(kind, sensor)| EstimatorStream::new(kind, sensor, cfg, spec.overflow_model))
            .collect::<Result<_>>()?;
        let mut failure = None;
        run_replication(&run, with_overflow, &prefix, rep, |outcome| {
            if failure.is_some() {
                return;
            }
            let on = observe(&cfg, outcome, true);
            let off = on.without_sensor();
            let n = outcome.total_queue;
            let t = on.t.unwrap_or(0.0);
            sums.n += 1.0;
            sums.t += t;
            sums.t_prime += on.t_prime.unwrap_or(t);
            sums.l += f64::from(on.l);
            sums.l_prime += f64::from(on.l_prime);
            sums.total += f64::from(n);
            sums.q += f64::from(outcome.overflow_in);
            sums.some_cv += if on.m > 0 { 1.0 } else { 0.0 };
            for (k, stream) in streams.iter_mut().enumerate() {
                let obs = if stream.sensor() { &on } else { &off };
                match stream.estimate(obs, outcome.cycle_index) {
                    Ok(r) => {
                        accs[k].push(f64::from(n), r.estimate);
                        if spec.record_cycles {
                            records.push(EstimateRecord {
                                rep,
                                cycle: outcome.cycle_index,
                                estimator: stream.kind().as_str(),
                                sensor: sensor_name(stream.sensor()),
                                scenario: r.scenario.as_str(),
                                l: obs.l,
                                t: obs.t.or(obs.tau),
                                m: obs.m,
                                estimate: r.estimate,
                                true_n: n,
                                error: f64::from(n) - r.estimate,
                            });
                        }
                    }
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        for (k, stream) in streams.iter().enumerate() {
            let d = stream.diagnostics();
            diags[k].cycles += d.cycles;
            diags[k].param_clamps += d.param_clamps;
            diags[k].estimator2_fallbacks += d.estimator2_fallbacks;
            diags[k].history_fallbacks += d.history_fallbacks;
            diags[k].cold_starts += d.cold_starts;
        }
    }

    let streams = pairs
        .iter()
        .zip(accs.iter().zip(diags))
        .map(|(&(estimator, sensor), (acc, diagnostics))| StreamResult {
            estimator,
            sensor,
            summary: acc.summarize(spec.replications),
            diagnostics,
        })
        .collect();
    Ok(CellResult {
        lambda,
        p,
        rho: cfg.rho(),
        moments: sums.finish(),
        streams,
        records,
    })
}

/// Runs every cell of `spec` on the current rayon pool. Any failing cell
/// aborts the sweep with its coordinates attached.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    for &lambda in &spec.lambdas {
        for w in spec.base.with_lambda(lambda)?.warnings() {
            log::warn!("{w}");
        }
    }
    let grid: Vec<(f64, f64)> = spec
        .lambdas
        .iter()
        .flat_map(|&lambda| spec.ps.iter().map(move |&p| (lambda, p)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(lambda, p)| {
            run_cell(spec, lambda, p).map_err(|e| Error::Cell { lambda, p, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let output = SweepOutput {
        base: spec.base,
        overflow_model: spec.overflow_model,
        cells,
    };
    if let Some(dir) = &spec.outputs {
        output.write_all(dir)?;
    }
    Ok(output)
}
