//! Figure tables derived from sweep output.
//!
//! | figure | grid | columns |
//! |---|---|---|
//! | `fig2a` | lambda 0.239 by p | `p,E_T,E_T_prime,sim_E_T_prime` |
//! | `fig2b` | lambda 0.239 by p | `p,E_L,E_L_prime,sim_E_L,sim_E_L_prime,V_D_off,V_D_on,V_D_on_exact,sim_V_D_off,sim_V_D_on` |
//! | `fig3` | reference lambdas by p | `lambda,p,pct_delta_vmr_eq7,pct_delta_vmr_exact,pct_delta_vmr_sim` |
//! | `fig4` | reference lambdas by p | `lambda,p,pct_delta_cov_eq7,pct_delta_cov_exact,pct_delta_cov_sim,delta_sqrt_vd_eq7,delta_sqrt_vd_exact,delta_sqrt_vd_sim` |
//! | `fig5` | overflow rhos by p | `rho,lambda,p,V_D_off_eq14,V_D_on_eq16,sim_V_D_off,sim_V_D_on,pct_delta_vmr_approx,pct_delta_vmr_sim,pct_delta_cov_approx,pct_delta_cov_sim` |
//! | `fig7` | overflow rhos by p | `rho,lambda,p,V_D_off_eq14,sim_V_D_off,V_D_on_eq16,sim_V_D_on` plus `fig7_fit.csv`: `sensor,slope,r2,n` |
//! | `fig8` | overflow rhos by p | `rho,lambda,p,E_N_approx,E_N_five_scenario,sim_E_N,E_Q_model,sim_E_Q` |
//!
//! Simulated `V(D)` columns come from the known-parameter estimators. In
//! `fig7_fit.csv` the fit regresses the approximation on the simulated
//! value through the origin; `sensor` is 0 or 1.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytic::{expected_l, expected_t, no_sensor_baseline, variance_d_no_overflow, ImprovementRow, VdMethod};
use crate::config::{SignalDemandConfig, REFERENCE_LAMBDAS, REFERENCE_P_GRID};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::overflow::{
    approx_expected_n, approx_variance_d, expected_q, steady_expected_n, OverflowModel, SteadyInputs, VdApprox,
};
use crate::stats::{regression_through_origin, ErrorSummary};

use super::{ExperimentSpec, SweepOutput, OVERFLOW_RHOS};

/// Arrival rate of the two-panel moment figures.
pub const FIG2_LAMBDA: f64 = 0.239;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 7] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig7,
        Figure::Fig8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }

    pub fn needs_overflow(self) -> bool {
        matches!(self, Figure::Fig5 | Figure::Fig7 | Figure::Fig8)
    }

    /// Arrival rates of the figure's grid under `base` timing.
    pub fn lambdas(self, base: &SignalDemandConfig) -> Vec<f64> {
        match self {
            Figure::Fig2a | Figure::Fig2b => vec![FIG2_LAMBDA],
            Figure::Fig3 | Figure::Fig4 => REFERENCE_LAMBDAS.to_vec(),
            Figure::Fig5 | Figure::Fig7 | Figure::Fig8 => {
                let per_rho = base.capacity_per_cycle() / base.cycle();
                OVERFLOW_RHOS.iter().map(|r| r * per_rho).collect()
            }
        }
    }

    /// The default sweep restricted to this figure's grid.
    pub fn sweep_spec(self, seed: u64) -> ExperimentSpec {
        let mut spec = if self.needs_overflow() {
            ExperimentSpec::overflow(seed)
        } else {
            ExperimentSpec::no_overflow(seed)
        };
        spec.lambdas = self.lambdas(&spec.base);
        spec.ps = REFERENCE_P_GRID.to_vec();
        spec
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownName { what: "figure", name: s.to_string() })
    }
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    fn new(name: &str, columns: &[&'static str]) -> Self {
        FigureTable { name: name.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn no_overflow_stream(out: &SweepOutput, lambda: f64, p: f64, sensor: bool) -> Option<&ErrorSummary> {
    out.cell(lambda, p)?.stream(EstimatorKind::KnownNoQ, sensor).map(|s| &s.summary)
}

fn overflow_off(out: &SweepOutput, lambda: f64, p: f64) -> Option<&ErrorSummary> {
    let cell = out.cell(lambda, p)?;
    cell.stream(EstimatorKind::KnownWithQNoSensor, false)
        .or_else(|| cell.stream(EstimatorKind::KnownWithQ, false))
        .map(|s| &s.summary)
}

fn overflow_on(out: &SweepOutput, lambda: f64, p: f64) -> Option<&ErrorSummary> {
    out.cell(lambda, p)?.stream(EstimatorKind::KnownWithQ, true).map(|s| &s.summary)
}

/// Lists grid points whose cell, or whose needed streams, are absent.
fn check_coverage(out: &SweepOutput, figure: Figure) -> Result<()> {
    if out.cells.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if figure.needs_overflow() != out.overflow_model.is_some() {
        let want = if figure.needs_overflow() { "with" } else { "without" };
        return Err(Error::InvalidConfig(format!("{figure} needs a sweep {want} an overflow queue")));
    }
    let mut missing = Vec::new();
    for lambda in figure.lambdas(&out.base) {
        for p in REFERENCE_P_GRID {
            let present = match figure {
                Figure::Fig2a | Figure::Fig8 => out.cell(lambda, p).is_some(),
                Figure::Fig2b | Figure::Fig3 | Figure::Fig4 => {
                    no_overflow_stream(out, lambda, p, false).is_some()
                        && no_overflow_stream(out, lambda, p, true).is_some()
                }
                Figure::Fig5 | Figure::Fig7 => {
                    overflow_off(out, lambda, p).is_some() && overflow_on(out, lambda, p).is_some()
                }
            };
            if !present {
                missing.push(format!("({lambda}, {p})"));
            }
        }
    }
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingCells { figure: figure.to_string(), missing: missing.join(", ") })
    }
}

fn cell_cfg(out: &SweepOutput, lambda: f64, p: f64) -> Result<SignalDemandConfig> {
    SignalDemandConfig::new(lambda, p, out.base.red(), out.base.green(), out.base.discharge_headway())
}

fn improvement(cfg: &SignalDemandConfig, e_n: f64, off: f64, on: f64) -> ImprovementRow {
    ImprovementRow::from_variances(cfg.p(), cfg.lambda(), e_n, off, on)
}

/// The figure's tables (two for `fig7`), in grid order.
pub fn figure_tables(out: &SweepOutput, figure: Figure) -> Result<Vec<FigureTable>> {
    check_coverage(out, figure)?;
    let name = figure.as_str();
    let model: Option<OverflowModel> = out.overflow_model;
    let mut table = match figure {
        Figure::Fig2a => FigureTable::new(name, &["p", "E_T", "E_T_prime", "sim_E_T_prime"]),
        Figure::Fig2b => FigureTable::new(
            name,
            &[
                "p", "E_L", "E_L_prime", "sim_E_L", "sim_E_L_prime", "V_D_off", "V_D_on", "V_D_on_exact",
                "sim_V_D_off", "sim_V_D_on",
            ],
        ),
        Figure::Fig3 => FigureTable::new(
            name,
            &["lambda", "p", "pct_delta_vmr_eq7", "pct_delta_vmr_exact", "pct_delta_vmr_sim"],
        ),
        Figure::Fig4 => FigureTable::new(
            name,
            &[
                "lambda", "p", "pct_delta_cov_eq7", "pct_delta_cov_exact", "pct_delta_cov_sim",
                "delta_sqrt_vd_eq7", "delta_sqrt_vd_exact", "delta_sqrt_vd_sim",
            ],
        ),
        Figure::Fig5 => FigureTable::new(
            name,
            &[
                "rho", "lambda", "p", "V_D_off_eq14", "V_D_on_eq16", "sim_V_D_off", "sim_V_D_on",
                "pct_delta_vmr_approx", "pct_delta_vmr_sim", "pct_delta_cov_approx", "pct_delta_cov_sim",
            ],
        ),
        Figure::Fig7 => FigureTable::new(
            name,
            &["rho", "lambda", "p", "V_D_off_eq14", "sim_V_D_off", "V_D_on_eq16", "sim_V_D_on"],
        ),
        Figure::Fig8 => FigureTable::new(
            name,
            &["rho", "lambda", "p", "E_N_approx", "E_N_five_scenario", "sim_E_N", "E_Q_model", "sim_E_Q"],
        ),
    };

    for lambda in figure.lambdas(&out.base) {
        for p in REFERENCE_P_GRID {
            let cfg = cell_cfg(out, lambda, p)?;
            let cell = out.cell(lambda, p).expect("coverage checked");
            let row = match figure {
                Figure::Fig2a => vec![p, expected_t(&cfg, false)?, expected_t(&cfg, true)?, cell.moments.e_t_prime],
                Figure::Fig2b => {
                    let off = no_overflow_stream(out, lambda, p, false).expect("coverage checked");
                    let on = no_overflow_stream(out, lambda, p, true).expect("coverage checked");
                    vec![
                        p,
                        expected_l(&cfg, false)?,
                        expected_l(&cfg, true)?,
                        cell.moments.e_l,
                        cell.moments.e_l_prime,
                        no_sensor_baseline(&cfg)?,
                        variance_d_no_overflow(&cfg, true, VdMethod::Compositional)?,
                        variance_d_no_overflow(&cfg, true, VdMethod::Exact)?,
                        off.v_d,
                        on.v_d,
                    ]
                }
                Figure::Fig3 | Figure::Fig4 => {
                    let off = no_overflow_stream(out, lambda, p, false).expect("coverage checked");
                    let on = no_overflow_stream(out, lambda, p, true).expect("coverage checked");
                    let base = no_sensor_baseline(&cfg)?;
                    let eq7 = improvement(&cfg, cfg.red_load(), base, variance_d_no_overflow(&cfg, true, VdMethod::Eq7Closed)?);
                    let exact = improvement(&cfg, cfg.red_load(), base, variance_d_no_overflow(&cfg, true, VdMethod::Exact)?);
                    let sim = improvement(&cfg, off.mean_true, off.v_d, on.v_d);
                    if figure == Figure::Fig3 {
                        vec![lambda, p, eq7.pct_delta_vmr, exact.pct_delta_vmr, sim.pct_delta_vmr]
                    } else {
                        vec![
                            lambda,
                            p,
                            eq7.pct_delta_cov,
                            exact.pct_delta_cov,
                            sim.pct_delta_cov,
                            eq7.delta_sqrt_vd,
                            exact.delta_sqrt_vd,
                            sim.delta_sqrt_vd,
                        ]
                    }
                }
                Figure::Fig5 | Figure::Fig7 => {
                    let model = model.as_ref().expect("coverage checked");
                    let off = overflow_off(out, lambda, p).expect("coverage checked");
                    let on = overflow_on(out, lambda, p).expect("coverage checked");
                    let a_off = approx_variance_d(&cfg, model, VdApprox::Eq14)?;
                    let a_on = approx_variance_d(&cfg, model, VdApprox::Eq16Sensor)?;
                    if figure == Figure::Fig5 {
                        let approx = improvement(&cfg, approx_expected_n(&cfg, model)?, a_off, a_on);
                        let sim = improvement(&cfg, off.mean_true, off.v_d, on.v_d);
                        vec![
                            cell.rho,
                            lambda,
                            p,
                            a_off,
                            a_on,
                            off.v_d,
                            on.v_d,
                            approx.pct_delta_vmr,
                            sim.pct_delta_vmr,
                            approx.pct_delta_cov,
                            sim.pct_delta_cov,
                        ]
                    } else {
                        vec![cell.rho, lambda, p, a_off, off.v_d, a_on, on.v_d]
                    }
                }
                Figure::Fig8 => {
                    let model = model.as_ref().expect("coverage checked");
                    let inputs = SteadyInputs::defaults(&cfg, model)?;
                    vec![
                        cell.rho,
                        lambda,
                        p,
                        approx_expected_n(&cfg, model)?,
                        steady_expected_n(&cfg, model, &inputs)?,
                        cell.moments.e_n,
                        expected_q(model, &cfg)?.value,
                        cell.moments.e_q,
                    ]
                }
            };
            table.rows.push(row);
        }
    }

    let mut tables = vec![];
    if figure == Figure::Fig7 {
        let mut fit = FigureTable::new("fig7_fit", &["sensor", "slope", "r2", "n"]);
        for (sensor, approx, sim) in [(0.0, "V_D_off_eq14", "sim_V_D_off"), (1.0, "V_D_on_eq16", "sim_V_D_on")] {
            let x = table.column(sim).expect("own column");
            let y = table.column(approx).expect("own column");
            let f = regression_through_origin(&x, &y);
            fit.rows.push(vec![sensor, f.slope, f.r2, f.n as f64]);
        }
        tables.push(table);
        tables.push(fit);
    } else {
        tables.push(table);
    }
    Ok(tables)
}

/// Writes `<dir>/<table>.csv` for each table of `figure`.
pub fn emit_figure_data(out: &SweepOutput, figure: Figure, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = figure_tables(out, figure)?;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        t.write_csv(BufWriter::new(File::create(&path)?))?;
        paths.push(path);
    }
    Ok(paths)
}
