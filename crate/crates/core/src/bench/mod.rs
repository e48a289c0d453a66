//! Seeded parameter sweeps, reference baselines and artifact export.
//!
//! A sweep solves every `(value, algorithm, seed)` cell independently; cells
//! are executed in a work pool but collected in spec order, and the scenario
//! of a cell depends only on its value and seed, so output files are
//! byte-identical across runs and execution modes. Wall-clock times vary
//! between runs and therefore go to a separate timings file.

mod export;

pub use export::{
    export_plot, fmt_num, ConvergenceSeries, Exported, PlotData, PlotKind, CELL_COLUMNS, CONVERGENCE_COLUMNS, SUMMARY_COLUMNS,
    TIMING_COLUMNS,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::algorithms::{
    solve_extended_sca, solve_local_only, solve_point_sca, Outcome, SolveOptions, SolverKind,
};
use crate::error::{Error, Result};
use crate::metrics::{relaxed_slacks, BeamformingSolution, CrbReport, TargetMode};
use crate::par::{map_slice, Execution};
use crate::scenario::{db_to_linear, Scenario, SystemConfig};

/// Default wall-clock budget of one sweep cell.
pub const CELL_BUDGET: Duration = Duration::from_secs(120);

/// Stable 64-bit FNV-1a fingerprint of a configuration and channel seed.
pub fn scenario_hash(cfg: &SystemConfig, seed: u64) -> String {
    let text = serde_json::to_string(cfg).expect("configs always serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes().chain(seed.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Number of users `K`.
    NUsers,
    /// Transmit power budget, W.
    PowerBudget,
    /// Common SINR threshold of every user, dB.
    SinrThreshold,
    /// Required process rate, bit/s.
    RateMin,
}

impl SweepParam {
    pub const ALL: [SweepParam; 4] = [
        SweepParam::NUsers,
        SweepParam::PowerBudget,
        SweepParam::SinrThreshold,
        SweepParam::RateMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NUsers => "n_users",
            SweepParam::PowerBudget => "power_budget",
            SweepParam::SinrThreshold => "sinr_threshold",
            SweepParam::RateMin => "rate_min",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let cfg = match self {
            SweepParam::NUsers => {
                if !(value >= 0.0) || value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!("user count must be a whole number, got {value}")));
                }
                base.clone().with_users(value as usize)
            }
            SweepParam::PowerBudget => SystemConfig {
                power_budget_w: value,
                ..base.clone()
            },
            SweepParam::SinrThreshold => base.clone().with_sinr_threshold(db_to_linear(value)),
            SweepParam::RateMin => SystemConfig {
                rate_min_bps: value,
                ..base.clone()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub algorithms: Vec<SolverKind>,
    pub seeds: Vec<u64>,
    /// Directory the CLI writes results to.
    pub out: Option<PathBuf>,
    /// Target model used by `nocomm` cells.
    pub nocomm_mode: TargetMode,
    pub opts: SolveOptions,
    pub cell_budget: Duration,
    pub exec: Execution,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, param: SweepParam, values: Vec<f64>, algorithms: Vec<SolverKind>, seeds: Vec<u64>) -> Self {
        Self {
            base,
            param,
            values,
            algorithms,
            seeds,
            out: None,
            nocomm_mode: TargetMode::Point,
            opts: SolveOptions::default(),
            cell_budget: CELL_BUDGET,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument("a sweep needs values, algorithms and seeds".into()));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::InvalidArgument("sweep values must be strictly monotone".into()));
        }
        self.base.validate()?;
        self.opts.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Solved,
    Infeasible,
    NumericalLimit,
    Failed,
}

impl CellStatus {
    fn of(e: &Error) -> Self {
        match e {
            Error::Infeasible { .. } => CellStatus::Infeasible,
            Error::NumericalLimit(_) => CellStatus::NumericalLimit,
            _ => CellStatus::Failed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Solved => "solved",
            CellStatus::Infeasible => "infeasible",
            CellStatus::NumericalLimit => "numerical_limit",
            CellStatus::Failed => "failed",
        }
    }
}

/// One solved (or failed) sweep cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub value: f64,
    pub algorithm: SolverKind,
    pub mode: TargetMode,
    pub seed: u64,
    pub scenario_hash: String,
    pub status: CellStatus,
    pub message: String,
    pub crb: Option<f64>,
    pub crb_bound: Option<f64>,
    pub f_hz: Option<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub min_slack: Option<f64>,
    pub wall_s: f64,
    pub solution: Option<BeamformingSolution>,
}

impl Cell {
    pub fn crb_db(&self) -> Option<f64> {
        self.crb.map(|c| 10.0 * c.log10())
    }
}

/// Per-(value, algorithm) aggregate over the solved seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub value: f64,
    pub algorithm: SolverKind,
    pub n_ok: usize,
    pub n_cells: usize,
    pub crb_mean: Option<f64>,
    pub crb_std: Option<f64>,
    pub crb_db_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub param: SweepParam,
    pub cells: Vec<Cell>,
}

impl SweepTable {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = Vec::new();
        for cell in &self.cells {
            if rows.iter().any(|r| r.value == cell.value && r.algorithm == cell.algorithm) {
                continue;
            }
            let group: Vec<&Cell> = self
                .cells
                .iter()
                .filter(|c| c.value == cell.value && c.algorithm == cell.algorithm)
                .collect();
            let ok: Vec<f64> = group.iter().filter_map(|c| c.crb).collect();
            let n = ok.len();
            let mean = (n > 0).then(|| ok.iter().sum::<f64>() / n as f64);
            let std = mean.map(|m| {
                if n < 2 {
                    0.0
                } else {
                    (ok.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                }
            });
            let db_mean = (n > 0).then(|| ok.iter().map(|v| 10.0 * v.log10()).sum::<f64>() / n as f64);
            rows.push(SummaryRow {
                value: cell.value,
                algorithm: cell.algorithm,
                n_ok: n,
                n_cells: group.len(),
                crb_mean: mean,
                crb_std: std,
                crb_db_mean: db_mean,
            });
        }
        rows
    }

    /// One row per cell; columns listed in [`CELL_COLUMNS`].
    pub fn cells_csv(&self) -> Result<String> {
        export::cells_csv(self)
    }

    /// One row per (value, algorithm); columns listed in [`SUMMARY_COLUMNS`].
    pub fn summary_csv(&self) -> Result<String> {
        export::summary_csv(self)
    }

    /// Wall-clock seconds per cell.
    pub fn timings_csv(&self) -> Result<String> {
        export::timings_csv(self)
    }
}

fn solve_cell(spec: &SweepSpec, value: f64, algorithm: SolverKind, seed: u64) -> Cell {
    let start = Instant::now();
    let mode = algorithm.mode(spec.nocomm_mode);
    let mut cell = Cell {
        value,
        algorithm,
        mode,
        seed,
        scenario_hash: String::new(),
        status: CellStatus::Failed,
        message: String::new(),
        crb: None,
        crb_bound: None,
        f_hz: None,
        outer_iterations: 0,
        inner_iterations: 0,
        min_slack: None,
        wall_s: 0.0,
        solution: None,
    };
    let opts = spec.opts.clone().with_deadline(start + spec.cell_budget);
    let result = spec.param.apply(&spec.base, value).and_then(|cfg| {
        cell.scenario_hash = scenario_hash(&cfg, seed);
        let scn = Scenario::generate(cfg, seed)?;
        algorithm.run(&scn, mode, &opts)
    });
    match result {
        Ok(out) => fill(&mut cell, out),
        Err(e) => {
            cell.status = CellStatus::of(&e);
            cell.message = e.to_string();
        }
    }
    cell.wall_s = start.elapsed().as_secs_f64();
    cell
}

fn fill(cell: &mut Cell, out: Outcome) {
    cell.status = CellStatus::Solved;
    cell.crb = Some(out.report.crb_value);
    cell.crb_bound = Some(out.relaxed.crb_bound);
    cell.f_hz = Some(out.solution.f_hz);
    cell.outer_iterations = out.trace.objective.len();
    cell.inner_iterations = out.trace.inner_iterations.iter().sum();
    cell.min_slack = Some(out.report.min_slack());
    cell.solution = Some(out.solution);
}

/// Solves every cell; failures are recorded in the table, never raised.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &v in &spec.values {
        for &a in &spec.algorithms {
            for &s in &spec.seeds {
                jobs.push((v, a, s));
            }
        }
    }
    let cells = map_slice(spec.exec, &jobs, |&(v, a, s)| solve_cell(spec, v, a, s));
    Ok(SweepTable {
        param: spec.param,
        cells,
    })
}

/// Reference designs the proposed algorithms are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// CPU frequency pinned to zero: the whole task is offloaded.
    OffloadingOnly,
    /// Server beam off: the whole task is computed locally.
    LocalOnly,
    /// The relaxed optimum before rank-one recovery.
    SdrBound,
}

impl Baseline {
    pub const ALL: [Baseline; 3] = [Baseline::OffloadingOnly, Baseline::LocalOnly, Baseline::SdrBound];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::OffloadingOnly => "offloading_only",
            Baseline::LocalOnly => "local_only",
            Baseline::SdrBound => "sdr_bound",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

/// The SCA design of the given target model: the reference full algorithm.
pub fn full_algorithm(scn: &Scenario, mode: TargetMode, opts: &SolveOptions) -> Result<Outcome> {
    match mode {
        TargetMode::Point => solve_point_sca(scn, opts),
        TargetMode::Extended => solve_extended_sca(scn, opts),
    }
}

pub fn run_baseline(baseline: Baseline, scn: &Scenario, mode: TargetMode, opts: &SolveOptions) -> Result<CrbReport> {
    match baseline {
        Baseline::OffloadingOnly => {
            let pinned = SolveOptions {
                f_fixed: Some(0.0),
                ..opts.clone()
            };
            Ok(full_algorithm(scn, mode, &pinned)?.report)
        }
        Baseline::LocalOnly => Ok(solve_local_only(scn, mode, opts)?.report),
        Baseline::SdrBound => {
            let out = full_algorithm(scn, mode, opts)?;
            let r = &out.relaxed;
            let slacks = relaxed_slacks(scn, &r.w, &r.r_s, r.f_hz)?;
            let feasible = slacks.iter().all(|s| s.value >= -crate::metrics::SLACK_TOL);
            Ok(CrbReport {
                crb_value: r.crb_bound,
                mode,
                feasible,
                slacks,
            })
        }
    }
}

#[cfg(test)]
mod tests;
