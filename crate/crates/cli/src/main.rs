//! `iscc`: command-line front end for iscc-core.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use iscc_core::algorithms::{Outcome, ScaInit, SolveOptions, SolverKind};
use iscc_core::bench::{
    export_plot, fmt_num, full_algorithm, run_baseline, run_sweep, scenario_hash, Baseline, ConvergenceSeries, PlotData,
    SweepParam, SweepSpec,
};
use iscc_core::mcval::{angle_grid, validate_extended, validate_point, EchoSetup};
use iscc_core::metrics::{beampattern, BeamformingSolution, TargetMode};
use iscc_core::par::Execution;
use iscc_core::scenario::{Scenario, SystemConfig};
use iscc_core::{CMat, CVec, C64};

#[derive(Parser)]
#[command(name = "iscc", version, about = "CRB-minimizing beamforming for sensing, communication and offloading")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML file with SystemConfig fields (`_dbm` / `_db` variants accepted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; results go to stdout only when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Start from the full-size array (16 transmit, 20 receive antennas).
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Run trials and sweep cells on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Args, Clone)]
struct SolveFlags {
    #[arg(long, default_value_t = 1e-5)]
    tol_obj: f64,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    /// Bracket width of the CPU-frequency search, Hz.
    #[arg(long, default_value_t = 1e3)]
    f_search_tol: f64,
    /// `one-ao-pass` or `power-min`.
    #[arg(long, default_value = "one-ao-pass")]
    sca_init: ScaInit,
    #[arg(long, default_value_t = 1e-6)]
    rank_tol: f64,
    #[arg(long, default_value_t = 9)]
    f_grid: usize,
    /// Pin the CPU frequency (Hz) instead of searching it.
    #[arg(long)]
    f_fixed: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    tol_feas: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_gap: f64,
    /// Interior-point iterations per conic solve.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl SolveFlags {
    fn options(&self) -> Result<SolveOptions> {
        let mut o = SolveOptions {
            tol_obj: self.tol_obj,
            max_outer: self.max_outer,
            f_search_tol: self.f_search_tol,
            sca_init: self.sca_init,
            rank_tol: self.rank_tol,
            f_grid: self.f_grid,
            f_fixed: self.f_fixed,
            ..SolveOptions::default()
        };
        o.conic.tol_feas = self.tol_feas;
        o.conic.tol_gap = self.tol_gap;
        o.conic.max_iter = self.max_iter;
        if let Some(s) = self.time_limit {
            o = o.with_deadline(Instant::now() + Duration::from_secs_f64(s));
        }
        o.validate()?;
        Ok(o)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one scenario and report the CRB, slacks and convergence trace.
    Solve {
        #[arg(long, default_value = "point-ao")]
        solver: SolverKind,
        /// Target model for `nocomm`.
        #[arg(long, default_value = "point")]
        mode: TargetMode,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Sweep one parameter over seeds and algorithms.
    Sweep {
        /// n_users, power_budget (W), sinr_threshold (dB) or rate_min (bit/s).
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "point-ao,point-sca")]
        algorithms: Vec<SolverKind>,
        /// Number of seeds, counted up from `--seed`.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, default_value = "point")]
        mode: TargetMode,
        /// Wall-clock budget per cell, seconds.
        #[arg(long, default_value_t = 120.0)]
        cell_budget: f64,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Transmit beampattern of a solved design.
    Beampattern {
        #[arg(long, default_value = "point-ao")]
        solver: SolverKind,
        #[arg(long, default_value = "point")]
        mode: TargetMode,
        /// Angle step, degrees.
        #[arg(long, default_value_t = 0.5)]
        step_deg: f64,
        #[command(flatten)]
        flags: SolveFlags,
    },
    /// Monte-Carlo check of the CRB with an isotropic transmit covariance.
    ValidateCrb {
        #[arg(long, default_value = "extended")]
        mode: TargetMode,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Angle grid step of the point-target estimator, degrees.
        #[arg(long, default_value_t = 0.1)]
        grid_deg: f64,
        #[arg(long, default_value_t = 1e-5)]
        refine_tol: f64,
    },
    /// Full algorithm against offloading-only, local-only and the relaxation bound.
    Baselines {
        #[arg(long, default_value = "point")]
        mode: TargetMode,
        #[command(flatten)]
        flags: SolveFlags,
    },
}

fn load_config(c: &Common) -> Result<SystemConfig> {
    let base = if c.paper_scale {
        SystemConfig::paper_scale()
    } else {
        SystemConfig::default()
    };
    let cfg = match &c.config {
        Some(p) => SystemConfig::from_file(p, base)?,
        None => base,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn exec(c: &Common) -> Execution {
    if c.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn cvec_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

fn cmat_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn solution_json(sol: &BeamformingSolution) -> Value {
    json!({
        "f_hz": sol.f_hz,
        "w_c": sol.w_c.iter().map(cvec_json).collect::<Vec<_>>(),
        "w_r_cov": cmat_json(&sol.w_r_cov),
        "r_s": cmat_json(&sol.r_s),
    })
}

fn outcome_json(scn: &Scenario, seed: u64, solver: SolverKind, mode: TargetMode, out: &Outcome, wall: f64) -> Value {
    json!({
        "scenario_hash": scenario_hash(&scn.config, seed),
        "seed": seed,
        "solver": solver.name(),
        "mode": mode.to_string(),
        "crb": out.report.crb_value,
        "crb_db": out.report.crb_db(),
        "crb_bound": out.relaxed.crb_bound,
        "feasible": out.report.feasible,
        "f_hz": out.solution.f_hz,
        "status": out.trace.status,
        "outer_iterations": out.trace.objective.len(),
        "inner_iterations": out.trace.inner_iterations.iter().sum::<usize>(),
        "rank_ratios": out.relaxed.rank_ratios,
        "slacks": out.report.slacks,
        "objective_trace": out.trace.objective,
        "wall_s": wall,
    })
}

fn solve_one(scn: &Scenario, solver: SolverKind, mode: TargetMode, opts: &SolveOptions) -> Result<(Outcome, f64)> {
    let t0 = Instant::now();
    let out = solver
        .run(scn, mode, opts)
        .with_context(|| format!("{} failed", solver.name()))?;
    Ok((out, t0.elapsed().as_secs_f64()))
}

fn cmd_solve(c: &Common, solver: SolverKind, mode: TargetMode, flags: &SolveFlags) -> Result<()> {
    let scn = Scenario::generate(load_config(c)?, c.seed)?;
    let (out, wall) = solve_one(&scn, solver, mode, &flags.options()?)?;
    let mode = solver.mode(mode);
    let summary = outcome_json(&scn, c.seed, solver, mode, &out, wall);
    if let Some(dir) = &c.out {
        let mut full = summary.clone();
        full["solution"] = solution_json(&out.solution);
        write(dir, "solution.json", &serde_json::to_string_pretty(&full)?)?;
        if !out.trace.objective.is_empty() {
            let series = [ConvergenceSeries {
                label: solver.name().to_string(),
                crb: out.trace.objective.clone(),
            }];
            export_plot(&PlotData::Convergence(&series), dir, "convergence")?;
        }
        let pts = pattern(&scn, &out.solution, 0.5)?;
        export_plot(
            &PlotData::Beampattern {
                points: &pts,
                target: scn.config.target_angle_rad,
            },
            dir,
            "beampattern",
        )?;
        eprintln!("wrote results to {}", dir.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn pattern(scn: &Scenario, sol: &BeamformingSolution, step_deg: f64) -> Result<Vec<(f64, f64)>> {
    if !(step_deg > 0.0) {
        bail!("angle step must be positive");
    }
    let n = (180.0 / step_deg).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (-90.0 + i as f64 * step_deg).to_radians()).collect();
    Ok(beampattern(&sol.r_s, &grid, scn.config.element_spacing)?)
}

fn cmd_beampattern(c: &Common, solver: SolverKind, mode: TargetMode, step_deg: f64, flags: &SolveFlags) -> Result<()> {
    let scn = Scenario::generate(load_config(c)?, c.seed)?;
    let (out, _) = solve_one(&scn, solver, mode, &flags.options()?)?;
    let pts = pattern(&scn, &out.solution, step_deg)?;
    match &c.out {
        Some(dir) => {
            let e = export_plot(
                &PlotData::Beampattern {
                    points: &pts,
                    target: scn.config.target_angle_rad,
                },
                dir,
                "beampattern",
            )?;
            eprintln!("wrote {} and {}", e.csv.display(), e.svg.display());
        }
        None => print!("{}", iscc_core::metrics::beampattern_csv(&pts)),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    c: &Common,
    param: SweepParam,
    values: Vec<f64>,
    algorithms: Vec<SolverKind>,
    seeds: u64,
    mode: TargetMode,
    cell_budget: f64,
    flags: &SolveFlags,
) -> Result<()> {
    if !(cell_budget > 0.0) {
        bail!("cell budget must be positive");
    }
    let seeds: Vec<u64> = (c.seed..c.seed + seeds).collect();
    let mut spec = SweepSpec::new(load_config(c)?, param, values, algorithms, seeds);
    spec.out = c.out.clone();
    spec.nocomm_mode = mode;
    spec.opts = flags.options()?;
    spec.cell_budget = Duration::from_secs_f64(cell_budget);
    spec.exec = exec(c);
    let table = run_sweep(&spec)?;
    match &c.out {
        Some(dir) => {
            write(dir, "cells.csv", &table.cells_csv()?)?;
            write(dir, "timings.csv", &table.timings_csv()?)?;
            export_plot(&PlotData::Sweep(&table), dir, "summary")?;
            eprintln!("wrote results to {}", dir.display());
        }
        None => print!("{}", table.summary_csv()?),
    }
    Ok(())
}

fn cmd_validate(c: &Common, mode: TargetMode, trials: usize, grid_deg: f64, refine_tol: f64) -> Result<()> {
    if trials == 0 {
        bail!("need at least one trial");
    }
    let cfg = load_config(c)?;
    let hash = scenario_hash(&cfg, c.seed);
    let scn = Scenario::generate(cfg, c.seed)?;
    let m = scn.config.m_tx;
    let iso = CMat::identity(m, m) * C64::new(scn.config.power_budget_w / m as f64, 0.0);
    let setup = EchoSetup::from_scenario(&scn, iso);
    let batch = match mode {
        TargetMode::Point => {
            let g = angle_grid(-90f64.to_radians(), 90f64.to_radians(), grid_deg.to_radians());
            validate_point(&setup, trials, c.seed, &g, refine_tol, exec(c))?
        }
        TargetMode::Extended => validate_extended(&setup, trials, c.seed, exec(c))?,
    };
    let text = format!(
        "scenario_hash,mode,trials,crb,mse,ratio\n{hash},{mode},{trials},{},{},{}\n",
        fmt_num(batch.crb),
        fmt_num(batch.mse),
        fmt_num(batch.ratio)
    );
    print!("{text}");
    if let Some(dir) = &c.out {
        write(dir, "validate_crb.csv", &text)?;
    }
    Ok(())
}

fn cmd_baselines(c: &Common, mode: TargetMode, flags: &SolveFlags) -> Result<()> {
    let scn = Scenario::generate(load_config(c)?, c.seed)?;
    let opts = flags.options()?;
    let hash = scenario_hash(&scn.config, c.seed);
    let mut text = String::from("scenario_hash,design,status,crb,crb_db,feasible\n");
    let full = full_algorithm(&scn, mode, &opts).map(|o| o.report);
    let rows = std::iter::once(("full", full)).chain(Baseline::ALL.map(|b| (b.name(), run_baseline(b, &scn, mode, &opts))));
    for (name, r) in rows {
        let line = match r {
            Ok(rep) => format!(
                "{hash},{name},ok,{},{},{}\n",
                fmt_num(rep.crb_value),
                fmt_num(rep.crb_db()),
                rep.feasible
            ),
            Err(e) => {
                eprintln!("{name}: {e}");
                let status = match e {
                    iscc_core::Error::Infeasible { .. } => "infeasible",
                    iscc_core::Error::NumericalLimit(_) => "numerical_limit",
                    _ => "failed",
                };
                format!("{hash},{name},{status},,,false\n")
            }
        };
        text.push_str(&line);
    }
    print!("{text}");
    if let Some(dir) = &c.out {
        write(dir, "baselines.csv", &text)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let c = &cli.common;
    match cli.cmd {
        Cmd::Solve { solver, mode, flags } => cmd_solve(c, solver, mode, &flags),
        Cmd::Sweep {
            param,
            values,
            algorithms,
            seeds,
            mode,
            cell_budget,
            flags,
        } => cmd_sweep(c, param, values, algorithms, seeds, mode, cell_budget, &flags),
        Cmd::Beampattern {
            solver,
            mode,
            step_deg,
            flags,
        } => cmd_beampattern(c, solver, mode, step_deg, &flags),
        Cmd::ValidateCrb {
            mode,
            trials,
            grid_deg,
            refine_tol,
        } => cmd_validate(c, mode, trials, grid_deg, refine_tol),
        Cmd::Baselines { mode, flags } => cmd_baselines(c, mode, &flags),
    }
}
