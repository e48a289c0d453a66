//! End-to-end acceptance checks. Each test writes one `PASS`/`FAIL` line to
//! stderr (bypassing the capture of the test harness) before asserting.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use iscc_core::algorithms::{full_power_offload_suffices, solve_extended_ao, solve_point_ao, solve_point_nocomm, solve_point_nocomm_sdp, solve_point_sca};
use iscc_core::algorithms::{AlgoStatus, Outcome, SolveOptions, SolverKind};
use iscc_core::bench::{full_algorithm, run_baseline, run_sweep, Baseline, SweepParam, SweepSpec, SweepTable};
use iscc_core::conic::{solve, ConicProblem, LinExpr, SolverOptions};
use iscc_core::linalg::hermitian_eigen;
use iscc_core::mcval::{angle_grid, validate_extended, validate_point, ArrayShape, EchoSetup};
use iscc_core::metrics::{beampattern, TargetMode};
use iscc_core::par::Execution;
use iscc_core::rng::{self, streams};
use iscc_core::scenario::{steering_derivative, steering_vector, Scenario, SystemConfig};
use iscc_core::{CMat, C64};

const SEEDS: u64 = 20;

fn report(n: usize, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "\n{tag} criterion {n}: {detail}");
    assert!(ok, "criterion {n}: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct PointRuns {
    ao: Vec<Outcome>,
    sca: Vec<Outcome>,
}

/// Point-target AO and SCA at desk scale, K = 3, seeds 0..20.
fn point_runs() -> &'static PointRuns {
    static RUNS: OnceLock<PointRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let opts = SolveOptions::default();
        let scns: Vec<Scenario> = (0..SEEDS)
            .map(|s| Scenario::generate(SystemConfig::default(), s).unwrap())
            .collect();
        PointRuns {
            ao: scns.iter().map(|s| solve_point_ao(s, &opts).unwrap()).collect(),
            sca: scns.iter().map(|s| solve_point_sca(s, &opts).unwrap()).collect(),
        }
    })
}

struct Trends {
    point: Vec<SweepTable>,
    extended: Vec<SweepTable>,
}

const RATES: [f64; 4] = [1e6, 3e6, 5e6, 8e6];

fn trend_specs(kind: SolverKind, seeds: u64) -> Vec<SweepTable> {
    [
        (SweepParam::NUsers, vec![0.0, 1.0, 2.0, 3.0]),
        (SweepParam::SinrThreshold, vec![5.0, 10.0, 15.0, 20.0]),
        (SweepParam::RateMin, RATES.to_vec()),
    ]
    .into_iter()
    .map(|(p, values)| {
        let spec = SweepSpec::new(SystemConfig::default(), p, values, vec![kind], (0..seeds).collect());
        run_sweep(&spec).unwrap()
    })
    .collect()
}

fn trends() -> &'static Trends {
    static T: OnceLock<Trends> = OnceLock::new();
    T.get_or_init(|| Trends {
        point: trend_specs(SolverKind::PointSca, 5),
        extended: trend_specs(SolverKind::ExtAo, 3),
    })
}

#[test]
fn criterion_01_conic_solver_matches_eigenvalue_oracle() {
    let mut worst_obj = 0.0f64;
    let mut worst_gap = 0.0f64;
    let mut slowest = Duration::ZERO;
    let mut ok = true;
    for seed in 0..50u64 {
        let n = 2 + (seed % 5) as usize;
        let mut r = rng::stream(seed, streams::TEST);
        let a = rng::complex_normal_mat(&mut r, n, n, 1.0);
        let c = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        let lmin = *hermitian_eigen(&c).values.last().unwrap();
        let mut p = ConicProblem::new();
        let x = p.add_psd(n, "X");
        p.set_objective(LinExpr::re_trace(x, &c));
        p.add_eq(LinExpr::trace(x, n), 1.0, "trace");
        let start = Instant::now();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let dt = start.elapsed();
        let e = (s.primal_objective - lmin).abs() / (1.0 + lmin.abs());
        let g = s.gap / (1.0 + s.primal_objective.abs());
        worst_obj = worst_obj.max(e);
        worst_gap = worst_gap.max(g);
        slowest = slowest.max(dt);
        ok &= e <= 1e-7 && g <= 1e-7 && dt < Duration::from_secs(1);
    }
    report(
        1,
        ok,
        format!("50 problems, max objective err {worst_obj:.2e}, max gap {worst_gap:.2e}, slowest {slowest:.2?}"),
    );
}

fn isotropic_setup(m: usize, t: usize, scale: f64) -> EchoSetup {
    EchoSetup {
        shape: ArrayShape {
            m_tx: m,
            m_rx: m,
            spacing: 0.5,
        },
        theta: 0.0,
        alpha: C64::new(1.0, 0.0),
        r_s: CMat::identity(m, m) * C64::new(scale / m as f64, 0.0),
        n_symbols: t,
        noise: 1.0,
    }
}

#[test]
fn criterion_02_extended_crb_matches_least_squares() {
    let start = Instant::now();
    let b = validate_extended(&isotropic_setup(4, 64, 1.0), 1000, 2, Execution::Parallel).unwrap();
    let dt = start.elapsed();
    let ok = (0.95..=1.05).contains(&b.ratio) && dt < Duration::from_secs(30);
    report(2, ok, format!("1000 trials, MSE/CRB = {:.4}, {dt:.2?}", b.ratio));
}

#[test]
fn criterion_03_point_crb_bounds_the_mle() {
    let start = Instant::now();
    let grid = angle_grid(-90f64.to_radians(), 90f64.to_radians(), 0.1f64.to_radians());
    let mut ok = true;
    let mut parts = Vec::new();
    for snr_db in [0.0, 10.0, 20.0, 30.0, 40.0, 50.0] {
        let setup = isotropic_setup(4, 64, 10f64.powf(snr_db / 10.0) / 64.0);
        let b = validate_point(&setup, 500, 3, &grid, 1e-9, Execution::Parallel).unwrap();
        ok &= b.ratio >= 0.95;
        if snr_db >= 40.0 {
            ok &= (0.9..=1.3).contains(&b.ratio);
        }
        parts.push(format!("{snr_db:.0} dB: {:.3}", b.ratio));
    }
    let dt = start.elapsed();
    ok &= dt < Duration::from_secs(120);
    report(3, ok, format!("MSE/CRB over 500 trials per SNR [{}], {dt:.2?}", parts.join(", ")));
}

#[test]
fn criterion_04_no_user_closed_form() {
    let opts = SolveOptions::default();
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut used = 0;
    for seed in 0..SEEDS {
        let scn = Scenario::generate(SystemConfig::default().with_users(0), seed).unwrap();
        if !full_power_offload_suffices(&scn) {
            continue;
        }
        used += 1;
        let closed = solve_point_nocomm(&scn, &opts).unwrap();
        ok &= closed.trace.status == AlgoStatus::ClosedForm && closed.solution.f_hz == 0.0;
        let sdp = solve_point_nocomm_sdp(&scn, &opts).unwrap();
        let e = rel(sdp.report.crb_value, closed.report.crb_value);
        worst = worst.max(e);
        ok &= e <= 1e-6;
    }
    ok &= used > 0;
    report(4, ok, format!("{used} of {SEEDS} seeds meet the condition, max relative CRB error {worst:.2e}"));
}

#[test]
fn criterion_05_relaxed_beams_are_rank_one() {
    let runs = point_runs();
    let worst = runs
        .ao
        .iter()
        .chain(&runs.sca)
        .flat_map(|o| o.relaxed.rank_ratios.iter().copied())
        .fold(0.0f64, f64::max);
    report(5, worst <= 1e-6, format!("{SEEDS} seeds x (AO, SCA), K = 3, max lambda2/lambda1 {worst:.2e}"));
}

#[test]
fn criterion_06_extended_construction_is_lossless() {
    let opts = SolveOptions::default();
    let mut worst_slack = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut worst_bound = 0.0f64;
    for seed in 0..5 {
        let scn = Scenario::generate(SystemConfig::default(), seed).unwrap();
        let o = solve_extended_ao(&scn, &opts).unwrap();
        let relaxed = o.trace.slacks.last().unwrap();
        for s in &o.report.slacks {
            let r = relaxed.iter().find(|x| x.name == s.name).unwrap();
            worst_slack = worst_slack.max((s.value - r.value).abs() / r.value.abs().max(1.0));
        }
        worst_obj = worst_obj.max(rel(o.report.crb_value, *o.trace.objective.last().unwrap()));
        worst_bound = worst_bound.max(rel(o.report.crb_value, o.relaxed.crb_bound));
    }
    let ok = worst_slack <= 1e-8 && worst_obj <= 1e-8 && worst_bound <= 1e-6;
    report(
        6,
        ok,
        format!("5 seeds, slack diff {worst_slack:.2e}, objective diff {worst_obj:.2e}, bound gap {worst_bound:.2e}"),
    );
}

#[test]
fn criterion_07_outer_loops_converge_monotonically() {
    let runs = point_runs();
    let all = runs.ao.iter().chain(&runs.sca);
    let monotone = all.clone().all(|o| o.trace.is_monotone());
    let converged = all.clone().all(|o| o.trace.status == AlgoStatus::Converged && o.trace.objective.len() <= 100);
    let most = all.map(|o| o.trace.objective.len()).max().unwrap();
    let ao = mean(&runs.ao.iter().map(|o| o.report.crb_value).collect::<Vec<_>>());
    let sca = mean(&runs.sca.iter().map(|o| o.report.crb_value).collect::<Vec<_>>());
    let ok = monotone && converged && sca <= ao * (1.0 + 1e-3);
    report(
        7,
        ok,
        format!("monotone {monotone}, converged {converged} (max {most} outer), mean CRB AO {ao:.5e} SCA {sca:.5e}"),
    );
}

#[test]
fn criterion_08_crb_halves_with_double_power() {
    let opts = SolveOptions::default();
    let loose = SystemConfig {
        rate_min_bps: 1e3,
        ..SystemConfig::default().with_sinr_threshold(1e-3)
    };
    let mut ratios = Vec::new();
    for seed in 0..3 {
        let one = Scenario::generate(loose.clone(), seed).unwrap();
        let two = Scenario::generate(
            SystemConfig {
                power_budget_w: 2.0 * loose.power_budget_w,
                ..loose.clone()
            },
            seed,
        )
        .unwrap();
        let a = full_algorithm(&one, TargetMode::Point, &opts).unwrap().report.crb_value;
        let b = full_algorithm(&two, TargetMode::Point, &opts).unwrap().report.crb_value;
        ratios.push(b / a);
    }
    let ok = ratios.iter().all(|r| (r - 0.5).abs() <= 0.005);
    report(8, ok, format!("CRB(2P0)/CRB(P0) = {ratios:.5?}"));
}

/// Largest drop of the seed-averaged CRB between consecutive sweep values,
/// in units of the standard deviation at the lower value.
fn worst_violation(t: &SweepTable) -> (bool, f64) {
    let rows = t.summary();
    let all_ok = rows.iter().all(|r| r.n_ok == r.n_cells);
    let worst = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].crb_mean.unwrap_or(f64::NAN), w[1].crb_mean.unwrap_or(f64::NAN));
            let sd = w[0].crb_std.unwrap_or(0.0).max(f64::MIN_POSITIVE);
            (a - b) / sd
        })
        .fold(f64::NEG_INFINITY, f64::max);
    (all_ok, worst)
}

#[test]
fn criterion_09_crb_grows_with_every_demand() {
    let t = trends();
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, tables) in [("point", &t.point), ("extended", &t.extended)] {
        for table in tables.iter() {
            let (solved, v) = worst_violation(table);
            ok &= solved && v <= 1.0;
            parts.push(format!("{label}/{}: {v:+.2} sd", table.param.name()));
        }
    }
    report(9, ok, format!("worst drop [{}]", parts.join(", ")));
}

#[test]
fn criterion_10_offloading_only_crossover() {
    let opts = SolveOptions::default();
    let mut ok = true;
    let mut worst_small = 0.0f64;
    let small = SystemConfig {
        rate_min_bps: 1e4,
        ..SystemConfig::default()
    };
    for seed in 0..3 {
        let scn = Scenario::generate(small.clone(), seed).unwrap();
        let full = full_algorithm(&scn, TargetMode::Point, &opts).unwrap().report.crb_value;
        let off = run_baseline(Baseline::OffloadingOnly, &scn, TargetMode::Point, &opts).unwrap();
        let e = rel(off.crb_value, full);
        worst_small = worst_small.max(e);
        ok &= off.feasible && e <= 1e-3;
    }
    // offloading alone cannot reach 20 Mbit/s on the weakest seeds
    let high = 2e7;
    let mut beats = Vec::new();
    let mut out_of_reach = 0;
    for seed in 0..3 {
        let scn = Scenario::generate(
            SystemConfig {
                rate_min_bps: high,
                ..SystemConfig::default()
            },
            seed,
        )
        .unwrap();
        let full = full_algorithm(&scn, TargetMode::Point, &opts).map(|o| o.report.crb_value);
        let off = run_baseline(Baseline::OffloadingOnly, &scn, TargetMode::Point, &opts)
            .ok()
            .filter(|r| r.feasible)
            .map_or(f64::INFINITY, |r| r.crb_value);
        out_of_reach += usize::from(off.is_infinite());
        let strictly = matches!(full, Ok(f) if f < off);
        ok &= strictly;
        beats.push(strictly);
    }
    ok &= out_of_reach > 0;
    report(
        10,
        ok,
        format!(
            "R_min 1e4: max gap {worst_small:.2e}; R_min {high:e}: offloading-only out of reach on {out_of_reach}/3 seeds, full strictly better {beats:?}"
        ),
    );
}

#[test]
fn criterion_11_beampattern_peaks_at_target() {
    let grid = angle_grid(-90f64.to_radians(), 90f64.to_radians(), 0.1f64.to_radians());
    let runs = point_runs();
    let worst = runs
        .ao
        .iter()
        .chain(&runs.sca)
        .map(|o| {
            let pts = beampattern(&o.solution.r_s, &grid, 0.5).unwrap();
            let peak = pts.iter().copied().fold((0.0, f64::NEG_INFINITY), |b, p| if p.1 > b.1 { p } else { b });
            peak.0.to_degrees().abs()
        })
        .fold(0.0f64, f64::max);
    report(11, worst <= 0.5, format!("{} designs, max |argmax| {worst:.2} deg", 2 * SEEDS));
}

#[test]
fn criterion_12_derivative_and_schur_identity() {
    let mut r = rng::stream(12, streams::TEST);
    let mut worst_fd = 0.0f64;
    for _ in 0..100 {
        let theta = (rng::uniform(&mut r) - 0.5) * 3.0;
        let n = 1 + (rng::uniform(&mut r) * 16.0) as usize;
        let delta = 0.1 + rng::uniform(&mut r);
        let h = 1e-6;
        let fd = (steering_vector(theta + h, n, delta).unwrap() - steering_vector(theta - h, n, delta).unwrap())
            / C64::new(2.0 * h, 0.0);
        let d = steering_derivative(theta, n, delta).unwrap();
        worst_fd = worst_fd.max((fd - &d).norm() / d.norm().max(1.0));
    }
    let runs = point_runs();
    let mut worst_schur = 0.0f64;
    for (i, o) in runs.ao.iter().chain(&runs.sca).enumerate() {
        let scn = Scenario::generate(SystemConfig::default(), i as u64 % SEEDS).unwrap();
        worst_schur = worst_schur.max(o.relaxed.schur_mismatch(&scn).unwrap());
    }
    let ok = worst_fd <= 1e-6 && worst_schur <= 1e-6;
    report(
        12,
        ok,
        format!("finite-difference err {worst_fd:.2e} over 100 inputs, Schur mismatch {worst_schur:.2e} over {} solves", 2 * SEEDS),
    );
}

#[test]
fn criterion_13_rate_stress_costs_little() {
    let t = trends();
    let degradation = |tables: &[SweepTable]| {
        let rows = tables.iter().find(|t| t.param == SweepParam::RateMin).unwrap().summary();
        let at = |v: f64| rows.iter().find(|r| r.value == v).and_then(|r| r.crb_db_mean).unwrap_or(f64::NAN);
        at(5e6) - at(1e6)
    };
    let p = degradation(&t.point);
    let e = degradation(&t.extended);
    let ok = p <= 2.0 && e <= 2.0;
    report(13, ok, format!("1 -> 5 Mbit/s at K = 3: point {p:.3} dB, extended {e:.3} dB (seed-averaged)"));
}
