//! Point-target designs.

use super::common::{block1_values, finish, run_ao, run_sca, search_f, Design};
use super::model::{Model, Objective, Offload, Spec, State};
use super::{checked_report, extract_rank_one, AlgoStatus, AlgoTrace, Outcome, RelaxedData, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec, C64};
use crate::metrics::{crb_for, relaxed_slacks, BeamformingSolution, TargetMode};
use crate::scenario::Scenario;

const POINT: Design = Design {
    mode: TargetMode::Point,
    users: true,
};

/// Alternating optimization of the server beam with `f` (block 1) and the
/// user beams (block 2), each against the Schur epigraph of the CRB.
pub fn solve_point_ao(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    let model = Model::new(scn)?;
    let run = run_ao(&model, POINT, opts, opts.max_outer)?;
    finish(&model, TargetMode::Point, run, opts)
}

/// Joint SCA design: every beam, `gamma_p` and `t` in one conic problem per
/// frequency probe, with the offload ratio constraint replaced by its convex
/// lower bound around the previous iterate.
pub fn solve_point_sca(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    let model = Model::new(scn)?;
    let run = run_sca(&model, POINT, opts)?;
    finish(&model, TargetMode::Point, run, opts)
}

fn require_no_users(scn: &Scenario) -> Result<()> {
    if scn.config.sinr_thresholds.iter().any(|&g| g > 0.0) {
        return Err(Error::InvalidArgument(
            "the no-communication design needs K = 0 or all SINR thresholds zero".into(),
        ));
    }
    Ok(())
}

/// Whether offloading alone, with all power on the target beam, meets the
/// required process rate.
pub fn full_power_offload_suffices(scn: &Scenario) -> bool {
    let cfg = &scn.config;
    let h = &scn.channels.h[scn.channels.server()];
    let gain = h.dotc(&scn.steering.a).norm_sqr();
    let sinr = cfg.power_budget_w * gain / (cfg.m_tx as f64 * cfg.noise_comm_w);
    cfg.bandwidth_hz * (1.0 + sinr).log2() >= cfg.rate_min_bps
}

/// No-user design: the steered full-power beam when it already meets the
/// rate, otherwise the relaxed problem over the server beam and `f`.
pub fn solve_point_nocomm(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    require_no_users(scn)?;
    if !full_power_offload_suffices(scn) {
        return solve_point_nocomm_sdp(scn, opts);
    }
    let cfg = &scn.config;
    let a = &scn.steering.a;
    let w_s: CVec = a * C64::new((cfg.power_budget_w / a.norm_squared()).sqrt(), 0.0);
    let mut w = vec![CVec::zeros(cfg.m_tx); cfg.n_users];
    w.push(w_s.clone());
    let solution = BeamformingSolution::without_radar(w, 0.0)?;
    let report = checked_report(scn, &solution, TargetMode::Point)?;
    let mut relaxed_w = vec![CMat::zeros(cfg.m_tx, cfg.m_tx); cfg.n_users];
    relaxed_w.push(outer(&w_s));
    let r_s = solution.r_s.clone();
    let trace = AlgoTrace {
        objective: vec![report.crb_value],
        slacks: vec![report.slacks.clone()],
        inner_iterations: vec![0],
        status: AlgoStatus::ClosedForm,
    };
    Ok(Outcome {
        relaxed: RelaxedData {
            rank_ratios: vec![0.0; relaxed_w.len()],
            w: relaxed_w,
            crb_bound: report.crb_value,
            r_s,
            t_star: None,
            f_hz: 0.0,
        },
        solution,
        report,
        trace,
        radar_beams: CMat::zeros(cfg.m_tx, 0),
    })
}

/// The relaxed no-user problem, maximizing `|a^H w|^2`, solved regardless
/// of whether the closed form applies.
pub fn solve_point_nocomm_sdp(scn: &Scenario, opts: &SolveOptions) -> Result<Outcome> {
    require_no_users(scn)?;
    opts.validate()?;
    let model = Model::new(scn)?;
    let s = model.server();
    let mut vary_w = vec![false; model.k + 1];
    vary_w[s] = true;
    let spec = Spec {
        vary_w,
        vary_d: false,
        objective: Objective::Steering,
        offload: Offload::Direct,
        boost: 1.0,
    };
    let cur = State::zeros(model.m, model.k + 1);
    let (solved, inner) = search_f(&model, &spec, &cur, opts, opts.f_search_tol, None)?;
    let st = solved.state;
    let w_nat: Vec<CMat> = st.w.iter().map(|w| model.to_natural(w)).collect();
    let r = model.to_natural(&st.r());
    let lead = extract_rank_one(&w_nat[s], opts.rank_tol);
    let mut beams = vec![CVec::zeros(model.m); model.k];
    beams.push(lead.vector);
    let solution = BeamformingSolution::without_radar(beams, st.f)?;
    let report = checked_report(scn, &solution, TargetMode::Point)?;
    let trace = AlgoTrace {
        objective: vec![crb_for(scn, &r, TargetMode::Point)?],
        slacks: vec![relaxed_slacks(scn, &w_nat, &r, st.f)?],
        inner_iterations: vec![inner],
        status: AlgoStatus::Converged,
    };
    let mut rank_ratios = vec![0.0; model.k];
    rank_ratios.push(lead.ratio);
    Ok(Outcome {
        relaxed: RelaxedData {
            crb_bound: trace.objective[0],
            w: w_nat,
            r_s: r,
            rank_ratios,
            t_star: None,
            f_hz: st.f,
        },
        solution,
        report,
        trace,
        radar_beams: CMat::zeros(model.m, 0),
    })
}

/// `|a^H w|^2` of the server beam, the objective of the no-user design.
pub fn steering_gain(scn: &Scenario, sol: &BeamformingSolution) -> f64 {
    scn.steering.a.dotc(sol.server_beam()).norm_sqr()
}

/// Block-1 value function (server beam and CPU frequency, the other beams
/// at their initial values) on an `n`-point frequency grid.
pub fn block1_profile(scn: &Scenario, mode: TargetMode, opts: &SolveOptions, n: usize) -> Result<Vec<(f64, f64)>> {
    let model = Model::new(scn)?;
    block1_values(&model, Design { mode, users: true }, opts, n)
}
