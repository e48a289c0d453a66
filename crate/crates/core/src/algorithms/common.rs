//! Outer loops shared by the point and extended designs.

use super::golden::{minimize, Minimum};
use super::model::{solve_at, Linearization, Model, Objective, Offload, Solved, Spec, State};
use super::{checked_report, extract_rank_one, recover, AlgoStatus, AlgoTrace, Outcome, RelaxedData, SolveOptions};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::metrics::{crb_for, relaxed_slacks, TargetMode};

/// Minimizes over `f` in `[0, f_hi]`, or evaluates once at the pinned
/// frequency when the options fix it.
fn over_f<T, F>(model: &Model, opts: &SolveOptions, tol: f64, hint: Option<f64>, mut f: F) -> Result<Minimum<T>>
where
    F: FnMut(f64) -> Result<(f64, T)>,
{
    match opts.f_fixed {
        Some(x) => {
            let (value, payload) = f(x)?;
            Ok(Minimum {
                x,
                value,
                payload,
                evaluations: 1,
            })
        }
        None => minimize(0.0, model.f_hi, tol, opts.f_grid, hint, f),
    }
}

/// Golden-section search over `f` with one conic solve per probe.
pub(crate) fn search_f(
    model: &Model,
    spec: &Spec,
    cur: &State,
    opts: &SolveOptions,
    tol: f64,
    hint: Option<f64>,
) -> Result<(Solved, usize)> {
    let copts = opts.conic_options();
    let mut iterations = 0;
    let best = over_f(model, opts, tol, hint, |f| {
        let s = solve_at(model, spec, cur, f, &copts)?;
        iterations += s.iterations;
        Ok((s.value, s))
    })?;
    Ok((best.payload, iterations))
}

fn objective_for(mode: TargetMode) -> Objective {
    match mode {
        TargetMode::Point => Objective::Schur,
        TargetMode::Extended => Objective::TraceInverse,
    }
}

/// SINR targets of the starting point are raised by this factor when the
/// budget allows, so later subproblems do not start on a razor-thin
/// feasible set.
const INIT_BOOST: f64 = 2.0;

/// Starting point: the CPU frequency of the minimum-power feasible design
/// (with some SINR headroom when possible), then every beam re-optimized
/// against the sensing objective at that frequency.
pub(crate) fn initialize(model: &Model, design: Design, opts: &SolveOptions) -> Result<(State, Option<f64>)> {
    let feasible = feasible_point(model, opts)?;
    let mut spec = design.joint(model, Linearization::at(&feasible, model, 0.0));
    spec.offload = Offload::Direct;
    match solve_at(model, &spec, &feasible, feasible.f, &opts.conic_options()) {
        Ok(s) => Ok((s.state, s.t)),
        Err(Error::NumericalLimit(_)) if design.mode == TargetMode::Point => Ok((feasible, None)),
        Err(e) => Err(e),
    }
}

/// Minimum-power beams meeting every requirement, with SINR headroom when
/// the budget allows.
pub(crate) fn feasible_point(model: &Model, opts: &SolveOptions) -> Result<State> {
    if let Some(gap) = single_link_gap(model, opts) {
        return Err(Error::Infeasible { certificate: gap });
    }
    match power_min(model, opts, INIT_BOOST) {
        Err(Error::Infeasible { .. } | Error::NumericalLimit(_)) => power_min(model, opts, 1.0),
        r => r,
    }
}

/// Interference-free check: a link can get at most `budget(f) * |h|^2`.
/// Budget falls and the offload target rises as `f` moves, so bounding each
/// of `CELLS` intervals by its endpoints certifies the offload link is out of
/// reach. Returns the smallest shortfall when every interval fails.
fn single_link_gap(model: &Model, opts: &SolveOptions) -> Option<f64> {
    const CELLS: usize = 256;
    let gain = |i: usize| model.q[i].trace().re;
    let full = model.budget(0.0);
    if let Some(gap) = (0..model.k)
        .map(|i| model.gamma[i] - full * gain(i))
        .filter(|&g| g > 0.0)
        .reduce(f64::max)
    {
        return Some(gap);
    }
    let edges: Vec<f64> = match opts.f_fixed {
        Some(f) => vec![f, f],
        None => (0..=CELLS).map(|j| model.f_hi * j as f64 / CELLS as f64).collect(),
    };
    let srv = gain(model.server());
    let mut worst = f64::INFINITY;
    for w in edges.windows(2) {
        let need = match model.offload_target(w[1]) {
            Some(g) => g,
            None => return None,
        };
        let gap = need - model.budget(w[0]).max(0.0) * srv;
        if gap <= 0.0 {
            return None;
        }
        worst = worst.min(gap);
    }
    Some(worst)
}

fn power_min(model: &Model, opts: &SolveOptions, boost: f64) -> Result<State> {
    let spec = Spec {
        vary_w: vec![true; model.k + 1],
        vary_d: false,
        objective: Objective::Power,
        offload: Offload::Direct,
        boost,
    };
    let cur = State::zeros(model.m, model.k + 1);
    let copts = opts.conic_options();
    let tol = opts.f_search_tol.max(model.f_hi * 1e-3);
    let best = over_f(model, opts, tol, None, |f| {
        let s = solve_at(model, &spec, &cur, f, &copts)?;
        Ok((s.value - model.budget(f), s))
    })?;
    if best.value > 0.0 {
        return Err(Error::Infeasible {
            certificate: best.value,
        });
    }
    Ok(best.payload.state)
}

/// Which beams a design optimizes; `users` is false for the no-user cases.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Design {
    pub mode: TargetMode,
    pub users: bool,
}

impl Design {
    fn block1(&self, model: &Model) -> Spec {
        let mut vary_w = vec![false; model.k + 1];
        vary_w[model.server()] = true;
        Spec {
            vary_w,
            vary_d: false,
            objective: objective_for(self.mode),
            offload: Offload::Direct,
            boost: 1.0,
        }
    }

    fn block2(&self, model: &Model) -> Spec {
        let mut vary_w = vec![self.users; model.k + 1];
        vary_w[model.server()] = false;
        Spec {
            vary_w,
            vary_d: self.mode == TargetMode::Extended,
            objective: objective_for(self.mode),
            offload: Offload::Direct,
            boost: 1.0,
        }
    }

    fn joint(&self, model: &Model, lin: Linearization) -> Spec {
        let mut vary_w = vec![self.users; model.k + 1];
        vary_w[model.server()] = true;
        Spec {
            vary_w,
            vary_d: self.mode == TargetMode::Extended,
            objective: objective_for(self.mode),
            offload: Offload::Surrogate(lin),
            boost: 1.0,
        }
    }

    /// Whether block 2 has anything to optimize.
    fn has_block2(&self, model: &Model) -> bool {
        self.mode == TargetMode::Extended || (self.users && model.k > 0)
    }
}

/// Iterate plus the bookkeeping the outer loops carry along.
pub(crate) struct Run {
    pub state: State,
    pub t: Option<f64>,
    pub obj: f64,
    pub trace: AlgoTrace,
}

impl Run {
    fn start(model: &Model, mode: TargetMode, state: State, t: Option<f64>, inner: usize) -> Result<Self> {
        let mut run = Self {
            obj: model.crb(mode, &state.r()),
            state,
            t,
            trace: AlgoTrace::new(),
        };
        if run.obj.is_finite() {
            run.record(model, inner)?;
        }
        Ok(run)
    }

    fn record(&mut self, model: &Model, inner: usize) -> Result<()> {
        let w: Vec<_> = self.state.w.iter().map(|w| model.to_natural(w)).collect();
        let r = model.to_natural(&self.state.r());
        self.trace.objective.push(self.obj);
        self.trace.slacks.push(relaxed_slacks(model.scn, &w, &r, self.state.f)?);
        self.trace.inner_iterations.push(inner);
        Ok(())
    }

    /// Accepts `next` unless it is worse; returns whether the loop should stop.
    fn step(&mut self, model: &Model, mode: TargetMode, next: State, t: Option<f64>, inner: usize, tol: f64) -> Result<bool> {
        let obj = model.crb(mode, &next.r());
        if self.obj.is_finite() && !(obj <= self.obj) {
            self.trace.status = AlgoStatus::Converged;
            return Ok(true);
        }
        let change = if self.obj.is_finite() {
            (self.obj - obj) / self.obj.abs().max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        self.state = next;
        self.t = t;
        self.obj = obj;
        self.record(model, inner)?;
        if change < tol {
            self.trace.status = AlgoStatus::Converged;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Alternating optimization: block 1 re-optimizes the server beam and `f`,
/// block 2 the user beams (and, for extended targets, the radar part).
pub(crate) fn run_ao(model: &Model, design: Design, opts: &SolveOptions, rounds: usize) -> Result<Run> {
    opts.validate()?;
    let copts = opts.conic_options();
    let (state, t0) = initialize(model, design, opts)?;
    let b1 = design.block1(model);
    let b2 = design.block2(model);
    let mut run = Run::start(model, design.mode, state, t0, 0)?;
    for _ in 0..rounds {
        opts.check_deadline()?;
        let (s1, mut inner) = search_f(model, &b1, &run.state, opts, opts.f_search_tol, Some(run.state.f))?;
        let mut next = s1.state;
        let mut t = s1.t;
        if design.has_block2(model) {
            let s2 = solve_at(model, &b2, &next, next.f, &copts)?;
            inner += s2.iterations;
            next = s2.state;
            t = s2.t;
        }
        if run.step(model, design.mode, next, t, inner, opts.tol_obj)? {
            break;
        }
    }
    Ok(run)
}

/// Successive convex approximation of the offload constraint with every
/// beam optimized jointly.
pub(crate) fn run_sca(model: &Model, design: Design, opts: &SolveOptions) -> Result<Run> {
    opts.validate()?;
    let power_min = || Run::start(model, design.mode, feasible_point(model, opts)?, None, 0);
    let mut run = match opts.sca_init {
        super::ScaInit::OneAoPass => match run_ao(model, design, opts, 1) {
            Ok(mut r) => {
                r.trace = AlgoTrace::new();
                let obj = r.obj;
                if obj.is_finite() {
                    r.record(model, 0)?;
                }
                r
            }
            // a thin block-1 set can defeat the warm start on its own
            Err(Error::NumericalLimit(_)) => power_min()?,
            Err(e) => return Err(e),
        },
        super::ScaInit::PowerMin => power_min()?,
    };
    for _ in 0..opts.max_outer {
        opts.check_deadline()?;
        let floor = model.offload_target(run.state.f).unwrap_or(0.0);
        let lin = Linearization::at(&run.state, model, floor);
        let spec = design.joint(model, lin);
        let (s, inner) = search_f(model, &spec, &run.state, opts, opts.f_search_tol, Some(run.state.f))?;
        if run.step(model, design.mode, s.state, s.t, inner, opts.tol_obj)? {
            break;
        }
    }
    Ok(run)
}

/// All computation local: the server beam is off and `f` sits at the
/// smallest frequency meeting the rate, leaving the rest of the budget to
/// the other beams.
pub(crate) fn run_local_only(model: &Model, design: Design, opts: &SolveOptions) -> Result<Run> {
    opts.validate()?;
    let cfg = &model.scn.config;
    let f = cfg.cycles_per_bit * cfg.rate_min_bps;
    if f > cfg.f_max_hz || model.budget(f) <= 0.0 {
        return Err(Error::Infeasible {
            certificate: (f / cfg.f_max_hz - 1.0).max(-model.budget(f)),
        });
    }
    let cur = State::zeros(model.m, model.k + 1);
    let spec = design.block2(model);
    let s = solve_at(model, &spec, &cur, f, &opts.conic_options())?;
    let mut run = Run::start(model, design.mode, s.state, s.t, s.iterations)?;
    run.trace.status = AlgoStatus::Converged;
    Ok(run)
}

/// Rank-one recovery, fresh constraint evaluation and packaging.
/// Weight of the tie-breaker relative to the optimal Schur value.
const TIE_WEIGHT: f64 = 1e-4;
const TIE_ROUNDS: usize = 20;

fn unit_leading(w: &CMat) -> CVec {
    let v = extract_rank_one(w, 1.0).vector;
    let n = v.norm();
    if n > 0.0 {
        v / C64::new(n, 0.0)
    } else {
        CVec::zeros(w.nrows())
    }
}

pub(crate) fn finish(model: &Model, mode: TargetMode, run: Run, opts: &SolveOptions) -> Result<Outcome> {
    let first = build_outcome(model, mode, &run.state, run.t, opts);
    let loose = |o: &Outcome| o.relaxed.rank_ratios.iter().any(|&x| x > opts.rank_tol);
    let retry = first.as_ref().map_or(true, loose);
    let mut best = first.as_ref().ok().cloned();
    if let (true, TargetMode::Point, Some(t)) = (retry, mode, run.t) {
        // Several optimal covariances: walk the optimal face toward rank one.
        let weight = TIE_WEIGHT * t.abs();
        let mut state = run.state.clone();
        for round in 0..TIE_ROUNDS {
            let spec = Spec {
                vary_w: vec![true; model.k + 1],
                vary_d: false,
                objective: Objective::Tied {
                    weight,
                    dirs: (round > 0).then(|| state.w.iter().map(unit_leading).collect()),
                },
                offload: Offload::Direct,
                boost: 1.0,
            };
            let Ok(s) = solve_at(model, &spec, &state, state.f, &opts.conic_options()) else {
                break;
            };
            state = s.state;
            let Ok(alt) = build_outcome(model, mode, &state, s.t, opts) else {
                continue;
            };
            let done = !loose(&alt);
            if best.as_ref().is_none_or(|b| alt.report.crb_value < b.report.crb_value) {
                best = Some(alt);
            }
            if done {
                break;
            }
        }
    }
    let mut best = match best {
        Some(b) => b,
        None => return first,
    };
    best.trace = run.trace;
    Ok(best)
}

fn build_outcome(model: &Model, mode: TargetMode, state: &State, t: Option<f64>, opts: &SolveOptions) -> Result<Outcome> {
    let scn = model.scn;
    let w: Vec<_> = state.w.iter().map(|w| model.to_natural(w)).collect();
    let r = model.to_natural(&state.r());
    let rank_ratios = w.iter().map(|wk| extract_rank_one(wk, opts.rank_tol).ratio).collect();
    let crb_bound = crb_for(scn, &r, mode)?;
    let (solution, radar_beams) = recover(scn, &w, &r, state.f, mode == TargetMode::Extended)?;
    let report = checked_report(scn, &solution, mode)?;
    Ok(Outcome {
        solution,
        report,
        trace: AlgoTrace::new(),
        relaxed: RelaxedData {
            w,
            r_s: r,
            crb_bound,
            rank_ratios,
            t_star: t.map(|t| model.t_natural(t)),
            f_hz: state.f,
        },
        radar_beams,
    })
}

/// Samples the block-1 value function (server beam and `f`) on `n` points
/// after initialization; `+inf` marks infeasible frequencies.
pub(crate) fn block1_values(model: &Model, design: Design, opts: &SolveOptions, n: usize) -> Result<Vec<(f64, f64)>> {
    let copts = opts.conic_options();
    let (state, _) = initialize(model, design, opts)?;
    let spec = design.block1(model);
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let f = model.f_hi * i as f64 / (n - 1) as f64;
            match solve_at(model, &spec, &state, f, &copts) {
                Ok(s) => Ok((f, s.value)),
                Err(Error::Infeasible { .. }) => Ok((f, f64::INFINITY)),
                Err(e) => Err(e),
            }
        })
        .collect()
}
