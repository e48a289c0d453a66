//! Normalized relaxed problems shared by every algorithm.
//!
//! Beam covariances are stored divided by `P_0`, channel Gram matrices are
//! multiplied by `P_0 / sigma_c^2` (so SINR rows read in SINR units) and the
//! Fisher kernels are divided by the Frobenius norm of `A_dot^H A_dot`.
//! This keeps every row of the conic problems within a few orders of
//! magnitude of one.

use crate::conic::{
    lift_inverse, lift_square, lift_trace_inverse, link_hermitian, lmi_2x2, solve, ConicProblem, ConicSolution,
    HermView, LinExpr, SolverOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_part, CMat, CVec, C64};
use crate::metrics::{crb_extended, crb_point, TargetMode};
use crate::scenario::Scenario;

/// Relative back-off applied to SINR thresholds inside the relaxed problems.
const SINR_MARGIN: f64 = 1e-6;
/// Power held back from the budget, as a fraction of `P_0`.
const POWER_MARGIN: f64 = 1e-7;

pub(crate) struct Model<'a> {
    pub scn: &'a Scenario,
    pub m: usize,
    pub k: usize,
    pub p0: f64,
    /// `P_0 Q_k / sigma_c^2`, users then server.
    pub q: Vec<CMat>,
    /// Backed-off user thresholds.
    pub gamma: Vec<f64>,
    pub dd: CMat,
    pub da: CMat,
    pub aa: CMat,
    pub s_z: f64,
    pub f_hi: f64,
}

impl<'a> Model<'a> {
    pub fn new(scn: &'a Scenario) -> Result<Self> {
        let cfg = &scn.config;
        cfg.validate()?;
        let p0 = cfg.power_budget_w;
        let scale = C64::new(p0 / cfg.noise_comm_w, 0.0);
        let q = scn.channels.q.iter().map(|q| q * scale).collect();
        let gamma = cfg.sinr_thresholds.iter().map(|g| g * (1.0 + SINR_MARGIN)).collect();
        let kern = scn.steering.fisher_kernels();
        let s_z = frobenius(&kern.dd).max(f64::MIN_POSITIVE);
        let inv = C64::new(1.0 / s_z, 0.0);
        let mut f_hi = cfg.f_max_hz.min(cfg.cycles_per_bit * cfg.rate_min_bps);
        if cfg.cpu_eff > 0.0 {
            f_hi = f_hi.min((p0 * (1.0 - POWER_MARGIN) / cfg.cpu_eff).cbrt());
        }
        Ok(Self {
            scn,
            m: cfg.m_tx,
            k: cfg.n_users,
            p0,
            q,
            gamma,
            dd: kern.dd * inv,
            da: kern.da * inv,
            aa: kern.aa * inv,
            s_z,
            f_hi: f_hi.max(0.0),
        })
    }

    pub fn server(&self) -> usize {
        self.k
    }

    /// Normalized power left for beams once the CPU runs at `f`.
    pub fn budget(&self, f: f64) -> f64 {
        let cfg = &self.scn.config;
        1.0 - cfg.cpu_eff * f.powi(3) / self.p0 - POWER_MARGIN
    }

    /// Backed-off offload SINR the server needs at CPU frequency `f`, or
    /// `None` when local computing alone meets the rate.
    pub fn offload_target(&self, f: f64) -> Option<f64> {
        let g = required_offload_sinr(&self.scn.config, f);
        (g > 0.0).then(|| g * (1.0 + SINR_MARGIN) + SINR_MARGIN)
    }

    /// `Re tr(Q_i X)` in normalized units.
    pub fn q_tr(&self, i: usize, x: &CMat) -> f64 {
        re_tr(&self.q[i], x)
    }

    pub fn to_natural(&self, w: &CMat) -> CMat {
        w * C64::new(self.p0, 0.0)
    }

    /// Natural-unit CRB of a normalized covariance, `+inf` when degenerate.
    pub fn crb(&self, mode: TargetMode, r: &CMat) -> f64 {
        let cfg = &self.scn.config;
        let r = self.to_natural(r);
        let v = match mode {
            TargetMode::Point => crb_point(&r, &self.scn.steering, self.scn.alpha(), cfg.n_symbols, cfg.noise_sense_w),
            TargetMode::Extended => crb_extended(&r, cfg.m_rx, cfg.n_symbols, cfg.noise_sense_w),
        };
        v.unwrap_or(f64::INFINITY)
    }

    /// Converts a normalized Schur epigraph value into natural `t`.
    pub fn t_natural(&self, t: f64) -> f64 {
        t * self.p0 * self.s_z
    }
}

/// `2^((R_min - f/rho)/B) - 1`, the offload SINR that closes the rate gap.
pub fn required_offload_sinr(cfg: &crate::scenario::SystemConfig, f: f64) -> f64 {
    2f64.powf((cfg.rate_min_bps - f / cfg.cycles_per_bit) / cfg.bandwidth_hz) - 1.0
}

pub(crate) fn re_tr(a: &CMat, b: &CMat) -> f64 {
    crate::linalg::trace_product(a, b).re
}

/// Relaxed iterate in normalized units: one matrix per beam (users then
/// server), the dedicated radar part `d` and the CPU frequency.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub w: Vec<CMat>,
    pub d: CMat,
    pub f: f64,
}

impl State {
    pub fn zeros(m: usize, beams: usize) -> Self {
        Self {
            w: vec![CMat::zeros(m, m); beams],
            d: CMat::zeros(m, m),
            f: 0.0,
        }
    }

    pub fn r(&self) -> CMat {
        self.w.iter().fold(self.d.clone(), |acc, w| acc + w)
    }

    /// Actual offload SINR and interference-plus-noise at the server.
    pub fn server_link(&self, model: &Model) -> (f64, f64) {
        let s = model.server();
        let x = model.q_tr(s, &self.w[s]);
        let rest = model.q_tr(s, &self.r()) - x + 1.0;
        (x, rest)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Objective {
    /// Maximize the Schur epigraph `t` (point target).
    Schur,
    /// Minimize `tr(R^-1)` through the trace-inverse lift (extended target).
    TraceInverse,
    /// Minimize total beam power (initialization).
    Power,
    /// Maximize `|a^H w|^2` of the server beam (point target, no users).
    Steering,
    /// Schur objective plus `weight` times a tie-breaker that picks a
    /// low-rank point when the optimum is not unique: the rank penalty
    /// `sum_k tr(W_k) - u_k^H W_k u_k` linearized at the unit directions
    /// `dirs`, or without directions minus the power sent toward the target.
    Tied { weight: f64, dirs: Option<Vec<CVec>> },
}

/// Linearization point of the offload surrogate.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Linearization {
    pub x: f64,
    pub gamma: f64,
}

impl Linearization {
    /// Expansion point taken from the current iterate, with the SINR at its
    /// actual value so the surrogate is tight there.
    pub fn at(state: &State, model: &Model, floor: f64) -> Self {
        let (x, rest) = state.server_link(model);
        if x > 1e-12 {
            Self { x, gamma: x / rest }
        } else {
            Self {
                x: rest * floor.max(1e-6),
                gamma: floor.max(1e-6),
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Offload {
    /// `tr(Q W_s) >= Gamma (interference + 1)` with `Gamma` fixed by `f`.
    Direct,
    /// SCA surrogate with a free `gamma_p >= Gamma(f)`.
    Surrogate(Linearization),
}

/// Which beams are optimized; fixed ones enter as constants.
#[derive(Debug, Clone)]
pub(crate) struct Spec {
    pub vary_w: Vec<bool>,
    pub vary_d: bool,
    pub objective: Objective,
    pub offload: Offload,
    /// Multiplies every SINR target (initialization only).
    pub boost: f64,
}

pub(crate) struct Solved {
    pub state: State,
    /// Normalized objective as the algorithms compare it (smaller is better).
    pub value: f64,
    /// Normalized Schur epigraph at the optimum (point objectives only).
    pub t: Option<f64>,
    pub iterations: usize,
}

enum Slot {
    Var(usize),
    Fixed,
}

struct Built {
    p: ConicProblem,
    w: Vec<Slot>,
    d: Slot,
    t: Option<usize>,
}

/// `Re tr(M X)` summed over the variable slots, plus the fixed part as a constant.
fn tr_expr(m: &CMat, slots: &[(&Slot, &CMat)]) -> LinExpr {
    let mut e = LinExpr::new();
    for (slot, fixed) in slots {
        e = match slot {
            Slot::Var(b) => e.plus(LinExpr::re_trace(*b, m)),
            Slot::Fixed => e.plus_const(re_tr(m, fixed)),
        };
    }
    e
}

fn im_expr(m: &CMat, slots: &[(&Slot, &CMat)]) -> LinExpr {
    let mut e = LinExpr::new();
    for (slot, fixed) in slots {
        e = match slot {
            Slot::Var(b) => e.plus(LinExpr::im_trace(*b, m)),
            Slot::Fixed => e.plus_const(crate::linalg::trace_product(m, fixed).im),
        };
    }
    e
}

fn has_vars(e: &LinExpr) -> bool {
    !e.terms.is_empty()
}

fn build(model: &Model, spec: &Spec, cur: &State, f: f64) -> Result<Built> {
    let m = model.m;
    let beams = model.k + 1;
    let s = model.server();
    let mut p = ConicProblem::new();
    let w: Vec<Slot> = (0..beams)
        .map(|i| {
            if spec.vary_w[i] {
                Slot::Var(p.add_psd(m, format!("W{}", i + 1)))
            } else {
                Slot::Fixed
            }
        })
        .collect();
    let d = if spec.vary_d {
        Slot::Var(p.add_psd(m, "Wr"))
    } else {
        Slot::Fixed
    };
    let all: Vec<(&Slot, &CMat)> = w.iter().zip(&cur.w).chain(std::iter::once((&d, &cur.d))).collect();
    let others = |skip: usize| -> Vec<(&Slot, &CMat)> {
        all.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, x)| *x).collect()
    };

    for k in 0..model.k {
        let g = model.gamma[k] * spec.boost;
        if g <= 0.0 {
            continue;
        }
        let e = tr_expr(&model.q[k], &[all[k]]).plus_scaled(tr_expr(&model.q[k], &others(k)), -g);
        if has_vars(&e) {
            p.add_ge(e, g, format!("sinr_{}", k + 1));
        }
    }

    if let Some(gp) = model.offload_target(f).map(|g| g * spec.boost) {
        let own = tr_expr(&model.q[s], &[all[s]]);
        let interference = tr_expr(&model.q[s], &others(s));
        match spec.offload {
            Offload::Direct => {
                let e = own.plus_scaled(interference, -gp);
                if has_vars(&e) {
                    p.add_ge(e, gp, "offload");
                }
            }
            Offload::Surrogate(lin) => {
                let gb = p.add_scalar("gamma_p");
                let gamma = LinExpr::scalar(gb, 1.0);
                p.add_ge(gamma.clone(), gp, "gamma_p_min");
                let sc = (lin.x * lin.gamma).sqrt();
                let c0 = 2.0 * (lin.x / lin.gamma).sqrt();
                let u = lift_square(&mut p, own.clone().scaled(1.0 / sc), "sq_own");
                let w_inv = lift_inverse(&mut p, gamma.clone(), sc.sqrt(), "inv_gamma");
                let v = lift_square(&mut p, w_inv, "sq_inv_gamma");
                let lhs = LinExpr::constant(0.5 * c0 * c0)
                    .plus_scaled(own.plus_const(-lin.x), c0 / sc)
                    .plus_scaled(gamma.plus_const(-lin.gamma), -c0 * sc / (lin.gamma * lin.gamma))
                    .plus_scaled(u, -0.5)
                    .plus_scaled(v, -0.5)
                    .plus_scaled(interference, -1.0);
                p.add_ge(lhs, 1.0, "offload_surrogate");
            }
        }
    }

    let eye = CMat::identity(m, m);
    let power = tr_expr(&eye, &all);
    if has_vars(&power) && spec.objective != Objective::Power {
        p.add_le(power.clone(), model.budget(f), "power");
    }

    let mut t = None;
    match &spec.objective {
        Objective::Tied { weight, dirs } => {
            let tb = p.add_scalar("t");
            let p00 = tr_expr(&model.dd, &all).plus(LinExpr::scalar(tb, -1.0));
            lmi_2x2(
                &mut p,
                Some(p00),
                Some(tr_expr(&model.da, &all)),
                Some(im_expr(&model.da, &all)),
                Some(tr_expr(&model.aa, &all)),
                "fisher",
            );
            let tie = match dirs {
                Some(dirs) => {
                    let mut e = LinExpr::new();
                    for (i, u) in dirs.iter().enumerate() {
                        let c = &eye - u * u.adjoint();
                        e = e.plus(tr_expr(&c, &[all[i]]));
                    }
                    e
                }
                None => tr_expr(&model.aa, &all).scaled(-1.0),
            };
            p.set_objective(LinExpr::scalar(tb, -1.0).plus_scaled(tie, *weight));
            t = Some(tb);
        }
        Objective::Schur => {
            let tb = p.add_scalar("t");
            let p00 = tr_expr(&model.dd, &all).plus(LinExpr::scalar(tb, -1.0));
            lmi_2x2(
                &mut p,
                Some(p00),
                Some(tr_expr(&model.da, &all)),
                Some(im_expr(&model.da, &all)),
                Some(tr_expr(&model.aa, &all)),
                "fisher",
            );
            p.set_objective(LinExpr::scalar(tb, -1.0));
            t = Some(tb);
        }
        Objective::TraceInverse => {
            let lift = lift_trace_inverse(&mut p, m, "trinv");
            let mut parts = Vec::new();
            let mut fixed = CMat::zeros(m, m);
            for (slot, val) in &all {
                match slot {
                    Slot::Var(b) => parts.push((HermView::whole(*b, m), 1.0)),
                    Slot::Fixed => fixed += *val,
                }
            }
            link_hermitian(&mut p, lift.r_view(), &parts, Some(&fixed), "R");
            p.set_objective(lift.objective());
        }
        Objective::Power => p.set_objective(power),
        Objective::Steering => {
            let a = &model.scn.steering.a;
            let aa = a * a.adjoint();
            let e = tr_expr(&aa, &[all[s]]);
            p.set_objective(e.scaled(-1.0 / m as f64));
        }
    }
    Ok(Built { p, w, d, t })
}

/// Builds and solves one relaxed subproblem at CPU frequency `f`.
pub(crate) fn solve_at(model: &Model, spec: &Spec, cur: &State, f: f64, opts: &SolverOptions) -> Result<Solved> {
    let built = build(model, spec, cur, f)?;
    let mut next = cur.clone();
    next.f = f;
    if built.p.constraints.is_empty() {
        // Only a power objective can be unconstrained; its optimum is all zeros.
        if spec.objective != Objective::Power {
            return Err(Error::InvalidArgument("relaxed problem has no constraints".into()));
        }
        for (i, slot) in built.w.iter().enumerate() {
            if matches!(slot, Slot::Var(_)) {
                next.w[i] = CMat::zeros(model.m, model.m);
            }
        }
        return Ok(Solved {
            state: next,
            value: 0.0,
            t: None,
            iterations: 0,
        });
    }
    let sol: ConicSolution = solve(&built.p, opts)?;
    for (i, slot) in built.w.iter().enumerate() {
        if let Slot::Var(b) = slot {
            next.w[i] = hermitian_part(sol.psd(*b));
        }
    }
    if let Slot::Var(b) = built.d {
        next.d = hermitian_part(sol.psd(b));
    }
    let t = built.t.map(|b| sol.scalar(b));
    Ok(Solved {
        state: next,
        value: sol.primal_objective,
        t,
        iterations: sol.iterations,
    })
}
