//! Phase-I: the largest `tau` such that `X - tau I` stays feasible for the
//! cone, i.e. `max tau s.t. A(Y + tau I) = b, Y >= 0`.

use nalgebra::DVector;

use super::ipm::{run, SolverOptions, Start, Stop};
use super::standard::{lower, Slot, Std, SymMat};
use super::{BlockValue, ConicProblem};
use crate::error::Result;
use crate::linalg::{unembed, RMat};

/// `tau` magnitude separating strict feasibility, the boundary, and infeasibility.
const TAU_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum Phase1Outcome {
    /// Values with every PSD block `>= margin I` and every scalar `>= margin`.
    Strict { values: Vec<BlockValue>, margin: f64 },
    /// Feasible at best on the boundary of the cone (or undecided).
    Boundary { margin: f64 },
    /// No feasible point; `certificate = -tau* > 0`.
    Infeasible { certificate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Strict,
    Boundary,
    Infeasible,
}

pub(crate) struct Classified {
    pub kind: Kind,
    pub tau: f64,
    pub start: Option<Start>,
    pub iterations: usize,
}

fn build(s: &Std) -> Std {
    let m = s.m();
    let n_lp = s.n_lp;
    let (ip, iq, ib, isp) = (n_lp, n_lp + 1, n_lp + 2, n_lp + 3);
    let mut a_lp = RMat::zeros(m + 2, n_lp + 4);
    a_lp.view_mut((0, 0), (m, n_lp)).copy_from(&s.a_lp);
    let mut t = DVector::<f64>::zeros(m);
    for i in 0..m {
        t[i] = s.a_lp.row(i).sum();
    }
    for rows in &s.rows {
        for (i, a) in rows {
            t[*i] += a.trace();
        }
    }
    for i in 0..m {
        a_lp[(i, ip)] = t[i];
        a_lp[(i, iq)] = -t[i];
    }
    let mut rows = s.rows.clone();
    for (k, &d) in s.dims.iter().enumerate() {
        rows[k].push((m, SymMat::Sparse((0..d).map(|i| (i, i, 1.0)).collect())));
    }
    for j in 0..n_lp {
        a_lp[(m, j)] = 1.0;
    }
    a_lp[(m, ib)] = 1.0;
    a_lp[(m + 1, ip)] = 1.0;
    a_lp[(m + 1, isp)] = 1.0;
    let bmax = s.b.amax();
    let mut b = DVector::zeros(m + 2);
    b.rows_mut(0, m).copy_from(&s.b);
    b[m] = 1e6 * (1.0 + bmax) * (1.0 + s.nu());
    b[m + 1] = 1.0;
    let mut c_lp = DVector::zeros(n_lp + 4);
    c_lp[ip] = -1.0;
    c_lp[iq] = 1.0;
    Std {
        dims: s.dims.clone(),
        n_lp: n_lp + 4,
        c: vec![None; s.dims.len()],
        c_lp,
        rows,
        a_lp,
        b,
    }
}

pub(crate) fn classify(s: &Std, opts: &SolverOptions) -> Classified {
    let aux = build(s);
    let inner_opts = SolverOptions {
        tol_feas: opts.tol_feas,
        tol_gap: 1e-9,
        max_iter: opts.max_iter,
        deadline: opts.deadline,
    };
    let core = run(&aux, &inner_opts, None);
    let n_lp = s.n_lp;
    let tau = core.xl[n_lp] - core.xl[n_lp + 1];
    if core.stop != Stop::Optimal && !(core.pinf <= 1e-6) {
        return Classified {
            kind: Kind::Boundary,
            tau: f64::NAN,
            start: None,
            iterations: core.iterations,
        };
    }
    let kind = if tau > TAU_TOL {
        Kind::Strict
    } else if tau < -TAU_TOL {
        Kind::Infeasible
    } else {
        Kind::Boundary
    };
    let start = (kind == Kind::Strict).then(|| Start {
        x: core
            .x
            .iter()
            .map(|y| {
                let d = y.nrows();
                y + RMat::identity(d, d) * tau
            })
            .collect(),
        xl: core.xl.rows(0, n_lp).map(|v| v + tau),
    });
    Classified {
        kind,
        tau,
        start,
        iterations: core.iterations,
    }
}

/// Finds a strictly feasible point or certifies that none exists.
pub fn phase1_start(p: &ConicProblem) -> Result<Phase1Outcome> {
    p.validate()?;
    let low = lower(p);
    let c = classify(&low.std, &SolverOptions::default());
    Ok(match c.kind {
        Kind::Infeasible => Phase1Outcome::Infeasible { certificate: -c.tau },
        Kind::Boundary => Phase1Outcome::Boundary { margin: c.tau },
        Kind::Strict => {
            let st = c.start.expect("strict start");
            let values = low
                .slots
                .iter()
                .map(|slot| match *slot {
                    Slot::Psd(k) => BlockValue::Psd(unembed(&st.x[k])),
                    Slot::Lp(k) => BlockValue::Scalar(st.xl[k]),
                })
                .collect();
            Phase1Outcome::Strict { values, margin: c.tau }
        }
    })
}
