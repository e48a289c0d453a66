//! Infeasible-start primal-dual path-following method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.

use std::time::Instant;

use nalgebra::{Cholesky, DVector};

use super::phase1;
use super::standard::{lower, Lowered, Slot, Std, SymMat};
use super::{BlockValue, ConicProblem, ConicSolution, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{unembed, RMat};

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative primal and dual residual target.
    pub tol_feas: f64,
    /// Duality gap target relative to `1 + |objective|`.
    pub tol_gap: f64,
    pub max_iter: usize,
    /// Abandon (as a numerical limit) once this instant has passed.
    pub deadline: Option<Instant>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-7,
            max_iter: 200,
            deadline: None,
        }
    }
}

impl SolverOptions {
    pub fn with_gap(mut self, tol_gap: f64) -> Self {
        self.tol_gap = tol_gap;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Stop {
    Optimal,
    MaxIter,
    Deadline,
    Stalled(String),
    /// Stalled, but the best iterate met the tolerances relaxed by `REDUCED`.
    Reduced,
}

/// Tolerance relaxation accepted when the iteration stalls near optimality.
const REDUCED: f64 = 1e3;

struct Snapshot {
    x: Vec<RMat>,
    xl: DVector<f64>,
    y: DVector<f64>,
    z: Vec<RMat>,
    zl: DVector<f64>,
    merit: f64,
    vals: (f64, f64, f64, f64),
}

/// Iterate in the caller's (unscaled) units.
#[derive(Debug, Clone)]
pub(crate) struct Core {
    pub x: Vec<RMat>,
    pub xl: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<RMat>,
    pub zl: DVector<f64>,
    pub iterations: usize,
    pub stop: Stop,
    pub pobj: f64,
    pub dobj: f64,
    pub pinf: f64,
    pub dinf: f64,
}

pub(crate) struct Start {
    pub x: Vec<RMat>,
    pub xl: DVector<f64>,
}

fn a_op(s: &Std, x: &[RMat], xl: &DVector<f64>) -> DVector<f64> {
    let mut out = &s.a_lp * xl;
    for (k, rows) in s.rows.iter().enumerate() {
        for (i, a) in rows {
            out[*i] += a.dot(&x[k]);
        }
    }
    out
}

fn at_op(s: &Std, y: &DVector<f64>) -> (Vec<RMat>, DVector<f64>) {
    let mut z: Vec<RMat> = s.dims.iter().map(|&d| RMat::zeros(d, d)).collect();
    for (k, rows) in s.rows.iter().enumerate() {
        for (i, a) in rows {
            a.axpy_into(y[*i], &mut z[k]);
        }
    }
    (z, s.a_lp.tr_mul(y))
}

fn dense_c(s: &Std) -> Vec<RMat> {
    s.dims
        .iter()
        .zip(&s.c)
        .map(|(&d, c)| {
            let mut m = RMat::zeros(d, d);
            if let Some(c) = c {
                c.axpy_into(1.0, &mut m);
            }
            m
        })
        .collect()
}

fn sym(m: RMat) -> RMat {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Nesterov-Todd scaling of one PSD block: `W = G G^T`, `G^-1 X G^-T = G^T Z G = diag(lam)`.
struct Nt {
    lx: RMat,
    lz: RMat,
    g: RMat,
    ginv: RMat,
    w: RMat,
    lam: DVector<f64>,
}

fn nt_scaling(x: &RMat, z: &RMat) -> Option<Nt> {
    let n = x.nrows();
    let lx = Cholesky::new(x.clone())?.l();
    let lz = Cholesky::new(z.clone())?.l();
    let svd = (lz.transpose() * &lx).svd(false, true);
    let vt = svd.v_t?;
    let lam = svd.singular_values;
    if lam.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return None;
    }
    let mut g = &lx * vt.transpose();
    for j in 0..n {
        let f = 1.0 / lam[j].sqrt();
        g.column_mut(j).scale_mut(f);
    }
    let linv = lx.solve_lower_triangular(&RMat::identity(n, n))?;
    let mut ginv = vt * linv;
    for i in 0..n {
        let f = lam[i].sqrt();
        ginv.row_mut(i).scale_mut(f);
    }
    let w = sym(&g * g.transpose());
    Some(Nt { lx, lz, g, ginv, w, lam })
}

fn max_step_psd(l: &RMat, d: &RMat) -> f64 {
    let Some(t) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(s) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = sym(s).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

fn max_step_lp(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    x.iter()
        .zip(d.iter())
        .filter(|(_, &di)| di < 0.0)
        .map(|(&xi, &di)| -xi / di)
        .fold(f64::INFINITY, f64::min)
}

/// `<A_p, W A_q W>` for two sparse symmetric matrices.
fn sparse_pair(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)], w: &RMat) -> f64 {
    let mut acc = 0.0;
    for &(r, s, u) in a {
        let mult = if r == s { u } else { 2.0 * u };
        let mut inner = 0.0;
        for &(p, q, v) in b {
            inner += if p == q {
                v * w[(r, p)] * w[(p, s)]
            } else {
                v * (w[(r, p)] * w[(q, s)] + w[(r, q)] * w[(p, s)])
            };
        }
        acc += mult * inner;
    }
    acc
}

fn schur_matrix(s: &Std, nts: &[Nt], wl2: &DVector<f64>) -> RMat {
    let m = s.m();
    let mut mm = RMat::zeros(m, m);
    for (k, rows) in s.rows.iter().enumerate() {
        let w = &nts[k].w;
        let dense_v: Vec<Option<RMat>> = rows
            .iter()
            .map(|(_, a)| match a {
                SymMat::Dense(ad) => Some(w * ad * w),
                SymMat::Sparse(_) => None,
            })
            .collect();
        for p in 0..rows.len() {
            let (ip, ap) = &rows[p];
            for q in p..rows.len() {
                let (iq, aq) = &rows[q];
                let v = if let Some(vq) = &dense_v[q] {
                    ap.dot(vq)
                } else if let Some(vp) = &dense_v[p] {
                    aq.dot(vp)
                } else {
                    sparse_pair(ap.sparse_entries(), aq.sparse_entries(), w)
                };
                mm[(*ip, *iq)] += v;
                if ip != iq {
                    mm[(*iq, *ip)] += v;
                }
            }
        }
    }
    if s.n_lp > 0 {
        let mut scaled = s.a_lp.clone();
        for j in 0..s.n_lp {
            scaled.column_mut(j).scale_mut(wl2[j]);
        }
        mm += &scaled * s.a_lp.transpose();
    }
    mm
}

fn factor(mut mm: RMat) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let maxd = mm.diagonal().iter().copied().fold(0.0, f64::max).max(1e-300);
    let n = mm.nrows();
    if let Some(c) = Cholesky::new(mm.clone()) {
        return Some(c);
    }
    for e in [1e-14, 1e-12, 1e-10, 1e-8] {
        for i in 0..n {
            mm[(i, i)] += e * maxd;
        }
        if let Some(c) = Cholesky::new(mm.clone()) {
            return Some(c);
        }
    }
    None
}

struct Dir {
    dx: Vec<RMat>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<RMat>,
    dzl: DVector<f64>,
}

#[allow(clippy::too_many_arguments)]
fn solve_dir(
    s: &Std,
    nts: &[Nt],
    wl2: &DVector<f64>,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    rp: &DVector<f64>,
    rd: &[RMat],
    rdl: &DVector<f64>,
    rc: Vec<RMat>,
    rcl: DVector<f64>,
) -> Dir {
    let tmp: Vec<RMat> = rc
        .iter()
        .zip(rd)
        .zip(nts)
        .map(|((c, d), nt)| c - &nt.w * d * &nt.w)
        .collect();
    let tmpl = &rcl - wl2.component_mul(rdl);
    let h = rp - a_op(s, &tmp, &tmpl);
    let dy = chol.solve(&h);
    let (aty, atyl) = at_op(s, &dy);
    let dz: Vec<RMat> = rd.iter().zip(&aty).map(|(d, a)| d - a).collect();
    let dzl = rdl - atyl;
    let dx: Vec<RMat> = rc
        .into_iter()
        .zip(&dz)
        .zip(nts)
        .map(|((c, d), nt)| sym(c - &nt.w * d * &nt.w))
        .collect();
    let dxl = rcl - wl2.component_mul(&dzl);
    Dir { dx, dxl, dy, dz, dzl }
}

/// `G T G^T` with `T_ij = 2 rhs_ij / (lam_i + lam_j)`.
fn lyapunov_back(nt: &Nt, rhs: &RMat) -> RMat {
    let n = rhs.nrows();
    let t = RMat::from_fn(n, n, |i, j| 2.0 * rhs[(i, j)] / (nt.lam[i] + nt.lam[j]));
    sym(&nt.g * t * nt.g.transpose())
}

fn inner(x: &[RMat], xl: &DVector<f64>, z: &[RMat], zl: &DVector<f64>) -> f64 {
    x.iter().zip(z).map(|(a, b)| a.dot(b)).sum::<f64>() + xl.dot(zl)
}

fn norm_blocks(x: &[RMat], xl: &DVector<f64>) -> f64 {
    (x.iter().map(|a| a.norm_squared()).sum::<f64>() + xl.norm_squared()).sqrt()
}

pub(crate) fn run(orig: &Std, opts: &SolverOptions, start: Option<&Start>) -> Core {
    let m = orig.m();
    let nu = orig.nu().max(1.0);

    // Row and objective scaling.
    let mut rn = vec![0.0; m];
    for rows in &orig.rows {
        for (i, a) in rows {
            rn[*i] += a.norm_sq();
        }
    }
    for (i, r) in rn.iter_mut().enumerate() {
        *r = (*r + orig.a_lp.row(i).norm_squared()).sqrt();
        if !(*r > 0.0) {
            *r = 1.0;
        }
    }
    let mut s = orig.clone();
    for rows in &mut s.rows {
        for (i, a) in rows.iter_mut() {
            a.scale(1.0 / rn[*i]);
        }
    }
    for i in 0..m {
        s.a_lp.row_mut(i).scale_mut(1.0 / rn[i]);
        s.b[i] /= rn[i];
    }
    let c_norm = (s.c.iter().flatten().map(|c| c.norm_sq()).sum::<f64>() + s.c_lp.norm_squared()).sqrt();
    let sc = if c_norm > 0.0 { c_norm } else { 1.0 };
    for c in s.c.iter_mut().flatten() {
        c.scale(1.0 / sc);
    }
    s.c_lp /= sc;
    let c_mat = dense_c(&s);
    let b_scaled_norm = s.b.norm();
    let c_scaled_norm = c_norm / sc;

    // Starting point.
    let bmax = s.b.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut x: Vec<RMat> = Vec::with_capacity(s.dims.len());
    let mut z: Vec<RMat> = Vec::with_capacity(s.dims.len());
    for (k, &d) in s.dims.iter().enumerate() {
        let df = d as f64;
        let mut xi = 10f64.max(df.sqrt());
        let mut eta = 10f64.max(df.sqrt());
        for (i, a) in &s.rows[k] {
            let an = a.norm_sq().sqrt();
            xi = xi.max(df * (1.0 + s.b[*i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        if let Some(c) = &s.c[k] {
            eta = eta.max(c.norm_sq().sqrt());
        }
        x.push(RMat::identity(d, d) * xi);
        z.push(RMat::identity(d, d) * eta);
    }
    let nl = s.n_lp as f64;
    let xi_l = 10f64.max(nl.sqrt()).max(nl * (1.0 + bmax));
    let eta_l = 10f64.max(nl.sqrt()).max(s.c_lp.amax());
    let mut xl = DVector::from_element(s.n_lp, xi_l);
    let mut zl = DVector::from_element(s.n_lp, eta_l);
    if let Some(st) = start {
        x = st.x.clone();
        xl = st.xl.clone();
        let scale = 1.0 + c_scaled_norm;
        for zk in z.iter_mut() {
            let d = zk.nrows();
            *zk = RMat::identity(d, d) * scale;
        }
        zl.fill(scale);
    }
    let mut y = DVector::zeros(m);

    let mut stop = Stop::MaxIter;
    let mut iterations = 0;
    let (mut pobj, mut dobj, mut pinf, mut dinf) = (f64::NAN, f64::NAN, f64::INFINITY, f64::INFINITY);
    let mut best_merit = f64::INFINITY;
    let mut since_best = 0;
    let mut tiny_steps = 0;
    let mut best: Option<Snapshot> = None;

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let rp = &s.b - a_op(&s, &x, &xl);
        let (aty, atyl) = at_op(&s, &y);
        let rd: Vec<RMat> = c_mat
            .iter()
            .zip(&aty)
            .zip(&z)
            .map(|((c, a), zk)| c - a - zk)
            .collect();
        let rdl = &s.c_lp - &atyl - &zl;
        let xz = inner(&x, &xl, &z, &zl);
        let mu = xz / nu;

        let pobj_s = c_mat.iter().zip(&x).map(|(c, xk)| c.dot(xk)).sum::<f64>() + s.c_lp.dot(&xl);
        let dobj_s = s.b.dot(&y);
        pobj = sc * pobj_s;
        dobj = sc * dobj_s;
        // Measured on the normalized rows, i.e. as a backward error.
        pinf = rp.norm() / (1.0 + b_scaled_norm);
        let rd_norm = norm_blocks(&rd, &rdl);
        dinf = rd_norm / (1.0 + c_scaled_norm);
        let gap = (pobj - dobj).abs().max(sc * xz);
        let gap_tol = opts.tol_gap * (1.0 + pobj.abs());
        if pinf <= opts.tol_feas && dinf <= opts.tol_feas && gap <= gap_tol {
            stop = Stop::Optimal;
            break;
        }
        if iter == opts.max_iter {
            stop = Stop::MaxIter;
            break;
        }
        if opts.deadline.is_some_and(|d| Instant::now() >= d) {
            stop = Stop::Deadline;
            break;
        }
        let merit = (pinf / opts.tol_feas).max(dinf / opts.tol_feas).max(gap / gap_tol);
        if merit <= REDUCED && best.as_ref().is_none_or(|b| merit < b.merit) {
            best = Some(Snapshot {
                x: x.clone(),
                xl: xl.clone(),
                y: y.clone(),
                z: z.clone(),
                zl: zl.clone(),
                merit,
                vals: (pobj, dobj, pinf, dinf),
            });
        }
        if merit < 0.7 * best_merit {
            best_merit = merit;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 25 {
                stop = Stop::Stalled("no progress in 25 iterations".into());
                break;
            }
        }
        let xnorm = norm_blocks(&x, &xl);
        if xnorm > 1e12 || y.amax() > 1e12 {
            stop = Stop::Stalled("iterates diverging".into());
            break;
        }
        if dobj_s > 1e8 * (1.0 + rd_norm) || -pobj_s > 1e8 * (1.0 + rp.norm()) {
            stop = Stop::Stalled("improving ray detected".into());
            break;
        }

        let Some(nts) = x.iter().zip(&z).map(|(a, b)| nt_scaling(a, b)).collect::<Option<Vec<_>>>() else {
            stop = Stop::Stalled("lost positive definiteness".into());
            break;
        };
        let wl2 = xl.component_div(&zl);
        let laml = xl.component_mul(&zl).map(f64::sqrt);
        let Some(chol) = factor(schur_matrix(&s, &nts, &wl2)) else {
            stop = Stop::Stalled("Schur complement not factorizable".into());
            break;
        };

        // Predictor.
        let rc: Vec<RMat> = x.iter().map(|xk| -xk).collect();
        let rcl = -&xl;
        let aff = solve_dir(&s, &nts, &wl2, &chol, &rp, &rd, &rdl, rc, rcl);
        let mut ap = max_step_lp(&xl, &aff.dxl);
        let mut ad = max_step_lp(&zl, &aff.dzl);
        for (k, nt) in nts.iter().enumerate() {
            ap = ap.min(max_step_psd(&nt.lx, &aff.dx[k]));
            ad = ad.min(max_step_psd(&nt.lz, &aff.dz[k]));
        }
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut mu_aff = 0.0;
        for k in 0..x.len() {
            mu_aff += (&x[k] + &aff.dx[k] * ap).dot(&(&z[k] + &aff.dz[k] * ad));
        }
        mu_aff += (&xl + &aff.dxl * ap).dot(&(&zl + &aff.dzl * ad));
        mu_aff /= nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let mut rc = Vec::with_capacity(x.len());
        for (k, nt) in nts.iter().enumerate() {
            let dxt = &nt.ginv * &aff.dx[k] * nt.ginv.transpose();
            let dzt = nt.g.transpose() * &aff.dz[k] * &nt.g;
            let mut rhs = -sym(dxt * dzt);
            for i in 0..rhs.nrows() {
                rhs[(i, i)] += sigma * mu - nt.lam[i] * nt.lam[i];
            }
            rc.push(lyapunov_back(nt, &rhs));
        }
        let wl = wl2.map(f64::sqrt);
        let rcl = DVector::from_fn(s.n_lp, |j, _| {
            let rhs = sigma * mu - laml[j] * laml[j] - aff.dxl[j] * aff.dzl[j];
            wl[j] * rhs / laml[j]
        });
        let dir = solve_dir(&s, &nts, &wl2, &chol, &rp, &rd, &rdl, rc, rcl);
        let mut ap = max_step_lp(&xl, &dir.dxl);
        let mut ad = max_step_lp(&zl, &dir.dzl);
        for (k, nt) in nts.iter().enumerate() {
            ap = ap.min(max_step_psd(&nt.lx, &dir.dx[k]));
            ad = ad.min(max_step_psd(&nt.lz, &dir.dz[k]));
        }
        let ap = (0.98 * ap).min(1.0);
        let ad = (0.98 * ad).min(1.0);
        if ap < 1e-8 && ad < 1e-8 {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                stop = Stop::Stalled("step lengths collapsed".into());
                break;
            }
        } else {
            tiny_steps = 0;
        }
        for k in 0..x.len() {
            x[k] = sym(&x[k] + &dir.dx[k] * ap);
            z[k] = sym(&z[k] + &dir.dz[k] * ad);
        }
        xl += &dir.dxl * ap;
        zl += &dir.dzl * ad;
        y += &dir.dy * ad;
    }

    if matches!(stop, Stop::Stalled(_) | Stop::MaxIter) {
        if let Some(b) = best {
            (x, xl, y, z, zl) = (b.x, b.xl, b.y, b.z, b.zl);
            (pobj, dobj, pinf, dinf) = b.vals;
            stop = Stop::Reduced;
        }
    }

    // Back to caller units.
    let y = DVector::from_fn(m, |i, _| sc * y[i] / rn[i]);
    let z = z.into_iter().map(|zk| zk * sc).collect();
    let zl = zl * sc;
    Core {
        x,
        xl,
        y,
        z,
        zl,
        iterations,
        stop,
        pobj,
        dobj,
        pinf,
        dinf,
    }
}

fn assemble(low: &Lowered, core: &Core, status: SolveStatus, certificate: Option<f64>, message: String, iterations: usize) -> ConicSolution {
    let mut primal = Vec::with_capacity(low.slots.len());
    let mut dual_slack = Vec::with_capacity(low.slots.len());
    for slot in &low.slots {
        match *slot {
            Slot::Psd(k) => {
                primal.push(BlockValue::Psd(unembed(&core.x[k])));
                dual_slack.push(BlockValue::Psd(unembed(&core.z[k]) * crate::linalg::C64::new(2.0, 0.0)));
            }
            Slot::Lp(k) => {
                primal.push(BlockValue::Scalar(core.xl[k]));
                dual_slack.push(BlockValue::Scalar(core.zl[k]));
            }
        }
    }
    let pobj = core.pobj + low.obj_constant;
    let dobj = core.dobj + low.obj_constant;
    ConicSolution {
        status,
        primal,
        dual: core.y.iter().copied().collect(),
        dual_slack,
        primal_objective: pobj,
        dual_objective: dobj,
        gap: (pobj - dobj).abs(),
        primal_residual: core.pinf,
        dual_residual: core.dinf,
        iterations,
        certificate,
        message,
    }
}

/// Solves and reports the outcome in the returned status, whatever it is.
pub fn solve_detailed(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    p.validate()?;
    let low = lower(p);
    let core = run(&low.std, opts, None);
    let mut iters = core.iterations;
    match &core.stop {
        Stop::Optimal => return Ok(assemble(&low, &core, SolveStatus::Optimal, None, String::new(), iters)),
        Stop::Reduced => {
            return Ok(assemble(&low, &core, SolveStatus::Optimal, None, "solved to reduced accuracy".into(), iters))
        }
        Stop::Deadline => {
            return Ok(assemble(&low, &core, SolveStatus::NumericalLimit, None, "deadline exceeded".into(), iters))
        }
        _ => {}
    }
    let reason = match &core.stop {
        Stop::MaxIter => format!("iteration limit {} reached", opts.max_iter),
        Stop::Stalled(r) => r.clone(),
        _ => unreachable!(),
    };
    let p1 = phase1::classify(&low.std, opts);
    iters += p1.iterations;
    match p1.kind {
        phase1::Kind::Infeasible => {
            let certificate = -p1.tau;
            Ok(assemble(
                &low,
                &core,
                SolveStatus::Infeasible,
                Some(certificate),
                format!("phase-I certificate {certificate:.3e} ({reason})"),
                iters,
            ))
        }
        phase1::Kind::Strict => {
            let st = p1.start.expect("strict phase-I result carries a start");
            let retry = run(&low.std, opts, Some(&st));
            iters += retry.iterations;
            if matches!(retry.stop, Stop::Optimal | Stop::Reduced) {
                return Ok(assemble(&low, &retry, SolveStatus::Optimal, None, String::new(), iters));
            }
            Ok(assemble(&low, &retry, SolveStatus::NumericalLimit, None, reason, iters))
        }
        phase1::Kind::Boundary => Ok(assemble(
            &low,
            &core,
            SolveStatus::NumericalLimit,
            None,
            format!("feasible set has empty interior ({reason})"),
            iters,
        )),
    }
}

/// Solves to optimality or reports why not as an error.
pub fn solve(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    let sol = solve_detailed(p, opts)?;
    match sol.status {
        SolveStatus::Optimal => Ok(sol),
        SolveStatus::Infeasible => Err(Error::Infeasible {
            certificate: sol.certificate.unwrap_or(f64::NAN),
        }),
        SolveStatus::NumericalLimit => Err(Error::NumericalLimit(sol.message)),
    }
}
