//! Closed-form performance functionals: covariance, CRBs, SINRs, process
//! rate, power, beampattern, and constraint slacks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_eigen, outer, quad_form, trace, trace_product, CMat, CVec, C64};
use crate::scenario::{steering_vector, ChannelSet, Scenario, SteeringBundle, SystemConfig};

/// Slacks below this (natural units) count as violations.
pub const SLACK_TOL: f64 = 1e-8;

/// Transmit beamformers and CPU frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSolution {
    /// Users `1..=K` followed by the server beam.
    pub w_c: Vec<CVec>,
    /// `W_r W_r^H`; may be the zero matrix.
    pub w_r_cov: CMat,
    pub f_hz: f64,
    pub r_s: CMat,
}

impl BeamformingSolution {
    pub fn new(w_c: Vec<CVec>, w_r_cov: CMat, f_hz: f64) -> Result<Self> {
        let r_s = covariance_parts(&w_c, &w_r_cov)?;
        Ok(Self {
            w_c,
            w_r_cov,
            f_hz,
            r_s,
        })
    }

    /// Communication beams only (`W_r = 0`).
    pub fn without_radar(w_c: Vec<CVec>, f_hz: f64) -> Result<Self> {
        let m = w_c
            .first()
            .map(|w| w.len())
            .ok_or_else(|| Error::InvalidArgument("solution needs at least the server beam".into()))?;
        Self::new(w_c, CMat::zeros(m, m), f_hz)
    }

    pub fn m_tx(&self) -> usize {
        self.r_s.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.w_c.len() - 1
    }

    pub fn server_beam(&self) -> &CVec {
        self.w_c.last().expect("solution always holds the server beam")
    }
}

fn covariance_parts(w_c: &[CVec], w_r_cov: &CMat) -> Result<CMat> {
    let m = w_r_cov.nrows();
    if w_r_cov.ncols() != m {
        return Err(Error::DimensionMismatch("radar covariance must be square".into()));
    }
    let mut r = w_r_cov.clone();
    for (k, w) in w_c.iter().enumerate() {
        if w.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "beam {} has length {}, expected {m}",
                k + 1,
                w.len()
            )));
        }
        r += outer(w);
    }
    Ok(r)
}

/// `sum_k w_k w_k^H + W_r W_r^H`.
pub fn covariance(sol: &BeamformingSolution) -> Result<CMat> {
    covariance_parts(&sol.w_c, &sol.w_r_cov)
}

/// The three Fisher traces `tr(A_dot^H A_dot R)`, `tr(A_dot^H A R)`, `tr(A^H A R)`.
pub fn fisher_traces(r_s: &CMat, bundle: &SteeringBundle) -> (f64, C64, f64) {
    let k = bundle.fisher_kernels();
    (
        trace_product(&k.dd, r_s).re,
        trace_product(&k.da, r_s),
        trace_product(&k.aa, r_s).re,
    )
}

/// CRB on the angle of a point target.
pub fn crb_point(r_s: &CMat, bundle: &SteeringBundle, alpha: C64, t: usize, sigma_s2: f64) -> Result<f64> {
    check_square(r_s, bundle.m_tx())?;
    let (dd, da, aa) = fisher_traces(r_s, bundle);
    let den = dd * aa - da.norm_sqr();
    let a2 = alpha.norm_sqr();
    if !(aa > 0.0) || !(den > 1e-13 * dd.abs() * aa) || !(a2 > 0.0) || t == 0 {
        return Err(Error::SingularFisher(format!(
            "denominator {den:.3e} (|alpha|^2 = {a2:.3e})"
        )));
    }
    Ok(sigma_s2 / (2.0 * a2 * t as f64) * aa / den)
}

/// Trace of the CRB matrix of the full target response.
pub fn crb_extended(r_s: &CMat, m_rx: usize, t: usize, sigma_s2: f64) -> Result<f64> {
    let eig = hermitian_eigen(r_s);
    let lmax = eig.values.first().copied().unwrap_or(0.0);
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    if !(lmax > 0.0) || lmin <= 1e-12 * lmax {
        return Err(Error::SingularCovariance(format!(
            "R_s needs to be full rank of M_t (condition number {:.3e})",
            lmax / lmin.max(0.0)
        )));
    }
    let inv_sum: f64 = eig.values.iter().map(|l| 1.0 / l).sum();
    Ok(sigma_s2 * m_rx as f64 / t as f64 * inv_sum)
}

/// `Z(R_s) = [[tr(A_dot^H A_dot R) - t, tr(A_dot^H A R)], [tr(A^H A_dot R), tr(A^H A R)]]`.
pub fn schur_crb_matrix(r_s: &CMat, bundle: &SteeringBundle, t: f64) -> CMat {
    let (dd, da, aa) = fisher_traces(r_s, bundle);
    CMat::from_row_slice(
        2,
        2,
        &[C64::new(dd - t, 0.0), da, da.conj(), C64::new(aa, 0.0)],
    )
}

/// Largest `t` keeping [`schur_crb_matrix`] PSD.
pub fn schur_t_max(r_s: &CMat, bundle: &SteeringBundle) -> f64 {
    let (dd, da, aa) = fisher_traces(r_s, bundle);
    dd - da.norm_sqr() / aa
}

fn check_square(m: &CMat, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n}x{n}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn sinr_at(h: &CVec, sol: &BeamformingSolution, idx: usize, noise: f64) -> f64 {
    let gain = |w: &CVec| h.dotc(w).norm_sqr();
    let signal = gain(&sol.w_c[idx]);
    let interference: f64 = sol
        .w_c
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, w)| gain(w))
        .sum::<f64>()
        + quad_form(&sol.w_r_cov, h);
    signal / (interference + noise)
}

/// SINR of user `k` (1-based).
pub fn comm_sinr(ch: &ChannelSet, sol: &BeamformingSolution, k: usize, noise: f64) -> Result<f64> {
    if k == 0 || k > ch.n_users() || sol.w_c.len() != ch.h.len() {
        return Err(Error::InvalidArgument(format!(
            "user index {k} outside 1..={}",
            ch.n_users()
        )));
    }
    Ok(sinr_at(&ch.h[k - 1], sol, k - 1, noise))
}

/// SINR of the offloading link at the edge server.
pub fn offload_sinr(ch: &ChannelSet, sol: &BeamformingSolution, noise: f64) -> Result<f64> {
    if sol.w_c.len() != ch.h.len() {
        return Err(Error::DimensionMismatch("beam count differs from channel count".into()));
    }
    let s = ch.server();
    Ok(sinr_at(&ch.h[s], sol, s, noise))
}

/// Local plus offloaded bits per second.
pub fn process_rate(f_hz: f64, rho: f64, bandwidth: f64, gamma_p: f64) -> f64 {
    f_hz / rho + bandwidth * (1.0 + gamma_p).log2()
}

pub fn power_used(sol: &BeamformingSolution, kappa: f64) -> f64 {
    sol.w_c.iter().map(|w| w.norm_squared()).sum::<f64>() + trace(&sol.w_r_cov).re + kappa * sol.f_hz.powi(3)
}

/// `(theta, a(theta)^H R_s a(theta))` over the grid.
pub fn beampattern(r_s: &CMat, theta_grid: &[f64], delta: f64) -> Result<Vec<(f64, f64)>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidArgument("beampattern grid is empty".into()));
    }
    theta_grid
        .iter()
        .map(|&th| {
            let a = steering_vector(th, r_s.nrows(), delta)?;
            Ok((th, quad_form(r_s, &a)))
        })
        .collect()
}

/// CSV text with columns `theta_deg,gain_db`.
pub fn beampattern_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("theta_deg,gain_db\n");
    for &(th, g) in points {
        out.push_str(&format!("{:.4},{:.6}\n", th.to_degrees(), 10.0 * g.max(1e-300).log10()));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    Point,
    Extended,
}

impl std::fmt::Display for TargetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetMode::Point => "point",
            TargetMode::Extended => "extended",
        })
    }
}

impl std::str::FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(TargetMode::Point),
            "extended" => Ok(TargetMode::Extended),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

/// One constraint of the master problem; positive `value` means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbReport {
    pub crb_value: f64,
    pub mode: TargetMode,
    pub feasible: bool,
    pub slacks: Vec<Slack>,
}

impl CrbReport {
    pub fn crb_db(&self) -> f64 {
        10.0 * self.crb_value.log10()
    }

    pub fn min_slack(&self) -> f64 {
        self.slacks.iter().map(|s| s.value).fold(f64::INFINITY, f64::min)
    }

    pub fn slack(&self, name: &str) -> Option<f64> {
        self.slacks.iter().find(|s| s.name == name).map(|s| s.value)
    }
}

/// Slacks from received powers `p[i][k] = h_i^H W_k h_i` and totals.
fn slacks_from_powers(cfg: &SystemConfig, own: &[f64], total: &[f64], power: f64, f: f64) -> Vec<Slack> {
    let noise = cfg.noise_comm_w;
    let k_users = cfg.n_users;
    let mut out = Vec::with_capacity(k_users + 4);
    for k in 0..k_users {
        let sinr = own[k] / (total[k] - own[k] + noise);
        out.push(Slack {
            name: format!("sinr_{}", k + 1),
            value: sinr - cfg.sinr_thresholds[k],
        });
    }
    let s = k_users;
    let gamma_p = own[s] / (total[s] - own[s] + noise);
    out.push(Slack {
        name: "rate".into(),
        value: process_rate(f, cfg.cycles_per_bit, cfg.bandwidth_hz, gamma_p) - cfg.rate_min_bps,
    });
    out.push(Slack {
        name: "power".into(),
        value: cfg.power_budget_w - power - cfg.cpu_eff * f.powi(3),
    });
    out.push(Slack {
        name: "f_lower".into(),
        value: f,
    });
    out.push(Slack {
        name: "f_upper".into(),
        value: cfg.f_max_hz - f,
    });
    out
}

/// Re-evaluates every master-problem constraint at a vector solution.
pub fn solution_slacks(scn: &Scenario, sol: &BeamformingSolution) -> Result<Vec<Slack>> {
    let ch = &scn.channels;
    if sol.w_c.len() != ch.h.len() || sol.m_tx() != scn.config.m_tx {
        return Err(Error::DimensionMismatch("solution does not match scenario".into()));
    }
    let own: Vec<f64> = ch.h.iter().zip(&sol.w_c).map(|(h, w)| h.dotc(w).norm_sqr()).collect();
    let total: Vec<f64> = ch.h.iter().map(|h| quad_form(&sol.r_s, h)).collect();
    let power = trace(&sol.r_s).re;
    Ok(slacks_from_powers(&scn.config, &own, &total, power, sol.f_hz))
}

/// Same constraints evaluated at relaxed (matrix) beamformers and a covariance.
pub fn relaxed_slacks(scn: &Scenario, w: &[CMat], r_s: &CMat, f_hz: f64) -> Result<Vec<Slack>> {
    let ch = &scn.channels;
    if w.len() != ch.h.len() {
        return Err(Error::DimensionMismatch("relaxed beam count differs from channel count".into()));
    }
    let own: Vec<f64> = ch.h.iter().zip(w).map(|(h, wk)| quad_form(wk, h)).collect();
    let total: Vec<f64> = ch.h.iter().map(|h| quad_form(r_s, h)).collect();
    Ok(slacks_from_powers(&scn.config, &own, &total, trace(r_s).re, f_hz))
}

pub fn crb_for(scn: &Scenario, r_s: &CMat, mode: TargetMode) -> Result<f64> {
    let cfg = &scn.config;
    match mode {
        TargetMode::Point => crb_point(r_s, &scn.steering, scn.alpha(), cfg.n_symbols, cfg.noise_sense_w),
        TargetMode::Extended => crb_extended(r_s, cfg.m_rx, cfg.n_symbols, cfg.noise_sense_w),
    }
}

/// CRB and freshly computed slacks of a solution.
pub fn evaluate(scn: &Scenario, sol: &BeamformingSolution, mode: TargetMode) -> Result<CrbReport> {
    let crb_value = crb_for(scn, &sol.r_s, mode)?;
    let slacks = solution_slacks(scn, sol)?;
    let feasible = slacks.iter().all(|s| s.value >= -SLACK_TOL);
    Ok(CrbReport {
        crb_value,
        mode,
        feasible,
        slacks,
    })
}

/// Relative Frobenius distance between the stored and recomputed covariance.
pub fn covariance_mismatch(sol: &BeamformingSolution) -> Result<f64> {
    let r = covariance(sol)?;
    Ok(frobenius(&(&r - &sol.r_s)) / frobenius(&r).max(f64::MIN_POSITIVE))
}
