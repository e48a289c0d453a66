//! Relaxation-based beamforming designs.
//!
//! Every design works on the semidefinite relaxation of the master problem
//! (beam covariances `W_k = w_k w_k^H` with the rank constraint dropped) and
//! eliminates the CPU frequency `f` with a golden-section search: at fixed `f`
//! each subproblem is a conic program, and the optimal value is convex in `f`.
//!
//! - Point target: [`solve_point_nocomm`], [`solve_point_ao`], [`solve_point_sca`].
//! - Extended target: [`solve_extended_nocomm`], [`solve_extended_ao`],
//!   [`solve_extended_sca`].
//!
//! Vectors are recovered with `w_k = W_k h_k / sqrt(h_k^H W_k h_k)`, which
//! keeps each beam's own received power and never raises interference.

mod common;
mod extended;
mod golden;
mod model;
mod point;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::conic::SolverOptions;
use crate::error::{Error, Result};
use crate::linalg::{fix_global_phase, hermitian_eigen, hermitian_part, pivoted_cholesky, quad_form, CMat, CVec, C64};
use crate::metrics::{evaluate, schur_t_max, BeamformingSolution, CrbReport, Slack, TargetMode};
use crate::scenario::Scenario;

pub use extended::{solve_extended_ao, solve_extended_nocomm, solve_extended_sca};

/// The mode's design with the server beam off and all computation local.
pub fn solve_local_only(scn: &Scenario, mode: TargetMode, opts: &SolveOptions) -> Result<Outcome> {
    let model = model::Model::new(scn)?;
    let design = common::Design { mode, users: true };
    let run = common::run_local_only(&model, design, opts)?;
    common::finish(&model, mode, run, opts)
}
pub use golden::{minimize as golden_minimize, Minimum};
pub use model::required_offload_sinr;
pub use point::{
    block1_profile, full_power_offload_suffices, solve_point_ao, solve_point_nocomm, solve_point_nocomm_sdp, solve_point_sca,
    steering_gain,
};

/// How the SCA designs pick their first expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaInit {
    /// One alternating-optimization round from the shared starting point.
    #[default]
    OneAoPass,
    /// The power-minimizing feasible point itself.
    PowerMin,
}

impl FromStr for ScaInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-ao-pass" | "ao" => Ok(ScaInit::OneAoPass),
            "power-min" => Ok(ScaInit::PowerMin),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Outer loops stop once the relative objective change drops below this.
    pub tol_obj: f64,
    pub max_outer: usize,
    /// Bracket width (Hz) of the golden-section search over `f`.
    pub f_search_tol: f64,
    pub sca_init: ScaInit,
    /// `lambda_2 / lambda_1` below which a relaxed matrix counts as rank one.
    pub rank_tol: f64,
    /// Grid points of the first, unhinted search over `f`.
    pub f_grid: usize,
    /// Pins the CPU frequency (Hz) instead of searching it.
    pub f_fixed: Option<f64>,
    pub conic: SolverOptions,
    pub deadline: Option<Instant>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_obj: 1e-5,
            max_outer: 100,
            f_search_tol: 1e3,
            sca_init: ScaInit::default(),
            rank_tol: 1e-6,
            f_grid: 9,
            f_fixed: None,
            conic: SolverOptions {
                tol_feas: 1e-10,
                tol_gap: 1e-10,
                max_iter: 200,
                deadline: None,
            },
            deadline: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_obj > 0.0
            && self.f_search_tol > 0.0
            && self.rank_tol > 0.0
            && self.max_outer > 0
            && self.f_fixed.is_none_or(|f| f >= 0.0);
        if !ok {
            return Err(Error::InvalidArgument(
                "solve options need positive tolerances, max_outer >= 1 and a nonnegative pinned frequency".into(),
            ));
        }
        Ok(())
    }

    pub fn with_deadline(mut self, deadline: Instant) -> Self {
        self.deadline = Some(deadline);
        self
    }

    pub(crate) fn conic_options(&self) -> SolverOptions {
        let mut c = self.conic.clone();
        c.deadline = match (c.deadline, self.deadline) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        c
    }

    pub(crate) fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(d) if Instant::now() > d => Err(Error::NumericalLimit("deadline exceeded".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoStatus {
    Converged,
    IterationLimit,
    ClosedForm,
}

/// Per-outer-iteration record of a run.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoTrace {
    /// Natural-unit CRB of the relaxed iterate.
    pub objective: Vec<f64>,
    /// Constraint slacks of the relaxed iterate, natural units.
    pub slacks: Vec<Vec<Slack>>,
    /// Conic-solver iterations spent in each outer iteration.
    pub inner_iterations: Vec<usize>,
    pub status: AlgoStatus,
}

impl AlgoTrace {
    fn new() -> Self {
        Self {
            objective: Vec::new(),
            slacks: Vec::new(),
            inner_iterations: Vec::new(),
            status: AlgoStatus::IterationLimit,
        }
    }

    /// Whether the objective never rose by more than `1e-7 (1 + |value|)`
    /// relative to the previous entry, measured relative to the first value.
    pub fn is_monotone(&self) -> bool {
        let scale = self.objective.first().map_or(1.0, |v| v.abs().max(f64::MIN_POSITIVE));
        self.objective
            .windows(2)
            .all(|w| w[1] / scale <= w[0] / scale + 1e-7 * (1.0 + (w[0] / scale).abs()))
    }
}

/// The relaxed optimum before rank-one recovery, natural units.
#[derive(Debug, Clone)]
pub struct RelaxedData {
    pub w: Vec<CMat>,
    pub r_s: CMat,
    /// CRB of the relaxed covariance: the bound the recovered beams can only match.
    pub crb_bound: f64,
    /// `lambda_2 / lambda_1` of each relaxed beam matrix.
    pub rank_ratios: Vec<f64>,
    /// Schur epigraph value returned by the solver (point target only).
    pub t_star: Option<f64>,
    pub f_hz: f64,
}

impl RelaxedData {
    /// Relative distance between `t*` and the Schur complement recomputed
    /// from the relaxed covariance.
    pub fn schur_mismatch(&self, scn: &Scenario) -> Option<f64> {
        let t = self.t_star?;
        let exact = schur_t_max(&self.r_s, &scn.steering);
        Some((t - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub solution: BeamformingSolution,
    pub report: CrbReport,
    pub trace: AlgoTrace,
    pub relaxed: RelaxedData,
    /// Columns of the dedicated radar beamformer `W_r` (extended target).
    pub radar_beams: CMat,
}

/// Result of [`extract_rank_one`].
#[derive(Debug, Clone)]
pub struct RankOne {
    /// `sqrt(lambda_1)` times the leading eigenvector, global phase fixed.
    pub vector: CVec,
    pub ratio: f64,
    pub certified: bool,
}

/// Leading-eigenvector factor of a PSD matrix and its `lambda_2 / lambda_1`.
pub fn extract_rank_one(w: &CMat, rank_tol: f64) -> RankOne {
    let n = w.nrows();
    let eig = hermitian_eigen(w);
    let l1 = eig.values.first().copied().unwrap_or(0.0);
    if n == 0 || l1 <= 0.0 {
        return RankOne {
            vector: CVec::zeros(n),
            ratio: 0.0,
            certified: true,
        };
    }
    let l2 = eig.values.get(1).copied().unwrap_or(0.0).max(0.0);
    let mut v: CVec = eig.vectors.column(0).into_owned() * C64::new(l1.sqrt(), 0.0);
    fix_global_phase(&mut v);
    let ratio = l2 / l1;
    RankOne {
        vector: v,
        ratio,
        certified: ratio <= rank_tol,
    }
}

/// Whether the two nonzero eigenvalues of `x x^H + y y^H` coincide.
///
/// They are `(|x|^2 + |y|^2 +- sqrt(D)) / 2` with
/// `D = (|x|^2 - |y|^2)^2 + 4 |x^H y|^2`, so this holds exactly when
/// `|x| = |y|` and `x^H y = 0`.
pub fn lemma2_eigen_check(x: &CVec, y: &CVec) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", x.len(), y.len())));
    }
    let z = x * x.adjoint() + y * y.adjoint();
    let eig = hermitian_eigen(&z);
    let l1 = eig.values.first().copied().unwrap_or(0.0);
    let l2 = eig.values.get(1).copied().unwrap_or(0.0);
    let scale = x.norm_squared() + y.norm_squared();
    Ok((l1 - l2).abs() <= 1e-9 * scale.max(f64::MIN_POSITIVE))
}

/// `W h / sqrt(h^H W h)`: same own received power as `W`, no more power in
/// any other direction.
pub fn construct_beam(w: &CMat, h: &CVec) -> CVec {
    let g = quad_form(w, h);
    if g <= 0.0 {
        return CVec::zeros(w.nrows());
    }
    let mut v = (w * h) / C64::new(g.sqrt(), 0.0);
    fix_global_phase(&mut v);
    v
}

/// Eigenvalues of the radar residual above `-CLIP * lambda_max` are clipped to zero.
const CLIP: f64 = 1e-9;
/// Pivots below this fraction of the largest diagonal end the radar factorization.
const PIVOT_TOL: f64 = 1e-12;

/// Rank-one construction for every beam plus, when `keep_r` is set, the
/// radar covariance `R - sum w w^H` that leaves `R` untouched.
pub(crate) fn recover(scn: &Scenario, w: &[CMat], r: &CMat, f_hz: f64, keep_r: bool) -> Result<(BeamformingSolution, CMat)> {
    let m = scn.config.m_tx;
    let beams: Vec<CVec> = w.iter().zip(&scn.channels.h).map(|(wk, h)| construct_beam(wk, h)).collect();
    if !keep_r {
        return Ok((BeamformingSolution::without_radar(beams, f_hz)?, CMat::zeros(m, 0)));
    }
    let resid = hermitian_part(&beams.iter().fold(r.clone(), |acc, b| acc - b * b.adjoint()));
    let eig = hermitian_eigen(&resid);
    let lmax = hermitian_eigen(r).values.first().copied().unwrap_or(0.0).max(0.0);
    let lmin = eig.values.last().copied().unwrap_or(0.0);
    if lmin < -CLIP * lmax {
        return Err(Error::ConstructionViolation {
            constraint: "radar_covariance_psd".into(),
            violation: lmin,
        });
    }
    let clipped = CMat::from_fn(m, m, |i, j| {
        (0..m)
            .filter(|&c| eig.values[c] > 0.0)
            .map(|c| eig.vectors[(i, c)] * eig.vectors[(j, c)].conj() * eig.values[c])
            .sum()
    });
    let factor = pivoted_cholesky(&clipped, PIVOT_TOL);
    let cov = &factor * factor.adjoint();
    Ok((BeamformingSolution::new(beams, cov, f_hz)?, factor))
}

/// Evaluates a recovered solution and rejects it if any constraint is
/// violated beyond the slack tolerance.
pub(crate) fn checked_report(scn: &Scenario, sol: &BeamformingSolution, mode: TargetMode) -> Result<CrbReport> {
    let report = evaluate(scn, sol, mode)?;
    if !report.feasible {
        let worst = report
            .slacks
            .iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("reports always carry slacks");
        return Err(Error::ConstructionViolation {
            constraint: worst.name.clone(),
            violation: worst.value,
        });
    }
    Ok(report)
}

/// Algorithm names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolverKind {
    #[serde(rename = "point-ao")]
    PointAo,
    #[serde(rename = "point-sca")]
    PointSca,
    #[serde(rename = "ext-ao")]
    ExtAo,
    #[serde(rename = "ext-sca")]
    ExtSca,
    #[serde(rename = "nocomm")]
    NoComm,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::PointAo,
        SolverKind::PointSca,
        SolverKind::ExtAo,
        SolverKind::ExtSca,
        SolverKind::NoComm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::PointAo => "point-ao",
            SolverKind::PointSca => "point-sca",
            SolverKind::ExtAo => "ext-ao",
            SolverKind::ExtSca => "ext-sca",
            SolverKind::NoComm => "nocomm",
        }
    }

    /// Target model the solver works on; `nocomm` serves both.
    pub fn mode(self, nocomm_mode: TargetMode) -> TargetMode {
        match self {
            SolverKind::PointAo | SolverKind::PointSca => TargetMode::Point,
            SolverKind::ExtAo | SolverKind::ExtSca => TargetMode::Extended,
            SolverKind::NoComm => nocomm_mode,
        }
    }

    pub fn run(self, scn: &Scenario, mode: TargetMode, opts: &SolveOptions) -> Result<Outcome> {
        match (self, self.mode(mode)) {
            (SolverKind::PointAo, _) => solve_point_ao(scn, opts),
            (SolverKind::PointSca, _) => solve_point_sca(scn, opts),
            (SolverKind::ExtAo, _) => solve_extended_ao(scn, opts),
            (SolverKind::ExtSca, _) => solve_extended_sca(scn, opts),
            (SolverKind::NoComm, TargetMode::Point) => solve_point_nocomm(scn, opts),
            (SolverKind::NoComm, TargetMode::Extended) => solve_extended_nocomm(scn, opts),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}
