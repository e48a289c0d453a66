//! Monte-Carlo checks of the CRB formulas: seeded echoes, the least-squares
//! response estimator (extended target) and a concentrated-likelihood angle
//! estimator (point target), compared against the bounds in [`crate::metrics`].
//!
//! Trial `i` of a batch draws its signal and noise from streams keyed by
//! `(seed, i)`, so batches are reproducible and independent of the
//! execution mode.

use serde::Serialize;

use crate::algorithms::golden_minimize;
use crate::error::{Error, Result};
use crate::linalg::{hpd_inverse, psd_factor, CMat, C64};
use crate::metrics::{crb_extended, crb_point};
use crate::par::{map_indexed, Execution};
use crate::rng::{self, streams};
use crate::scenario::{steering_vector, Scenario, SteeringBundle};

/// `Y = G S + N` with i.i.d. `CN(0, sigma_s2)` noise.
pub fn simulate_echo(g: &CMat, s: &CMat, sigma_s2: f64, seed: u64) -> Result<CMat> {
    if g.ncols() != s.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "G is {}x{}, S is {}x{}",
            g.nrows(),
            g.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let mut r = rng::stream(seed, streams::ECHO_NOISE);
    let noise = rng::complex_normal_mat(&mut r, g.nrows(), s.ncols(), sigma_s2);
    Ok(g * s + noise)
}

/// `T` columns drawn i.i.d. from `CN(0, r_s)`.
pub fn sample_signal(r_s: &CMat, t: usize, seed: u64) -> Result<CMat> {
    if r_s.nrows() != r_s.ncols() {
        return Err(Error::DimensionMismatch("signal covariance must be square".into()));
    }
    let f = psd_factor(r_s);
    let mut r = rng::stream(seed, streams::SIGNAL);
    let x = rng::complex_normal_mat(&mut r, f.ncols(), t, 1.0);
    Ok(&f * x)
}

/// Least-squares response estimate `Y S^H (S S^H)^-1`.
pub fn ls_estimate_trm(y: &CMat, s: &CMat) -> Result<CMat> {
    if y.ncols() != s.ncols() {
        return Err(Error::DimensionMismatch(format!("Y has {} columns, S has {}", y.ncols(), s.ncols())));
    }
    let gram = s * s.adjoint();
    let inv = invert_gram(&gram)?;
    Ok(y * s.adjoint() * inv)
}

fn invert_gram(gram: &CMat) -> Result<CMat> {
    let scale = (0..gram.nrows()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let inv = hpd_inverse(gram).ok_or(Error::RankDeficientSignal)?;
    let cond = scale * (0..inv.nrows()).map(|i| inv[(i, i)].re).fold(0.0, f64::max);
    if !(scale > 0.0) || !cond.is_finite() || cond > 1e12 {
        return Err(Error::RankDeficientSignal);
    }
    Ok(inv)
}

/// Array and signal geometry of the point-target estimator.
#[derive(Debug, Clone, Copy)]
pub struct ArrayShape {
    pub m_tx: usize,
    pub m_rx: usize,
    pub spacing: f64,
}

/// Angle grid from `lo` to `hi` (radians) with `step` spacing, both ends included.
pub fn angle_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

/// Maximizes `|b^H Y S^H a|^2 / (|b|^2 a^H S S^H a)` over the grid, refines
/// by golden section to `refine_tol`, then returns `(theta, alpha)` with
/// `alpha` the least-squares gain at that angle.
pub fn mle_point(y: &CMat, s: &CMat, shape: ArrayShape, theta_grid: &[f64], refine_tol: f64) -> Result<(f64, C64)> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidArgument("angle grid is empty".into()));
    }
    if y.nrows() != shape.m_rx || s.nrows() != shape.m_tx || y.ncols() != s.ncols() {
        return Err(Error::DimensionMismatch("echo, signal and array sizes disagree".into()));
    }
    let ysh = y * s.adjoint();
    let gram = s * s.adjoint();
    let fit = |theta: f64| -> Result<(f64, C64)> {
        let a = steering_vector(theta, shape.m_tx, shape.spacing)?;
        let b = steering_vector(theta, shape.m_rx, shape.spacing)?;
        let num = b.dotc(&(&ysh * &a));
        let den = b.norm_squared() * crate::linalg::quad_form(&gram, &a);
        if !(den > 0.0) {
            return Ok((0.0, C64::new(0.0, 0.0)));
        }
        Ok((num.norm_sqr() / den, num / den))
    };
    let mut best = (theta_grid[0], f64::NEG_INFINITY);
    for &th in theta_grid {
        let (v, _) = fit(th)?;
        if v > best.1 {
            best = (th, v);
        }
    }
    let step = if theta_grid.len() > 1 {
        (theta_grid[theta_grid.len() - 1] - theta_grid[0]) / (theta_grid.len() - 1) as f64
    } else {
        refine_tol.max(1e-6)
    };
    let (lo, hi) = (best.0 - step, best.0 + step);
    let m = golden_minimize(lo, hi, refine_tol, 3, Some(best.0), |th| {
        let (v, alpha) = fit(th)?;
        Ok((-v, alpha))
    })?;
    Ok((m.x, m.payload))
}

/// What a batch compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimand {
    /// Angle of a point target.
    Angle,
    /// Full target response matrix.
    Response,
}

/// Aggregated trials of one validation run.
#[derive(Debug, Clone, Serialize)]
pub struct TrialBatch {
    pub estimand: Estimand,
    pub n_trials: usize,
    pub seed: u64,
    /// Angle estimates (point target); empty for the response estimator.
    pub estimates: Vec<f64>,
    pub squared_errors: Vec<f64>,
    pub mse: f64,
    /// Bound averaged over the transmitted realizations: the formula at each
    /// trial's sample covariance `S S^H / T`.
    pub crb: f64,
    /// Bound at the design covariance.
    pub crb_nominal: f64,
    /// `mse / crb`.
    pub ratio: f64,
}

impl TrialBatch {
    fn from_trials(estimand: Estimand, seed: u64, trials: Vec<(f64, f64, f64)>, crb_nominal: f64) -> Result<Self> {
        let n = trials.len();
        if n == 0 {
            return Err(Error::InvalidArgument("a batch needs at least one trial".into()));
        }
        let mse = trials.iter().map(|t| t.1).sum::<f64>() / n as f64;
        let crb = trials.iter().map(|t| t.2).sum::<f64>() / n as f64;
        let estimates = match estimand {
            Estimand::Angle => trials.iter().map(|t| t.0).collect(),
            Estimand::Response => Vec::new(),
        };
        Ok(Self {
            estimand,
            n_trials: n,
            seed,
            estimates,
            squared_errors: trials.iter().map(|t| t.1).collect(),
            mse,
            crb,
            crb_nominal,
            ratio: mse / crb,
        })
    }

    /// `mse / crb_nominal`.
    pub fn nominal_ratio(&self) -> f64 {
        self.mse / self.crb_nominal
    }
}

/// Everything a validation batch needs besides the trial count.
#[derive(Debug, Clone)]
pub struct EchoSetup {
    pub shape: ArrayShape,
    pub theta: f64,
    pub alpha: C64,
    pub r_s: CMat,
    pub n_symbols: usize,
    pub noise: f64,
}

impl EchoSetup {
    /// Setup of a scenario's target with the given transmit covariance.
    pub fn from_scenario(scn: &Scenario, r_s: CMat) -> Self {
        let cfg = &scn.config;
        Self {
            shape: ArrayShape {
                m_tx: cfg.m_tx,
                m_rx: cfg.m_rx,
                spacing: cfg.element_spacing,
            },
            theta: cfg.target_angle_rad,
            alpha: scn.alpha(),
            r_s,
            n_symbols: cfg.n_symbols,
            noise: cfg.noise_sense_w,
        }
    }

    /// `|alpha|^2 tr(R_s) T / sigma_s^2`.
    pub fn snr(&self) -> f64 {
        self.alpha.norm_sqr() * crate::linalg::trace(&self.r_s).re * self.n_symbols as f64 / self.noise
    }

    fn check(&self) -> Result<()> {
        if self.r_s.nrows() != self.shape.m_tx || self.r_s.ncols() != self.shape.m_tx {
            return Err(Error::DimensionMismatch("covariance does not match the transmit array".into()));
        }
        if self.n_symbols == 0 || !(self.noise > 0.0) {
            return Err(Error::InvalidArgument("need T >= 1 and positive noise".into()));
        }
        Ok(())
    }

    fn bundle(&self) -> Result<SteeringBundle> {
        SteeringBundle::new(self.theta, self.shape.m_tx, self.shape.m_rx, self.shape.spacing)
    }

    fn trial_seed(seed: u64, i: usize) -> u64 {
        seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64)
    }
}

/// Angle MSE of [`mle_point`] against the point-target CRB.
pub fn validate_point(
    setup: &EchoSetup,
    n_trials: usize,
    seed: u64,
    theta_grid: &[f64],
    refine_tol: f64,
    exec: Execution,
) -> Result<TrialBatch> {
    setup.check()?;
    let bundle = setup.bundle()?;
    let t = setup.n_symbols;
    let nominal = crb_point(&setup.r_s, &bundle, setup.alpha, t, setup.noise)?;
    let g = &bundle.resp * setup.alpha;
    let trials: Result<Vec<_>> = map_indexed(exec, n_trials, |i| {
        let ts = EchoSetup::trial_seed(seed, i);
        let s = sample_signal(&setup.r_s, t, ts)?;
        let y = simulate_echo(&g, &s, setup.noise, ts)?;
        let sample = &s * s.adjoint() / C64::new(t as f64, 0.0);
        let crb = crb_point(&sample, &bundle, setup.alpha, t, setup.noise)?;
        let (th, _) = mle_point(&y, &s, setup.shape, theta_grid, refine_tol)?;
        Ok((th, (th - setup.theta).powi(2), crb))
    })
    .into_iter()
    .collect();
    TrialBatch::from_trials(Estimand::Angle, seed, trials?, nominal)
}

/// Total squared error of [`ls_estimate_trm`] against the extended-target
/// CRB; the true response is a seeded Gaussian matrix.
pub fn validate_extended(setup: &EchoSetup, n_trials: usize, seed: u64, exec: Execution) -> Result<TrialBatch> {
    setup.check()?;
    let t = setup.n_symbols;
    let m_rx = setup.shape.m_rx;
    let nominal = crb_extended(&setup.r_s, m_rx, t, setup.noise)?;
    let mut r = rng::stream(seed, streams::TEST);
    let g = rng::complex_normal_mat(&mut r, m_rx, setup.shape.m_tx, 1.0);
    let trials: Result<Vec<_>> = map_indexed(exec, n_trials, |i| {
        let ts = EchoSetup::trial_seed(seed, i);
        let s = sample_signal(&setup.r_s, t, ts)?;
        let y = simulate_echo(&g, &s, setup.noise, ts)?;
        let sample = &s * s.adjoint() / C64::new(t as f64, 0.0);
        let crb = crb_extended(&sample, m_rx, t, setup.noise)?;
        let est = ls_estimate_trm(&y, &s)?;
        Ok((0.0, (est - &g).norm_squared(), crb))
    })
    .into_iter()
    .collect();
    TrialBatch::from_trials(Estimand::Response, seed, trials?, nominal)
}
