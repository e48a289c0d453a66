//! Physical scenario: array steering vectors and their angular derivatives,
//! target response matrices, and seeded Rician channels.

mod config;

pub use config::{db_to_linear, dbm_to_watts, linear_to_db, Geometry, SystemConfig, DEFAULT_SINR_DB};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{outer, CMat, CVec, C64, J};
use crate::rng::{self, streams};

/// `exp(j 2 pi (m-1) delta sin(theta))` for `m = 1..=n`.
pub fn steering_vector(theta: f64, n: usize, delta: f64) -> Result<CVec> {
    if n == 0 {
        return Err(Error::InvalidArgument("steering vector needs n >= 1".into()));
    }
    let phase = 2.0 * PI * delta * theta.sin();
    Ok(CVec::from_fn(n, |m, _| C64::from_polar(1.0, phase * m as f64)))
}

/// Element-wise `d/dtheta` of [`steering_vector`]; the reference element is
/// constant, so the first entry is exactly zero.
pub fn steering_derivative(theta: f64, n: usize, delta: f64) -> Result<CVec> {
    let a = steering_vector(theta, n, delta)?;
    let rate = 2.0 * PI * delta * theta.cos();
    Ok(CVec::from_fn(n, |m, _| J * (rate * m as f64) * a[m]))
}

/// Steering vectors, derivatives and the point-target response factors for one angle.
#[derive(Debug, Clone)]
pub struct SteeringBundle {
    pub theta: f64,
    pub a: CVec,
    pub b: CVec,
    pub a_dot: CVec,
    pub b_dot: CVec,
    /// `b a^H`
    pub resp: CMat,
    /// `b a_dot^H + b_dot a^H`
    pub resp_dot: CMat,
}

impl SteeringBundle {
    pub fn new(theta: f64, m_tx: usize, m_rx: usize, delta: f64) -> Result<Self> {
        let a = steering_vector(theta, m_tx, delta)?;
        let b = steering_vector(theta, m_rx, delta)?;
        let a_dot = steering_derivative(theta, m_tx, delta)?;
        let b_dot = steering_derivative(theta, m_rx, delta)?;
        let resp = &b * a.adjoint();
        let resp_dot = &b * a_dot.adjoint() + &b_dot * a.adjoint();
        Ok(Self {
            theta,
            a,
            b,
            a_dot,
            b_dot,
            resp,
            resp_dot,
        })
    }

    pub fn for_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(cfg.target_angle_rad, cfg.m_tx, cfg.m_rx, cfg.element_spacing)
    }

    pub fn m_tx(&self) -> usize {
        self.a.len()
    }

    pub fn m_rx(&self) -> usize {
        self.b.len()
    }

    /// `A_dot^H A_dot`, `A_dot^H A`, `A^H A` (all `M_t x M_t`): the matrices
    /// whose traces against `R_s` make up the Fisher information.
    pub fn fisher_kernels(&self) -> FisherKernels {
        FisherKernels {
            dd: self.resp_dot.adjoint() * &self.resp_dot,
            da: self.resp_dot.adjoint() * &self.resp,
            aa: self.resp.adjoint() * &self.resp,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FisherKernels {
    pub dd: CMat,
    pub da: CMat,
    pub aa: CMat,
}

/// Point-target response `alpha b a^H`.
pub fn target_response_point(bundle: &SteeringBundle, alpha: C64) -> CMat {
    bundle.resp.map(|z| z * alpha)
}

/// Extended-target response `sum_i alpha_i b(theta_i) a(theta_i)^H`.
pub fn target_response_extended(scatterers: &[(C64, f64)], cfg: &SystemConfig) -> Result<CMat> {
    if scatterers.is_empty() {
        return Err(Error::InvalidArgument("extended target needs at least one scatterer".into()));
    }
    let mut g = CMat::zeros(cfg.m_rx, cfg.m_tx);
    for &(alpha, theta) in scatterers {
        let a = steering_vector(theta, cfg.m_tx, cfg.element_spacing)?;
        let b = steering_vector(theta, cfg.m_rx, cfg.element_spacing)?;
        g += (&b * a.adjoint()).map(|z| z * alpha);
    }
    Ok(g)
}

/// Reflection coefficient from the radar cross section:
/// `|alpha|^2 = rho_0^2 RCS / d^4`, zero phase.
pub fn target_alpha(cfg: &SystemConfig) -> Result<C64> {
    let d = cfg.geometry.target_distance_m;
    if !(d > 0.0) {
        return Err(Error::InvalidGeometry("target distance must be positive".into()));
    }
    let mag2 = cfg.pathloss_ref.powi(2) * cfg.target_rcs_m2 / d.powi(4);
    Ok(C64::new(mag2.sqrt(), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelModel {
    #[default]
    Rician,
    /// Deterministic line-of-sight component only (infinite Rician factor).
    LosOnly,
}

/// Downlink channels; index `K` (the last one) is the edge server.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub h: Vec<CVec>,
    /// `h_k h_k^H`
    pub q: Vec<CMat>,
    pub alpha: C64,
    pub user_positions: Vec<[f64; 3]>,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.h.len() - 1
    }

    pub fn server(&self) -> usize {
        self.h.len() - 1
    }
}

pub fn pathloss(cfg: &SystemConfig, d: f64) -> f64 {
    cfg.pathloss_ref * d.powf(-cfg.pathloss_exp)
}

fn link(cfg: &SystemConfig, pos: [f64; 3], rng: &mut impl rand::Rng, model: ChannelModel) -> Result<CVec> {
    let bs = cfg.geometry.bs_position;
    let (dx, dy, dz) = (pos[0] - bs[0], pos[1] - bs[1], pos[2] - bs[2]);
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    if !(d > 0.0) {
        return Err(Error::InvalidGeometry(format!("receiver at {pos:?} coincides with the BS")));
    }
    // Broadside is +x; the array axis lies along y.
    let azimuth = dy.atan2(dx);
    let los = steering_vector(azimuth, cfg.m_tx, cfg.element_spacing)?;
    let amp = pathloss(cfg, d).sqrt();
    let h = match model {
        ChannelModel::LosOnly => los * C64::new(amp, 0.0),
        ChannelModel::Rician => {
            let k = cfg.rician_k;
            let nlos = rng::complex_normal_vec(rng, cfg.m_tx, 1.0);
            let w_los = (k / (1.0 + k)).sqrt();
            let w_nlos = (1.0 / (1.0 + k)).sqrt();
            (los * C64::new(w_los, 0.0) + nlos * C64::new(w_nlos, 0.0)) * C64::new(amp, 0.0)
        }
    };
    Ok(h)
}

/// Seeded channels. Receiver `k` draws from its own stream `(seed, k)`, so
/// adding users never perturbs existing ones; the server uses stream 0.
pub fn generate_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    generate_channels_with(cfg, seed, ChannelModel::Rician)
}

pub fn generate_channels_with(cfg: &SystemConfig, seed: u64, model: ChannelModel) -> Result<ChannelSet> {
    cfg.validate()?;
    let geo = &cfg.geometry;
    let mut h = Vec::with_capacity(cfg.n_users + 1);
    let mut user_positions = Vec::with_capacity(cfg.n_users);
    for k in 0..cfg.n_users {
        let mut r = rng::stream(seed, streams::CHANNEL + 1 + k as u64);
        let radius = geo.user_radius_m * rng::uniform(&mut r).sqrt();
        let phi = 2.0 * PI * rng::uniform(&mut r);
        let pos = [
            geo.user_center[0] + radius * phi.cos(),
            geo.user_center[1] + radius * phi.sin(),
            geo.user_center[2],
        ];
        user_positions.push(pos);
        h.push(link(cfg, pos, &mut r, model)?);
    }
    let mut r = rng::stream(seed, streams::CHANNEL);
    h.push(link(cfg, geo.server_position, &mut r, model)?);
    let q = h.iter().map(outer).collect();
    Ok(ChannelSet {
        h,
        q,
        alpha: target_alpha(cfg)?,
        user_positions,
    })
}

/// Everything an optimizer needs about one channel realization.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub steering: SteeringBundle,
}

impl Scenario {
    pub fn generate(config: SystemConfig, seed: u64) -> Result<Self> {
        Self::generate_with(config, seed, ChannelModel::Rician)
    }

    pub fn generate_with(config: SystemConfig, seed: u64, model: ChannelModel) -> Result<Self> {
        let channels = generate_channels_with(&config, seed, model)?;
        let steering = SteeringBundle::for_config(&config)?;
        Ok(Self {
            config,
            channels,
            steering,
        })
    }

    pub fn from_parts(config: SystemConfig, channels: ChannelSet) -> Result<Self> {
        config.validate()?;
        if channels.h.len() != config.n_users + 1 || channels.h.iter().any(|h| h.len() != config.m_tx) {
            return Err(Error::DimensionMismatch("channel set does not match config".into()));
        }
        let steering = SteeringBundle::for_config(&config)?;
        Ok(Self {
            config,
            channels,
            steering,
        })
    }

    pub fn alpha(&self) -> C64 {
        self.channels.alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn assert_vec_close(got: &CVec, want: &[C64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).norm() <= tol, "{g} vs {w}");
        }
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_vector(0.0, 4, 0.5).unwrap();
        assert_vec_close(&a, &[C64::new(1.0, 0.0); 4], 1e-15);
    }

    #[test]
    fn endfire_half_wavelength_alternates() {
        let a = steering_vector(PI / 2.0, 2, 0.5).unwrap();
        assert_vec_close(&a, &[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)], 1e-15);
    }

    #[test]
    fn thirty_degrees_matches_scalar_exponentials() {
        // independent scalar evaluation: exp(j*pi*(m-1)*0.5)
        let want: Vec<C64> = (0..3)
            .map(|m| {
                let ph = PI * m as f64 * 0.5;
                C64::new(ph.cos(), ph.sin())
            })
            .collect();
        assert_vec_close(&steering_vector(PI / 6.0, 3, 0.5).unwrap(), &want, 1e-12);
    }

    #[test]
    fn zero_elements_rejected() {
        assert!(matches!(steering_vector(0.1, 0, 0.5), Err(Error::InvalidArgument(_))));
        assert!(steering_derivative(0.1, 0, 0.5).is_err());
    }

    #[test]
    fn derivative_at_broadside() {
        // central finite difference of the steering vector, step 1e-6
        let h = 1e-6;
        let fd = (steering_vector(h, 3, 0.5).unwrap() - steering_vector(-h, 3, 0.5).unwrap()) / C64::new(2.0 * h, 0.0);
        let d = steering_derivative(0.0, 3, 0.5).unwrap();
        assert_vec_close(&d, &[C64::new(0.0, 0.0), C64::new(0.0, PI), C64::new(0.0, 2.0 * PI)], 1e-12);
        assert_vec_close(&d, fd.as_slice(), 1e-6);
    }

    #[test]
    fn derivative_vanishes_at_endfire_and_single_element() {
        let d = steering_derivative(PI / 2.0, 4, 0.5).unwrap();
        assert!(d.iter().all(|z| z.norm() < 1e-14));
        let d1 = steering_derivative(0.0, 1, 0.5).unwrap();
        assert_eq!(d1[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn bundle_first_derivative_entries_are_zero() {
        let s = SteeringBundle::new(0.3, 5, 6, 0.5).unwrap();
        assert_eq!(s.a_dot[0], C64::new(0.0, 0.0));
        assert_eq!(s.b_dot[0], C64::new(0.0, 0.0));
        assert!(s.a.iter().chain(s.b.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn alpha_conventions() {
        let mut cfg = SystemConfig::default();
        cfg.geometry.target_distance_m = 1.0;
        cfg.target_rcs_m2 = 1.0;
        cfg.pathloss_ref = 1.0;
        assert_relative_eq!(target_alpha(&cfg).unwrap().re, 1.0);
        cfg.geometry.target_distance_m = 50.0;
        cfg.target_rcs_m2 = 3.0;
        cfg.pathloss_ref = 1e-3;
        assert_relative_eq!(target_alpha(&cfg).unwrap().norm_sqr(), 4.8e-13, max_relative = 1e-12);
        cfg.target_rcs_m2 = 0.0;
        assert_eq!(target_alpha(&cfg).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn point_response_at_broadside_is_all_ones() {
        let s = SteeringBundle::new(0.0, 3, 2, 0.5).unwrap();
        let g = target_response_point(&s, C64::new(1.0, 0.0));
        assert!(g.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        let z = target_response_point(&s, C64::new(0.0, 0.0));
        assert!(z.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn extended_response_reduces_to_point() {
        let cfg = SystemConfig::default();
        let s = SteeringBundle::new(0.2, cfg.m_tx, cfg.m_rx, cfg.element_spacing).unwrap();
        let alpha = C64::new(0.3, -0.4);
        let one = target_response_extended(&[(alpha, 0.2)], &cfg).unwrap();
        let two = target_response_extended(&[(alpha, 0.2), (C64::new(0.0, 0.0), -0.7)], &cfg).unwrap();
        let point = target_response_point(&s, alpha);
        assert!((one.clone() - point).norm() < 1e-13);
        assert!((one - two).norm() < 1e-13);
        assert!(target_response_extended(&[], &cfg).is_err());
    }

    #[test]
    fn los_only_channel_norm() {
        let mut cfg = SystemConfig::default();
        cfg.n_users = 0;
        cfg.sinr_thresholds.clear();
        cfg.geometry.bs_position = [0.0, 0.0, 0.0];
        cfg.geometry.server_position = [1.0, 0.0, 0.0];
        let ch = generate_channels_with(&cfg, 3, ChannelModel::LosOnly).unwrap();
        assert_relative_eq!(ch.h[0].norm_squared(), 1e-3 * cfg.m_tx as f64, max_relative = 1e-12);
    }

    #[test]
    fn receiver_at_bs_rejected() {
        let mut cfg = SystemConfig::default();
        cfg.geometry.server_position = cfg.geometry.bs_position;
        assert!(matches!(generate_channels(&cfg, 0), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn channels_are_deterministic_and_nested() {
        let cfg = SystemConfig::default();
        let a = generate_channels(&cfg, 11).unwrap();
        let b = generate_channels(&cfg, 11).unwrap();
        assert_eq!(a.h, b.h);
        let more = generate_channels(&cfg.clone().with_users(4), 11).unwrap();
        assert_eq!(&more.h[..3], &a.h[..3]);
        assert_eq!(more.h[4], a.h[3]);
        for (h, q) in a.h.iter().zip(&a.q) {
            assert_relative_eq!(crate::linalg::trace(q).re, h.norm_squared(), max_relative = 1e-12);
        }
    }
}
