//! Scenario parameters and their ingestion from key/value files.
//!
//! All fields are stored in linear SI units. The file format is TOML with
//! keys named exactly like the [`SystemConfig`] fields; power, noise, gain and
//! threshold fields additionally accept a `_dbm` / `_db` variant (and
//! `target_angle_deg` for the angle). Conversion to linear units happens once,
//! here.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs_position: [f64; 3],
    pub server_position: [f64; 3],
    pub user_center: [f64; 3],
    pub user_radius_m: f64,
    pub target_distance_m: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0, 20.0],
            server_position: [20.0, 20.0, 5.0],
            user_center: [30.0, 30.0, 0.0],
            user_radius_m: 10.0,
            target_distance_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub m_tx: usize,
    pub m_rx: usize,
    pub n_users: usize,
    pub power_budget_w: f64,
    pub noise_comm_w: f64,
    pub noise_sense_w: f64,
    pub bandwidth_hz: f64,
    pub cycles_per_bit: f64,
    pub cpu_eff: f64,
    pub f_max_hz: f64,
    pub sinr_thresholds: Vec<f64>,
    pub rate_min_bps: f64,
    pub n_symbols: usize,
    pub element_spacing: f64,
    pub target_angle_rad: f64,
    pub target_rcs_m2: f64,
    pub geometry: Geometry,
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
    pub rician_k: f64,
}

pub const DEFAULT_SINR_DB: f64 = 20.0;

impl Default for SystemConfig {
    /// Desk-scale defaults: 8 transmit / 8 receive antennas, three users.
    fn default() -> Self {
        let n_users = 3;
        Self {
            m_tx: 8,
            m_rx: 8,
            n_users,
            power_budget_w: dbm_to_watts(30.0),
            noise_comm_w: dbm_to_watts(-110.0),
            noise_sense_w: dbm_to_watts(-110.0),
            bandwidth_hz: 1e6,
            cycles_per_bit: 1000.0,
            cpu_eff: 1e-28,
            f_max_hz: 2e9,
            sinr_thresholds: vec![db_to_linear(DEFAULT_SINR_DB); n_users],
            rate_min_bps: 1e6,
            n_symbols: 128,
            element_spacing: 0.5,
            target_angle_rad: 0.0,
            target_rcs_m2: 3.0,
            geometry: Geometry::default(),
            pathloss_ref: db_to_linear(-30.0),
            pathloss_exp: 3.0,
            rician_k: db_to_linear(5.0),
        }
    }
}

impl SystemConfig {
    /// Full-size array of the reference deployment (16 transmit, 20 receive).
    pub fn paper_scale() -> Self {
        Self {
            m_tx: 16,
            m_rx: 20,
            ..Self::default()
        }
    }

    /// Replaces the user count and resizes the thresholds, reusing the first
    /// threshold (or the default) for new users.
    pub fn with_users(mut self, n_users: usize) -> Self {
        let fill = self
            .sinr_thresholds
            .first()
            .copied()
            .unwrap_or_else(|| db_to_linear(DEFAULT_SINR_DB));
        self.n_users = n_users;
        self.sinr_thresholds.resize(n_users, fill);
        self
    }

    pub fn with_sinr_threshold(mut self, gamma: f64) -> Self {
        self.sinr_thresholds = vec![gamma; self.n_users];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.m_tx == 0 || self.m_rx == 0 {
            return bad("m_tx and m_rx must be >= 1");
        }
        if self.n_symbols == 0 {
            return bad("n_symbols must be >= 1");
        }
        for (name, v) in [
            ("power_budget_w", self.power_budget_w),
            ("noise_comm_w", self.noise_comm_w),
            ("noise_sense_w", self.noise_sense_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("cycles_per_bit", self.cycles_per_bit),
            ("element_spacing", self.element_spacing),
            ("pathloss_ref", self.pathloss_ref),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("cpu_eff", self.cpu_eff),
            ("f_max_hz", self.f_max_hz),
            ("rate_min_bps", self.rate_min_bps),
            ("target_rcs_m2", self.target_rcs_m2),
            ("rician_k", self.rician_k),
            ("pathloss_exp", self.pathloss_exp),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.sinr_thresholds.len() != self.n_users {
            return Err(Error::InvalidConfig(format!(
                "sinr_thresholds has {} entries for {} users",
                self.sinr_thresholds.len(),
                self.n_users
            )));
        }
        if self.sinr_thresholds.iter().any(|g| !(*g >= 0.0)) {
            return bad("sinr_thresholds must be >= 0");
        }
        if !(self.geometry.target_distance_m > 0.0) {
            return Err(Error::InvalidGeometry("target distance must be positive".into()));
        }
        if !(self.geometry.user_radius_m >= 0.0) {
            return Err(Error::InvalidGeometry("user radius must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, base: SystemConfig) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.apply(base)
    }

    pub fn from_file(path: &Path, base: SystemConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, base)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScalarOrList {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    bs_position: Option<[f64; 3]>,
    server_position: Option<[f64; 3]>,
    user_center: Option<[f64; 3]>,
    user_radius_m: Option<f64>,
    target_distance_m: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    m_tx: Option<usize>,
    m_rx: Option<usize>,
    n_users: Option<usize>,
    power_budget_w: Option<f64>,
    power_budget_dbm: Option<f64>,
    noise_comm_w: Option<f64>,
    noise_comm_dbm: Option<f64>,
    noise_sense_w: Option<f64>,
    noise_sense_dbm: Option<f64>,
    bandwidth_hz: Option<f64>,
    cycles_per_bit: Option<f64>,
    cpu_eff: Option<f64>,
    f_max_hz: Option<f64>,
    sinr_thresholds: Option<ScalarOrList>,
    sinr_thresholds_db: Option<ScalarOrList>,
    rate_min_bps: Option<f64>,
    n_symbols: Option<usize>,
    element_spacing: Option<f64>,
    target_angle_rad: Option<f64>,
    target_angle_deg: Option<f64>,
    target_rcs_m2: Option<f64>,
    pathloss_ref: Option<f64>,
    pathloss_ref_db: Option<f64>,
    pathloss_exp: Option<f64>,
    rician_k: Option<f64>,
    rician_k_db: Option<f64>,
    geometry: Option<RawGeometry>,
}

fn pick(
    name: &str,
    linear: Option<f64>,
    other: Option<f64>,
    convert: fn(f64) -> f64,
) -> Result<Option<f64>> {
    match (linear, other) {
        (Some(_), Some(_)) => Err(Error::InvalidConfig(format!(
            "`{name}` given both in linear and logarithmic form"
        ))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(convert(v))),
        (None, None) => Ok(None),
    }
}

impl RawConfig {
    fn apply(self, mut cfg: SystemConfig) -> Result<SystemConfig> {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(m_tx);
        set!(m_rx);
        set!(bandwidth_hz);
        set!(cycles_per_bit);
        set!(cpu_eff);
        set!(f_max_hz);
        set!(rate_min_bps);
        set!(n_symbols);
        set!(element_spacing);
        set!(target_rcs_m2);
        set!(pathloss_exp);

        let conv = [
            ("power_budget", self.power_budget_w, self.power_budget_dbm, dbm_to_watts as fn(f64) -> f64),
            ("noise_comm", self.noise_comm_w, self.noise_comm_dbm, dbm_to_watts),
            ("noise_sense", self.noise_sense_w, self.noise_sense_dbm, dbm_to_watts),
            ("pathloss_ref", self.pathloss_ref, self.pathloss_ref_db, db_to_linear),
            ("rician_k", self.rician_k, self.rician_k_db, db_to_linear),
            ("target_angle", self.target_angle_rad, self.target_angle_deg, f64::to_radians),
        ];
        for (name, lin, log, f) in conv {
            if let Some(v) = pick(name, lin, log, f)? {
                match name {
                    "power_budget" => cfg.power_budget_w = v,
                    "noise_comm" => cfg.noise_comm_w = v,
                    "noise_sense" => cfg.noise_sense_w = v,
                    "pathloss_ref" => cfg.pathloss_ref = v,
                    "rician_k" => cfg.rician_k = v,
                    _ => cfg.target_angle_rad = v,
                }
            }
        }

        if let Some(k) = self.n_users {
            cfg = cfg.with_users(k);
        }
        let thresholds = match (self.sinr_thresholds, self.sinr_thresholds_db) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(
                    "`sinr_thresholds` given both in linear and dB form".into(),
                ))
            }
            (Some(v), None) => Some((v, false)),
            (None, Some(v)) => Some((v, true)),
            (None, None) => None,
        };
        if let Some((v, in_db)) = thresholds {
            let conv = |x: f64| if in_db { db_to_linear(x) } else { x };
            cfg.sinr_thresholds = match v {
                ScalarOrList::Scalar(x) => vec![conv(x); cfg.n_users],
                ScalarOrList::List(xs) => xs.into_iter().map(conv).collect(),
            };
        }

        if let Some(g) = self.geometry {
            let geo = &mut cfg.geometry;
            if let Some(v) = g.bs_position {
                geo.bs_position = v;
            }
            if let Some(v) = g.server_position {
                geo.server_position = v;
            }
            if let Some(v) = g.user_center {
                geo.user_center = v;
            }
            if let Some(v) = g.user_radius_m {
                geo.user_radius_m = v;
            }
            if let Some(v) = g.target_distance_m {
                geo.target_distance_m = v;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
