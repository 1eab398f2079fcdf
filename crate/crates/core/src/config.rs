//! Dimensionless unit system and experiment configuration.
//!
//! Lengths are measured in units of the initial mean separation of the two
//! particles, times in units of the free collision time and masses in units
//! of the reduced mass. The mean relative velocity is therefore 1 and the
//! mean relative wavenumber `k0` plays the role of an inverse Planck constant.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Safety factor used to operationalize the "much smaller than" conditions
/// on the initial packet.
pub const WELL_POSED_MARGIN: f64 = 3.0;

/// Phase convention of the scattering amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Closed forms exactly as tabulated; `t -> exp(ikd)` in the free limit.
    #[default]
    Paper,
    /// Amplitudes referenced so that `t -> 1` in the free limit.
    Global,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convention::Paper => f.write_str("paper"),
            Convention::Global => f.write_str("global"),
        }
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper" => Ok(Convention::Paper),
            "global" => Ok(Convention::Global),
            other => Err(Error::InvalidParameter {
                name: "convention",
                reason: format!("expected `paper` or `global`, got `{other}`"),
            }),
        }
    }
}

/// All free parameters of one experiment, in dimensionless units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    /// Mass ratio `m_p / (m_p + m_b)`.
    pub alpha: f64,
    /// Interaction strength `V0 μ ℓ / ħ²`.
    pub eta: f64,
    /// Mean relative wavenumber.
    pub k0: f64,
    /// Separation of the two delta barriers.
    pub d: f64,
    pub sigma_xp: f64,
    pub sigma_xb: f64,
    pub xp0: f64,
    pub xb0: f64,
    /// Side of the square computational domain.
    #[serde(rename = "L")]
    pub length: f64,
    /// Grid points per axis.
    #[serde(rename = "N")]
    pub points: usize,
    pub tau_fit_start: f64,
    pub tau_fit_end: f64,
    pub dtau: f64,
    pub convention: Convention,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            alpha: 1.0 / 3.0,
            eta: 0.0,
            k0: 50.0,
            d: 0.0,
            sigma_xp: 0.2,
            sigma_xb: 0.2,
            xp0: -1.0,
            xb0: 0.0,
            length: 100.0,
            points: 4096,
            tau_fit_start: 8.0,
            tau_fit_end: 12.0,
            dtau: 0.1,
            convention: Convention::Paper,
        }
    }
}

/// Names of the built-in presets.
pub const PRESET_NAMES: [&str; 6] = ["case1", "case2", "case3", "case4", "case5", "case6"];

const CONFIG_KEYS: [&str; 14] = [
    "alpha",
    "eta",
    "k0",
    "d",
    "sigma_xp",
    "sigma_xb",
    "xp0",
    "xb0",
    "L",
    "N",
    "tau_fit_start",
    "tau_fit_end",
    "dtau",
    "convention",
];

impl CaseConfig {
    /// Built-in experiment presets `case1` .. `case6`.
    pub fn preset(name: &str) -> Option<Self> {
        let (alpha, eta, d) = match name {
            "case1" => (1.0 / 101.0, 24.0, 6.552e-2),
            "case2" => (1.0 / 3.0, 24.0, 6.552e-2),
            "case3" => (1.0 / 101.0, 24.0, 4.037e-2),
            "case4" => (1.0 / 3.0, 24.0, 4.037e-2),
            "case5" => (1.0 / 3.0, 48.0, 4.154e-2),
            "case6" => (1.0 / 3.0, 48.0, 5.060e-2),
            _ => return None,
        };
        Some(CaseConfig {
            alpha,
            eta,
            d,
            ..CaseConfig::default()
        })
    }

    pub fn beta(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Checks the hard invariants every configuration must satisfy.
    ///
    /// Well-posedness of the initial packet is a separate, report-style
    /// check, see [`validate`].
    pub fn check(&self) -> Result<()> {
        fn bad(name: &'static str, reason: impl Into<String>) -> Result<()> {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha", format!("must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.eta >= 0.0) {
            return bad("eta", format!("must be >= 0, got {}", self.eta));
        }
        if !(self.k0 > 0.0) {
            return bad("k0", format!("must be > 0, got {}", self.k0));
        }
        if !(self.d >= 0.0) {
            return bad("d", format!("must be >= 0, got {}", self.d));
        }
        if !(self.sigma_xp > 0.0 && self.sigma_xb > 0.0) {
            return bad("sigma_xp", "position spreads must be > 0");
        }
        if !(self.length > 0.0) {
            return bad("L", format!("must be > 0, got {}", self.length));
        }
        if self.points < 2 || !self.points.is_power_of_two() {
            return bad("N", format!("must be a power of two, got {}", self.points));
        }
        if !(self.xp0 < self.xb0) {
            return bad("xp0", "projectile must start left of the barrier");
        }
        if ((self.xb0 - self.xp0) - 1.0).abs() > 1e-12 {
            return bad(
                "xb0",
                format!(
                    "initial separation is the unit of length, got xb0 - xp0 = {}",
                    self.xb0 - self.xp0
                ),
            );
        }
        if !(self.dtau > 0.0 && self.tau_fit_end > self.tau_fit_start && self.tau_fit_start >= 0.0)
        {
            return bad(
                "dtau",
                "fit window must satisfy 0 <= start < end and dtau > 0",
            );
        }
        Ok(())
    }

    /// Sample times of the fit window, `start, start + dtau, ..., end`.
    pub fn fit_taus(&self) -> Vec<f64> {
        let steps = ((self.tau_fit_end - self.tau_fit_start) / self.dtau + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| self.tau_fit_start + i as f64 * self.dtau)
            .collect()
    }

    /// Parses the flat `key = value` format.
    ///
    /// `alpha`, `eta` and `d` are required; every other key falls back to the
    /// reference defaults. `#` starts a comment. `alpha` also accepts a
    /// fraction such as `1/101`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = CaseConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("unknown key `{key}`"),
                });
            }
            if seen.contains(&key) {
                return Err(Error::Parse {
                    line: line_no,
                    reason: format!("duplicate key `{key}`"),
                });
            }
            seen.push(key);
            let num = |v: &str| -> Result<f64> {
                parse_number(v).ok_or_else(|| Error::Parse {
                    line: line_no,
                    reason: format!("`{key}`: cannot parse `{v}` as a number"),
                })
            };
            match key {
                "alpha" => cfg.alpha = num(value)?,
                "eta" => cfg.eta = num(value)?,
                "k0" => cfg.k0 = num(value)?,
                "d" => cfg.d = num(value)?,
                "sigma_xp" => cfg.sigma_xp = num(value)?,
                "sigma_xb" => cfg.sigma_xb = num(value)?,
                "xp0" => cfg.xp0 = num(value)?,
                "xb0" => cfg.xb0 = num(value)?,
                "L" => cfg.length = num(value)?,
                "N" => {
                    cfg.points = value.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        reason: format!("`N`: cannot parse `{value}` as an integer"),
                    })?
                }
                "tau_fit_start" => cfg.tau_fit_start = num(value)?,
                "tau_fit_end" => cfg.tau_fit_end = num(value)?,
                "dtau" => cfg.dtau = num(value)?,
                "convention" => {
                    cfg.convention = value.parse().map_err(|e: Error| Error::Parse {
                        line: line_no,
                        reason: e.to_string(),
                    })?
                }
                _ => unreachable!(),
            }
        }
        for required in ["alpha", "eta", "d"] {
            if !seen.contains(&required) {
                return Err(Error::Parse {
                    line: 0,
                    reason: format!("missing required key `{required}`"),
                });
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Renders the configuration in the same `key = value` format.
    pub fn to_config_string(&self) -> String {
        format!(
            "alpha = {:?}\neta = {:?}\nk0 = {:?}\nd = {:?}\nsigma_xp = {:?}\nsigma_xb = {:?}\n\
             xp0 = {:?}\nxb0 = {:?}\nL = {:?}\nN = {}\ntau_fit_start = {:?}\ntau_fit_end = {:?}\n\
             dtau = {:?}\nconvention = {}\n",
            self.alpha,
            self.eta,
            self.k0,
            self.d,
            self.sigma_xp,
            self.sigma_xb,
            self.xp0,
            self.xb0,
            self.length,
            self.points,
            self.tau_fit_start,
            self.tau_fit_end,
            self.dtau,
            self.convention
        )
    }
}

fn parse_number(v: &str) -> Option<f64> {
    match v.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().ok()?;
            let den: f64 = den.trim().parse().ok()?;
            Some(num / den)
        }
        None => v.parse().ok(),
    }
}

/// Quantities that follow from a [`CaseConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub beta: f64,
    pub sigma_kp: f64,
    pub sigma_kb: f64,
    /// Mean projectile wavenumber.
    pub kp0: f64,
    /// Mean barrier wavenumber (always zero: barrier at rest).
    pub kb0: f64,
    /// Mean total wavenumber.
    #[serde(rename = "K0")]
    pub big_k0: f64,
    #[serde(rename = "sigma_K")]
    pub sigma_big_k: f64,
    pub sigma_k: f64,
    #[serde(rename = "sigma_X")]
    pub sigma_big_x: f64,
    pub sigma_x: f64,
    /// Initial centre-of-mass coordinate.
    #[serde(rename = "X0")]
    pub big_x0: f64,
    /// Initial relative coordinate.
    pub x0: f64,
    pub tau_max: f64,
}

pub fn derive(cfg: &CaseConfig) -> Result<DerivedParams> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("must lie in (0, 1), got {}", cfg.alpha),
        });
    }
    let alpha = cfg.alpha;
    let beta = 1.0 - alpha;
    let sigma_kp = 1.0 / (2.0 * cfg.sigma_xp);
    let sigma_kb = 1.0 / (2.0 * cfg.sigma_xb);
    let kb0 = 0.0;
    // k0 = beta kp0 - alpha kb0 with the barrier at rest.
    let kp0 = (cfg.k0 + alpha * kb0) / beta;
    Ok(DerivedParams {
        beta,
        sigma_kp,
        sigma_kb,
        kp0,
        kb0,
        big_k0: kp0 + kb0,
        sigma_big_k: (sigma_kp.powi(2) + sigma_kb.powi(2)).sqrt(),
        sigma_k: ((beta * sigma_kp).powi(2) + (alpha * sigma_kb).powi(2)).sqrt(),
        sigma_big_x: ((alpha * cfg.sigma_xp).powi(2) + (beta * cfg.sigma_xb).powi(2)).sqrt(),
        sigma_x: (cfg.sigma_xp.powi(2) + cfg.sigma_xb.powi(2)).sqrt(),
        big_x0: alpha * cfg.xp0 + beta * cfg.xb0,
        x0: cfg.xp0 - cfg.xb0,
        tau_max: tau_max(cfg.length, cfg.points, cfg.k0),
    })
}

/// Latest time before the Nyquist-velocity component has crossed half of the
/// periodic domain.
pub fn tau_max(length: f64, points: usize, k0: f64) -> f64 {
    length * length * k0 / (2.0 * PI * points as f64)
}

/// One violated well-posedness condition: `lhs <= rhs` was required.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {:.6} > {:.6} (required <=)",
            self.condition, self.lhs, self.rhs
        )
    }
}

/// Reports which of the two well-posedness conditions on the initial packet
/// fail: no initial overlap of the particles, and the projectile being
/// faster than the barrier with high probability.
pub fn validate(cfg: &CaseConfig) -> Vec<Violation> {
    let alpha = cfg.alpha;
    let beta = 1.0 - alpha;
    let mut out = Vec::new();

    let pos_spread = (cfg.sigma_xp.powi(2) + cfg.sigma_xb.powi(2)).sqrt();
    let pos_bound = (cfg.xb0 - cfg.xp0) / WELL_POSED_MARGIN;
    if !(pos_spread <= pos_bound) {
        out.push(Violation {
            condition: "position spread vs initial separation",
            lhs: pos_spread,
            rhs: pos_bound,
        });
    }

    // Velocities in units of v0: v = (hbar/m) k with hbar/m_p = beta/k0 and
    // hbar/m_b = alpha/k0.
    let sigma_vp = beta / (2.0 * cfg.sigma_xp) / cfg.k0;
    let sigma_vb = alpha / (2.0 * cfg.sigma_xb) / cfg.k0;
    let kp0 = cfg.k0 / beta;
    let v_rel = beta * kp0 / cfg.k0;
    let vel_spread = (sigma_vp.powi(2) + sigma_vb.powi(2)).sqrt();
    let vel_bound = v_rel / WELL_POSED_MARGIN;
    if !(vel_spread <= vel_bound) {
        out.push(Violation {
            condition: "velocity spread vs initial relative velocity",
            lhs: vel_spread,
            rhs: vel_bound,
        });
    }
    out
}
