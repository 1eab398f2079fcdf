//! Stationary-phase predictions of the asymptotic two-particle kinematics.

use std::fmt;
use std::str::FromStr;

use crate::amplitude::{self, Branch, Interaction};
use crate::analysis::{BranchKinematics, Source};
use crate::config::{derive, CaseConfig};
use crate::error::{Error, Result};

/// Half-width of the search window in units of `σ_k`.
const WINDOW_SIGMAS: f64 = 8.0;
const SCAN_POINTS: usize = 8000;

/// How the dominant wavenumbers of a branch are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum KmaxRule {
    /// `K = K0`; `k` is the local maximum nearest `k0` of the relative
    /// wavenumber density times the amplitude modulus,
    /// `exp(-(k-k0)²/(2σ_k²)) · |a_k|`.
    #[default]
    Marginal,
    /// Global maximum of `|C(K, k) · a_k|` over both wavenumbers.
    Joint,
}

impl KmaxRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            KmaxRule::Marginal => "marginal",
            KmaxRule::Joint => "joint",
        }
    }
}

impl fmt::Display for KmaxRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KmaxRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal" => Ok(KmaxRule::Marginal),
            "joint" => Ok(KmaxRule::Joint),
            other => Err(Error::InvalidParameter {
                name: "kmax_rule",
                reason: format!("expected marginal or joint, got `{other}`"),
            }),
        }
    }
}

/// Modulus and phase slope of a branch amplitude as functions of `k`.
pub trait AmplitudeModel {
    fn log_modulus(&self, k: f64, branch: Branch) -> Result<f64>;
    fn log_modulus_derivative(&self, k: f64, branch: Branch) -> Result<f64>;
    fn phase_derivative(&self, k: f64, branch: Branch) -> Result<f64>;
}

impl AmplitudeModel for Interaction {
    fn log_modulus(&self, k: f64, branch: Branch) -> Result<f64> {
        amplitude::log_modulus(k, self.eta, self.d, branch)
    }

    fn log_modulus_derivative(&self, k: f64, branch: Branch) -> Result<f64> {
        amplitude::log_modulus_derivative(k, self.eta, self.d, branch)
    }

    fn phase_derivative(&self, k: f64, branch: Branch) -> Result<f64> {
        let a = self.amplitude(k)?;
        Ok(match branch {
            Branch::T => a.dphi_t,
            Branch::R => a.dphi_r,
        })
    }
}

/// `|a_k| = c` with no phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantAmplitude(pub f64);

impl AmplitudeModel for ConstantAmplitude {
    fn log_modulus(&self, _k: f64, _branch: Branch) -> Result<f64> {
        Ok(self.0.ln())
    }

    fn log_modulus_derivative(&self, _k: f64, _branch: Branch) -> Result<f64> {
        Ok(0.0)
    }

    fn phase_derivative(&self, _k: f64, _branch: Branch) -> Result<f64> {
        Ok(0.0)
    }
}

/// Packet quantities the maximiser needs.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PacketShape {
    k0: f64,
    big_k0: f64,
    sigma_k: f64,
    /// `cov(K, k) / σ_k²`, the slope of the ridge of `|C|` in `(k, K)`.
    ridge_slope: f64,
}

impl PacketShape {
    fn new(cfg: &CaseConfig) -> Result<Self> {
        let der = derive(cfg)?;
        let cov = der.beta * der.sigma_kp.powi(2) - cfg.alpha * der.sigma_kb.powi(2);
        Ok(PacketShape {
            k0: cfg.k0,
            big_k0: der.big_k0,
            sigma_k: der.sigma_k,
            ridge_slope: cov / der.sigma_k.powi(2),
        })
    }

    /// Curvature factor of the Gaussian term: the marginal density of `k`
    /// has variance `σ_k²`, the profile of `|C|` has variance `2σ_k²`.
    fn spread(&self, rule: KmaxRule) -> f64 {
        match rule {
            KmaxRule::Marginal => self.sigma_k * self.sigma_k,
            KmaxRule::Joint => 2.0 * self.sigma_k * self.sigma_k,
        }
    }

    fn big_k_at(&self, rule: KmaxRule, k: f64) -> f64 {
        match rule {
            KmaxRule::Marginal => self.big_k0,
            KmaxRule::Joint => self.big_k0 + self.ridge_slope * (k - self.k0),
        }
    }
}

fn log_weight(
    shape: &PacketShape,
    rule: KmaxRule,
    model: &dyn AmplitudeModel,
    branch: Branch,
    k: f64,
) -> Result<f64> {
    Ok(-(k - shape.k0).powi(2) / (2.0 * shape.spread(rule)) + model.log_modulus(k, branch)?)
}

fn log_weight_slope(
    shape: &PacketShape,
    rule: KmaxRule,
    model: &dyn AmplitudeModel,
    branch: Branch,
    k: f64,
) -> Result<f64> {
    Ok(-(k - shape.k0) / shape.spread(rule) + model.log_modulus_derivative(k, branch)?)
}

/// Bisects a `+ → -` sign change of `slope` on `[lo, hi]` down to `tol`.
fn refine_max(
    slope: &dyn Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        let s = slope(mid)?;
        if s == 0.0 {
            return Ok(mid);
        }
        if s > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        best_k: 0.5 * (lo + hi),
    })
}

/// Dominant `(K, k)` of a branch. For the reflected branch `k` is the
/// incident wavenumber `k'`; the outgoing relative wavenumber is `-k'`.
pub fn find_kmax(
    cfg: &CaseConfig,
    model: &dyn AmplitudeModel,
    branch: Branch,
    rule: KmaxRule,
) -> Result<(f64, f64)> {
    let shape = PacketShape::new(cfg)?;
    let half = WINDOW_SIGMAS * shape.sigma_k;
    let lo = (shape.k0 - half).max(1e-9 * shape.k0);
    let hi = shape.k0 + half;
    let tol = 1e-10 * shape.k0;
    let slope = |k: f64| log_weight_slope(&shape, rule, model, branch, k);

    // An exact stationary point at k0 (e.g. a flat amplitude) is kept as is.
    if slope(shape.k0)? == 0.0 {
        return Ok((shape.big_k_at(rule, shape.k0), shape.k0));
    }
    let ks: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let slopes = ks.iter().map(|&k| slope(k)).collect::<Result<Vec<_>>>()?;
    let mut maxima = Vec::new();
    for i in 0..SCAN_POINTS {
        if slopes[i] > 0.0 && slopes[i + 1] <= 0.0 {
            maxima.push(refine_max(&slope, ks[i], ks[i + 1], tol)?);
        }
    }
    let best = match rule {
        KmaxRule::Marginal => maxima
            .iter()
            .copied()
            .min_by(|a, b| (a - shape.k0).abs().total_cmp(&(b - shape.k0).abs())),
        KmaxRule::Joint => {
            let mut best: Option<(f64, f64)> = None;
            for &k in &maxima {
                let w = log_weight(&shape, rule, model, branch, k)?;
                if best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((k, w));
                }
            }
            best.map(|(k, _)| k)
        }
    };
    let k = best.ok_or(Error::NoConvergence { best_k: shape.k0 })?;
    Ok((shape.big_k_at(rule, k), k))
}

/// Stationary-phase result for one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpPrediction {
    pub branch: Branch,
    pub big_k_max: f64,
    /// Maximising incident relative wavenumber (`k'` for the reflected
    /// branch).
    pub k_max: f64,
    /// `dφ/dk` of the branch amplitude at `k_max`.
    pub dphi: f64,
    pub dx_b: f64,
    pub dx_p: f64,
    pub v_b: f64,
    pub v_p: f64,
}

impl SpPrediction {
    /// Kinematics of a branch whose packet is dominated by `(K, k)` and whose
    /// amplitude phase slope there is `dphi`.
    pub fn at(alpha: f64, k0: f64, branch: Branch, big_k: f64, k: f64, dphi: f64) -> Self {
        let beta = 1.0 - alpha;
        let (k_out, sign) = match branch {
            Branch::T => (k, 1.0),
            Branch::R => (-k, -1.0),
        };
        SpPrediction {
            branch,
            big_k_max: big_k,
            k_max: k,
            dphi,
            dx_b: sign * alpha * dphi,
            dx_p: -sign * beta * dphi,
            v_b: alpha * beta * big_k / k0 - alpha * k_out / k0,
            v_p: alpha * beta * big_k / k0 + beta * k_out / k0,
        }
    }

    pub fn kinematics(&self) -> BranchKinematics {
        BranchKinematics {
            branch: self.branch,
            source: Source::StationaryPhase,
            dx_b: self.dx_b,
            v_b: self.v_b,
            dx_p: self.dx_p,
            v_p: self.v_p,
            fit: None,
        }
    }
}

pub fn predict_with(
    cfg: &CaseConfig,
    model: &dyn AmplitudeModel,
    branch: Branch,
    rule: KmaxRule,
) -> Result<SpPrediction> {
    let (big_k, k) = find_kmax(cfg, model, branch, rule)?;
    let dphi = model.phase_derivative(k, branch)?;
    Ok(SpPrediction::at(cfg.alpha, cfg.k0, branch, big_k, k, dphi))
}

/// Prediction with the configured interaction and the default rule.
pub fn predict(cfg: &CaseConfig, branch: Branch) -> Result<SpPrediction> {
    cfg.check()?;
    predict_with(
        cfg,
        &Interaction::from_config(cfg),
        branch,
        KmaxRule::default(),
    )
}
