//! Brute-force references for the spectral evolver: direct quadrature of the
//! eigenstate expansion at single points, and the closed-form free packet.

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::amplitude::Interaction;
use crate::config::{derive, CaseConfig};
use crate::error::{Error, Result};
use crate::evolve::{dispersion, in_gap};
use crate::initial::GaussianPacket;

/// Integration window and refinement schedule for [`direct_eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Half-width of the `k` window in `σ_k`, and of the `K` window (around
    /// the ridge of `|C|`) in conditional standard deviations.
    pub window_sigmas: f64,
    /// Gauss-Legendre points per panel.
    pub order: usize,
    pub min_panels: usize,
    pub max_panels: usize,
    /// Absolute change between successive panel doublings that counts as
    /// converged.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            window_sigmas: 10.0,
            order: 16,
            min_panels: 8,
            max_panels: 1024,
            tolerance: 1e-9,
        }
    }
}

/// Composite rule on `[a, b]` with `panels` equal panels.
fn composite_nodes(rule: &[(f64, f64)], a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.len());
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(node, weight) in rule {
            out.push((lo + 0.5 * h * (node + 1.0), 0.5 * h * weight));
        }
    }
    out
}

struct Window {
    k_lo: f64,
    k_hi: f64,
    big_k0: f64,
    k0: f64,
    ridge_slope: f64,
    big_k_half: f64,
}

impl Window {
    fn new(cfg: &CaseConfig, spec: &QuadratureSpec) -> Result<Self> {
        let der = derive(cfg)?;
        let cov = der.beta * der.sigma_kp.powi(2) - cfg.alpha * der.sigma_kb.powi(2);
        let cond = (der.sigma_big_k.powi(2) - cov * cov / der.sigma_k.powi(2))
            .max(0.0)
            .sqrt();
        let half = spec.window_sigmas * der.sigma_k;
        Ok(Window {
            k_lo: (cfg.k0 - half).max(1e-12 * cfg.k0),
            k_hi: cfg.k0 + half,
            big_k0: der.big_k0,
            k0: cfg.k0,
            ridge_slope: cov / der.sigma_k.powi(2),
            big_k_half: spec.window_sigmas * cond,
        })
    }
}

/// Ψ(X, x, τ) by direct 2D quadrature of an arbitrary coefficient function
/// against the scattering eigenstates of `cfg`.
pub fn direct_eval_fn(
    cfg: &CaseConfig,
    spec: &QuadratureSpec,
    coefficient: impl Fn(f64, f64) -> Complex64,
    big_x: f64,
    x: f64,
    tau: f64,
) -> Result<Complex64> {
    if in_gap(x, cfg.d) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: format!("x = {x} lies inside the interaction interval"),
        });
    }
    let rule = GaussLegendre::new(spec.order).map_err(|_| Error::InvalidParameter {
        name: "order",
        reason: "Gauss-Legendre order must be at least 2".into(),
    })?;
    let rule = rule.as_node_weight_pairs();
    let window = Window::new(cfg, spec)?;
    let interaction = Interaction::from_config(cfg);
    let alpha = cfg.alpha;

    let integrate = |panels: usize| -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for (k, wk) in composite_nodes(rule, window.k_lo, window.k_hi, panels) {
            let amp = interaction.amplitude(k)?;
            let eigen = if x < 0.0 {
                Complex64::from_polar(1.0, k * x) + amp.r * Complex64::from_polar(1.0, -k * x)
            } else {
                amp.t * Complex64::from_polar(1.0, k * x)
            };
            let centre = window.big_k0 + window.ridge_slope * (k - window.k0);
            let mut inner = Complex64::new(0.0, 0.0);
            for (big_k, wbk) in composite_nodes(
                rule,
                centre - window.big_k_half,
                centre + window.big_k_half,
                panels,
            ) {
                let phase = big_k * big_x - dispersion(alpha, cfg.k0, big_k, k) * tau;
                inner += coefficient(big_k, k) * Complex64::from_polar(wbk, phase);
            }
            total += inner * eigen * wk;
        }
        Ok(total / (2.0 * PI))
    };

    let mut panels = spec.min_panels;
    let mut previous = integrate(panels)?;
    loop {
        panels *= 2;
        let next = integrate(panels)?;
        if (next - previous).norm() < spec.tolerance {
            return Ok(next);
        }
        if panels >= spec.max_panels {
            return Err(Error::QuadratureNoConvergence {
                previous: format!("{previous}"),
                last: format!("{next}"),
            });
        }
        previous = next;
    }
}

/// Ψ(X, x, τ) of the configured Gaussian packet by direct quadrature.
pub fn direct_eval(cfg: &CaseConfig, big_x: f64, x: f64, tau: f64) -> Result<Complex64> {
    let packet = GaussianPacket::from_config(cfg)?;
    direct_eval_fn(
        cfg,
        &QuadratureSpec::default(),
        |bk, k| packet.coefficient(bk, k),
        big_x,
        x,
        tau,
    )
}

/// One-dimensional Gaussian of spread `sigma` started at `x0` with mean
/// wavenumber `k`, evolved freely with `ħ/m = a`.
fn free_gaussian(x: f64, x0: f64, sigma: f64, k: f64, a: f64, t: f64) -> Complex64 {
    let s2 = sigma * sigma;
    let spread = Complex64::new(1.0, a * t / (2.0 * s2));
    let shift = x - x0 - a * k * t;
    let exponent = -shift * shift / Complex64::new(4.0 * s2, 2.0 * a * t)
        + Complex64::new(0.0, k * x - a * t * k * k / 2.0);
    (2.0 * PI * s2).powf(-0.25) / spread.sqrt() * exponent.exp()
}

/// Closed-form Ψ(X, x, τ) with no interaction: in the laboratory frame the
/// two particles disperse independently with `ħ/m_p = β/k0`, `ħ/m_b = α/k0`.
pub fn free_packet(cfg: &CaseConfig, big_x: f64, x: f64, tau: f64) -> Result<Complex64> {
    let p = GaussianPacket::from_config(cfg)?;
    let (xp, xb) = p.frame.com_to_lab(big_x, x);
    let (alpha, beta) = (p.frame.alpha, p.frame.beta);
    Ok(
        free_gaussian(xp, p.xp0, p.sigma_xp, p.kp0, beta / cfg.k0, tau)
            * free_gaussian(xb, p.xb0, p.sigma_xb, p.kb0, alpha / cfg.k0, tau),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Convention;
    use crate::evolve::{Evolver, WaveField};
    use crate::initial::{coefficient_field, SpectralGrid};

    fn free(name: &str) -> CaseConfig {
        CaseConfig {
            eta: 0.0,
            d: 0.0,
            convention: Convention::Global,
            ..CaseConfig::preset(name).unwrap()
        }
    }

    #[test]
    fn free_packet_starts_as_initial_state() {
        let cfg = CaseConfig::preset("case5").unwrap();
        let p = GaussianPacket::from_config(&cfg).unwrap();
        for &(bx, x) in &[(-0.3, -1.0), (-0.4, -0.9), (0.0, -1.2)] {
            let a = free_packet(&cfg, bx, x, 0.0).unwrap();
            assert!((a - p.initial_com(bx, x)).norm() < 1e-13);
        }
    }

    #[test]
    fn free_packet_moments() {
        let cfg = free("case2");
        let der = derive(&cfg).unwrap();
        let grid = SpectralGrid::new(512, 16.0);
        let tau = 3.0;
        let f = WaveField::from_fn(grid, tau, cfg.alpha, 0.0, |bx, x| {
            free_packet(&cfg, bx, x, tau).unwrap()
        });
        let (mut m0, mut mx, mut mbx, mut mxx) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..512 {
            for j in 0..512 {
                let w = f.get(i, j).norm_sqr();
                let (bx, x) = (grid.position(i), grid.position(j));
                m0 += w;
                mx += w * x;
                mbx += w * bx;
                mxx += w * x * x;
            }
        }
        let (mean_x, mean_bx) = (mx / m0, mbx / m0);
        assert!((mean_x - (der.x0 + tau)).abs() < 1e-9);
        assert!((mean_bx - (der.big_x0 + cfg.alpha * tau)).abs() < 1e-9);
        let var = mxx / m0 - mean_x * mean_x;
        let expected = der.sigma_x.powi(2) + (der.sigma_k * tau / cfg.k0).powi(2);
        assert!((var / expected - 1.0).abs() < 1e-9, "{var} {expected}");
    }

    #[test]
    fn quadrature_matches_free_packet() {
        let cfg = free("case2");
        let der = derive(&cfg).unwrap();
        for tau in [0.0, 2.0] {
            let (bx, x) = (der.big_x0 + cfg.alpha * tau, der.x0 + tau);
            let q = direct_eval(&cfg, bx, x, tau).unwrap();
            let exact = free_packet(&cfg, bx, x, tau).unwrap();
            assert!((q - exact).norm() < 1e-9, "{tau}: {q} {exact}");
        }
    }

    #[test]
    fn quadrature_is_linear_in_coefficients() {
        let cfg = CaseConfig::preset("case2").unwrap();
        let p = GaussianPacket::from_config(&cfg).unwrap();
        let spec = QuadratureSpec::default();
        let one = direct_eval_fn(&cfg, &spec, |a, b| p.coefficient(a, b), -0.3, -1.0, 0.5).unwrap();
        let two = direct_eval_fn(
            &cfg,
            &spec,
            |a, b| 2.0 * p.coefficient(a, b),
            -0.3,
            -1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn quadrature_rejects_gap_points() {
        let cfg = CaseConfig::preset("case2").unwrap();
        assert!(direct_eval(&cfg, 0.0, 0.01, 1.0).is_err());
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let cfg = CaseConfig::preset("case2").unwrap();
        let spec = QuadratureSpec {
            max_panels: 16,
            tolerance: 0.0,
            ..QuadratureSpec::default()
        };
        let p = GaussianPacket::from_config(&cfg).unwrap();
        let r = direct_eval_fn(&cfg, &spec, |a, b| p.coefficient(a, b), -0.3, -1.0, 0.5);
        assert!(matches!(r, Err(Error::QuadratureNoConvergence { .. })));
    }

    #[test]
    fn quadrature_matches_evolver_on_small_grid() {
        let cfg = CaseConfig {
            length: 25.0,
            points: 1024,
            ..CaseConfig::preset("case6").unwrap()
        };
        let grid = SpectralGrid::from_config(&cfg);
        let c = coefficient_field(&cfg, &grid).unwrap();
        let ev = Evolver::new(&c, Interaction::from_config(&cfg)).unwrap();
        let tau = 3.0;
        let snap = ev.snapshot(tau).unwrap();
        // one point in each lobe
        for (bx, x) in [(0.68, 2.0), (0.68, -2.0)] {
            let m = ((bx + 12.5) / grid.dx()).round() as usize;
            let i = ((x + 12.5) / grid.dx()).round() as usize;
            let value = snap.row(m)[i];
            let q = direct_eval(&cfg, grid.position(m), grid.position(i), tau).unwrap();
            assert!(value.norm() > 1e-2, "{bx} {x}: {value}");
            assert!((value - q).norm() < 1e-6, "{value} {q}");
        }
    }
}
