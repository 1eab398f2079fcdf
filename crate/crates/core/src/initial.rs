//! Laboratory / centre-of-mass transforms and the spectral coefficient field
//! of the initial two-particle Gaussian.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::{derive, CaseConfig};
use crate::error::{Error, Result};

/// Linear map between particle coordinates `(x_p, x_b)` and centre-of-mass
/// plus relative coordinates `(X, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTransform {
    pub alpha: f64,
    pub beta: f64,
}

impl FrameTransform {
    pub fn new(alpha: f64) -> Self {
        FrameTransform {
            alpha,
            beta: 1.0 - alpha,
        }
    }

    pub fn lab_to_com(&self, xp: f64, xb: f64) -> (f64, f64) {
        (self.alpha * xp + self.beta * xb, xp - xb)
    }

    pub fn com_to_lab(&self, big_x: f64, x: f64) -> (f64, f64) {
        (big_x + self.beta * x, big_x - self.alpha * x)
    }

    /// `(k_p, k_b) -> (K, k)`; contragredient to [`Self::lab_to_com`] so that
    /// `K X + k x = k_p x_p + k_b x_b`.
    pub fn wavenumbers_to_com(&self, kp: f64, kb: f64) -> (f64, f64) {
        (kp + kb, self.beta * kp - self.alpha * kb)
    }

    pub fn wavenumbers_to_lab(&self, big_k: f64, k: f64) -> (f64, f64) {
        (self.alpha * big_k + k, self.beta * big_k - k)
    }
}

/// Square periodic grid of side `length` with `points` samples per axis.
///
/// Positions run from `-L/2` in steps of `L/N`; frequencies use the standard
/// wrap-around order `Δk · {0, 1, …, N/2-1, -N/2, …, -1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    pub points: usize,
    pub length: f64,
}

impl SpectralGrid {
    pub fn new(points: usize, length: f64) -> Self {
        SpectralGrid { points, length }
    }

    pub fn from_config(cfg: &CaseConfig) -> Self {
        SpectralGrid::new(cfg.points, cfg.length)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn position(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.position(i)).collect()
    }

    /// Signed frequency index of bin `i`.
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.signed_index(i) as f64 * self.dk()
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.length
    }
}

/// Closed-form description of the initial lab-frame Gaussian and its
/// Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub frame: FrameTransform,
    pub k0: f64,
    pub kp0: f64,
    pub kb0: f64,
    pub sigma_xp: f64,
    pub sigma_xb: f64,
    pub sigma_kp: f64,
    pub sigma_kb: f64,
    pub xp0: f64,
    pub xb0: f64,
}

impl GaussianPacket {
    pub fn from_config(cfg: &CaseConfig) -> Result<Self> {
        let der = derive(cfg)?;
        Ok(GaussianPacket {
            frame: FrameTransform::new(cfg.alpha),
            k0: cfg.k0,
            kp0: der.kp0,
            kb0: der.kb0,
            sigma_xp: cfg.sigma_xp,
            sigma_xb: cfg.sigma_xb,
            sigma_kp: der.sigma_kp,
            sigma_kb: der.sigma_kb,
            xp0: cfg.xp0,
            xb0: cfg.xb0,
        })
    }

    pub fn big_k0(&self) -> f64 {
        self.kp0 + self.kb0
    }

    /// Marginal spreads `(σ_K, σ_k)` of `|C|²`.
    pub fn wavenumber_spreads(&self) -> (f64, f64) {
        let FrameTransform { alpha, beta } = self.frame;
        (
            self.sigma_kp.hypot(self.sigma_kb),
            (beta * self.sigma_kp).hypot(alpha * self.sigma_kb),
        )
    }

    /// Covariance of `K` and `k` under `|C|²`.
    pub fn wavenumber_covariance(&self) -> f64 {
        let FrameTransform { alpha, beta } = self.frame;
        beta * self.sigma_kp.powi(2) - alpha * self.sigma_kb.powi(2)
    }

    fn amplitude_norm(&self) -> f64 {
        1.0 / (2.0 * PI * self.sigma_kp * self.sigma_kb).sqrt()
    }

    fn exponent(&self, big_k: f64, k: f64) -> f64 {
        let (kp, kb) = self.frame.wavenumbers_to_lab(big_k, k);
        -(kp - self.kp0).powi(2) / (4.0 * self.sigma_kp.powi(2))
            - (kb - self.kb0).powi(2) / (4.0 * self.sigma_kb.powi(2))
    }

    /// `ln|C(K, k)|`.
    pub fn log_modulus(&self, big_k: f64, k: f64) -> f64 {
        self.amplitude_norm().ln() + self.exponent(big_k, k)
    }

    /// `C(K, k)`, the Fourier transform of the initial packet, normalised so
    /// that `∫∫ |C|² dK dk = 1`. Defined for all real `k`.
    pub fn coefficient(&self, big_k: f64, k: f64) -> Complex64 {
        let (kp, kb) = self.frame.wavenumbers_to_lab(big_k, k);
        let phase = -self.xp0 * (kp - self.kp0) - self.xb0 * (kb - self.kb0);
        Complex64::from_polar(self.amplitude_norm() * self.exponent(big_k, k).exp(), phase)
    }

    /// `K` maximising `|C(K, k)|` at fixed `k`, and the corresponding
    /// `-ln|C|` excess over the global peak.
    pub fn profile(&self, k: f64) -> (f64, f64) {
        let (_, sigma_k) = self.wavenumber_spreads();
        let big_k = self.big_k0() + self.wavenumber_covariance() / sigma_k.powi(2) * (k - self.k0);
        (big_k, (k - self.k0).powi(2) / (4.0 * sigma_k * sigma_k))
    }

    /// Initial wave function in centre-of-mass coordinates, evaluated through
    /// the non-diagonal position covariance matrix.
    pub fn initial_com(&self, big_x: f64, x: f64) -> Complex64 {
        let FrameTransform { alpha, beta } = self.frame;
        let (sp2, sb2) = (self.sigma_xp.powi(2), self.sigma_xb.powi(2));
        let cov_xx_big = alpha * alpha * sp2 + beta * beta * sb2;
        let cov_cross = alpha * sp2 - beta * sb2;
        let cov_xx = sp2 + sb2;
        let det = cov_xx_big * cov_xx - cov_cross * cov_cross;
        let (big_x0, x0) = self.frame.lab_to_com(self.xp0, self.xb0);
        let (u, v) = (big_x - big_x0, x - x0);
        let quad = (cov_xx * u * u - 2.0 * cov_cross * u * v + cov_xx_big * v * v) / det;
        let (big_k0, k0) = self.frame.wavenumbers_to_com(self.kp0, self.kb0);
        let norm = 1.0 / (2.0 * PI * self.sigma_xp * self.sigma_xb).sqrt();
        Complex64::from_polar(norm * (-0.25 * quad).exp(), big_k0 * big_x + k0 * x)
    }
}

/// Rows of `C(K, k)` whose modulus falls below this fraction of the peak are
/// dropped from the banded storage.
pub const SPECTRAL_CUTOFF: f64 = 1e-17;

/// One stored row: all `K` samples at a single relative-wavenumber bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRow {
    pub k_index: usize,
    pub values: Vec<Complex64>,
}

/// `C(K_i, k_j)` sampled on a [`SpectralGrid`].
///
/// Only the band of `k` rows that carries packet weight is stored; all other
/// entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub grid: SpectralGrid,
    /// Mass ratio entering the dispersion relation.
    pub alpha: f64,
    /// Mean relative wavenumber (inverse Planck constant in these units).
    pub k0: f64,
    rows: Vec<SpectralRow>,
    packet: Option<GaussianPacket>,
}

impl CoefficientField {
    /// Assembles a field from explicit rows, sorted by `k_index`.
    pub fn from_rows(
        grid: SpectralGrid,
        alpha: f64,
        k0: f64,
        mut rows: Vec<SpectralRow>,
    ) -> Result<Self> {
        rows.sort_by_key(|r| r.k_index);
        for w in rows.windows(2) {
            if w[0].k_index == w[1].k_index {
                return Err(Error::GridMismatch(format!(
                    "duplicate row {}",
                    w[0].k_index
                )));
            }
        }
        for r in &rows {
            if r.k_index >= grid.points || r.values.len() != grid.points {
                return Err(Error::GridMismatch(format!(
                    "row {} does not fit an N = {} grid",
                    r.k_index, grid.points
                )));
            }
        }
        Ok(CoefficientField {
            grid,
            alpha,
            k0,
            rows,
            packet: None,
        })
    }

    pub fn rows(&self) -> &[SpectralRow] {
        &self.rows
    }

    pub fn packet(&self) -> Option<&GaussianPacket> {
        self.packet.as_ref()
    }

    /// Element `(i, j) = C(K_i, k_j)`.
    pub fn get(&self, i_big_k: usize, i_k: usize) -> Complex64 {
        match self.rows.binary_search_by_key(&i_k, |r| r.k_index) {
            Ok(pos) => self.rows[pos].values[i_big_k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let n = self.grid.points;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for row in &self.rows {
            for (i, v) in row.values.iter().enumerate() {
                out[i * n + row.k_index] = *v;
            }
        }
        out
    }

    /// `Σ |C|² ΔK Δk`.
    pub fn total_probability(&self) -> f64 {
        let dk = self.grid.dk();
        self.rows
            .iter()
            .map(|r| r.values.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * dk
            * dk
    }

    /// Mean and standard deviation of `k` under `|C|²`.
    pub fn k_moments(&self) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for r in &self.rows {
            let w: f64 = r.values.iter().map(|v| v.norm_sqr()).sum();
            let k = self.grid.frequency(r.k_index);
            m0 += w;
            m1 += w * k;
            m2 += w * k * k;
        }
        let mean = m1 / m0;
        (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
    }

    fn check_compatible(&self, other: &CoefficientField) -> Result<()> {
        if self.grid != other.grid || self.alpha != other.alpha || self.k0 != other.k0 {
            return Err(Error::GridMismatch(
                "fields live on different grids or dynamics".into(),
            ));
        }
        Ok(())
    }

    /// Pointwise sum; the closed-form description is dropped.
    pub fn add(&self, other: &CoefficientField) -> Result<CoefficientField> {
        self.check_compatible(other)?;
        let mut rows: Vec<SpectralRow> = self.rows.clone();
        for r in &other.rows {
            match rows.binary_search_by_key(&r.k_index, |x| x.k_index) {
                Ok(pos) => {
                    for (a, b) in rows[pos].values.iter_mut().zip(&r.values) {
                        *a += *b;
                    }
                }
                Err(pos) => rows.insert(pos, r.clone()),
            }
        }
        Ok(CoefficientField {
            grid: self.grid,
            alpha: self.alpha,
            k0: self.k0,
            rows,
            packet: None,
        })
    }

    pub fn scale(&self, factor: Complex64) -> CoefficientField {
        let rows = self
            .rows
            .iter()
            .map(|r| SpectralRow {
                k_index: r.k_index,
                values: r.values.iter().map(|v| v * factor).collect(),
            })
            .collect();
        CoefficientField {
            grid: self.grid,
            alpha: self.alpha,
            k0: self.k0,
            rows,
            packet: None,
        }
    }
}

/// Samples `C(K, k)` of the configured initial packet on `grid`.
///
/// Rows with `k <= 0` are left empty: the right-moving eigenbasis is defined
/// for `k > 0` only.
pub fn coefficient_field(cfg: &CaseConfig, grid: &SpectralGrid) -> Result<CoefficientField> {
    cfg.check()?;
    let packet = GaussianPacket::from_config(cfg)?;
    let (sigma_big_k, sigma_k) = packet.wavenumber_spreads();
    if grid.dk() > sigma_k / 4.0 {
        return Err(Error::GridTooCoarse(format!(
            "spectral spacing {:.4} exceeds sigma_k/4 = {:.4}",
            grid.dk(),
            sigma_k / 4.0
        )));
    }
    let reach_big_k = packet.big_k0().abs() + 8.0 * sigma_big_k;
    let reach_k = cfg.k0 + 8.0 * sigma_k;
    if reach_big_k.max(reach_k) >= grid.nyquist() {
        return Err(Error::GridTooCoarse(format!(
            "packet extends to |K|, |k| = {:.2} beyond the Nyquist wavenumber {:.2}",
            reach_big_k.max(reach_k),
            grid.nyquist()
        )));
    }
    let cut = -SPECTRAL_CUTOFF.ln();
    let n = grid.points;
    let rows: Vec<SpectralRow> = (1..n / 2)
        .into_par_iter()
        .filter_map(|j| {
            let k = grid.frequency(j);
            if packet.profile(k).1 > cut {
                return None;
            }
            let values = (0..n)
                .map(|i| packet.coefficient(grid.frequency(i), k))
                .collect();
            Some(SpectralRow { k_index: j, values })
        })
        .collect();
    Ok(CoefficientField {
        grid: *grid,
        alpha: cfg.alpha,
        k0: cfg.k0,
        rows,
        packet: Some(packet),
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `Σ_{k>0} |C(K,-k)|² / Σ_{k>0} |C(K,k)|²` for a closed-form packet,
/// evaluated in log space so that tiny ratios do not underflow.
pub fn left_mover_ratio(packet: &GaussianPacket, grid: &SpectralGrid) -> f64 {
    let n = grid.points;
    let terms = |sign: f64| {
        (1..n / 2).flat_map(move |j| {
            let k = sign * grid.frequency(j);
            (0..n).map(move |i| 2.0 * packet.log_modulus(grid.frequency(i), k))
        })
    };
    (log_sum_exp(terms(-1.0)) - log_sum_exp(terms(1.0))).exp()
}

/// Weight of the dropped left-moving coefficients relative to the kept
/// right-moving ones.
pub fn left_mover_diagnostic(field: &CoefficientField) -> f64 {
    match field.packet() {
        Some(p) => left_mover_ratio(p, &field.grid),
        None => {
            let mut neg = 0.0;
            let mut pos = 0.0;
            for r in field.rows() {
                let w: f64 = r.values.iter().map(|v| v.norm_sqr()).sum();
                if field.grid.signed_index(r.k_index) > 0 {
                    pos += w;
                } else if field.grid.signed_index(r.k_index) < 0 {
                    neg += w;
                }
            }
            neg / pos
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lab_to_com_examples() {
        let f = FrameTransform::new(1.0 / 3.0);
        let (bx, x) = f.lab_to_com(-1.0, 0.0);
        assert!((bx + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(x, -1.0);
        let half = FrameTransform::new(0.5);
        let (mid, _) = half.lab_to_com(2.0, 5.0);
        assert_eq!(mid, 3.5);
    }

    #[test]
    fn position_map_has_unit_jacobian() {
        for alpha in [0.01f64, 1.0 / 3.0, 0.5, 0.9] {
            let beta = 1.0 - alpha;
            // x_p = X + beta x, x_b = X - alpha x
            let det = 1.0 * (-alpha) - beta * 1.0;
            assert!((det + 1.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn round_trip(alpha in 0.001f64..0.999, xp in -50.0f64..50.0, xb in -50.0f64..50.0) {
            let f = FrameTransform::new(alpha);
            let (bx, x) = f.lab_to_com(xp, xb);
            let (p, b) = f.com_to_lab(bx, x);
            prop_assert!((p - xp).abs() < 1e-13 && (b - xb).abs() < 1e-13);
            let (bk, k) = f.wavenumbers_to_com(xp, xb);
            let (kp, kb) = f.wavenumbers_to_lab(bk, k);
            prop_assert!((kp - xp).abs() < 1e-13 && (kb - xb).abs() < 1e-13);
        }

        #[test]
        fn kernel_phase_invariance(alpha in 0.001f64..0.999,
                                   kp in -100.0f64..100.0, kb in -100.0f64..100.0,
                                   xp in -10.0f64..10.0, xb in -10.0f64..10.0) {
            let f = FrameTransform::new(alpha);
            let (bk, k) = f.wavenumbers_to_com(kp, kb);
            let (bx, x) = f.lab_to_com(xp, xb);
            prop_assert!((bk * bx + k * x - (kp * xp + kb * xb)).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_frequencies_wrap() {
        let g = SpectralGrid::new(8, 2.0 * PI);
        let f: Vec<i64> = (0..8).map(|i| g.signed_index(i)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.position(0), -PI);
    }

    fn small_case() -> (CaseConfig, SpectralGrid) {
        let cfg = CaseConfig {
            length: 25.0,
            points: 1024,
            ..CaseConfig::preset("case2").unwrap()
        };
        (cfg.clone(), SpectralGrid::from_config(&cfg))
    }

    #[test]
    fn peak_at_mean_wavenumbers() {
        let cfg = CaseConfig::preset("case2").unwrap();
        let p = GaussianPacket::from_config(&cfg).unwrap();
        let (sbk, _) = p.wavenumber_spreads();
        let peak = p.coefficient(75.0, 50.0).norm();
        for (dk_big, dk) in [(0.1, 0.0), (0.0, 0.1), (-0.05, 0.07)] {
            assert!(p.coefficient(75.0 + dk_big, 50.0 + dk).norm() < peak);
        }
        let (kstar, excess) = p.profile(50.0);
        assert!((kstar - 75.0).abs() < 1e-12 && excess == 0.0);
        // one marginal standard deviation along the ridge
        let ratio = (p.log_modulus(75.0 + sbk, 50.0 + p.wavenumber_covariance() / sbk)
            - p.log_modulus(75.0, 50.0))
        .exp();
        assert!((ratio - (-0.25f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn parseval_and_k_moments() {
        let (cfg, grid) = small_case();
        let f = coefficient_field(&cfg, &grid).unwrap();
        assert!((f.total_probability() - 1.0).abs() < 1e-6);
        let der = derive(&cfg).unwrap();
        let (mean, std) = f.k_moments();
        assert!((mean - 50.0).abs() < 1e-6);
        assert!((std / der.sigma_k - 1.0).abs() < 1e-3);
    }

    #[test]
    fn refuses_coarse_grids() {
        let cfg = CaseConfig {
            length: 5.0,
            points: 256,
            ..CaseConfig::preset("case2").unwrap()
        };
        assert!(matches!(
            coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)),
            Err(Error::GridTooCoarse(_))
        ));
        let cfg = CaseConfig {
            length: 100.0,
            points: 1024,
            ..CaseConfig::preset("case2").unwrap()
        };
        assert!(coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).is_err());
    }

    #[test]
    fn initial_com_matches_lab_product() {
        let cfg = CaseConfig::preset("case5").unwrap();
        let p = GaussianPacket::from_config(&cfg).unwrap();
        let lab = |xp: f64, xb: f64| {
            let g = |x: f64, x0: f64, s: f64, k: f64| {
                Complex64::from_polar(
                    (2.0 * PI * s * s).powf(-0.25) * (-(x - x0).powi(2) / (4.0 * s * s)).exp(),
                    k * x,
                )
            };
            g(xp, p.xp0, p.sigma_xp, p.kp0) * g(xb, p.xb0, p.sigma_xb, p.kb0)
        };
        for &(bx, x) in &[(-0.33, -1.0), (-0.2, -0.8), (0.1, -1.3), (-0.5, -0.7)] {
            let (xp, xb) = p.frame.com_to_lab(bx, x);
            assert!((p.initial_com(bx, x) - lab(xp, xb)).norm() < 1e-12);
        }
    }

    #[test]
    fn left_movers_are_negligible_for_presets() {
        // same spacing as the default grid, fewer points
        let grid = SpectralGrid::new(1024, 100.0);
        for name in crate::config::PRESET_NAMES {
            let p = GaussianPacket::from_config(&CaseConfig::preset(name).unwrap()).unwrap();
            let r = left_mover_ratio(&p, &grid);
            assert!(r < 1e-30, "{name}: {r}");
        }
    }

    #[test]
    fn left_mover_ratio_tends_to_one_and_decreases() {
        let grid = SpectralGrid::new(512, 25.0);
        let ratio = |k0: f64| {
            let cfg = CaseConfig {
                k0,
                ..CaseConfig::preset("case2").unwrap()
            };
            left_mover_ratio(&GaussianPacket::from_config(&cfg).unwrap(), &grid)
        };
        assert!((ratio(1e-4) - 1.0).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for k0 in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let r = ratio(k0);
            assert!(r < prev, "k0 = {k0}");
            prev = r;
        }
    }

    #[test]
    fn field_algebra() {
        let (cfg, grid) = small_case();
        let f = coefficient_field(&cfg, &grid).unwrap();
        let g = f.scale(Complex64::new(0.0, 2.0));
        let s = f.add(&g).unwrap();
        let row = f.rows()[f.rows().len() / 2].k_index;
        let i = 300;
        assert!((s.get(i, row) - f.get(i, row) * Complex64::new(1.0, 2.0)).norm() < 1e-15);
        assert_eq!(f.get(0, 0), Complex64::new(0.0, 0.0));
        assert!(left_mover_diagnostic(&s) == 0.0);
    }
}
