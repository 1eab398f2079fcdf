//! Reflection and transmission amplitudes of the symmetric double-delta
//! interaction `V(x) = V0 [δ(x + d/2) + δ(x - d/2)]`.
//!
//! Everything is expressed through `λ = η / k`. With `u = k d` the
//! transmission probability has the compact form
//! `T = 1 / (1 + F²)`, `F = 2 λ (cos u + λ sin u)`, which is what the width
//! finder differentiates.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;

use crate::config::{CaseConfig, Convention};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Parameters of the interaction plus the amplitude phase convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub eta: f64,
    pub d: f64,
    pub convention: Convention,
}

impl Interaction {
    pub fn new(eta: f64, d: f64, convention: Convention) -> Self {
        Interaction { eta, d, convention }
    }

    pub fn from_config(cfg: &CaseConfig) -> Self {
        Interaction::new(cfg.eta, cfg.d, cfg.convention)
    }

    pub fn amplitude(&self, k: f64) -> Result<ScatterAmplitude> {
        amplitude(k, self.eta, self.d, self.convention)
    }
}

/// Scattering data at a single relative wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterAmplitude {
    pub k: f64,
    pub r: Complex64,
    pub t: Complex64,
    /// Phase of `t` in `(-π, π]`.
    pub phi_t: f64,
    /// Phase of `r` in `(-π, π]`.
    pub phi_r: f64,
    /// `dφ_t/dk`.
    pub dphi_t: f64,
    /// `dφ_r/dk`.
    pub dphi_r: f64,
}

impl ScatterAmplitude {
    pub fn transmission(&self) -> f64 {
        self.t.norm_sqr()
    }

    pub fn reflection(&self) -> f64 {
        self.r.norm_sqr()
    }
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveWavenumber(k))
    }
}

/// Transmission denominator `D` (with `t = 1/D` under `Convention::Paper`) and
/// its derivative with respect to `k`.
fn transmission_denominator(k: f64, eta: f64, d: f64) -> (Complex64, Complex64) {
    let lam = eta / k;
    let dlam = -lam / k;
    let (s, c) = (k * d).sin_cos();
    let e = Complex64::new(c, -s);
    let den = (1.0 + 2.0 * I * lam) * e + 2.0 * I * lam * lam * s;
    let dden = 2.0 * I * dlam * e - I * d * (1.0 + 2.0 * I * lam) * e
        + 4.0 * I * lam * dlam * s
        + 2.0 * I * lam * lam * d * c;
    (den, dden)
}

/// Reflection denominator and its derivative; `r = 2λ(cos u + λ sin u) / D_r`.
fn reflection_denominator(k: f64, eta: f64, d: f64) -> (Complex64, Complex64) {
    let lam = eta / k;
    let dlam = -lam / k;
    let (s, c) = (k * d).sin_cos();
    let e = Complex64::new(c, -s);
    let den = (I - 2.0 * lam) * e - 2.0 * lam * lam * s;
    let dden = -2.0 * dlam * e
        - I * d * (I - 2.0 * lam) * e
        - 4.0 * lam * dlam * s
        - 2.0 * lam * lam * d * c;
    (den, dden)
}

/// Closed-form amplitudes at wavenumber `k`.
///
/// The global convention multiplies both amplitudes by `exp(-ikd)`, which
/// makes `t = 1, r = 0` in the free limit and shifts both phase derivatives
/// by `-d`.
pub fn amplitude(k: f64, eta: f64, d: f64, convention: Convention) -> Result<ScatterAmplitude> {
    check_k(k)?;
    let lam = eta / k;
    let (s, c) = (k * d).sin_cos();
    let (den_t, dden_t) = transmission_denominator(k, eta, d);
    let (den_r, dden_r) = reflection_denominator(k, eta, d);
    let mut t = den_t.inv();
    let mut r = 2.0 * lam * (c + lam * s) / den_r;
    let mut dphi_t = -(dden_t / den_t).im;
    let mut dphi_r = -(dden_r / den_r).im;
    if convention == Convention::Global {
        let shift = Complex64::new(c, -s);
        t *= shift;
        r *= shift;
        dphi_t -= d;
        dphi_r -= d;
    }
    Ok(ScatterAmplitude {
        k,
        r,
        t,
        phi_t: principal_arg(t),
        phi_r: principal_arg(r),
        dphi_t,
        dphi_r,
    })
}

fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        a + 2.0 * PI
    } else {
        a
    }
}

/// `|t_k|²`, independent of the phase convention.
pub fn transmission_probability(k: f64, eta: f64, d: f64) -> Result<f64> {
    check_k(k)?;
    let f = barrier_factor(k, eta, d)[0];
    Ok(1.0 / (1.0 + f * f))
}

/// `dφ_t/dk` from the analytic logarithmic derivative of the denominator.
pub fn phase_derivative(k: f64, eta: f64, d: f64, convention: Convention) -> Result<f64> {
    check_k(k)?;
    let (den, dden) = transmission_denominator(k, eta, d);
    let dphi = -(dden / den).im;
    Ok(match convention {
        Convention::Paper => dphi,
        Convention::Global => dphi - d,
    })
}

/// Which amplitude a weight or phase refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Tunneling / transmission.
    T,
    /// Reflection / backscattering.
    R,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::T => "T",
            Branch::R => "R",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(Branch::T),
            "R" => Ok(Branch::R),
            other => Err(Error::InvalidParameter {
                name: "branch",
                reason: format!("expected T or R, got `{other}`"),
            }),
        }
    }
}

/// `d/dk ln|a_k|` for the transmission or reflection amplitude.
///
/// `ln|t| = -½ ln(1 + F²)` and `ln|r| = ln|F| - ½ ln(1 + F²)`.
pub fn log_modulus_derivative(k: f64, eta: f64, d: f64, branch: Branch) -> Result<f64> {
    check_k(k)?;
    let [f, df, ..] = barrier_factor(k, eta, d);
    let g = 1.0 + f * f;
    let dlog_t = -f * df / g;
    Ok(match branch {
        Branch::T => dlog_t,
        Branch::R => df / f + dlog_t,
    })
}

/// `ln|a_k|` for the transmission or reflection amplitude.
pub fn log_modulus(k: f64, eta: f64, d: f64, branch: Branch) -> Result<f64> {
    check_k(k)?;
    let f = barrier_factor(k, eta, d)[0];
    let log_t = -0.5 * (1.0 + f * f).ln();
    Ok(match branch {
        Branch::T => log_t,
        Branch::R => f.abs().ln() + log_t,
    })
}

/// Leibniz product of two truncated Taylor jets `[f, f', f'', f''']`.
fn jet_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0],
        a[1] * b[0] + a[0] * b[1],
        a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
        a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
    ]
}

/// `F(k) = 2η cos(kd)/k + 2η² sin(kd)/k²` and its first three k-derivatives.
fn barrier_factor(k: f64, eta: f64, d: f64) -> [f64; 4] {
    let (s, c) = (k * d).sin_cos();
    let d2 = d * d;
    let cos_jet = [c, -d * s, -d2 * c, d2 * d * s];
    let sin_jet = [s, d * c, -d2 * s, -d2 * d * c];
    let inv = 1.0 / k;
    let inv_k = [inv, -inv * inv, 2.0 * inv.powi(3), -6.0 * inv.powi(4)];
    let inv_k2 = [
        inv * inv,
        -2.0 * inv.powi(3),
        6.0 * inv.powi(4),
        -24.0 * inv.powi(5),
    ];
    let a = jet_mul(cos_jet, inv_k);
    let b = jet_mul(sin_jet, inv_k2);
    let mut out = [0.0; 4];
    for n in 0..4 {
        out[n] = 2.0 * eta * a[n] + 2.0 * eta * eta * b[n];
    }
    out
}

/// `[T, dT/dk, d²T/dk², d³T/dk³]` at fixed `eta`, `d`.
pub fn transmission_jet(k: f64, eta: f64, d: f64) -> Result<[f64; 4]> {
    check_k(k)?;
    let f = barrier_factor(k, eta, d);
    // G = 1 + F², T = 1/G
    let g = [
        1.0 + f[0] * f[0],
        2.0 * f[0] * f[1],
        2.0 * (f[1] * f[1] + f[0] * f[2]),
        2.0 * (3.0 * f[1] * f[2] + f[0] * f[3]),
    ];
    let gi = 1.0 / g[0];
    Ok([
        gi,
        -g[1] * gi * gi,
        2.0 * g[1] * g[1] * gi.powi(3) - g[2] * gi * gi,
        -6.0 * g[1].powi(3) * gi.powi(4) + 6.0 * g[1] * g[2] * gi.powi(3) - g[3] * gi * gi,
    ])
}

/// Feature of `k ↦ T(k)` on which `k0` should sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    FirstMin,
    FirstMax,
    FirstRisingInflection,
    FirstFallingInflection,
}

impl Feature {
    pub fn name(&self) -> &'static str {
        match self {
            Feature::FirstMin => "first_min",
            Feature::FirstMax => "first_max",
            Feature::FirstRisingInflection => "first_rising_inflection",
            Feature::FirstFallingInflection => "first_falling_inflection",
        }
    }
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_min" => Ok(Feature::FirstMin),
            "first_max" => Ok(Feature::FirstMax),
            "first_rising_inflection" => Ok(Feature::FirstRisingInflection),
            "first_falling_inflection" => Ok(Feature::FirstFallingInflection),
            other => Err(Error::InvalidParameter {
                name: "feature",
                reason: format!("unknown feature `{other}`"),
            }),
        }
    }
}

const WIDTH_SCAN_STEPS: usize = 10_000;
const WIDTH_TOL: f64 = 1e-10;

/// Smallest `d > 0` that places `k0` on the requested feature of `T(k)`.
///
/// Scans `u = k0 d` over `(0, 2π]` for a sign change of `dT/dk` (extrema) or
/// `d²T/dk²` (inflections) at `k = k0`, keeps the first root whose
/// curvature/slope has the right sign, and bisects it to `|Δd| < 1e-10`.
pub fn find_width(eta: f64, k0: f64, feature: Feature) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("must be > 0, got {eta}"),
        });
    }
    check_k(k0)?;
    let (order, qualifier_order, qualifier_sign) = match feature {
        Feature::FirstMin => (1, 2, 1.0),
        Feature::FirstMax => (1, 2, -1.0),
        Feature::FirstRisingInflection => (2, 1, 1.0),
        Feature::FirstFallingInflection => (2, 1, -1.0),
    };
    let jet = |d: f64| transmission_jet(k0, eta, d).expect("k0 checked");
    let cond = |d: f64| jet(d)[order];

    let d_max = 2.0 * PI / k0;
    let step = d_max / WIDTH_SCAN_STEPS as f64;
    let mut lo = step;
    let mut f_lo = cond(lo);
    for i in 2..=WIDTH_SCAN_STEPS {
        let hi = i as f64 * step;
        let f_hi = cond(hi);
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            let root = bisect(&cond, lo, hi, f_lo);
            if jet(root)[qualifier_order] * qualifier_sign > 0.0 {
                return Ok(root);
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
    Err(Error::FeatureNotFound {
        feature: feature.name(),
        d_max,
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    while hi - lo > WIDTH_TOL * 1e-2 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Writes `k,T,phi_t,dphi_t` rows for `samples` wavenumbers in `[k_min, k_max]`.
pub fn write_curve_csv<W: Write>(
    out: &mut W,
    interaction: &Interaction,
    k_min: f64,
    k_max: f64,
    samples: usize,
) -> Result<()> {
    check_k(k_min)?;
    writeln!(out, "k,T,phi_t,dphi_t")?;
    let n = samples.max(2);
    for i in 0..n {
        let k = k_min + (k_max - k_min) * i as f64 / (n - 1) as f64;
        let a = interaction.amplitude(k)?;
        writeln!(
            out,
            "{:.10e},{:.15e},{:.15e},{:.15e}",
            k,
            a.transmission(),
            a.phi_t,
            a.dphi_t
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Amplitudes from matching plane waves across both deltas with 2×2
    /// transfer matrices, `ψ'(a+) - ψ'(a-) = 2η ψ(a)`. Independent of the
    /// closed forms; yields the physically referenced (global) amplitudes.
    fn transfer_matrix_amplitudes(k: f64, eta: f64, d: f64) -> (Complex64, Complex64) {
        // state (A, B) of A e^{ikx} + B e^{-ikx}; crossing a delta at `a`
        let cross = |a: f64, (p, q): (Complex64, Complex64)| -> (Complex64, Complex64) {
            let e = Complex64::new(0.0, k * a).exp();
            let psi = p * e + q / e;
            let kick = 2.0 * eta * psi / (2.0 * I * k);
            (p + kick / e, q - kick * e)
        };
        // propagate unit right-mover from the left with unknown reflection:
        // solve linearly by superposition of two left states.
        let right_of = |s: (Complex64, Complex64)| cross(d / 2.0, cross(-d / 2.0, s));
        let (a1, b1) = right_of((Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let (a2, b2) = right_of((Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)));
        // require B_right = 0: b1 + r b2 = 0
        let r = -b1 / b2;
        let t = a1 + r * a2;
        (r, t)
    }

    #[test]
    fn free_limit_global() {
        for k in [0.5, 10.0, 50.0, 137.0] {
            let a = amplitude(k, 0.0, 0.07, Convention::Global).unwrap();
            assert!((a.t - 1.0).norm() < 1e-15);
            assert!(a.r.norm() < 1e-15);
            assert!(a.dphi_t.abs() < 1e-15);
            assert_eq!(transmission_probability(k, 0.0, 0.3).unwrap(), 1.0);
        }
    }

    #[test]
    fn free_limit_paper_keeps_residual_phase() {
        let k = 50.0;
        let d = 0.06552;
        let a = amplitude(k, 0.0, d, Convention::Paper).unwrap();
        assert!((a.t - Complex64::new(0.0, k * d).exp()).norm() < 1e-14);
        assert!((a.dphi_t - d).abs() < 1e-15);
    }

    #[test]
    fn case1_point_values() {
        let a = amplitude(50.0, 24.0, 6.552e-2, Convention::Paper).unwrap();
        assert!((a.transmission() - 0.4935).abs() < 5e-5);
        assert!((a.reflection() - 0.5065).abs() < 5e-5);
        assert!((a.transmission() + a.reflection() - 1.0).abs() < 1e-14);
        assert!((a.dphi_t - 5.80e-2).abs() < 5e-5);
        assert!((101.0 * 5.74e-4 - a.dphi_t).abs() < 1e-4);
    }

    #[test]
    fn global_matches_transfer_matrix() {
        for &(k, eta, d) in &[
            (50.0, 24.0, 0.06552),
            (12.3, 3.0, 0.5),
            (80.0, 48.0, 0.0415),
        ] {
            let (r, t) = transfer_matrix_amplitudes(k, eta, d);
            let a = amplitude(k, eta, d, Convention::Global).unwrap();
            assert!((a.t - t).norm() < 1e-12, "t {k}");
            assert!((a.r - r).norm() < 1e-12, "r {k}");
        }
    }

    #[test]
    fn rejects_non_positive_k() {
        assert!(amplitude(0.0, 1.0, 0.1, Convention::Paper).is_err());
        assert!(amplitude(-3.0, 1.0, 0.1, Convention::Paper).is_err());
        assert!(transmission_probability(-1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn widths_for_extrema() {
        let dmin = find_width(24.0, 50.0, Feature::FirstMin).unwrap();
        let dmax = find_width(24.0, 50.0, Feature::FirstMax).unwrap();
        assert_eq!(format!("{:.3}", dmin * 100.0), "6.552");
        assert_eq!(format!("{:.3}", dmax * 100.0), "4.037");
        let jmin = transmission_jet(50.0, 24.0, dmin).unwrap();
        let jmax = transmission_jet(50.0, 24.0, dmax).unwrap();
        assert!(jmin[1].abs() < 1e-8 && jmin[2] > 0.0);
        assert!(jmax[1].abs() < 1e-8 && jmax[2] < 0.0);
    }

    #[test]
    fn widths_for_inflections() {
        let rise = find_width(48.0, 50.0, Feature::FirstRisingInflection).unwrap();
        let fall = find_width(48.0, 50.0, Feature::FirstFallingInflection).unwrap();
        let jr = transmission_jet(50.0, 48.0, rise).unwrap();
        let jf = transmission_jet(50.0, 48.0, fall).unwrap();
        assert!(jr[2].abs() < 1e-6 && jr[1] > 0.0);
        assert!(jf[2].abs() < 1e-6 && jf[1] < 0.0);
        assert!(rise < fall);
    }

    #[test]
    fn width_rejects_bad_input() {
        assert!(matches!(
            find_width(0.0, 50.0, Feature::FirstMin),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(find_width(24.0, -1.0, Feature::FirstMax).is_err());
    }

    #[test]
    fn jet_matches_finite_differences() {
        let (eta, d) = (48.0, 0.05);
        let h = 1e-3;
        for k in [20.0, 50.0, 91.0] {
            let j = transmission_jet(k, eta, d).unwrap();
            let t = |k| transmission_probability(k, eta, d).unwrap();
            let d1 = (t(k + h) - t(k - h)) / (2.0 * h);
            let d2 = (t(k + h) - 2.0 * t(k) + t(k - h)) / (h * h);
            let d3 = (t(k + 2.0 * h) - 2.0 * t(k + h) + 2.0 * t(k - h) - t(k - 2.0 * h))
                / (2.0 * h * h * h);
            assert!((j[0] - t(k)).abs() < 1e-14);
            assert!((j[1] - d1).abs() < 1e-6 * (1.0 + d1.abs()));
            assert!((j[2] - d2).abs() < 1e-4 * (1.0 + d2.abs()));
            assert!((j[3] - d3).abs() < 1e-3 * (1.0 + d3.abs()));
        }
    }

    #[test]
    fn log_modulus_derivative_matches_fd() {
        let (eta, d) = (24.0, 0.04037);
        let h = 1e-6;
        for br in [Branch::T, Branch::R] {
            for k in [45.0, 52.5] {
                let fd = (log_modulus(k + h, eta, d, br).unwrap()
                    - log_modulus(k - h, eta, d, br).unwrap())
                    / (2.0 * h);
                let an = log_modulus_derivative(k, eta, d, br).unwrap();
                assert!((fd - an).abs() < 1e-6, "{br} {k}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn curve_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        let inter = Interaction::new(24.0, 0.06552, Convention::Paper);
        write_curve_csv(&mut buf, &inter, 1.0, 100.0, 11).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,T,phi_t,dphi_t");
        assert_eq!(lines.len(), 12);
    }

    fn unwrapped_fd(k: f64, eta: f64, d: f64, conv: Convention, h: f64, br: Branch) -> f64 {
        let a = amplitude(k + h, eta, d, conv).unwrap();
        let b = amplitude(k - h, eta, d, conv).unwrap();
        let (za, zb) = match br {
            Branch::T => (a.t, b.t),
            Branch::R => (a.r, b.r),
        };
        (za / zb).arg() / (2.0 * h)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn unitarity(k in 1.0f64..200.0, eta in 0.0f64..100.0, d in 0.0f64..0.2) {
            let a = amplitude(k, eta, d, Convention::Paper).unwrap();
            prop_assert!((a.transmission() + a.reflection() - 1.0).abs() < 1e-12);
            let g = amplitude(k, eta, d, Convention::Global).unwrap();
            prop_assert!((a.t.norm() - g.t.norm()).abs() < 1e-14);
            prop_assert!((a.dphi_t - g.dphi_t - d).abs() < 1e-12);
            prop_assert!((a.dphi_t - a.dphi_r).abs() < 1e-9);
        }

        #[test]
        fn transmission_scaling(k in 1.0f64..200.0, eta in 0.0f64..100.0, d in 0.0f64..0.2, c in 0.1f64..10.0) {
            let a = transmission_probability(k, eta, d).unwrap();
            let b = transmission_probability(c * k, c * eta, d / c).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn phase_derivative_matches_unwrapped_fd(k in 5.0f64..150.0, eta in 0.0f64..60.0, d in 0.0f64..0.15) {
            let an = phase_derivative(k, eta, d, Convention::Paper).unwrap();
            let fd = unwrapped_fd(k, eta, d, Convention::Paper, 1e-6, Branch::T);
            prop_assert!((an - fd).abs() < 1e-6, "{} vs {}", an, fd);
        }
    }
}
