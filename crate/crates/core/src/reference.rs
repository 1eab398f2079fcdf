//! Reference values for the six preset cases.

use crate::amplitude::Feature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseParameters {
    pub case: &'static str,
    pub alpha: f64,
    pub eta: f64,
    /// Late-time transmission in percent.
    pub t_percent: f64,
    pub d: f64,
    pub sigma_k_over_k0: f64,
    pub feature: Feature,
}

/// One row of a displacement / velocity comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicsReference {
    pub case: &'static str,
    pub sp_dx_b: f64,
    pub num_dx_b: f64,
    pub delta_dx_b_pct: f64,
    pub sp_v_b: f64,
    pub num_v_b: f64,
    pub delta_v_b_pct: Option<f64>,
}

pub const PARAMETERS: [CaseParameters; 6] = [
    CaseParameters {
        case: "case1",
        alpha: 1.0 / 101.0,
        eta: 24.0,
        t_percent: 50.20,
        d: 6.552e-2,
        sigma_k_over_k0: 4.95e-2,
        feature: Feature::FirstMin,
    },
    CaseParameters {
        case: "case2",
        alpha: 1.0 / 3.0,
        eta: 24.0,
        t_percent: 49.83,
        d: 6.552e-2,
        sigma_k_over_k0: 3.73e-2,
        feature: Feature::FirstMin,
    },
    CaseParameters {
        case: "case3",
        alpha: 1.0 / 101.0,
        eta: 24.0,
        t_percent: 98.43,
        d: 4.037e-2,
        sigma_k_over_k0: 4.95e-2,
        feature: Feature::FirstMax,
    },
    CaseParameters {
        case: "case4",
        alpha: 1.0 / 3.0,
        eta: 24.0,
        t_percent: 99.10,
        d: 4.037e-2,
        sigma_k_over_k0: 3.73e-2,
        feature: Feature::FirstMax,
    },
    CaseParameters {
        case: "case5",
        alpha: 1.0 / 3.0,
        eta: 48.0,
        t_percent: 68.15,
        d: 4.154e-2,
        sigma_k_over_k0: 3.73e-2,
        feature: Feature::FirstRisingInflection,
    },
    CaseParameters {
        case: "case6",
        alpha: 1.0 / 3.0,
        eta: 48.0,
        t_percent: 78.57,
        d: 5.060e-2,
        sigma_k_over_k0: 3.73e-2,
        feature: Feature::FirstFallingInflection,
    },
];

/// Tunneling projectile.
pub const TUNNELING: [KinematicsReference; 6] = [
    KinematicsReference {
        case: "case1",
        sp_dx_b: 5.74e-4,
        num_dx_b: 5.85e-4,
        delta_dx_b_pct: 1.82,
        sp_v_b: 0.0,
        num_v_b: 1.52e-8,
        delta_v_b_pct: None,
    },
    KinematicsReference {
        case: "case2",
        sp_dx_b: 1.93e-2,
        num_dx_b: 1.95e-2,
        delta_dx_b_pct: 1.00,
        sp_v_b: 0.0,
        num_v_b: 7.99e-6,
        delta_v_b_pct: None,
    },
    KinematicsReference {
        case: "case3",
        sp_dx_b: 7.74e-4,
        num_dx_b: 7.68e-4,
        delta_dx_b_pct: 0.71,
        sp_v_b: 0.0,
        num_v_b: -2.62e-8,
        delta_v_b_pct: None,
    },
    KinematicsReference {
        case: "case4",
        sp_dx_b: 2.61e-2,
        num_dx_b: 2.60e-2,
        delta_dx_b_pct: 0.39,
        sp_v_b: 0.0,
        num_v_b: -1.84e-5,
        delta_v_b_pct: None,
    },
    KinematicsReference {
        case: "case5",
        sp_dx_b: 4.16e-2,
        num_dx_b: 4.13e-2,
        delta_dx_b_pct: 0.70,
        sp_v_b: -1.59e-3,
        num_v_b: -1.74e-3,
        delta_v_b_pct: Some(9.31),
    },
    KinematicsReference {
        case: "case6",
        sp_dx_b: 4.65e-2,
        num_dx_b: 4.79e-2,
        delta_dx_b_pct: 3.00,
        sp_v_b: 1.32e-3,
        num_v_b: 1.27e-3,
        delta_v_b_pct: Some(3.92),
    },
];

/// Backscattered projectile.
pub const REFLECTION: [KinematicsReference; 6] = [
    KinematicsReference {
        case: "case1",
        sp_dx_b: -5.74e-4,
        num_dx_b: -5.84e-4,
        delta_dx_b_pct: 1.68,
        sp_v_b: 1.98e-2,
        num_v_b: 1.98e-2,
        delta_v_b_pct: Some(0.01),
    },
    KinematicsReference {
        case: "case2",
        sp_dx_b: -1.93e-2,
        num_dx_b: -1.95e-2,
        delta_dx_b_pct: 0.95,
        sp_v_b: 6.67e-1,
        num_v_b: 6.67e-1,
        delta_v_b_pct: Some(0.00),
    },
    KinematicsReference {
        case: "case3",
        sp_dx_b: -7.14e-4,
        num_dx_b: -7.75e-4,
        delta_dx_b_pct: 8.44,
        sp_v_b: 2.03e-2,
        num_v_b: 1.95e-2,
        delta_v_b_pct: Some(3.99),
    },
    KinematicsReference {
        case: "case4",
        sp_dx_b: -2.45e-2,
        num_dx_b: -2.61e-2,
        delta_dx_b_pct: 6.45,
        sp_v_b: 6.79e-1,
        num_v_b: 6.62e-1,
        delta_v_b_pct: Some(2.47),
    },
    KinematicsReference {
        case: "case5",
        sp_dx_b: -3.93e-2,
        num_dx_b: -3.75e-2,
        delta_dx_b_pct: 4.53,
        sp_v_b: 6.64e-1,
        num_v_b: 6.58e-1,
        delta_v_b_pct: Some(0.85),
    },
    KinematicsReference {
        case: "case6",
        sp_dx_b: -4.11e-2,
        num_dx_b: -3.86e-2,
        delta_dx_b_pct: 5.99,
        sp_v_b: 6.71e-1,
        num_v_b: 6.78e-1,
        delta_v_b_pct: Some(1.03),
    },
];

pub fn parameters(case: &str) -> Option<&'static CaseParameters> {
    PARAMETERS.iter().find(|p| p.case == case)
}

pub fn tunneling(case: &str) -> Option<&'static KinematicsReference> {
    TUNNELING.iter().find(|p| p.case == case)
}

pub fn reflection(case: &str) -> Option<&'static KinematicsReference> {
    REFLECTION.iter().find(|p| p.case == case)
}

/// `x` rounded to `digits` significant figures.
pub fn round_significant(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// True when `x` rounds to `reference` at `digits` significant figures.
pub fn matches_significant(x: f64, reference: f64, digits: i32) -> bool {
    let r = round_significant(x, digits);
    (r - reference).abs() <= 1e-9 * reference.abs()
}
