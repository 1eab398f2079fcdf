//! End-to-end runs on reduced grids through the public API.

use tunneling_core::amplitude::{Branch, Interaction};
use tunneling_core::analysis::interaction_time;
use tunneling_core::config::CaseConfig;
use tunneling_core::evolve::read_density;
use tunneling_core::experiment::{
    read_kinematics_csv, read_norms_csv, write_kinematics_csv, write_norms_csv, Experiment,
};
use tunneling_core::report::{case_checks, CaseOutputs};
use tunneling_core::stationary::{predict, predict_with, KmaxRule};

fn reduced(name: &str) -> CaseConfig {
    CaseConfig {
        length: 25.0,
        points: 1024,
        tau_fit_start: 3.0,
        tau_fit_end: 4.0,
        dtau: 0.25,
        ..CaseConfig::preset(name).unwrap()
    }
}

#[test]
fn stationary_phase_recoil_signs() {
    let v = |case: &str, b| predict(&CaseConfig::preset(case).unwrap(), b).unwrap().v_b;
    assert_eq!(format!("{:.2e}", v("case6", Branch::T)), "1.32e-3");
    assert_eq!(format!("{:.2e}", v("case5", Branch::T)), "-1.59e-3");
    for case in ["case1", "case2", "case3", "case4"] {
        assert!(v(case, Branch::T).abs() < 1e-4, "{case}");
    }
    assert_eq!(format!("{:.2e}", v("case1", Branch::R)), "1.98e-2");
    assert_eq!(format!("{:.2e}", v("case4", Branch::R)), "6.79e-1");
}

#[test]
fn joint_rule_moves_the_inflection_cases() {
    let cfg = CaseConfig::preset("case6").unwrap();
    let i = Interaction::from_config(&cfg);
    let marginal = predict_with(&cfg, &i, Branch::T, KmaxRule::Marginal).unwrap();
    let joint = predict_with(&cfg, &i, Branch::T, KmaxRule::Joint).unwrap();
    assert!((marginal.dx_b - joint.dx_b).abs() > 1e-3);
    let cfg = CaseConfig::preset("case2").unwrap();
    let i = Interaction::from_config(&cfg);
    let marginal = predict_with(&cfg, &i, Branch::T, KmaxRule::Marginal).unwrap();
    let joint = predict_with(&cfg, &i, Branch::T, KmaxRule::Joint).unwrap();
    assert!((marginal.dx_b - joint.dx_b).abs() < 1e-4 * marginal.dx_b.abs());
}

#[test]
fn reduced_runs_reproduce_tunneling_columns() {
    for (case, num_dx, t_pct) in [("case2", 1.95e-2, 49.83), ("case5", 4.13e-2, 68.15)] {
        let run = Experiment::new(case, reduced(case))
            .unwrap()
            .run(KmaxRule::Marginal, |_| {})
            .unwrap();
        let t = run.numerical[0].as_ref().unwrap();
        assert!((t.dx_b / num_dx - 1.0).abs() < 0.03, "{case}: {}", t.dx_b);
        assert!((run.transmission_percent().0 - t_pct).abs() < 0.5);

        // the CSV round trip feeds the same comparisons as a fresh run
        let mut kin = Vec::new();
        write_kinematics_csv(&mut kin, &run.kinematics_records()).unwrap();
        let mut norms = Vec::new();
        write_norms_csv(&mut norms, &run.trace).unwrap();
        let out = CaseOutputs {
            case: case.into(),
            records: read_kinematics_csv(kin.as_slice()).unwrap(),
            norms: read_norms_csv(norms.as_slice()).unwrap(),
        };
        let checks = case_checks(&out);
        for name in ["late-time T(%)", "min T+R", "tunneling numerical dx_b"] {
            let c = checks.iter().find(|c| c.name == name).unwrap();
            assert!(c.passed, "{case}: {c}");
        }
    }
}

#[test]
fn interaction_time_tracks_phase_delay() {
    let run = Experiment::new("case2", reduced("case2"))
        .unwrap()
        .run(KmaxRule::Marginal, |_| {})
        .unwrap();
    let t = run.numerical[0].as_ref().unwrap();
    let (t_int, wigner) = interaction_time(t, &run.config).unwrap();
    assert!((t_int - t.dx_b / run.config.alpha).abs() < 1e-15);
    assert!(t_int > 0.0 && wigner > 0.0);
    assert!((t_int / wigner - 1.0).abs() < 0.1, "{t_int} {wigner}");
}

#[test]
fn density_snapshot_and_marginals_agree() {
    let e = Experiment::new("case4", reduced("case4")).unwrap();
    let mut bytes = Vec::new();
    let m = e.write_snapshot(3.5, &mut bytes).unwrap();
    let grid = read_density(bytes.as_slice()).unwrap();
    assert_eq!((grid.points, grid.tau), (1024, 3.5));
    let cell = (25.0f64 / 1024.0).powi(2);
    let total: f64 = grid.density.iter().sum::<f64>() * cell;
    let p: f64 = m.projectile.iter().sum();
    let b: f64 = m.barrier.iter().sum();
    assert!((total - 1.0).abs() < 1e-6, "{total}");
    assert!(
        (p - total).abs() < 1e-12 && (b - total).abs() < 1e-12,
        "{p} {b} {total}"
    );
}
