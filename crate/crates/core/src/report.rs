//! Comparison of run outputs with the bundled reference values.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};

use crate::amplitude::{Branch, Feature};
use crate::analysis::Source;
use crate::error::{Error, Result};
use crate::experiment::{
    read_kinematics_csv, read_norms_csv, transmission_percent, KinematicsRecord, NormRecord,
};
use crate::reference::{self, matches_significant};

/// Outcome of one comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub case: String,
    pub name: String,
    pub observed: f64,
    pub expected: String,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}: {:.4e} (expected {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.case,
            self.name,
            self.observed,
            self.expected
        )
    }
}

/// The files a run leaves for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutputs {
    pub case: String,
    pub records: Vec<KinematicsRecord>,
    pub norms: Vec<NormRecord>,
}

impl CaseOutputs {
    pub fn load(dir: &Path) -> Result<Self> {
        let open = |name: &str| {
            File::open(dir.join(name))
                .map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))
        };
        let records = read_kinematics_csv(open("kinematics.csv")?)?;
        let norms = read_norms_csv(open("norms.csv")?)?;
        let case = records
            .first()
            .map(|r| r.case.clone())
            .ok_or_else(|| Error::Io(format!("{}: kinematics.csv is empty", dir.display())))?;
        Ok(CaseOutputs {
            case,
            records,
            norms,
        })
    }

    fn record(&self, branch: Branch, source: Source) -> Option<&KinematicsRecord> {
        self.records
            .iter()
            .find(|r| r.branch().ok() == Some(branch) && r.source().ok() == Some(source))
    }
}

/// `root` itself if it holds a `kinematics.csv`, otherwise its immediate
/// subdirectories that do, sorted by name.
pub fn case_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("kinematics.csv").is_file() {
        return Ok(vec![root.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| Error::Io(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("kinematics.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Io(format!(
            "no kinematics.csv under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

struct Builder<'a> {
    case: &'a str,
    checks: Vec<Check>,
}

impl Builder<'_> {
    fn push(&mut self, name: impl Into<String>, observed: f64, expected: String, passed: bool) {
        self.checks.push(Check {
            case: self.case.to_string(),
            name: name.into(),
            observed,
            expected,
            passed,
        });
    }

    fn missing(&mut self, name: &str) {
        self.push(name, f64::NAN, "a value; none was produced".into(), false);
    }
}

/// All table comparisons that apply to `out.case`; empty for cases without
/// reference values.
pub fn case_checks(out: &CaseOutputs) -> Vec<Check> {
    let case = out.case.as_str();
    let (Some(params), Some(tun), Some(refl)) = (
        reference::parameters(case),
        reference::tunneling(case),
        reference::reflection(case),
    ) else {
        return Vec::new();
    };
    let mut b = Builder {
        case,
        checks: Vec::new(),
    };

    if out.norms.is_empty() {
        b.missing("late-time T(%)");
    } else {
        let t: Vec<f64> = out.norms.iter().map(|n| n.t).collect();
        let (mean, _, _) = transmission_percent(&t);
        b.push(
            "late-time T(%)",
            mean,
            format!("{} ± 0.5", params.t_percent),
            (mean - params.t_percent).abs() <= 0.5,
        );
        let totals: Vec<f64> = out.norms.iter().map(|n| n.t + n.r).collect();
        let lo = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        b.push("min T+R", lo, ">= 0.999".into(), lo >= 0.999);
        b.push("T+R variation", hi - lo, "< 1e-4".into(), hi - lo < 1e-4);
    }

    for (branch, table, label) in [
        (Branch::T, tun, "tunneling"),
        (Branch::R, refl, "reflection"),
    ] {
        match out.record(branch, Source::StationaryPhase) {
            Some(sp) => b.push(
                format!("{label} stationary-phase dx_b"),
                sp.dx_b,
                format!("{:.2e} to 3 s.f.", table.sp_dx_b),
                matches_significant(sp.dx_b, table.sp_dx_b, 3),
            ),
            None => b.missing(&format!("{label} stationary-phase dx_b")),
        }
        let Some(num) = out.record(branch, Source::Numerical) else {
            b.missing(&format!("{label} numerical dx_b"));
            continue;
        };
        let tol = match branch {
            Branch::T => 3.0,
            Branch::R => 10.0,
        };
        let dev = 100.0 * (num.dx_b - table.num_dx_b).abs() / table.num_dx_b.abs();
        b.push(
            format!("{label} numerical dx_b"),
            num.dx_b,
            format!("{:.2e} within {tol}%", table.num_dx_b),
            dev <= tol,
        );
        match branch {
            Branch::T if table.delta_v_b_pct.is_some() => {
                let dev = 100.0 * (num.v_b - table.num_v_b).abs() / table.num_v_b.abs();
                b.push(
                    "tunneling numerical v_b",
                    num.v_b,
                    format!("{:.2e}, same sign, within 15%", table.num_v_b),
                    num.v_b.signum() == table.num_v_b.signum() && dev <= 15.0,
                );
            }
            Branch::T => b.push(
                "tunneling numerical |v_b|",
                num.v_b.abs(),
                "< 1e-4".into(),
                num.v_b.abs() < 1e-4,
            ),
            Branch::R => {
                let classical = 2.0 * params.alpha;
                let dev = 100.0 * (num.v_b - classical).abs() / classical;
                b.push(
                    "reflection numerical v_b",
                    num.v_b,
                    format!("2α = {classical:.4e} within 1%"),
                    dev <= 1.0,
                );
            }
        }
    }

    if params.feature == Feature::FirstMin {
        if let (Some(t), Some(r)) = (
            out.record(Branch::T, Source::Numerical),
            out.record(Branch::R, Source::Numerical),
        ) {
            let asym = 100.0 * (r.dx_b + t.dx_b).abs() / t.dx_b.abs();
            b.push(
                "dx_b,R = -dx_b,T (deviation %)",
                asym,
                "<= 2".into(),
                asym <= 2.0,
            );
        } else {
            b.missing("dx_b,R = -dx_b,T (deviation %)");
        }
    }
    b.checks
}

/// Deterministic text summary; the flag is true when every check passed.
pub fn render(outputs: &[CaseOutputs]) -> (String, bool) {
    let mut text = String::new();
    let mut all = true;
    for out in outputs {
        let checks = case_checks(out);
        if checks.is_empty() {
            text.push_str(&format!("{}: no reference values\n", out.case));
            continue;
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        text.push_str(&format!(
            "{}: {} checks, {} failed\n",
            out.case,
            checks.len(),
            failed
        ));
        for c in &checks {
            text.push_str(&format!("  {c}\n"));
        }
        all &= failed == 0;
    }
    (text, all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(branch: &str, source: &str, dx_b: f64, v_b: f64) -> KinematicsRecord {
        KinematicsRecord {
            case: "case2".into(),
            branch: branch.into(),
            source: source.into(),
            dx_b,
            v_b,
            dx_p: 0.0,
            v_p: 0.0,
            fit_rms: None,
            delta_dx_b_pct: None,
            delta_v_b_pct: None,
        }
    }

    fn paper_like() -> CaseOutputs {
        CaseOutputs {
            case: "case2".into(),
            records: vec![
                record("T", "numerical", 1.95e-2, 7.99e-6),
                record("T", "stationary_phase", 1.9301e-2, 0.0),
                record("R", "numerical", -1.95e-2, 0.6667),
                record("R", "stationary_phase", -1.9301e-2, 0.6667),
            ],
            norms: (0..41)
                .map(|i| NormRecord {
                    tau: 8.0 + 0.1 * i as f64,
                    t: 0.4983,
                    r: 0.5016,
                })
                .collect(),
        }
    }

    #[test]
    fn tabulated_values_pass() {
        let checks = case_checks(&paper_like());
        assert_eq!(checks.len(), 10);
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
        let (text, ok) = render(&[paper_like()]);
        assert!(ok && text.starts_with("case2: 10 checks, 0 failed\n"));
    }

    #[test]
    fn perturbed_displacement_fails_by_name() {
        let mut out = paper_like();
        out.records[0].dx_b *= 1.5;
        let failed: Vec<_> = case_checks(&out)
            .into_iter()
            .filter(|c| !c.passed)
            .collect();
        assert!(failed.iter().any(|c| c.name == "tunneling numerical dx_b"));
        let (text, ok) = render(&[out]);
        assert!(!ok && text.contains("FAIL case2 tunneling numerical dx_b"));
    }

    #[test]
    fn unknown_case_has_no_checks() {
        let mut out = paper_like();
        out.case = "custom".into();
        assert!(case_checks(&out).is_empty());
        assert_eq!(
            render(&[out]),
            ("custom: no reference values\n".into(), true)
        );
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(case_dirs(dir.path()).is_err());
    }
}
