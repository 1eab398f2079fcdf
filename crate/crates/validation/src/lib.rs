//! Bookkeeping for the acceptance suite in `tests/acceptance.rs`: a tally of
//! individual comparisons that reports one PASS/FAIL line per criterion.

/// Comparisons belonging to one numbered criterion.
pub struct Criterion {
    id: u32,
    title: &'static str,
    passed: usize,
    failed: usize,
}

impl Criterion {
    pub fn new(id: u32, title: &'static str) -> Self {
        Criterion {
            id,
            title,
            passed: 0,
            failed: 0,
        }
    }

    /// Records one comparison and prints it as an indented detail line.
    pub fn check(&mut self, ok: bool, what: String) {
        println!("    [{}] {what}", if ok { " ok " } else { "FAIL" });
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }

    /// The summary line. A criterion with no comparisons fails.
    pub fn summary(&self) -> String {
        format!(
            "{} criterion {}: {} ({}/{} checks)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.passed,
            self.passed + self.failed
        )
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }

    /// Prints the summary line and returns whether the criterion passed.
    pub fn finish(self) -> bool {
        println!("{}", self.summary());
        self.passed()
    }
}

/// `x` rounded to `digits` significant figures.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

/// True when `x` rounds to `reference` at `digits` significant figures.
pub fn same_to_sig(x: f64, reference: f64, digits: i32) -> bool {
    (round_sig(x, digits) - reference).abs() <= 1e-9 * reference.abs()
}

/// `|a - b| / |b|` in percent.
pub fn pct(a: f64, b: f64) -> f64 {
    100.0 * (a - b).abs() / b.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_criterion_fails() {
        let c = Criterion::new(9, "nothing");
        assert!(!c.passed());
        assert_eq!(c.summary(), "FAIL criterion 9: nothing (0/0 checks)");
    }

    #[test]
    fn one_failure_fails_the_criterion() {
        let mut c = Criterion::new(1, "t");
        c.check(true, "a".into());
        c.check(false, "b".into());
        assert_eq!(c.summary(), "FAIL criterion 1: t (1/2 checks)");
    }

    #[test]
    fn significant_figures() {
        assert_eq!(round_sig(4.16849e-2, 4), 4.168e-2);
        assert!(same_to_sig(4.03663e-2, 4.037e-2, 4));
        assert!(!same_to_sig(5.03406e-2, 5.060e-2, 4));
        assert!(same_to_sig(-1.9332e-2, -1.93e-2, 3));
        assert!((pct(1.9463e-2, 2.0 / 101.0) - 1.71).abs() < 0.01);
    }
}
