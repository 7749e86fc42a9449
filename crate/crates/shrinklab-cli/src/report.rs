//! Run reports: one line per check, pass/fail decided by the stated tolerance.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Acceptance criterion this line belongs to, if any.
    pub criterion: Option<u8>,
    pub name: String,
    pub statistic: String,
    /// Target and tolerance, e.g. `p > 0.01`.
    pub target: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub grid: String,
    pub n_paths: usize,
    pub version: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64, grid: String, n_paths: usize) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            grid,
            n_paths,
            version: env!("CARGO_PKG_VERSION"),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn check(
        &mut self,
        criterion: Option<u8>,
        name: &str,
        statistic: impl Into<String>,
        target: impl Into<String>,
        pass: bool,
    ) {
        debug_assert!(self.checks.iter().all(|c| c.name != name), "duplicate check {name}");
        self.checks.push(Check {
            criterion,
            name: name.to_string(),
            statistic: statistic.into(),
            target: target.into(),
            pass,
        });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Checks of one acceptance criterion.
    pub fn criterion(&self, c: u8) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |x| x.criterion == Some(c))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "shrinklab {}  scenario={}  seed={}  n_paths={}  grid: {}",
            self.version, self.scenario, self.seed, self.n_paths, self.grid
        );
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = c.criterion.map_or("    ".to_string(), |k| format!("[C{k}]"));
            let _ = writeln!(
                s,
                "{tag:<5} {:<w$}  {}  (target {})  {}",
                c.name,
                c.statistic,
                c.target,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_lists_every_check() {
        let mut r = RunReport::new("x", 1, "T=1".into(), 10);
        r.check(Some(3), "ks", "D=0.01", "D <= 0.02", true);
        r.check(None, "extra", "1", "1", false);
        let out = r.render();
        assert!(out.lines().any(|l| l.starts_with("[C3]") && l.contains("ks") && l.ends_with("PASS")));
        assert!(out.contains("FAIL"));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.criterion(3).count(), 1);
    }
}
