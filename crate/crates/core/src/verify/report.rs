use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::Result;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the log residuals.
    pub residual: f64,
    pub points: usize,
}

/// Fits `ln y = slope ln x + intercept`. Needs two distinct positive `x` and positive `y`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<Fit> {
    if x.len() != y.len() || x.len() < 2 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    Some(Fit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: lx.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    /// A failure that the check was designed to provoke.
    ExpectedNegative,
    /// An expected failure that did not show up; reported, not an error.
    NotObserved,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::ExpectedNegative => "expected_negative",
            Outcome::NotObserved => "not_observed",
        }
    }

    /// Everything except `Fail`.
    pub fn is_pass(&self) -> bool {
        *self != Outcome::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub outcome: Outcome,
    pub value: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value <= threshold, value, threshold)
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self::new(name, value >= threshold, value, threshold)
    }

    pub fn new(name: &str, ok: bool, value: f64, threshold: f64) -> Self {
        Self {
            name: name.to_string(),
            outcome: if ok { Outcome::Pass } else { Outcome::Fail },
            value,
            threshold,
        }
    }

    /// Turns the verdict into an expected-negative one: a failure becomes
    /// `ExpectedNegative`, a pass becomes `NotObserved`.
    pub fn expecting_failure(mut self) -> Self {
        self.outcome = match self.outcome {
            Outcome::Fail => Outcome::ExpectedNegative,
            Outcome::Pass => Outcome::NotObserved,
            o => o,
        };
        self
    }
}

/// Table of measurements with fitted rate and verdicts.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Rows excluded from verdicts and fits (under-resolved).
    pub flagged: Vec<bool>,
    pub fit: Option<Fit>,
    pub verdicts: Vec<Verdict>,
    pub runtime: Duration,
}

impl SweepReport {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            flagged: Vec::new(),
            fit: None,
            verdicts: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>, flagged: bool) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
        self.flagged.push(flagged);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// No verdict failed. Expected negatives and unobserved ones do not count.
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.outcome.is_pass())
    }

    /// Header line, then one line per row; a trailing `flagged` column of 0/1.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push_str(",flagged\n");
        for (row, &f) in self.rows.iter().zip(&self.flagged) {
            for v in row {
                write!(s, "{v:e},").unwrap();
            }
            writeln!(s, "{}", f as u8).unwrap();
        }
        s
    }

    /// `key=value` lines. Everything except `runtime_s` is deterministic.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let p = &self.name;
        writeln!(s, "{p}.rows={}", self.rows.len()).unwrap();
        writeln!(s, "{p}.flagged={}", self.flagged.iter().filter(|&&f| f).count()).unwrap();
        if let Some(fit) = &self.fit {
            writeln!(s, "{p}.slope={:e}", fit.slope).unwrap();
            writeln!(s, "{p}.slope_residual={:e}", fit.residual).unwrap();
            writeln!(s, "{p}.fit_points={}", fit.points).unwrap();
        }
        for v in &self.verdicts {
            writeln!(s, "{p}.{}={}", v.name, v.outcome.as_str()).unwrap();
            writeln!(s, "{p}.{}.value={:e}", v.name, v.value).unwrap();
            writeln!(s, "{p}.{}.threshold={:e}", v.name, v.threshold).unwrap();
        }
        writeln!(s, "{p}.passed={}", self.passed()).unwrap();
        writeln!(s, "{p}.runtime_s={:.3}", self.runtime.as_secs_f64()).unwrap();
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(fit_loglog(&[1.0], &[1.0]).is_none());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn csv_and_summary_layout() {
        let mut r = SweepReport::new("demo", &["r", "ratio"]);
        r.push_row(vec![0.125, 1.0], false);
        r.push_row(vec![0.0625, 1.5], true);
        r.verdicts.push(Verdict::at_most("spread", 1.5, 2.0));
        r.verdicts.push(Verdict::at_most("sharp", 0.0, 1.0).expecting_failure());
        let csv = r.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "r,ratio,flagged");
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with(",1"));
        let s = r.summary();
        assert!(s.contains("demo.spread=pass"));
        assert!(s.contains("demo.sharp=not_observed"));
        assert!(s.contains("demo.passed=true"));
        assert!(r.passed());
        r.verdicts.push(Verdict::at_least("slope", 0.5, 0.6));
        assert!(!r.passed());
    }
}
