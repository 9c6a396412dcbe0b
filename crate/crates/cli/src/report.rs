//! Machine-readable run reports: a structured key-value document plus an
//! optional tabular rendering, both deterministic given config and seed.

use std::fmt::Write as _;

/// One named check: a measured value, an optional tolerance, pass/fail.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub config_hash: u64,
    pub version: String,
    pub checks: Vec<Check>,
    pub notes: Vec<(String, String)>,
    pub timing_ms: u128,
}

impl Report {
    pub fn new(command: &str, config_hash: u64) -> Report {
        Report {
            command: command.to_string(),
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            checks: Vec::new(),
            notes: Vec::new(),
            timing_ms: 0,
        }
    }

    /// Record a value with no acceptance threshold.
    pub fn value(&mut self, name: &str, value: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            tolerance: None,
            pass: true,
        });
    }

    /// Record a textual annotation.
    pub fn note(&mut self, name: &str, text: &str) {
        self.notes.push((name.to_string(), text.to_string()));
    }

    /// Record a check `value >= threshold` (reported as the value itself).
    pub fn check_ge(&mut self, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            tolerance: Some(threshold),
            pass: value >= threshold,
        });
    }

    /// Record a check `value <= tolerance`.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            tolerance: Some(tolerance),
            pass: value <= tolerance,
        });
    }

    /// Record a boolean outcome (1 = true), with pass meaning `value == expected`.
    pub fn flag(&mut self, name: &str, value: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            value: if value { 1.0 } else { 0.0 },
            tolerance: None,
            pass: true,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Structured document with stable key names. Timing lines carry the
    /// `timing.` prefix so determinism comparisons can strip them.
    pub fn structured(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report.version = {}", self.version);
        let _ = writeln!(out, "report.command = {}", self.command);
        let _ = writeln!(out, "report.config_hash = {:016x}", self.config_hash);
        let _ = writeln!(out, "report.checks = {}", self.checks.len());
        for c in &self.checks {
            let _ = writeln!(out, "check.{}.value = {}", c.name, c.value);
            if let Some(tol) = c.tolerance {
                let _ = writeln!(out, "check.{}.tolerance = {}", c.name, tol);
            }
            let _ = writeln!(out, "check.{}.pass = {}", c.name, c.pass);
        }
        for (name, text) in &self.notes {
            let _ = writeln!(out, "note.{name} = {text}");
        }
        let _ = writeln!(out, "report.all_pass = {}", self.all_pass());
        let _ = writeln!(out, "timing.total_ms = {}", self.timing_ms);
        out
    }

    /// One row per check, tab separated, with a header.
    pub fn tabular(&self) -> String {
        let mut out = String::from("name\tvalue\ttolerance\tpass\n");
        for c in &self.checks {
            let tol = c
                .tolerance
                .map(|t| t.to_string())
                .unwrap_or_else(|| "-".to_string());
            let _ = writeln!(out, "{}\t{}\t{}\t{}", c.name, c.value, tol, c.pass);
        }
        out
    }
}

/// Parse a structured report back into (key, value) pairs; numbers
/// round-trip exactly through the shortest-representation formatting.
#[cfg(test)]
pub fn parse_structured(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_values() {
        let mut r = Report::new("verify", 0xabcd);
        r.check_le("antisym", 1.234e-12, 1e-8);
        r.value("scalar", -0.1234567890123456789);
        let text = r.structured();
        let kv = parse_structured(&text);
        let get = |k: &str| kv.iter().find(|(key, _)| key == k).unwrap().1.clone();
        assert_eq!(get("check.antisym.value").parse::<f64>().unwrap(), 1.234e-12);
        assert_eq!(
            get("check.scalar.value").parse::<f64>().unwrap(),
            -0.1234567890123456789f64
        );
        assert_eq!(get("report.all_pass"), "true");
    }

    #[test]
    fn empty_check_list_is_valid() {
        let r = Report::new("census", 1);
        let text = r.structured();
        assert!(text.contains("report.checks = 0"));
        assert!(text.contains("report.all_pass = true"));
    }
}
