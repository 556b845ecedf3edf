//! Versioned JSON / Markdown reports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};

pub const REPORT_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
    Skipped,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::ReportOnly => "report-only",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

impl Check {
    pub fn assert(name: &str, ok: bool, value: impl Serialize) -> Self {
        Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            value: serde_json::to_value(value).ok(),
            threshold: None,
            witness: None,
        }
    }

    pub fn bounded(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            status: if value <= threshold { Status::Pass } else { Status::Fail },
            value: serde_json::to_value(value).ok(),
            threshold: Some(threshold),
            witness: None,
        }
    }

    pub fn report(name: &str, value: impl Serialize) -> Self {
        Check {
            name: name.into(),
            status: Status::ReportOnly,
            value: serde_json::to_value(value).ok(),
            threshold: None,
            witness: None,
        }
    }

    pub fn with_witness(mut self, w: Option<impl Serialize>) -> Self {
        self.witness = w.and_then(|w| serde_json::to_value(w).ok());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub params: Value,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub checks: Vec<Check>,
    pub wall_time: f64,
}

impl SuiteResult {
    pub fn from_checks(name: &str, params: Value, checks: Vec<Check>, wall_time: f64) -> Self {
        let status = if checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if !checks.is_empty() && checks.iter().all(|c| c.status == Status::ReportOnly) {
            Status::ReportOnly
        } else {
            Status::Pass
        };
        SuiteResult { name: name.into(), params, status, reason: None, checks, wall_time }
    }

    pub fn skipped(name: &str, params: Value, reason: String, wall_time: f64) -> Self {
        SuiteResult { name: name.into(), params, status: Status::Skipped, reason: Some(reason), checks: Vec::new(), wall_time }
    }

    pub fn failed(name: &str, params: Value, reason: String, wall_time: f64) -> Self {
        SuiteResult { name: name.into(), params, status: Status::Fail, reason: Some(reason), checks: Vec::new(), wall_time }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub suites: Vec<SuiteResult>,
    pub wall_time: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.status != Status::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "# ggplab report (v{})\n\nn = {}, p = {}, l = {}, samples = {}, seed = {}, threshold = {}\n\n",
            self.version, c.n, c.p, c.l, c.samples, c.seed, c.threshold
        );
        s.push_str("| suite | status | wall time (s) |\n|---|---|---|\n");
        for r in &self.suites {
            s.push_str(&format!("| {} | {} | {:.2} |\n", r.name, r.status.as_str(), r.wall_time));
        }
        for r in &self.suites {
            s.push_str(&format!("\n## {} ({})\n\n", r.name, r.status.as_str()));
            if let Some(reason) = &r.reason {
                s.push_str(&format!("{reason}\n\n"));
            }
            if !r.checks.is_empty() {
                s.push_str("| check | status | value | threshold |\n|---|---|---|---|\n");
                for ch in &r.checks {
                    let v = ch.value.as_ref().map(|v| v.to_string()).unwrap_or_default();
                    let t = ch.threshold.map(|t| t.to_string()).unwrap_or_default();
                    s.push_str(&format!("| {} | {} | {} | {} |\n", ch.name, ch.status.as_str(), v.replace('|', "\\|"), t));
                }
            }
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Md => self.to_markdown(),
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        std::fs::write(path, self.render(format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_rollup() {
        let pass = SuiteResult::from_checks("a", Value::Null, vec![Check::assert("x", true, 1)], 0.0);
        assert_eq!(pass.status, Status::Pass);
        let ro = SuiteResult::from_checks("b", Value::Null, vec![Check::report("y", 2.5)], 0.0);
        assert_eq!(ro.status, Status::ReportOnly);
        let f = SuiteResult::from_checks("c", Value::Null, vec![Check::bounded("z", 9.0, 8.0), Check::report("y", 1)], 0.0);
        assert_eq!(f.status, Status::Fail);
        let r = Report { version: REPORT_VERSION.into(), config: RunConfig::default(), suites: vec![pass.clone(), ro], wall_time: 0.0 };
        assert_eq!(r.exit_code(), 0);
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_markdown().contains("| a | pass |"));
        let bad = Report { suites: vec![pass, f], ..r };
        assert_eq!(bad.exit_code(), 1);
        assert!(bad.to_json().contains("\"report-only\""));
    }
}
