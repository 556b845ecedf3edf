//! Run configuration: defaults, flat key-value files, flag overrides, validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arith::is_prime;
use crate::error::{Error, Result};
use crate::exponents::parse_rational;
use crate::suites;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Md,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Md),
            _ => Err(Error::InvalidConfig(format!("unknown format {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub p: u64,
    pub l: u32,
    pub suites: Vec<String>,
    /// Element-count budget for enumerations and exhaustive scans.
    pub budget: u128,
    /// Suites that have not started once this many seconds have elapsed are skipped.
    pub time_budget: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    pub threshold: f64,
    pub trials: usize,
    pub group: Option<String>,
    pub theta: String,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 1,
            p: 3,
            l: 1,
            suites: Vec::new(),
            budget: 1 << 26,
            time_budget: None,
            samples: 100,
            seed: 0,
            threshold: 8.0,
            trials: 1000,
            group: None,
            theta: "0".into(),
            cache_dir: None,
            out: None,
            format: Format::Json,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .replace('_', "")
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value for {key}: {v}")))
}

impl RunConfig {
    /// Sets one key; keys match the long flag names.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "n" => self.n = num(key, v)?,
            "p" => self.p = num(key, v)?,
            "l" => self.l = num(key, v)?,
            "suite" | "suites" => {
                self.suites = v.split([',', ' ']).filter(|s| !s.is_empty()).map(str::to_string).collect()
            }
            "budget" => self.budget = num(key, v)?,
            "time-budget" => self.time_budget = Some(num(key, v)?),
            "samples" => self.samples = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "threshold" => self.threshold = num(key, v)?,
            "trials" => self.trials = num(key, v)?,
            "group" => self.group = Some(v.to_string()),
            "theta" => self.theta = v.to_string(),
            "cache-dir" => self.cache_dir = Some(PathBuf::from(v)),
            "out" => self.out = Some(PathBuf::from(v)),
            "format" => self.format = v.parse()?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other}"))),
        }
        Ok(())
    }

    /// Parses `key = value` (or `key: value`) lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", no + 1)))?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    pub fn theta_f64(&self) -> Result<f64> {
        let q = parse_rational(&self.theta)?;
        Ok(*q.numer() as f64 / *q.denom() as f64)
    }

    /// Expands "all" and checks every parameter before anything runs. Suites that need a
    /// generic pair are rejected when named at too small a p, and skipped at run time
    /// when they came from a group.
    pub fn validate(&mut self) -> Result<()> {
        if self.p == 2 || !is_prime(self.p) {
            return Err(Error::InvalidConfig(format!("p = {} must be an odd prime", self.p)));
        }
        if self.n == 0 || self.n > 3 {
            return Err(Error::InvalidConfig("n must lie in 1..=3".into()));
        }
        if self.l == 0 {
            return Err(Error::InvalidConfig("l must be at least 1".into()));
        }
        let top = (self.p as u128).checked_pow(2 * self.l + 2);
        if top.is_none_or(|m| m >= 1 << 31) {
            return Err(Error::InvalidConfig(format!("p^(2l+2) must stay below 2^31 (p = {}, l = {})", self.p, self.l)));
        }
        if self.samples == 0 || self.trials == 0 {
            return Err(Error::InvalidConfig("samples and trials must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidConfig("threshold must be positive".into()));
        }
        let theta = parse_rational(&self.theta)?;
        if theta < num_rational::Ratio::from_integer(0) || theta >= num_rational::Ratio::new(1, 2) {
            return Err(Error::BadTheta);
        }
        if let Some(g) = &self.group {
            crate::rtfmodel::FiniteModel::by_name(g)?;
        }
        if self.suites.is_empty() {
            return Err(Error::InvalidConfig("no suites selected".into()));
        }
        let mut expanded = Vec::new();
        let small_p = (self.p as usize) < 2 * self.n + 1;
        for s in &self.suites {
            if small_p && !s.ends_with(".*") && suites::needs_pair(s) {
                return Err(Error::InvalidConfig(format!(
                    "suite {s} needs 2n+1 distinct residues: p >= {} for n = {}",
                    2 * self.n + 1,
                    self.n
                )));
            }
            if s == "all" {
                expanded.extend(suites::names().iter().map(|x| x.to_string()));
            } else if let Some(prefix) = s.strip_suffix(".*") {
                let hits: Vec<String> = suites::names()
                    .iter()
                    .filter(|x| x.starts_with(&format!("{prefix}.")))
                    .map(|x| x.to_string())
                    .collect();
                if hits.is_empty() {
                    return Err(Error::UnknownSuite(s.clone()));
                }
                expanded.extend(hits);
            } else if suites::names().contains(&s.as_str()) {
                expanded.push(s.clone());
            } else {
                return Err(Error::UnknownSuite(s.clone()));
            }
        }
        let mut seen = std::collections::HashSet::new();
        expanded.retain(|s| seen.insert(s.clone()));
        self.suites = expanded;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut c = RunConfig::default();
        c.apply_text("# battery\nn = 2\np: 5\nsuite = rtf.inequality, exponents\nseed=7\n").unwrap();
        c.apply("seed", "9").unwrap();
        assert_eq!((c.n, c.p, c.seed), (2, 5, 9));
        assert_eq!(c.suites, vec!["rtf.inequality", "exponents"]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut c = RunConfig { suites: vec!["rtf.inequality".into()], p: 2, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        c.p = 9;
        assert!(c.validate().is_err());
        c.p = 3;
        c.theta = "1/2".into();
        assert_eq!(c.validate(), Err(Error::BadTheta));
        c.theta = "0".into();
        c.suites = vec!["nope".into()];
        assert_eq!(c.validate(), Err(Error::UnknownSuite("nope".into())));
        c.suites = vec!["compat.g0".into()];
        c.n = 2;
        assert!(c.validate().is_err());
        c.suites = vec!["compat.*".into()];
        c.validate().unwrap();
        assert_eq!(c.suites.len(), 4);
        assert!(c.apply("colour", "red").is_err());
    }

    #[test]
    fn expands_groups() {
        let mut c = RunConfig { suites: vec!["rtf.*".into(), "rtf.inequality".into()], ..Default::default() };
        c.validate().unwrap();
        assert_eq!(c.suites, vec!["rtf.inequality", "rtf.projector"]);
        let mut all = RunConfig { suites: vec!["all".into()], ..Default::default() };
        all.validate().unwrap();
        assert_eq!(all.suites.len(), suites::names().len());
    }
}
