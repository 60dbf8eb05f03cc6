//! Identity reports and report bundles shared by the library and the CLI.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<usize> for Param {
    fn from(v: usize) -> Self {
        Param::Int(v as i64)
    }
}

impl From<i64> for Param {
    fn from(v: i64) -> Self {
        Param::Int(v)
    }
}

impl From<i32> for Param {
    fn from(v: i32) -> Self {
        Param::Int(v as i64)
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Real(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

impl From<String> for Param {
    fn from(v: String) -> Self {
        Param::Text(v)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Int(v) => write!(f, "{v}"),
            Param::Real(v) => write!(f, "{v}"),
            Param::Text(v) => write!(f, "{v}"),
        }
    }
}

fn cmp_param(a: &Param, b: &Param) -> Ordering {
    use Param::*;
    match (a, b) {
        (Int(x), Int(y)) => x.cmp(y),
        (Int(x), Real(y)) => (*x as f64).total_cmp(y),
        (Real(x), Int(y)) => x.total_cmp(&(*y as f64)),
        (Real(x), Real(y)) => x.total_cmp(y),
        (Text(x), Text(y)) => x.cmp(y),
        (Text(_), _) => Ordering::Greater,
        (_, Text(_)) => Ordering::Less,
    }
}

/// Outcome of checking one identity (or one bound) for one parameter choice.
///
/// For equalities `residual` is an operator-norm distance; for bounds it is the
/// measured quantity and `tolerance` is the bound. Either way
/// `pass == (residual <= tolerance)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub params: BTreeMap<String, Param>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        IdentityReport {
            name: name.into(),
            params: BTreeMap::new(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// Exact check: residual 0 when `ok`, 1 otherwise.
    pub fn exact(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn with(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn param_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<32} [{}] residual={:.3e} tol={:.1e}",
            if self.pass { "ok" } else { "FAIL" },
            self.name,
            self.param_string(),
            self.residual,
            self.tolerance
        )
    }
}

/// Total order used for stable output: name, then parameters key by key.
pub fn report_order(a: &IdentityReport, b: &IdentityReport) -> Ordering {
    a.name.cmp(&b.name).then_with(|| {
        let mut ia = a.params.iter();
        let mut ib = b.params.iter();
        loop {
            match (ia.next(), ib.next()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some((ka, va)), Some((kb, vb))) => {
                    let o = ka.cmp(kb).then_with(|| cmp_param(va, vb));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
            }
        }
    })
}

pub fn sort_reports(reports: &mut [IdentityReport]) {
    reports.sort_by(report_order);
}

pub fn all_pass(reports: &[IdentityReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionTiming {
    pub section: String,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub version: String,
    pub config: serde_json::Value,
    pub reports: Vec<IdentityReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<SectionTiming>,
    pub pass: bool,
}

impl ReportBundle {
    pub fn new(config: serde_json::Value, mut reports: Vec<IdentityReport>) -> Self {
        sort_reports(&mut reports);
        let pass = all_pass(&reports);
        ReportBundle {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            reports,
            timings: Vec::new(),
            pass,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityReport> {
        self.reports.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report bundle serializes")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        for t in &self.timings {
            out.push_str(&format!("time {:<24} {:>10.1} ms\n", t.section, t.wall_ms));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{} checks, {} failed: {}\n",
            self.reports.len(),
            failed,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_flag_tracks_tolerance() {
        assert!(IdentityReport::new("a", 1e-12, 1e-9).pass);
        assert!(!IdentityReport::new("a", 1e-6, 1e-9).pass);
        assert!(!IdentityReport::new("a", f64::NAN, 1e-9).pass);
        assert!(IdentityReport::exact("a", true).pass);
        assert!(!IdentityReport::exact("a", false).pass);
    }

    #[test]
    fn ordering_is_numeric_in_params() {
        let mut v = vec![
            IdentityReport::new("b", 0.0, 1.0).with("m", 10usize),
            IdentityReport::new("b", 0.0, 1.0).with("m", 2usize),
            IdentityReport::new("a", 0.0, 1.0).with("m", 3usize),
        ];
        sort_reports(&mut v);
        let keys: Vec<String> = v
            .iter()
            .map(|r| format!("{}{}", r.name, r.param_string()))
            .collect();
        assert_eq!(keys, ["am=3", "bm=2", "bm=10"]);
    }

    #[test]
    fn bundle_round_trips() {
        let b = ReportBundle::new(
            serde_json::json!({"n": 2}),
            vec![IdentityReport::new("x", 1e-15, 1e-9)
                .with("k", 1usize)
                .with("t", 0.5)],
        );
        let back: ReportBundle = serde_json::from_str(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }
}
