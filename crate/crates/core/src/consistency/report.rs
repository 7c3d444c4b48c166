use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;
use core::fmt::Write;
use serde::{Deserialize, Serialize};

use crate::vixcore::Provenance;
use crate::Result;
use crate::sde::PathMap;

use super::MartingaleDiagnostic;

/// Checks that can be requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Cc1,
    Cc2,
    Cc3,
    Cc4,
    Cc4Integrated,
    Genpde,
    C1Pathwise,
    Martingale,
    Stationarity,
}

impl CheckName {
    pub const ALL: [CheckName; 9] = [
        CheckName::Cc1,
        CheckName::Cc2,
        CheckName::Cc3,
        CheckName::Cc4,
        CheckName::Cc4Integrated,
        CheckName::Genpde,
        CheckName::C1Pathwise,
        CheckName::Martingale,
        CheckName::Stationarity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Cc1 => "cc1",
            CheckName::Cc2 => "cc2",
            CheckName::Cc3 => "cc3",
            CheckName::Cc4 => "cc4",
            CheckName::Cc4Integrated => "cc4_integrated",
            CheckName::Genpde => "genpde",
            CheckName::C1Pathwise => "c1_pathwise",
            CheckName::Martingale => "martingale",
            CheckName::Stationarity => "stationarity",
        }
    }

    /// Analytic checks default to `1e-6`, checks resting on simulated or gridded quantities
    /// to `1e-2`; the martingale statistic passes at `1`.
    pub fn default_tolerance(self) -> f64 {
        match self {
            CheckName::Cc1 | CheckName::Cc2 => 1e-6,
            CheckName::Martingale => 1.0,
            _ => 1e-2,
        }
    }
}

/// Where a residual maximum was attained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Location {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<usize>,
}

/// Tabular residual data for plotting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualField {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ResidualField {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub max: f64,
    pub mean_abs: f64,
    pub location: Location,
    pub tolerance: f64,
    pub passed: bool,
    pub evaluated: usize,
    pub skipped: usize,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(skip)]
    pub field: ResidualField,
}

impl CheckResult {
    pub(crate) fn new(name: CheckName, max: f64, mean_abs: f64, tolerance: f64) -> Self {
        Self {
            name,
            max,
            mean_abs,
            location: Location::default(),
            tolerance,
            passed: max.is_finite() && max <= tolerance,
            evaluated: 0,
            skipped: 0,
            note: String::new(),
            field: ResidualField::default(),
        }
    }

    /// Re-evaluates the verdict against a new tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.passed = self.max.is_finite() && self.max <= tolerance;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub scenario_hash: String,
    pub h_provenance: Provenance,
    pub results: Vec<CheckResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub martingale: Option<MartingaleDiagnostic>,
    pub passed: bool,
}

impl ConsistencyReport {
    pub fn get(&self, name: CheckName) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }

    /// One row per check.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario {}  h: {:?}", self.scenario_hash, self.h_provenance);
        let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>10} {:>6}", "check", "max", "mean_abs", "tolerance", "");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<16} {:>12.4e} {:>12.4e} {:>10.1e} {:>6}",
                r.name.as_str(),
                r.max,
                r.mean_abs,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        s
    }
}

/// Residual statistics per column, reduced over paths in path order.
#[derive(Debug, Clone)]
pub(crate) struct Acc {
    pub max: Vec<f64>,
    pub arg: Vec<usize>,
    pub sum: Vec<f64>,
    pub count: Vec<usize>,
    pub skipped: usize,
}

/// Marks a point excluded from a check.
pub(crate) const SKIP: f64 = -1.0;

impl Acc {
    pub fn new(cols: usize) -> Self {
        Self { max: vec![f64::NEG_INFINITY; cols], arg: vec![0; cols], sum: vec![0.0; cols], count: vec![0; cols], skipped: 0 }
    }

    fn push(&mut self, path: usize, col: usize, v: f64) {
        if v == SKIP {
            self.skipped += 1;
            return;
        }
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.max[col] {
            self.max[col] = v;
            self.arg[col] = path;
        }
        self.sum[col] += v;
        self.count[col] += 1;
    }

    fn merge(&mut self, other: Acc) {
        for c in 0..self.max.len() {
            if other.max[c] > self.max[c] {
                self.max[c] = other.max[c];
                self.arg[c] = other.arg[c];
            }
            self.sum[c] += other.sum[c];
            self.count[c] += other.count[c];
        }
        self.skipped += other.skipped;
    }

    /// Overall maximum with its column and path, the mean and the number of points.
    pub fn summary(&self, cols: core::ops::Range<usize>) -> (f64, usize, usize, f64, usize) {
        let (mut best, mut col, mut path) = (f64::NEG_INFINITY, cols.start, 0);
        let (mut sum, mut count) = (0.0, 0);
        for c in cols {
            if self.max[c] > best {
                best = self.max[c];
                col = c;
                path = self.arg[c];
            }
            sum += self.sum[c];
            count += self.count[c];
        }
        let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        if count == 0 {
            best = f64::NAN;
        }
        (best, col, path, mean, count)
    }

    pub fn mean(&self, c: usize) -> f64 {
        if self.count[c] > 0 {
            self.sum[c] / self.count[c] as f64
        } else {
            f64::NAN
        }
    }
}

const BLOCK: usize = 32;

/// Runs `f(path, out)` for every path; `out` holds one residual per column, or [`SKIP`].
pub(crate) fn reduce_paths<E, F>(exec: &E, n_paths: usize, cols: usize, f: F) -> Result<Acc>
where
    E: PathMap,
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    let blocks = n_paths.div_ceil(BLOCK);
    let parts = exec.map(blocks, |b| -> Result<Acc> {
        let mut acc = Acc::new(cols);
        let mut buf = vec![0.0; cols];
        for p in b * BLOCK..((b + 1) * BLOCK).min(n_paths) {
            f(p, &mut buf)?;
            for (c, &v) in buf.iter().enumerate() {
                acc.push(p, c, v);
            }
        }
        Ok(acc)
    });
    let mut total = Acc::new(cols);
    for part in parts {
        total.merge(part?);
    }
    Ok(total)
}

pub(crate) fn describe_skips(skipped: usize) -> String {
    if skipped == 0 {
        String::new()
    } else {
        format!("{skipped} points outside the interior of h were not evaluated")
    }
}
