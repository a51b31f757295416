//! Numerical checks of the limit laws against exact word-sphere data.
//!
//! Each check returns a [`LimitLawReport`]: per-n observations next to the
//! theoretical prediction, plus named criteria that record the value, the
//! threshold and the comparison, so pass/fail can be recomputed from the
//! report alone.

mod averaging;
mod clt;
mod degeneracy;
mod ldt;
mod llt;
mod mclt;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coding::ComponentDecomposition;
use crate::error::{Error, Result};
use crate::floatrepr;
use crate::spectral::LimitStatistics;
use crate::weights::WeightAssignment;

pub use averaging::averaging_table;
pub use clt::{berry_esseen_bound, clt_distance, sup_distance, BerryEsseenBound};
pub use degeneracy::degeneracy_check;
pub use ldt::{chernoff_rate, default_t_grid, ldt_rate, ChernoffRate};
pub use llt::llt_check;
pub use mclt::{default_cells, mclt_check, Cell};

/// Floor below which residuals count as zero in ratio and trend criteria.
pub const ABSOLUTE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawTag {
    Averaging,
    Clt,
    Ldt,
    Mclt,
    Llt,
    Degeneracy,
    BerryEsseenBound,
}

impl LawTag {
    pub fn name(self) -> &'static str {
        match self {
            LawTag::Averaging => "averaging",
            LawTag::Clt => "clt",
            LawTag::Ldt => "ldt",
            LawTag::Mclt => "mclt",
            LawTag::Llt => "llt",
            LawTag::Degeneracy => "degeneracy",
            LawTag::BerryEsseenBound => "berry-esseen-bound",
        }
    }
}

/// One line of a report table. `residual` is the law-specific normalized
/// deviation (for example `n·|Λ_n − Λ|` or `√n·D_n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    #[serde(with = "floatrepr")]
    pub observed: f64,
    #[serde(with = "floatrepr")]
    pub predicted: f64,
    #[serde(with = "floatrepr")]
    pub residual: f64,
    #[serde(with = "floatrepr::map", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl ReportRow {
    pub fn new(n: usize, observed: f64, predicted: f64, residual: f64) -> Self {
        ReportRow {
            n,
            observed,
            predicted,
            residual,
            extra: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    AtMost,
    AtLeast,
    LessThan,
    GreaterThan,
}

impl Comparison {
    fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::LessThan => value < threshold,
            Comparison::GreaterThan => value > threshold,
        }
    }
}

/// A named pass/fail test `value <cmp> threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub description: String,
    #[serde(with = "floatrepr")]
    pub value: f64,
    pub comparison: Comparison,
    #[serde(with = "floatrepr")]
    pub threshold: f64,
    pub passed: bool,
}

impl Criterion {
    pub fn new(name: &str, description: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Criterion {
            name: name.to_string(),
            description: description.into(),
            value,
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
        }
    }

    /// Recomputes the verdict from the recorded numbers.
    pub fn recheck(&self) -> bool {
        self.comparison.holds(self.value, self.threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawReport {
    pub law: LawTag,
    pub n_grid: Vec<usize>,
    pub rows: Vec<ReportRow>,
    /// Theoretical values (drift, variance, entropy, rates) used for the
    /// predictions, copied from the spectral computation.
    #[serde(with = "floatrepr::map")]
    pub predictions: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(with = "floatrepr::map")]
    pub tolerances: BTreeMap<String, f64>,
    pub criteria: Vec<Criterion>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub passed: bool,
}

impl LimitLawReport {
    fn new(law: LawTag, n_grid: &[usize]) -> Self {
        LimitLawReport {
            law,
            n_grid: n_grid.to_vec(),
            rows: Vec::new(),
            predictions: BTreeMap::new(),
            covariance: None,
            tolerances: BTreeMap::new(),
            criteria: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    fn predict(&mut self, key: &str, value: f64) {
        self.predictions.insert(key.to_string(), value);
    }

    fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.to_string(), value);
    }

    fn criterion(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    fn finish(mut self) -> Self {
        self.passed = self.criteria.iter().all(|c| c.passed);
        self
    }

    pub fn criterion_named(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// True when every criterion's verdict matches its recorded numbers and
    /// the overall verdict matches the criteria.
    pub fn recheck(&self) -> bool {
        self.criteria.iter().all(|c| c.recheck() == c.passed)
            && self.passed == self.criteria.iter().all(|c| c.passed)
    }

    /// Plot-ready `n,observed,predicted,residual` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,observed,predicted,residual\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                r.n,
                fmt_float(r.observed),
                fmt_float(r.predicted),
                fmt_float(r.residual)
            );
        }
        out
    }

    /// Human-readable summary with aligned columns.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "law: {}", self.law.name());
        for (k, v) in &self.predictions {
            let _ = writeln!(out, "  {k:<24} {}", fmt_float(*v));
        }
        if let Some(cov) = &self.covariance {
            for row in cov {
                let cells: Vec<String> = row.iter().map(|x| format!("{:>14}", fmt_float(*x))).collect();
                let _ = writeln!(out, "  covariance {}", cells.join(" "));
            }
        }
        let _ = writeln!(out, "{:>6} {:>22} {:>22} {:>22}", "n", "observed", "predicted", "residual");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>6} {:>22} {:>22} {:>22}",
                r.n,
                fmt_float(r.observed),
                fmt_float(r.predicted),
                fmt_float(r.residual)
            );
        }
        for c in &self.criteria {
            let cmp = match c.comparison {
                Comparison::AtMost => "<=",
                Comparison::AtLeast => ">=",
                Comparison::LessThan => "<",
                Comparison::GreaterThan => ">",
            };
            let _ = writeln!(
                out,
                "[{}] {}: {} {cmp} {}  ({})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                fmt_float(c.value),
                fmt_float(c.threshold),
                c.description
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let _ = writeln!(out, "result: {}", if self.passed { "pass" } else { "FAIL" });
        out
    }
}

/// Shortest round-trip decimal form; non-finite values as `inf`/`-inf`/`nan`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// Maxima over the first and the last quarter (at least one element each).
pub fn quartile_maxima(values: &[f64]) -> (f64, f64) {
    let q = values.len().div_ceil(4).max(1);
    let first = values[..q.min(values.len())].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = values[values.len().saturating_sub(q)..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (first, last)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn check_n_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::invalid("the n-grid is empty"));
    }
    if n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n-grid values must be strictly increasing positive integers"));
    }
    Ok(())
}

fn require_scalar(weights: &WeightAssignment, law: &str) -> Result<()> {
    if weights.dim() != 1 {
        return Err(Error::Precondition(format!("{law} needs scalar weights")));
    }
    Ok(())
}

fn first_maximal(dec: &ComponentDecomposition) -> Result<usize> {
    dec.maximal_indices()
        .first()
        .copied()
        .ok_or_else(|| Error::DegenerateCoding("no maximal component".into()))
}

fn insert_statistics(report: &mut LimitLawReport, stats: &LimitStatistics) {
    report.predict("lambda", stats.lambda);
    report.predict("entropy", stats.entropy);
    if stats.dim == 1 {
        report.predict("drift", stats.drift[0]);
        report.predict("variance", stats.sigma2());
    } else {
        for (i, d) in stats.drift.iter().enumerate() {
            report.predict(&format!("drift_{}", i + 1), *d);
        }
        report.covariance = Some(stats.covariance.clone());
    }
}

/// Drift used for centering: on a rational lattice the spectral drift is
/// snapped to the nearest fraction with denominator at most 1000 when it is
/// within 1e-10 of it, so symmetric cases center exactly.
pub fn centering_drift(stats: &LimitStatistics, weights: &WeightAssignment, coordinate: usize) -> f64 {
    let d = stats.drift[coordinate];
    if weights.lattice_scale().is_none() {
        return d;
    }
    for q in 1..=1000u32 {
        let k = (d * q as f64).round();
        let snapped = k / q as f64;
        if (d - snapped).abs() <= 1e-10 {
            return snapped;
        }
    }
    d
}

/// `None` on a rational lattice, the fallback bin width otherwise.
fn bin_for(weights: &WeightAssignment) -> Option<f64> {
    match weights.lattice_scale() {
        Some(_) => None,
        None => Some(fallback_bin_width(weights)),
    }
}

fn note_binning(report: &mut LimitLawReport, bin: Option<f64>) {
    if let Some(b) = bin {
        report.notes.push(format!("weights binned with width {b}; values are approximate"));
        report.tolerance("bin_width", b);
    }
}

/// Bin width used when irrational scalar weights must be binned: 1/100 of
/// the largest edge weight.
fn fallback_bin_width(weights: &WeightAssignment) -> f64 {
    let m = (0..weights.edge_count())
        .flat_map(|e| weights.value(e).iter().map(|x| x.abs()))
        .fold(0.0, f64::max);
    if m > 0.0 {
        m / 100.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        assert_eq!(quartile_maxima(&[1.0, 5.0, 2.0, 3.0, 4.0, 0.5, 0.1, 0.2]), (5.0, 0.2));
        assert_eq!(quartile_maxima(&[1.0, 2.0, 3.0]), (1.0, 3.0));
        assert_eq!(quartile_maxima(&[7.0]), (7.0, 7.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn csv_and_recheck() {
        let mut r = LimitLawReport::new(LawTag::Clt, &[4]);
        r.rows.push(ReportRow::new(4, 0.5, f64::INFINITY, 0.1));
        r.criterion(Criterion::new("x", "demo", 1.0, Comparison::AtMost, 2.0));
        let r = r.finish();
        assert!(r.passed && r.recheck());
        assert_eq!(r.to_csv(), "n,observed,predicted,residual\n4,0.5,inf,0.1\n");
        let json = serde_json::to_string(&r).unwrap();
        let back: LimitLawReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 2.0] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(f64::NEG_INFINITY), "-inf");
    }
}
