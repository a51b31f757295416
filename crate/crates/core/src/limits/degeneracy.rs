use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::enumerate::value_ranges;
use crate::error::{Error, Result};
use crate::spectral::LimitStatistics;
use crate::weights::WeightAssignment;

use super::{centering_drift, insert_statistics, require_scalar, Comparison, Criterion, LawTag, LimitLawReport, ReportRow};

/// Variance below which the spectral verdict is "degenerate".
pub const VARIANCE_THRESHOLD: f64 = 1e-8;
/// Allowed growth of the range width between `n_cap/2` and `n_cap`.
pub const WIDTH_SLACK: f64 = 1e-9;

/// Two independent degeneracy verdicts: the spectral variance, and whether
/// the exact range of `φ(g) − Λ|g|` over words of length at most `n` stays
/// bounded.
pub fn degeneracy_check(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    n_cap: usize,
) -> Result<LimitLawReport> {
    require_scalar(weights, "the degeneracy check")?;
    if n_cap < 2 {
        return Err(Error::invalid("n_cap must be at least 2"));
    }
    let _ = dec;
    let drift = centering_drift(stats, weights, 0);
    let ranges = value_ranges(coding, weights, drift, n_cap);

    let mut report = LimitLawReport::new(LawTag::Degeneracy, &(1..=n_cap).collect::<Vec<_>>());
    insert_statistics(&mut report, stats);
    report.predict("centering_drift", drift);
    report.tolerance("variance_threshold", VARIANCE_THRESHOLD);
    report.tolerance("width_slack", WIDTH_SLACK);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut widths = vec![0.0];
    for (n, &(a, b)) in ranges.iter().enumerate().skip(1) {
        if a.is_finite() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        let w = if hi >= lo { hi - lo } else { 0.0 };
        widths.push(w);
        let at_n = if b >= a { b - a } else { 0.0 };
        report.rows.push(ReportRow::new(n, w, 0.0, at_n).with("min", a).with("max", b));
    }
    let full = widths[n_cap];
    let half = widths[n_cap / 2];
    let bounded = full <= half + WIDTH_SLACK;
    let spectral = stats.sigma2() < VARIANCE_THRESHOLD;
    report.predict("width_full", full);
    report.predict("width_half", half);
    report.predict("spectral_degenerate", f64::from(u8::from(spectral)));
    report.predict("range_bounded", f64::from(u8::from(bounded)));
    report.criterion(Criterion::new(
        "verdicts-agree",
        "|spectral verdict − range verdict| (1 = degenerate or bounded)",
        f64::from(u8::from(spectral != bounded)),
        Comparison::AtMost,
        0.0,
    ));
    if spectral != bounded {
        let msg = format!(
            "variance {:e} says {}, range width {} at n = {} vs {} at n = {} says {}",
            stats.sigma2(),
            if spectral { "degenerate" } else { "non-degenerate" },
            full,
            n_cap,
            half,
            n_cap / 2,
            if bounded { "bounded" } else { "unbounded" }
        );
        if coding.is_group() {
            return Err(Error::InvariantViolation(msg));
        }
        report.notes.push(msg);
    }
    Ok(report.finish())
}
