use crate::coding::MarkovCoding;
use crate::enumerate::moment_sweep;
use crate::error::Result;
use crate::spectral::LimitStatistics;
use crate::weights::WeightAssignment;

use super::{
    check_n_grid, insert_statistics, median, quartile_maxima, require_scalar, Comparison, Criterion, LawTag,
    LimitLawReport, ReportRow, ABSOLUTE_FLOOR,
};

/// Bounded-ratio factor: `max r_n ≤ 10 · median r_n`.
pub const MEDIAN_FACTOR: f64 = 10.0;
/// Trend factor: last-quartile max `≤ 3 ·` first-quartile max.
pub const TREND_FACTOR: f64 = 3.0;

/// Exact means `Λ_n = E[φ]/n` over `W_n` against the drift, with
/// `r_n = n·|Λ_n − Λ|` expected to stay bounded.
pub fn averaging_table(
    coding: &MarkovCoding,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    n_grid: &[usize],
) -> Result<LimitLawReport> {
    require_scalar(weights, "the averaging table")?;
    check_n_grid(n_grid)?;
    let drift = stats.drift[0];
    let sweep = moment_sweep(coding, weights, *n_grid.last().unwrap());

    let mut report = LimitLawReport::new(LawTag::Averaging, n_grid);
    insert_statistics(&mut report, stats);
    let mut residuals = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let m = &sweep[n];
        let mean = m.mean[0];
        let r = (mean - n as f64 * drift).abs();
        residuals.push(r);
        report
            .rows
            .push(ReportRow::new(n, mean / n as f64, drift, r).with("mean", mean));
    }

    let max = residuals.iter().copied().fold(0.0, f64::max);
    let med = median(&residuals);
    let (first, last) = quartile_maxima(&residuals);
    report.tolerance("median_factor", MEDIAN_FACTOR);
    report.tolerance("trend_factor", TREND_FACTOR);
    report.tolerance("absolute_floor", ABSOLUTE_FLOOR);
    report.criterion(Criterion::new(
        "bounded",
        "max n·|Λ_n − Λ| against max(10·median, floor)",
        max,
        Comparison::AtMost,
        (MEDIAN_FACTOR * med).max(ABSOLUTE_FLOOR),
    ));
    report.criterion(Criterion::new(
        "no-upward-trend",
        "last-quartile max against 3·first-quartile max + floor",
        last,
        Comparison::AtMost,
        TREND_FACTOR * first + ABSOLUTE_FLOOR,
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, decompose_components};
    use crate::spectral::statistics;
    use crate::weights::{weights_from_edge_table, weights_from_homomorphism, weights_word_length, EdgeValue};
    use std::collections::BTreeMap;

    fn hom(pairs: &[(&str, f64)]) -> (MarkovCoding, WeightAssignment) {
        let c = build_free_group_coding(2).unwrap();
        let map: BTreeMap<String, Vec<f64>> = pairs.iter().map(|(k, v)| (k.to_string(), vec![*v])).collect();
        let w = weights_from_homomorphism(&c, &map).unwrap();
        (c, w)
    }

    #[test]
    fn a_exponent_means_vanish() {
        let (c, w) = hom(&[("a", 1.0), ("b", 0.0)]);
        let d = decompose_components(&c).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        let grid: Vec<usize> = (1..=60).collect();
        let r = averaging_table(&c, &w, &st, &grid).unwrap();
        assert!(r.rows.iter().all(|row| row.observed == 0.0));
        assert!(r.passed && r.recheck());
    }

    #[test]
    fn word_length_means_are_one() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_word_length(&c);
        let d = decompose_components(&c).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        let r = averaging_table(&c, &w, &st, &[1, 5, 10, 40]).unwrap();
        assert!(r.rows.iter().all(|row| row.observed == 1.0), "{}", r.to_text());
        assert!(r.passed);
    }

    #[test]
    fn aa_transitions_have_bounded_offset() {
        // Weight 1 on the a→a transition: mean count (n−1)/12, drift 1/12.
        let c = build_free_group_coding(2).unwrap();
        let table: Vec<EdgeValue> = c
            .word_edge_indices()
            .map(|e| {
                let edge = &c.edges()[e];
                let from = c.vertices()[edge.from].clone();
                let to = c.vertices()[edge.to].clone();
                let v = if from == "a" && to == "a" { 1.0 } else { 0.0 };
                EdgeValue { from, to, value: vec![v] }
            })
            .collect();
        let w = weights_from_edge_table(&c, &table).unwrap();
        let d = decompose_components(&c).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        assert!((st.drift[0] - 1.0 / 12.0).abs() < 1e-12);
        let grid: Vec<usize> = (25..=200).collect();
        let r = averaging_table(&c, &w, &st, &grid).unwrap();
        for row in &r.rows {
            assert!((row.residual - 1.0 / 12.0).abs() < 1e-9, "{row:?}");
        }
        assert!(r.passed, "{}", r.to_text());
    }

    #[test]
    fn vector_weights_rejected() {
        let c = build_free_group_coding(2).unwrap();
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![1.0, 0.0]);
        map.insert("b".to_string(), vec![0.0, 1.0]);
        let w = weights_from_homomorphism(&c, &map).unwrap();
        let d = decompose_components(&c).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        assert!(averaging_table(&c, &w, &st, &[1]).is_err());
    }
}
