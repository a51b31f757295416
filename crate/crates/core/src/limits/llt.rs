use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::bigutil::ratio;
use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::enumerate::real_distributions;
use crate::error::{Error, Result};
use crate::spectral::{default_lattice_grid, lattice_scan, LimitStatistics};
use crate::weights::WeightAssignment;

use super::{
    centering_drift, check_n_grid, fallback_bin_width, first_maximal, insert_statistics, quartile_maxima,
    note_binning, require_scalar, Comparison, Criterion, LawTag, LimitLawReport, ReportRow, ABSOLUTE_FLOOR,
};

/// Largest `|q_n/L − 1|` allowed at the largest `n`.
pub const RELATIVE_TOLERANCE: f64 = 0.1;
/// Number of bins across `[a, b]`.
pub const BINS_PER_INTERVAL: f64 = 50.0;

/// `√n · P(φ − nΛ ∈ (a, b])` from the binned distribution against the local
/// limit `(b − a)/(√(2π)σ)`. Refuses lattice weights.
#[allow(clippy::too_many_arguments)]
pub fn llt_check(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    a: f64,
    b: f64,
    n_grid: &[usize],
) -> Result<LimitLawReport> {
    require_scalar(weights, "the local limit check")?;
    check_n_grid(n_grid)?;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::invalid("the interval needs finite a <= b"));
    }
    if stats.degenerate {
        return Err(Error::Precondition("variance is zero; the local limit law does not apply".into()));
    }
    let comp = first_maximal(dec)?;
    let scan = lattice_scan(coding, dec, weights, comp, &default_lattice_grid())?;
    if let Some(w) = &scan.witness {
        return Err(Error::LatticeWitness { t: w.t, gap: w.gap });
    }

    let bin = if b > a { (b - a) / BINS_PER_INTERVAL } else { fallback_bin_width(weights) };
    let drift = centering_drift(stats, weights, 0);
    let sigma = stats.sigma2().sqrt();
    let target = (b - a) / ((2.0 * PI).sqrt() * sigma);
    let dists = real_distributions(coding, None, weights, n_grid, bin)?;

    let mut report = LimitLawReport::new(LawTag::Llt, n_grid);
    insert_statistics(&mut report, stats);
    report.predict("target", target);
    report.predict("interval_lo", a);
    report.predict("interval_hi", b);
    report.predict("lattice_min_gap", scan.min_gap);
    report.predict("lattice_min_gap_t", scan.min_gap_t);
    report.tolerance("relative", RELATIVE_TOLERANCE);
    report.tolerance("fallback_bin_width", bin);

    let mut errors = Vec::with_capacity(dists.len());
    let mut qs = Vec::with_capacity(dists.len());
    for d in &dists {
        let n = d.n as f64;
        let mut hit = BigUint::zero();
        for (c, count) in d.values.iter().zip(&d.counts) {
            let x = c - n * drift;
            if x > a && x <= b {
                hit += count;
            }
        }
        let q = n.sqrt() * ratio(&hit, &d.total);
        let err = if target > 0.0 { (q / target - 1.0).abs() } else { q };
        qs.push(q);
        errors.push(err);
        report.rows.push(ReportRow::new(d.n, q, target, err));
    }

    note_binning(&mut report, dists.iter().find_map(|d| d.bin_width));
    if target == 0.0 {
        report.criterion(Criterion::new(
            "zero-target",
            "largest scaled mass of the empty interval",
            qs.iter().copied().fold(0.0, f64::max),
            Comparison::AtMost,
            0.0,
        ));
        return Ok(report.finish());
    }
    report.criterion(Criterion::new(
        "relative-error",
        "|q_n/L − 1| at the largest n",
        *errors.last().unwrap(),
        Comparison::AtMost,
        RELATIVE_TOLERANCE,
    ));
    if errors.len() >= 2 {
        let (first, last) = quartile_maxima(&errors);
        report.criterion(Criterion::new(
            "downward-trend",
            "last-quartile max of |q_n/L − 1| against the first-quartile max",
            last,
            Comparison::AtMost,
            first + ABSOLUTE_FLOOR,
        ));
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, decompose_components};
    use crate::spectral::statistics;
    use crate::weights::weights_from_homomorphism;
    use std::collections::BTreeMap;

    fn setup(b: f64) -> (MarkovCoding, ComponentDecomposition, WeightAssignment, LimitStatistics) {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![1.0]);
        map.insert("b".to_string(), vec![b]);
        let w = weights_from_homomorphism(&c, &map).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        (c, d, w, st)
    }

    #[test]
    fn irrational_weights_converge() {
        let (c, d, w, st) = setup(2f64.sqrt());
        assert!((st.sigma2() - 3.0).abs() < 1e-6);
        let r = llt_check(&c, &d, &w, &st, -0.5, 0.5, &[100, 200, 300]).unwrap();
        let target = 1.0 / (6.0 * PI).sqrt();
        assert!((r.predictions["target"] - target).abs() < 1e-6);
        assert!(r.predictions["lattice_min_gap"] > 0.0);
        assert!(r.passed, "{}", r.to_text());
    }

    #[test]
    fn lattice_refused() {
        let (c, d, w, st) = setup(0.0);
        match llt_check(&c, &d, &w, &st, -0.5, 0.5, &[10]) {
            Err(Error::LatticeWitness { t, gap }) => {
                assert!(gap.abs() <= 1e-9);
                assert!(t > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_length_interval() {
        let (c, d, w, st) = setup(2f64.sqrt());
        let r = llt_check(&c, &d, &w, &st, 0.3, 0.3, &[50, 100]).unwrap();
        assert!(r.rows.iter().all(|row| row.observed == 0.0));
        assert!(r.passed);
    }
}
