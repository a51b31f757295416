use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigutil::ratio;
use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::enumerate::{real_distributions, weighted_sums};
use crate::error::{Error, Result};
use crate::floatrepr;
use crate::spectral::{pressure_curve, LimitStatistics};
use crate::weights::WeightAssignment;

use super::{
    centering_drift, check_n_grid, fallback_bin_width, first_maximal, insert_statistics, note_binning, require_scalar, Comparison, Criterion,
    LawTag, LimitLawReport, ReportRow,
};

/// Tail membership uses `|x − nΛ| > nε + TAIL_SLACK`, so values that sit on
/// the boundary up to rounding are excluded.
pub const TAIL_SLACK: f64 = 1e-9;
/// Relative slack of the pointwise inequalities (floating point only).
pub const POINTWISE_SLACK: f64 = 1e-9;
/// Size of the grid `n` where the constant of the exponential bound is fitted.
pub const FIT_N: usize = 10;
const T_STEP: f64 = 0.01;

/// `[0, max(2, 2ε/σ²)]` in steps of 0.01.
pub fn default_t_grid(epsilon: f64, variance: f64) -> Vec<f64> {
    let top = if variance > 1e-8 { (2.0 * epsilon / variance).max(2.0) } else { 2.0 };
    let steps = (top / T_STEP).round() as usize;
    (0..=steps).map(|k| k as f64 * T_STEP).collect()
}

/// Grid maximizers of the Legendre transform for both tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRate {
    #[serde(with = "floatrepr")]
    pub epsilon: f64,
    /// `max_t [tε − (P(t) − P(0) − tΛ)]`.
    #[serde(with = "floatrepr")]
    pub upper: f64,
    #[serde(with = "floatrepr")]
    pub t_upper: f64,
    /// `max_t [tε − (P(−t) − P(0) + tΛ)]`.
    #[serde(with = "floatrepr")]
    pub lower: f64,
    #[serde(with = "floatrepr")]
    pub t_lower: f64,
    /// `min(upper, lower)`.
    #[serde(with = "floatrepr")]
    pub rate: f64,
}

/// Chernoff rate of the two-sided deviation `|φ/n − Λ| > ε` from the
/// pressure of the first maximal component, maximized over `t_grid`.
pub fn chernoff_rate(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    epsilon: f64,
    t_grid: &[f64],
) -> Result<ChernoffRate> {
    require_scalar(weights, "the Chernoff rate")?;
    if t_grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) || t_grid.is_empty() {
        return Err(Error::invalid("the t-grid must be nonempty, finite and nonnegative"));
    }
    let comp = first_maximal(dec)?;
    let drift = stats.drift[0];
    let mut points = vec![vec![0.0]];
    points.extend(t_grid.iter().map(|&t| vec![t]));
    points.extend(t_grid.iter().map(|&t| vec![-t]));
    let p = pressure_curve(coding, dec, weights, comp, &points)?;
    let p0 = p[0];
    let k = t_grid.len();
    let best = |vals: &mut dyn Iterator<Item = (f64, f64)>| {
        vals.fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a })
    };
    let (upper, t_upper) = best(&mut (0..k).map(|i| {
        let t = t_grid[i];
        (t * epsilon - (p[1 + i] - p0 - t * drift), t)
    }));
    let (lower, t_lower) = best(&mut (0..k).map(|i| {
        let t = t_grid[i];
        (t * epsilon - (p[1 + k + i] - p0 + t * drift), t)
    }));
    Ok(ChernoffRate {
        epsilon,
        upper,
        t_upper,
        lower,
        t_lower,
        rate: upper.min(lower),
    })
}

/// Exact tail probabilities against the finite-n exponential Chebyshev
/// bound `min_t W(±t, n)/#W_n · e^{−tn(ε ± Λ)}` and the spectral rate.
pub fn ldt_rate(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    epsilon: f64,
    n_grid: &[usize],
    t_grid: Option<&[f64]>,
) -> Result<LimitLawReport> {
    require_scalar(weights, "the large deviation check")?;
    check_n_grid(n_grid)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive and finite"));
    }
    let default_grid;
    let t_grid = match t_grid {
        Some(g) => g,
        None => {
            default_grid = default_t_grid(epsilon, stats.sigma2());
            &default_grid
        }
    };
    let rate = chernoff_rate(coding, dec, weights, stats, epsilon, t_grid)?;
    let drift = centering_drift(stats, weights, 0);
    let max_n = *n_grid.last().unwrap();
    let dists = real_distributions(coding, None, weights, n_grid, fallback_bin_width(weights))?;

    // ln W(s, n) for s = 0 and s = ±t, from the scalar transfer program.
    let mut params = vec![0.0];
    params.extend(t_grid.iter().filter(|&&t| t > 0.0).flat_map(|&t| [t, -t]));
    let sums: Vec<Vec<f64>> = params
        .par_iter()
        .map(|&s| {
            weighted_sums(coding, weights, &[Complex64::new(s, 0.0)], max_n)
                .map(|v| v.iter().map(|x| x.ln_abs()).collect())
        })
        .collect::<Result<_>>()?;

    let mut report = LimitLawReport::new(LawTag::Ldt, n_grid);
    insert_statistics(&mut report, stats);
    report.predict("centering_drift", drift);
    report.predict("epsilon", epsilon);
    report.predict("rate_bound", rate.rate);
    report.predict("rate_upper", rate.upper);
    report.predict("rate_lower", rate.lower);
    report.predict("t_upper", rate.t_upper);
    report.predict("t_lower", rate.t_lower);
    report.tolerance("tail_slack", TAIL_SLACK);
    report.tolerance("pointwise_slack", POINTWISE_SLACK);
    report.tolerance("t_step", T_STEP);

    let mut tails = Vec::with_capacity(n_grid.len());
    let mut worst_chernoff: f64 = 0.0;
    for d in &dists {
        let n = d.n as f64;
        let cut = n * epsilon + TAIL_SLACK;
        let mut tail = BigUint::zero();
        for (x, c) in d.values.iter().zip(&d.counts) {
            if (x - n * drift).abs() > cut {
                tail += c;
            }
        }
        let p = ratio(&tail, &d.total);
        let ln_count = sums[0][d.n];
        let mut up = f64::INFINITY;
        let mut down = f64::INFINITY;
        for (j, pair) in params[1..].chunks(2).enumerate() {
            let t = pair[0];
            up = up.min(sums[1 + 2 * j][d.n] - ln_count - t * n * (drift + epsilon));
            down = down.min(sums[2 + 2 * j][d.n] - ln_count - t * n * (epsilon - drift));
        }
        let chernoff = (up.min(0.0).exp() + down.min(0.0).exp()).min(1.0);
        if p > 0.0 {
            worst_chernoff = worst_chernoff.max(p / chernoff);
        }
        let r = if p > 0.0 { -p.ln() / n } else { f64::INFINITY };
        tails.push((d.n, p, r));
        report.rows.push(ReportRow::new(d.n, p, chernoff, r).with("empirical_rate", r));
    }

    note_binning(&mut report, dists.iter().find_map(|d| d.bin_width));
    if tails.iter().all(|t| t.1 == 0.0) {
        report.notes.push("degenerate tail: no word deviates by more than epsilon".into());
        report.predict("degenerate_tail", 1.0);
        report.criterion(Criterion::new(
            "degenerate-tail",
            "largest tail probability on the grid",
            0.0,
            Comparison::AtMost,
            0.0,
        ));
        return Ok(report.finish());
    }
    report.predict("degenerate_tail", 0.0);
    report.criterion(Criterion::new(
        "chernoff-pointwise",
        "max over n of tail / finite-n Chernoff bound",
        worst_chernoff,
        Comparison::AtMost,
        1.0 + POINTWISE_SLACK,
    ));

    // Exponential bound with the constant fitted at the first n >= 10 with
    // a nonempty tail, checked on every later grid n.
    if let Some(&(n0, p0, _)) = tails.iter().find(|t| t.0 >= FIT_N && t.1 > 0.0) {
        let ln_c = p0.ln() + n0 as f64 * rate.rate;
        report.predict("fit_n", n0 as f64);
        report.predict("ln_constant", ln_c);
        let worst = tails
            .iter()
            .filter(|t| t.0 >= n0)
            .map(|t| if t.1 > 0.0 { t.1.ln() + t.0 as f64 * rate.rate - ln_c } else { f64::NEG_INFINITY })
            .fold(f64::NEG_INFINITY, f64::max);
        report.criterion(Criterion::new(
            "fitted-constant",
            "max over n >= fit_n of ln p_n + n·I − ln C",
            worst,
            Comparison::AtMost,
            POINTWISE_SLACK,
        ));
    } else {
        report.notes.push("no nonempty tail at n >= 10; constant not fitted".into());
    }

    let &(n_last, _, r_last) = tails.last().unwrap();
    report.predict("rate_relative_error", if rate.rate > 0.0 { (r_last - rate.rate).abs() / rate.rate } else { f64::NAN });
    report.criterion(Criterion::new(
        "limsup",
        format!("empirical rate at n = {n_last} against half the rate bound"),
        r_last,
        Comparison::AtLeast,
        rate.rate / 2.0,
    ));
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, decompose_components};
    use crate::spectral::statistics;
    use crate::weights::{weights_from_homomorphism, weights_word_length};
    use std::collections::BTreeMap;

    fn a_exponent() -> (MarkovCoding, ComponentDecomposition, WeightAssignment, LimitStatistics) {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), vec![1.0]);
        map.insert("b".to_string(), vec![0.0]);
        let w = weights_from_homomorphism(&c, &map).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        (c, d, w, st)
    }

    #[test]
    fn rate_matches_independent_value() {
        let (c, d, w, st) = a_exponent();
        let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let r = chernoff_rate(&c, &d, &w, &st, 0.4, &grid).unwrap();
        assert!((r.rate - 0.0860758612407547).abs() < 1e-8, "{r:?}");
        assert!((r.upper - r.lower).abs() < 1e-10);
        assert!((r.t_upper - 0.47).abs() < 0.015);
    }

    #[test]
    fn a_exponent_tail() {
        let (c, d, w, st) = a_exponent();
        let grid: Vec<usize> = (1..=200).collect();
        let r = ldt_rate(&c, &d, &w, &st, 0.4, &grid, None).unwrap();
        let chern = r.criterion_named("chernoff-pointwise").unwrap();
        assert!(chern.passed, "{}", r.to_text());
        assert!(r.criterion_named("limsup").unwrap().passed);
        assert!(r.predictions["rate_relative_error"] <= 0.25, "{}", r.predictions["rate_relative_error"]);
        assert!(r.recheck());
    }

    #[test]
    fn word_length_tail_is_empty() {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        let w = weights_word_length(&c);
        let st = statistics(&c, &d, &w).unwrap();
        let r = ldt_rate(&c, &d, &w, &st, 0.1, &[1, 10, 50], None).unwrap();
        assert!(r.rows.iter().all(|row| row.observed == 0.0));
        assert!(r.passed);
        assert_eq!(r.predictions["degenerate_tail"], 1.0);
    }

    #[test]
    fn beyond_range_tail_is_empty() {
        let (c, d, w, st) = a_exponent();
        let r = ldt_rate(&c, &d, &w, &st, 1.1, &[1, 10, 50], None).unwrap();
        assert!(r.passed);
        assert_eq!(r.predictions["degenerate_tail"], 1.0);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let (c, d, w, st) = a_exponent();
        assert!(ldt_rate(&c, &d, &w, &st, 0.0, &[1], None).is_err());
    }
}
