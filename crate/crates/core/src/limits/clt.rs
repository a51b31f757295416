use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bigutil::ratio;
use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::enumerate::real_distributions;
use crate::error::{Error, Result};
use crate::floatrepr;
use crate::quadrature::{integrate_panels, normal_cdf};
use crate::spectral::LimitStatistics;
use crate::weights::WeightAssignment;

use super::{
    centering_drift, fallback_bin_width, check_n_grid, insert_statistics, note_binning, require_scalar, Comparison, Criterion, LawTag,
    LimitLawReport, ReportRow,
};

/// `max/min` of `√n·D_n` allowed over the rate window.
pub const RATE_SPREAD: f64 = 3.0;
/// Smallest `n` entering the rate window.
pub const RATE_WINDOW_START: usize = 36;
const QUADRATURE_TOLERANCE: f64 = 1e-10;
const MAX_PANELS: usize = 4096;

/// `sup_x |F(x) − G(x)|` for the distribution with the given support values
/// and counts against a continuous CDF `G`, evaluated on both sides of every
/// jump. Cumulative counts are kept exact.
pub fn sup_distance(values: &[f64], counts: &[BigUint], total: &BigUint, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut below = BigUint::zero();
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let x = values[order[i]];
        let mut upto = below.clone();
        while i < order.len() && values[order[i]] == x {
            upto += &counts[order[i]];
            i += 1;
        }
        let g = cdf(x);
        sup = sup
            .max((ratio(&below, total) - g).abs())
            .max((ratio(&upto, total) - g).abs());
        below = upto;
    }
    sup
}

/// Kolmogorov distance `D_n` between the normalized word distribution and
/// the standard Gaussian, on every `n` of the grid.
pub fn clt_distance(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    n_grid: &[usize],
) -> Result<LimitLawReport> {
    require_scalar(weights, "the central limit check")?;
    check_n_grid(n_grid)?;
    if stats.degenerate {
        return Err(Error::Precondition(
            "variance is zero; the weights are degenerate, run the degeneracy check instead".into(),
        ));
    }
    let _ = dec;
    let drift = centering_drift(stats, weights, 0);
    let sigma = stats.sigma2().sqrt();
    let dists = real_distributions(coding, None, weights, n_grid, fallback_bin_width(weights))?;

    let mut report = LimitLawReport::new(LawTag::Clt, n_grid);
    insert_statistics(&mut report, stats);
    report.predict("centering_drift", drift);
    let mut scaled = Vec::with_capacity(n_grid.len());
    for d in &dists {
        let n = d.n as f64;
        let ys: Vec<f64> = d
            .values
            .iter()
            .map(|x| (x - n * drift) / (sigma * n.sqrt()))
            .collect();
        let dn = sup_distance(&ys, &d.counts, &d.total, normal_cdf);
        let s = n.sqrt() * dn;
        scaled.push((d.n, dn, s));
        report.rows.push(ReportRow::new(d.n, dn, 0.0, s));
    }
    note_binning(&mut report, dists.iter().find_map(|d| d.bin_width));

    let window: Vec<f64> = {
        let w: Vec<f64> = scaled.iter().filter(|r| r.0 >= RATE_WINDOW_START).map(|r| r.2).collect();
        if w.len() >= 2 {
            w
        } else {
            scaled.iter().map(|r| r.2).collect()
        }
    };
    let max = window.iter().copied().fold(0.0, f64::max);
    let min = window.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    report.tolerance("rate_spread", RATE_SPREAD);
    report.tolerance("rate_window_start", RATE_WINDOW_START as f64);
    report.criterion(Criterion::new(
        "rate-bounded",
        "max/min of sqrt(n)·D_n over n >= 36",
        spread,
        Comparison::AtMost,
        RATE_SPREAD,
    ));
    if scaled.len() >= 2 {
        report.criterion(Criterion::new(
            "decreasing",
            "D_n at the largest n against D_n at the smallest n",
            scaled.last().unwrap().1,
            Comparison::LessThan,
            scaled[0].1,
        ));
    }
    Ok(report.finish())
}

/// Terms of the smoothing bound on the overcounted distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerryEsseenBound {
    pub n: usize,
    #[serde(with = "floatrepr")]
    pub t_max: f64,
    #[serde(with = "floatrepr")]
    pub variance: f64,
    /// `E_n`: mean of `(φ − nΛ)/√n` under `H_n`.
    #[serde(with = "floatrepr")]
    pub mean_offset: f64,
    /// `∫_{−T}^{T} |Ĥ_n(t) − e^{−σ²t²/2}| / |t| dt`.
    #[serde(with = "floatrepr")]
    pub integral: f64,
    /// `∫_{−T}^{T} |Ĥ_n(t)| dt`.
    #[serde(with = "floatrepr")]
    pub fourier_mass: f64,
    /// `max(1/π, 24‖N′‖∞/π)`.
    #[serde(with = "floatrepr")]
    pub constant: f64,
    /// `K·(integral + 1/T)`.
    #[serde(with = "floatrepr")]
    pub smoothing_term: f64,
    /// `(fourier_mass/π)·|E_n|·e^{|E_n T|}`.
    #[serde(with = "floatrepr")]
    pub mean_term: f64,
    /// `‖N′‖∞·|E_n|`, the cost of centering the Gaussian.
    #[serde(with = "floatrepr")]
    pub shift_term: f64,
    #[serde(with = "floatrepr")]
    pub bound: f64,
    /// Exact `sup_x |H_n(x) − N(x)|`, `N = N(0, σ²)`.
    #[serde(with = "floatrepr")]
    pub sup_distance: f64,
    pub sound: bool,
}

impl BerryEsseenBound {
    pub fn to_report(&self, stats: &LimitStatistics) -> LimitLawReport {
        let mut report = LimitLawReport::new(LawTag::BerryEsseenBound, &[self.n]);
        insert_statistics(&mut report, stats);
        let extras: BTreeMap<String, f64> = [
            ("t_max", self.t_max),
            ("mean_offset", self.mean_offset),
            ("integral", self.integral),
            ("fourier_mass", self.fourier_mass),
            ("constant", self.constant),
            ("smoothing_term", self.smoothing_term),
            ("mean_term", self.mean_term),
            ("shift_term", self.shift_term),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut row = ReportRow::new(self.n, self.sup_distance, self.bound, self.bound - self.sup_distance);
        row.extra = extras;
        report.rows.push(row);
        report.criterion(Criterion::new(
            "sound",
            "exact sup distance against the numeric bound",
            self.sup_distance,
            Comparison::AtMost,
            self.bound,
        ));
        report.finish()
    }
}

/// Numeric smoothing bound
/// `K(I + 1/T) + (C/π)|E|e^{|E T|} + ‖N′‖|E|` for `‖H_n − N(0,σ²)‖∞`,
/// with `H_n` the overcounted distribution of `(φ − nΛ)/√n`, together with
/// the exact distance it bounds.
pub fn berry_esseen_bound(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    n: usize,
    t_max: f64,
) -> Result<BerryEsseenBound> {
    require_scalar(weights, "the smoothing bound")?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("T must be positive and finite"));
    }
    let variance = stats.sigma2();
    if stats.degenerate || variance <= 0.0 {
        return Err(Error::Precondition("the smoothing bound needs positive variance".into()));
    }
    let drift = centering_drift(stats, weights, 0);
    let h = real_distributions(coding, Some(dec), weights, &[n], fallback_bin_width(weights))?
        .pop()
        .unwrap();
    let root_n = (n as f64).sqrt();
    let ys: Vec<f64> = h
        .values
        .iter()
        .map(|x| (x - n as f64 * drift) / root_n)
        .collect();
    let ps = h.probabilities();
    let mean_offset = (h.mean - n as f64 * drift) / root_n;

    let transform = |t: f64| -> Complex64 {
        ys.iter()
            .zip(&ps)
            .map(|(&y, &p)| Complex64::from_polar(p, t * y))
            .sum()
    };
    let integrand = |t: f64| {
        if t < 1e-7 {
            return mean_offset.abs();
        }
        (transform(t) - (-variance * t * t / 2.0).exp()).norm() / t
    };
    let spread = ys.iter().fold(0.0_f64, |a, y| a.max(y.abs()));
    let panels = ((t_max * spread / PI).ceil() as usize + 8).min(MAX_PANELS);
    let half = integrate_panels(integrand, 0.0, t_max, panels, QUADRATURE_TOLERANCE)
        .ok_or_else(|| Error::numerical("quadrature of the smoothing integral did not converge", f64::NAN))?;
    let half_mass = integrate_panels(|t| transform(t).norm(), 0.0, t_max, panels, QUADRATURE_TOLERANCE)
        .ok_or_else(|| Error::numerical("quadrature of the Fourier mass did not converge", f64::NAN))?;
    let integral = 2.0 * half;
    let fourier_mass = 2.0 * half_mass;

    let density_max = 1.0 / (variance * 2.0 * PI).sqrt();
    let constant = (1.0 / PI).max(24.0 * density_max / PI);
    let smoothing_term = constant * (integral + 1.0 / t_max);
    let e = mean_offset.abs();
    let mean_term = fourier_mass / PI * e * (e * t_max).exp();
    let shift_term = density_max * e;
    let bound = smoothing_term + mean_term + shift_term;
    let sigma = variance.sqrt();
    let sup = sup_distance(&ys, &h.counts, &h.total, |y| normal_cdf(y / sigma));
    Ok(BerryEsseenBound {
        n,
        t_max,
        variance,
        mean_offset,
        integral,
        fourier_mass,
        constant,
        smoothing_term,
        mean_term,
        shift_term,
        bound,
        sup_distance: sup,
        sound: sup <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, decompose_components, synthetic};
    use crate::enumerate::brute_force_oracle;
    use crate::spectral::statistics;
    use crate::weights::{weights_from_homomorphism, weights_word_length};

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
    fn sup_distance_two_point() {
        // Fair coin at ±1 against N(0,1): largest gap just below +1.
        let counts = vec![BigUint::from(1u8), BigUint::from(1u8)];
        let d = sup_distance(&[-1.0, 1.0], &counts, &BigUint::from(2u8), normal_cdf);
        assert!((d - (normal_cdf(1.0) - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn d4_matches_hand_histogram() {
        let (c, d, w, st) = a_exponent();
        let r = clt_distance(&c, &d, &w, &st, &[4]).unwrap();
        // Exact histogram gives F(0−) = 43/108 against Φ(0) = 1/2.
        assert!((r.rows[0].observed - 11.0 / 108.0).abs() < 1e-12, "{}", r.rows[0].observed);
    }

    #[test]
    fn distance_matches_oracle_histogram() {
        let (c, d, w, st) = a_exponent();
        let r = clt_distance(&c, &d, &w, &st, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let words = brute_force_oracle(&c, &w, 8).unwrap();
        let sigma = st.sigma2().sqrt();
        for row in &r.rows {
            let n = row.n;
            let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
            for wd in words.iter().filter(|wd| wd.length == n) {
                *hist.entry(wd.value[0].round() as i64).or_default() += 1;
            }
            let values: Vec<f64> = hist.keys().map(|&k| k as f64 / (sigma * (n as f64).sqrt())).collect();
            let counts: Vec<BigUint> = hist.values().map(|&c| BigUint::from(c)).collect();
            let total: BigUint = counts.iter().sum();
            let oracle = sup_distance(&values, &counts, &total, normal_cdf);
            assert!((oracle - row.observed).abs() <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn rate_window() {
        let (c, d, w, st) = a_exponent();
        let r = clt_distance(&c, &d, &w, &st, &[16, 36, 64, 100, 144, 196]).unwrap();
        assert!(r.passed, "{}", r.to_text());
        assert!(r.recheck());
    }

    #[test]
    fn degenerate_refused() {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        let w = weights_word_length(&c);
        let st = statistics(&c, &d, &w).unwrap();
        assert!(matches!(clt_distance(&c, &d, &w, &st, &[4]), Err(Error::Precondition(_))));
        assert!(matches!(berry_esseen_bound(&c, &d, &w, &st, 4, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn bound_is_sound_and_symmetric_terms_vanish() {
        let (c, d, w, st) = a_exponent();
        for t in [2.0, 2.5, 5.0, 10.0] {
            let b = berry_esseen_bound(&c, &d, &w, &st, 25, t).unwrap();
            assert_eq!(b.mean_offset, 0.0);
            assert_eq!(b.mean_term, 0.0);
            assert_eq!(b.shift_term, 0.0);
            assert!(b.sound, "T={t}: {b:?}");
        }
    }

    #[test]
    fn bound_on_two_component_graph() {
        let c = synthetic::mirror();
        let d = decompose_components(&c).unwrap();
        assert_eq!(d.maximal_count(), 2);
        let table: Vec<_> = c
            .word_edge_indices()
            .map(|e| {
                let edge = &c.edges()[e];
                let to = c.vertices()[edge.to].clone();
                crate::weights::EdgeValue {
                    from: c.vertices()[edge.from].clone(),
                    value: vec![match to.as_bytes()[0] {
                        b'p' => 1.0,
                        b'q' => -1.0,
                        _ => 0.0,
                    }],
                    to,
                }
            })
            .collect();
        let w = crate::weights::weights_from_edge_table(&c, &table).unwrap();
        let st = statistics(&c, &d, &w).unwrap();
        assert!(!st.degenerate);
        let b = berry_esseen_bound(&c, &d, &w, &st, 20, 3.0).unwrap();
        assert!(b.mean_offset != 0.0);
        assert!(b.sound, "{b:?}");
    }
}
