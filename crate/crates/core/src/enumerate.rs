//! Exact dynamic programs over the word spheres `W_n`.
//!
//! Every program walks length-n paths from `*` that avoid the zero vertex.
//! Counts are big integers throughout; floating point only appears when a
//! report asks for probabilities or when weights are irrational and values
//! are binned.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bigutil::{decimal, ratio, signed_ratio};
use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::error::{Error, Result};
use crate::weights::WeightAssignment;

/// Largest number of (vertex, value) states the lattice program allocates.
pub const STATE_LIMIT: usize = 100_000_000;
/// Largest number of paths the brute-force oracle visits.
pub const ORACLE_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    ExactLattice,
    BinnedReal,
}

/// How weights are mapped to integer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantization {
    pub kind: DistributionKind,
    /// Value of one integer step: `1/q` on a lattice, the bin width otherwise.
    pub unit: f64,
    pub denominator: Option<u64>,
    pub bin_width: Option<f64>,
    /// Integer step of every edge (zeros on augmentation edges).
    pub steps: Vec<Vec<i64>>,
}

impl Quantization {
    /// Exact lattice steps when the weights have a rational scale, binned
    /// steps (round half to even of `w / bin`) otherwise.
    pub fn new(weights: &WeightAssignment, bin_width: Option<f64>) -> Result<Self> {
        if let Some(q) = weights.lattice_scale() {
            let steps = (0..weights.edge_count())
                .map(|e| {
                    weights
                        .value(e)
                        .iter()
                        .map(|x| (x * q as f64).round() as i64)
                        .collect()
                })
                .collect();
            return Ok(Quantization {
                kind: DistributionKind::ExactLattice,
                unit: 1.0 / q as f64,
                denominator: Some(q),
                bin_width: None,
                steps,
            });
        }
        let bin = bin_width.ok_or_else(|| {
            Error::invalid("weights are not on a rational lattice; a bin width is required")
        })?;
        if !(bin > 0.0 && bin.is_finite()) {
            return Err(Error::invalid("bin width must be positive and finite"));
        }
        let steps = (0..weights.edge_count())
            .map(|e| {
                weights
                    .value(e)
                    .iter()
                    .map(|x| (x / bin).round_ties_even() as i64)
                    .collect()
            })
            .collect();
        Ok(Quantization {
            kind: DistributionKind::BinnedReal,
            unit: bin,
            denominator: None,
            bin_width: Some(bin),
            steps,
        })
    }

    /// Largest possible distance between a binned path value and the true
    /// one after `n` steps.
    pub fn drift_bound(&self, n: usize) -> f64 {
        match self.kind {
            DistributionKind::ExactLattice => 0.0,
            DistributionKind::BinnedReal => n as f64 * self.unit / 2.0,
        }
    }
}

/// Default bin width: 1/200 of the reachable range `n·[min dφ, max dφ]`
/// of the first coordinate.
pub fn default_bin_width(coding: &MarkovCoding, weights: &WeightAssignment, n: usize) -> f64 {
    let (lo, hi) = coding
        .word_edge_indices()
        .map(|e| weights.scalar(e, 0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let width = (hi - lo) * n.max(1) as f64 / 200.0;
    if width > 0.0 {
        width
    } else {
        1.0
    }
}

/// Exact sums `Σ1`, `Σx`, `Σx xᵀ` over a distribution, in integer units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    #[serde(with = "decimal")]
    pub count: BigUint,
    #[serde(with = "decimal::seq")]
    pub first: Vec<BigInt>,
    #[serde(with = "decimal::matrix")]
    pub second: Vec<Vec<BigInt>>,
    /// Value of one integer unit.
    pub unit: f64,
}

impl Moments {
    fn empty(dim: usize, unit: f64) -> Self {
        Moments {
            count: BigUint::zero(),
            first: vec![BigInt::zero(); dim],
            second: vec![vec![BigInt::zero(); dim]; dim],
            unit,
        }
    }

    fn add(&mut self, point: &[i64], weight: &BigUint) {
        let w = BigInt::from(weight.clone());
        self.count += weight;
        for (a, &x) in point.iter().enumerate() {
            let wx = &w * x;
            for (b, &y) in point.iter().enumerate() {
                self.second[a][b] += &wx * y;
            }
            self.first[a] += wx;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.first
            .iter()
            .map(|s| signed_ratio(s, &self.count) * self.unit)
            .collect()
    }

    /// Covariance `E[xxᵀ] − E[x]E[x]ᵀ`, formed exactly before division.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let c = BigInt::from(self.count.clone());
        let c2 = &self.count * &self.count;
        let dim = self.first.len();
        let mut out = vec![vec![0.0; dim]; dim];
        for a in 0..dim {
            for b in 0..dim {
                let num = &c * &self.second[a][b] - &self.first[a] * &self.first[b];
                out[a][b] = signed_ratio(&num, &c2) * self.unit * self.unit;
            }
        }
        out
    }
}

/// Distribution of `φ` over `W_n`, or of the overcounted `H_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordDistribution {
    pub n: usize,
    pub kind: DistributionKind,
    pub dim: usize,
    pub unit: f64,
    pub denominator: Option<u64>,
    pub bin_width: Option<f64>,
    /// Support points in integer units, sorted lexicographically.
    pub support: Vec<Vec<i64>>,
    #[serde(with = "decimal::seq")]
    pub counts: Vec<BigUint>,
    #[serde(with = "decimal")]
    pub total: BigUint,
    /// `m − 1`, the extra multiplicity of paths avoiding maximal components.
    pub overcount_multiplicity: usize,
    pub moments: Moments,
}

impl WordDistribution {
    fn from_points(
        n: usize,
        quant: &Quantization,
        dim: usize,
        points: Vec<(Vec<i64>, BigUint)>,
        overcount_multiplicity: usize,
    ) -> Self {
        let mut moments = Moments::empty(dim, quant.unit);
        let mut support = Vec::with_capacity(points.len());
        let mut counts = Vec::with_capacity(points.len());
        for (p, c) in points {
            moments.add(&p, &c);
            support.push(p);
            counts.push(c);
        }
        WordDistribution {
            n,
            kind: quant.kind,
            dim,
            unit: quant.unit,
            denominator: quant.denominator,
            bin_width: quant.bin_width,
            support,
            counts,
            total: moments.count.clone(),
            overcount_multiplicity,
            moments,
        }
    }

    /// Real value of support point `i`.
    pub fn value(&self, i: usize) -> Vec<f64> {
        self.support[i].iter().map(|&x| x as f64 * self.unit).collect()
    }

    /// First coordinate of every support point, as real values.
    pub fn scalar_values(&self) -> Vec<f64> {
        self.support.iter().map(|p| p[0] as f64 * self.unit).collect()
    }

    /// Probabilities `count / total`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| ratio(c, &self.total)).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.moments.mean()
    }

    /// `Σ p_x e^{i t (x − center)/scale}` for scalar distributions.
    pub fn characteristic(&self, t: f64, center: f64, scale: f64) -> Complex64 {
        self.scalar_values()
            .iter()
            .zip(self.probabilities())
            .map(|(x, p)| Complex64::from_polar(p, t * (x - center) / scale))
            .sum()
    }

    /// Count at an exact integer support point, zero if absent.
    pub fn count_at(&self, point: &[i64]) -> BigUint {
        match self.support.binary_search_by(|p| p.as_slice().cmp(point)) {
            Ok(i) => self.counts[i].clone(),
            Err(_) => BigUint::zero(),
        }
    }

    /// `value,count` rows (one value column per coordinate).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("value,count\n");
        } else {
            let cols: Vec<String> = (1..=self.dim).map(|i| format!("value_{i}")).collect();
            let _ = writeln!(out, "{},count", cols.join(","));
        }
        for (i, c) in self.counts.iter().enumerate() {
            let vals: Vec<String> = self.value(i).iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(out, "{},{c}", vals.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

/// Dense box of integer points with row-major flat indexing.
#[derive(Debug, Clone)]
struct Grid {
    lo: Vec<i64>,
    strides: Vec<usize>,
    cells: usize,
}

impl Grid {
    fn for_steps(steps: &[Vec<i64>], edges: impl Iterator<Item = usize> + Clone, dim: usize, n: usize) -> Result<Self> {
        let mut lo = vec![0i64; dim];
        let mut extent = vec![0usize; dim];
        for d in 0..dim {
            let min = edges.clone().map(|e| steps[e][d]).min().unwrap_or(0).min(0);
            let max = edges.clone().map(|e| steps[e][d]).max().unwrap_or(0).max(0);
            let lo_d = min
                .checked_mul(n as i64)
                .ok_or_else(|| Error::Resource("value range overflows".into()))?;
            let hi_d = max
                .checked_mul(n as i64)
                .ok_or_else(|| Error::Resource("value range overflows".into()))?;
            lo[d] = lo_d;
            extent[d] = (hi_d - lo_d + 1) as usize;
        }
        let mut strides = vec![1usize; dim];
        for d in (0..dim.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1]
                .checked_mul(extent[d + 1])
                .ok_or_else(|| Error::Resource("value box too large".into()))?;
        }
        let cells = strides[0]
            .checked_mul(extent[0])
            .ok_or_else(|| Error::Resource("value box too large".into()))?;
        Ok(Grid {
            lo,
            strides,
            cells,
        })
    }

    fn offset(&self, step: &[i64]) -> isize {
        step.iter()
            .zip(&self.strides)
            .map(|(&x, &s)| x as isize * s as isize)
            .sum()
    }

    fn flat(&self, point: &[i64]) -> usize {
        point
            .iter()
            .zip(&self.lo)
            .zip(&self.strides)
            .map(|((&x, &l), &s)| (x - l) as usize * s)
            .sum()
    }

    fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut p = vec![0i64; self.lo.len()];
        for d in 0..p.len() {
            p[d] = self.lo[d] + (idx / self.strides[d]) as i64;
            idx %= self.strides[d];
        }
        p
    }
}

/// Per-vertex dense count buffers with their active index ranges.
struct LatticeState {
    counts: Vec<Vec<BigUint>>,
    active: Vec<Option<(usize, usize)>>,
}

impl LatticeState {
    fn new(nv: usize, allowed: &[bool], cells: usize) -> Self {
        LatticeState {
            counts: (0..nv)
                .map(|v| if allowed[v] { vec![BigUint::zero(); cells] } else { Vec::new() })
                .collect(),
            active: vec![None; nv],
        }
    }

    fn aggregate(&self, grid: &Grid) -> Vec<(Vec<i64>, BigUint)> {
        let mut lo = usize::MAX;
        let mut hi = 0;
        for &(a, b) in self.active.iter().flatten() {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if lo > hi {
            return Vec::new();
        }
        let mut out = Vec::new();
        for idx in lo..=hi {
            let mut sum = BigUint::zero();
            for (v, range) in self.active.iter().enumerate() {
                if let Some((a, b)) = *range {
                    if a <= idx && idx <= b {
                        sum += &self.counts[v][idx];
                    }
                }
            }
            if !sum.is_zero() {
                out.push((grid.point(idx), sum));
            }
        }
        out
    }
}

/// Support points with their counts.
type Histogram = Vec<(Vec<i64>, BigUint)>;

/// Runs the lattice program on vertices in `allowed` (the start vertex is
/// always allowed) and snapshots the aggregated distribution at each `n`.
fn lattice_sweep(
    coding: &MarkovCoding,
    quant: &Quantization,
    dim: usize,
    allowed: &[bool],
    ns: &[usize],
) -> Result<Vec<Histogram>> {
    check_grid(ns)?;
    let max_n = *ns.last().unwrap_or(&0);
    let nv = coding.vertices().len();
    let in_edges: Vec<Vec<(usize, usize)>> = {
        let mut v = vec![Vec::new(); nv];
        for from in 0..nv {
            if !allowed[from] {
                continue;
            }
            for &e in coding.word_edges(from) {
                let to = coding.edges()[e].to;
                if allowed[to] {
                    v[to].push((from, e));
                }
            }
        }
        v
    };
    let used = in_edges.iter().flatten().map(|&(_, e)| e);
    let grid = Grid::for_steps(&quant.steps, used, dim, max_n)?;
    let nallowed = allowed.iter().filter(|&&a| a).count();
    if grid.cells.saturating_mul(nallowed) > STATE_LIMIT {
        return Err(Error::Resource(format!(
            "lattice program needs {} states (limit {STATE_LIMIT}); use a coarser bin width",
            grid.cells.saturating_mul(nallowed)
        )));
    }

    let mut cur = LatticeState::new(nv, allowed, grid.cells);
    let mut next = LatticeState::new(nv, allowed, grid.cells);
    let origin = grid.flat(&vec![0; dim]);
    cur.counts[coding.start()][origin] = BigUint::one();
    cur.active[coding.start()] = Some((origin, origin));

    let mut out = Vec::with_capacity(ns.len());
    let mut want = ns.iter().peekable();
    for step in 0..=max_n {
        if want.peek() == Some(&&step) {
            out.push(cur.aggregate(&grid));
            want.next();
        }
        if step == max_n {
            break;
        }
        let cur_ref = &cur;
        next.counts
            .par_iter_mut()
            .zip(next.active.par_iter_mut())
            .enumerate()
            .for_each(|(to, (buf, range))| {
                if let Some((a, b)) = range.take() {
                    for x in &mut buf[a..=b] {
                        x.set_zero();
                    }
                }
                let mut new_range: Option<(usize, usize)> = None;
                for &(from, e) in &in_edges[to] {
                    let Some((a, b)) = cur_ref.active[from] else {
                        continue;
                    };
                    let shift = grid.offset(&quant.steps[e]);
                    let src = &cur_ref.counts[from];
                    let mut touched = false;
                    let (mut lo, mut hi) = (usize::MAX, 0);
                    for idx in a..=b {
                        let c = &src[idx];
                        if c.is_zero() {
                            continue;
                        }
                        let t = (idx as isize + shift) as usize;
                        buf[t] += c;
                        lo = lo.min(t);
                        hi = hi.max(t);
                        touched = true;
                    }
                    if touched {
                        new_range = Some(match new_range {
                            None => (lo, hi),
                            Some((x, y)) => (x.min(lo), y.max(hi)),
                        });
                    }
                }
                *range = new_range;
            });
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}

fn check_grid(ns: &[usize]) -> Result<()> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n values must be strictly increasing"));
    }
    Ok(())
}

fn word_vertices(coding: &MarkovCoding) -> Vec<bool> {
    (0..coding.vertices().len()).map(|v| v != coding.zero()).collect()
}

fn avoiding_vertices(coding: &MarkovCoding, dec: &ComponentDecomposition) -> Vec<bool> {
    let mut allowed = vec![false; coding.vertices().len()];
    allowed[coding.start()] = true;
    for &v in &dec.outside_maximal {
        allowed[v] = true;
    }
    allowed
}

/// Distributions of `φ` over `W_n` for every `n` in a strictly increasing
/// grid, from one sweep.
pub fn distributions(
    coding: &MarkovCoding,
    weights: &WeightAssignment,
    ns: &[usize],
    bin_width: Option<f64>,
) -> Result<Vec<WordDistribution>> {
    let quant = Quantization::new(weights, bin_width)?;
    let dim = weights.dim();
    let snaps = lattice_sweep(coding, &quant, dim, &word_vertices(coding), ns)?;
    Ok(ns
        .iter()
        .zip(snaps)
        .map(|(&n, pts)| WordDistribution::from_points(n, &quant, dim, pts, 0))
        .collect())
}

/// Distribution of `φ` over `W_n`: exact on a rational lattice, binned
/// otherwise.
pub fn distribution(
    coding: &MarkovCoding,
    weights: &WeightAssignment,
    n: usize,
    bin_width: Option<f64>,
) -> Result<WordDistribution> {
    Ok(distributions(coding, weights, &[n], bin_width)?.pop().unwrap())
}

/// Overcounted distributions `H_n`: paths that never enter a maximal
/// component count `m` times instead of once.
pub fn distributions_overcounted(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    ns: &[usize],
    bin_width: Option<f64>,
) -> Result<Vec<WordDistribution>> {
    let quant = Quantization::new(weights, bin_width)?;
    let dim = weights.dim();
    let extra = dec.maximal_count().saturating_sub(1);
    let plain = lattice_sweep(coding, &quant, dim, &word_vertices(coding), ns)?;
    if extra == 0 {
        return Ok(ns
            .iter()
            .zip(plain)
            .map(|(&n, pts)| WordDistribution::from_points(n, &quant, dim, pts, 0))
            .collect());
    }
    let avoiding = lattice_sweep(coding, &quant, dim, &avoiding_vertices(coding, dec), ns)?;
    let factor = BigUint::from(extra);
    Ok(ns
        .iter()
        .zip(plain.into_iter().zip(avoiding))
        .map(|(&n, (p, a))| {
            let mut merged: BTreeMap<Vec<i64>, BigUint> = p.into_iter().collect();
            for (pt, c) in a {
                *merged.entry(pt).or_default() += c * &factor;
            }
            WordDistribution::from_points(n, &quant, dim, merged.into_iter().collect(), extra)
        })
        .collect())
}

pub fn distribution_overcounted(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    n: usize,
    bin_width: Option<f64>,
) -> Result<WordDistribution> {
    Ok(distributions_overcounted(coding, dec, weights, &[n], bin_width)?
        .pop()
        .unwrap())
}

fn count_sweep(coding: &MarkovCoding, allowed: &[bool], max_n: usize) -> Vec<BigUint> {
    let nv = coding.vertices().len();
    let mut cur = vec![BigUint::zero(); nv];
    cur[coding.start()] = BigUint::one();
    let mut out = vec![BigUint::one()];
    for _ in 0..max_n {
        let mut next = vec![BigUint::zero(); nv];
        for (v, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &e in coding.word_edges(v) {
                let to = coding.edges()[e].to;
                if allowed[to] {
                    next[to] += c;
                }
            }
        }
        out.push(next.iter().sum());
        cur = next;
    }
    out
}

/// `#N_n`: length-n paths from `*` that never enter a maximal component.
pub fn count_avoiding_maximal(coding: &MarkovCoding, dec: &ComponentDecomposition, n: usize) -> BigUint {
    count_sweep(coding, &avoiding_vertices(coding, dec), n).pop().unwrap()
}

/// Complex number `mantissa · e^{log_scale}`, for sums far outside the
/// `f64` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSum {
    pub mantissa: Complex64,
    pub log_scale: f64,
}

impl ScaledSum {
    pub fn value(&self) -> Complex64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }
}

/// `Σ_{g ∈ W_n} e^{⟨s, φ(g)⟩}` for `n = 0..=max_n`, by a complex vector
/// program renormalized at every step.
pub fn weighted_sums(
    coding: &MarkovCoding,
    weights: &WeightAssignment,
    s: &[Complex64],
    max_n: usize,
) -> Result<Vec<ScaledSum>> {
    if s.len() != weights.dim() {
        return Err(Error::invalid(format!(
            "parameter has dimension {}, weights have {}",
            s.len(),
            weights.dim()
        )));
    }
    let factors: Vec<Complex64> = (0..coding.edges().len())
        .map(|e| {
            weights
                .value(e)
                .iter()
                .zip(s)
                .map(|(w, z)| z * *w)
                .sum::<Complex64>()
                .exp()
        })
        .collect();
    let nv = coding.vertices().len();
    let mut cur = vec![Complex64::zero(); nv];
    cur[coding.start()] = Complex64::one();
    let mut log_scale = 0.0;
    let mut out = vec![ScaledSum {
        mantissa: Complex64::one(),
        log_scale: 0.0,
    }];
    for _ in 0..max_n {
        let mut next = vec![Complex64::zero(); nv];
        for (v, c) in cur.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for &e in coding.word_edges(v) {
                next[coding.edges()[e].to] += c * factors[e];
            }
        }
        let norm = next.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if norm > 0.0 {
            for z in &mut next {
                *z /= norm;
            }
            log_scale += norm.ln();
        }
        out.push(ScaledSum {
            mantissa: next.iter().sum(),
            log_scale,
        });
        cur = next;
    }
    Ok(out)
}

/// `Σ_{g ∈ W_n} e^{⟨s, φ(g)⟩}`; may overflow for large `n`, see
/// [`weighted_sums`] for the scaled form.
pub fn weighted_sum(coding: &MarkovCoding, weights: &WeightAssignment, s: &[Complex64], n: usize) -> Result<Complex64> {
    Ok(weighted_sums(coding, weights, s, n)?.pop().unwrap().value())
}

/// Exact power sums of `φ` over `W_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n: usize,
    #[serde(with = "decimal")]
    pub count: BigUint,
    /// `Σφ(g)`.
    pub first: Vec<f64>,
    /// `Σφ(g)φ(g)ᵀ`.
    pub second: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Integer-unit sums when the weights lie on a rational lattice.
    pub exact: Option<Moments>,
}

struct VertexMoments {
    count: BigUint,
    first: Vec<BigInt>,
    second: Vec<Vec<BigInt>>,
}

fn lattice_moment_sweep(coding: &MarkovCoding, steps: &[Vec<i64>], dim: usize, unit: f64, max_n: usize) -> Vec<Moments> {
    let nv = coding.vertices().len();
    let empty = || VertexMoments {
        count: BigUint::zero(),
        first: vec![BigInt::zero(); dim],
        second: vec![vec![BigInt::zero(); dim]; dim],
    };
    let mut cur: Vec<VertexMoments> = (0..nv).map(|_| empty()).collect();
    cur[coding.start()].count = BigUint::one();
    let total = |st: &[VertexMoments]| {
        let mut m = Moments::empty(dim, unit);
        for vm in st {
            m.count += &vm.count;
            for a in 0..dim {
                m.first[a] += &vm.first[a];
                for b in 0..dim {
                    m.second[a][b] += &vm.second[a][b];
                }
            }
        }
        m
    };
    let mut out = vec![total(&cur)];
    for _ in 0..max_n {
        let mut next: Vec<VertexMoments> = (0..nv).map(|_| empty()).collect();
        for (v, vm) in cur.iter().enumerate() {
            if vm.count.is_zero() {
                continue;
            }
            let c = BigInt::from(vm.count.clone());
            for &e in coding.word_edges(v) {
                let w = &steps[e];
                let t = &mut next[coding.edges()[e].to];
                t.count += &vm.count;
                for a in 0..dim {
                    for b in 0..dim {
                        // (x + w)(x + w)ᵀ = xxᵀ + x wᵀ + w xᵀ + w wᵀ
                        t.second[a][b] += &vm.second[a][b]
                            + &vm.first[a] * w[b]
                            + &vm.first[b] * w[a]
                            + &c * (w[a] * w[b]);
                    }
                    t.first[a] += &vm.first[a] + &c * w[a];
                }
            }
        }
        out.push(total(&next));
        cur = next;
    }
    out
}

/// Scaled count, first and second power sums at one vertex.
type RealMoments = (f64, Vec<f64>, Vec<Vec<f64>>);
/// Totals over all vertices, with the log of their scale last.
type ScaledMoments = (f64, Vec<f64>, Vec<Vec<f64>>, f64);

/// Floating-point moments for irrational weights, renormalized per step.
fn real_moment_sweep(coding: &MarkovCoding, weights: &WeightAssignment, max_n: usize) -> Vec<ScaledMoments> {
    let dim = weights.dim();
    let nv = coding.vertices().len();
    let zero = || (0.0, vec![0.0; dim], vec![vec![0.0; dim]; dim]);
    let mut cur: Vec<RealMoments> = (0..nv).map(|_| zero()).collect();
    cur[coding.start()].0 = 1.0;
    let mut log_scale = 0.0;
    let sum = |st: &[RealMoments], ls: f64| {
        let mut t = zero();
        for (c, f, s) in st {
            t.0 += c;
            for a in 0..dim {
                t.1[a] += f[a];
                for b in 0..dim {
                    t.2[a][b] += s[a][b];
                }
            }
        }
        (t.0, t.1, t.2, ls)
    };
    let mut out = vec![sum(&cur, 0.0)];
    for _ in 0..max_n {
        let mut next: Vec<_> = (0..nv).map(|_| zero()).collect();
        for (v, (c, f, s)) in cur.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for &e in coding.word_edges(v) {
                let w = weights.value(e);
                let t = &mut next[coding.edges()[e].to];
                t.0 += c;
                for a in 0..dim {
                    for b in 0..dim {
                        t.2[a][b] += s[a][b] + f[a] * w[b] + f[b] * w[a] + c * w[a] * w[b];
                    }
                    t.1[a] += f[a] + c * w[a];
                }
            }
        }
        let norm = next.iter().map(|t| t.0).fold(0.0, f64::max);
        if norm > 0.0 {
            for t in &mut next {
                t.0 /= norm;
                t.1.iter_mut().for_each(|x| *x /= norm);
                t.2.iter_mut().flatten().for_each(|x| *x /= norm);
            }
            log_scale += norm.ln();
        }
        out.push(sum(&next, log_scale));
        cur = next;
    }
    out
}

/// Moments of `φ` over `W_n` for `n = 0..=max_n`.
pub fn moment_sweep(coding: &MarkovCoding, weights: &WeightAssignment, max_n: usize) -> Vec<MomentSummary> {
    let dim = weights.dim();
    let counts = count_sweep(coding, &word_vertices(coding), max_n);
    if let Some(q) = weights.lattice_scale() {
        let quant = Quantization::new(weights, None).expect("lattice weights quantize");
        let unit = 1.0 / q as f64;
        return lattice_moment_sweep(coding, &quant.steps, dim, unit, max_n)
            .into_iter()
            .enumerate()
            .map(|(n, m)| {
                let big_f64 = |x: &BigInt| x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY });
                MomentSummary {
                    n,
                    count: m.count.clone(),
                    first: m.first.iter().map(|x| big_f64(x) * unit).collect(),
                    second: m
                        .second
                        .iter()
                        .map(|r| r.iter().map(|x| big_f64(x) * unit * unit).collect())
                        .collect(),
                    mean: m.mean(),
                    covariance: m.covariance(),
                    exact: Some(m),
                }
            })
            .collect();
    }
    real_moment_sweep(coding, weights, max_n)
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(n, ((c, f, s, ls), count))| {
            let scale = ls.exp();
            let mean: Vec<f64> = f.iter().map(|x| x / c).collect();
            let covariance = (0..dim)
                .map(|a| (0..dim).map(|b| s[a][b] / c - mean[a] * mean[b]).collect())
                .collect();
            MomentSummary {
                n,
                count,
                first: f.iter().map(|x| x * scale).collect(),
                second: s.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect(),
                mean,
                covariance,
                exact: None,
            }
        })
        .collect()
}

/// `(#W_n, Σφ, Σφφᵀ)`.
pub fn moments(coding: &MarkovCoding, weights: &WeightAssignment, n: usize) -> MomentSummary {
    moment_sweep(coding, weights, n).pop().unwrap()
}

/// Smallest and largest value of `φ(g) − |g|·drift` over `W_n`, for
/// `n = 0..=max_n`, by min-plus and max-plus programs.
pub fn value_ranges(coding: &MarkovCoding, weights: &WeightAssignment, drift: f64, max_n: usize) -> Vec<(f64, f64)> {
    let nv = coding.vertices().len();
    let mut lo = vec![f64::INFINITY; nv];
    let mut hi = vec![f64::NEG_INFINITY; nv];
    lo[coding.start()] = 0.0;
    hi[coding.start()] = 0.0;
    let mut out = vec![(0.0, 0.0)];
    for _ in 0..max_n {
        let mut nlo = vec![f64::INFINITY; nv];
        let mut nhi = vec![f64::NEG_INFINITY; nv];
        for v in 0..nv {
            if lo[v].is_infinite() {
                continue;
            }
            for &e in coding.word_edges(v) {
                let to = coding.edges()[e].to;
                let w = weights.scalar(e, 0) - drift;
                nlo[to] = nlo[to].min(lo[v] + w);
                nhi[to] = nhi[to].max(hi[v] + w);
            }
        }
        let a = nlo.iter().copied().fold(f64::INFINITY, f64::min);
        let b = nhi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push((a, b));
        lo = nlo;
        hi = nhi;
    }
    out
}

/// Scalar distribution on real support values, from the exact program when
/// possible.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDistribution {
    pub n: usize,
    /// Sorted, distinct support values.
    pub values: Vec<f64>,
    pub counts: Vec<BigUint>,
    pub total: BigUint,
    /// Mean of `φ`, from exact power sums.
    pub mean: f64,
    /// False when the weights had to be binned.
    pub exact: bool,
    /// Bin width used when not exact.
    pub bin_width: Option<f64>,
}

impl RealDistribution {
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts.iter().map(|c| ratio(c, &self.total)).collect()
    }
}

fn collapse(n: usize, pairs: Vec<(f64, BigUint)>, total: BigUint, mean: f64, bin: Option<f64>) -> RealDistribution {
    let mut merged: Vec<(f64, BigUint)> = Vec::with_capacity(pairs.len());
    let mut pairs = pairs;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (v, c) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => merged.push((v, c)),
        }
    }
    let (values, counts) = merged.into_iter().unzip();
    RealDistribution {
        n,
        values,
        counts,
        total,
        mean,
        exact: bin.is_none(),
        bin_width: bin,
    }
}

/// Scalar distributions of `φ` (or of the overcounted `H_n` when `dec` is
/// given) on real values. Rational weights use the lattice program;
/// irrational weights are lifted to rational vector weights over their
/// rationally independent classes and summed back exactly. Only when the
/// lifted program exceeds the state limit are the weights binned with
/// `fallback_bin`.
pub fn real_distributions(
    coding: &MarkovCoding,
    dec: Option<&ComponentDecomposition>,
    weights: &WeightAssignment,
    ns: &[usize],
    fallback_bin: f64,
) -> Result<Vec<RealDistribution>> {
    if weights.dim() != 1 {
        return Err(Error::invalid("real distributions need scalar weights"));
    }
    let run = |w: &WeightAssignment, bin: Option<f64>| match dec {
        Some(d) => distributions_overcounted(coding, d, w, ns, bin),
        None => distributions(coding, w, ns, bin),
    };
    let exact = if weights.lattice_scale().is_some() {
        Some(run(weights, None).map(|ds| {
            ds.into_iter()
                .map(|d| {
                    let pairs = d.scalar_values().into_iter().zip(d.counts.iter().cloned()).collect();
                    let mean = d.mean()[0];
                    collapse(d.n, pairs, d.total, mean, None)
                })
                .collect::<Vec<_>>()
        }))
    } else {
        let lift = crate::weights::rational_lift(weights)?;
        match run(&lift.lifted, None) {
            Err(Error::Resource(_)) => None,
            other => Some(other.map(|ds| {
                ds.into_iter()
                    .map(|d| {
                        let pairs = (0..d.support.len())
                            .map(|i| (lift.value(&d.value(i)), d.counts[i].clone()))
                            .collect();
                        let mean = lift.value(&d.mean());
                        collapse(d.n, pairs, d.total, mean, None)
                    })
                    .collect::<Vec<_>>()
            })),
        }
    };
    if let Some(r) = exact {
        return r;
    }
    let ds = run(weights, Some(fallback_bin))?;
    Ok(ds
        .into_iter()
        .map(|d| {
            let pairs = d.scalar_values().into_iter().zip(d.counts.iter().cloned()).collect();
            let mean = d.mean()[0];
            collapse(d.n, pairs, d.total, mean, Some(fallback_bin))
        })
        .collect())
}

/// A word listed by the brute-force oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleWord {
    pub word: String,
    pub length: usize,
    /// Edge indices of the coding path.
    pub path: Vec<usize>,
    pub value: Vec<f64>,
}

/// Lists every word of length at most `n_cap` by depth-first search over
/// label paths, with its path sum. Shares no code with the programs above.
pub fn brute_force_oracle(coding: &MarkovCoding, weights: &WeightAssignment, n_cap: usize) -> Result<Vec<OracleWord>> {
    struct Dfs<'a> {
        coding: &'a MarkovCoding,
        weights: &'a WeightAssignment,
        cap: usize,
        path: Vec<usize>,
        out: Vec<OracleWord>,
    }
    impl Dfs<'_> {
        fn visit(&mut self, v: usize, value: &[f64]) -> Result<()> {
            if self.out.len() >= ORACLE_LIMIT {
                return Err(Error::Resource(format!(
                    "more than {ORACLE_LIMIT} words up to length {}",
                    self.cap
                )));
            }
            let labels: Vec<usize> = self
                .path
                .iter()
                .map(|&e| self.coding.edges()[e].label.expect("word edges are labeled"))
                .collect();
            self.out.push(OracleWord {
                word: self.coding.word_string(&labels),
                length: self.path.len(),
                path: self.path.clone(),
                value: value.to_vec(),
            });
            if self.path.len() == self.cap {
                return Ok(());
            }
            for &e in self.coding.word_edges(v) {
                let next: Vec<f64> = value.iter().zip(self.weights.value(e)).map(|(a, b)| a + b).collect();
                self.path.push(e);
                self.visit(self.coding.edges()[e].to, &next)?;
                self.path.pop();
            }
            Ok(())
        }
    }
    fn count(coding: &MarkovCoding, v: usize, depth: usize, seen: &mut usize) -> bool {
        *seen += 1;
        if *seen > ORACLE_LIMIT {
            return false;
        }
        depth == 0
            || coding
                .word_edges(v)
                .iter()
                .all(|&e| count(coding, coding.edges()[e].to, depth - 1, seen))
    }
    let mut seen = 0;
    if !count(coding, coding.start(), n_cap, &mut seen) {
        return Err(Error::Resource(format!(
            "more than {ORACLE_LIMIT} words up to length {n_cap}"
        )));
    }
    let mut dfs = Dfs {
        coding,
        weights,
        cap: n_cap,
        path: Vec::new(),
        out: Vec::new(),
    };
    dfs.visit(coding.start(), &vec![0.0; weights.dim()])?;
    Ok(dfs.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::{build_free_group_coding, count_words, decompose_components, synthetic};
    use crate::weights::{weights_from_homomorphism, weights_vertex_indicator, weights_word_length};

    fn hom(c: &MarkovCoding, pairs: &[(&str, &[f64])]) -> WeightAssignment {
        let m: BTreeMap<String, Vec<f64>> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect();
        weights_from_homomorphism(c, &m).unwrap()
    }

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn real_distribution_matches_oracle() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[2f64.sqrt()])]);
        let ns: Vec<usize> = (1..=6).collect();
        let ds = real_distributions(&c, None, &w, &ns, 0.01).unwrap();
        let words = brute_force_oracle(&c, &w, 6).unwrap();
        for d in &ds {
            assert!(d.exact);
            let mut vals: Vec<f64> = words.iter().filter(|x| x.length == d.n).map(|x| x.value[0]).collect();
            vals.sort_by(f64::total_cmp);
            let mut expanded = Vec::new();
            for (v, c) in d.values.iter().zip(&d.counts) {
                for _ in 0..c.to_u64().unwrap() {
                    expanded.push(*v);
                }
            }
            assert_eq!(expanded.len(), vals.len());
            for (a, b) in expanded.iter().zip(&vals) {
                assert!((a - b).abs() < 1e-12);
            }
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((d.mean - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn a_exponent_n2_distribution() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let d = distribution(&c, &w, 2, None).unwrap();
        assert_eq!(d.kind, DistributionKind::ExactLattice);
        let support: Vec<i64> = d.support.iter().map(|p| p[0]).collect();
        assert_eq!(support, [-2, -1, 0, 1, 2]);
        assert_eq!(d.counts, [big(1), big(4), big(2), big(4), big(1)]);
        assert_eq!(d.total, big(12));
        assert_eq!(d.moments.first[0], BigInt::zero());
        assert_eq!(d.moments.second[0][0], BigInt::from(16));
    }

    #[test]
    fn word_length_point_mass() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_word_length(&c);
        let d = distribution(&c, &w, 7, None).unwrap();
        assert_eq!(d.support, vec![vec![7]]);
        assert_eq!(d.total, count_words(&c, 7));
    }

    #[test]
    fn sweep_matches_single_runs() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_vertex_indicator(&c, "a").unwrap();
        let sweep = distributions(&c, &w, &[0, 3, 9], None).unwrap();
        for d in &sweep {
            assert_eq!(d, &distribution(&c, &w, d.n, None).unwrap());
        }
        assert_eq!(sweep[0].support, vec![vec![0]]);
        assert!(distributions(&c, &w, &[3, 3], None).is_err());
    }

    #[test]
    fn moments_examples() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let m = moments(&c, &w, 2);
        assert_eq!(m.count, big(12));
        assert_eq!(m.first, vec![0.0]);
        assert_eq!(m.second, vec![vec![16.0]]);
        let wl = weights_word_length(&c);
        for n in [0, 1, 5] {
            let m = moments(&c, &wl, n);
            let cnt = m.count.to_f64().unwrap();
            assert_eq!(m.first[0], n as f64 * cnt);
            assert_eq!(m.second[0][0], (n * n) as f64 * cnt);
        }
    }

    #[test]
    fn moments_agree_with_distribution() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0, 0.0]), ("b", &[1.0, 1.0])]);
        let d = distribution(&c, &w, 6, None).unwrap();
        let m = moments(&c, &w, 6);
        assert_eq!(m.exact.as_ref().unwrap(), &d.moments);
    }

    #[test]
    fn real_moments_match_oracle() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[2f64.sqrt()])]);
        let words = brute_force_oracle(&c, &w, 5).unwrap();
        let at5: Vec<f64> = words.iter().filter(|x| x.length == 5).map(|x| x.value[0]).collect();
        let mean = at5.iter().sum::<f64>() / at5.len() as f64;
        let var = at5.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / at5.len() as f64;
        let m = moments(&c, &w, 5);
        assert!((m.mean[0] - mean).abs() < 1e-12);
        assert!((m.covariance[0][0] - var).abs() < 1e-11);
        assert_eq!(m.count, big(at5.len() as u64));
    }

    #[test]
    fn binned_irrational() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[2f64.sqrt()])]);
        assert!(distribution(&c, &w, 2, None).is_err());
        let d = distribution(&c, &w, 2, Some(0.05)).unwrap();
        assert_eq!(d.kind, DistributionKind::BinnedReal);
        assert_eq!(d.total, big(12));
        let words = brute_force_oracle(&c, &w, 2).unwrap();
        let mut truth: Vec<f64> = words.iter().filter(|x| x.length == 2).map(|x| x.value[0]).collect();
        truth.sort_by(f64::total_cmp);
        let mut binned = Vec::new();
        for (i, cnt) in d.counts.iter().enumerate() {
            for _ in 0..cnt.to_u64().unwrap() {
                binned.push(d.value(i)[0]);
            }
        }
        for (x, y) in truth.iter().zip(&binned) {
            assert!((x - y).abs() <= Quantization::new(&w, Some(0.05)).unwrap().drift_bound(2) + 1e-12);
        }
    }

    #[test]
    fn avoiding_counts() {
        let c = build_free_group_coding(2).unwrap();
        let d = decompose_components(&c).unwrap();
        assert_eq!(count_avoiding_maximal(&c, &d, 0), big(1));
        assert_eq!(count_avoiding_maximal(&c, &d, 3), big(0));
        let t = synthetic::tail();
        let d = decompose_components(&t).unwrap();
        for n in 1..=3 {
            assert!(count_avoiding_maximal(&t, &d, n) > big(0));
        }
        for n in 4..8 {
            assert_eq!(count_avoiding_maximal(&t, &d, n), big(0));
        }
    }

    #[test]
    fn overcounted_totals() {
        let c = build_free_group_coding(2).unwrap();
        let dec = decompose_components(&c).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let h = distribution_overcounted(&c, &dec, &w, 5, None).unwrap();
        assert_eq!(h, distribution(&c, &w, 5, None).unwrap());
        assert_eq!(h.moments.first[0], BigInt::zero());

        let m = synthetic::mirror();
        let dec = decompose_components(&m).unwrap();
        assert_eq!(dec.maximal_count(), 2);
        let w = weights_word_length(&m);
        for n in 1..6 {
            let h = distribution_overcounted(&m, &dec, &w, n, None).unwrap();
            assert_eq!(h.overcount_multiplicity, 1);
            assert_eq!(h.total, count_words(&m, n) + count_avoiding_maximal(&m, &dec, n));
        }
    }

    #[test]
    fn weighted_sums_examples() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let s = 0.3;
        let z = weighted_sum(&c, &w, &[Complex64::new(s, 0.0)], 1).unwrap();
        assert!((z.re - (s.exp() + (-s).exp() + 2.0)).abs() < 1e-14);
        let z0 = weighted_sum(&c, &w, &[Complex64::zero()], 6).unwrap();
        let exact = count_words(&c, 6).to_f64().unwrap();
        assert!((z0.re - exact).abs() <= 1e-14 * exact);
        let words = brute_force_oracle(&c, &w, 2).unwrap();
        let brute: f64 = words.iter().filter(|x| x.length == 2).map(|x| (s * x.value[0]).exp()).sum();
        let dp = weighted_sum(&c, &w, &[Complex64::new(s, 0.0)], 2).unwrap().re;
        assert!((dp - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn fourier_matches_weighted_sum() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_vertex_indicator(&c, "a").unwrap();
        let n = 30;
        let d = distribution(&c, &w, n, None).unwrap();
        for t in [0.2, 1.0, 2.7] {
            let f = d.characteristic(t, 0.0, 1.0);
            let s = weighted_sums(&c, &w, &[Complex64::new(0.0, t)], n).unwrap().pop().unwrap();
            let total = ratio(&d.total, &BigUint::one()).ln();
            let g = s.mantissa * (s.log_scale - total).exp();
            assert!((f - g).norm() <= 1e-10 * g.norm().max(1e-300) + 1e-15, "{f} {g}");
        }
    }

    #[test]
    fn value_ranges_examples() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let r = value_ranges(&c, &w, 0.0, 10);
        assert_eq!(r[10], (-10.0, 10.0));
        let r = value_ranges(&c, &weights_word_length(&c), 1.0, 10);
        assert!(r.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    }

    #[test]
    fn oracle_examples() {
        let c = build_free_group_coding(2).unwrap();
        let w = weights_word_length(&c);
        assert_eq!(brute_force_oracle(&c, &w, 3).unwrap().len(), 1 + 4 + 12 + 36);
        let z = build_free_group_coding(1).unwrap();
        let words: Vec<String> = brute_force_oracle(&z, &weights_word_length(&z), 4)
            .unwrap()
            .into_iter()
            .filter(|x| x.length == 4)
            .map(|x| x.word)
            .collect();
        assert_eq!(words, ["aaaa", "AAAA"]);
        let only = brute_force_oracle(&c, &w, 0).unwrap();
        assert_eq!(only.len(), 1);
        assert_eq!(only[0].word, "");
        assert!(matches!(brute_force_oracle(&c, &w, 20), Err(Error::Resource(_))));
    }

    #[test]
    fn resource_guard() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0, 0.0, 1.0]), ("b", &[0.0, 1.0, -1.0])]);
        assert!(matches!(distribution(&c, &w, 300, None), Err(Error::Resource(_))));
    }

    #[test]
    fn serialization() {
        let c = build_free_group_coding(2).unwrap();
        let w = hom(&c, &[("a", &[1.0]), ("b", &[0.0])]);
        let d = distribution(&c, &w, 2, None).unwrap();
        assert_eq!(d.to_csv(), "value,count\n-2,1\n-1,4\n0,2\n1,4\n2,1\n");
        let back = WordDistribution::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert!(d.to_json().contains("\"total\": \"12\""));
    }
}
