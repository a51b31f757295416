//! Weighted transfer matrices over the masks `C_i`, pressure and its
//! derivatives, and the twisted spectral radii behind the lattice test.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::error::{Error, Result};
use crate::perron::{perron, perron_right, radius_by_squaring, spectral_radius_complex, ComplexRadius, RadiusMethod};
use crate::weights::{lattice_denominator, WeightAssignment};

/// Step of the central difference cross-checking the drift, for weights of
/// magnitude at most 1 (divided by the largest magnitude otherwise).
pub const DRIFT_STEP: f64 = 1e-4;
/// Largest allowed gap between the two drift estimates, times
/// `max(1, max |w|)`.
pub const DRIFT_AGREEMENT: f64 = 1e-7;
/// Coarse and fine steps of the Richardson-extrapolated second difference.
pub const SECOND_DIFF_STEPS: (f64, f64) = (1e-2, 5e-3);
/// Variances below this are reported as exactly zero.
pub const VARIANCE_CLAMP: f64 = 1e-8;
/// Spread allowed between the statistics of different maximal components.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-8;
/// A twisted radius this close to `e^h` is a lattice witness.
pub const LATTICE_GAP: f64 = 1e-9;
/// Below this gap the complex radius is confirmed by repeated squaring.
pub const CROSS_CHECK_GAP: f64 = 1e-3;

/// The edges of `C_i` as (row, column, edge) triples over a local vertex
/// numbering.
#[derive(Debug, Clone)]
struct MaskedGraph {
    vertices: Vec<usize>,
    entries: Vec<(usize, usize, usize)>,
}

impl MaskedGraph {
    fn new(coding: &MarkovCoding, dec: &ComponentDecomposition, component: usize) -> Result<Self> {
        let vertices = dec.mask(component)?.to_vec();
        let mut local = vec![usize::MAX; coding.vertices().len()];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k;
        }
        let mut entries = Vec::new();
        for &v in &vertices {
            for &e in coding.word_edges(v) {
                let to = coding.edges()[e].to;
                if local[to] != usize::MAX {
                    entries.push((local[v], local[to], e));
                }
            }
        }
        Ok(MaskedGraph {
            vertices,
            entries,
        })
    }

    fn size(&self) -> usize {
        self.vertices.len()
    }

    fn real(&self, w: &WeightAssignment, s: &[f64]) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, e) in &self.entries {
            let x: f64 = w.value(e).iter().zip(s).map(|(a, b)| a * b).sum();
            m[(r, c)] = x.exp();
        }
        m
    }

    fn complex(&self, w: &WeightAssignment, s: &[Complex64]) -> DMatrix<Complex64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, e) in &self.entries {
            let x: Complex64 = w.value(e).iter().zip(s).map(|(a, b)| b * *a).sum();
            m[(r, c)] = x.exp();
        }
        m
    }

    fn derivative(&self, w: &WeightAssignment, coord: usize) -> DMatrix<f64> {
        let n = self.size();
        let mut m = DMatrix::zeros(n, n);
        for &(r, c, e) in &self.entries {
            m[(r, c)] = w.scalar(e, coord);
        }
        m
    }

    fn pressure(&self, w: &WeightAssignment, s: &[f64]) -> Result<f64> {
        Ok(perron_right(&self.real(w, s))?.root.ln())
    }
}

fn check_dim(weights: &WeightAssignment, len: usize) -> Result<()> {
    if weights.dim() != len {
        return Err(Error::invalid(format!(
            "parameter has dimension {len}, weights have {}",
            weights.dim()
        )));
    }
    Ok(())
}

/// `M_i(s)`: entry `(u, v)` is `e^{⟨s, dφ(u,v)⟩}` for edges of `C_i`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub component: usize,
    pub s: Vec<Complex64>,
    /// Coding vertex of each row and column.
    pub vertices: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

pub fn transfer_matrix(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    s: &[Complex64],
) -> Result<TransferMatrix> {
    check_dim(weights, s.len())?;
    let g = MaskedGraph::new(coding, dec, component)?;
    Ok(TransferMatrix {
        component,
        s: s.to_vec(),
        matrix: g.complex(weights, s),
        vertices: g.vertices,
    })
}

/// Largest eigenvalue modulus of a transfer matrix; real nonnegative
/// matrices go through the shifted Perron iteration.
pub fn spectral_radius(tm: &TransferMatrix) -> Result<ComplexRadius> {
    let m = &tm.matrix;
    if m.iter().all(|z| z.im == 0.0 && z.re >= 0.0) {
        let p = perron_right(&m.map(|z| z.re))?;
        return Ok(ComplexRadius {
            value: p.root,
            method: RadiusMethod::PowerIteration,
            iterations: p.iterations,
            residual: p.residual,
        });
    }
    spectral_radius_complex(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureReport {
    pub component: usize,
    pub s: Vec<f64>,
    pub perron_root: f64,
    pub pressure: f64,
    /// Perron vectors in the order of `vertices`.
    pub vertices: Vec<usize>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `P_i(s) = log λ_i(s)` for real `s`, with both Perron vectors.
pub fn pressure(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    s: &[f64],
) -> Result<PressureReport> {
    check_dim(weights, s.len())?;
    let g = MaskedGraph::new(coding, dec, component)?;
    let p = perron(&g.real(weights, s))?;
    Ok(PressureReport {
        component,
        s: s.to_vec(),
        perron_root: p.root,
        pressure: p.root.ln(),
        vertices: g.vertices,
        left: p.left.iter().copied().collect(),
        right: p.right.iter().copied().collect(),
        iterations: p.iterations,
        residual: p.residual,
    })
}

/// Pressure at many real parameters, evaluated in parallel.
pub fn pressure_curve(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    grid: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let g = MaskedGraph::new(coding, dec, component)?;
    grid.par_iter()
        .map(|s| {
            check_dim(weights, s.len())?;
            g.pressure(weights, s)
        })
        .collect()
}

/// Drift, variance or covariance and entropy for one maximal component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitStatistics {
    pub component: usize,
    pub dim: usize,
    /// `∇P(0)` from the perturbation formula.
    pub drift: Vec<f64>,
    /// `∇P(0)` from central differences.
    pub drift_finite_difference: Vec<f64>,
    /// `P''(0)` for scalar weights.
    pub variance: Option<f64>,
    /// Hessian of `P` at 0 (`[[σ²]]` for scalar weights).
    pub covariance: Vec<Vec<f64>>,
    pub positive_definite: bool,
    /// Smallest eigenvalue of the covariance.
    pub min_eigenvalue: f64,
    pub lambda: f64,
    pub entropy: f64,
    /// Scalar weights with `σ² < 1e-8`.
    pub degenerate: bool,
}

impl LimitStatistics {
    /// `σ²`, or the first diagonal entry for vector weights.
    pub fn sigma2(&self) -> f64 {
        self.variance.unwrap_or(self.covariance[0][0])
    }
}

fn unit(dim: usize, c: usize, h: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[c] = h;
    v
}

fn second_difference(g: &MaskedGraph, w: &WeightAssignment, p0: f64, a: usize, b: usize, h: f64) -> Result<f64> {
    let dim = w.dim();
    if a == b {
        let plus = g.pressure(w, &unit(dim, a, h))?;
        let minus = g.pressure(w, &unit(dim, a, -h))?;
        return Ok((plus - 2.0 * p0 + minus) / (h * h));
    }
    let at = |sa: f64, sb: f64| {
        let mut s = vec![0.0; dim];
        s[a] = sa;
        s[b] = sb;
        g.pressure(w, &s)
    };
    Ok((at(h, h)? - at(h, -h)? - at(-h, h)? + at(-h, -h)?) / (4.0 * h * h))
}

/// Pivot tolerance of the Cholesky test: `1e-6 · max(1, max |diagonal|)`.
pub fn pivot_tolerance(m: &[Vec<f64>]) -> f64 {
    1e-6 * m.iter().enumerate().map(|(i, r)| r[i].abs()).fold(1.0, f64::max)
}

/// Smallest pivot of a Cholesky factorization (leading-minor ratios); stops
/// at the first pivot below the tolerance and returns it.
pub fn cholesky_min_pivot(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    let tol = pivot_tolerance(m);
    let mut l = vec![vec![0.0; k]; k];
    let mut min = f64::INFINITY;
    for j in 0..k {
        let mut d = m[j][j];
        for p in 0..j {
            d -= l[j][p] * l[j][p];
        }
        min = min.min(d);
        if d <= tol {
            return min;
        }
        l[j][j] = d.sqrt();
        for i in j + 1..k {
            let mut x = m[i][j];
            for p in 0..j {
                x -= l[i][p] * l[j][p];
            }
            l[i][j] = x / l[j][j];
        }
    }
    min
}

/// Cholesky test with pivot tolerance [`pivot_tolerance`].
pub fn is_positive_definite(m: &[Vec<f64>]) -> bool {
    cholesky_min_pivot(m) > pivot_tolerance(m)
}

/// Drift by the perturbation formula and by central differences, and the
/// Hessian of the pressure at 0 by Richardson-extrapolated differences.
pub fn limit_statistics(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
) -> Result<LimitStatistics> {
    let g = MaskedGraph::new(coding, dec, component)?;
    let dim = weights.dim();
    let zero = vec![0.0; dim];
    let p = perron(&g.real(weights, &zero))?;
    let lambda = p.root;
    let p0 = lambda.ln();
    let uv = p.left.dot(&p.right);
    // Steps shrink with the weight magnitude so the truncation error does
    // not grow with it; P for weights k·w is P(k·s).
    let scale = coding
        .word_edge_indices()
        .flat_map(|e| weights.value(e).iter().map(|x| x.abs()))
        .fold(1.0_f64, f64::max);
    let step = DRIFT_STEP / scale;

    let mut drift = Vec::with_capacity(dim);
    let mut drift_fd = Vec::with_capacity(dim);
    for c in 0..dim {
        let d = g.derivative(weights, c);
        let exact = p.left.dot(&(&d.component_mul(&g.real(weights, &zero)) * &p.right)) / (lambda * uv);
        let plus = g.pressure(weights, &unit(dim, c, step))?;
        let minus = g.pressure(weights, &unit(dim, c, -step))?;
        let fd = (plus - minus) / (2.0 * step);
        if (exact - fd).abs() > DRIFT_AGREEMENT * scale {
            return Err(Error::numerical(
                format!("drift estimates disagree in coordinate {c}: perturbation {exact}, difference {fd}"),
                (exact - fd).abs(),
            ));
        }
        drift.push(exact);
        drift_fd.push(fd);
    }

    let (h1, h2) = (SECOND_DIFF_STEPS.0 / scale, SECOND_DIFF_STEPS.1 / scale);
    let mut cov = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        for b in a..dim {
            let coarse = second_difference(&g, weights, p0, a, b, h1)?;
            let fine = second_difference(&g, weights, p0, a, b, h2)?;
            let r = h1 / h2;
            let mut x = (r * r * fine - coarse) / (r * r - 1.0);
            if a == b && x < VARIANCE_CLAMP {
                x = 0.0;
            }
            cov[a][b] = x;
            cov[b][a] = x;
        }
    }
    let eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |i, j| cov[i][j]));
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let variance = (dim == 1).then(|| cov[0][0]);
    Ok(LimitStatistics {
        component,
        dim,
        drift,
        drift_finite_difference: drift_fd,
        variance,
        positive_definite: is_positive_definite(&cov),
        covariance: cov,
        min_eigenvalue,
        lambda,
        entropy: p0,
        degenerate: variance.is_some_and(|v| v < VARIANCE_CLAMP),
    })
}

/// Scalar drift and variance of one maximal component.
pub fn drift_and_variance(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
) -> Result<LimitStatistics> {
    if weights.dim() != 1 {
        return Err(Error::invalid("drift_and_variance needs scalar weights"));
    }
    limit_statistics(coding, dec, weights, component)
}

/// Drift vector and covariance matrix of one maximal component.
pub fn covariance_matrix(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
) -> Result<LimitStatistics> {
    if weights.dim() < 2 {
        return Err(Error::invalid("covariance_matrix needs weights of dimension at least 2"));
    }
    limit_statistics(coding, dec, weights, component)
}

/// Statistics of the first maximal component.
pub fn statistics(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
) -> Result<LimitStatistics> {
    let first = *dec
        .maximal_indices()
        .first()
        .ok_or_else(|| Error::DegenerateCoding("no maximal component".into()))?;
    limit_statistics(coding, dec, weights, first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub group: bool,
    pub components: Vec<LimitStatistics>,
    /// Largest pairwise difference of drift coordinates.
    pub drift_spread: f64,
    /// Largest pairwise difference of covariance entries.
    pub covariance_spread: f64,
    pub tolerance: f64,
    pub consistent: bool,
}

/// Computes the statistics of every maximal component and compares them.
/// On group codings a disagreement is an error.
pub fn component_consistency(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
) -> Result<ConsistencyReport> {
    let components: Vec<LimitStatistics> = dec
        .maximal_indices()
        .into_iter()
        .map(|i| limit_statistics(coding, dec, weights, i))
        .collect::<Result<_>>()?;
    if components.is_empty() {
        return Err(Error::DegenerateCoding("no maximal component".into()));
    }
    let mut drift_spread: f64 = 0.0;
    let mut covariance_spread: f64 = 0.0;
    for a in &components {
        for b in &components {
            for (x, y) in a.drift.iter().zip(&b.drift) {
                drift_spread = drift_spread.max((x - y).abs());
            }
            for (ra, rb) in a.covariance.iter().zip(&b.covariance) {
                for (x, y) in ra.iter().zip(rb) {
                    covariance_spread = covariance_spread.max((x - y).abs());
                }
            }
        }
    }
    let consistent = drift_spread <= CONSISTENCY_TOLERANCE && covariance_spread <= CONSISTENCY_TOLERANCE;
    let report = ConsistencyReport {
        group: coding.is_group(),
        components,
        drift_spread,
        covariance_spread,
        tolerance: CONSISTENCY_TOLERANCE,
        consistent,
    };
    if report.group && !consistent {
        return Err(Error::InvariantViolation(format!(
            "maximal components disagree: drift spread {drift_spread:e}, covariance spread {covariance_spread:e}"
        )));
    }
    Ok(report)
}

/// Twisted radius at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: f64,
    pub radius: f64,
    /// `e^h` minus the radius of `M_i(it)`.
    pub gap: f64,
    pub method: RadiusMethod,
    /// Repeated-squaring estimate, present when the gap is small.
    pub confirmed_radius: Option<f64>,
}

fn gap_at(g: &MarkovGap, t: f64) -> Result<GapPoint> {
    let m = g.graph.complex(g.weights, &[Complex64::new(0.0, t)]);
    let r = spectral_radius_complex(&m)?;
    let gap = g.eh - r.value;
    let scale = g.eh.max(1.0);
    if gap < -LATTICE_GAP * scale {
        return Err(Error::numerical(
            format!("twisted radius {} exceeds e^h = {} at t = {t}", r.value, g.eh),
            -gap,
        ));
    }
    let mut confirmed = None;
    if gap < CROSS_CHECK_GAP {
        let sq = radius_by_squaring(&m);
        if (sq - r.value).abs() > LATTICE_GAP * scale {
            return Err(Error::numerical(
                format!("radius estimates disagree at t = {t}: {} vs {sq}", r.value),
                (sq - r.value).abs(),
            ));
        }
        confirmed = Some(sq);
    }
    Ok(GapPoint {
        t,
        radius: r.value,
        gap,
        method: r.method,
        confirmed_radius: confirmed,
    })
}

struct MarkovGap<'a> {
    graph: MaskedGraph,
    weights: &'a WeightAssignment,
    eh: f64,
}

impl<'a> MarkovGap<'a> {
    fn new(
        coding: &MarkovCoding,
        dec: &ComponentDecomposition,
        weights: &'a WeightAssignment,
        component: usize,
    ) -> Result<Self> {
        if weights.dim() != 1 {
            return Err(Error::invalid("the lattice test needs scalar weights"));
        }
        Ok(MarkovGap {
            graph: MaskedGraph::new(coding, dec, component)?,
            weights,
            eh: dec.lambda,
        })
    }
}

/// `e^h − ρ(M_i(it))` over a grid of nonzero `t`, evaluated in parallel.
pub fn nonlattice_gap(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    t_grid: &[f64],
) -> Result<Vec<GapPoint>> {
    if t_grid.iter().any(|&t| t == 0.0 || !t.is_finite()) {
        return Err(Error::invalid("frequencies must be finite and nonzero"));
    }
    let g = MarkovGap::new(coding, dec, weights, component)?;
    t_grid.par_iter().map(|&t| gap_at(&g, t)).collect()
}

/// `[0.1, 20]` in steps of 0.05.
pub fn default_lattice_grid() -> Vec<f64> {
    (0..=398).map(|k| 0.1 + 0.05 * k as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeScan {
    /// Frequency `2π/b` where every edge weight of `C_i` lies in `a + bℤ`.
    pub candidate: Option<GapPoint>,
    pub grid: Vec<GapPoint>,
    pub min_gap: f64,
    pub min_gap_t: f64,
    /// A point (candidate or grid) with gap at most 1e-9.
    pub witness: Option<GapPoint>,
}

impl LatticeScan {
    pub fn is_lattice(&self) -> bool {
        self.witness.is_some()
    }
}

/// Frequency at which all weights on `C_i` become congruent: when the
/// pairwise differences are rational multiples (small denominators) of the
/// smallest nonzero difference `d`, they lie in `(d·g/q)ℤ` and the
/// frequency is `2πq/(d·g)`.
fn congruence_frequency(g: &MarkovGap) -> Option<f64> {
    let vals: Vec<f64> = g.graph.entries.iter().map(|&(_, _, e)| g.weights.scalar(e, 0)).collect();
    let base = *vals.first()?;
    let diffs: Vec<f64> = vals.iter().map(|v| v - base).collect();
    let scale = vals.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let unit = diffs
        .iter()
        .map(|d| d.abs())
        .filter(|&d| d > 1e-12 * scale)
        .fold(f64::INFINITY, f64::min);
    if unit.is_infinite() {
        return Some(2.0 * PI);
    }
    let ratios: Vec<f64> = diffs.iter().map(|d| d / unit).collect();
    let q = lattice_denominator(ratios.iter().copied())?;
    let gcd = ratios
        .iter()
        .map(|r| (r * q as f64).round().abs() as u64)
        .fold(0u64, |acc, k| acc.gcd(&k));
    Some(2.0 * PI * q as f64 / (unit * gcd as f64))
}

/// Lattice test: the congruence frequency (if any) and a grid scan.
pub fn lattice_scan(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    t_grid: &[f64],
) -> Result<LatticeScan> {
    let g = MarkovGap::new(coding, dec, weights, component)?;
    let candidate = congruence_frequency(&g).map(|t| gap_at(&g, t)).transpose()?;
    let grid = nonlattice_gap(coding, dec, weights, component, t_grid)?;
    let (min_gap, min_gap_t) = grid
        .iter()
        .map(|p| (p.gap, p.t))
        .fold((f64::INFINITY, f64::NAN), |a, b| if b.0 < a.0 { b } else { a });
    let witness = candidate
        .iter()
        .chain(grid.iter())
        .find(|p| p.gap <= LATTICE_GAP * g.eh.max(1.0))
        .cloned();
    Ok(LatticeScan {
        candidate,
        grid,
        min_gap,
        min_gap_t,
        witness,
    })
}

/// Real transfer matrix at `s`, for callers that need the raw matrix.
pub fn real_transfer_matrix(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    component: usize,
    s: &[f64],
) -> Result<DMatrix<f64>> {
    check_dim(weights, s.len())?;
    Ok(MaskedGraph::new(coding, dec, component)?.real(weights, s))
}
