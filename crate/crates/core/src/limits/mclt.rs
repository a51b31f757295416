use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::coding::{ComponentDecomposition, MarkovCoding};
use crate::enumerate::distributions;
use crate::error::{Error, Result};
use crate::floatrepr;
use crate::quadrature::gaussian_box_2d;
use crate::spectral::{cholesky_min_pivot, pivot_tolerance, LimitStatistics};
use crate::weights::WeightAssignment;

use super::{bin_for, centering_drift, check_n_grid, insert_statistics, Comparison, Criterion, LawTag, LimitLawReport, ReportRow};

/// Largest relative covariance error allowed at the largest `n`.
pub const COVARIANCE_TOLERANCE: f64 = 0.05;
/// Largest absolute cell-probability error allowed at the largest `n`.
pub const CELL_TOLERANCE: f64 = 0.01;
const CELL_QUADRATURE: f64 = 1e-10;

/// Box `[lo, hi]` in normalized coordinates `(φ − nΛ)/√n`; bounds may be
/// infinite. Lattice points on a finite face count with weight 1/2 per face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(with = "floatrepr::vec")]
    pub lo: Vec<f64>,
    #[serde(with = "floatrepr::vec")]
    pub hi: Vec<f64>,
}

impl Cell {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Cell {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    /// Weight of a point: 0 outside, 1 inside, 1/2 per coordinate on a face.
    fn weight(&self, y: &[f64]) -> f64 {
        let mut w = 1.0;
        for d in 0..y.len() {
            let eps = 1e-12 * y[d].abs().max(1.0);
            let on_lo = self.lo[d].is_finite() && (y[d] - self.lo[d]).abs() <= eps;
            let on_hi = self.hi[d].is_finite() && (y[d] - self.hi[d]).abs() <= eps;
            if on_lo || on_hi {
                w *= 0.5;
            } else if y[d] < self.lo[d] || y[d] > self.hi[d] {
                return 0.0;
            }
        }
        w
    }
}

/// Quadrants and half-planes with faces through the origin. Faces that
/// cut between lattice rows carry an `O(1/√n)` discretization error, so the
/// defaults keep every finite face on a lattice hyperplane.
pub fn default_cells() -> Vec<Cell> {
    let inf = f64::INFINITY;
    vec![
        Cell::new([-inf, -inf], [0.0, 0.0]),
        Cell::new([0.0, -inf], [inf, 0.0]),
        Cell::new([-inf, 0.0], [0.0, inf]),
        Cell::new([0.0, 0.0], [inf, inf]),
        Cell::new([-inf, -inf], [0.0, inf]),
        Cell::new([-inf, -inf], [inf, 0.0]),
    ]
}

/// Exact covariance of `φ/√n` against `Σ`, the positive-definiteness test
/// of `Σ`, and cell probabilities against Gaussian integrals (k = 2).
pub fn mclt_check(
    coding: &MarkovCoding,
    dec: &ComponentDecomposition,
    weights: &WeightAssignment,
    stats: &LimitStatistics,
    n_grid: &[usize],
    cells: &[Cell],
) -> Result<LimitLawReport> {
    let k = weights.dim();
    if k < 2 {
        return Err(Error::Precondition("the multidimensional check needs weights of dimension at least 2".into()));
    }
    check_n_grid(n_grid)?;
    if cells.iter().any(|c| c.lo.len() != k || c.hi.len() != k || c.lo.iter().zip(&c.hi).any(|(a, b)| a > b)) {
        return Err(Error::invalid(format!("cells must be boxes of dimension {k} with lo <= hi")));
    }
    let _ = dec;
    let sigma = &stats.covariance;
    let drift: Vec<f64> = (0..k).map(|c| centering_drift(stats, weights, c)).collect();
    let scale = sigma.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()));

    let mut report = LimitLawReport::new(LawTag::Mclt, n_grid);
    insert_statistics(&mut report, stats);
    report.tolerance("covariance_relative", COVARIANCE_TOLERANCE);
    report.tolerance("cell_absolute", CELL_TOLERANCE);
    let pivot = cholesky_min_pivot(sigma);
    let tol = pivot_tolerance(sigma);
    report.tolerance("pivot", tol);
    let positive = pivot > tol;

    let gaussian: Vec<Option<f64>> = if k == 2 && positive {
        let cov = [[sigma[0][0], sigma[0][1]], [sigma[1][0], sigma[1][1]]];
        cells
            .iter()
            .map(|c| gaussian_box_2d(cov, [c.lo[0], c.lo[1]], [c.hi[0], c.hi[1]], CELL_QUADRATURE))
            .map(|v| v.map(Some).ok_or_else(|| Error::numerical("Gaussian cell quadrature did not converge", f64::NAN)))
            .collect::<Result<_>>()?
    } else {
        vec![None; cells.len()]
    };

    let dists = distributions(coding, weights, n_grid, bin_for(weights))?;
    let mut last_cov_error = f64::NAN;
    let mut last_cell_error = 0.0_f64;
    for d in &dists {
        let n = d.n as f64;
        let emp: Vec<Vec<f64>> = d
            .moments
            .covariance()
            .into_iter()
            .map(|row| row.into_iter().map(|x| x / n).collect())
            .collect();
        let err = emp
            .iter()
            .flatten()
            .zip(sigma.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        let mut row = ReportRow::new(d.n, emp[0][0], sigma[0][0], err);
        for (i, r) in emp.iter().enumerate() {
            for (j, x) in r.iter().enumerate() {
                row.extra.insert(format!("covariance_{}{}", i + 1, j + 1), *x);
            }
        }
        last_cov_error = err;
        last_cell_error = 0.0;
        if gaussian.iter().any(Option::is_some) {
            let probs = d.probabilities();
            let ys: Vec<Vec<f64>> = (0..d.support.len())
                .map(|i| {
                    d.value(i)
                        .iter()
                        .zip(&drift)
                        .map(|(x, m)| (x - n * m) / n.sqrt())
                        .collect()
                })
                .collect();
            for (ci, (cell, g)) in cells.iter().zip(&gaussian).enumerate() {
                let g = g.unwrap();
                let mass: f64 = ys.iter().zip(&probs).map(|(y, p)| p * cell.weight(y)).sum();
                row.extra.insert(format!("cell_{}", ci + 1), mass);
                row.extra.insert(format!("cell_{}_gaussian", ci + 1), g);
                last_cell_error = last_cell_error.max((mass - g).abs());
            }
        }
        report.rows.push(row);
    }

    report.criterion(Criterion::new(
        "covariance",
        "max entrywise |covariance/n − Σ| / max|Σ| at the largest n",
        last_cov_error,
        Comparison::AtMost,
        COVARIANCE_TOLERANCE,
    ));
    report.criterion(Criterion::new(
        "positive-definite",
        "smallest Cholesky pivot of Σ against the pivot tolerance",
        pivot,
        Comparison::GreaterThan,
        tol,
    ));
    if !positive {
        let m = DMatrix::from_fn(k, k, |i, j| sigma[i][j]);
        let eig = SymmetricEigen::new(m);
        let i = eig.eigenvalues.imin();
        let v: Vec<String> = eig.eigenvectors.column(i).iter().map(|x| format!("{x:.6}")).collect();
        for (c, x) in eig.eigenvectors.column(i).iter().enumerate() {
            report.predict(&format!("degenerate_direction_{}", c + 1), *x);
        }
        report.notes.push(format!(
            "Σ is not positive definite; degenerate direction ({}) with eigenvalue {:e}",
            v.join(", "),
            eig.eigenvalues[i]
        ));
    } else if k != 2 && !cells.is_empty() {
        report.notes.push("cell probabilities are compared only for dimension 2".into());
    }
    if gaussian.iter().any(Option::is_some) {
        report.criterion(Criterion::new(
            "cells",
            "max |cell proportion − Gaussian mass| at the largest n",
            last_cell_error,
            Comparison::AtMost,
            CELL_TOLERANCE,
        ));
    }
    Ok(report.finish())
}
