//! Dominant-eigenvalue machinery for small dense matrices.
//!
//! Real nonnegative matrices use shifted power iteration: iterating with
//! `M + cI`, `c` the largest row sum, moves every eigenvalue into the right
//! half plane so the Perron root becomes strictly dominant even when the
//! matrix is periodic. Complex matrices use plain power iteration with a
//! fixed pseudo-random start and fall back to normalized repeated squaring
//! (Gelfand's formula) when several eigenvalues share the maximal modulus.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual required of every reported eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
/// Iteration cap for the real shifted power iteration.
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Iteration cap for complex power iteration before switching to squaring.
pub const MAX_COMPLEX_ITERATIONS: usize = 20_000;
/// Number of squarings in the Gelfand estimate (matrix power 2^40).
const SQUARINGS: usize = 40;
const SEED: u64 = 0x5eed_cafe;

/// Perron root with its right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct PerronData {
    pub root: f64,
    pub right: DVector<f64>,
    pub left: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Right Perron vector of a nonnegative matrix.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub root: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn max_row_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Relative eigen-residual `‖Mv − λv‖∞ / (‖v‖∞ · max(1, ‖M‖∞))`.
fn residual(m: &DMatrix<f64>, v: &DVector<f64>, lambda: f64, scale: f64) -> f64 {
    let r = m * v - v * lambda;
    inf_norm(&r) / (inf_norm(v) * scale.max(1.0))
}

/// A nonnegative matrix is nilpotent iff its support graph has no cycle.
/// Power iteration converges only like `1/k` on such Jordan blocks, so they
/// are detected combinatorially.
fn is_acyclic(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let mut indegree: Vec<usize> = (0..n)
        .map(|j| (0..n).filter(|&i| m[(i, j)] != 0.0).count())
        .collect();
    let mut queue: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
    let mut removed = 0;
    while let Some(i) = queue.pop() {
        removed += 1;
        for j in 0..n {
            if m[(i, j)] != 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    queue.push(j);
                }
            }
        }
    }
    removed == n
}

/// Perron root and right eigenvector of a nonnegative square matrix.
pub fn perron_right(m: &DMatrix<f64>) -> Result<PerronPair> {
    let n = m.nrows();
    if n == 0 {
        return Ok(PerronPair {
            root: 0.0,
            vector: DVector::zeros(0),
            iterations: 0,
            residual: 0.0,
        });
    }
    debug_assert!(m.iter().all(|&x| x >= 0.0));
    let shift = max_row_sum(m);
    if shift == 0.0 || is_acyclic(m) {
        return Ok(PerronPair {
            root: 0.0,
            vector: DVector::from_element(n, 1.0),
            iterations: 0,
            residual: 0.0,
        });
    }

    let mut x = DVector::from_element(n, 1.0);
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    for it in 1..=MAX_ITERATIONS {
        let mut y = m * &x + &x * shift;
        let norm = inf_norm(&y);
        y /= norm;
        x = y;

        let mx = m * &x;
        // Rayleigh-type estimate at the largest coordinate.
        let j = x.iamax();
        let lambda = mx[j] / x[j];
        let res = residual(m, &x, lambda, shift);
        if res <= 1e-15 {
            return Ok(PerronPair {
                root: lambda.max(0.0),
                vector: x,
                iterations: it,
                residual: res,
            });
        }
        if res < best * 0.999 {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled > 64 && res <= RESIDUAL_TOLERANCE {
            return Ok(PerronPair {
                root: lambda.max(0.0),
                vector: x,
                iterations: it,
                residual: res,
            });
        }
    }
    let j = x.iamax();
    let lambda = (m * &x)[j] / x[j];
    Err(Error::numerical(
        "power iteration did not converge",
        residual(m, &x, lambda, shift),
    ))
}

/// Perron root with both eigenvectors; the left vector comes from the
/// transpose.
pub fn perron(m: &DMatrix<f64>) -> Result<PerronData> {
    let right = perron_right(m)?;
    let left = perron_right(&m.transpose())?;
    Ok(PerronData {
        root: right.root,
        right: right.vector,
        left: left.vector,
        iterations: right.iterations + left.iterations,
        residual: right.residual.max(left.residual),
    })
}

/// How a complex spectral radius was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMethod {
    PowerIteration,
    RepeatedSquaring,
}

#[derive(Debug, Clone)]
pub struct ComplexRadius {
    pub value: f64,
    pub method: RadiusMethod,
    pub iterations: usize,
    pub residual: f64,
}

fn cinf_norm_vec(v: &DVector<Complex64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.norm()))
}

fn cinf_norm_mat(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Spectral radius of a complex matrix via normalized repeated squaring:
/// `ρ = lim ‖M^N‖^{1/N}` with `N = 2^40`.
pub fn radius_by_squaring(m: &DMatrix<Complex64>) -> f64 {
    let norm = cinf_norm_mat(m);
    if norm == 0.0 {
        return 0.0;
    }
    let mut a = m / Complex64::from(norm);
    let mut log_norm = norm.ln();
    for _ in 0..SQUARINGS {
        let sq = &a * &a;
        let s = cinf_norm_mat(&sq);
        if s == 0.0 {
            return 0.0;
        }
        a = sq / Complex64::from(s);
        log_norm = 2.0 * log_norm + s.ln();
    }
    (log_norm / (1u64 << SQUARINGS) as f64).exp()
}

/// Largest eigenvalue modulus of a complex matrix.
pub fn spectral_radius_complex(m: &DMatrix<Complex64>) -> Result<ComplexRadius> {
    let n = m.nrows();
    if n == 0 {
        return Ok(ComplexRadius {
            value: 0.0,
            method: RadiusMethod::PowerIteration,
            iterations: 0,
            residual: 0.0,
        });
    }
    let scale = cinf_norm_mat(m).max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut x = DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    x /= Complex64::from(cinf_norm_vec(&x));

    let mut last_res = f64::INFINITY;
    for it in 1..=MAX_COMPLEX_ITERATIONS {
        let y = m * &x;
        let ny = cinf_norm_vec(&y);
        if ny == 0.0 {
            return Ok(ComplexRadius {
                value: 0.0,
                method: RadiusMethod::PowerIteration,
                iterations: it,
                residual: 0.0,
            });
        }
        let lambda = x.dotc(&y) / x.dotc(&x);
        let res = cinf_norm_vec(&(&y - &x * lambda)) / (cinf_norm_vec(&x) * scale);
        last_res = res;
        if res <= 1e-14 {
            return Ok(ComplexRadius {
                value: lambda.norm(),
                method: RadiusMethod::PowerIteration,
                iterations: it,
                residual: res,
            });
        }
        x = y / Complex64::from(ny);
    }
    // Competing eigenvalues of equal modulus: the vector never settles.
    Ok(ComplexRadius {
        value: radius_by_squaring(m),
        method: RadiusMethod::RepeatedSquaring,
        iterations: MAX_COMPLEX_ITERATIONS,
        residual: last_res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_root_is_one() {
        let p = perron_right(&DMatrix::identity(2, 2)).unwrap();
        assert!((p.root - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_swap_converges_via_shift() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = perron_right(&m).unwrap();
        assert!((p.root - 1.0).abs() < 1e-14);
        assert!(p.residual <= RESIDUAL_TOLERANCE);
    }

    #[test]
    fn free_group_letter_matrix() {
        // Rows/cols a, A, b, B; zero exactly on inverse pairs.
        let mut m = DMatrix::from_element(4, 4, 1.0);
        m[(0, 1)] = 0.0;
        m[(1, 0)] = 0.0;
        m[(2, 3)] = 0.0;
        m[(3, 2)] = 0.0;
        let p = perron(&m).unwrap();
        assert!((p.root - 3.0).abs() < 1e-13);
        assert!(p.right.iter().all(|&x| x > 0.0));
        assert!(p.left.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn nilpotent_has_zero_root() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let p = perron_right(&m).unwrap();
        assert!(p.root.abs() < 1e-12);
        assert_eq!(perron_right(&DMatrix::zeros(3, 3)).unwrap().root, 0.0);
    }

    #[test]
    fn complex_rotation_uses_squaring() {
        // Eigenvalues ±i·2 share modulus 2; power iteration cannot settle.
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let r = spectral_radius_complex(&m).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12, "{r:?}");
        assert!((radius_by_squaring(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complex_simple_dominant() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 3.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        );
        let r = spectral_radius_complex(&m).unwrap();
        assert_eq!(r.method, RadiusMethod::PowerIteration);
        assert!((r.value - 3.0).abs() < 1e-12);
        assert!((radius_by_squaring(&m) - 3.0).abs() < 1e-10);
    }
}
