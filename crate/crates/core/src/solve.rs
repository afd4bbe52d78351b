//! Small dense linear solver used by the exact-time oracles.
//!
//! The systems solved here are expected-hitting-time equations over the
//! states of a single trap or a simplified chain — diagonally dominant and a
//! few dozen to a few thousand unknowns — so plain Gaussian elimination with
//! partial pivoting is entirely adequate and keeps the oracle free of any
//! approximation shared with the formulas it checks.

use crate::error::{Error, Result};

/// Solves `A x = b` for square row-major `A`, destroying both inputs.
///
/// Returns [`Error::SingularSystem`] when elimination meets a vanishing
/// pivot. Like any plain LU, near-singular systems surface as inaccurate
/// results rather than errors; the hitting-time systems this crate builds
/// are nonsingular M-matrices, where small late pivots are legitimate
/// (they scale like 1/ρ^d) and must not be mistaken for rank deficiency.
pub fn solve_dense(n: usize, mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n, "matrix shape mismatch");
    assert_eq!(b.len(), n, "rhs length mismatch");

    for col in 0..n {
        // Partial pivoting: bring the largest remaining entry of this
        // column to the diagonal.
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * n + col].abs().total_cmp(&a[r2 * n + col].abs())
            })
            .expect("non-empty range");
        if a[pivot_row * n + col].abs() < f64::MIN_POSITIVE {
            return Err(Error::SingularSystem);
        }
        if pivot_row != col {
            for k in col..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }

        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[row * n + col] = 0.0;
            for k in (col + 1)..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_known_system() {
        // 2x + y = 5, x - y = 1  →  x = 2, y = 1
        let x = solve_dense(2, vec![2.0, 1.0, 1.0, -1.0], vec![5.0, 1.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pivots_past_a_zero_diagonal() {
        // Leading zero forces a row swap.
        let x = solve_dense(2, vec![0.0, 1.0, 1.0, 0.0], vec![3.0, 7.0]).unwrap();
        assert!((x[0] - 7.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular_matrices() {
        let err = solve_dense(2, vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::SingularSystem));
    }

    #[test]
    fn residuals_vanish_on_a_generated_system() {
        // Deterministic pseudo-random but well-conditioned system: strong
        // diagonal, varied off-diagonal entries.
        let n = 40;
        let mut a = vec![0.0; n * n];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for r in 0..n {
            for c in 0..n {
                a[r * n + c] = if r == c { n as f64 } else { next() };
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| i as f64 - 17.5).collect();
        let b: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| a[r * n + c] * x_true[c]).sum())
            .collect();
        let x = solve_dense(n, a, b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}
