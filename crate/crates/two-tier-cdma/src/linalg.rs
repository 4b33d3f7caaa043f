//! Determinant sign via LU factorization with partial pivoting.
//!
//! Feasibility of a user set is decided by the sign of the determinant of an
//! N x N interference matrix. For N around 50 the raw determinant routinely
//! leaves f64 range (entries span many orders of magnitude, and the product
//! of N pivots compounds that), so the factorization tracks the sign and the
//! log of the magnitude instead of the value itself.

/// Sign of a determinant, with `Zero` meaning the pivoting ran out of
/// significant digits: the matrix is singular to working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetSign {
    Positive,
    Negative,
    Zero,
}

/// Determinant in sign / log-magnitude form: `det = sign * exp(ln_abs)`.
///
/// `ln_abs` is meaningless when `sign` is [`DetSign::Zero`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogDet {
    pub sign: DetSign,
    pub ln_abs: f64,
}

impl SignedLogDet {
    /// Conventional signum: +1, -1, or 0.
    pub fn signum(&self) -> f64 {
        match self.sign {
            DetSign::Positive => 1.0,
            DetSign::Negative => -1.0,
            DetSign::Zero => 0.0,
        }
    }
}

/// Computes the determinant sign and log-magnitude of a dense row-major
/// `n` x `n` matrix, destroying the buffer in place.
///
/// A pivot is declared vanished when its magnitude drops below
/// `n * epsilon * max|a_ij|` of the input matrix, the usual growth-scaled
/// threshold for elimination with partial pivoting.
pub fn sign_log_det(mut a: Vec<f64>, n: usize) -> SignedLogDet {
    assert_eq!(a.len(), n * n, "matrix buffer has wrong length");
    assert!(n >= 1, "matrix must be at least 1 x 1");

    let scale = a.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return SignedLogDet {
            sign: DetSign::Zero,
            ln_abs: f64::NEG_INFINITY,
        };
    }
    let pivot_floor = n as f64 * f64::EPSILON * scale;

    let mut negative = false;
    let mut ln_abs = 0.0f64;

    for col in 0..n {
        // Partial pivoting: largest magnitude in the remaining column.
        let mut pivot_row = col;
        let mut pivot_mag = a[col * n + col].abs();
        for row in col + 1..n {
            let mag = a[row * n + col].abs();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag <= pivot_floor {
            return SignedLogDet {
                sign: DetSign::Zero,
                ln_abs: f64::NEG_INFINITY,
            };
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            negative = !negative;
        }

        let pivot = a[col * n + col];
        if pivot < 0.0 {
            negative = !negative;
        }
        ln_abs += pivot.abs().ln();

        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col + 1..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
        }
    }

    SignedLogDet {
        sign: if negative {
            DetSign::Negative
        } else {
            DetSign::Positive
        },
        ln_abs,
    }
}
