//! Power-weighted geometric series `sum_{n>=1} P(n) y^n` for `|y| < 1`.
//!
//! Two independent evaluations are provided: the rational closed form of the
//! polylogarithm of nonpositive order, and direct summation that stops once a
//! rigorous ratio-test bound on the remaining tail is below a target.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eulerian numbers `A(k, 0..k)` for `k >= 1`; `A(0) = [1]`.
pub fn eulerian_row(k: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for n in 1..=k {
        let mut next = vec![0.0; n];
        for (m, slot) in next.iter_mut().enumerate() {
            let left = if m < row.len() { row[m] } else { 0.0 };
            let down = if m >= 1 && m - 1 < row.len() {
                row[m - 1]
            } else {
                0.0
            };
            *slot = (m as f64 + 1.0) * left + (n - m) as f64 * down;
        }
        row = next;
    }
    row
}

/// `Li_{-k}(y) = sum_{n>=1} n^k y^n = y A_k(y) / (1-y)^{k+1}` for `|y| < 1`.
pub fn power_sum_closed(k: usize, y: f64) -> f64 {
    if k == 0 {
        return y / (1.0 - y);
    }
    let a = eulerian_row(k);
    let poly = a.iter().rev().fold(0.0, |acc, c| acc * y + c);
    y * poly / (1.0 - y).powi(k as i32 + 1)
}

/// Upper bound on `sum_{n > last} t_n` given `|t_{last+1}| <= next` and terms
/// shaped like `poly(n) |y|^n` with `poly` of the given degree and
/// nonnegative coefficients.
pub fn ratio_tail_bound(next: f64, degree: usize, last: usize, y_abs: f64) -> f64 {
    let n1 = (last + 1) as f64;
    let r = ((n1 + 1.0) / n1).powi(degree as i32) * y_abs;
    if r < 1.0 {
        next / (1.0 - r)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
pub struct WindingSum {
    pub value: Complex64,
    /// Terms summed, `n = 1..=terms`.
    pub terms: usize,
    pub tail_bound: f64,
    pub breakdown: Vec<Complex64>,
}

/// Direct evaluation of `sum_{n>=1} (sum_a coeffs[a] n^a) y^n`.
pub fn winding_sum(
    coeffs: &[Complex64],
    y: f64,
    target: f64,
    max_terms: usize,
    keep_breakdown: bool,
) -> Result<WindingSum> {
    let degree = coeffs.len().saturating_sub(1);
    let abs_poly = |n: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * n + c.norm());
    let poly = |n: f64| {
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * n + c)
    };
    let y_abs = y.abs();

    let mut value = Complex64::new(0.0, 0.0);
    let mut breakdown = Vec::new();
    let mut pow = 1.0;
    let mut tail = f64::INFINITY;
    for n in 1..=max_terms {
        pow *= y;
        let t = poly(n as f64) * pow;
        value += t;
        if keep_breakdown {
            breakdown.push(t);
        }
        let next = abs_poly((n + 1) as f64) * pow.abs() * y_abs;
        tail = ratio_tail_bound(next, degree, n, y_abs);
        if tail <= target {
            return Ok(WindingSum {
                value,
                terms: n,
                tail_bound: tail,
                breakdown,
            });
        }
    }
    Err(Error::WindingCutoff {
        max_winding: max_terms,
        target,
        achievable: tail,
    })
}
