//! Composite Simpson quadrature on uniform node grids.

use crate::error::{Error, Result};

/// Composite Simpson rule for samples `f_0..f_N` on a uniform grid with
/// spacing `h`. `N = values.len() - 1` must be even and positive.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + 4.0 * odd + 2.0 * even + values[n])
}

/// Cumulative integral `G_k = int_0^{t_k} f` at every node.
///
/// Even nodes accumulate whole Simpson panels. Odd nodes add the integral of
/// the panel's interpolating parabola over its first half,
/// `h/12 (5 f_0 + 8 f_1 - f_2)`.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    debug_assert!(n >= 2 && n % 2 == 0);
    let mut out = vec![0.0; n + 1];
    let mut k = 0;
    while k < n {
        let (f0, f1, f2) = (values[k], values[k + 1], values[k + 2]);
        out[k + 1] = out[k] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
        out[k + 2] = out[k] + h / 3.0 * (f0 + 4.0 * f1 + f2);
        k += 2;
    }
    out
}

/// Composite Simpson of `f` on `[a, b]` with `n` intervals.
pub fn simpson_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Result<f64> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::invalid(format!("Simpson needs an even interval count >= 2, got {n}")));
    }
    let h = (b - a) / n as f64;
    let values: Vec<f64> = (0..=n).map(|k| f(a + k as f64 * h)).collect();
    Ok(simpson(&values, h))
}

/// Richardson-validated estimate from results at `N` and `2N` intervals of a
/// fourth-order rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonEstimate {
    pub value: f64,
    pub error: f64,
}

pub fn richardson(coarse: f64, fine: f64) -> RichardsonEstimate {
    let diff = (fine - coarse) / 15.0;
    RichardsonEstimate { value: fine + diff, error: diff.abs() }
}

impl RichardsonEstimate {
    pub fn check(self, rel_tol: f64) -> Result<f64> {
        let tolerance = rel_tol * self.value.abs().max(1.0);
        if self.error.is_finite() && self.error <= tolerance {
            Ok(self.value)
        } else {
            Err(Error::QuadratureNonConvergence { estimate: self.error, tolerance })
        }
    }
}
