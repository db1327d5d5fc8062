//! Nondegeneracy, resonance and non-persistence diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::smooth::SmoothFn;

/// Threshold for "bounded away from zero" verdicts.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-8;

/// Which rows enter the Wronskian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WronskianRows {
    /// Derivative orders `0..=m-1` (frequencies and their derivatives).
    #[default]
    FromValue,
    /// Derivative orders `1..=m` (the twist form used for period maps).
    FromFirstDerivative,
}

impl WronskianRows {
    fn first_order(self) -> usize {
        match self {
            WronskianRows::FromValue => 0,
            WronskianRows::FromFirstDerivative => 1,
        }
    }
}

/// Determinant of the matrix whose row `k` is `(f_1^(k), .., f_m^(k))(I)`.
pub fn wronskian_det(fs: &[&dyn SmoothFn], action: f64, rows: WronskianRows) -> f64 {
    let m = fs.len();
    if m == 0 {
        return 1.0;
    }
    let start = rows.first_order();
    let mat = DMatrix::from_fn(m, m, |r, c| fs[c].derivative(start + r, action));
    mat.determinant()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NondegeneracyVerdict {
    pub pass: bool,
    pub min: f64,
    pub argmin: f64,
}

/// Sample `[lo, hi]` at `grid_count` uniform points (endpoints included) and
/// test `min |W(I)| >= tau`.
pub fn check_nondegeneracy(
    fs: &[&dyn SmoothFn],
    interval: (f64, f64),
    grid_count: usize,
    tau: f64,
    rows: WronskianRows,
) -> Result<NondegeneracyVerdict> {
    if grid_count < 100 {
        return Err(Error::invalid(format!("grid_count must be >= 100, got {grid_count}")));
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty interval ({lo}, {hi})")));
    }
    let mut min = f64::INFINITY;
    let mut argmin = lo;
    for k in 0..grid_count {
        let x = lo + (hi - lo) * k as f64 / (grid_count - 1) as f64;
        let d = wronskian_det(fs, x, rows).abs();
        if d < min {
            min = d;
            argmin = x;
        }
    }
    Ok(NondegeneracyVerdict { pass: min >= tau, min, argmin })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resonance {
    pub min: f64,
    pub p: Vec<i64>,
}

/// Smallest `|<p, omega>|` over integer vectors `0 < |p|_inf <= max_order`,
/// by exhaustive enumeration in lexicographic order (first minimizer wins).
pub fn resonance_min(omega: &[f64], max_order: i64) -> Result<Resonance> {
    if max_order < 1 {
        return Err(Error::invalid(format!("resonance order must be >= 1, got {max_order}")));
    }
    if omega.is_empty() {
        return Err(Error::EmptyInput("frequency vector".into()));
    }
    let m = omega.len();
    let mut p = vec![-max_order; m];
    let mut best = Resonance { min: f64::INFINITY, p: vec![0; m] };
    loop {
        if p.iter().any(|&x| x != 0) {
            let s: f64 = p.iter().zip(omega).map(|(&a, &w)| a as f64 * w).sum();
            if s.abs() < best.min {
                best = Resonance { min: s.abs(), p: p.clone() };
            }
        }
        // Odometer increment, last index fastest.
        let mut i = m;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if p[i] < max_order {
                p[i] += 1;
                break;
            }
            p[i] = -max_order;
        }
    }
}

/// One frequency as a function of the actions.
pub type ActionFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Frequencies `omega_i(I_1..I_l)` on a box of actions.
#[derive(Clone)]
pub struct FrequencyModel {
    omega: Vec<Arc<ActionFn>>,
    actions: Vec<(f64, f64)>,
}

impl FrequencyModel {
    pub fn new(omega: Vec<Arc<ActionFn>>, actions: Vec<(f64, f64)>) -> Self {
        Self { omega, actions }
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn eval(&self, action: &[f64]) -> Result<Vec<f64>> {
        if action.len() != self.actions.len() {
            return Err(Error::DimensionMismatch { expected: self.actions.len(), got: action.len() });
        }
        let w: Vec<f64> = self.omega.iter().map(|f| f(action)).collect();
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("frequency evaluation".into()));
        }
        Ok(w)
    }

    pub fn resonance_at(&self, action: &[f64], max_order: i64) -> Result<Resonance> {
        resonance_min(&self.eval(action)?, max_order)
    }
}

/// Fourier coefficients `g^j` of a function on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierTable {
    pub coefficients: BTreeMap<i64, Complex64>,
    /// Set when the highest tabulated harmonic is not negligible, i.e. the
    /// table probably truncates real content.
    pub truncation_warning: bool,
}

impl FourierTable {
    pub fn get(&self, j: i64) -> Complex64 {
        self.coefficients.get(&j).copied().unwrap_or_default()
    }

    pub fn max_harmonic(&self) -> i64 {
        self.coefficients.keys().next_back().copied().unwrap_or(0)
    }

    /// `sum_j |g^j|^2`.
    pub fn energy(&self) -> f64 {
        self.coefficients.values().map(|c| c.norm_sqr()).sum()
    }
}

impl Serialize for FourierTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            j: i64,
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Table {
            coefficients: Vec<Entry>,
            truncation_warning: bool,
        }
        Table {
            coefficients: self
                .coefficients
                .iter()
                .map(|(&j, c)| Entry { j, re: c.re, im: c.im })
                .collect(),
            truncation_warning: self.truncation_warning,
        }
        .serialize(s)
    }
}

fn check_fourier_grid(max_j: usize, nodes: usize) -> Result<()> {
    if !nodes.is_power_of_two() || nodes < 4 * max_j.max(1) {
        return Err(Error::invalid(format!(
            "nodes must be a power of two and >= 4 * max_j (nodes={nodes}, max_j={max_j})"
        )));
    }
    Ok(())
}

/// `g^j = (1/N) sum_k g(theta_k) e^{-i j theta_k}` on `N` uniform nodes, for
/// `|j| <= max_j`.
pub fn fourier_coeffs(g: impl Fn(f64) -> f64, max_j: usize, nodes: usize) -> Result<FourierTable> {
    check_fourier_grid(max_j, nodes)?;
    let samples: Vec<f64> = (0..nodes).map(|k| g(TAU * k as f64 / nodes as f64)).collect();
    Ok(fourier_from_samples(&samples, max_j))
}

fn fourier_from_samples(samples: &[f64], max_j: usize) -> FourierTable {
    let n = samples.len();
    let mut coefficients = BTreeMap::new();
    let max_j = max_j as i64;
    for j in -max_j..=max_j {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &v) in samples.iter().enumerate() {
            // Reduce j*k mod n before forming the angle to keep it small.
            let idx = (j * k as i64).rem_euclid(n as i64);
            let angle = -TAU * idx as f64 / n as f64;
            acc += Complex64::from_polar(v, angle);
        }
        coefficients.insert(j, acc / n as f64);
    }
    let biggest = coefficients.values().map(|c| c.norm()).fold(0.0, f64::max);
    let top = coefficients
        .get(&max_j)
        .map(|c| c.norm())
        .unwrap_or(0.0)
        .max(coefficients.get(&-max_j).map(|c| c.norm()).unwrap_or(0.0));
    let truncation_warning = max_j > 0 && top > 1e-6 * biggest;
    if truncation_warning {
        log::warn!("Fourier table truncated: |g^{max_j}| = {top:e} is not negligible");
    }
    FourierTable { coefficients, truncation_warning }
}

/// Samples on a graph-type manifold `I_1 = h(I_2..I_l)`, with `count` uniform
/// points per free axis (endpoints included).
pub fn graph_manifold_samples(
    h: impl Fn(&[f64]) -> f64,
    free_ranges: &[(f64, f64)],
    count: usize,
) -> Vec<Vec<f64>> {
    let count = count.max(1);
    let axis = |r: (f64, f64), k: usize| {
        if count == 1 {
            0.5 * (r.0 + r.1)
        } else {
            r.0 + (r.1 - r.0) * k as f64 / (count - 1) as f64
        }
    };
    let total = count.pow(free_ranges.len() as u32);
    (0..total)
        .map(|mut idx| {
            let mut free = vec![0.0; free_ranges.len()];
            for d in (0..free_ranges.len()).rev() {
                free[d] = axis(free_ranges[d], idx % count);
                idx /= count;
            }
            let mut point = Vec::with_capacity(free.len() + 1);
            point.push(h(&free));
            point.extend(free);
            point
        })
        .collect()
}

/// Scalar-field component `g_k(I, theta)` of the perturbation.
pub type AngleFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Inputs for the non-persistence conditions: an invariant manifold
/// `{F0(I) = 0}` of a one-angle integrable flow `theta' = f(I)`, and the
/// action components `g_1..g_l` of a perturbation.
pub struct NonpersistenceInput<'a> {
    pub f0: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub grad_f0: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub g: Vec<&'a AngleFn>,
    pub frequency: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub samples: &'a [Vec<f64>],
    pub max_j: usize,
    pub nodes: usize,
    /// Threshold for "nonzero" dot products.
    pub threshold: f64,
    /// Threshold for `|f| ~ 0` when looking for a resonant point.
    pub tol_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition1 {
    pub holds: bool,
    pub min_abs_dot: f64,
    pub max_abs_dot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCheck {
    pub j: i64,
    /// Best multiple `k = N j` found, if any dot product was nonzero.
    pub best_k: Option<i64>,
    /// `min` over samples of `|g^k . grad F0|` at `best_k`.
    pub min_abs_dot: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition2 {
    pub holds: bool,
    pub averaged_dot_vanishes: bool,
    pub resonant_point_found: bool,
    pub min_abs_frequency: f64,
    pub harmonics: Vec<HarmonicCheck>,
    /// `|j| <= max_j` and `|N| <= max_multiple`: the condition quantifies
    /// over all integers and is only checked up to this cutoff.
    pub max_j: usize,
    pub max_multiple: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonpersistenceVerdict {
    Condition1,
    Condition2,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonpersistenceReport {
    pub condition1: Condition1,
    pub condition2: Option<Condition2>,
    pub verdict: NonpersistenceVerdict,
}

/// Evaluate the two sufficient conditions under which the invariant
/// manifold `{F0 = 0}` does not persist analytically under the perturbation.
pub fn nonpersistence_conditions(input: &NonpersistenceInput<'_>) -> Result<NonpersistenceReport> {
    if input.samples.is_empty() {
        return Err(Error::EmptyInput("manifold samples".into()));
    }
    if input.g.is_empty() {
        return Err(Error::EmptyInput("perturbation components".into()));
    }
    let harmonic_cap = input.nodes / 4;
    check_fourier_grid(input.max_j, input.nodes)?;
    for (i, s) in input.samples.iter().enumerate() {
        let v = (input.f0)(s);
        if !(v.abs() <= 1e-8) {
            return Err(Error::invalid(format!("sample {i} is not on the manifold: |F0| = {v:e}")));
        }
    }

    // Per sample: gradient and Fourier tables of every g_k up to nodes/4.
    let tables: Vec<(Vec<f64>, Vec<FourierTable>)> = input
        .samples
        .iter()
        .map(|s| {
            let grad = (input.grad_f0)(s);
            let tabs = input
                .g
                .iter()
                .map(|gk| {
                    let samples: Vec<f64> =
                        (0..input.nodes).map(|k| gk(s, TAU * k as f64 / input.nodes as f64)).collect();
                    fourier_from_samples(&samples, harmonic_cap)
                })
                .collect();
            (grad, tabs)
        })
        .collect();
    for (grad, _) in &tables {
        if grad.len() != input.g.len() {
            return Err(Error::DimensionMismatch { expected: input.g.len(), got: grad.len() });
        }
    }

    let dot_at = |k: i64, sample: usize| -> f64 {
        let (grad, tabs) = &tables[sample];
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, gi) in tabs.iter().zip(grad) {
            acc += t.get(k) * *gi;
        }
        acc.norm()
    };
    let min_over_samples = |k: i64| (0..tables.len()).map(|s| dot_at(k, s)).fold(f64::INFINITY, f64::min);
    let max_over_samples = |k: i64| (0..tables.len()).map(|s| dot_at(k, s)).fold(0.0, f64::max);

    let condition1 = Condition1 {
        min_abs_dot: min_over_samples(0),
        max_abs_dot: max_over_samples(0),
        holds: min_over_samples(0) > input.threshold,
    };
    if condition1.holds {
        return Ok(NonpersistenceReport { condition1, condition2: None, verdict: NonpersistenceVerdict::Condition1 });
    }

    let averaged_dot_vanishes = condition1.max_abs_dot <= input.threshold;
    let min_abs_frequency = input
        .samples
        .iter()
        .map(|s| (input.frequency)(s).abs())
        .fold(f64::INFINITY, f64::min);
    let resonant_point_found = min_abs_frequency <= input.tol_f;

    let max_j = input.max_j as i64;
    let max_multiple = harmonic_cap.checked_div(input.max_j).unwrap_or(0);
    let mut harmonics = Vec::new();
    for j in (-max_j..=max_j).filter(|&j| j != 0) {
        let mut best: Option<(i64, f64)> = None;
        for n in 1..=max_multiple as i64 {
            for k in [n * j, -n * j] {
                if k.unsigned_abs() as usize > harmonic_cap {
                    continue;
                }
                let v = min_over_samples(k);
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        let (best_k, min_abs_dot) = match best {
            Some((k, v)) if v > input.threshold => (Some(k), v),
            Some((_, v)) => (None, v),
            None => (None, 0.0),
        };
        harmonics.push(HarmonicCheck { j, best_k, min_abs_dot, holds: best_k.is_some() });
    }
    let all_harmonics = !harmonics.is_empty() && harmonics.iter().all(|h| h.holds);
    let holds = averaged_dot_vanishes && resonant_point_found && all_harmonics;
    let condition2 = Condition2 {
        holds,
        averaged_dot_vanishes,
        resonant_point_found,
        min_abs_frequency,
        harmonics,
        max_j: input.max_j,
        max_multiple,
    };
    let verdict = if holds { NonpersistenceVerdict::Condition2 } else { NonpersistenceVerdict::Inconclusive };
    Ok(NonpersistenceReport { condition1, condition2: Some(condition2), verdict })
}

/// Combined output of the `diagnose` driver.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub wronskian: NondegeneracyVerdict,
    pub resonance: Resonance,
    pub fourier: FourierTable,
    pub nonpersistence: NonpersistenceReport,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::{Analytic, FiniteDiff};

    fn poly(coeffs: &'static [f64]) -> Analytic<impl Fn(usize, f64) -> f64 + Send + Sync> {
        // sum_i c_i x^i and its derivatives
        Analytic(move |k: usize, x: f64| {
            let mut s = 0.0;
            for (i, c) in coeffs.iter().enumerate() {
                if i >= k {
                    let fall: f64 = (i - k + 1..=i).map(|v| v as f64).product();
                    s += c * fall * x.powi((i - k) as i32);
                }
            }
            s
        })
    }

    #[test]
    fn wronskian_examples() {
        let one = poly(&[1.0]);
        let id = poly(&[0.0, 1.0]);
        let sq = poly(&[0.0, 0.0, 1.0]);
        for x in [-1.0, 0.0, 2.5] {
            assert!((wronskian_det(&[&one, &id], x, WronskianRows::FromValue) - 1.0).abs() < 1e-12);
        }
        let c = Analytic(|k: usize, x: f64| match k % 4 {
            0 => x.cos(),
            1 => -x.sin(),
            2 => -x.cos(),
            _ => x.sin(),
        });
        let s = Analytic(|k: usize, x: f64| match k % 4 {
            0 => x.sin(),
            1 => x.cos(),
            2 => -x.sin(),
            _ => -x.cos(),
        });
        assert!((wronskian_det(&[&c, &s], 0.7, WronskianRows::FromValue) - 1.0).abs() < 1e-12);
        assert!((wronskian_det(&[&id, &sq], 2.0, WronskianRows::FromValue) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wronskian_fd_agrees_with_analytic() {
        let fd_c = FiniteDiff::new(f64::cos);
        let fd_s = FiniteDiff::new(f64::sin);
        let fd_sq = FiniteDiff::new(|x: f64| x * x);
        let fd_cu = FiniteDiff::new(|x: f64| x * x * x);
        let id = FiniteDiff::new(|x: f64| x);
        assert!((wronskian_det(&[&fd_c, &fd_s], 0.4, WronskianRows::FromValue) - 1.0).abs() < 1e-6);
        // (x, x^2, x^3): det [[x,x^2,x^3],[1,2x,3x^2],[0,2,6x]] = 2x^3
        let w = wronskian_det(&[&id, &fd_sq, &fd_cu], 1.5, WronskianRows::FromValue);
        assert!((w - 2.0 * 1.5f64.powi(3)).abs() < 1e-6, "{w}");
    }

    #[test]
    fn twist_rows_start_at_first_derivative() {
        // f = (x^2, x^3): rows (2x, 3x^2), (2, 6x) -> 12x^2 - 6x^2 = 6x^2
        let a = poly(&[0.0, 0.0, 1.0]);
        let b = poly(&[0.0, 0.0, 0.0, 1.0]);
        let w = wronskian_det(&[&a, &b], 2.0, WronskianRows::FromFirstDerivative);
        assert!((w - 24.0).abs() < 1e-12);
    }

    #[test]
    fn nondegeneracy_verdicts() {
        let one = poly(&[1.0]);
        let id = poly(&[0.0, 1.0]);
        let sq = poly(&[0.0, 0.0, 1.0]);
        let v = check_nondegeneracy(&[&one, &id], (-1.0, 1.0), 100, 0.5, WronskianRows::FromValue).unwrap();
        assert!(v.pass);
        assert!((v.min - 1.0).abs() < 1e-12);
        let v = check_nondegeneracy(&[&id, &sq], (-1.0, 1.0), 101, 1e-12, WronskianRows::FromValue).unwrap();
        assert!(!v.pass);
        assert_eq!(v.min, 0.0);
        assert!(v.argmin.abs() < 1e-12);
        assert!(check_nondegeneracy(&[&id], (0.0, 1.0), 10, 0.1, WronskianRows::FromValue).is_err());
    }

    #[test]
    fn resonance_examples() {
        let r = resonance_min(&[1.0, 2.0], 3).unwrap();
        assert_eq!(r.min, 0.0);
        assert!(r.p == vec![2, -1] || r.p == vec![-2, 1]);
        let r = resonance_min(&[1.0, 2f64.sqrt()], 5).unwrap();
        assert!((r.min - (3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!(r.p == vec![-3, 2] || r.p == vec![3, -2]);
        let r = resonance_min(&[1.0], 5).unwrap();
        assert_eq!(r.min, 1.0);
        assert_eq!(r.p[0].abs(), 1);
        assert!(resonance_min(&[1.0], 0).is_err());
    }

    #[test]
    fn frequency_model_resonance() {
        let w1: Arc<ActionFn> = Arc::new(|a: &[f64]| 1.0 + a[0]);
        let w2: Arc<ActionFn> = Arc::new(|a: &[f64]| 2.0 * (1.0 + a[0]));
        let fm = FrequencyModel::new(vec![w1, w2], vec![(0.0, 1.0)]);
        assert_eq!(fm.resonance_at(&[0.3], 2).unwrap().min, 0.0);
        assert!(fm.eval(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn fourier_examples() {
        let t = fourier_coeffs(f64::cos, 4, 32).unwrap();
        for (j, c) in &t.coefficients {
            if j.abs() == 1 {
                assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-14);
            } else {
                assert!(c.norm() <= 1e-14, "j={j}: {c}");
            }
        }
        assert!(!t.truncation_warning);
        let t = fourier_coeffs(|_| 2.5, 2, 16).unwrap();
        assert!((t.get(0) - Complex64::new(2.5, 0.0)).norm() < 1e-15);
        let t = fourier_coeffs(|x| (3.0 * x).sin(), 4, 16).unwrap();
        assert!((t.get(3) - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((t.get(-3) - Complex64::new(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn fourier_truncation_and_grid_checks() {
        let t = fourier_coeffs(|x| (2.0 * x).cos(), 2, 16).unwrap();
        assert!(t.truncation_warning);
        assert!(fourier_coeffs(f64::cos, 4, 12).is_err());
        assert!(fourier_coeffs(f64::cos, 8, 16).is_err());
    }

    #[test]
    fn fourier_reality_symmetry() {
        let g = |x: f64| 0.3 + x.sin() - 0.2 * (2.0 * x).cos() + 0.05 * (5.0 * x).sin();
        let t = fourier_coeffs(g, 8, 64).unwrap();
        for j in 1..=8 {
            assert!((t.get(-j) - t.get(j).conj()).norm() <= 1e-12);
        }
    }

    fn cos_case<'a>(
        g1: &'a AngleFn,
        g2: &'a AngleFn,
        samples: &'a [Vec<f64>],
        f0: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        grad: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
        freq: &'a (dyn Fn(&[f64]) -> f64 + Sync),
        max_j: usize,
    ) -> NonpersistenceInput<'a> {
        NonpersistenceInput {
            f0,
            grad_f0: grad,
            g: vec![g1, g2],
            frequency: freq,
            samples,
            max_j,
            nodes: 64,
            threshold: DEFAULT_ZERO_THRESHOLD,
            tol_f: 1e-10,
        }
    }

    #[test]
    fn condition1_holds() {
        // F0 = I1 - I2, averages (1, 0).
        let f0 = |i: &[f64]| i[0] - i[1];
        let grad = |_: &[f64]| vec![1.0, -1.0];
        let freq = |_: &[f64]| 1.0;
        let g1 = |_: &[f64], th: f64| 1.0 + th.cos();
        let g2 = |_: &[f64], th: f64| th.sin();
        let samples = graph_manifold_samples(|f| f[0], &[(0.0, 1.0)], 5);
        let input = cos_case(&g1, &g2, &samples, &f0, &grad, &freq, 2);
        let r = nonpersistence_conditions(&input).unwrap();
        assert_eq!(r.verdict, NonpersistenceVerdict::Condition1);
        assert!((r.condition1.min_abs_dot - 1.0).abs() < 1e-14);
    }

    #[test]
    fn condition1_fails_when_averages_cancel() {
        let f0 = |i: &[f64]| i[0] - i[1];
        let grad = |_: &[f64]| vec![1.0, -1.0];
        let freq = |_: &[f64]| 1.0;
        let g1 = |_: &[f64], _: f64| 1.0;
        let g2 = |_: &[f64], _: f64| 1.0;
        let samples = graph_manifold_samples(|f| f[0], &[(0.0, 1.0)], 5);
        let r = nonpersistence_conditions(&cos_case(&g1, &g2, &samples, &f0, &grad, &freq, 2)).unwrap();
        assert!(!r.condition1.holds);
        assert!(r.condition1.max_abs_dot < 1e-14);
        let c2 = r.condition2.unwrap();
        assert!(c2.averaged_dot_vanishes);
        assert!(!c2.resonant_point_found);
        assert_eq!(r.verdict, NonpersistenceVerdict::Inconclusive);
    }

    #[test]
    fn condition2_from_cosine_perturbation() {
        // g = (cos theta, 0), F0 = I1, f = I1: f vanishes on {I1 = 0} and the
        // first harmonic gives |g^1 . grad F0| = 1/2.
        let f0 = |i: &[f64]| i[0];
        let grad = |_: &[f64]| vec![1.0, 0.0];
        let freq = |i: &[f64]| i[0];
        let g1 = |_: &[f64], th: f64| th.cos();
        let g2 = |_: &[f64], _: f64| 0.0;
        let samples = graph_manifold_samples(|_| 0.0, &[(-1.0, 1.0)], 7);
        let r = nonpersistence_conditions(&cos_case(&g1, &g2, &samples, &f0, &grad, &freq, 1)).unwrap();
        let c2 = r.condition2.clone().unwrap();
        assert!(c2.resonant_point_found);
        assert_eq!(c2.harmonics.len(), 2);
        for h in &c2.harmonics {
            assert!(h.holds);
            assert!((h.min_abs_dot - 0.5).abs() < 1e-14);
            assert_eq!(h.best_k.unwrap().abs(), 1);
        }
        assert_eq!(r.verdict, NonpersistenceVerdict::Condition2);

        // j = 2 has no nonzero multiple for a pure cos theta.
        let r = nonpersistence_conditions(&cos_case(&g1, &g2, &samples, &f0, &grad, &freq, 2)).unwrap();
        let c2 = r.condition2.unwrap();
        assert!(c2.harmonics.iter().filter(|h| h.j.abs() == 2).all(|h| !h.holds));
        assert_eq!(r.verdict, NonpersistenceVerdict::Inconclusive);
    }

    #[test]
    fn nonpersistence_rejects_bad_input() {
        let f0 = |i: &[f64]| i[0];
        let grad = |_: &[f64]| vec![1.0, 0.0];
        let freq = |i: &[f64]| i[0];
        let g1 = |_: &[f64], th: f64| th.cos();
        let g2 = |_: &[f64], _: f64| 0.0;
        let none: Vec<Vec<f64>> = vec![];
        assert!(matches!(
            nonpersistence_conditions(&cos_case(&g1, &g2, &none, &f0, &grad, &freq, 1)),
            Err(Error::EmptyInput(_))
        ));
        let off = vec![vec![0.5, 0.0]];
        assert!(nonpersistence_conditions(&cos_case(&g1, &g2, &off, &f0, &grad, &freq, 1)).is_err());
    }

    #[test]
    fn graph_samples_lie_on_manifold() {
        let s = graph_manifold_samples(|f| f[0] * f[1], &[(0.0, 1.0), (1.0, 2.0)], 3);
        assert_eq!(s.len(), 9);
        for p in &s {
            assert_eq!(p[0], p[1] * p[2]);
        }
    }
}
