//! System interface, the weighted benchmark field and divergence checks.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vector field evaluator: writes `V(u)` into the output slice.
pub type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
/// Density (Jacobi multiplier) evaluator.
pub type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
/// Analytic Jacobian evaluator: writes `DV(u)` row-major into an `n*n` slice.
pub type JacobianFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Default forward-difference increment for Jacobians.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Default central-difference increment for divergence verification.
pub const DEFAULT_DIVERGENCE_STEP: f64 = 1e-5;
/// Default half-width of the sampling/verification box.
pub const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 2.0;

/// A point in phase space. Always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseState(Vec<f64>);

impl PhaseState {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("phase state coordinate {i}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for PhaseState {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Parameters of the weighted benchmark field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkParams {
    /// Density curvature; `rho = 1 + epsilon |u|^2`.
    pub epsilon: f64,
    /// Linear coupling between the two oscillator blocks.
    pub delta: f64,
    /// Strength of the cubic term.
    pub alpha: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self { epsilon: 0.5, delta: 0.3, alpha: 0.1 }
    }
}

impl BenchmarkParams {
    pub fn new(epsilon: f64, delta: f64, alpha: f64) -> Result<Self> {
        let p = Self { epsilon, delta, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.delta.is_finite() && self.alpha.is_finite()) {
            return Err(Error::NonFinite("benchmark parameters".into()));
        }
        if self.epsilon < 0.0 {
            return Err(Error::invalid(format!(
                "epsilon must be >= 0 so that rho stays positive, got {}",
                self.epsilon
            )));
        }
        if self.alpha < 0.0 {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }
}

/// The constant 4x4 coupling matrix of the benchmark field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingMatrix {
    entries: [[f64; 4]; 4],
}

impl CouplingMatrix {
    pub fn benchmark(delta: f64) -> Self {
        let d = delta;
        let entries = [
            [0.0, 1.0, 0.0, d],
            [-1.0, 0.0, -d, 0.0],
            [0.0, d, 0.0, 1.0],
            [-d, 0.0, -1.0, 0.0],
        ];
        let m = Self { entries };
        assert_eq!(m.max_skew_residual(), 0.0, "coupling matrix must be skew-symmetric");
        m
    }

    pub fn entries(&self) -> &[[f64; 4]; 4] {
        &self.entries
    }

    /// `max |L + L^T|` over all entries.
    pub fn max_skew_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.entries[i][j] + self.entries[j][i]).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.entries[i][i]).sum()
    }

    #[inline]
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (row, o) in self.entries.iter().zip(out.iter_mut()) {
            *o = row[0] * u[0] + row[1] * u[1] + row[2] * u[2] + row[3] * u[3];
        }
    }
}

/// Finite-difference scheme for Jacobians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FdScheme {
    #[default]
    Forward,
    Central,
}

/// A dynamical system given by evaluators.
///
/// Evaluators must be pure; a `SystemDef` is cheap to clone and safe to share
/// across worker threads.
#[derive(Clone)]
pub struct SystemDef {
    name: String,
    dimension: usize,
    field: Arc<FieldFn>,
    density: Arc<DensityFn>,
    jacobian: Option<Arc<JacobianFn>>,
    params: serde_json::Value,
    characteristic_frequency: Option<f64>,
}

impl fmt::Debug for SystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDef")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("params", &self.params)
            .finish()
    }
}

impl SystemDef {
    pub fn new<F, D>(name: impl Into<String>, dimension: usize, field: F, density: D) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::invalid("system dimension must be positive"));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            field: Arc::new(field),
            density: Arc::new(density),
            jacobian: None,
            params: serde_json::Value::Null,
            characteristic_frequency: None,
        })
    }

    /// Unweighted system (`rho == 1`).
    pub fn unweighted<F>(name: impl Into<String>, dimension: usize, field: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(name, dimension, field, |_| 1.0)
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }

    /// Largest linear frequency of the system, used to bound the Euler FTLE
    /// bias `omega^2 dt / 2`.
    pub fn with_characteristic_frequency(mut self, omega: f64) -> Self {
        self.characteristic_frequency = Some(omega);
        self
    }

    /// Replace the density with `c * rho`.
    pub fn with_density_scaled(mut self, c: f64) -> Self {
        let d = Arc::clone(&self.density);
        self.density = Arc::new(move |u: &[f64]| c * d(u));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn params(&self) -> &serde_json::Value {
        &self.params
    }

    pub fn characteristic_frequency(&self) -> Option<f64> {
        self.characteristic_frequency
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Raw field evaluation for hot loops. No checks.
    #[inline]
    pub fn field_into(&self, u: &[f64], out: &mut [f64]) {
        (self.field)(u, out)
    }

    #[inline]
    pub fn density_at(&self, u: &[f64]) -> f64 {
        (self.density)(u)
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: u.len() });
        }
        Ok(())
    }

    pub fn eval_field(&self, u: &PhaseState) -> Result<Vec<f64>> {
        self.check_dim(u.coords())?;
        let mut out = vec![0.0; self.dimension];
        self.field_into(u.coords(), &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field of {}", self.name)));
        }
        Ok(out)
    }

    pub fn eval_density(&self, u: &PhaseState) -> Result<f64> {
        self.check_dim(u.coords())?;
        let rho = self.density_at(u.coords());
        if !rho.is_finite() {
            return Err(Error::NonFinite(format!("density of {}", self.name)));
        }
        if rho <= 0.0 {
            return Err(Error::invalid(format!("density must be positive, got {rho}")));
        }
        Ok(rho)
    }

    /// Jacobian used by the tangent dynamics: analytic when available,
    /// otherwise finite differences. `scratch` must hold at least `3n`
    /// values; `out` receives `n*n` row-major entries.
    #[inline]
    pub(crate) fn jacobian_into(
        &self,
        u: &[f64],
        h: f64,
        scheme: FdScheme,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        if let Some(jac) = &self.jacobian {
            jac(u, out);
        } else {
            fd_jacobian_into(self, u, h, scheme, scratch, out);
        }
    }
}

#[inline]
fn fd_jacobian_into(
    system: &SystemDef,
    u: &[f64],
    h: f64,
    scheme: FdScheme,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    let n = u.len();
    let (shifted, rest) = scratch.split_at_mut(n);
    let (plus, rest) = rest.split_at_mut(n);
    let minus = &mut rest[..n];
    shifted.copy_from_slice(u);
    match scheme {
        FdScheme::Forward => {
            system.field_into(u, minus);
            for j in 0..n {
                shifted[j] = u[j] + h;
                system.field_into(shifted, plus);
                shifted[j] = u[j];
                for i in 0..n {
                    out[i * n + j] = (plus[i] - minus[i]) / h;
                }
            }
        }
        FdScheme::Central => {
            for j in 0..n {
                shifted[j] = u[j] + h;
                system.field_into(shifted, plus);
                shifted[j] = u[j] - h;
                system.field_into(shifted, minus);
                shifted[j] = u[j];
                for i in 0..n {
                    out[i * n + j] = (plus[i] - minus[i]) / (2.0 * h);
                }
            }
        }
    }
}

/// Finite-difference Jacobian of the system's field, row-major `n x n`.
pub fn jacobian_fd(system: &SystemDef, u: &PhaseState, h: f64, scheme: FdScheme) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    system.check_dim(u.coords())?;
    let n = system.dimension();
    let mut scratch = vec![0.0; 3 * n];
    let mut out = vec![0.0; n * n];
    fd_jacobian_into(system, u.coords(), h, scheme, &mut scratch, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("Jacobian of {}", system.name())));
    }
    Ok(out)
}

/// `max_k |sum_i d(rho V_i)/dx_i|` over the sample points, by central
/// differences applied to the product `rho(u) V(u)`.
pub fn check_weighted_divergence(system: &SystemDef, samples: &[PhaseState], h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let n = system.dimension();
    let mut shifted = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut worst = 0.0_f64;
    for u in samples {
        system.check_dim(u.coords())?;
        shifted.copy_from_slice(u.coords());
        let mut div = 0.0;
        for i in 0..n {
            let x = u.coords()[i];
            shifted[i] = x + h;
            system.field_into(&shifted, &mut v);
            let plus = system.density_at(&shifted) * v[i];
            shifted[i] = x - h;
            system.field_into(&shifted, &mut v);
            let minus = system.density_at(&shifted) * v[i];
            shifted[i] = x;
            div += (plus - minus) / (2.0 * h);
        }
        worst = worst.max(div.abs());
    }
    Ok(worst)
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_benchmark_state(u: &[f64]) -> Result<()> {
    if u.len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: u.len() });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("benchmark state".into()));
    }
    Ok(())
}

#[inline]
fn density_raw(epsilon: f64, u: &[f64]) -> f64 {
    1.0 + epsilon * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3])
}

/// Cubic term `N(u)`; each oscillator block is divergence-free on its own.
#[inline]
fn cubic_raw(u: &[f64], out: &mut [f64; 4]) {
    let (x1, y1, x2, y2) = (u[0], u[1], u[2], u[3]);
    out[0] = x1 * x1 * x1 - 3.0 * x1 * y1 * y1;
    out[1] = y1 * y1 * y1 - 3.0 * y1 * x1 * x1;
    out[2] = x2 * x2 * x2 - 3.0 * x2 * y2 * y2;
    out[3] = y2 * y2 * y2 - 3.0 * y2 * x2 * x2;
}

#[inline]
fn benchmark_field_raw(p: &BenchmarkParams, l: &CouplingMatrix, u: &[f64], out: &mut [f64]) {
    let mut lin = [0.0; 4];
    l.apply(u, &mut lin);
    let mut cubic = [0.0; 4];
    cubic_raw(u, &mut cubic);
    let rho = density_raw(p.epsilon, u);
    for i in 0..4 {
        out[i] = (lin[i] + p.alpha * cubic[i]) / rho;
    }
}

/// Analytic Jacobian of `V = (Lu + alpha N)/rho`.
fn benchmark_jacobian_raw(p: &BenchmarkParams, l: &CouplingMatrix, u: &[f64], out: &mut [f64]) {
    let (x1, y1, x2, y2) = (u[0], u[1], u[2], u[3]);
    let rho = density_raw(p.epsilon, u);
    let mut g = [0.0; 4];
    l.apply(u, &mut g);
    let mut cubic = [0.0; 4];
    cubic_raw(u, &mut cubic);
    for i in 0..4 {
        g[i] += p.alpha * cubic[i];
    }
    // DN is block diagonal.
    let mut dn = [[0.0; 4]; 4];
    dn[0][0] = 3.0 * x1 * x1 - 3.0 * y1 * y1;
    dn[0][1] = -6.0 * x1 * y1;
    dn[1][0] = -6.0 * x1 * y1;
    dn[1][1] = 3.0 * y1 * y1 - 3.0 * x1 * x1;
    dn[2][2] = 3.0 * x2 * x2 - 3.0 * y2 * y2;
    dn[2][3] = -6.0 * x2 * y2;
    dn[3][2] = -6.0 * x2 * y2;
    dn[3][3] = 3.0 * y2 * y2 - 3.0 * x2 * x2;
    let l = l.entries();
    for i in 0..4 {
        for j in 0..4 {
            let dg = l[i][j] + p.alpha * dn[i][j];
            let drho = 2.0 * p.epsilon * u[j];
            out[i * 4 + j] = dg / rho - g[i] * drho / (rho * rho);
        }
    }
}

/// `rho(u) = 1 + epsilon (x1^2 + y1^2 + x2^2 + y2^2)`.
pub fn eval_density(params: &BenchmarkParams, u: &PhaseState) -> Result<f64> {
    check_benchmark_state(u.coords())?;
    Ok(density_raw(params.epsilon, u.coords()))
}

/// `V(u) = (L u + alpha N(u)) / rho(u)` for the benchmark.
pub fn eval_benchmark_field(params: &BenchmarkParams, u: &PhaseState) -> Result<Vec<f64>> {
    check_benchmark_state(u.coords())?;
    let l = CouplingMatrix::benchmark(params.delta);
    let mut out = vec![0.0; 4];
    benchmark_field_raw(params, &l, u.coords(), &mut out);
    Ok(out)
}

/// Analytic Jacobian of the benchmark field, row-major 4x4.
pub fn benchmark_jacobian(params: &BenchmarkParams, u: &PhaseState) -> Result<Vec<f64>> {
    check_benchmark_state(u.coords())?;
    let l = CouplingMatrix::benchmark(params.delta);
    let mut out = vec![0.0; 16];
    benchmark_jacobian_raw(params, &l, u.coords(), &mut out);
    Ok(out)
}

/// The weighted benchmark system on R^4, with finite-difference Jacobians.
pub fn benchmark_system(params: BenchmarkParams) -> Result<SystemDef> {
    params.validate()?;
    let l = CouplingMatrix::benchmark(params.delta);
    let p = params;
    let sys = SystemDef::new(
        "weighted-benchmark",
        4,
        move |u: &[f64], out: &mut [f64]| benchmark_field_raw(&p, &l, u, out),
        move |u: &[f64]| density_raw(p.epsilon, u),
    )?
    .with_params(serde_json::to_value(params).expect("params serialize"))
    // Eigenvalues of L are +-i(1 +- delta).
    .with_characteristic_frequency(1.0 + params.delta.abs());
    Ok(sys)
}

/// Benchmark system that uses the closed-form Jacobian instead of finite
/// differences.
pub fn benchmark_system_analytic(params: BenchmarkParams) -> Result<SystemDef> {
    let l = CouplingMatrix::benchmark(params.delta);
    let p = params;
    Ok(benchmark_system(params)?
        .with_jacobian(move |u: &[f64], out: &mut [f64]| benchmark_jacobian_raw(&p, &l, u, out)))
}
