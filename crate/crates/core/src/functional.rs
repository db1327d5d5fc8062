//! Orbit classification and the weighted partial integrability functional
//!
//! ```text
//! m_rho(V) ~ sum_i rho(u_i) R(u_i) / sum_i rho(u_i)
//! ```
//!
//! where `R(u) = 1` iff the orbit stayed bounded and `|lambda_max(u)| < tol`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{euler_ftle_bias, ftle_configured, FtleResult, IntegrationConfig, Method};
use crate::summation::NeumaierSum;
use crate::systems::{PhaseState, SystemDef};

pub const DEFAULT_TOL: f64 = 1e-2;

/// Uniform grid on the `(x1, y1)` plane with the remaining coordinates fixed.
/// Axes include both box endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub fixed_coords: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 5, box_lo: -0.9, box_hi: 0.9, fixed_coords: vec![0.7, 0.0] }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(Error::EmptyInput("grid with nx = 0".into()));
        }
        if !(self.box_lo.is_finite() && self.box_hi.is_finite() && self.box_lo <= self.box_hi) {
            return Err(Error::invalid(format!("invalid grid box [{}, {}]", self.box_lo, self.box_hi)));
        }
        if self.fixed_coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("fixed grid coordinates".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.nx == 0
    }

    pub fn axis(&self) -> Vec<f64> {
        if self.nx == 1 {
            return vec![0.5 * (self.box_lo + self.box_hi)];
        }
        let step = (self.box_hi - self.box_lo) / (self.nx - 1) as f64;
        (0..self.nx)
            .map(|k| if k == self.nx - 1 { self.box_hi } else { self.box_lo + k as f64 * step })
            .collect()
    }

    /// Points in index order: `x1` outer, `y1` inner.
    pub fn points(&self) -> Result<Vec<PhaseState>> {
        self.validate()?;
        let axis = self.axis();
        let mut out = Vec::with_capacity(self.len());
        for &x in &axis {
            for &y in &axis {
                let mut c = vec![x, y];
                c.extend_from_slice(&self.fixed_coords);
                out.push(PhaseState::new(c)?);
            }
        }
        Ok(out)
    }
}

/// `R in {0, 1}`: regular iff bounded and `|lambda| < tol`.
pub fn classify(lambda: f64, escaped: bool, tol: f64) -> bool {
    !escaped && lambda.abs() < tol
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtleRecord {
    pub index: usize,
    pub u0: Vec<f64>,
    pub rho0: f64,
    pub lambda_max: f64,
    pub escaped: bool,
    pub regular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaStats {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl LambdaStats {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Self { min: v[0], median, max: v[n - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub params: serde_json::Value,
    pub m_rho: f64,
    pub n_total: usize,
    pub n_regular: usize,
    pub n_escaped: usize,
    pub weighted_total: f64,
    pub weighted_regular: f64,
    pub lambda_stats: Option<LambdaStats>,
    pub tool_version: String,
    #[serde(skip)]
    pub records: Vec<FtleRecord>,
}

impl IntegrabilityReport {
    pub fn lambdas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda_max).collect()
    }

    pub fn all_escaped(&self) -> bool {
        self.n_total > 0 && self.n_escaped == self.n_total
    }
}

/// Classification threshold and run options shared by the `m_rho` drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalConfig {
    pub tol: f64,
    /// Worker threads; 0 means rayon's default.
    pub workers: usize,
    /// Recorded in reports; only used by random tangent directions.
    pub seed: u64,
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, workers: 0, seed: 0 }
    }
}

/// Refuse thresholds the Euler FTLE bias alone would exceed.
///
/// With explicit Euler a bounded rotation at frequency `omega` already shows
/// an exponent of about `omega^2 dt / 2`. `tol` at or below that bias would
/// classify every orbit as irregular; below twice the bias we warn.
pub fn check_tolerance(system: &SystemDef, cfg: &IntegrationConfig, tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    if cfg.method != Method::Euler {
        return Ok(());
    }
    if let Some(omega) = system.characteristic_frequency() {
        let bias = euler_ftle_bias(omega, cfg.dt);
        if tol <= bias {
            return Err(Error::invalid(format!(
                "tol = {tol} does not exceed the Euler FTLE bias {bias:.4e} at frequency {omega} and dt = {}; \
                 raise tol, lower dt, or use rk4",
                cfg.dt
            )));
        }
        if tol < 2.0 * bias {
            log::warn!("tol = {tol} is within a factor 2 of the Euler FTLE bias {bias:.4e}");
        }
    }
    Ok(())
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// FTLE records for arbitrary initial conditions, in input order.
pub fn ftle_records(
    system: &SystemDef,
    points: &[PhaseState],
    cfg: &IntegrationConfig,
    tol: f64,
    workers: usize,
) -> Result<Vec<FtleRecord>> {
    cfg.validate()?;
    let results: Vec<Result<(f64, FtleResult)>> = run_pool(workers, || {
        points
            .par_iter()
            .map(|u0| {
                let rho = system.eval_density(u0)?;
                let r = ftle_configured(system, u0, cfg)?;
                Ok((rho, r))
            })
            .collect()
    })?;
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            let (rho0, ftle) = r?;
            let escaped = ftle.escaped();
            Ok(FtleRecord {
                index,
                u0: points[index].coords().to_vec(),
                rho0,
                lambda_max: ftle.lambda,
                escaped,
                regular: classify(ftle.lambda, escaped, tol),
            })
        })
        .collect()
}

/// Weighted regular fraction of a set of records, with fixed-order
/// compensated sums. Returns `(m_rho, weighted_regular, weighted_total)`.
pub fn weighted_ratio(records: &[FtleRecord]) -> Result<(f64, f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no FTLE records".into()));
    }
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for r in records {
        den.add(r.rho0);
        if r.regular {
            num.add(r.rho0);
        }
    }
    let (wr, wt) = (num.value(), den.value());
    Ok((wr / wt, wr, wt))
}

/// Unweighted fraction of regular records.
pub fn regular_fraction(records: &[FtleRecord]) -> f64 {
    records.iter().filter(|r| r.regular).count() as f64 / records.len() as f64
}

fn report_params(system: &SystemDef, grid: &GridSpec, cfg: &IntegrationConfig, fc: &FunctionalConfig) -> serde_json::Value {
    serde_json::json!({
        "system": system.name(),
        "system_params": system.params(),
        "grid": grid,
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "method": cfg.method,
        "escape_radius": cfg.escape_radius,
        "fd_step": cfg.fd_step,
        "tol": fc.tol,
        "seed": fc.seed,
    })
}

pub fn report_from_records(records: Vec<FtleRecord>, params: serde_json::Value) -> Result<IntegrabilityReport> {
    let (m_rho, weighted_regular, weighted_total) = weighted_ratio(&records)?;
    Ok(IntegrabilityReport {
        params,
        m_rho,
        n_total: records.len(),
        n_regular: records.iter().filter(|r| r.regular).count(),
        n_escaped: records.iter().filter(|r| r.escaped).count(),
        weighted_total,
        weighted_regular,
        lambda_stats: LambdaStats::from_values(&records.iter().map(|r| r.lambda_max).collect::<Vec<_>>()),
        tool_version: crate::TOOL_VERSION.to_string(),
        records,
    })
}

/// Estimate `m_rho` on a grid of initial conditions.
pub fn compute_m_rho(
    system: &SystemDef,
    grid: &GridSpec,
    cfg: &IntegrationConfig,
    fc: &FunctionalConfig,
) -> Result<IntegrabilityReport> {
    check_tolerance(system, cfg, fc.tol)?;
    let points = grid.points()?;
    if system.dimension() != points[0].dim() {
        return Err(Error::DimensionMismatch { expected: system.dimension(), got: points[0].dim() });
    }
    let records = ftle_records(system, &points, cfg, fc.tol, fc.workers)?;
    report_from_records(records, report_params(system, grid, cfg, fc))
}

/// One report per `alpha`; `family` builds the system for each value.
pub fn sweep_alpha(
    family: impl Fn(f64) -> Result<SystemDef>,
    alphas: &[f64],
    grid: &GridSpec,
    cfg: &IntegrationConfig,
    fc: &FunctionalConfig,
) -> Result<Vec<(f64, IntegrabilityReport)>> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("alpha list".into()));
    }
    alphas
        .iter()
        .map(|&a| {
            let sys = family(a)?;
            Ok((a, compute_m_rho(&sys, grid, cfg, fc)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub label: String,
    pub m_rho: f64,
    pub delta_m_abs: f64,
    /// `|delta m| / m_baseline`; infinite when the baseline is 0 and the
    /// variant is not.
    pub delta_m_rel: f64,
    /// Mean `|delta lambda|` over matching initial conditions; `None` when the
    /// variant samples different points.
    pub mean_abs_delta_lambda: Option<f64>,
    pub n_escaped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub baseline_m_rho: f64,
    pub baseline_n_escaped: usize,
    pub rows: Vec<ConvergenceRow>,
    pub tool_version: String,
}

impl ConvergenceTable {
    pub fn row(&self, label: &str) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

fn compare(label: &str, base: &IntegrabilityReport, variant: &IntegrabilityReport, same_points: bool) -> ConvergenceRow {
    let delta = (variant.m_rho - base.m_rho).abs();
    let rel = if base.m_rho != 0.0 {
        delta / base.m_rho
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let mean_abs_delta_lambda = same_points.then(|| {
        let s: NeumaierSum = base
            .records
            .iter()
            .zip(&variant.records)
            .map(|(a, b)| (a.lambda_max - b.lambda_max).abs())
            .collect();
        s.value() / base.records.len() as f64
    });
    ConvergenceRow {
        label: label.to_string(),
        m_rho: variant.m_rho,
        delta_m_abs: delta,
        delta_m_rel: rel,
        mean_abs_delta_lambda,
        n_escaped: variant.n_escaped,
    }
}

/// Sensitivity of `m_rho` to `T -> 2T`, `dt -> dt/2` and `nx -> nx + 2`.
pub fn convergence_study(
    system: &SystemDef,
    grid: &GridSpec,
    cfg: &IntegrationConfig,
    fc: &FunctionalConfig,
) -> Result<ConvergenceTable> {
    let base = compute_m_rho(system, grid, cfg, fc)?;
    let long = compute_m_rho(system, grid, &IntegrationConfig { t_max: 2.0 * cfg.t_max, ..cfg.clone() }, fc)?;
    let fine = compute_m_rho(system, grid, &IntegrationConfig { dt: 0.5 * cfg.dt, ..cfg.clone() }, fc)?;
    let dense_grid = GridSpec { nx: grid.nx + 2, ..grid.clone() };
    let dense = compute_m_rho(system, &dense_grid, cfg, fc)?;
    Ok(ConvergenceTable {
        baseline_m_rho: base.m_rho,
        baseline_n_escaped: base.n_escaped,
        rows: vec![
            compare("t_max_x2", &base, &long, true),
            compare("dt_half", &base, &fine, true),
            compare("grid_plus2", &base, &dense, false),
        ],
        tool_version: crate::TOOL_VERSION.to_string(),
    })
}
