//! Fixed-step integration of the flow and of its variational equations, and
//! the finite-time maximal Lyapunov exponent.
//!
//! The tangent vector is renormalized every `renorm_every` steps and the log
//! of its norm accumulated. With `renorm_every = 1` this is the per-step sum
//! `sum_k log(|du_k| / |du_{k-1}|)`; any other cadence gives the same value up
//! to rounding, since the logs telescope.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::{norm, FdScheme, PhaseState, SystemDef, DEFAULT_FD_STEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Euler,
    Rk4,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::invalid(format!("unknown method {other:?} (expected euler or rk4)"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        })
    }
}

/// Initial tangent direction for the FTLE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TangentInit {
    /// Unit vector along coordinate axis `k`.
    Axis(usize),
    /// Given direction; normalized before use.
    Fixed(Vec<f64>),
    /// Average the exponent over `count` seeded random unit directions.
    RandomAverage { count: usize, seed: u64 },
}

impl Default for TangentInit {
    fn default() -> Self {
        TangentInit::Axis(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_max: f64,
    pub method: Method,
    pub escape_radius: f64,
    pub renorm_every: usize,
    /// Increment for finite-difference Jacobians.
    pub fd_step: f64,
    pub fd_scheme: FdScheme,
    /// Keep every `output_stride`-th state in a stored trajectory.
    pub output_stride: usize,
    pub tangent: TangentInit,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 1500.0,
            method: Method::Euler,
            escape_radius: 10.0,
            renorm_every: 1,
            fd_step: DEFAULT_FD_STEP,
            fd_scheme: FdScheme::Forward,
            output_stride: 1,
            tangent: TangentInit::default(),
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_max", self.t_max)?;
        positive("escape_radius", self.escape_radius)?;
        positive("fd_step", self.fd_step)?;
        if self.t_max / self.dt < 1.0 {
            return Err(Error::invalid(format!(
                "t_max/dt must be at least 1 (t_max={}, dt={})",
                self.t_max, self.dt
            )));
        }
        if self.renorm_every == 0 {
            return Err(Error::invalid("renorm_every must be at least 1"));
        }
        if self.output_stride == 0 {
            return Err(Error::invalid("output_stride must be at least 1"));
        }
        if let TangentInit::RandomAverage { count: 0, .. } = self.tangent {
            return Err(Error::invalid("random tangent average needs at least one direction"));
        }
        Ok(())
    }

    /// `floor(t_max / dt)`, guarded against `t_max/dt` landing a hair below
    /// an integer.
    pub fn steps(&self) -> usize {
        let r = self.t_max / self.dt;
        let n = r.round();
        if (r - n).abs() <= 1e-9 * n.max(1.0) {
            n as usize
        } else {
            r.floor() as usize
        }
    }
}

/// An orbit left the escape ball or produced a non-finite state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEvent {
    pub time: f64,
    pub step: usize,
    pub state: Vec<f64>,
}

/// Strided samples of an orbit. `times[k+1] - times[k] = stride * dt`, except
/// that the final state is always kept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, u: &[f64]) {
        self.times.push(t);
        self.states.push(u.to_vec());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub trajectory: Trajectory,
    pub escape: Option<EscapeEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtleResult {
    /// Finite-time exponent; for escaped orbits, the value accumulated up to
    /// the escape step.
    pub lambda: f64,
    pub elapsed: f64,
    pub escape: Option<EscapeEvent>,
}

impl FtleResult {
    pub fn escaped(&self) -> bool {
        self.escape.is_some()
    }
}

#[inline]
fn escaped(u: &[f64], radius: f64) -> bool {
    let r2: f64 = u.iter().map(|x| x * x).sum();
    !(r2.is_finite() && r2 <= radius * radius)
}

fn check_start(system: &SystemDef, u0: &PhaseState) -> Result<()> {
    if u0.dim() != system.dimension() {
        return Err(Error::DimensionMismatch { expected: system.dimension(), got: u0.dim() });
    }
    let mut v = vec![0.0; system.dimension()];
    system.field_into(u0.coords(), &mut v);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("field at initial state".into()));
    }
    Ok(())
}

/// Scratch buffers for a single state step.
struct FlowWork {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl FlowWork {
    fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }
}

#[inline]
fn flow_step(system: &SystemDef, method: Method, dt: f64, u: &mut [f64], w: &mut FlowWork) {
    let n = u.len();
    match method {
        Method::Euler => {
            system.field_into(u, &mut w.k1);
            for i in 0..n {
                u[i] += dt * w.k1[i];
            }
        }
        Method::Rk4 => {
            system.field_into(u, &mut w.k1);
            for i in 0..n {
                w.tmp[i] = u[i] + 0.5 * dt * w.k1[i];
            }
            system.field_into(&w.tmp, &mut w.k2);
            for i in 0..n {
                w.tmp[i] = u[i] + 0.5 * dt * w.k2[i];
            }
            system.field_into(&w.tmp, &mut w.k3);
            for i in 0..n {
                w.tmp[i] = u[i] + dt * w.k3[i];
            }
            system.field_into(&w.tmp, &mut w.k4);
            for i in 0..n {
                u[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
            }
        }
    }
}

/// Integrate `u' = V(u)` with a fixed step. Escape is a normal outcome: the
/// trajectory up to and including the escaping state is returned.
pub fn integrate_flow(system: &SystemDef, u0: &PhaseState, cfg: &IntegrationConfig) -> Result<FlowResult> {
    cfg.validate()?;
    check_start(system, u0)?;
    let n = system.dimension();
    let steps = cfg.steps();
    let mut u = u0.coords().to_vec();
    let mut work = FlowWork::new(n);
    let mut traj = Trajectory::default();
    traj.push(0.0, &u);
    for k in 1..=steps {
        flow_step(system, cfg.method, cfg.dt, &mut u, &mut work);
        let t = k as f64 * cfg.dt;
        if escaped(&u, cfg.escape_radius) {
            traj.push(t, &u);
            let escape = EscapeEvent { time: t, step: k, state: u };
            return Ok(FlowResult { trajectory: traj, escape: Some(escape) });
        }
        if k % cfg.output_stride == 0 || k == steps {
            traj.push(t, &u);
        }
    }
    Ok(FlowResult { trajectory: traj, escape: None })
}

/// Scratch for the coupled state/tangent step.
struct TangentWork {
    flow: FlowWork,
    jac: Vec<f64>,
    fd: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    g3: Vec<f64>,
    g4: Vec<f64>,
    wtmp: Vec<f64>,
}

impl TangentWork {
    fn new(n: usize) -> Self {
        Self {
            flow: FlowWork::new(n),
            jac: vec![0.0; n * n],
            fd: vec![0.0; 3 * n],
            g1: vec![0.0; n],
            g2: vec![0.0; n],
            g3: vec![0.0; n],
            g4: vec![0.0; n],
            wtmp: vec![0.0; n],
        }
    }
}

#[inline]
fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn tangent_step(
    system: &SystemDef,
    cfg: &IntegrationConfig,
    u: &mut [f64],
    du: &mut [f64],
    w: &mut TangentWork,
) {
    let n = u.len();
    let dt = cfg.dt;
    let (h, scheme) = (cfg.fd_step, cfg.fd_scheme);
    match cfg.method {
        Method::Euler => {
            system.jacobian_into(u, h, scheme, &mut w.fd, &mut w.jac);
            mat_vec(&w.jac, du, &mut w.g1);
            system.field_into(u, &mut w.flow.k1);
            for i in 0..n {
                du[i] += dt * w.g1[i];
                u[i] += dt * w.flow.k1[i];
            }
        }
        Method::Rk4 => {
            let f = &mut w.flow;
            system.field_into(u, &mut f.k1);
            system.jacobian_into(u, h, scheme, &mut w.fd, &mut w.jac);
            mat_vec(&w.jac, du, &mut w.g1);

            for i in 0..n {
                f.tmp[i] = u[i] + 0.5 * dt * f.k1[i];
                w.wtmp[i] = du[i] + 0.5 * dt * w.g1[i];
            }
            system.field_into(&f.tmp, &mut f.k2);
            system.jacobian_into(&f.tmp, h, scheme, &mut w.fd, &mut w.jac);
            mat_vec(&w.jac, &w.wtmp, &mut w.g2);

            for i in 0..n {
                f.tmp[i] = u[i] + 0.5 * dt * f.k2[i];
                w.wtmp[i] = du[i] + 0.5 * dt * w.g2[i];
            }
            system.field_into(&f.tmp, &mut f.k3);
            system.jacobian_into(&f.tmp, h, scheme, &mut w.fd, &mut w.jac);
            mat_vec(&w.jac, &w.wtmp, &mut w.g3);

            for i in 0..n {
                f.tmp[i] = u[i] + dt * f.k3[i];
                w.wtmp[i] = du[i] + dt * w.g3[i];
            }
            system.field_into(&f.tmp, &mut f.k4);
            system.jacobian_into(&f.tmp, h, scheme, &mut w.fd, &mut w.jac);
            mat_vec(&w.jac, &w.wtmp, &mut w.g4);

            for i in 0..n {
                u[i] += dt / 6.0 * (f.k1[i] + 2.0 * f.k2[i] + 2.0 * f.k3[i] + f.k4[i]);
                du[i] += dt / 6.0 * (w.g1[i] + 2.0 * w.g2[i] + 2.0 * w.g3[i] + w.g4[i]);
            }
        }
    }
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let nv = norm(v);
    if !(nv > 0.0 && nv.is_finite()) {
        return Err(Error::invalid("initial tangent direction must be a non-zero finite vector"));
    }
    Ok(v.iter().map(|x| x / nv).collect())
}

/// Seeded random unit directions in `R^n`, by rejection from the cube.
pub fn random_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = norm(&v);
        if r > 1e-3 && r <= 1.0 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// Finite-time maximal Lyapunov exponent for one initial tangent direction.
///
/// `delta0` must be a unit vector.
pub fn ftle_max(
    system: &SystemDef,
    u0: &PhaseState,
    cfg: &IntegrationConfig,
    delta0: &[f64],
) -> Result<FtleResult> {
    cfg.validate()?;
    check_start(system, u0)?;
    let n = system.dimension();
    if delta0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: delta0.len() });
    }
    let nd = norm(delta0);
    if !((nd - 1.0).abs() <= 1e-12) {
        return Err(Error::invalid(format!("initial tangent vector must have unit norm, got {nd}")));
    }

    let steps = cfg.steps();
    let mut u = u0.coords().to_vec();
    let mut du = delta0.to_vec();
    let mut work = TangentWork::new(n);
    let mut log_sum = 0.0;
    let mut since_renorm = 0usize;

    for k in 1..=steps {
        tangent_step(system, cfg, &mut u, &mut du, &mut work);
        since_renorm += 1;
        let t = k as f64 * cfg.dt;
        let state_escaped = escaped(&u, cfg.escape_radius);
        let tangent_norm = norm(&du);
        let tangent_bad = !(tangent_norm.is_finite() && tangent_norm > 0.0);
        if state_escaped || tangent_bad {
            if !tangent_bad {
                log_sum += tangent_norm.ln();
            }
            let escape = EscapeEvent { time: t, step: k, state: u };
            return Ok(FtleResult { lambda: log_sum / t, elapsed: t, escape: Some(escape) });
        }
        if since_renorm == cfg.renorm_every || k == steps {
            log_sum += tangent_norm.ln();
            for x in du.iter_mut() {
                *x /= tangent_norm;
            }
            since_renorm = 0;
        }
    }
    let elapsed = steps as f64 * cfg.dt;
    Ok(FtleResult { lambda: log_sum / elapsed, elapsed, escape: None })
}

/// FTLE using the tangent initialisation configured in `cfg.tangent`.
///
/// For [`TangentInit::RandomAverage`] the exponents of all directions are
/// averaged; the orbit counts as escaped if any run escaped (they share the
/// same state trajectory, so either all escape or none does).
pub fn ftle_configured(system: &SystemDef, u0: &PhaseState, cfg: &IntegrationConfig) -> Result<FtleResult> {
    let n = system.dimension();
    match &cfg.tangent {
        TangentInit::Axis(k) => {
            if *k >= n {
                return Err(Error::invalid(format!("tangent axis {k} out of range for dimension {n}")));
            }
            let mut e = vec![0.0; n];
            e[*k] = 1.0;
            ftle_max(system, u0, cfg, &e)
        }
        TangentInit::Fixed(v) => ftle_max(system, u0, cfg, &unit(v)?),
        TangentInit::RandomAverage { count, seed } => {
            let dirs = random_directions(n, *count, *seed);
            let runs = dirs
                .iter()
                .map(|d| ftle_max(system, u0, cfg, d))
                .collect::<Result<Vec<_>>>()?;
            let lambda = runs.iter().map(|r| r.lambda).sum::<f64>() / runs.len() as f64;
            let first = runs.into_iter().next().expect("count >= 1");
            Ok(FtleResult { lambda, elapsed: first.elapsed, escape: first.escape })
        }
    }
}

/// Leading-order FTLE bias of explicit Euler on a rotation of frequency
/// `omega`: the one-step amplification is `sqrt(1 + dt^2 omega^2)`, so the
/// exponent picks up `ln(1 + dt^2 omega^2) / (2 dt) ~ omega^2 dt / 2`.
pub fn euler_ftle_bias(omega: f64, dt: f64) -> f64 {
    omega * omega * dt / 2.0
}
