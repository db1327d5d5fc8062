//! First-order period map for time-periodic perturbations of an integrable
//! flow in action-angle form,
//!
//! ```text
//! I'       = eps F_0(I, theta, t)
//! theta_i' = f_i(I) + eps F_i(I, theta, t),   i = 1..m,
//! ```
//!
//! with forcing period `T = 2 pi / omega`. To first order in `eps` the time-`T`
//! map is
//!
//! ```text
//! I       -> I + eps F~_0(I, theta)
//! theta_i -> theta_i + 2 pi f_i(I) / omega + eps F~_i(I, theta)
//! ```
//!
//! where the `F~` are integrals of the perturbation along the unperturbed
//! orbit. [`direct_flow_map`] integrates the full system with RK4 and is the
//! reference the first-order map is checked against.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{cumulative_simpson, richardson, simpson};
use crate::smooth::SmoothFn;

/// Perturbation component `F_i(I, theta, t)`.
pub type PerturbationFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// Default relative tolerance for the Richardson check on `F~`.
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
pub const DEFAULT_QUAD_NODES: usize = 1024;

const PERIODICITY_TOL: f64 = 1e-12;

/// Unperturbed action-angle flow `I' = 0, theta_i' = f_i(I)`.
#[derive(Clone)]
pub struct ActionAngleModel {
    frequencies: Vec<Arc<dyn SmoothFn>>,
    omega: f64,
    action_interval: (f64, f64),
}

impl std::fmt::Debug for ActionAngleModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActionAngleModel")
            .field("angles", &self.frequencies.len())
            .field("omega", &self.omega)
            .field("action_interval", &self.action_interval)
            .finish()
    }
}

impl ActionAngleModel {
    /// `action_interval` is the open interval `Q = (lo, hi)`.
    pub fn new(frequencies: Vec<Arc<dyn SmoothFn>>, omega: f64, action_interval: (f64, f64)) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::invalid("action-angle model needs at least one angle"));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::invalid(format!("forcing frequency must be positive, got {omega}")));
        }
        let (lo, hi) = action_interval;
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty action interval ({lo}, {hi})")));
        }
        let model = Self { frequencies, omega, action_interval };
        // Nonvanishing frequency vector, spot-checked across Q.
        for k in 1..16 {
            let i = lo + (hi - lo) * k as f64 / 16.0;
            let s: f64 = model.frequencies.iter().map(|f| f.value(i).powi(2)).sum();
            if s == 0.0 || !s.is_finite() {
                return Err(Error::invalid(format!("frequency vector vanishes or is non-finite at I = {i}")));
            }
        }
        Ok(model)
    }

    pub fn angles(&self) -> usize {
        self.frequencies.len()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn action_interval(&self) -> (f64, f64) {
        self.action_interval
    }

    pub fn frequency(&self, i: usize, action: f64) -> f64 {
        self.frequencies[i].value(action)
    }

    pub fn frequency_derivative(&self, i: usize, action: f64) -> f64 {
        self.frequencies[i].derivative(1, action)
    }

    fn contains(&self, action: f64) -> bool {
        action > self.action_interval.0 && action < self.action_interval.1
    }
}

/// Perturbation components `F_0..F_m`.
#[derive(Clone)]
pub struct PerturbationDef {
    components: Vec<Arc<PerturbationFn>>,
}

impl PerturbationDef {
    pub fn new(components: Vec<Arc<PerturbationFn>>) -> Self {
        Self { components }
    }

    /// `F == 0` for a model with `angles` angles.
    pub fn zero(angles: usize) -> Self {
        let z: Arc<PerturbationFn> = Arc::new(|_, _, _| 0.0);
        Self { components: vec![z; angles + 1] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    #[inline]
    pub fn eval(&self, i: usize, action: f64, theta: &[f64], t: f64) -> f64 {
        (self.components[i])(action, theta, t)
    }

    /// Spot-check `2 pi`-periodicity in each angle and `T`-periodicity in `t`.
    fn check_periodic(&self, model: &ActionAngleModel) -> Result<()> {
        let m = model.angles();
        let (lo, hi) = model.action_interval;
        let period = model.period();
        let probes = [(0.31, 0.17), (0.62, 1.9), (0.88, 4.4)];
        for (frac, phase) in probes {
            let action = lo + (hi - lo) * frac;
            let theta: Vec<f64> = (0..m).map(|j| phase + 0.7 * j as f64).collect();
            let t = 0.37 * period * frac;
            for (i, comp) in self.components.iter().enumerate() {
                let base = comp(action, &theta, t);
                let scale = base.abs().max(1.0);
                let shifted_t = comp(action, &theta, t + period);
                if (shifted_t - base).abs() > PERIODICITY_TOL * scale {
                    return Err(Error::NotPeriodic(format!("F_{i} is not periodic in t with period {period}")));
                }
                for j in 0..m {
                    let mut th = theta.clone();
                    th[j] += TAU;
                    if (comp(action, &th, t) - base).abs() > PERIODICITY_TOL * scale {
                        return Err(Error::NotPeriodic(format!("F_{i} is not 2pi-periodic in angle {j}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Image of a point under a period map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapImage {
    pub action: f64,
    /// Angles reduced to `[0, 2 pi)`.
    pub angles: Vec<f64>,
    /// The image action left the interval `Q`.
    pub left_domain: bool,
}

/// First-order period map. `F~` is evaluated on demand by quadrature.
#[derive(Clone)]
pub struct FirstOrderMap {
    model: ActionAngleModel,
    pert: PerturbationDef,
    quad_nodes: usize,
    quad_tol: f64,
}

impl std::fmt::Debug for FirstOrderMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FirstOrderMap")
            .field("model", &self.model)
            .field("quad_nodes", &self.quad_nodes)
            .field("quad_tol", &self.quad_tol)
            .finish()
    }
}

pub fn build_first_order_map(
    model: &ActionAngleModel,
    pert: &PerturbationDef,
    quad_nodes: usize,
) -> Result<FirstOrderMap> {
    if quad_nodes < 64 || quad_nodes % 2 != 0 {
        return Err(Error::invalid(format!("quad_nodes must be even and >= 64, got {quad_nodes}")));
    }
    if pert.len() != model.angles() + 1 {
        return Err(Error::DimensionMismatch { expected: model.angles() + 1, got: pert.len() });
    }
    pert.check_periodic(model)?;
    Ok(FirstOrderMap { model: model.clone(), pert: pert.clone(), quad_nodes, quad_tol: DEFAULT_QUAD_TOL })
}

impl FirstOrderMap {
    pub fn with_quad_tol(mut self, tol: f64) -> Self {
        self.quad_tol = tol;
        self
    }

    pub fn model(&self) -> &ActionAngleModel {
        &self.model
    }

    pub fn quad_nodes(&self) -> usize {
        self.quad_nodes
    }

    /// Unperturbed map `(I, theta) -> (I, theta + 2 pi f(I) / omega)`.
    pub fn base_map(&self, action: f64, theta: &[f64]) -> (f64, Vec<f64>) {
        let omega = self.model.omega;
        let angles = theta
            .iter()
            .enumerate()
            .map(|(i, th)| th + TAU * self.model.frequency(i, action) / omega)
            .collect();
        (action, angles)
    }

    /// `F~_0..F~_m` with `n` quadrature intervals, no validation.
    pub fn tilde_f_raw(&self, action: f64, theta: &[f64], n: usize) -> Vec<f64> {
        let m = self.model.angles();
        let period = self.model.period();
        let h = period / n as f64;
        let freqs: Vec<f64> = (0..m).map(|i| self.model.frequency(i, action)).collect();

        let mut samples = vec![vec![0.0; n + 1]; m + 1];
        let mut phase = vec![0.0; m];
        for k in 0..=n {
            let t = k as f64 * h;
            for j in 0..m {
                phase[j] = freqs[j] * t + theta[j];
            }
            for (i, row) in samples.iter_mut().enumerate() {
                row[k] = self.pert.eval(i, action, &phase, t);
            }
        }

        let inner = cumulative_simpson(&samples[0], h);
        let double = simpson(&inner, h);
        let mut out = Vec::with_capacity(m + 1);
        out.push(simpson(&samples[0], h));
        for i in 1..=m {
            out.push(self.model.frequency_derivative(i - 1, action) * double + simpson(&samples[i], h));
        }
        out
    }

    /// `F~_0..F~_m` at `(I, theta)`, Richardson-extrapolated from `N` and
    /// `2N` intervals. Fails if the two disagree beyond the tolerance.
    pub fn tilde_f(&self, action: f64, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.model.angles() {
            return Err(Error::DimensionMismatch { expected: self.model.angles(), got: theta.len() });
        }
        let coarse = self.tilde_f_raw(action, theta, self.quad_nodes);
        let fine = self.tilde_f_raw(action, theta, 2 * self.quad_nodes);
        coarse
            .iter()
            .zip(&fine)
            .map(|(&c, &f)| richardson(c, f).check(self.quad_tol))
            .collect()
    }

    /// One application of the first-order map. At `eps = 0` no quadrature is
    /// performed and the base map is returned exactly.
    pub fn apply(&self, action: f64, theta: &[f64], epsilon: f64) -> Result<MapImage> {
        if theta.len() != self.model.angles() {
            return Err(Error::DimensionMismatch { expected: self.model.angles(), got: theta.len() });
        }
        if !self.model.contains(action) {
            return Err(Error::invalid(format!(
                "action {action} outside Q = ({}, {})",
                self.model.action_interval.0, self.model.action_interval.1
            )));
        }
        let theta: Vec<f64> = theta.iter().map(|t| wrap_angle(*t)).collect();
        let (_, base) = self.base_map(action, &theta);
        let (new_action, angles) = if epsilon == 0.0 {
            (action, base)
        } else {
            let tf = self.tilde_f(action, &theta)?;
            let angles = base.iter().zip(&tf[1..]).map(|(b, f)| b + epsilon * f).collect();
            (action + epsilon * tf[0], angles)
        };
        Ok(MapImage {
            action: new_action,
            angles: angles.into_iter().map(wrap_angle).collect(),
            left_domain: !self.model.contains(new_action),
        })
    }
}

/// Convenience wrapper for [`FirstOrderMap::apply`].
pub fn apply_map(map: &FirstOrderMap, action: f64, theta: &[f64], epsilon: f64) -> Result<MapImage> {
    map.apply(action, theta, epsilon)
}

/// Reduce an angle to `[0, 2 pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed angular difference in `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// Default oracle step count over one period.
pub const DEFAULT_ORACLE_STEPS: usize = 100_000;

/// Time-`T` map of the full perturbed system by fixed-step RK4.
///
/// `dt_fine` is rounded down so that an integer number of steps lands on
/// `T`; it must not exceed `T / 10^4`.
pub fn direct_flow_map(
    model: &ActionAngleModel,
    pert: &PerturbationDef,
    action: f64,
    theta: &[f64],
    epsilon: f64,
    dt_fine: f64,
) -> Result<MapImage> {
    let m = model.angles();
    if theta.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: theta.len() });
    }
    if pert.len() != m + 1 {
        return Err(Error::DimensionMismatch { expected: m + 1, got: pert.len() });
    }
    let period = model.period();
    if !(dt_fine > 0.0 && dt_fine <= period / 1e4 * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("dt_fine must be in (0, T/1e4], got {dt_fine}")));
    }
    let steps = (period / dt_fine).ceil() as usize;
    let h = period / steps as f64;

    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        let (a, th) = (y[0], &y[1..]);
        out[0] = epsilon * pert.eval(0, a, th, t);
        for i in 0..m {
            out[i + 1] = model.frequency(i, a) + epsilon * pert.eval(i + 1, a, th, t);
        }
    };

    let dim = m + 1;
    let mut y = Vec::with_capacity(dim);
    y.push(action);
    y.extend_from_slice(theta);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for s in 0..steps {
        let t = s as f64 * h;
        rhs(t, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(MapImage {
        action: y[0],
        angles: y[1..].iter().map(|t| wrap_angle(*t)).collect(),
        left_domain: !model.contains(y[0]),
    })
}

/// Euclidean distance between two map images, with angle differences taken
/// modulo `2 pi`.
pub fn image_distance(a: &MapImage, b: &MapImage) -> f64 {
    let mut s = (a.action - b.action).powi(2);
    for (x, y) in a.angles.iter().zip(&b.angles) {
        s += angle_diff(*x, *y).powi(2);
    }
    s.sqrt()
}

/// One row of the `epsilon` scaling study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub map: MapImage,
    pub oracle: MapImage,
    pub error: f64,
}

/// Compare the first-order map against the oracle for each `epsilon`.
pub fn scaling_study(
    map: &FirstOrderMap,
    pert: &PerturbationDef,
    action: f64,
    theta: &[f64],
    epsilons: &[f64],
    dt_fine: f64,
) -> Result<Vec<ScalingRow>> {
    epsilons
        .iter()
        .map(|&eps| {
            let m = map.apply(action, theta, eps)?;
            let o = direct_flow_map(map.model(), pert, action, theta, eps, dt_fine)?;
            let error = image_distance(&m, &o);
            Ok(ScalingRow { epsilon: eps, map: m, oracle: o, error })
        })
        .collect()
}

/// The single-angle sine example: `f(I) = I`, `omega = 1`, `F_0 = sin(theta)`,
/// `F_1 = 0`, on `Q = (0.1, 2)` (the frequency must not vanish on `Q`).
pub fn sine_example() -> (ActionAngleModel, PerturbationDef) {
    use crate::smooth::Analytic;
    let f: Arc<dyn SmoothFn> = Arc::new(Analytic(|k: usize, x: f64| match k {
        0 => x,
        1 => 1.0,
        _ => 0.0,
    }));
    let model = ActionAngleModel::new(vec![f], 1.0, (0.1, 2.0)).expect("valid model");
    let f0: Arc<PerturbationFn> = Arc::new(|_, th: &[f64], _| th[0].sin());
    let f1: Arc<PerturbationFn> = Arc::new(|_, _, _| 0.0);
    (model, PerturbationDef::new(vec![f0, f1]))
}
