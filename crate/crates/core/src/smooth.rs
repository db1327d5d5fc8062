//! Scalar functions of one variable with derivatives of arbitrary order.

/// A smooth scalar function `f: R -> R`.
pub trait SmoothFn: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// `order`-th derivative at `x`; `order = 0` is the value.
    fn derivative(&self, order: usize, x: f64) -> f64;
}

/// A function with caller-supplied derivatives: the closure receives the
/// derivative order and the point.
pub struct Analytic<F>(pub F);

impl<F> SmoothFn for Analytic<F>
where
    F: Fn(usize, f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.0)(0, x)
    }

    fn derivative(&self, order: usize, x: f64) -> f64 {
        (self.0)(order, x)
    }
}

/// Derivatives by Richardson-extrapolated central differences.
///
/// The central stencil for the `k`-th derivative has `O(h^2)` error; one
/// Richardson step (`h`, `h/2`) lifts it to `O(h^4)`. Round-off grows like
/// `eps / h^k`, so the default step balances the two at
/// `h = eps^(1/(k+4)) * max(1, |x|)`.
pub struct FiniteDiff<F> {
    f: F,
    base_step: Option<f64>,
}

impl<F> FiniteDiff<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, base_step: None }
    }

    /// Fixed step for every order.
    pub fn with_step(f: F, base_step: f64) -> Self {
        Self { f, base_step: Some(base_step) }
    }

    fn central(&self, order: usize, x: f64, h: f64) -> f64 {
        // sum_i (-1)^i C(k, i) f(x + (k/2 - i) h) / h^k
        let k = order as i32;
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=order {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let offset = (f64::from(k) / 2.0 - i as f64) * h;
            acc += sign * binom * (self.f)(x + offset);
            binom = binom * (order - i) as f64 / (i + 1) as f64;
        }
        acc / h.powi(k)
    }
}

impl<F> SmoothFn for FiniteDiff<F>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn derivative(&self, order: usize, x: f64) -> f64 {
        if order == 0 {
            return (self.f)(x);
        }
        let h = self
            .base_step
            .unwrap_or_else(|| f64::EPSILON.powf(1.0 / (order as f64 + 4.0)) * x.abs().max(1.0));
        let coarse = self.central(order, x, h);
        let fine = self.central(order, x, h / 2.0);
        fine + (fine - coarse) / 3.0
    }
}

impl<T: SmoothFn + ?Sized> SmoothFn for std::sync::Arc<T> {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }

    fn derivative(&self, order: usize, x: f64) -> f64 {
        (**self).derivative(order, x)
    }
}

impl<T: SmoothFn + ?Sized> SmoothFn for Box<T> {
    fn value(&self, x: f64) -> f64 {
        (**self).value(x)
    }

    fn derivative(&self, order: usize, x: f64) -> f64 {
        (**self).derivative(order, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_matches_trig_derivatives() {
        let f = FiniteDiff::new(f64::sin);
        let x: f64 = 0.7;
        let exact = [x.sin(), x.cos(), -x.sin(), -x.cos(), x.sin()];
        for (k, e) in exact.iter().enumerate() {
            assert!((f.derivative(k, x) - e).abs() < 1e-6, "order {k}: {} vs {e}", f.derivative(k, x));
        }
    }

    #[test]
    fn richardson_on_polynomial() {
        let f = FiniteDiff::new(|x: f64| x.powi(3) - 2.0 * x);
        assert!((f.derivative(1, 2.0) - 10.0).abs() < 1e-8);
        assert!((f.derivative(2, 2.0) - 12.0).abs() < 1e-6);
        assert!((f.derivative(3, 2.0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn analytic_passes_order_through() {
        let f = Analytic(|k: usize, x: f64| if k == 0 { x * x } else if k == 1 { 2.0 * x } else if k == 2 { 2.0 } else { 0.0 });
        assert_eq!(f.value(3.0), 9.0);
        assert_eq!(f.derivative(1, 3.0), 6.0);
        assert_eq!(f.derivative(5, 3.0), 0.0);
    }
}
