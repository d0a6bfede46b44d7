//! Periodic cubic interpolation.

use nalgebra::{DMatrix, DVector};

/// C2 periodic cubic spline through `(x_i, y_i)` with period `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    period: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("need at least 3 knots")]
    TooFew,
    #[error("knots must be strictly increasing within one period")]
    Unordered,
}

impl PeriodicSpline {
    pub fn new(x: &[f64], y: &[f64], period: f64) -> Result<Self, SplineError> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(SplineError::TooFew);
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || !(x[n - 1] - x[0] < period) {
            return Err(SplineError::Unordered);
        }
        let h = |i: usize| if i + 1 < n { x[i + 1] - x[i] } else { x[0] + period - x[n - 1] };
        let mut a = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            let ip = (i + 1) % n;
            let im = (i + n - 1) % n;
            let (hm, hi) = (h(im), h(i));
            a[(i, im)] += hm / 6.0;
            a[(i, i)] += (hm + hi) / 3.0;
            a[(i, ip)] += hi / 6.0;
            rhs[i] = (y[ip] - y[i]) / hi - (y[i] - y[im]) / hm;
        }
        let m = a.lu().solve(&rhs).expect("periodic spline system is diagonally dominant");
        Ok(Self { x: x.to_vec(), y: y.to_vec(), m: m.iter().copied().collect(), period })
    }

    /// Knots uniformly spread over one period starting at `x0`.
    pub fn uniform(x0: f64, y: &[f64], period: f64) -> Result<Self, SplineError> {
        let n = y.len();
        let x: Vec<f64> = (0..n).map(|i| x0 + period * i as f64 / n as f64).collect();
        Self::new(&x, y, period)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let n = self.x.len();
        let mut s = (t - self.x[0]).rem_euclid(self.period) + self.x[0];
        if s >= self.x[0] + self.period {
            s = self.x[0];
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let h = if i + 1 < n { self.x[i + 1] - self.x[i] } else { self.x[0] + self.period - self.x[n - 1] };
        (i, s - self.x[i], h)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, u, h) = self.locate(t);
        let j = (i + 1) % self.x.len();
        let (a, b) = ((h - u) / h, u / h);
        a * self.y[i] + b * self.y[j] + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[j]) * h * h / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let (i, u, h) = self.locate(t);
        let j = (i + 1) % self.x.len();
        let (a, b) = ((h - u) / h, u / h);
        (self.y[j] - self.y[i]) / h + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[j]) * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interpolates_knots_and_wraps() {
        let x = [0.0, 0.2, 0.45, 0.7, 0.9];
        let y = [1.0, -0.5, 0.3, 2.0, 0.1];
        let s = PeriodicSpline::new(&x, &y, 1.0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-12);
            assert!((s.eval(xi + 3.0) - yi).abs() < 1e-12);
        }
        // continuity of value and slope across the period seam
        let e = 1e-9;
        assert!((s.eval(1.0 - e) - s.eval(e)).abs() < 1e-7);
        assert!((s.derivative(1.0 - e) - s.derivative(e)).abs() < 1e-6);
    }

    #[test]
    fn reproduces_sine() {
        let n = 64;
        let y: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let s = PeriodicSpline::uniform(0.0, &y, 1.0).unwrap();
        for k in 0..100 {
            let t = k as f64 / 100.0 + 0.003;
            assert!((s.eval(t) - (2.0 * PI * t).sin()).abs() < 1e-6);
            assert!((s.derivative(t) - 2.0 * PI * (2.0 * PI * t).cos()).abs() < 1e-3);
        }
    }
}
