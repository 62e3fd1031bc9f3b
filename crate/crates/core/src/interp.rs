//! Piecewise-cubic interpolants used for tabulated profiles and kernels.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
///
/// C¹, and never overshoots the data, so non-negative samples give a non-negative
/// interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Parameter(format!(
                "grid has {} points but {} values",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 4 {
            return Err(Error::Parameter("tabulation needs at least 4 points".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "tabulation grid must be finite and strictly increasing".into(),
            ));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self { x, y, d })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn cell(&self, v: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&v) {
            return None;
        }
        let i = self.x.partition_point(|&xi| xi <= v);
        Some(i.clamp(1, self.x.len() - 1) - 1)
    }

    /// Value, first and second derivative at `v`; `None` outside the grid.
    pub fn eval(&self, v: f64) -> Option<(f64, f64, f64)> {
        let i = self.cell(v)?;
        let h = self.x[i + 1] - self.x[i];
        let t = (v - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i] * h, self.d[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val =
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let der = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1)
            / h;
        let sec =
            ((12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * d0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * d1) / (h * h);
        Some((val, der, sec))
    }

    /// Exact integral of the interpolant over its whole grid.
    pub fn integral(&self) -> f64 {
        (0..self.x.len() - 1)
            .map(|i| {
                let h = self.x[i + 1] - self.x[i];
                h * (self.y[i] + self.y[i + 1]) / 2.0 + h * h * (self.d[i] - self.d[i + 1]) / 12.0
            })
            .sum()
    }
}

/// Shape-preserving three-point end slope.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Clamped cubic spline on a uniform grid with complex values.
///
/// End slopes come from fourth-order one-sided differences, so the interpolant keeps
/// O(h⁴) accuracy up to the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSpline {
    start: f64,
    step: f64,
    y: Vec<Complex64>,
    m: Vec<Complex64>,
}

impl UniformSpline {
    pub fn new(start: f64, step: f64, y: Vec<Complex64>) -> Result<Self> {
        let n = y.len();
        if n < 5 {
            return Err(Error::Parameter("spline needs at least 5 samples".into()));
        }
        if !(step > 0.0) || !start.is_finite() {
            return Err(Error::Parameter("spline step must be positive".into()));
        }
        let h = step;
        let d0 = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
        let dn = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4] + 3.0 * y[n - 5]) / (12.0 * h);
        // Tridiagonal system for the second derivatives m_i (clamped spline).
        let mut diag = vec![4.0; n];
        let sub = 1.0;
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        diag[0] = 2.0;
        diag[n - 1] = 2.0;
        rhs[0] = 6.0 * ((y[1] - y[0]) / h - d0) / h;
        rhs[n - 1] = 6.0 * (dn - (y[n - 1] - y[n - 2]) / h) / h;
        for i in 1..n - 1 {
            rhs[i] = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
        }
        // Thomas algorithm.
        let mut c = vec![0.0; n];
        c[0] = sub / diag[0];
        rhs[0] /= diag[0];
        for i in 1..n {
            let denom = diag[i] - sub * c[i - 1];
            c[i] = sub / denom;
            rhs[i] = (rhs[i] - sub * rhs[i - 1]) / denom;
        }
        let mut m = rhs;
        for i in (0..n - 1).rev() {
            let next = m[i + 1];
            m[i] -= c[i] * next;
        }
        Ok(Self { start, step, y, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.start, self.start + self.step * (self.y.len() - 1) as f64)
    }

    pub fn eval(&self, t: f64) -> Option<Complex64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&t) {
            return None;
        }
        let n = self.y.len();
        let pos = (t - self.start) / self.step;
        let i = (pos.floor() as usize).min(n - 2);
        let a = pos - i as f64;
        let b = 1.0 - a;
        let h2 = self.step * self.step;
        Some(
            self.y[i] * b
                + self.y[i + 1] * a
                + (self.m[i] * (b * b * b - b) + self.m[i + 1] * (a * a * a - a)) * (h2 / 6.0),
        )
    }
}
