//! Gauss-Legendre rules and the composite / adaptive integrators built on them.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// An `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

pub(crate) fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

pub(crate) fn gl64() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(64))
}

/// Composite rule: `panels` equal sub-intervals of [a, b], each integrated with `rule`.
pub fn composite<F: FnMut(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let lo = a + p as f64 * h;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

const MAX_DEPTH: usize = 48;

/// Adaptive Gauss-Legendre integration of a real function.
///
/// [a, b] is first cut into `panels` pieces; each piece is bisected until a 16-point
/// estimate and the sum of its two halves agree to `tol` scaled by the piece's share of
/// the full interval.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = gl16();
    let width = b - a;
    let h = width / panels.max(1) as f64;
    let mut total = 0.0;
    for p in 0..panels.max(1) {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels.max(1) { b } else { lo + h };
        let whole = rule.integrate(lo, hi, &mut f);
        total += refine(&mut f, rule, lo, hi, whole, tol, width, 0)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    width: f64,
    depth: usize,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, &mut *f);
    let right = rule.integrate(mid, b, &mut *f);
    let both = left + right;
    let local_tol = tol * ((b - a) / width).abs();
    if (both - whole).abs() <= local_tol.max(4.0 * f64::EPSILON * both.abs()) {
        return Ok(both);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "adaptive bisection did not converge on [{a}, {b}]"
        )));
    }
    Ok(refine(f, rule, a, mid, left, tol, width, depth + 1)? + refine(f, rule, mid, b, right, tol, width, depth + 1)?)
}

/// Adaptive integration of a complex integrand, real and imaginary parts together.
pub fn adaptive_complex<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    tol: f64,
) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let rule = gl16();
    let width = b - a;
    let h = width / panels.max(1) as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels.max(1) {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels.max(1) { b } else { lo + h };
        let whole = rule.integrate_complex(lo, hi, &mut f);
        total += refine_complex(&mut f, rule, lo, hi, whole, tol, width, 0)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine_complex<F: FnMut(f64) -> Complex64>(
    f: &mut F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: Complex64,
    tol: f64,
    width: f64,
    depth: usize,
) -> Result<Complex64> {
    let mid = 0.5 * (a + b);
    let left = rule.integrate_complex(a, mid, &mut *f);
    let right = rule.integrate_complex(mid, b, &mut *f);
    let both = left + right;
    let local_tol = tol * ((b - a) / width).abs();
    if (both - whole).norm() <= local_tol.max(4.0 * f64::EPSILON * both.norm()) {
        return Ok(both);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "adaptive bisection did not converge on [{a}, {b}]"
        )));
    }
    Ok(refine_complex(f, rule, a, mid, left, tol, width, depth + 1)?
        + refine_complex(f, rule, mid, b, right, tol, width, depth + 1)?)
}
