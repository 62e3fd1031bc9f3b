//! Per-mode Volterra system for the electron and ion density modes.
//!
//! With a global equilibrium and the combined kernel K, the density modes satisfy
//!
//! ```text
//! φ_e(t) = a_e(t) − ∫₀ᵗ K(t−τ) d(τ) dτ
//! φ_i(t) = a_i(t) + (m_e/m_i) ∫₀ᵗ K(t−τ) d(τ) dτ,      d = φ_i − φ_e,
//! ```
//!
//! so d solves a scalar equation with kernel (1 + m_e/m_i) K and the weighted sum
//! (m_e/m_i) φ_e + φ_i equals (m_e/m_i) a_e + a_i at all times. The forcings are the free
//! streaming densities a(t) = h̃_in(k, q t).
//!
//! All solvers use the trapezoidal product rule with the newest value implicit.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::SpeciesParams;
use crate::error::{Error, Result};
use crate::kernel::{fit_exponential_bound, BoundClass, ExponentialBound, MemoryKernel};
use crate::perturbation::VelocitySpectrum;

type Signal = Arc<dyn Fn(f64) -> Result<Complex64> + Send + Sync>;

/// Forcing pair (a_e, a_i) of one spatial mode.
#[derive(Clone)]
pub struct ModeForcing {
    pub k: i64,
    a_e: Signal,
    a_i: Signal,
}

impl std::fmt::Debug for ModeForcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModeForcing")
            .field("k", &self.k)
            .finish_non_exhaustive()
    }
}

impl ModeForcing {
    pub fn from_fns<E, I>(k: i64, a_e: E, a_i: I) -> Self
    where
        E: Fn(f64) -> Complex64 + Send + Sync + 'static,
        I: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            k,
            a_e: Arc::new(move |t| Ok(a_e(t))),
            a_i: Arc::new(move |t| Ok(a_i(t))),
        }
    }

    pub fn zero(k: i64) -> Self {
        Self::from_fns(k, |_| Complex64::new(0.0, 0.0), |_| Complex64::new(0.0, 0.0))
    }

    pub fn a_e(&self, t: f64) -> Result<Complex64> {
        (self.a_e)(t)
    }

    pub fn a_i(&self, t: f64) -> Result<Complex64> {
        (self.a_i)(t)
    }

    /// The same forcing multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let (e, i) = (self.a_e.clone(), self.a_i.clone());
        Self {
            k: self.k,
            a_e: Arc::new(move |t| Ok(e(t)? * c)),
            a_i: Arc::new(move |t| Ok(i(t)? * c)),
        }
    }
}

/// a_e(t) = h̃_{e,in}(k, q t) and a_i(t) = h̃_{i,in}(k, q t) with q = k / box_length.
pub fn make_forcing(
    k: i64,
    h_e_in: Arc<dyn VelocitySpectrum>,
    h_i_in: Arc<dyn VelocitySpectrum>,
    box_length: f64,
) -> Result<ModeForcing> {
    if k == 0 {
        return Err(Error::Mode("the k = 0 mode has no Volterra equation".into()));
    }
    if !(box_length > 0.0) {
        return Err(Error::Parameter(format!(
            "box length must be positive, got {box_length}"
        )));
    }
    let q = k as f64 / box_length;
    Ok(ModeForcing {
        k,
        a_e: Arc::new(move |t| h_e_in.spectrum(k, q * t)),
        a_i: Arc::new(move |t| h_i_in.spectrum(k, q * t)),
    })
}

/// Bounds for the two forcing combinations of the decay theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcingBounds {
    /// |(m_e/m_i) a_e + a_i| ≤ α₊ e^{−2πλ₊t}
    pub plus: ExponentialBound,
    /// |a_i − a_e| ≤ α₋ e^{−2πλ₋t}
    pub minus: ExponentialBound,
}

pub const FORCING_FIT_SAMPLES: usize = 4001;

pub fn fit_forcing_bounds(f: &ModeForcing, sp: &SpeciesParams, t_max: f64) -> Result<ForcingBounds> {
    let r = sp.mass_ratio();
    let plus = fit_exponential_bound(|t| Ok(f.a_e(t)? * r + f.a_i(t)?), t_max, FORCING_FIT_SAMPLES)?;
    let minus = fit_exponential_bound(|t| Ok(f.a_i(t)? - f.a_e(t)?), t_max, FORCING_FIT_SAMPLES)?;
    Ok(ForcingBounds { plus, minus })
}

/// Density modes on the grid t_n = t0 + n·dt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSeries {
    pub k: i64,
    pub t0: f64,
    pub dt: f64,
    pub phi_e: Vec<Complex64>,
    pub phi_i: Vec<Complex64>,
}

impl ModeSeries {
    pub fn len(&self) -> usize {
        self.phi_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_e.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.time(n)).collect()
    }

    /// φ_i − φ_e.
    pub fn difference(&self) -> Vec<Complex64> {
        self.phi_e.iter().zip(&self.phi_i).map(|(e, i)| i - e).collect()
    }

    /// (m_e/m_i) φ_e + φ_i.
    pub fn weighted_sum(&self, mass_ratio: f64) -> Vec<Complex64> {
        self.phi_e
            .iter()
            .zip(&self.phi_i)
            .map(|(e, i)| e * mass_ratio + i)
            .collect()
    }
}

pub const MAX_STEPS: f64 = 1e7;

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be positive, got {t_end}")));
    }
    let ratio = t_end / dt;
    if ratio > MAX_STEPS {
        return Err(Error::Parameter(format!("T/dt = {ratio:.3e} exceeds {MAX_STEPS:e}")));
    }
    Ok((ratio - 1e-9).ceil().max(1.0) as usize)
}

fn check_mode(k: i64, forcing: &ModeForcing, kern: &dyn MemoryKernel) -> Result<()> {
    if forcing.k != k {
        return Err(Error::Mode(format!(
            "forcing belongs to k = {} but k = {k} was requested",
            forcing.k
        )));
    }
    if let Some(kk) = kern.mode() {
        if kk != k {
            return Err(Error::Mode(format!(
                "kernel belongs to k = {kk} but k = {k} was requested"
            )));
        }
    }
    Ok(())
}

/// K(j·dt) for j = 0..=n with trailing exact zeros removed.
fn kernel_samples(kern: &dyn MemoryKernel, dt: f64, n: usize) -> Result<Vec<Complex64>> {
    let mut samples = (0..=n).map(|j| kern.eval(j as f64 * dt)).collect::<Result<Vec<_>>>()?;
    while samples.len() > 1 && samples.last() == Some(&Complex64::new(0.0, 0.0)) {
        samples.pop();
    }
    Ok(samples)
}

fn forcing_samples(f: &ModeForcing, dt: f64, n: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let a_e = (0..=n).map(|j| f.a_e(j as f64 * dt)).collect::<Result<Vec<_>>>()?;
    let a_i = (0..=n).map(|j| f.a_i(j as f64 * dt)).collect::<Result<Vec<_>>>()?;
    Ok((a_e, a_i))
}

/// dt·[Σ_{j=1}^{n−1} K_j x_{n−j} + ½ K_n x_0], the explicit part of the product rule.
fn history(kern: &[Complex64], x: &[Complex64], n: usize, dt: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let top = (n - 1).min(kern.len() - 1);
    for j in 1..=top {
        acc += kern[j] * x[n - j];
    }
    if n < kern.len() {
        acc += kern[n] * x[0] * 0.5;
    }
    acc * dt
}

fn implicit_factor(k0: Complex64, weight: f64, dt: f64) -> Result<Complex64> {
    let factor = Complex64::new(1.0, 0.0) - k0 * (0.5 * dt * weight);
    if factor.norm() < 1e-14 {
        return Err(Error::SingularStep(format!("implicit factor {factor} vanishes")));
    }
    Ok(factor)
}

/// Solves the coupled system for (φ_e, φ_i) on [0, T] with the combined kernel.
pub fn solve_mode(
    k: i64,
    forcing: &ModeForcing,
    kern: &dyn MemoryKernel,
    sp: &SpeciesParams,
    t_end: f64,
    dt: f64,
) -> Result<ModeSeries> {
    check_mode(k, forcing, kern)?;
    let n = step_count(t_end, dt)?;
    let r = sp.mass_ratio();
    let ks = kernel_samples(kern, dt, n)?;
    let (a_e, a_i) = forcing_samples(forcing, dt, n)?;
    let factor = implicit_factor(ks[0], 1.0 + r, dt)?;
    let mut phi_e = Vec::with_capacity(n + 1);
    let mut phi_i = Vec::with_capacity(n + 1);
    let mut d = Vec::with_capacity(n + 1);
    phi_e.push(a_e[0]);
    phi_i.push(a_i[0]);
    d.push(a_i[0] - a_e[0]);
    for m in 1..=n {
        let h = history(&ks, &d, m, dt);
        // d_m = (a_i − a_e)_m + (1+r)(h + ½dt K_0 d_m)
        let dm = (a_i[m] - a_e[m] + h * (1.0 + r)) / factor;
        let conv = h + ks[0] * dm * (0.5 * dt);
        let e = a_e[m] - conv;
        let i = a_i[m] + conv * r;
        phi_e.push(e);
        phi_i.push(i);
        d.push(i - e);
    }
    Ok(ModeSeries {
        k,
        t0: 0.0,
        dt,
        phi_e,
        phi_i,
    })
}

/// Scalar solution of the difference equation and the reconstructed densities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferenceSolution {
    pub k: i64,
    pub dt: f64,
    /// φ_i − φ_e
    pub difference: Vec<Complex64>,
    /// (m_e/m_i) φ_e + φ_i, equal to (m_e/m_i) a_e + a_i
    pub weighted_sum: Vec<Complex64>,
    pub series: ModeSeries,
}

/// d = (a_i − a_e) + (1 + m_e/m_i) K ∗ d, then φ_e, φ_i from d and the conserved sum.
pub fn solve_difference_mode(
    k: i64,
    forcing: &ModeForcing,
    kern: &dyn MemoryKernel,
    sp: &SpeciesParams,
    t_end: f64,
    dt: f64,
) -> Result<DifferenceSolution> {
    check_mode(k, forcing, kern)?;
    let n = step_count(t_end, dt)?;
    let r = sp.mass_ratio();
    let weight = 1.0 + r;
    let ks: Vec<Complex64> = kernel_samples(kern, dt, n)?.into_iter().map(|z| z * weight).collect();
    let (a_e, a_i) = forcing_samples(forcing, dt, n)?;
    let factor = implicit_factor(ks[0], 1.0, dt)?;
    let mut d = Vec::with_capacity(n + 1);
    d.push(a_i[0] - a_e[0]);
    for m in 1..=n {
        let h = history(&ks, &d, m, dt);
        d.push((a_i[m] - a_e[m] + h) / factor);
    }
    let sum: Vec<Complex64> = a_e.iter().zip(&a_i).map(|(e, i)| e * r + i).collect();
    let phi_e = sum.iter().zip(&d).map(|(s, d)| (s - d) / weight).collect();
    let phi_i = sum.iter().zip(&d).map(|(s, d)| (s + d * r) / weight).collect();
    Ok(DifferenceSolution {
        k,
        dt,
        difference: d,
        weighted_sum: sum,
        series: ModeSeries {
            k,
            t0: 0.0,
            dt,
            phi_e,
            phi_i,
        },
    })
}

/// General system with separate species kernels:
/// φ_e = a_e + K_e⁰ ∗ (φ_i − φ_e), φ_i = a_i + K_i⁰ ∗ (φ_i − φ_e).
pub fn solve_two_kernel(
    k: i64,
    forcing: &ModeForcing,
    k_e: &dyn MemoryKernel,
    k_i: &dyn MemoryKernel,
    t_end: f64,
    dt: f64,
) -> Result<ModeSeries> {
    check_mode(k, forcing, k_e)?;
    check_mode(k, forcing, k_i)?;
    let n = step_count(t_end, dt)?;
    let ke = kernel_samples(k_e, dt, n)?;
    let ki = kernel_samples(k_i, dt, n)?;
    let (a_e, a_i) = forcing_samples(forcing, dt, n)?;
    let factor = Complex64::new(1.0, 0.0) - (ki[0] - ke[0]) * (0.5 * dt);
    if factor.norm() < 1e-14 {
        return Err(Error::SingularStep(format!("implicit factor {factor} vanishes")));
    }
    let mut phi_e = vec![a_e[0]];
    let mut phi_i = vec![a_i[0]];
    let mut d = vec![a_i[0] - a_e[0]];
    for m in 1..=n {
        let he = history(&ke, &d, m, dt);
        let hi = history(&ki, &d, m, dt);
        let dm = (a_i[m] - a_e[m] + hi - he) / factor;
        let e = a_e[m] + he + ke[0] * dm * (0.5 * dt);
        let i = a_i[m] + hi + ki[0] * dm * (0.5 * dt);
        phi_e.push(e);
        phi_i.push(i);
        d.push(i - e);
    }
    Ok(ModeSeries {
        k,
        t0: 0.0,
        dt,
        phi_e,
        phi_i,
    })
}

/// Hypothesis constants of the decay theorem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremConstants {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(serialize_with = "crate::serialize_rate")]
    pub lambda0: f64,
    pub alpha_plus: f64,
    #[serde(serialize_with = "crate::serialize_rate")]
    pub lambda_plus: f64,
    pub alpha_minus: f64,
    #[serde(serialize_with = "crate::serialize_rate")]
    pub lambda_minus: f64,
    pub kappa: f64,
    #[serde(rename = "Lambda")]
    pub lambda_strip: f64,
    pub lambda_prime: f64,
}

/// Fraction of min(λ₊, λ₋, Λ, λ₀) used as the default claimed rate.
pub const DEFAULT_RATE_FRACTION: f64 = 0.9;

impl TheoremConstants {
    /// Validates κ > 0 and 0 < λ′ < min(λ₊, λ₋, Λ, λ₀).
    pub fn new(
        kernel: &ExponentialBound,
        forcing: &ForcingBounds,
        kappa: f64,
        lambda_strip: f64,
        lambda_prime: f64,
    ) -> Result<Self> {
        let c = Self {
            c0: kernel.amplitude,
            lambda0: kernel.rate,
            alpha_plus: forcing.plus.amplitude,
            lambda_plus: forcing.plus.rate,
            alpha_minus: forcing.minus.amplitude,
            lambda_minus: forcing.minus.rate,
            kappa,
            lambda_strip,
            lambda_prime,
        };
        c.validate()?;
        Ok(c)
    }

    /// Constants with λ′ = 0.9·min(λ₊, λ₋, Λ, λ₀).
    pub fn with_default_rate(
        kernel: &ExponentialBound,
        forcing: &ForcingBounds,
        kappa: f64,
        lambda_strip: f64,
    ) -> Result<Self> {
        let cap = kernel
            .rate
            .min(forcing.plus.rate)
            .min(forcing.minus.rate)
            .min(lambda_strip);
        Self::new(kernel, forcing, kappa, lambda_strip, DEFAULT_RATE_FRACTION * cap)
    }

    pub fn rate_cap(&self) -> f64 {
        self.lambda0
            .min(self.lambda_plus)
            .min(self.lambda_minus)
            .min(self.lambda_strip)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::Precondition(format!(
                "margin κ = {} is not positive",
                self.kappa
            )));
        }
        if !(self.lambda_prime > 0.0 && self.lambda_prime < self.rate_cap()) {
            return Err(Error::Precondition(format!(
                "λ′ = {} must lie in (0, min(λ₊, λ₋, Λ, λ₀) = {})",
                self.lambda_prime,
                self.rate_cap()
            )));
        }
        if [self.c0, self.alpha_plus, self.alpha_minus]
            .iter()
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return Err(Error::Precondition("bound amplitudes must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// Bound on the theorem's decay integral ∫₀^∞ e^{−2π(λ−λ′)t} dt-type factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFactor {
    /// 1/√(4π(λ − λ′)), as displayed with the theorem.
    Displayed,
    /// 1/(2π(λ − λ′)), the exact value of the integral.
    Integral,
}

fn rate_factor(kind: RateFactor, gap: f64) -> f64 {
    if gap.is_infinite() {
        return 0.0;
    }
    match kind {
        RateFactor::Displayed => 1.0 / (4.0 * PI * gap).sqrt(),
        RateFactor::Integral => 1.0 / (2.0 * PI * gap),
    }
}

fn product(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// (C_e, C_i) from the theorem's constant formulas.
pub fn theorem_constants(consts: &TheoremConstants, sp: &SpeciesParams, kind: RateFactor) -> (f64, f64) {
    let r = sp.mass_ratio();
    let lp = consts.lambda_prime;
    let memory = product(
        product(consts.c0, rate_factor(kind, consts.lambda0 - lp)),
        product(consts.alpha_minus, rate_factor(kind, consts.lambda_minus - lp)),
    ) * (1.0 + r)
        / consts.kappa;
    let diff = consts.alpha_minus + memory;
    let c_i = (consts.alpha_plus + r * diff) / (1.0 + r);
    let c_e = (consts.alpha_plus + diff) / (1.0 + r);
    (c_e, c_i)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    #[serde(rename = "C_e")]
    pub c_e: f64,
    #[serde(rename = "C_i")]
    pub c_i: f64,
    pub holds: bool,
    pub violations_e: usize,
    pub violations_i: usize,
    /// max_t |φ|/(C e^{−2πλ′t}); ≤ 1 when the bound holds.
    pub max_ratio_e: f64,
    pub max_ratio_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub constants: TheoremConstants,
    /// Constants as displayed with the theorem.
    pub displayed: BoundCheck,
    /// Constants with the exact integral factor 1/(2π(λ − λ′)).
    pub integral: BoundCheck,
}

impl TheoremCheck {
    pub fn holds(&self) -> bool {
        self.displayed.holds
    }

    pub fn c_e(&self) -> f64 {
        self.displayed.c_e
    }

    pub fn c_i(&self) -> f64 {
        self.displayed.c_i
    }
}

const BOUND_SLACK: f64 = 4.0 * f64::EPSILON;

fn check_series(phi: &[Complex64], series: &ModeSeries, c: f64, lp: f64) -> (usize, f64) {
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for (n, z) in phi.iter().enumerate() {
        let bound = (c.ln() - 2.0 * PI * lp * series.time(n)).exp();
        let mag = z.norm();
        if mag > bound * (1.0 + BOUND_SLACK) {
            violations += 1;
        }
        let ratio = if bound > 0.0 {
            mag / bound
        } else if mag == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        max_ratio = max_ratio.max(ratio);
    }
    (violations, max_ratio)
}

fn bound_check(series: &ModeSeries, consts: &TheoremConstants, sp: &SpeciesParams, kind: RateFactor) -> BoundCheck {
    let (c_e, c_i) = theorem_constants(consts, sp, kind);
    let (violations_e, max_ratio_e) = check_series(&series.phi_e, series, c_e, consts.lambda_prime);
    let (violations_i, max_ratio_i) = check_series(&series.phi_i, series, c_i, consts.lambda_prime);
    BoundCheck {
        c_e,
        c_i,
        holds: violations_e == 0 && violations_i == 0,
        violations_e,
        violations_i,
        max_ratio_e,
        max_ratio_i,
    }
}

/// Checks |φ_e| ≤ C_e e^{−2πλ′t} and |φ_i| ≤ C_i e^{−2πλ′t} at every sample.
pub fn theorem_bound(series: &ModeSeries, consts: &TheoremConstants, sp: &SpeciesParams) -> Result<TheoremCheck> {
    consts.validate()?;
    Ok(TheoremCheck {
        constants: *consts,
        displayed: bound_check(series, consts, sp, RateFactor::Displayed),
        integral: bound_check(series, consts, sp, RateFactor::Integral),
    })
}

/// True when the bound was certified at the top of the rate grid.
pub fn is_super_exponential(b: &ExponentialBound) -> bool {
    b.class == BoundClass::SuperExponential
}
