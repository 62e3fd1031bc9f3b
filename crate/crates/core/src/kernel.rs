//! Volterra memory kernels, their exponential decay bounds and complex Laplace transform.
//!
//! A spatial mode k responds to the charge density through
//!
//! ```text
//! K_e⁰(s) =  (e²/m_e) 4π² Ŵ(k) q² s f̄(q s)
//! K_i⁰(s) = −(e²/m_i) 4π² Ŵ(k) q² s f̄(q s)
//! ```
//!
//! where q = k/L is the physical wavenumber, s = t − τ is the lag and f̄ the velocity
//! Fourier transform of the shared equilibrium. The combined kernel of the
//! global-equilibrium system is K = −K_e⁰ = (m_i/m_e) K_i⁰. For a Maxwellian it is
//! negative, and the density difference obeys d = (a_i − a_e) + (1 + m_e/m_i) K ∗ d.
//!
//! The Laplace transform is K^L(ξ) = ∫₀^∞ e^{2π ξ̄ s} K(s) ds. For Re ξ = λ′ it is the
//! Fourier transform of K e^{2πλ′s}.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::{EquilibriumProfile, SpeciesParams};
use crate::error::{Error, Result};
use crate::interp::UniformSpline;
use crate::potential::InteractionPotential;
use crate::quadrature;

/// A causal kernel s ↦ K(s), s ≥ 0.
pub trait MemoryKernel: Send + Sync {
    fn eval(&self, lag: f64) -> Result<Complex64>;

    /// Spatial mode the kernel belongs to, if it is tied to one.
    fn mode(&self) -> Option<i64> {
        None
    }
}

fn check_lag(lag: f64) -> Result<()> {
    if lag >= 0.0 && lag.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("kernel lag must be finite and ≥ 0, got {lag}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRole {
    /// K = −K_e⁰, the kernel of the global-equilibrium reduction.
    Combined,
    /// K_e⁰.
    Electron,
    /// K_i⁰.
    Ion,
}

#[derive(Debug, Clone)]
pub struct ModeKernel {
    k: i64,
    wavenumber: f64,
    species_scale: f64,
    w_hat_k: f64,
    profile: Arc<EquilibriumProfile>,
    role: KernelRole,
}

impl ModeKernel {
    pub fn new(
        k: i64,
        profile: Arc<EquilibriumProfile>,
        w: &InteractionPotential,
        sp: &SpeciesParams,
        role: KernelRole,
    ) -> Result<Self> {
        let w_hat_k = w.w_hat(k)?;
        let e2 = sp.e_charge * sp.e_charge;
        let species_scale = match role {
            KernelRole::Combined => -e2 / sp.m_e,
            KernelRole::Electron => e2 / sp.m_e,
            KernelRole::Ion => -e2 / sp.m_i,
        };
        Ok(Self {
            k,
            wavenumber: w.wavenumber(k),
            species_scale,
            w_hat_k,
            profile,
            role,
        })
    }

    pub fn combined(
        k: i64,
        profile: Arc<EquilibriumProfile>,
        w: &InteractionPotential,
        sp: &SpeciesParams,
    ) -> Result<Self> {
        Self::new(k, profile, w, sp, KernelRole::Combined)
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn w_hat_k(&self) -> f64 {
        self.w_hat_k
    }

    pub fn species_scale(&self) -> f64 {
        self.species_scale
    }

    pub fn role(&self) -> KernelRole {
        self.role
    }

    pub fn profile(&self) -> &Arc<EquilibriumProfile> {
        &self.profile
    }
}

impl MemoryKernel for ModeKernel {
    fn eval(&self, lag: f64) -> Result<Complex64> {
        check_lag(lag)?;
        let q = self.wavenumber;
        let amp = self.species_scale * 4.0 * PI * PI * self.w_hat_k * q * q * lag;
        Ok(self.profile.fourier(q * lag) * amp)
    }

    fn mode(&self) -> Option<i64> {
        Some(self.k)
    }
}

/// K(lag, k) of the global-equilibrium reduction.
pub fn kernel_combined(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
    lag: f64,
) -> Result<Complex64> {
    ModeKernel::combined(k, Arc::new(profile.clone()), w, sp)?.eval(lag)
}

/// Kernel given by a closure.
pub struct FnKernel<F> {
    f: F,
}

impl<F> FnKernel<F>
where
    F: Fn(f64) -> Complex64 + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> MemoryKernel for FnKernel<F>
where
    F: Fn(f64) -> Complex64 + Send + Sync,
{
    fn eval(&self, lag: f64) -> Result<Complex64> {
        check_lag(lag)?;
        Ok((self.f)(lag))
    }
}

/// Kernel sampled on a uniform lag grid starting at 0, interpolated by a cubic spline.
#[derive(Debug, Clone)]
pub struct TabulatedKernel {
    spline: UniformSpline,
}

impl TabulatedKernel {
    pub fn new(step: f64, samples: Vec<Complex64>) -> Result<Self> {
        Ok(Self {
            spline: UniformSpline::new(0.0, step, samples)?,
        })
    }

    pub fn from_real(step: f64, samples: &[f64]) -> Result<Self> {
        Self::new(step, samples.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn range(&self) -> (f64, f64) {
        self.spline.range()
    }
}

impl MemoryKernel for TabulatedKernel {
    fn eval(&self, lag: f64) -> Result<Complex64> {
        check_lag(lag)?;
        self.spline.eval(lag).ok_or_else(|| {
            let (_, hi) = self.spline.range();
            Error::Extrapolation(format!("lag {lag} beyond the tabulated kernel range [0, {hi}]"))
        })
    }
}

/// Lag horizon over which the kernel of mode k is fitted: 8 decay lengths of f̄(q s).
pub fn default_fit_horizon(profile: &EquilibriumProfile, wavenumber: f64) -> f64 {
    (8.0 / (wavenumber.abs() * profile.narrowest_width())).clamp(1.0, 200.0)
}

/// Samples K(j·dt), j = 0..n.
pub fn sample_kernel(kern: &dyn MemoryKernel, dt: f64, n: usize) -> Result<Vec<Complex64>> {
    (0..n).map(|j| kern.eval(j as f64 * dt)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundClass {
    /// Certified at a rate inside the grid.
    Exponential,
    /// Certified at the top of the rate grid; the true decay is faster than any rate tried.
    SuperExponential,
    /// The function vanishes on every sample; rate is +∞, amplitude 0.
    Vanishing,
}

/// |g(t)| ≤ amplitude · e^{−2π·rate·t}.
///
/// For a kernel these are (C₀, λ₀); for the forcing combinations (α±, λ±).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialBound {
    pub amplitude: f64,
    #[serde(serialize_with = "crate::serialize_rate")]
    pub rate: f64,
    pub class: BoundClass,
}

pub type DecayBound = ExponentialBound;

impl ExponentialBound {
    pub fn vanishing() -> Self {
        Self {
            amplitude: 0.0,
            rate: f64::INFINITY,
            class: BoundClass::Vanishing,
        }
    }

    pub fn c0(&self) -> f64 {
        self.amplitude
    }

    pub fn lambda0(&self) -> f64 {
        self.rate
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if self.class == BoundClass::Vanishing {
            0.0
        } else {
            (self.amplitude.ln() - 2.0 * PI * self.rate * t).exp()
        }
    }
}

pub const RATE_GRID_MIN: f64 = 1e-3;
pub const RATE_GRID_MAX: f64 = 10.0;
pub const RATE_GRID_LEN: usize = 200;

/// Geometric grid of 200 rates in [1e-3, 10], ascending.
pub fn rate_grid() -> Vec<f64> {
    let ratio = (RATE_GRID_MAX / RATE_GRID_MIN).ln() / (RATE_GRID_LEN - 1) as f64;
    (0..RATE_GRID_LEN)
        .map(|j| {
            if j + 1 == RATE_GRID_LEN {
                RATE_GRID_MAX
            } else {
                RATE_GRID_MIN * (ratio * j as f64).exp()
            }
        })
        .collect()
}

/// Fits an exponential envelope |g(t)| ≤ A e^{−2πλt} on [0, t_max].
///
/// A rate counts as certified when the maximum of |g(t)| e^{2πλt} over the samples is not
/// attained at the last sample, so the weighted function has turned over inside the
/// window. The largest certified grid rate wins; the amplitude is the maximum of the
/// weighted function, refined between samples by golden-section search.
pub fn fit_exponential_bound<F>(g: F, t_max: f64, samples: usize) -> Result<ExponentialBound>
where
    F: Fn(f64) -> Result<Complex64>,
{
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
    }
    if samples < 16 {
        return Err(Error::Parameter(format!("need at least 16 samples, got {samples}")));
    }
    let h = t_max / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|j| j as f64 * h).collect();
    let log_abs: Vec<f64> = times
        .iter()
        .map(|&t| g(t).map(|z| z.norm().ln()))
        .collect::<Result<_>>()?;
    if log_abs.iter().all(|&l| l == f64::NEG_INFINITY) {
        return Ok(ExponentialBound::vanishing());
    }
    if log_abs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NoBound("function is not finite on the sample grid".into()));
    }
    let grid = rate_grid();
    for (idx, &rate) in grid.iter().enumerate().rev() {
        let w = 2.0 * PI * rate;
        let weighted: Vec<f64> = log_abs.iter().zip(&times).map(|(l, t)| l + w * t).collect();
        let (arg, max) = weighted.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc },
        );
        if arg + 1 == samples {
            continue;
        }
        let refined = refine_peaks(&g, &times, &weighted, max, w)?;
        let amplitude = refined.exp() * (1.0 + 1e-9);
        if !amplitude.is_finite() {
            continue;
        }
        let class = if idx + 1 == grid.len() {
            BoundClass::SuperExponential
        } else {
            BoundClass::Exponential
        };
        return Ok(ExponentialBound { amplitude, rate, class });
    }
    Err(Error::NoBound(format!(
        "no rate in [{RATE_GRID_MIN}, {RATE_GRID_MAX}] bounds the samples on [0, {t_max}]"
    )))
}

fn refine_peaks<F>(g: &F, times: &[f64], weighted: &[f64], max: f64, w: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let n = times.len();
    let mut best = max;
    let threshold = max - std::f64::consts::LN_2;
    for j in 0..n {
        let v = weighted[j];
        if v < threshold {
            continue;
        }
        let left_ok = j == 0 || weighted[j - 1] <= v;
        let right_ok = j + 1 == n || weighted[j + 1] <= v;
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = times[j.saturating_sub(1)];
        let hi = times[(j + 1).min(n - 1)];
        let phi = |t: f64| -> Result<f64> { Ok(g(t)?.norm().ln() + w * t) };
        best = best.max(golden_max(phi, lo, hi)?);
    }
    Ok(best)
}

fn golden_max<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<f64> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = f(a)?.max(f(b)?);
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    best = best.max(fc).max(fd);
    Ok(best)
}

/// Kernel decay bound (C₀, λ₀) from `samples` points on [0, t_max].
pub fn fit_decay_bound(kern: &dyn MemoryKernel, t_max: f64, samples: usize) -> Result<DecayBound> {
    fit_exponential_bound(|t| kern.eval(t), t_max, samples)
}

/// Upper bound for ∫_{t_max}^∞ |e^{2πξ̄s} K(s)| ds implied by the decay bound.
pub fn laplace_tail_bound(bound: &DecayBound, re_xi: f64, t_max: f64) -> f64 {
    if bound.class == BoundClass::Vanishing {
        return 0.0;
    }
    let gap = 2.0 * PI * (bound.rate - re_xi);
    (bound.amplitude.ln() - gap * t_max).exp() / gap
}

/// Smallest truncation point whose tail bound is below `tol`.
pub fn laplace_t_max(bound: &DecayBound, re_xi: f64, tol: f64) -> Result<f64> {
    check_convergence(bound, re_xi)?;
    if bound.class == BoundClass::Vanishing {
        return Ok(1.0);
    }
    let gap = 2.0 * PI * (bound.rate - re_xi);
    let t = (bound.amplitude / (gap * tol)).ln() / gap;
    Ok(t.max(0.5))
}

fn check_convergence(bound: &DecayBound, re_xi: f64) -> Result<()> {
    if !(re_xi < bound.rate) {
        return Err(Error::Divergence(format!(
            "Re ξ = {re_xi} is not below the kernel decay rate λ₀ = {}",
            bound.rate
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceValue {
    pub value: Complex64,
    pub tail_bound: f64,
    pub t_max: f64,
}

/// Default truncation tolerance of the Laplace integral.
pub const LAPLACE_TAIL_TOL: f64 = 1e-10;

const NODES_PER_UNIT: usize = 64;

/// Kernel samples on the composite Gauss-Legendre nodes of [0, t_max], reusable for any
/// ξ with Re ξ < λ₀.
#[derive(Debug, Clone)]
pub struct LaplaceTable {
    nodes: Vec<f64>,
    weighted: Vec<Complex64>,
    t_max: f64,
    bound: DecayBound,
}

impl LaplaceTable {
    pub fn new(kern: &dyn MemoryKernel, bound: &DecayBound, t_max: f64) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
        }
        let rule = quadrature::gl64();
        let panels = t_max.ceil().max(1.0) as usize;
        let h = t_max / panels as f64;
        let mut nodes = Vec::with_capacity(panels * NODES_PER_UNIT);
        let mut weighted = Vec::with_capacity(panels * NODES_PER_UNIT);
        for p in 0..panels {
            let a = p as f64 * h;
            for (s, w) in rule.mapped(a, a + h) {
                nodes.push(s);
                weighted.push(kern.eval(s)? * w);
            }
        }
        Ok(Self {
            nodes,
            weighted,
            t_max,
            bound: *bound,
        })
    }

    /// Table whose truncation keeps the tail below `tol` for every Re ξ ≤ `max_re_xi`.
    pub fn for_strip(kern: &dyn MemoryKernel, bound: &DecayBound, max_re_xi: f64, tol: f64) -> Result<Self> {
        let t_max = laplace_t_max(bound, max_re_xi, tol)?;
        Self::new(kern, bound, t_max)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn bound(&self) -> &DecayBound {
        &self.bound
    }

    pub fn eval(&self, xi: Complex64) -> Result<LaplaceValue> {
        check_convergence(&self.bound, xi.re)?;
        let z = xi.conj() * (2.0 * PI);
        let value = self
            .nodes
            .iter()
            .zip(&self.weighted)
            .map(|(&s, &wk)| wk * (z * s).exp())
            .sum();
        Ok(LaplaceValue {
            value,
            tail_bound: laplace_tail_bound(&self.bound, xi.re, self.t_max),
            t_max: self.t_max,
        })
    }

    /// ∂K^L/∂ξ̄ = ∫ 2πs e^{2πξ̄s} K(s) ds (K^L is holomorphic in ξ̄).
    pub fn eval_conj_derivative(&self, xi: Complex64) -> Result<Complex64> {
        check_convergence(&self.bound, xi.re)?;
        let z = xi.conj() * (2.0 * PI);
        Ok(self
            .nodes
            .iter()
            .zip(&self.weighted)
            .map(|(&s, &wk)| wk * (2.0 * PI * s) * (z * s).exp())
            .sum())
    }
}

/// K^L(ξ) truncated at `t_max`, with the tail bound implied by the decay bound.
pub fn laplace_transform(
    kern: &dyn MemoryKernel,
    bound: &DecayBound,
    xi: Complex64,
    t_max: f64,
) -> Result<LaplaceValue> {
    check_convergence(bound, xi.re)?;
    LaplaceTable::new(kern, bound, t_max)?.eval(xi)
}
