//! Dispersion function, critical points of the equilibrium and the two-species Penrose
//! criterion, plus the stability margin κ of (1 + m_e/m_i) K^L − 1 over a strip.
//!
//! The margin scan takes ξ = Re ξ + iω directly, so a mode e^{−2πξ̄t} of the density
//! difference corresponds to the velocity −ω/q in the dispersion function. For q > 0 and
//! any Re ξ the boundary value relation reads
//!
//! ```text
//! lim_{λ→0} K^L(λ − iωq) = (e²/m_e) conj(Z(k, ω))
//! ```
//!
//! and for Re ξ < 0 the transform has the Cauchy representation
//! K^L(ξ) = (e²/m_e) Ŵ ∫ f′(v) / (v + iξ̄/q) dv.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{EquilibriumProfile, SpeciesParams};
use crate::error::{Error, Result};
use crate::kernel::{fit_decay_bound, DecayBound, LaplaceTable, MemoryKernel, ModeKernel, LAPLACE_TAIL_TOL};
use crate::potential::InteractionPotential;
use crate::quadrature;

const Z_TOL: f64 = 1e-12;

/// Z(k, ω) = Ŵ(k) [∫ (f′(v) − f′(ω))/(v − ω) dv − iπ f′(ω)].
///
/// The integral runs over an interval symmetric about ω that covers the support, split at
/// v = ω; near the split the difference quotient is replaced by f″ at the midpoint.
pub fn dispersion_z(k: i64, omega: f64, profile: &EquilibriumProfile, w: &InteractionPotential) -> Result<Complex64> {
    let w_hat = w.w_hat(k)?;
    Ok(subtracted_integral(profile, omega)? * w_hat)
}

/// The bracket of Z without the Ŵ factor.
fn subtracted_integral(profile: &EquilibriumProfile, omega: f64) -> Result<Complex64> {
    if !omega.is_finite() {
        return Err(Error::Domain(format!("ω must be finite, got {omega}")));
    }
    let (lo, hi) = profile.support();
    let (_, d_om, _) = profile.derivatives_or_zero(omega);
    let width = profile.thermal_width();
    let radius = (omega - lo).abs().max((hi - omega).abs());
    let near = 1e-5 * width;
    let integrand = |v: f64| {
        let dv = v - omega;
        if dv.abs() < near {
            profile.derivatives_or_zero(omega + 0.5 * dv).2
        } else {
            (profile.derivatives_or_zero(v).1 - d_om) / dv
        }
    };
    let panels = (radius / width).ceil().clamp(1.0, 4096.0) as usize;
    let left = quadrature::adaptive(integrand, omega - radius, omega, panels, Z_TOL)?;
    let right = quadrature::adaptive(integrand, omega, omega + radius, panels, Z_TOL)?;
    Ok(Complex64::new(left + right, -PI * d_om))
}

/// Zeros of f′ in `v_range`: sign changes on an `n_scan`-point grid, refined by bisection
/// to 1e-10. A grid point where f′ vanishes exactly counts when its neighbours differ in
/// sign; flat stretches (for instance underflowed tails) are skipped.
pub fn find_derivative_zeros(profile: &EquilibriumProfile, v_range: (f64, f64), n_scan: usize) -> Result<Vec<f64>> {
    if n_scan < 100 {
        return Err(Error::Parameter(format!("n_scan must be ≥ 100, got {n_scan}")));
    }
    let (lo, hi) = v_range;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(Error::Parameter(format!("invalid scan range [{lo}, {hi}]")));
    }
    let d = |v: f64| profile.derivatives_or_zero(v).1;
    let h = (hi - lo) / (n_scan - 1) as f64;
    let grid: Vec<f64> = (0..n_scan)
        .map(|j| if j + 1 == n_scan { hi } else { lo + j as f64 * h })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&v| d(v)).collect();
    let mut zeros = Vec::new();
    for j in 0..n_scan - 1 {
        let (a, b) = (vals[j], vals[j + 1]);
        if a == 0.0 {
            if j > 0 && vals[j - 1] * b < 0.0 {
                zeros.push(grid[j]);
            }
            continue;
        }
        if a * b < 0.0 {
            zeros.push(bisect(&d, grid[j], grid[j + 1], a));
        }
    }
    Ok(zeros)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Scan resolution used by the criterion.
pub const ZERO_SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenroseReport {
    pub k: i64,
    pub derivative_zeros: Vec<f64>,
    pub criterion_values: Vec<f64>,
    pub stable: bool,
    pub kappa: Option<f64>,
    #[serde(rename = "Lambda")]
    pub lambda: Option<f64>,
}

/// Value of (1 + m_e/m_i)(e²/m_e) Ŵ(k) PV∫ f′(v)/(v − ω) dv at every zero ω of f′.
pub fn penrose_criterion(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
) -> Result<PenroseReport> {
    let w_hat = w.w_hat(k)?;
    let zeros = find_derivative_zeros(profile, profile.support(), ZERO_SCAN_POINTS)?;
    let scale = sp.two_species_factor() * sp.electron_response() * w_hat;
    let criterion_values = zeros
        .iter()
        .map(|&om| Ok(scale * subtracted_integral(profile, om)?.re))
        .collect::<Result<Vec<f64>>>()?;
    let stable = criterion_values.iter().all(|&c| c < 1.0);
    Ok(PenroseReport {
        k,
        derivative_zeros: zeros,
        criterion_values,
        stable,
        kappa: None,
        lambda: None,
    })
}

/// (e²/m_e) Ŵ ∫ f′(v)/(v + iξ̄/q) dv, the transform of the combined kernel for Re ξ < 0.
pub fn laplace_cauchy(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
    xi: Complex64,
) -> Result<Complex64> {
    if !(xi.re < 0.0) {
        return Err(Error::Domain(format!("the Cauchy form needs Re ξ < 0, got {xi}")));
    }
    let w_hat = w.w_hat(k)?;
    let q = w.wavenumber(k);
    let pole = Complex64::new(0.0, 1.0) * xi.conj() / q;
    let (lo, hi) = profile.support();
    let panels = ((hi - lo) / profile.thermal_width().min(pole.im.abs()))
        .ceil()
        .clamp(4.0, 20_000.0) as usize;
    let integral = quadrature::adaptive_complex(
        |v| Complex64::new(profile.derivatives_or_zero(v).1, 0.0) / (v + pole),
        lo,
        hi,
        panels,
        1e-12,
    )?;
    Ok(integral * (sp.electron_response() * w_hat))
}

/// (Re ξ, ω) grid of the margin scan; both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginGrid {
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub re_steps: usize,
    pub om_min: f64,
    pub om_max: f64,
    pub om_steps: usize,
}

impl MarginGrid {
    fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("Λ must be ≥ 0, got {}", self.lambda)));
        }
        if self.re_steps < 2 || self.om_steps < 2 || !(self.om_min < self.om_max) {
            return Err(Error::Parameter("margin grid is degenerate".into()));
        }
        Ok(())
    }

    pub fn point(&self, i: usize, j: usize) -> Complex64 {
        let re = self.lambda * i as f64 / (self.re_steps - 1) as f64;
        let om = self.om_min + (self.om_max - self.om_min) * j as f64 / (self.om_steps - 1) as f64;
        Complex64::new(re, om)
    }

    /// Both densities doubled; existing points stay on the new grid.
    pub fn doubled(&self) -> Self {
        Self {
            re_steps: 2 * self.re_steps - 1,
            om_steps: 2 * self.om_steps - 1,
            ..*self
        }
    }

    pub fn len(&self) -> usize {
        self.re_steps * self.om_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Default ω window |q|·[−v_max, v_max] for a profile.
pub fn default_omega_range(profile: &EquilibriumProfile, w: &InteractionPotential, k: i64) -> (f64, f64) {
    let v_max = profile.velocity_extent();
    let q = w.wavenumber(k).abs();
    (-q * v_max, q * v_max)
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginScan {
    pub kappa: f64,
    pub argmin: Complex64,
    pub factor: f64,
    pub grid: MarginGrid,
    pub laplace_t_max: f64,
    pub max_tail_bound: f64,
    /// K^L at every grid point, Re-major.
    #[serde(skip)]
    pub laplace_samples: Vec<Complex64>,
}

impl MarginScan {
    /// min |c·K^L − 1| recomputed from the stored samples.
    pub fn kappa_with_factor(&self, c: f64) -> f64 {
        self.laplace_samples
            .iter()
            .map(|z| (z * c - 1.0).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn sample(&self, i: usize, j: usize) -> Complex64 {
        self.laplace_samples[i * self.grid.om_steps + j]
    }
}

/// κ = min over the grid of |factor · K^L(ξ) − 1|.
///
/// `factor` is 1 + m_e/m_i for the two-species system; 1 reproduces the one-species
/// condition. Grid points are evaluated in parallel and reduced in index order.
pub fn margin_scan(kern: &dyn MemoryKernel, bound: &DecayBound, factor: f64, grid: MarginGrid) -> Result<MarginScan> {
    grid.check()?;
    let table = LaplaceTable::for_strip(kern, bound, grid.lambda, LAPLACE_TAIL_TOL)?;
    let samples: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            table
                .eval(grid.point(idx / grid.om_steps, idx % grid.om_steps))
                .map(|v| v.value)
        })
        .collect::<Result<_>>()?;
    let mut kappa = f64::INFINITY;
    let mut arg = 0;
    for (idx, z) in samples.iter().enumerate() {
        let m = (z * factor - 1.0).norm();
        if m < kappa {
            kappa = m;
            arg = idx;
        }
    }
    let max_tail_bound = table.eval(Complex64::new(grid.lambda, 0.0))?.tail_bound;
    Ok(MarginScan {
        kappa,
        argmin: grid.point(arg / grid.om_steps, arg % grid.om_steps),
        factor,
        grid,
        laplace_t_max: table.t_max(),
        max_tail_bound,
        laplace_samples: samples,
    })
}

/// Doubles the grid until κ changes by less than 1 % (at most `max_doublings` times).
pub fn refined_margin_scan(
    kern: &dyn MemoryKernel,
    bound: &DecayBound,
    factor: f64,
    grid: MarginGrid,
    max_doublings: usize,
) -> Result<MarginScan> {
    let mut scan = margin_scan(kern, bound, factor, grid)?;
    for _ in 0..max_doublings {
        let next = margin_scan(kern, bound, factor, scan.grid.doubled())?;
        let change = (next.kappa - scan.kappa).abs();
        scan = next;
        if change < 0.01 * scan.kappa.abs() || change == 0.0 {
            break;
        }
    }
    Ok(scan)
}

/// Horizon and sample count used to fit kernel decay bounds by default.
pub const KERNEL_FIT_SAMPLES: usize = 4001;

/// κ for the combined kernel of mode k over 0 ≤ Re ξ ≤ Λ, ω ∈ `om_range`.
#[allow(clippy::too_many_arguments)]
pub fn penrose_margin(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
    lambda: f64,
    re_steps: usize,
    om_range: (f64, f64),
    om_steps: usize,
    kern_tmax: f64,
) -> Result<f64> {
    let kern = ModeKernel::combined(k, Arc::new(profile.clone()), w, sp)?;
    let bound = fit_decay_bound(&kern, kern_tmax, KERNEL_FIT_SAMPLES)?;
    let grid = MarginGrid {
        lambda,
        re_steps,
        om_min: om_range.0,
        om_max: om_range.1,
        om_steps,
    };
    Ok(margin_scan(&kern, &bound, sp.two_species_factor(), grid)?.kappa)
}
