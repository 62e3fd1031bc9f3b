//! Decay-rate fits, dispersion roots and trajectory comparison.
//!
//! Rates use the e^{−2πλt} normalization throughout. A root ξ of
//! (1 + m_e/m_i) K^L(ξ) − 1 produces a density mode e^{−2πξ̄t}, so the decay rate it
//! predicts is Re ξ and a root with Re ξ < 0 is a growing mode. K^L is holomorphic in ξ̄;
//! Newton therefore iterates on ξ̄. For real kernels the roots are symmetric about the real
//! axis.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::{EquilibriumProfile, SpeciesParams};
use crate::error::{Error, Result};
use crate::kernel::{
    default_fit_horizon, fit_decay_bound, DecayBound, LaplaceTable, MemoryKernel, ModeKernel, LAPLACE_TAIL_TOL,
};
use crate::penrose::KERNEL_FIT_SAMPLES;
use crate::potential::InteractionPotential;
use crate::volterra::ModeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Least squares through the local maxima of |s|.
    Peaks,
    /// Least squares through every non-zero sample.
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub method: FitMethod,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 8;

/// Fraction of the horizon skipped by the default window.
pub const DEFAULT_SKIP: f64 = 0.1;

pub fn default_window(t_start: f64, t_end: f64) -> (f64, f64) {
    (t_start + DEFAULT_SKIP * (t_end - t_start), t_end)
}

/// Fits |s(t)| ≈ C e^{−2πλt} on `window`.
///
/// Oscillating signals (at least 8 local maxima in the window) are fitted through their
/// peaks; signals with at most one interior maximum through all non-zero samples.
pub fn fit_exponential_envelope(series: &[(f64, Complex64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo <= hi) || series.is_empty() {
        return Err(Error::Range(format!("empty fit window [{lo}, {hi}]")));
    }
    let (first, last) = (series[0].0, series[series.len() - 1].0);
    let slack = 1e-9 * (last - first).abs().max(1.0);
    if lo < first - slack || hi > last + slack {
        return Err(Error::Range(format!(
            "window [{lo}, {hi}] exceeds the series range [{first}, {last}]"
        )));
    }
    let inside: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= lo - slack && *t <= hi + slack)
        .map(|(t, z)| (*t, z.norm()))
        .collect();
    let peaks: Vec<(f64, f64)> = (1..inside.len().saturating_sub(1))
        .filter(|&j| inside[j].1 > inside[j - 1].1 && inside[j].1 >= inside[j + 1].1)
        .map(|j| inside[j])
        .collect();
    let (points, method) = if peaks.len() >= MIN_FIT_POINTS {
        (peaks, FitMethod::Peaks)
    } else if peaks.len() <= 1 {
        let nz: Vec<(f64, f64)> = inside.into_iter().filter(|p| p.1 > 0.0).collect();
        if nz.len() < MIN_FIT_POINTS {
            return Err(Error::InsufficientData(format!(
                "{} non-zero samples in the window, need {MIN_FIT_POINTS}",
                nz.len()
            )));
        }
        (nz, FitMethod::Samples)
    } else {
        return Err(Error::InsufficientData(format!(
            "{} envelope peaks in the window, need {MIN_FIT_POINTS}",
            peaks.len()
        )));
    };
    let (slope, intercept, residual) = least_squares(&points);
    Ok(DecayFit {
        rate: -slope / (2.0 * std::f64::consts::PI),
        amplitude: intercept.exp(),
        residual,
        window,
        method,
        points: points.len(),
    })
}

/// Line through (t, ln y); returns slope, intercept and RMS residual.
fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, y) in points {
        sxy += (t - tm) * (y.ln() - ym);
        sxx += (t - tm) * (t - tm);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * tm;
    let rss: f64 = points
        .iter()
        .map(|&(t, y)| (y.ln() - intercept - slope * t).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Series (t, value) from uniformly sampled values.
pub fn timed(t0: f64, dt: f64, values: &[Complex64]) -> Vec<(f64, Complex64)> {
    values
        .iter()
        .enumerate()
        .map(|(n, &z)| (t0 + n as f64 * dt, z))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionRoot {
    pub xi: Complex64,
    /// Re ξ: decay rate of the mode e^{−2πξ̄t} (negative for growth).
    pub decay_rate: f64,
    pub frequency: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// ξ ↦ factor·K^L(ξ) − 1 with a Laplace table extended on demand.
pub struct DispersionFunction<'a> {
    kern: &'a dyn MemoryKernel,
    bound: DecayBound,
    factor: f64,
    table: Option<(f64, LaplaceTable)>,
}

impl<'a> DispersionFunction<'a> {
    pub fn new(kern: &'a dyn MemoryKernel, bound: DecayBound, factor: f64) -> Self {
        Self {
            kern,
            bound,
            factor,
            table: None,
        }
    }

    fn table_for(&mut self, re: f64) -> Result<&LaplaceTable> {
        if !(re < self.bound.rate) {
            return Err(Error::Divergence(format!(
                "Re ξ = {re} is not below λ₀ = {}",
                self.bound.rate
            )));
        }
        let stale = match &self.table {
            Some((max_re, _)) => re > *max_re,
            None => true,
        };
        if stale {
            let max_re = if self.bound.rate.is_finite() {
                (re + 1.0).min(0.5 * (re + self.bound.rate))
            } else {
                re + 1.0
            };
            let t = LaplaceTable::for_strip(self.kern, &self.bound, max_re, LAPLACE_TAIL_TOL)?;
            self.table = Some((max_re, t));
        }
        Ok(&self.table.as_ref().expect("table just built").1)
    }

    /// F(ξ) and dF/dξ̄.
    pub fn eval(&mut self, xi: Complex64) -> Result<(Complex64, Complex64)> {
        let c = self.factor;
        let t = self.table_for(xi.re)?;
        let v = t.eval(xi)?.value;
        let d = t.eval_conj_derivative(xi)?;
        Ok((v * c - 1.0, d * c))
    }
}

pub const ROOT_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 100;

/// Newton iteration in ξ̄ from `guess` until |F| < 1e-10.
pub fn find_dispersion_root(
    kern: &dyn MemoryKernel,
    bound: &DecayBound,
    factor: f64,
    guess: Complex64,
) -> Result<DispersionRoot> {
    let mut f = DispersionFunction::new(kern, *bound, factor);
    let mut xi = guess;
    let (mut val, mut der) = f.eval(xi).map_err(no_root)?;
    for it in 0..MAX_NEWTON {
        if val.norm() < ROOT_TOL {
            return Ok(DispersionRoot {
                xi,
                decay_rate: xi.re,
                frequency: xi.im,
                residual: val.norm(),
                iterations: it,
            });
        }
        if der.norm() == 0.0 || !der.norm().is_finite() {
            return Err(Error::NoRoot(format!("vanishing derivative at ξ = {xi}")));
        }
        let step = (val / der).conj();
        let mut scale = 1.0;
        loop {
            let trial = xi - step * scale;
            match f.eval(trial) {
                Ok((v, d)) if v.norm() < val.norm() || scale < 1e-6 => {
                    xi = trial;
                    val = v;
                    der = d;
                    break;
                }
                _ if scale < 1e-6 => {
                    return Err(Error::NoRoot(format!(
                        "Newton step left the transform's domain near ξ = {xi}"
                    )));
                }
                _ => scale *= 0.5,
            }
        }
    }
    Err(Error::NoRoot(format!(
        "Newton did not converge from {guess}; last ξ = {xi}, |F| = {:.3e}",
        val.norm()
    )))
}

fn no_root(e: Error) -> Error {
    Error::NoRoot(format!("dispersion function not evaluable at the guess: {e}"))
}

/// Combined kernel and its decay bound for mode k.
pub fn mode_kernel_with_bound(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
) -> Result<(ModeKernel, DecayBound)> {
    let kern = ModeKernel::combined(k, Arc::new(profile.clone()), w, sp)?;
    let horizon = default_fit_horizon(profile, kern.wavenumber());
    let bound = fit_decay_bound(&kern, horizon, KERNEL_FIT_SAMPLES)?;
    Ok((kern, bound))
}

/// Root of (1 + m_e/m_i) K^L(ξ) − 1 near `guess` for the combined kernel of mode k.
pub fn dispersion_root(
    k: i64,
    profile: &EquilibriumProfile,
    w: &InteractionPotential,
    sp: &SpeciesParams,
    guess: Complex64,
) -> Result<DispersionRoot> {
    let (kern, bound) = mode_kernel_with_bound(k, profile, w, sp)?;
    find_dispersion_root(&kern, &bound, sp.two_species_factor(), guess)
}

/// Rectangle of ξ values scanned for starting points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSearch {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub re_steps: usize,
    pub im_steps: usize,
}

impl RootSearch {
    /// Re ξ ∈ [−2, 4] (capped below λ₀), Im ξ ∈ |q|·[−v_max, v_max].
    pub fn default_for(profile: &EquilibriumProfile, wavenumber: f64, bound: &DecayBound) -> Self {
        let im = wavenumber.abs() * profile.velocity_extent();
        let re_max = if bound.rate.is_finite() {
            4.0f64.min(0.8 * bound.rate)
        } else {
            4.0
        };
        Self {
            re_min: -2.0,
            re_max,
            im_min: -im,
            im_max: im,
            re_steps: 49,
            im_steps: 161,
        }
    }

    fn point(&self, i: usize, j: usize) -> Complex64 {
        let re = self.re_min + (self.re_max - self.re_min) * i as f64 / (self.re_steps - 1) as f64;
        let im = self.im_min + (self.im_max - self.im_min) * j as f64 / (self.im_steps - 1) as f64;
        Complex64::new(re, im)
    }
}

/// Root with the smallest decay rate found from the local minima of |F| on a grid.
///
/// Ties between conjugate partners resolve to the root with non-negative frequency.
pub fn dominant_root(
    kern: &dyn MemoryKernel,
    bound: &DecayBound,
    factor: f64,
    search: &RootSearch,
) -> Result<DispersionRoot> {
    if search.re_steps < 3 || search.im_steps < 3 {
        return Err(Error::Parameter("root search grid is degenerate".into()));
    }
    let mut f = DispersionFunction::new(kern, *bound, factor);
    let mut mag = vec![vec![0.0; search.im_steps]; search.re_steps];
    for (i, row) in mag.iter_mut().enumerate() {
        for (j, m) in row.iter_mut().enumerate() {
            *m = f.eval(search.point(i, j))?.0.norm();
        }
    }
    let mut starts = Vec::new();
    for i in 0..search.re_steps {
        for j in 0..search.im_steps {
            let m = mag[i][j];
            let is_min = (i.saturating_sub(1)..=(i + 1).min(search.re_steps - 1)).all(|a| {
                (j.saturating_sub(1)..=(j + 1).min(search.im_steps - 1)).all(|b| (a, b) == (i, j) || mag[a][b] >= m)
            });
            if is_min {
                starts.push((m, search.point(i, j)));
            }
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<DispersionRoot> = None;
    for (_, start) in starts.into_iter().take(16) {
        let Ok(root) = find_dispersion_root(kern, bound, factor, start) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some(b) => {
                root.decay_rate < b.decay_rate - 1e-9
                    || ((root.decay_rate - b.decay_rate).abs() <= 1e-9 && root.frequency > b.frequency)
            }
        };
        if better {
            best = Some(root);
        }
    }
    best.ok_or_else(|| Error::NoRoot("no root found from any grid minimum".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Sup,
    L2,
}

/// Norm of |φ_i − φ_e|_a − |φ_i − φ_e|_b on the common time grid.
///
/// `b` may use a different step; it is then linearly interpolated onto the times of `a`
/// inside the overlap of the two ranges.
pub fn compare_trajectories(a: &ModeSeries, b: &ModeSeries, norm: Norm) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Range("empty trajectory".into()));
    }
    let da: Vec<f64> = a.difference().iter().map(|z| z.norm()).collect();
    let db: Vec<f64> = b.difference().iter().map(|z| z.norm()).collect();
    let (b_lo, b_hi) = (b.t0, b.time(b.len() - 1));
    let tol = 1e-9 * a.dt.min(b.dt);
    let mut diffs = Vec::new();
    for (n, &va) in da.iter().enumerate() {
        let t = a.time(n);
        if t < b_lo - tol || t > b_hi + tol {
            continue;
        }
        let pos = (t - b.t0) / b.dt;
        let near = pos.round();
        let vb = if (pos - near).abs() * b.dt <= tol {
            db[(near as usize).min(db.len() - 1)]
        } else {
            let j = (pos.floor() as usize).min(db.len() - 2);
            let w = pos - j as f64;
            db[j] * (1.0 - w) + db[j + 1] * w
        };
        diffs.push(va - vb);
    }
    if diffs.is_empty() {
        return Err(Error::Range(format!(
            "time ranges [{}, {}] and [{b_lo}, {b_hi}] do not overlap",
            a.t0,
            a.time(a.len() - 1)
        )));
    }
    Ok(match norm {
        Norm::Sup => diffs.iter().map(|d| d.abs()).fold(0.0, f64::max),
        Norm::L2 => (diffs.iter().map(|d| d * d).sum::<f64>() * a.dt).sqrt(),
    })
}
