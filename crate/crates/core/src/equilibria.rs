//! Spatially homogeneous equilibrium profiles f(v) and the species parameters.
//!
//! Every profile is stationary under the Vlasov-Poisson flow: it does not depend on x,
//! so free streaming leaves it unchanged, and its charge density is constant, so it
//! produces no field. Analytic families are finite sums of Gaussians. Tabulated
//! profiles use a monotone cubic Hermite interpolant.
//!
//! The velocity Fourier transform uses `∫ f(v) e^{-2πiηv} dv` with no prefactor. Every
//! module in the crate uses the same convention.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quadrature;

/// Half-width of the velocity window, in thermal speeds, used by every velocity quadrature.
pub const TAIL_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Maxwellian,
    TwoStream,
    BumpOnTail,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Gaussian {
    weight: f64,
    center: f64,
    sigma: f64,
}

impl Gaussian {
    fn value(&self, v: f64) -> f64 {
        let x = (v - self.center) / self.sigma;
        self.weight * (-0.5 * x * x).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }

    fn derivatives(&self, v: f64) -> (f64, f64, f64) {
        let s2 = self.sigma * self.sigma;
        let x = v - self.center;
        let f = self.value(v);
        (f, -x / s2 * f, (x * x / (s2 * s2) - 1.0 / s2) * f)
    }

    fn fourier(&self, eta: f64) -> Complex64 {
        let damp = (-2.0 * PI * PI * self.sigma * self.sigma * eta * eta).exp();
        Complex64::from_polar(self.weight * damp, -2.0 * PI * eta * self.center)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Gaussians(Vec<Gaussian>),
    Tabulated(Pchip),
}

/// A homogeneous velocity distribution f(v) ≥ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProfile {
    kind: ProfileKind,
    params: Vec<f64>,
    shape: Shape,
    scale: f64,
    mass: f64,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be finite, got {x}")))
    }
}

/// Normalized Maxwellian of thermal speed `sigma` centered at `drift`.
pub fn make_maxwellian(sigma: f64, drift: f64) -> Result<EquilibriumProfile> {
    check_positive("sigma", sigma)?;
    check_finite("drift", drift)?;
    Ok(EquilibriumProfile::from_gaussians(
        ProfileKind::Maxwellian,
        vec![sigma, drift],
        vec![Gaussian {
            weight: 1.0,
            center: drift,
            sigma,
        }],
    ))
}

/// Two counter-streaming Maxwellian beams at ±separation/2, each carrying half the mass.
pub fn make_two_stream(separation: f64, sigma: f64) -> Result<EquilibriumProfile> {
    check_positive("sigma", sigma)?;
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Parameter(format!(
            "separation must be non-negative, got {separation}"
        )));
    }
    let half = 0.5 * separation;
    Ok(EquilibriumProfile::from_gaussians(
        ProfileKind::TwoStream,
        vec![separation, sigma],
        vec![
            Gaussian {
                weight: 0.5,
                center: -half,
                sigma,
            },
            Gaussian {
                weight: 0.5,
                center: half,
                sigma,
            },
        ],
    ))
}

/// Bulk Maxwellian (weight 1 − fraction) plus a drifting bump (weight fraction).
pub fn make_bump_on_tail(
    sigma: f64,
    bump_fraction: f64,
    bump_center: f64,
    bump_sigma: f64,
) -> Result<EquilibriumProfile> {
    check_positive("sigma", sigma)?;
    check_positive("bump_sigma", bump_sigma)?;
    check_finite("bump_center", bump_center)?;
    if !(0.0..=1.0).contains(&bump_fraction) {
        return Err(Error::Parameter(format!(
            "bump_fraction must lie in [0, 1], got {bump_fraction}"
        )));
    }
    Ok(EquilibriumProfile::from_gaussians(
        ProfileKind::BumpOnTail,
        vec![sigma, bump_fraction, bump_center, bump_sigma],
        vec![
            Gaussian {
                weight: 1.0 - bump_fraction,
                center: 0.0,
                sigma,
            },
            Gaussian {
                weight: bump_fraction,
                center: bump_center,
                sigma: bump_sigma,
            },
        ],
    ))
}

/// Profile given by samples on a strictly increasing velocity grid.
///
/// The mass is the exact integral of the interpolant; it is not renormalized.
pub fn make_tabulated(velocities: Vec<f64>, values: Vec<f64>) -> Result<EquilibriumProfile> {
    if values.iter().any(|&f| f < 0.0) {
        return Err(Error::Parameter("tabulated profile has negative values".into()));
    }
    let interp = Pchip::new(velocities, values)?;
    let mass = interp.integral();
    Ok(EquilibriumProfile {
        kind: ProfileKind::Tabulated,
        params: Vec::new(),
        shape: Shape::Tabulated(interp),
        scale: 1.0,
        mass,
    })
}

impl EquilibriumProfile {
    fn from_gaussians(kind: ProfileKind, params: Vec<f64>, parts: Vec<Gaussian>) -> Self {
        let mass = parts.iter().map(|g| g.weight).sum();
        Self {
            kind,
            params,
            shape: Shape::Gaussians(parts),
            scale: 1.0,
            mass,
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    /// Family parameters in constructor order.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// ∫ f dv.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The same profile multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_positive("scale factor", factor)?;
        let mut out = self.clone();
        out.scale *= factor;
        out.mass *= factor;
        Ok(out)
    }

    /// Velocity interval outside of which the profile is negligible (or zero).
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            Shape::Gaussians(parts) => parts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |acc, g| {
                (
                    acc.0.min(g.center - TAIL_WIDTH * g.sigma),
                    acc.1.max(g.center + TAIL_WIDTH * g.sigma),
                )
            }),
            Shape::Tabulated(p) => p.range(),
        }
    }

    /// Largest thermal width among the components (grid spacing scale for tabulations).
    pub fn thermal_width(&self) -> f64 {
        match &self.shape {
            Shape::Gaussians(parts) => parts.iter().map(|g| g.sigma).fold(0.0, f64::max),
            Shape::Tabulated(p) => {
                let (lo, hi) = p.range();
                (hi - lo) / (2.0 * TAIL_WIDTH)
            }
        }
    }

    /// Smallest thermal width among the components; sets the slowest decay of f̄.
    pub fn narrowest_width(&self) -> f64 {
        match &self.shape {
            Shape::Gaussians(parts) => parts
                .iter()
                .filter(|g| g.weight > 0.0)
                .map(|g| g.sigma)
                .fold(f64::INFINITY, f64::min),
            Shape::Tabulated(_) => self.thermal_width(),
        }
    }

    /// Mass-weighted mean velocity.
    pub fn center(&self) -> f64 {
        match &self.shape {
            Shape::Gaussians(parts) => {
                let w: f64 = parts.iter().map(|g| g.weight).sum();
                if w == 0.0 {
                    0.0
                } else {
                    parts.iter().map(|g| g.weight * g.center).sum::<f64>() / w
                }
            }
            Shape::Tabulated(p) => {
                let (lo, hi) = p.range();
                0.5 * (lo + hi)
            }
        }
    }

    /// Half-width of the velocity band holding the profile: max |center| + 10 thermal widths.
    pub fn velocity_extent(&self) -> f64 {
        match &self.shape {
            Shape::Gaussians(parts) => parts
                .iter()
                .filter(|g| g.weight > 0.0)
                .map(|g| g.center.abs() + 10.0 * g.sigma)
                .fold(0.0, f64::max),
            Shape::Tabulated(p) => {
                let (lo, hi) = p.range();
                lo.abs().max(hi.abs())
            }
        }
    }

    fn tabulated_eval(&self, v: f64) -> Result<(f64, f64, f64)> {
        match &self.shape {
            Shape::Tabulated(p) => p
                .eval(v)
                .map(|(a, b, c)| (a * self.scale, b * self.scale, c * self.scale))
                .ok_or_else(|| {
                    let (lo, hi) = p.range();
                    Error::Domain(format!("v = {v} outside the tabulated range [{lo}, {hi}]"))
                }),
            Shape::Gaussians(_) => unreachable!(),
        }
    }

    /// f, f′ and f″ at `v`. Tabulated profiles fail outside their grid.
    pub fn derivatives(&self, v: f64) -> Result<(f64, f64, f64)> {
        if !v.is_finite() {
            return Err(Error::Domain(format!("velocity must be finite, got {v}")));
        }
        match &self.shape {
            Shape::Gaussians(parts) => Ok(parts.iter().fold((0.0, 0.0, 0.0), |acc, g| {
                let (a, b, c) = g.derivatives(v);
                (acc.0 + a * self.scale, acc.1 + b * self.scale, acc.2 + c * self.scale)
            })),
            Shape::Tabulated(_) => self.tabulated_eval(v),
        }
    }

    pub fn value(&self, v: f64) -> Result<f64> {
        Ok(self.derivatives(v)?.0)
    }

    pub fn derivative(&self, v: f64) -> Result<f64> {
        Ok(self.derivatives(v)?.1)
    }

    pub fn second_derivative(&self, v: f64) -> Result<f64> {
        Ok(self.derivatives(v)?.2)
    }

    /// Derivatives extended by zero outside the tabulated range.
    pub(crate) fn derivatives_or_zero(&self, v: f64) -> (f64, f64, f64) {
        self.derivatives(v).unwrap_or((0.0, 0.0, 0.0))
    }

    /// ∫ f(v) e^{−2πiηv} dv.
    pub fn fourier(&self, eta: f64) -> Complex64 {
        match &self.shape {
            Shape::Gaussians(parts) => parts.iter().map(|g| g.fourier(eta)).sum::<Complex64>() * self.scale,
            Shape::Tabulated(p) => {
                let rule = quadrature::gl16();
                let nodes = p.nodes();
                let mut acc = Complex64::new(0.0, 0.0);
                for w in nodes.windows(2) {
                    // split cells so that each sub-panel sees at most a quarter oscillation
                    let pieces = ((w[1] - w[0]) * eta.abs() * 4.0).ceil().max(1.0) as usize;
                    let h = (w[1] - w[0]) / pieces as f64;
                    for j in 0..pieces {
                        let a = w[0] + j as f64 * h;
                        acc += rule.integrate_complex(a, a + h, |v| {
                            let f = p.eval(v).map(|e| e.0).unwrap_or(0.0);
                            Complex64::from_polar(f, -2.0 * PI * eta * v)
                        });
                    }
                }
                acc * self.scale
            }
        }
    }

    /// Mass by adaptive Gauss-Legendre quadrature of the profile over its support.
    pub fn integrate_mass(&self) -> Result<f64> {
        let (lo, hi) = self.support();
        let panels = ((hi - lo) / self.thermal_width().max(1e-12)).ceil().clamp(1.0, 4096.0) as usize;
        quadrature::adaptive(|v| self.derivatives_or_zero(v).0, lo, hi, panels, 1e-14)
    }
}

pub fn profile_derivative(p: &EquilibriumProfile, v: f64) -> Result<f64> {
    p.derivative(v)
}

pub fn profile_fourier(p: &EquilibriumProfile, eta: f64) -> Result<Complex64> {
    if !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be finite, got {eta}")));
    }
    Ok(p.fourier(eta))
}

/// `|mass(fi) − mass(fe)| ≤ tol`.
pub fn check_quasi_neutrality(fi: &EquilibriumProfile, fe: &EquilibriumProfile, tol: f64) -> bool {
    (fi.mass() - fe.mass()).abs() <= tol
}

/// Masses and charge in normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeciesParams {
    pub m_e: f64,
    pub m_i: f64,
    pub e_charge: f64,
}

impl SpeciesParams {
    pub fn new(m_e: f64, m_i: f64, e_charge: f64) -> Result<Self> {
        check_positive("m_e", m_e)?;
        check_positive("m_i", m_i)?;
        check_positive("e_charge", e_charge)?;
        if m_i < m_e {
            return Err(Error::Parameter(format!("m_i = {m_i} must not be below m_e = {m_e}")));
        }
        Ok(Self { m_e, m_i, e_charge })
    }

    /// Hydrogen plasma: m_e = 1, m_i = 1836, e = 1.
    pub fn hydrogen() -> Self {
        Self {
            m_e: 1.0,
            m_i: 1836.0,
            e_charge: 1.0,
        }
    }

    /// m_e / m_i ∈ (0, 1].
    pub fn mass_ratio(&self) -> f64 {
        self.m_e / self.m_i
    }

    /// 1 + m_e/m_i, the factor in front of the Laplace-transformed kernel.
    pub fn two_species_factor(&self) -> f64 {
        1.0 + self.mass_ratio()
    }

    /// e²/m_e, the electron response coefficient in the kernel.
    pub fn electron_response(&self) -> f64 {
        self.e_charge * self.e_charge / self.m_e
    }
}

impl Default for SpeciesParams {
    fn default() -> Self {
        Self::hydrogen()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxwellian_closed_forms() {
        let m = make_maxwellian(1.0, 0.0).unwrap();
        assert!((m.value(0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(m.derivative(0.0).unwrap(), 0.0);
        let want = -(2.0 * PI).powf(-0.5) * (-0.5f64).exp();
        assert!((m.derivative(1.0).unwrap() - want).abs() < 1e-15);
        assert!((m.fourier(0.0) - 1.0).norm() < 1e-15);
        let f = m.fourier(0.5);
        assert!((f.re - (-PI * PI / 2.0).exp()).abs() < 1e-15);
        assert_eq!(f.im, 0.0);
        assert_eq!(m.mass(), 1.0);
    }

    #[test]
    fn non_positive_sigma_is_rejected() {
        assert!(matches!(make_maxwellian(0.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(make_maxwellian(-1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(make_two_stream(4.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(make_two_stream(-1.0, 1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn two_stream_degenerates_to_maxwellian() {
        let t = make_two_stream(0.0, 1.0).unwrap();
        let m = make_maxwellian(1.0, 0.0).unwrap();
        for i in 0..50 {
            let v = -5.0 + 0.2 * i as f64;
            assert!((t.value(v).unwrap() - m.value(v).unwrap()).abs() < 1e-16);
        }
    }

    #[test]
    fn two_stream_has_a_dip_and_symmetric_derivative() {
        let t = make_two_stream(4.0, 0.5).unwrap();
        assert!(t.value(0.0).unwrap() < t.value(2.0).unwrap());
        assert!(t.derivative(0.0).unwrap().abs() < 1e-300);
        assert!((t.derivative(1.3).unwrap() + t.derivative(-1.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_outside_range_is_a_domain_error() {
        let v: Vec<f64> = (0..101).map(|i| -5.0 + 0.1 * i as f64).collect();
        let f: Vec<f64> = v.iter().map(|x| (-x * x / 2.0).exp()).collect();
        let p = make_tabulated(v, f).unwrap();
        assert!(matches!(p.derivative(5.5), Err(Error::Domain(_))));
        assert!(p.derivative(4.95).is_ok());
        assert!((p.mass() - (2.0 * PI).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn quasi_neutrality() {
        let a = make_maxwellian(1.0, 0.0).unwrap();
        let b = make_maxwellian(2.0, 0.0).unwrap();
        assert!(check_quasi_neutrality(&a, &a, 1e-10));
        assert!(check_quasi_neutrality(&a, &b, 1e-10));
        assert!(!check_quasi_neutrality(&a, &a.scaled(2.0).unwrap(), 1e-10));
    }

    #[test]
    fn species_params_validation() {
        assert!(SpeciesParams::new(1.0, 0.5, 1.0).is_err());
        assert!(SpeciesParams::new(0.0, 1.0, 1.0).is_err());
        let sp = SpeciesParams::hydrogen();
        assert!((sp.mass_ratio() - 1.0 / 1836.0).abs() < 1e-18);
        assert_eq!(SpeciesParams::new(2.0, 2.0, 1.0).unwrap().mass_ratio(), 1.0);
    }

    #[test]
    fn bump_on_tail_mass_and_range_checks() {
        let p = make_bump_on_tail(1.0, 0.1, 4.0, 0.5).unwrap();
        assert!((p.integrate_mass().unwrap() - 1.0).abs() < 1e-12);
        assert!(make_bump_on_tail(1.0, 1.5, 4.0, 0.5).is_err());
    }
}
