//! Initial perturbations h_in(x, v) given through their double Fourier transform h̃_in(k, η).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::equilibria::EquilibriumProfile;
use crate::error::{Error, Result};

/// A perturbation whose transform h̃(k, η) can be evaluated at any real η.
pub trait VelocitySpectrum: Send + Sync {
    fn spectrum(&self, k: i64, eta: f64) -> Result<Complex64>;

    /// Non-zero spatial modes carried by the perturbation, sorted.
    fn modes(&self) -> Vec<i64>;
}

#[derive(Debug, Clone)]
struct Term {
    k: i64,
    coefficient: Complex64,
    profile: EquilibriumProfile,
}

/// Finite sum of real separable terms c·e^{2πi q x}·g(v) + c.c. with k ≥ 1.
///
/// The transform of one term is h̃(k, η) = c ḡ(η) and h̃(−k, η) = c̄ conj(ḡ(−η)).
#[derive(Debug, Clone, Default)]
pub struct SeparablePerturbation {
    terms: Vec<Term>,
}

impl SeparablePerturbation {
    pub fn zero() -> Self {
        Self::default()
    }

    /// ε cos(2π q x) g(v) for each listed mode.
    pub fn cosine(amplitude: f64, modes: &[i64], profile: &EquilibriumProfile) -> Result<Self> {
        let mut p = Self::zero();
        for &k in modes {
            p = p.with_term(k, Complex64::new(0.5 * amplitude, 0.0), profile)?;
        }
        Ok(p)
    }

    /// Adds c·e^{2πi q x}·g(v) + c.c.; a negative k stores the conjugate term at |k|.
    pub fn with_term(mut self, k: i64, coefficient: Complex64, profile: &EquilibriumProfile) -> Result<Self> {
        if k == 0 {
            return Err(Error::Mode(
                "perturbations must integrate to zero in x; k = 0 is not allowed".into(),
            ));
        }
        if !(coefficient.re.is_finite() && coefficient.im.is_finite()) {
            return Err(Error::Parameter("perturbation coefficient must be finite".into()));
        }
        let (k, coefficient, profile) = if k > 0 {
            (k, coefficient, profile.clone())
        } else {
            (-k, coefficient.conj(), profile.clone())
        };
        self.terms.push(Term {
            k,
            coefficient,
            profile,
        });
        Ok(self)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == Complex64::new(0.0, 0.0))
    }

    /// h_in(x, v) in physical space, for checks against the transform.
    pub fn eval(&self, x_over_length: f64, v: f64) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * t.k as f64 * x_over_length);
            acc += 2.0 * (t.coefficient * phase).re * t.profile.value(v)?;
        }
        Ok(acc)
    }
}

impl VelocitySpectrum for SeparablePerturbation {
    fn spectrum(&self, k: i64, eta: f64) -> Result<Complex64> {
        if !eta.is_finite() {
            return Err(Error::Domain(format!("eta must be finite, got {eta}")));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            if t.k == k {
                acc += t.coefficient * t.profile.fourier(eta);
            } else if t.k == -k {
                acc += (t.coefficient * t.profile.fourier(-eta)).conj();
            }
        }
        Ok(acc)
    }

    fn modes(&self) -> Vec<i64> {
        let mut ks: Vec<i64> = self.terms.iter().flat_map(|t| [-t.k, t.k]).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{make_maxwellian, make_two_stream};

    #[test]
    fn cosine_maxwellian_closed_form() {
        let m = make_maxwellian(1.0, 0.0).unwrap();
        let p = SeparablePerturbation::cosine(1e-3, &[1], &m).unwrap();
        assert_eq!(p.modes(), vec![-1, 1]);
        for eta in [0.0, 0.3, -1.2] {
            let want = 0.5e-3 * (-2.0 * PI * PI * eta * eta).exp();
            for k in [1, -1] {
                let got = p.spectrum(k, eta).unwrap();
                assert!((got.re - want).abs() < 1e-18 && got.im.abs() < 1e-18);
            }
            assert_eq!(p.spectrum(2, eta).unwrap(), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn reality_of_the_transform() {
        let g = make_maxwellian(0.7, 0.4).unwrap();
        let p = SeparablePerturbation::zero()
            .with_term(2, Complex64::new(0.3, -0.2), &g)
            .unwrap()
            .with_term(1, Complex64::new(0.1, 0.0), &make_two_stream(2.0, 0.5).unwrap())
            .unwrap();
        for k in [1, 2] {
            for eta in [0.0, 0.25, 1.7] {
                let a = p.spectrum(k, eta).unwrap();
                let b = p.spectrum(-k, -eta).unwrap();
                assert!((a - b.conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_mode_is_rejected() {
        let m = make_maxwellian(1.0, 0.0).unwrap();
        assert!(SeparablePerturbation::cosine(1.0, &[0], &m).is_err());
        assert!(SeparablePerturbation::zero().is_zero());
    }
}
