//! Interaction potential Ŵ(k), electric field modes and electric energy.
//!
//! The torus has length `box_length` (1 by default) and spatial modes are indexed by
//! integers k. The physical wavenumber is q = k / box_length; Ŵ is tabulated against
//! the integer index. The k = 0 mode never carries a field, by global neutrality.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PotentialKind {
    Coulomb,
    Screened { alpha: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionPotential {
    kind: PotentialKind,
    box_length: f64,
    // keyed by |k| ≥ 1; Ŵ(−k) = Ŵ(k)
    table: BTreeMap<u64, f64>,
}

fn check_box(box_length: f64) -> Result<()> {
    if box_length > 0.0 && box_length.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "box length must be positive, got {box_length}"
        )))
    }
}

/// Coulomb multiplier Ŵ(k) = 1/k² for 1 ≤ |k| ≤ k_max on the unit torus.
pub fn coulomb_potential(k_max: i64) -> Result<InteractionPotential> {
    InteractionPotential::coulomb(k_max, 1.0)
}

impl InteractionPotential {
    pub fn coulomb(k_max: i64, box_length: f64) -> Result<Self> {
        Self::build(PotentialKind::Coulomb, k_max, box_length, |q| 1.0 / (q * q))
    }

    /// Ŵ(k) = 1/(q² + α²).
    pub fn screened(alpha: f64, k_max: i64, box_length: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("screening alpha must be ≥ 0, got {alpha}")));
        }
        Self::build(PotentialKind::Screened { alpha }, k_max, box_length, |q| {
            1.0 / (q * q + alpha * alpha)
        })
    }

    /// User table `|k| → Ŵ(k)`; the sign of the keys is ignored, evenness is implied.
    pub fn custom(values: BTreeMap<i64, f64>, box_length: f64) -> Result<Self> {
        check_box(box_length)?;
        let mut table = BTreeMap::new();
        for (k, w) in values {
            if k == 0 {
                return Err(Error::Mode("Ŵ(0) is not part of the model".into()));
            }
            if !w.is_finite() {
                return Err(Error::Parameter(format!("Ŵ({k}) = {w} is not finite")));
            }
            if let Some(prev) = table.insert(k.unsigned_abs(), w) {
                if prev != w {
                    return Err(Error::Parameter(format!(
                        "Ŵ must be even: Ŵ({k}) = {w} but Ŵ({}) = {prev}",
                        -k
                    )));
                }
            }
        }
        if table.is_empty() {
            return Err(Error::Parameter("custom potential needs at least one mode".into()));
        }
        Ok(Self {
            kind: PotentialKind::Custom,
            box_length,
            table,
        })
    }

    fn build(kind: PotentialKind, k_max: i64, box_length: f64, w: impl Fn(f64) -> f64) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::Parameter(format!("k_max must be ≥ 1, got {k_max}")));
        }
        check_box(box_length)?;
        let table = (1..=k_max as u64).map(|k| (k, w(k as f64 / box_length))).collect();
        Ok(Self {
            kind,
            box_length,
            table,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn k_max(&self) -> i64 {
        self.table.keys().next_back().copied().unwrap_or(0) as i64
    }

    /// Ŵ(k) for a tabulated non-zero mode.
    pub fn w_hat(&self, k: i64) -> Result<f64> {
        if k == 0 {
            return Err(Error::Mode("the k = 0 mode carries no field".into()));
        }
        self.table.get(&k.unsigned_abs()).copied().ok_or_else(|| {
            Error::Mode(format!(
                "k = {k} is outside the potential table (|k| ≤ {})",
                self.k_max()
            ))
        })
    }

    /// Physical wavenumber q = k / L.
    pub fn wavenumber(&self, k: i64) -> f64 {
        k as f64 / self.box_length
    }

    /// The same potential with every Ŵ multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("potential scale must be positive, got {c}")));
        }
        Ok(Self {
            kind: PotentialKind::Custom,
            box_length: self.box_length,
            table: self.table.iter().map(|(&k, &w)| (k, w * c)).collect(),
        })
    }
}

/// Ê(k) = −2πi q Ŵ(k) e ρ̂(k).
pub fn field_mode(rho_hat: Complex64, k: i64, w: &InteractionPotential, e_charge: f64) -> Result<Complex64> {
    let w_hat = w.w_hat(k)?;
    let q = w.wavenumber(k);
    Ok(Complex64::new(0.0, -2.0 * PI * q * w_hat * e_charge) * rho_hat)
}

/// ½ Σ_{k≠0} |Ê(k)|², the Parseval form of ½∫E² dx.
///
/// A mode whose partner −k is absent from the map stands for the real pair (k, −k) and
/// is counted twice. The k = 0 entry is ignored.
pub fn electric_energy(rho_hats: &BTreeMap<i64, Complex64>, w: &InteractionPotential, e_charge: f64) -> Result<f64> {
    let mut total = 0.0;
    for (&k, &rho) in rho_hats {
        if k == 0 {
            continue;
        }
        let e = field_mode(rho, k, w, e_charge)?;
        let multiplicity = if rho_hats.contains_key(&-k) { 1.0 } else { 2.0 };
        total += multiplicity * e.norm_sqr();
    }
    Ok(0.5 * total)
}

/// Electric energy of the real pair (k, −k) built from a single mode amplitude.
pub fn mode_energy(rho_hat: Complex64, k: i64, w: &InteractionPotential, e_charge: f64) -> Result<f64> {
    Ok(field_mode(rho_hat, k, w, e_charge)?.norm_sqr())
}

/// E(x) = Σ_k Ê(k) e^{2πi q x} over the given modes (k = 0 skipped).
pub fn field_at(
    rho_hats: &BTreeMap<i64, Complex64>,
    w: &InteractionPotential,
    e_charge: f64,
    x: f64,
) -> Result<Complex64> {
    let mut e = Complex64::new(0.0, 0.0);
    for (&k, &rho) in rho_hats {
        if k == 0 {
            continue;
        }
        let q = w.wavenumber(k);
        e += field_mode(rho, k, w, e_charge)? * Complex64::from_polar(1.0, 2.0 * PI * q * x);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_table() {
        let w = coulomb_potential(3).unwrap();
        assert_eq!(w.w_hat(1).unwrap(), 1.0);
        assert_eq!(w.w_hat(2).unwrap(), 0.25);
        assert!((w.w_hat(3).unwrap() - 1.0 / 9.0).abs() < 1e-17);
        assert_eq!(w.w_hat(-2).unwrap(), w.w_hat(2).unwrap());
        assert!(matches!(coulomb_potential(1).unwrap().w_hat(2), Err(Error::Mode(_))));
        assert!(coulomb_potential(0).is_err());
    }

    #[test]
    fn box_length_rescales_wavenumbers() {
        let w = InteractionPotential::coulomb(2, 2.0).unwrap();
        assert_eq!(w.wavenumber(1), 0.5);
        assert_eq!(w.w_hat(1).unwrap(), 4.0);
    }

    #[test]
    fn field_mode_closed_forms() {
        let w = coulomb_potential(3).unwrap();
        assert_eq!(
            field_mode(Complex64::new(0.0, 0.0), 1, &w, 1.0).unwrap(),
            Complex64::new(0.0, 0.0)
        );
        let e = field_mode(Complex64::new(1.0, 0.0), 1, &w, 1.0).unwrap();
        assert_eq!(e.re, 0.0);
        assert!((e.norm() - 2.0 * PI).abs() < 1e-14);
        assert!(matches!(
            field_mode(Complex64::new(1.0, 0.0), 0, &w, 1.0),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn single_mode_energy() {
        let w = coulomb_potential(3).unwrap();
        let mut rho = BTreeMap::new();
        rho.insert(1, Complex64::new(1.0, 0.0));
        let want = 0.5 * 2.0 * (2.0 * PI).powi(2);
        assert!((electric_energy(&rho, &w, 1.0).unwrap() - want).abs() < 1e-12);
        rho.insert(-1, Complex64::new(1.0, 0.0));
        assert!((electric_energy(&rho, &w, 1.0).unwrap() - want).abs() < 1e-12);
        rho.insert(0, Complex64::new(5.0, 0.0));
        assert!((electric_energy(&rho, &w, 1.0).unwrap() - want).abs() < 1e-12);
        assert_eq!(electric_energy(&BTreeMap::new(), &w, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_potential_must_be_even() {
        let mut t = BTreeMap::new();
        t.insert(1, 1.0);
        t.insert(-1, 2.0);
        assert!(InteractionPotential::custom(t, 1.0).is_err());
    }
}
