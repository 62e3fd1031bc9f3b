//! Phase-space oracle: the linearized two-species system on a (k, η) Fourier grid.
//!
//! With h̃(k, η, t) = ∫∫ h(x, v, t) e^{−2πi(qx + ηv)} dx dv the linearized equations are
//!
//! ```text
//! ∂_t h̃_e − q ∂_η h̃_e = (e/m_e) Ê(k) 2πiη f̄_e(η)
//! ∂_t h̃_i − q ∂_η h̃_i = −(e/m_i) Ê(k) 2πiη f̄_i(η)
//! ```
//!
//! with Ê(k) = −2πi q Ŵ(k) e [h̃_i(k, 0) − h̃_e(k, 0)]. Transport is the exact shift
//! h̃(k, η) ← h̃(k, η + q dt); the source vanishes at η = 0, so the density is frozen
//! during a kick and the kick is exact as well. Steps are composed by Strang splitting.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibria::{EquilibriumProfile, SpeciesParams};
use crate::error::{Error, Result};
use crate::perturbation::VelocitySpectrum;
use crate::potential::{electric_energy, field_mode, InteractionPotential};
use crate::volterra::ModeSeries;

/// Symmetric uniform grid η_j = (j − c)·dη, j = 0..len, with η = 0 at index c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaGrid {
    pub d_eta: f64,
    pub half_len: usize,
}

pub const DEFAULT_ETA_MAX: f64 = 40.0;

impl EtaGrid {
    pub fn new(eta_max: f64, d_eta: f64) -> Result<Self> {
        if !(d_eta > 0.0 && d_eta.is_finite()) || !(eta_max > 0.0 && eta_max.is_finite()) {
            return Err(Error::Parameter(format!(
                "invalid η grid (η_max = {eta_max}, dη = {d_eta})"
            )));
        }
        let half_len = (eta_max / d_eta).round() as usize;
        if half_len < 8 {
            return Err(Error::Parameter("η grid needs at least 8 points per side".into()));
        }
        Ok(Self { d_eta, half_len })
    }

    pub fn len(&self) -> usize {
        2 * self.half_len + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        self.half_len
    }

    pub fn eta_max(&self) -> f64 {
        self.half_len as f64 * self.d_eta
    }

    pub fn eta(&self, j: usize) -> f64 {
        (j as f64 - self.half_len as f64) * self.d_eta
    }
}

/// Taps of the windowed sinc interpolant.
pub const SINC_HALF_WIDTH: usize = 32;

fn window_radius() -> f64 {
    (2.0 * SINC_HALF_WIDTH as f64 / PI).sqrt()
}

fn windowed_sinc(x: f64) -> f64 {
    let r = window_radius();
    let w = (-(x / r) * (x / r)).exp();
    if x.abs() < 1e-300 {
        w
    } else {
        (PI * x).sin() / (PI * x) * w
    }
}

/// Value of a sampled row at fractional index `pos` (samples outside count as zero).
fn interpolate(row: &[Complex64], pos: f64) -> Complex64 {
    let base = pos.floor();
    let frac = pos - base;
    let base = base as i64;
    if frac == 0.0 {
        return usize::try_from(base)
            .ok()
            .and_then(|b| row.get(b).copied())
            .unwrap_or_default();
    }
    let h = SINC_HALF_WIDTH as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in (1 - h)..=h {
        let idx = base + m;
        if idx < 0 || idx as usize >= row.len() {
            continue;
        }
        acc += row[idx as usize] * windowed_sinc(m as f64 - frac);
    }
    acc
}

/// Relative amount of content allowed to leave the η grid in one shift.
pub const DATA_LOSS_TOL: f64 = 1e-12;

/// row[j] ← row at index j + s; content pushed past either end is checked and dropped.
fn shift_row(row: &mut Vec<Complex64>, s: f64, k: i64) -> Result<()> {
    if s == 0.0 {
        return Ok(());
    }
    let n = row.len();
    let scale = row.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(());
    }
    let lost = row
        .iter()
        .enumerate()
        .filter(|(m, _)| {
            let target = *m as f64 - s;
            target < 0.0 || target > (n - 1) as f64
        })
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    if lost > DATA_LOSS_TOL * scale {
        return Err(Error::DataLoss(format!(
            "mode k = {k}: content {lost:.3e} (relative {:.3e}) crosses the η boundary; enlarge η_max",
            lost / scale
        )));
    }
    let rounded = s.round();
    let out: Vec<Complex64> = if (s - rounded).abs() < 1e-12 {
        let off = rounded as i64;
        (0..n as i64)
            .map(|j| {
                let src = j + off;
                if (0..n as i64).contains(&src) {
                    row[src as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    } else {
        (0..n).map(|j| interpolate(row, j as f64 + s)).collect()
    };
    *row = out;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Electron,
    Ion,
}

/// h̃_e, h̃_i for a list of spatial modes on a shared η grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpacePerturbation {
    pub grid: EtaGrid,
    pub box_length: f64,
    pub k_modes: Vec<i64>,
    pub h_e: Vec<Vec<Complex64>>,
    pub h_i: Vec<Vec<Complex64>>,
}

impl PhaseSpacePerturbation {
    /// Samples two spectra on the grid for the given modes.
    pub fn from_spectra(
        grid: EtaGrid,
        box_length: f64,
        k_modes: &[i64],
        h_e: &dyn VelocitySpectrum,
        h_i: &dyn VelocitySpectrum,
    ) -> Result<Self> {
        if !(box_length > 0.0) {
            return Err(Error::Parameter(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        let mut ks = k_modes.to_vec();
        ks.sort_unstable();
        ks.dedup();
        let sample = |s: &dyn VelocitySpectrum, k: i64| -> Result<Vec<Complex64>> {
            (0..grid.len()).map(|j| s.spectrum(k, grid.eta(j))).collect()
        };
        let h_e = ks.iter().map(|&k| sample(h_e, k)).collect::<Result<_>>()?;
        let h_i = ks.iter().map(|&k| sample(h_i, k)).collect::<Result<_>>()?;
        Ok(Self {
            grid,
            box_length,
            k_modes: ks,
            h_e,
            h_i,
        })
    }

    fn row_index(&self, k: i64) -> Result<usize> {
        self.k_modes
            .iter()
            .position(|&kk| kk == k)
            .ok_or_else(|| Error::Mode(format!("mode k = {k} is not stored in the phase-space state")))
    }

    pub fn row(&self, species: Species, k: i64) -> Result<&[Complex64]> {
        let r = self.row_index(k)?;
        Ok(match species {
            Species::Electron => &self.h_e[r],
            Species::Ion => &self.h_i[r],
        })
    }

    /// (ρ̂_e(k), ρ̂_i(k)) = (h̃_e(k, 0), h̃_i(k, 0)).
    pub fn densities(&self, k: i64) -> Result<(Complex64, Complex64)> {
        let r = self.row_index(k)?;
        let c = self.grid.center();
        Ok((self.h_e[r][c], self.h_i[r][c]))
    }

    /// ρ̂(k) = ρ̂_i(k) − ρ̂_e(k).
    pub fn rho_hat(&self, k: i64) -> Result<Complex64> {
        let (e, i) = self.densities(k)?;
        Ok(i - e)
    }

    /// h̃ of one species at arbitrary η by band-limited interpolation of the stored row.
    pub fn spectrum_at(&self, species: Species, k: i64, eta: f64) -> Result<Complex64> {
        let row = self.row(species, k)?;
        let eta_max = self.grid.eta_max();
        if !(eta.abs() <= eta_max) {
            return Err(Error::Extrapolation(format!(
                "η = {eta} outside the grid [−{eta_max}, {eta_max}]"
            )));
        }
        let pos = eta / self.grid.d_eta + self.grid.half_len as f64;
        Ok(interpolate(row, pos))
    }

    /// Owned view of one species usable as a forcing source.
    pub fn species_spectrum(&self, species: Species) -> TabulatedSpectrum {
        TabulatedSpectrum {
            state: Arc::new(self.clone()),
            species,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let scale = |rows: &[Vec<Complex64>]| rows.iter().map(|r| r.iter().map(|z| z * c).collect()).collect();
        Self {
            h_e: scale(&self.h_e),
            h_i: scale(&self.h_i),
            ..self.clone()
        }
    }

    /// max |h̃(−k, −η) − conj h̃(k, η)| over stored pairs.
    pub fn reality_defect(&self) -> f64 {
        let n = self.grid.len();
        let mut worst: f64 = 0.0;
        for (r, &k) in self.k_modes.iter().enumerate() {
            let Ok(p) = self.row_index(-k) else { continue };
            for rows in [&self.h_e, &self.h_i] {
                for j in 0..n {
                    worst = worst.max((rows[p][n - 1 - j] - rows[r][j].conj()).norm());
                }
            }
        }
        worst
    }
}

/// One species of a phase-space state seen as a perturbation spectrum.
#[derive(Debug, Clone)]
pub struct TabulatedSpectrum {
    state: Arc<PhaseSpacePerturbation>,
    species: Species,
}

impl VelocitySpectrum for TabulatedSpectrum {
    fn spectrum(&self, k: i64, eta: f64) -> Result<Complex64> {
        if !self.state.k_modes.contains(&k) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        self.state.spectrum_at(self.species, k, eta)
    }

    fn modes(&self) -> Vec<i64> {
        self.state.k_modes.iter().copied().filter(|&k| k != 0).collect()
    }
}

/// h̃(k, η) ← h̃(k, η + q·dt) for both species and every mode.
pub fn free_stream(state: &PhaseSpacePerturbation, dt: f64) -> Result<PhaseSpacePerturbation> {
    let mut next = state.clone();
    free_stream_in_place(&mut next, dt)?;
    Ok(next)
}

fn free_stream_in_place(state: &mut PhaseSpacePerturbation, dt: f64) -> Result<()> {
    if !dt.is_finite() {
        return Err(Error::Parameter(format!("dt must be finite, got {dt}")));
    }
    let d_eta = state.grid.d_eta;
    let l = state.box_length;
    let ks = state.k_modes.clone();
    for rows in [&mut state.h_e, &mut state.h_i] {
        rows.par_iter_mut()
            .zip(ks.par_iter())
            .try_for_each(|(row, &k)| shift_row(row, k as f64 / l * dt / d_eta, k))?;
    }
    Ok(())
}

/// Equilibria, potential and species data of the linearized system.
#[derive(Debug, Clone)]
pub struct OracleModel {
    pub f_e: EquilibriumProfile,
    pub f_i: EquilibriumProfile,
    pub potential: InteractionPotential,
    pub species: SpeciesParams,
}

impl OracleModel {
    /// Global equilibrium: both species share `profile`.
    pub fn global(profile: &EquilibriumProfile, potential: &InteractionPotential, species: &SpeciesParams) -> Self {
        Self {
            f_e: profile.clone(),
            f_i: profile.clone(),
            potential: potential.clone(),
            species: *species,
        }
    }

    fn sources(&self, grid: &EtaGrid) -> (Vec<Complex64>, Vec<Complex64>) {
        let src = |p: &EquilibriumProfile| {
            (0..grid.len())
                .map(|j| {
                    let eta = grid.eta(j);
                    p.fourier(eta) * Complex64::new(0.0, 2.0 * PI * eta)
                })
                .collect()
        };
        (src(&self.f_e), src(&self.f_i))
    }
}

/// Adds (±e/m) Ê(k) 2πiη f̄(η) dt to each species, Ê from the current densities.
pub fn field_kick(state: &PhaseSpacePerturbation, model: &OracleModel, dt: f64) -> Result<PhaseSpacePerturbation> {
    let (s_e, s_i) = model.sources(&state.grid);
    let mut next = state.clone();
    kick_in_place(&mut next, model, &s_e, &s_i, dt)?;
    Ok(next)
}

fn kick_in_place(
    state: &mut PhaseSpacePerturbation,
    model: &OracleModel,
    s_e: &[Complex64],
    s_i: &[Complex64],
    dt: f64,
) -> Result<()> {
    let sp = &model.species;
    let c = state.grid.center();
    for r in 0..state.k_modes.len() {
        let k = state.k_modes[r];
        if k == 0 {
            continue;
        }
        let rho = state.h_i[r][c] - state.h_e[r][c];
        if rho == Complex64::new(0.0, 0.0) {
            continue;
        }
        let e = field_mode(rho, k, &model.potential, sp.e_charge)?;
        let ce = e * (sp.e_charge / sp.m_e * dt);
        let ci = e * (-sp.e_charge / sp.m_i * dt);
        for (h, s) in state.h_e[r].iter_mut().zip(s_e) {
            *h += ce * s;
        }
        for (h, s) in state.h_i[r].iter_mut().zip(s_i) {
            *h += ci * s;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSwitch {
    On,
    /// Ê ≡ 0: pure phase mixing.
    Off,
}

/// Density trajectories recorded at t_n = n·dt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrajectory {
    pub dt: f64,
    pub k_modes: Vec<i64>,
    /// ρ̂_e(k, t_n), one vector per mode.
    pub rho_e: Vec<Vec<Complex64>>,
    pub rho_i: Vec<Vec<Complex64>>,
    /// ½ Σ_k |Ê(k)|² over the stored modes.
    pub electric_energy: Vec<f64>,
}

impl OracleTrajectory {
    pub fn len(&self) -> usize {
        self.electric_energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electric_energy.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Density modes of k in the layout of a Volterra solution.
    pub fn mode_series(&self, k: i64) -> Result<ModeSeries> {
        let r = self
            .k_modes
            .iter()
            .position(|&kk| kk == k)
            .ok_or_else(|| Error::Mode(format!("mode k = {k} was not evolved")))?;
        Ok(ModeSeries {
            k,
            t0: 0.0,
            dt: self.dt,
            phi_e: self.rho_e[r].clone(),
            phi_i: self.rho_i[r].clone(),
        })
    }
}

fn record(state: &PhaseSpacePerturbation, model: &OracleModel, traj: &mut OracleTrajectory) -> Result<()> {
    let c = state.grid.center();
    let mut rho = BTreeMap::new();
    for (r, &k) in state.k_modes.iter().enumerate() {
        traj.rho_e[r].push(state.h_e[r][c]);
        traj.rho_i[r].push(state.h_i[r][c]);
        if k != 0 {
            rho.insert(k, state.h_i[r][c] - state.h_e[r][c]);
        }
    }
    traj.electric_energy
        .push(electric_energy(&rho, &model.potential, model.species.e_charge)?);
    Ok(())
}

/// Strang splitting (half stream, kick, half stream) for ⌈T/|dt|⌉ steps.
///
/// A negative dt runs the exact inverse of the forward step, so evolving forward and then
/// with −dt returns the initial state up to interpolation error.
pub fn evolve(
    state: &PhaseSpacePerturbation,
    model: &OracleModel,
    t_end: f64,
    dt: f64,
    field: FieldSwitch,
) -> Result<(OracleTrajectory, PhaseSpacePerturbation)> {
    if !(dt != 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be non-zero and finite, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be ≥ 0, got {t_end}")));
    }
    let steps = ((t_end / dt.abs()) - 1e-9).ceil().max(0.0) as usize;
    let (s_e, s_i) = model.sources(&state.grid);
    let mut cur = state.clone();
    let nk = cur.k_modes.len();
    let mut traj = OracleTrajectory {
        dt: dt.abs(),
        k_modes: cur.k_modes.clone(),
        rho_e: vec![Vec::with_capacity(steps + 1); nk],
        rho_i: vec![Vec::with_capacity(steps + 1); nk],
        electric_energy: Vec::with_capacity(steps + 1),
    };
    record(&cur, model, &mut traj)?;
    for _ in 0..steps {
        free_stream_in_place(&mut cur, 0.5 * dt)?;
        if field == FieldSwitch::On {
            kick_in_place(&mut cur, model, &s_e, &s_i, dt)?;
        }
        free_stream_in_place(&mut cur, 0.5 * dt)?;
        record(&cur, model, &mut traj)?;
    }
    Ok((traj, cur))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::make_maxwellian;
    use crate::perturbation::SeparablePerturbation;
    use crate::potential::coulomb_potential;

    fn gaussian_state(grid: EtaGrid) -> PhaseSpacePerturbation {
        let m = make_maxwellian(1.0, 0.0).unwrap();
        let p = SeparablePerturbation::cosine(1e-3, &[1], &m).unwrap();
        PhaseSpacePerturbation::from_spectra(grid, 1.0, &[-1, 0, 1], &p, &SeparablePerturbation::zero()).unwrap()
    }

    #[test]
    fn grid_contains_zero() {
        let g = EtaGrid::new(40.0, 0.05).unwrap();
        assert_eq!(g.len(), 1601);
        assert_eq!(g.eta(g.center()), 0.0);
    }

    #[test]
    fn lattice_shift_is_exact_and_k0_is_fixed() {
        let g = EtaGrid::new(10.0, 0.125).unwrap();
        let s0 = gaussian_state(g);
        let s1 = free_stream(&s0, 0.5).unwrap();
        let r0 = s0.row(Species::Electron, 1).unwrap();
        let r1 = s1.row(Species::Electron, 1).unwrap();
        for j in 0..g.len() - 4 {
            assert_eq!(r1[j], r0[j + 4]);
        }
        assert_eq!(
            s1.row(Species::Electron, 0).unwrap(),
            s0.row(Species::Electron, 0).unwrap()
        );
    }

    #[test]
    fn fractional_shifts_compose() {
        let g = EtaGrid::new(10.0, 0.05).unwrap();
        let s0 = gaussian_state(g);
        let once = free_stream(&s0, 0.37).unwrap();
        let twice = free_stream(&free_stream(&s0, 0.185).unwrap(), 0.185).unwrap();
        let a = once.row(Species::Electron, 1).unwrap();
        let b = twice.row(Species::Electron, 1).unwrap();
        let err = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let want = 0.5e-3 * (-2.0 * PI * PI * 0.37f64.powi(2)).exp();
        assert!((once.densities(1).unwrap().0.re - want).abs() < 1e-15);
    }

    #[test]
    fn content_leaving_the_grid_is_an_error() {
        let g = EtaGrid::new(2.0, 0.05).unwrap();
        let s0 = gaussian_state(g);
        assert!(matches!(free_stream(&s0, 1.9), Err(Error::DataLoss(_))));
    }

    #[test]
    fn neutral_state_has_no_field() {
        let g = EtaGrid::new(10.0, 0.125).unwrap();
        let m = make_maxwellian(1.0, 0.0).unwrap();
        let p = SeparablePerturbation::cosine(1e-3, &[1], &m).unwrap();
        let s = PhaseSpacePerturbation::from_spectra(g, 1.0, &[1], &p, &p).unwrap();
        let model = OracleModel::global(&m, &coulomb_potential(2).unwrap(), &SpeciesParams::hydrogen());
        assert_eq!(field_kick(&s, &model, 0.1).unwrap(), s);
    }

    #[test]
    fn single_kick_matches_hand_computation() {
        let g = EtaGrid::new(10.0, 0.125).unwrap();
        let s = gaussian_state(g);
        let m = make_maxwellian(1.0, 0.0).unwrap();
        let sp = SpeciesParams::new(1.0, 10.0, 1.0).unwrap();
        let model = OracleModel::global(&m, &coulomb_potential(2).unwrap(), &sp);
        let dt = 0.01;
        let kicked = field_kick(&s, &model, dt).unwrap();
        let rho = Complex64::new(-0.5e-3, 0.0);
        let e = Complex64::new(0.0, -2.0 * PI) * rho;
        for j in [g.center() + 3, g.center() - 7] {
            let eta = g.eta(j);
            let src = Complex64::new(0.0, 2.0 * PI * eta) * (-2.0 * PI * PI * eta * eta).exp();
            let de = kicked.h_e[2][j] - s.h_e[2][j];
            let di = kicked.h_i[2][j] - s.h_i[2][j];
            assert!((de - e * src * dt).norm() < 1e-18);
            assert!((di + e * src * (dt / 10.0)).norm() < 1e-18);
        }
    }
}
