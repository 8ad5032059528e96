//! Qubit gap, quality factor, persistent currents, density profiles and the
//! parameter sweeps built from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{lowest_eigenpairs, SolverConfig, SolverError, SpectrumResult};
use crate::fock::{BasisError, BasisOptions, FockBasis};
use crate::hamiltonian::{build_hamiltonian, HamiltonianError, RingSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("qubit figures need at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("flux step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("level {level} crosses a neighbour inside the stencil around Omega={flux} (spacing {spacing:e} vs stencil change {change:e})")]
    LevelCrossing {
        level: usize,
        flux: f64,
        spacing: f64,
        change: f64,
    },
    #[error("state norm deviates from 1 by {0:e}")]
    NotNormalized(f64),
    #[error("vector length {vector} does not match basis dimension {basis}")]
    LengthMismatch { vector: usize, basis: usize },
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep value {0} is not finite or outside its domain")]
    InvalidGridValue(f64),
    #[error("sweep point {index} ({parameter} = {value}): {source}")]
    AtPoint {
        index: usize,
        parameter: &'static str,
        value: f64,
        #[source]
        source: Box<ObservableError>,
    },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// `gap = E1 - E0` and `quality = (E1 - E0) / (E2 - E0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitFigures {
    pub gap: f64,
    /// NaN when `E2 == E0`.
    pub quality: f64,
}

impl QubitFigures {
    pub fn from_levels(levels: &[f64]) -> Result<Self, ObservableError> {
        if levels.len() < 3 {
            return Err(ObservableError::TooFewLevels(levels.len()));
        }
        let gap = (levels[1] - levels[0]).max(0.0);
        let second = levels[2] - levels[0];
        let quality = if second > 0.0 { gap / second } else { f64::NAN };
        Ok(QubitFigures { gap, quality })
    }
}

pub fn qubit_figures(spectrum: &SpectrumResult) -> Result<QubitFigures, ObservableError> {
    QubitFigures::from_levels(&spectrum.eigenvalues)
}

/// Ground-state-and-up spectrum of one ring spec.
pub fn ring_spectrum(spec: &RingSpec, levels: usize, config: &SolverConfig) -> Result<SpectrumResult, ObservableError> {
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    spectrum_on(spec, &basis, levels, config)
}

fn spectrum_on(
    spec: &RingSpec,
    basis: &FockBasis,
    levels: usize,
    config: &SolverConfig,
) -> Result<SpectrumResult, ObservableError> {
    let h = build_hamiltonian(spec, basis)?;
    Ok(lowest_eigenpairs(&h, levels.min(basis.dimension()), config)?)
}

/// Settings of the central-difference current stencil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurrentOptions {
    pub step: f64,
    /// Combine steps `h` and `h/2` to cancel the `O(h^2)` error.
    pub richardson: bool,
}

impl Default for CurrentOptions {
    fn default() -> Self {
        CurrentOptions {
            step: 1e-3,
            richardson: false,
        }
    }
}

/// A level must stay farther from its neighbours than this multiple of its
/// own change across the stencil.
const CROSSING_GUARD: f64 = 4.0;

/// `I = -(1/2pi) dE_level/dOmega` by central differences (hbar = 1).
pub fn persistent_current(
    spec: &RingSpec,
    level: usize,
    flux: f64,
    options: &CurrentOptions,
    config: &SolverConfig,
) -> Result<f64, ObservableError> {
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    persistent_current_on(spec, &basis, level, flux, options, config)
}

fn persistent_current_on(
    spec: &RingSpec,
    basis: &FockBasis,
    level: usize,
    flux: f64,
    options: &CurrentOptions,
    config: &SolverConfig,
) -> Result<f64, ObservableError> {
    let h = options.step;
    if !(h > 0.0 && h.is_finite()) {
        return Err(ObservableError::InvalidStep(h));
    }
    let levels = (level + 2).min(basis.dimension());
    let at = |omega: f64| -> Result<Vec<f64>, ObservableError> {
        let s = spec.clone().with_flux(omega);
        Ok(spectrum_on(&s, basis, levels, config)?.eigenvalues)
    };
    let centre = at(flux)?;
    let plus = at(flux + h)?;
    let minus = at(flux - h)?;
    check_crossing(level, flux, &[&minus, &centre, &plus])?;
    let d1 = (plus[level] - minus[level]) / (2.0 * h);
    let slope = if options.richardson {
        let half = h / 2.0;
        let p2 = at(flux + half)?;
        let m2 = at(flux - half)?;
        let d2 = (p2[level] - m2[level]) / (2.0 * half);
        (4.0 * d2 - d1) / 3.0
    } else {
        d1
    };
    Ok(-slope / (2.0 * PI))
}

fn check_crossing(level: usize, flux: f64, stencil: &[&Vec<f64>; 3]) -> Result<(), ObservableError> {
    let change = stencil
        .iter()
        .map(|e| (e[level] - stencil[1][level]).abs())
        .fold(0.0, f64::max);
    let mut spacing = f64::INFINITY;
    for e in stencil {
        if level > 0 {
            spacing = spacing.min(e[level] - e[level - 1]);
        }
        if level + 1 < e.len() {
            spacing = spacing.min(e[level + 1] - e[level]);
        }
    }
    if spacing < 1e-9 || spacing < CROSSING_GUARD * change {
        return Err(ObservableError::LevelCrossing {
            level,
            flux,
            spacing,
            change,
        });
    }
    Ok(())
}

/// Current of one level over a flux grid, with the curve rescaled to unit
/// amplitude alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentCurve {
    pub level: usize,
    pub flux: Vec<f64>,
    pub current: Vec<f64>,
}

impl CurrentCurve {
    pub fn normalized(&self) -> Vec<f64> {
        let amp = self.current.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if amp == 0.0 {
            return self.current.clone();
        }
        self.current.iter().map(|c| c / amp).collect()
    }
}

pub fn current_curve(
    spec: &RingSpec,
    level: usize,
    grid: &[f64],
    options: &CurrentOptions,
    config: &SolverConfig,
) -> Result<CurrentCurve, ObservableError> {
    check_grid(grid)?;
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    let current = grid
        .par_iter()
        .enumerate()
        .map(|(i, &omega)| {
            persistent_current_on(spec, &basis, level, omega, options, config)
                .map_err(|e| at_point(i, "omega", omega, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurrentCurve {
        level,
        flux: grid.to_vec(),
        current,
    })
}

/// Site occupations `<n_j>` of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub occupations: Vec<f64>,
}

impl DensityProfile {
    pub fn total(&self) -> f64 {
        self.occupations.iter().sum()
    }
}

pub fn density_profile(state: &[Complex64], basis: &FockBasis) -> Result<DensityProfile, ObservableError> {
    if state.len() != basis.dimension() {
        return Err(ObservableError::LengthMismatch {
            vector: state.len(),
            basis: basis.dimension(),
        });
    }
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(ObservableError::NotNormalized(norm - 1.0));
    }
    let mut occupations = vec![0.0; basis.sites()];
    for (amp, occ) in state.iter().zip(basis.iter()) {
        let p = amp.norm_sqr();
        for (acc, &n) in occupations.iter_mut().zip(occ) {
            *acc += p * n as f64;
        }
    }
    // Remove the residual norm error so that the sum rule is exact.
    for acc in occupations.iter_mut() {
        *acc /= norm;
    }
    Ok(DensityProfile { occupations })
}

/// Ground-state density of a ring spec.
pub fn ground_density(spec: &RingSpec, config: &SolverConfig) -> Result<DensityProfile, ObservableError> {
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    let spectrum = spectrum_on(spec, &basis, 1, config)?;
    density_profile(&spectrum.eigenvectors[0], &basis)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub energies: Vec<f64>,
    pub figures: Option<QubitFigures>,
}

impl SweepRow {
    fn new(parameter: f64, energies: Vec<f64>) -> Self {
        let figures = QubitFigures::from_levels(&energies).ok();
        SweepRow {
            parameter,
            energies,
            figures,
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), ObservableError> {
    if grid.is_empty() {
        return Err(ObservableError::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|v| !v.is_finite()) {
        return Err(ObservableError::InvalidGridValue(bad));
    }
    Ok(())
}

fn at_point(index: usize, parameter: &'static str, value: f64, e: ObservableError) -> ObservableError {
    ObservableError::AtPoint {
        index,
        parameter,
        value,
        source: Box::new(e),
    }
}

/// Lowest `levels` energies at each flux value of `grid` (within `[0, 2pi]`).
pub fn sweep_flux(
    spec: &RingSpec,
    grid: &[f64],
    levels: usize,
    config: &SolverConfig,
) -> Result<Vec<SweepRow>, ObservableError> {
    check_grid(grid)?;
    if let Some(&bad) = grid.iter().find(|&&w| !(-1e-12..=2.0 * PI + 1e-12).contains(&w)) {
        return Err(ObservableError::InvalidGridValue(bad));
    }
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    grid.par_iter()
        .enumerate()
        .map(|(i, &omega)| {
            let s = spec.clone().with_flux(omega);
            spectrum_on(&s, &basis, levels, config)
                .map(|r| SweepRow::new(omega, r.eigenvalues))
                .map_err(|e| at_point(i, "omega", omega, e))
        })
        .collect()
}

/// Gap and quality table over interaction values for one weak-link value
/// `t''`, evaluated at the spec's flux (normally `pi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTable {
    pub t_double_prime: f64,
    pub rows: Vec<SweepRow>,
}

/// Sets every weak link but the first (the `t'` link) to `t''`.
pub fn with_secondary_links(spec: &RingSpec, t_double_prime: f64) -> RingSpec {
    let mut s = spec.clone();
    for w in s.weak_links.iter_mut().skip(1) {
        w.strength = t_double_prime;
    }
    s
}

pub fn sweep_interaction(
    spec: &RingSpec,
    interactions: &[f64],
    t_double_primes: &[f64],
    config: &SolverConfig,
) -> Result<Vec<InteractionTable>, ObservableError> {
    check_grid(interactions)?;
    check_grid(t_double_primes)?;
    if let Some(&bad) = interactions.iter().find(|&&u| u < 0.0) {
        return Err(ObservableError::InvalidGridValue(bad));
    }
    let basis = FockBasis::new(spec.sites, spec.particles)?;
    t_double_primes
        .iter()
        .map(|&tpp| {
            let base = with_secondary_links(spec, tpp);
            let rows = interactions
                .par_iter()
                .enumerate()
                .map(|(i, &u)| {
                    let mut s = base.clone();
                    s.interaction = u;
                    spectrum_on(&s, &basis, 3, config)
                        .map(|r| SweepRow::new(u, r.eigenvalues))
                        .map_err(|e| at_point(i, "U", u, e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(InteractionTable {
                t_double_prime: tpp,
                rows,
            })
        })
        .collect()
}

/// Per-particle-number outcome; oversized bases are reported, not fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct FillingPoint {
    pub particles: usize,
    pub result: Result<SweepRow, ObservableError>,
}

pub fn sweep_filling(
    spec: &RingSpec,
    particles: &[usize],
    basis_options: BasisOptions,
    config: &SolverConfig,
) -> Vec<FillingPoint> {
    particles
        .par_iter()
        .map(|&n| {
            let mut s = spec.clone();
            s.particles = n;
            let result = FockBasis::with_options(s.sites, n, basis_options)
                .map_err(ObservableError::from)
                .and_then(|basis| spectrum_on(&s, &basis, 3, config))
                .map(|r| SweepRow::new(n as f64, r.eigenvalues));
            FillingPoint { particles: n, result }
        })
        .collect()
}

/// Indices of interior local maxima of `values`.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}
