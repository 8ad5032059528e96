//! Quantum-phase reduction of the three-junction ring: harmonic bath data,
//! the junction potential, plane-wave spectra of the reduced one- and
//! two-angle problems, the rf-AQUID double well and its WKB splitting.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigen::{lowest_eigenpairs, SolverConfig, SolverError};
use crate::hamiltonian::SparseOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EffectiveError {
    #[error("invalid effective model: {0}")]
    InvalidSpec(String),
    #[error("links {links:?} are not mirror-symmetric about link 1 on a {sites}-site ring")]
    Asymmetric { sites: usize, links: [usize; 3] },
    #[error("basis size {0} must be odd and at least 3")]
    InvalidBasis(usize),
    #[error("{levels} levels need a basis of at least {} plane waves", 4 * levels)]
    TooManyLevels { levels: usize },
    #[error("two-angle basis of {size}^2 states exceeds the cap {cap}")]
    BasisOverflow { size: usize, cap: usize },
    #[error("levels move by {shift:e} under basis doubling (tolerance {tolerance:e})")]
    NotConverged { shift: f64, tolerance: f64 },
    #[error("grid too narrow: boundary amplitude {amplitude:e} exceeds {limit:e}")]
    BoundaryLeakage { amplitude: f64, limit: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("WKB splitting needs delta >= 1 and positive U, E_J (got delta = {delta}, U = {u}, E_J = {ej})")]
    WkbDomain { delta: f64, u: f64, ej: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How the kinetic energy of the reduced problem is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KineticConvention {
    /// Only the two active junction angles carry kinetic energy.
    #[default]
    ActiveJunctions,
    /// The constrained angle `theta_0 = theta_2 - theta_1` contributes too.
    IncludeConstrained,
}

/// Three-junction ring in phase variables. Energies are in units of `j`;
/// absolute values are `ratio * j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveModelSpec {
    pub sites: usize,
    #[serde(default = "unit")]
    pub j: f64,
    pub j_prime: f64,
    pub j_double_prime: f64,
    pub u: f64,
    #[serde(default)]
    pub flux: f64,
    /// Second weak link; the third sits at its mirror image. Defaults to the
    /// equidistant `1 + sites / 3`.
    #[serde(default)]
    pub second_link: Option<usize>,
    #[serde(default)]
    pub kinetic_convention: KineticConvention,
    /// Per-angle kinetic coefficient of the two-angle problem; defaults to `u j / 4`.
    #[serde(default)]
    pub kinetic: Option<f64>,
    /// Adds the `J c_alpha theta_alpha^2` terms to the potential.
    #[serde(default)]
    pub quadratic: bool,
}

fn unit() -> f64 {
    1.0
}

impl EffectiveModelSpec {
    pub fn new(sites: usize, j_prime: f64, j_double_prime: f64, u: f64) -> Self {
        EffectiveModelSpec {
            sites,
            j: 1.0,
            j_prime,
            j_double_prime,
            u,
            flux: 0.0,
            second_link: None,
            kinetic_convention: KineticConvention::ActiveJunctions,
            kinetic: None,
            quadratic: false,
        }
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.flux = flux;
        self
    }

    pub fn validate(&self) -> Result<(), EffectiveError> {
        let m = self.sites;
        if m < 6 || !m.is_multiple_of(2) {
            return Err(EffectiveError::InvalidSpec(format!(
                "site count must be even with at least 3 bulk sites, got {m}"
            )));
        }
        for (name, v) in [("j", self.j), ("u", self.u)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EffectiveError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        // zero junction energies give the free-rotor limit
        for (name, v) in [("j_prime", self.j_prime), ("j_double_prime", self.j_double_prime)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EffectiveError::InvalidSpec(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !self.flux.is_finite() {
            return Err(EffectiveError::InvalidSpec("flux must be finite".into()));
        }
        if let Some(k) = self.kinetic {
            if !(k > 0.0 && k.is_finite()) {
                return Err(EffectiveError::InvalidSpec(format!(
                    "kinetic must be positive, got {k}"
                )));
            }
        }
        self.links().map(|_| ())
    }

    /// Ring positions `(1, i1, i2)` of the three weak links.
    pub fn links(&self) -> Result<[usize; 3], EffectiveError> {
        let m = self.sites;
        let i1 = match self.second_link {
            Some(i) => i,
            None if m.is_multiple_of(3) => 1 + m / 3,
            None => {
                return Err(EffectiveError::InvalidSpec(format!(
                    "equidistant links need a site count divisible by 3, got {m}"
                )))
            }
        };
        let i2 = (m + 2).wrapping_sub(i1);
        let links = [1, i1, i2];
        if !(i1 >= 3 && i1 + 2 <= i2 && i2 <= m) {
            return Err(EffectiveError::Asymmetric { sites: m, links });
        }
        Ok(links)
    }

    fn axis_kinetic(&self) -> f64 {
        self.kinetic.unwrap_or(self.u * self.j / 4.0)
    }

    /// Kinetic coefficient of the mirror-line problem `theta_1 = -theta_2`.
    pub fn reduced_kinetic(&self) -> f64 {
        match self.kinetic_convention {
            KineticConvention::ActiveJunctions => self.axis_kinetic() / 2.0,
            KineticConvention::IncludeConstrained => self.axis_kinetic() / 6.0,
        }
    }
}

/// Harmonic modes of the bulk chain and their couplings to the junctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathData {
    /// Mode frequencies `omega_k`, `k = 1..(M-4)/2`, in energy units.
    pub frequencies: Vec<f64>,
    /// `couplings[alpha][k-1] = zeta_{alpha k}`.
    pub couplings: [Vec<f64>; 3],
    /// Quadratic coefficients `c_alpha`; independent of `U` and `J`.
    pub quadratic: [f64; 3],
    /// Chain positions `j_alpha` used for the couplings.
    pub chain_positions: [usize; 3],
}

impl BathData {
    /// `sum_k zeta_{alpha k}^2 / (omega_k^2 + omega_l^2)` for each `omega_l`.
    pub fn kernel_spectrum(&self, alpha: usize, matsubara: &[f64]) -> Vec<f64> {
        matsubara
            .iter()
            .map(|&wl| {
                self.couplings[alpha]
                    .iter()
                    .zip(&self.frequencies)
                    .map(|(z, w)| z * z / (w * w + wl * wl))
                    .sum()
            })
            .collect()
    }
}

pub fn bath_modes(spec: &EffectiveModelSpec) -> Result<BathData, EffectiveError> {
    spec.validate()?;
    let links = spec.links()?;
    let m = spec.sites;
    let chain = (m - 3) as f64;
    // Bulk sites are renumbered consecutively, skipping the weak-link sites.
    let chain_positions = [links[0], links[1] - 1, links[2] - 2];
    let modes: Vec<usize> = (1..=(m - 4) / 2).collect();
    let ju = spec.j * spec.u;
    let frequencies = modes
        .iter()
        .map(|&k| (ju / 2.0 * (1.0 - (2.0 * PI * k as f64 / chain).cos())).sqrt())
        .collect();
    let coupling = |jp: usize| -> Vec<f64> {
        modes
            .iter()
            .map(|&k| {
                let q = 2.0 * PI * k as f64 / chain;
                let (a, b) = ((jp as f64 - 1.0) * q, (jp as f64 + 1.0) * q);
                0.5 * (a.sin() - b.sin()) / chain.sqrt()
            })
            .collect()
    };
    let couplings = chain_positions.map(coupling);
    let quadratic = std::array::from_fn(|a| {
        // U J zeta^2 / omega^2 with omega^2 = (U J / 2)(1 - cos q), cancelled.
        let s: f64 = couplings[a]
            .iter()
            .zip(&modes)
            .map(|(z, &k)| 2.0 * z * z / (1.0 - (2.0 * PI * k as f64 / chain).cos()))
            .sum();
        0.5 * (0.5 - s)
    });
    Ok(BathData {
        frequencies,
        couplings,
        quadratic,
        chain_positions,
    })
}

/// `c_alpha` for each ring size (equidistant links, `U = J = 1`).
pub fn quadratic_scaling(sites: &[usize]) -> Result<Vec<(usize, [f64; 3])>, EffectiveError> {
    sites
        .iter()
        .map(|&m| {
            let spec = EffectiveModelSpec::new(m, 1.0, 1.0, 1.0);
            Ok((m, bath_modes(&spec)?.quadratic))
        })
        .collect()
}

/// Junction potential `V(theta_1, theta_2)` with `theta_0 = theta_2 - theta_1`.
pub fn effective_potential(theta1: f64, theta2: f64, spec: &EffectiveModelSpec, quadratic: Option<&[f64; 3]>) -> f64 {
    let (jp, jpp) = (spec.j_prime * spec.j, spec.j_double_prime * spec.j);
    let mut v = -(jp / 3.0) * (theta1 - theta2 - spec.flux).cos() - (jpp / 3.0) * (theta1.cos() + theta2.cos());
    if let Some(c) = quadratic {
        let theta0 = theta2 - theta1;
        v += spec.j * (c[0] * theta0 * theta0 + c[1] * theta1 * theta1 + c[2] * theta2 * theta2);
    }
    v
}

/// Fourier coefficient `m` of the `2 pi`-periodic extension of `x^2` on `[-pi, pi]`.
fn square_coefficient(m: i64) -> f64 {
    if m == 0 {
        PI * PI / 3.0
    } else {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        2.0 * sign / (m * m) as f64
    }
}

/// Potential as a sparse table of Fourier coefficients `V(m1, m2)` with
/// `|m| < bound`.
pub fn potential_coefficients(
    spec: &EffectiveModelSpec,
    bound: i64,
    quadratic: Option<&[f64; 3]>,
) -> Vec<((i64, i64), Complex64)> {
    let (jp, jpp) = (spec.j_prime * spec.j, spec.j_double_prime * spec.j);
    let phase = Complex64::from_polar(1.0, -spec.flux);
    let mut out = vec![
        ((1, -1), -(jp / 6.0) * phase),
        ((-1, 1), -(jp / 6.0) * phase.conj()),
        ((1, 0), Complex64::new(-jpp / 6.0, 0.0)),
        ((-1, 0), Complex64::new(-jpp / 6.0, 0.0)),
        ((0, 1), Complex64::new(-jpp / 6.0, 0.0)),
        ((0, -1), Complex64::new(-jpp / 6.0, 0.0)),
    ];
    if let Some(c) = quadratic {
        for m in -(bound - 1)..bound {
            let s = spec.j * square_coefficient(m);
            out.push(((-m, m), Complex64::new(c[0] * s, 0.0)));
            out.push(((m, 0), Complex64::new(c[1] * s, 0.0)));
            out.push(((0, m), Complex64::new(c[2] * s, 0.0)));
        }
    }
    out
}

/// Restricts two-angle coefficients to the line `theta_1 = theta, theta_2 = -theta`.
pub fn fold_to_mirror_line(coefficients: &[((i64, i64), Complex64)]) -> Vec<(i64, Complex64)> {
    let mut folded: Vec<(i64, Complex64)> = Vec::new();
    for &((m1, m2), v) in coefficients {
        let m = m1 - m2;
        match folded.iter_mut().find(|(k, _)| *k == m) {
            Some((_, acc)) => *acc += v,
            None => folded.push((m, v)),
        }
    }
    folded.sort_by_key(|&(m, _)| m);
    folded
}

/// Mirror-line coefficients built directly from the one-angle form
/// `-(J'/3) cos(2 theta - Omega) - (2 J''/3) cos(theta)`.
fn line_coefficients(spec: &EffectiveModelSpec, bound: i64, quadratic: Option<&[f64; 3]>) -> Vec<(i64, Complex64)> {
    let (jp, jpp) = (spec.j_prime * spec.j, spec.j_double_prime * spec.j);
    let phase = Complex64::from_polar(1.0, -spec.flux);
    let mut out = vec![
        (2, -(jp / 6.0) * phase),
        (-2, -(jp / 6.0) * phase.conj()),
        (1, Complex64::new(-jpp / 3.0, 0.0)),
        (-1, Complex64::new(-jpp / 3.0, 0.0)),
    ];
    if let Some(c) = quadratic {
        // theta_0^2 = (2 theta)^2 folded, theta_1^2 = theta_2^2 = theta^2
        for m in -(bound - 1)..bound {
            let s = spec.j * square_coefficient(m);
            out.push((-2 * m, Complex64::new(c[0] * s, 0.0)));
            out.push((m, Complex64::new((c[1] + c[2]) * s, 0.0)));
        }
    }
    out
}

const DOUBLING_TOLERANCE: f64 = 1e-8;
const TWO_ANGLE_CAP: usize = 4_000_000;

/// Spectrum from one plane-wave solve plus the doubling shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveSpectrum {
    pub eigenvalues: Vec<f64>,
    pub doubling_shift: f64,
}

fn check_basis(levels: usize, basis_size: usize) -> Result<(), EffectiveError> {
    if basis_size < 3 || basis_size.is_multiple_of(2) {
        return Err(EffectiveError::InvalidBasis(basis_size));
    }
    if levels == 0 || 4 * levels > basis_size {
        return Err(EffectiveError::TooManyLevels { levels });
    }
    Ok(())
}

fn solve_line(
    kinetic: f64,
    coefficients: &[(i64, Complex64)],
    levels: usize,
    basis_size: usize,
) -> Result<Vec<f64>, EffectiveError> {
    let half = (basis_size / 2) as i64;
    let mut triplets = Vec::new();
    for (r, n) in (-half..=half).enumerate() {
        triplets.push((r, r, Complex64::new(kinetic * (n * n) as f64, 0.0)));
        for &(m, v) in coefficients {
            let target = n - m;
            if target.abs() <= half {
                triplets.push((r, (target + half) as usize, v));
            }
        }
    }
    let op = SparseOperator::from_triplets(basis_size, triplets);
    Ok(lowest_eigenpairs(&op, levels, &dense_config())?.eigenvalues)
}

fn dense_config() -> SolverConfig {
    SolverConfig {
        dense_threshold: usize::MAX,
        tol: 1e-9,
        ..SolverConfig::default()
    }
}

fn quadratic_for(spec: &EffectiveModelSpec) -> Result<Option<[f64; 3]>, EffectiveError> {
    Ok(if spec.quadratic {
        Some(bath_modes(spec)?.quadratic)
    } else {
        None
    })
}

fn max_shift(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Lowest levels of `kappa n^2 + V(theta, -theta)` in the plane-wave basis
/// `n in [-(B-1)/2, (B-1)/2]`, checked against a doubled basis.
pub fn reduced_spectrum_1d(
    spec: &EffectiveModelSpec,
    levels: usize,
    basis_size: usize,
) -> Result<PlaneWaveSpectrum, EffectiveError> {
    spec.validate()?;
    check_basis(levels, basis_size)?;
    let quad = quadratic_for(spec)?;
    let kinetic = spec.reduced_kinetic();
    let doubled = 2 * basis_size + 1;
    let coarse = solve_line(
        kinetic,
        &line_coefficients(spec, basis_size as i64, quad.as_ref()),
        levels,
        basis_size,
    )?;
    let fine = solve_line(
        kinetic,
        &line_coefficients(spec, doubled as i64, quad.as_ref()),
        levels,
        doubled,
    )?;
    let shift = max_shift(&coarse, &fine);
    if shift > DOUBLING_TOLERANCE {
        return Err(EffectiveError::NotConverged {
            shift,
            tolerance: DOUBLING_TOLERANCE,
        });
    }
    Ok(PlaneWaveSpectrum {
        eigenvalues: fine,
        doubling_shift: shift,
    })
}

/// The mirror-line problem assembled from the folded two-angle coefficients.
pub fn mirror_line_spectrum(
    spec: &EffectiveModelSpec,
    levels: usize,
    basis_size: usize,
) -> Result<Vec<f64>, EffectiveError> {
    spec.validate()?;
    check_basis(levels, basis_size)?;
    let quad = quadratic_for(spec)?;
    // Only harmonics reachable inside the line basis matter.
    let folded: Vec<_> = fold_to_mirror_line(&potential_coefficients(spec, basis_size as i64, quad.as_ref()))
        .into_iter()
        .filter(|&(m, _)| m.unsigned_abs() < basis_size as u64)
        .collect();
    solve_line(spec.reduced_kinetic(), &folded, levels, basis_size)
}

fn solve_plane(
    spec: &EffectiveModelSpec,
    quad: Option<&[f64; 3]>,
    levels: usize,
    basis_size: usize,
    config: &SolverConfig,
) -> Result<Vec<f64>, EffectiveError> {
    let half = (basis_size / 2) as i64;
    let b = basis_size;
    let kappa = spec.axis_kinetic();
    let coefficients = potential_coefficients(spec, basis_size as i64, quad);
    let index = |n1: i64, n2: i64| (n1 + half) as usize * b + (n2 + half) as usize;
    let rows: Vec<Vec<(usize, usize, Complex64)>> = (0..b * b)
        .into_par_iter()
        .map(|r| {
            let n1 = (r / b) as i64 - half;
            let n2 = (r % b) as i64 - half;
            let kin = match spec.kinetic_convention {
                KineticConvention::ActiveJunctions => kappa * (n1 * n1 + n2 * n2) as f64,
                KineticConvention::IncludeConstrained => 2.0 * kappa / 3.0 * (n1 * n1 + n1 * n2 + n2 * n2) as f64,
            };
            let mut row = vec![(r, r, Complex64::new(kin, 0.0))];
            for &((m1, m2), v) in &coefficients {
                let (t1, t2) = (n1 - m1, n2 - m2);
                if t1.abs() <= half && t2.abs() <= half {
                    row.push((r, index(t1, t2), v));
                }
            }
            row
        })
        .collect();
    let op = SparseOperator::from_triplets(b * b, rows.into_iter().flatten());
    Ok(lowest_eigenpairs(&op, levels, config)?.eigenvalues)
}

/// Lowest levels of the two-angle problem in the tensor-product basis,
/// checked against a doubled basis.
pub fn reduced_spectrum_2d(
    spec: &EffectiveModelSpec,
    levels: usize,
    basis_size: usize,
    config: &SolverConfig,
) -> Result<PlaneWaveSpectrum, EffectiveError> {
    spec.validate()?;
    check_basis(levels, basis_size)?;
    let doubled = 2 * basis_size + 1;
    if doubled.saturating_mul(doubled) > TWO_ANGLE_CAP {
        return Err(EffectiveError::BasisOverflow {
            size: doubled,
            cap: TWO_ANGLE_CAP,
        });
    }
    let quad = quadratic_for(spec)?;
    let coarse = solve_plane(spec, quad.as_ref(), levels, basis_size, config)?;
    let fine = solve_plane(spec, quad.as_ref(), levels, doubled, config)?;
    let shift = max_shift(&coarse, &fine);
    if shift > DOUBLING_TOLERANCE {
        return Err(EffectiveError::NotConverged {
            shift,
            tolerance: DOUBLING_TOLERANCE,
        });
    }
    Ok(PlaneWaveSpectrum {
        eigenvalues: fine,
        doubling_shift: shift,
    })
}

/// Level curves of the mirror-line problem over a flux grid.
pub fn level_curves_1d(
    spec: &EffectiveModelSpec,
    flux: &[f64],
    levels: usize,
    basis_size: usize,
) -> Result<Vec<Vec<f64>>, EffectiveError> {
    flux.par_iter()
        .map(|&w| reduced_spectrum_1d(&spec.clone().with_flux(w), levels, basis_size).map(|s| s.eigenvalues))
        .collect()
}

/// Uniform grid on `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealGrid {
    pub half_width: f64,
    pub points: usize,
}

impl RealGrid {
    /// Wide enough for the lowest `levels` states of `U p^2 + E_L phi^2 - E_J cos(...)`
    /// to decay below `1e-12`, fine enough for a small stencil error.
    pub fn auto(u: f64, e_l: f64, e_j: f64, levels: usize) -> Self {
        let ladder = 2.0 * (u * e_l).sqrt() * (levels as f64 + 1.0);
        let turning = (2.0 * e_j + ladder) / e_l;
        let half_width = (turning + 64.0 * (u / e_l).sqrt()).sqrt() + PI;
        let step = 0.01_f64.min(0.05 * (u / (e_j + e_l)).powf(0.25));
        let points = ((2.0 * half_width / step).ceil() as usize).max(101) | 1;
        RealGrid { half_width, points }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Largest endpoint amplitude relative to the peak, over the returned states.
    pub boundary_amplitude: f64,
}

pub const BOUNDARY_LIMIT: f64 = 1e-12;

/// Lowest levels of `U n^2 + E_L phi^2 - E_J cos(phi - Omega)` on a real grid
/// with the three-point kinetic stencil.
pub fn rf_aquid_spectrum(
    u: f64,
    e_l: f64,
    e_j: f64,
    flux: f64,
    levels: usize,
    grid: &RealGrid,
) -> Result<GridSpectrum, EffectiveError> {
    if !(u > 0.0 && e_l > 0.0 && e_j >= 0.0)
        || !(u.is_finite() && e_l.is_finite() && e_j.is_finite() && flux.is_finite())
    {
        return Err(EffectiveError::InvalidSpec(format!(
            "need U > 0, E_L > 0, E_J >= 0 (got {u}, {e_l}, {e_j})"
        )));
    }
    if !(grid.half_width > 0.0 && grid.half_width.is_finite()) || grid.points < 3 {
        return Err(EffectiveError::InvalidGrid(format!("{grid:?}")));
    }
    if levels == 0 || levels > grid.points {
        return Err(EffectiveError::InvalidGrid(format!(
            "{levels} levels on {} points",
            grid.points
        )));
    }
    let h = grid.step();
    let off = -u / (h * h);
    let diag: Vec<f64> = (0..grid.points)
        .map(|i| {
            let x = grid.coordinate(i);
            2.0 * u / (h * h) + e_l * x * x - e_j * (x - flux).cos()
        })
        .collect();
    let tri = Tridiagonal { diag: &diag, off };
    let eigenvalues: Vec<f64> = (0..levels).map(|k| tri.eigenvalue(k)).collect();
    let boundary_amplitude = eigenvalues
        .iter()
        .map(|&e| {
            let v = tri.eigenvector(e);
            let peak = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            v[0].abs().max(v[v.len() - 1].abs()) / peak
        })
        .fold(0.0, f64::max);
    if boundary_amplitude > BOUNDARY_LIMIT {
        return Err(EffectiveError::BoundaryLeakage {
            amplitude: boundary_amplitude,
            limit: BOUNDARY_LIMIT,
        });
    }
    Ok(GridSpectrum {
        eigenvalues,
        boundary_amplitude,
    })
}

/// Symmetric tridiagonal matrix with a constant off-diagonal.
struct Tridiagonal<'a> {
    diag: &'a [f64],
    off: f64,
}

impl Tridiagonal<'_> {
    /// Number of eigenvalues below `x` (Sturm sequence).
    fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let mut q = 1.0;
        let mut count = 0;
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (d.abs() + self.off.abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diag.iter().fold(f64::INFINITY, |a, &d| a.min(d - r));
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d + r));
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.bounds();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Inverse iteration at a converged eigenvalue, with partial pivoting.
    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.diag.len();
        let scale = self.diag.iter().fold(self.off.abs(), |a, d| a.max(d.abs()));
        let shift = lambda + 1e3 * f64::EPSILON * scale;
        // Row i of U holds (u0, u1, u2) at columns (i, i+1, i+2).
        let mut u = vec![[0.0_f64; 3]; n];
        let mut l = vec![0.0_f64; n];
        let mut swapped = vec![false; n];
        let mut cur = [self.diag[0] - shift, self.off, 0.0];
        for i in 0..n - 1 {
            let below = [
                self.off,
                self.diag[i + 1] - shift,
                if i + 2 < n { self.off } else { 0.0 },
            ];
            // `below` starts at column i; `cur` at column i.
            let (pivot, other, swap) = if below[0].abs() > cur[0].abs() {
                (below, cur, true)
            } else {
                (cur, below, false)
            };
            let factor = if pivot[0] == 0.0 { 0.0 } else { other[0] / pivot[0] };
            u[i] = pivot;
            l[i] = factor;
            swapped[i] = swap;
            cur = [other[1] - factor * pivot[1], other[2] - factor * pivot[2], 0.0];
        }
        u[n - 1] = cur;
        let tiny = f64::EPSILON * scale;
        let mut x = vec![1.0_f64; n];
        for _ in 0..3 {
            // Forward: apply the recorded row swaps and eliminations.
            let mut b = x.clone();
            for i in 0..n - 1 {
                if swapped[i] {
                    b.swap(i, i + 1);
                }
                b[i + 1] -= l[i] * b[i];
            }
            for i in (0..n).rev() {
                let mut s = b[i];
                if i + 1 < n {
                    s -= u[i][1] * b[i + 1];
                }
                if i + 2 < n {
                    s -= u[i][2] * b[i + 2];
                }
                let p = if u[i][0].abs() < tiny { tiny } else { u[i][0] };
                b[i] = s / p;
            }
            let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = b.into_iter().map(|v| v / norm).collect();
        }
        x
    }
}

/// WKB splitting of the symmetric double well:
/// `(2 sqrt(U E_J) / pi) sqrt(1 - 1/delta) exp(-12 sqrt(E_J/U) (1 - 1/delta)^{3/2})`.
pub fn wkb_gap(u: f64, e_j: f64, delta: f64) -> Result<f64, EffectiveError> {
    if !(delta >= 1.0 && u > 0.0 && e_j > 0.0) || !(delta.is_finite() && u.is_finite() && e_j.is_finite()) {
        return Err(EffectiveError::WkbDomain { delta, u, ej: e_j });
    }
    let s = 1.0 - 1.0 / delta;
    Ok(2.0 * (u * e_j).sqrt() / PI * s.sqrt() * (-12.0 * (e_j / u).sqrt() * s.powf(1.5)).exp())
}

/// Grid splitting `E_1 - E_0` at `Omega = pi` with `E_L = E_J / delta`.
pub fn grid_doublet_splitting(u: f64, e_j: f64, delta: f64) -> Result<f64, EffectiveError> {
    let e_l = e_j / delta;
    let grid = RealGrid::auto(u, e_l, e_j, 2);
    let s = rf_aquid_spectrum(u, e_l, e_j, PI, 2, &grid)?;
    Ok(s.eigenvalues[1] - s.eigenvalues[0])
}
