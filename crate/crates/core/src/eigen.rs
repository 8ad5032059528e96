//! Lowest eigenpairs of complex Hermitian sparse operators.
//!
//! Large operators go through a thick-restart Lanczos iteration with full
//! reorthogonalization; small ones are diagonalized densely. Every returned
//! pair carries an explicitly computed residual `||H v - E v||`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::SparseOperator;

pub const DEFAULT_SEED: u64 = 0x5EED;
pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const PROBE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("cannot request {requested} eigenpairs of a {dimension}-dimensional operator")]
    InvalidRequest { requested: usize, dimension: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("no convergence after {restarts} restarts: worst residual {residual:e} > tolerance {tolerance:e}")]
    NoConvergence {
        restarts: usize,
        residual: f64,
        tolerance: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Residual bound `||H v - E v||` in units of the operator's energies.
    pub tol: f64,
    /// Seed of the pseudo-random starting vectors.
    pub seed: u64,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    /// Extra levels resolved internally beyond the requested count.
    pub extra_levels: usize,
    /// Krylov window; `None` picks a size from the number of wanted levels.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
    /// Re-probe the deflated operator for eigenvalues missed because of exact
    /// degeneracies.
    pub verify_degeneracy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: DEFAULT_TOLERANCE,
            seed: DEFAULT_SEED,
            dense_threshold: 400,
            extra_levels: 2,
            krylov_dim: None,
            max_restarts: 2000,
            verify_degeneracy: true,
        }
    }
}

impl SolverConfig {
    /// Same settings with the dense fallback disabled.
    pub fn krylov_only(mut self) -> Self {
        self.dense_threshold = 0;
        self
    }
}

/// Ascending eigenvalues with their unit eigenvectors and residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn lowest_eigenpairs(op: &SparseOperator, k: usize, config: &SolverConfig) -> Result<SpectrumResult, SolverError> {
    let n = op.dimension();
    if k == 0 || k > n {
        return Err(SolverError::InvalidRequest {
            requested: k,
            dimension: n,
        });
    }
    if !(config.tol > 0.0 && config.tol.is_finite()) {
        return Err(SolverError::InvalidTolerance(config.tol));
    }
    let want = (k + config.extra_levels).min(n);
    let mut pairs = if n <= config.dense_threshold || want + 2 >= n {
        dense_pairs(op, want)
    } else {
        krylov_pairs(op, want, config)?
    };
    pairs.truncate(k);
    let residuals: Vec<f64> = pairs.iter().map(|(e, v)| residual(op, *e, v)).collect();
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > config.tol {
        return Err(SolverError::NoConvergence {
            restarts: config.max_restarts,
            residual: worst,
            tolerance: config.tol,
        });
    }
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(SpectrumResult {
        eigenvalues,
        eigenvectors,
        residuals,
    })
}

fn dense_pairs(op: &SparseOperator, want: usize) -> Vec<(f64, Vec<Complex64>)> {
    let eig = op.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(want)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect()
}

fn residual(op: &SparseOperator, e: f64, v: &[Complex64]) -> f64 {
    let mut hv = vec![Complex64::new(0.0, 0.0); v.len()];
    op.apply(v, &mut hv);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - b * e).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// vector helpers (sequential so that results do not depend on thread count)

#[inline]
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[inline]
fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(a: &mut [Complex64], s: f64) {
    for x in a.iter_mut() {
        *x *= s;
    }
}

/// Two passes of classical Gram-Schmidt against `basis`, returning the summed
/// projection coefficients.
fn orthogonalize(w: &mut [Complex64], basis: &[Vec<Complex64>]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(basis) {
            let p = dot(v, w);
            axpy(-p, v, w);
            *c += p;
        }
    }
    coeffs
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Random unit vector orthogonal to `against`; `None` if it vanishes, which
/// only happens when `against` spans the space.
fn fresh_direction(rng: &mut ChaCha8Rng, n: usize, against: &[&[Vec<Complex64>]]) -> Option<Vec<Complex64>> {
    for _ in 0..4 {
        let mut v = random_vector(rng, n);
        let start = norm(&v);
        for set in against {
            orthogonalize(&mut v, set);
        }
        let nv = norm(&v);
        if nv > 1e-8 * start {
            scale(&mut v, 1.0 / nv);
            return Some(v);
        }
    }
    None
}

fn krylov_pairs(
    op: &SparseOperator,
    want: usize,
    config: &SolverConfig,
) -> Result<Vec<(f64, Vec<Complex64>)>, SolverError> {
    let n = op.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut found = thick_restart_lanczos(op, want, &[], &mut rng, config)?;
    if !config.verify_degeneracy {
        return Ok(found);
    }
    // A Krylov space grown from one vector sees only one direction of each
    // degenerate eigenspace. Probe the complement of what was found and
    // merge anything that undercuts the current top level.
    // The probe only has to decide whether something lies below the top
    // level, so it runs loose; a hit is then resolved at full tolerance.
    let gap_floor = 10.0 * config.tol;
    let loose = SolverConfig {
        tol: config.tol.max(PROBE_TOLERANCE),
        ..*config
    };
    for _ in 0..want {
        if found.len() >= n {
            break;
        }
        let locked: Vec<Vec<Complex64>> = found.iter().map(|(_, v)| v.clone()).collect();
        let top = found.last().map(|p| p.0).unwrap_or(f64::INFINITY);
        let probe = thick_restart_lanczos(op, 1, &locked, &mut rng, &loose)?;
        let Some((e, v)) = probe.into_iter().next() else { break };
        if e - residual(op, e, &v) > top - gap_floor {
            break;
        }
        let exact = thick_restart_lanczos(op, 1, &locked, &mut rng, config)?;
        let Some((e, v)) = exact.into_iter().next() else { break };
        if e < top - gap_floor {
            found.push((e, v));
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            found.truncate(want);
        } else {
            break;
        }
    }
    Ok(found)
}

/// Thick-restart Lanczos for the `want` lowest eigenpairs of `op` restricted
/// to the orthogonal complement of `locked`.
fn thick_restart_lanczos(
    op: &SparseOperator,
    want: usize,
    locked: &[Vec<Complex64>],
    rng: &mut ChaCha8Rng,
    config: &SolverConfig,
) -> Result<Vec<(f64, Vec<Complex64>)>, SolverError> {
    let n = op.dimension();
    let free = n - locked.len();
    let want = want.min(free);
    let m = config
        .krylov_dim
        .unwrap_or_else(|| (3 * want).max(want + 24))
        .max(want + 2)
        .min(free);
    let zero = Complex64::new(0.0, 0.0);

    let Some(start) = fresh_direction(rng, n, &[locked]) else {
        return Ok(Vec::new());
    };
    let mut basis: Vec<Vec<Complex64>> = vec![start];
    // projected matrix V† H V, kept as an m x m Hermitian array
    let mut t = DMatrix::<Complex64>::zeros(m, m);
    let mut kept = 0usize;
    let mut w = vec![zero; n];
    let mut worst = f64::INFINITY;

    for _restart in 0..config.max_restarts {
        let mut last_beta = 0.0;
        for j in kept..m {
            op.apply(&basis[j], &mut w);
            orthogonalize(&mut w, locked);
            let coeffs = orthogonalize(&mut w, &basis);
            for (i, c) in coeffs.into_iter().enumerate() {
                t[(i, j)] = c;
                t[(j, i)] = c.conj();
            }
            t[(j, j)] = Complex64::new(t[(j, j)].re, 0.0);
            let beta = norm(&w);
            last_beta = beta;
            if j + 1 == m {
                break;
            }
            let next = if beta > 1e-12 * t[(j, j)].norm().max(1.0) {
                let mut v = w.clone();
                scale(&mut v, 1.0 / beta);
                // Dividing by a small beta magnifies roundoff along the locked
                // vectors, where the projected operator has a spurious zero
                // eigenvalue; strip it again.
                if !locked.is_empty() {
                    orthogonalize(&mut v, locked);
                    let nv = norm(&v);
                    scale(&mut v, 1.0 / nv);
                }
                v
            } else {
                // Invariant subspace reached: continue in a fresh direction.
                last_beta = 0.0;
                match fresh_direction(rng, n, &[locked, &basis]) {
                    Some(v) => v,
                    None => break,
                }
            };
            basis.push(next);
        }
        let size = basis.len();
        let sub = t.view((0, 0), (size, size)).into_owned();
        let eig = sub.symmetric_eigen();
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let estimates: Vec<f64> = order
            .iter()
            .take(want)
            .map(|&i| last_beta * eig.eigenvectors[(size - 1, i)].norm())
            .collect();
        worst = estimates.iter().copied().fold(0.0, f64::max);

        let keep = if size < m {
            // exhausted the free space: everything is exact
            size.min(want)
        } else if worst <= 0.1 * config.tol {
            want
        } else {
            (want + (m - want) / 2).min(m - 1)
        };
        let ritz: Vec<Vec<Complex64>> = order
            .iter()
            .take(keep)
            .map(|&i| {
                let mut x = vec![zero; n];
                for (r, v) in basis.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, i)], v, &mut x);
                }
                let nx = norm(&x);
                scale(&mut x, 1.0 / nx);
                x
            })
            .collect();
        let values: Vec<f64> = order.iter().take(keep).map(|&i| eig.eigenvalues[i]).collect();

        if size < m || worst <= 0.1 * config.tol {
            let out: Vec<(f64, Vec<Complex64>)> = values.into_iter().zip(ritz).take(want).collect();
            // certify against the true residual; roundoff in the estimate can
            // make it optimistic
            let true_worst = out.iter().map(|(e, v)| residual(op, *e, v)).fold(0.0, f64::max);
            if true_worst <= config.tol || size < m {
                return Ok(out);
            }
            worst = true_worst;
            return restart_from(op, want, locked, rng, config, out, worst);
        }

        // thick restart: Ritz vectors plus the normalized residual direction
        let mut residual_dir = w.clone();
        orthogonalize(&mut residual_dir, locked);
        orthogonalize(&mut residual_dir, &ritz);
        let nr = norm(&residual_dir);
        basis = ritz;
        t.fill(zero);
        for (i, &e) in values.iter().enumerate() {
            t[(i, i)] = Complex64::new(e, 0.0);
        }
        kept = keep;
        if nr > 1e-14 {
            scale(&mut residual_dir, 1.0 / nr);
            orthogonalize(&mut residual_dir, locked);
            orthogonalize(&mut residual_dir, &basis);
            let nr = norm(&residual_dir);
            scale(&mut residual_dir, 1.0 / nr);
            basis.push(residual_dir);
        } else if let Some(v) = fresh_direction(rng, n, &[locked, &basis]) {
            basis.push(v);
        } else {
            return Ok(values.into_iter().zip(basis).take(want).collect());
        }
    }
    Err(SolverError::NoConvergence {
        restarts: config.max_restarts,
        residual: worst,
        tolerance: config.tol,
    })
}

/// Roundoff fallback: rerun seeded with the current Ritz vectors' sum so the
/// next Krylov space starts close to the wanted subspace.
fn restart_from(
    op: &SparseOperator,
    want: usize,
    locked: &[Vec<Complex64>],
    rng: &mut ChaCha8Rng,
    config: &SolverConfig,
    current: Vec<(f64, Vec<Complex64>)>,
    worst: f64,
) -> Result<Vec<(f64, Vec<Complex64>)>, SolverError> {
    // Lock the pairs that already satisfy the tolerance and solve for the rest.
    let mut good = Vec::new();
    for (e, v) in current {
        if residual(op, e, &v) <= config.tol {
            good.push((e, v));
        }
    }
    if good.is_empty() {
        return Err(SolverError::NoConvergence {
            restarts: config.max_restarts,
            residual: worst,
            tolerance: config.tol,
        });
    }
    let mut all_locked: Vec<Vec<Complex64>> = locked.to_vec();
    all_locked.extend(good.iter().map(|(_, v)| v.clone()));
    let rest = thick_restart_lanczos(op, want - good.len(), &all_locked, rng, config)?;
    good.extend(rest);
    good.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(good)
}
