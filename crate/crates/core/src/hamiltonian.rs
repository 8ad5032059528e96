//! Bose-Hubbard ring with up to three weak links and a Peierls flux.
//!
//! Link `i` (1-based) connects site `i` to site `i + 1`, with site `M + 1`
//! identified with site 1. The hopping term on link `i` is
//! `-t_i (e^{i phi_i} a†_{i+1} a_i + h.c.)` and the link phases `phi_i` add up
//! to the total flux `Omega` in the default per-link mode.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::FockBasis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("invalid ring specification: {0}")]
    InvalidSpec(String),
    #[error("basis has M={basis_sites}, N={basis_particles} but the spec asks for M={sites}, N={particles}")]
    BasisMismatch {
        sites: usize,
        particles: usize,
        basis_sites: usize,
        basis_particles: usize,
    },
    #[error("gauge transformation needs a per-link flux spec, got {0:?}")]
    GaugeRequiresPerLink(FluxMode),
}

/// How the total flux is distributed over the ring links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxMode {
    /// Phase `Omega / M` on every link.
    #[default]
    PerLink,
    /// Phase `Omega` on the designated flux link only.
    SingleLink,
    /// Phase `Omega` on every link, as the Hamiltonian is printed.
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakLink {
    /// 1-based link index.
    pub link: usize,
    /// Hopping on this link in units of the bulk hopping.
    pub strength: f64,
}

/// Full parameterization of the ring Hamiltonian. Energies are in units of
/// the bulk hopping `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    pub sites: usize,
    pub particles: usize,
    pub interaction: f64,
    #[serde(default = "unit")]
    pub hopping: f64,
    #[serde(default)]
    pub weak_links: Vec<WeakLink>,
    #[serde(default)]
    pub flux: f64,
    #[serde(default)]
    pub flux_mode: FluxMode,
    /// Link carrying the flux in single-link mode. Defaults to the first weak
    /// link, or link 1 on a uniform ring.
    #[serde(default)]
    pub flux_link: Option<usize>,
}

fn unit() -> f64 {
    1.0
}

/// Weak-link placement used for all exact-diagonalization figures on `M = 8`.
pub const DEFAULT_WEAK_LINKS: [usize; 3] = [2, 5, 8];

impl RingSpec {
    pub fn uniform(sites: usize, particles: usize, interaction: f64) -> Self {
        RingSpec {
            sites,
            particles,
            interaction,
            hopping: 1.0,
            weak_links: Vec::new(),
            flux: 0.0,
            flux_mode: FluxMode::PerLink,
            flux_link: None,
        }
    }

    /// Ring with `t'` on `links[0]` and `t''` on `links[1]`, `links[2]`.
    pub fn three_links(
        sites: usize,
        particles: usize,
        interaction: f64,
        t_prime: f64,
        t_double_prime: f64,
        links: [usize; 3],
    ) -> Self {
        let mut spec = Self::uniform(sites, particles, interaction);
        spec.weak_links = vec![
            WeakLink {
                link: links[0],
                strength: t_prime,
            },
            WeakLink {
                link: links[1],
                strength: t_double_prime,
            },
            WeakLink {
                link: links[2],
                strength: t_double_prime,
            },
        ];
        spec
    }

    /// `M = 8` ring with weak links on 2, 5, 8.
    pub fn eight_site(particles: usize, interaction: f64, t_prime: f64, t_double_prime: f64) -> Self {
        Self::three_links(8, particles, interaction, t_prime, t_double_prime, DEFAULT_WEAK_LINKS)
    }

    pub fn with_flux(mut self, flux: f64) -> Self {
        self.flux = flux;
        self
    }

    pub fn with_flux_mode(mut self, mode: FluxMode) -> Self {
        self.flux_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        let bad = |msg: String| Err(HamiltonianError::InvalidSpec(msg));
        if self.sites < 2 {
            return bad(format!("need at least 2 sites, got {}", self.sites));
        }
        if self.particles < 1 {
            return bad("need at least 1 particle".into());
        }
        if !(self.interaction >= 0.0 && self.interaction.is_finite()) {
            return bad(format!("interaction must be finite and >= 0, got {}", self.interaction));
        }
        if !(self.hopping > 0.0 && self.hopping.is_finite()) {
            return bad(format!("bulk hopping must be finite and > 0, got {}", self.hopping));
        }
        if !self.flux.is_finite() {
            return bad("flux must be finite".into());
        }
        if self.weak_links.len() > 3 {
            return bad(format!("at most 3 weak links, got {}", self.weak_links.len()));
        }
        for (i, w) in self.weak_links.iter().enumerate() {
            if w.link < 1 || w.link > self.sites {
                return bad(format!("weak link index {} outside 1..={}", w.link, self.sites));
            }
            if !(w.strength > 0.0 && w.strength.is_finite()) {
                return bad(format!("weak link {} has non-positive strength {}", w.link, w.strength));
            }
            if self.weak_links[..i].iter().any(|o| o.link == w.link) {
                return bad(format!("weak link {} listed twice", w.link));
            }
        }
        if let Some(l) = self.flux_link {
            if l < 1 || l > self.sites {
                return bad(format!("flux link {l} outside 1..={}", self.sites));
            }
        }
        Ok(())
    }

    pub fn designated_flux_link(&self) -> usize {
        self.flux_link
            .or_else(|| self.weak_links.first().map(|w| w.link))
            .unwrap_or(1)
    }

    /// Hopping amplitude of every link, indexed from 0.
    pub fn link_hoppings(&self) -> Vec<f64> {
        let mut t = vec![self.hopping; self.sites];
        for w in &self.weak_links {
            t[w.link - 1] = w.strength * self.hopping;
        }
        t
    }

    /// Peierls phase of every link, indexed from 0.
    pub fn link_phases(&self) -> Vec<f64> {
        let m = self.sites;
        match self.flux_mode {
            FluxMode::PerLink => vec![self.flux / m as f64; m],
            FluxMode::Verbatim => vec![self.flux; m],
            FluxMode::SingleLink => {
                let mut p = vec![0.0; m];
                p[self.designated_flux_link() - 1] = self.flux;
                p
            }
        }
    }
}

/// Per-link spec to the gauge-equivalent spec with all flux on the designated
/// link (`a_l -> a_l e^{i l Omega / M}` relative to that link).
pub fn gauge_equivalent(spec: &RingSpec) -> Result<RingSpec, HamiltonianError> {
    if spec.flux_mode != FluxMode::PerLink {
        return Err(HamiltonianError::GaugeRequiresPerLink(spec.flux_mode));
    }
    let mut out = spec.clone();
    out.flux_link = Some(spec.designated_flux_link());
    out.flux_mode = FluxMode::SingleLink;
    Ok(out)
}

/// Complex Hermitian matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dimension: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseOperator {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dimension: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dimension];
        for (r, c, v) in triplets {
            assert!(
                r < dimension && c < dimension,
                "triplet ({r},{c}) outside dimension {dimension}"
            );
            rows[r].push((c, v));
        }
        Self::from_rows(dimension, rows)
    }

    fn from_rows(dimension: usize, rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(dimension + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != Complex64::new(0.0, 0.0) {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dimension,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        Self::from_triplets(
            entries.len(),
            entries.iter().enumerate().map(|(i, &e)| (i, i, Complex64::new(e, 0.0))),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dimension).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = H x`. Rows are independent, so the product is split across the
    /// rayon pool; each row sums in a fixed order, which keeps it deterministic.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dimension);
        assert_eq!(y.len(), self.dimension);
        y.par_iter_mut().with_min_len(1024).enumerate().for_each(|(r, out)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        });
    }

    /// Largest `|H_rc - conj(H_cr)|` over stored entries.
    pub fn max_hermitian_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dimension, self.dimension);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Coordinate text dump: one `row col re im` line per stored entry.
    pub fn write_coordinate<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# dimension {} nnz {}", self.dimension, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

pub fn build_hamiltonian(spec: &RingSpec, basis: &FockBasis) -> Result<SparseOperator, HamiltonianError> {
    spec.validate()?;
    if basis.sites() != spec.sites || basis.particles() != spec.particles {
        return Err(HamiltonianError::BasisMismatch {
            sites: spec.sites,
            particles: spec.particles,
            basis_sites: basis.sites(),
            basis_particles: basis.particles(),
        });
    }
    let m = spec.sites;
    let half_u = 0.5 * spec.interaction;
    // -t_i e^{i phi_i}: amplitude for moving one atom from site i to i+1.
    let forward: Vec<Complex64> = spec
        .link_hoppings()
        .iter()
        .zip(spec.link_phases())
        .map(|(&t, phi)| -t * Complex64::from_polar(1.0, phi))
        .collect();

    let rows: Vec<Vec<(usize, Complex64)>> = (0..basis.dimension())
        .into_par_iter()
        .with_min_len(256)
        .map_init(
            || vec![0u32; m],
            |scratch, r| {
                let occ = basis.occupations(r);
                let mut row = Vec::with_capacity(2 * m + 1);
                let diag: f64 = occ
                    .iter()
                    .map(|&n| {
                        let n = n as f64;
                        half_u * n * (n - 1.0)
                    })
                    .sum();
                row.push((r, Complex64::new(diag, 0.0)));
                for i in 0..m {
                    let j = (i + 1) % m;
                    let (ni, nj) = (occ[i] as f64, occ[j] as f64);
                    // <occ| a†_{i+1} a_i |c>: c has one more atom on i.
                    if occ[j] > 0 {
                        scratch.copy_from_slice(occ);
                        scratch[j] -= 1;
                        scratch[i] += 1;
                        let c = basis.rank_unchecked(scratch);
                        row.push((c, forward[i] * (nj * (ni + 1.0)).sqrt()));
                    }
                    // <occ| a†_i a_{i+1} |c>: the Hermitian conjugate hop.
                    if occ[i] > 0 {
                        scratch.copy_from_slice(occ);
                        scratch[i] -= 1;
                        scratch[j] += 1;
                        let c = basis.rank_unchecked(scratch);
                        row.push((c, forward[i].conj() * (ni * (nj + 1.0)).sqrt()));
                    }
                }
                row
            },
        )
        .collect();
    Ok(SparseOperator::from_rows(basis.dimension(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eigenvalues(h: &SparseOperator) -> Vec<f64> {
        let mut e: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    fn spectrum(spec: &RingSpec) -> Vec<f64> {
        let basis = FockBasis::new(spec.sites, spec.particles).unwrap();
        eigenvalues(&build_hamiltonian(spec, &basis).unwrap())
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    /// Entry-by-entry assembly straight from second quantization: apply every
    /// hopping operator to every basis ket and look the result up by search.
    fn naive_dense(spec: &RingSpec, basis: &FockBasis) -> DMatrix<Complex64> {
        let d = basis.dimension();
        let m = spec.sites;
        let states: Vec<Vec<u32>> = basis.iter().map(|s| s.to_vec()).collect();
        let t = spec.link_hoppings();
        let phi = spec.link_phases();
        let mut h = DMatrix::zeros(d, d);
        for (col, ket) in states.iter().enumerate() {
            let e: f64 = ket
                .iter()
                .map(|&n| 0.5 * spec.interaction * (n as f64) * (n as f64 - 1.0))
                .sum();
            h[(col, col)] += Complex64::new(e, 0.0);
            for i in 0..m {
                let j = (i + 1) % m;
                let amp = -t[i] * Complex64::from_polar(1.0, phi[i]);
                for (from, to, a) in [(i, j, amp), (j, i, amp.conj())] {
                    if ket[from] == 0 {
                        continue;
                    }
                    let mut bra = ket.clone();
                    let f = (bra[from] as f64).sqrt();
                    bra[from] -= 1;
                    bra[to] += 1;
                    let g = (bra[to] as f64).sqrt();
                    let row = states.iter().position(|s| *s == bra).unwrap();
                    h[(row, col)] += a * f * g;
                }
            }
        }
        h
    }

    #[test]
    fn free_particle_on_four_ring() {
        let e = spectrum(&RingSpec::uniform(4, 1, 0.7));
        assert_close(&e, &[-2.0, 0.0, 0.0, 2.0], 1e-12);
    }

    #[test]
    fn half_flux_degenerates_four_ring() {
        let e = spectrum(&RingSpec::uniform(4, 1, 0.0).with_flux(PI));
        let s = 2f64.sqrt();
        assert_close(&e, &[-s, -s, s, s], 1e-12);
    }

    #[test]
    fn matches_naive_assembly() {
        let mut spec = RingSpec::three_links(4, 3, 1.3, 0.5, 0.8, [1, 2, 4]).with_flux(0.9);
        for mode in [FluxMode::PerLink, FluxMode::SingleLink, FluxMode::Verbatim] {
            spec.flux_mode = mode;
            let basis = FockBasis::new(spec.sites, spec.particles).unwrap();
            let sparse = build_hamiltonian(&spec, &basis).unwrap().to_dense();
            let naive = naive_dense(&spec, &basis);
            assert!((sparse - naive).camax() < 1e-14);
        }
    }

    #[test]
    fn two_site_ring_merges_parallel_links() {
        let spec = RingSpec::uniform(2, 1, 0.0);
        let basis = FockBasis::new(2, 1).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        assert!((h.to_dense() - naive_dense(&spec, &basis)).camax() < 1e-14);
        assert_close(&eigenvalues(&h), &[-2.0, 2.0], 1e-12);
    }

    #[test]
    fn hermitian_and_row_bound() {
        let spec = RingSpec::eight_site(5, 1.0, 0.5, 0.8).with_flux(1.1);
        let basis = FockBasis::new(8, 5).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        assert_eq!(h.max_hermitian_defect(), 0.0);
        assert!(h.max_row_nnz() <= 2 * 8 + 1);
        for r in 0..h.dimension() {
            assert_eq!(h.get(r, r).im, 0.0);
        }
    }

    #[test]
    fn gauge_transform_preserves_spectrum() {
        let spec = RingSpec::three_links(6, 3, 2.0, 0.5, 0.7, [1, 3, 5]).with_flux(1.3);
        let gauged = gauge_equivalent(&spec).unwrap();
        assert_eq!(gauged.flux_mode, FluxMode::SingleLink);
        assert_close(&spectrum(&spec), &spectrum(&gauged), 1e-10);
    }

    #[test]
    fn gauge_transform_at_zero_flux_is_identity() {
        let spec = RingSpec::eight_site(2, 1.0, 0.5, 0.8);
        let basis = FockBasis::new(8, 2).unwrap();
        let a = build_hamiltonian(&spec, &basis).unwrap();
        let b = build_hamiltonian(&gauge_equivalent(&spec).unwrap(), &basis).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gauge_requires_per_link() {
        let spec = RingSpec::uniform(4, 1, 0.0).with_flux_mode(FluxMode::Verbatim);
        assert!(gauge_equivalent(&spec).is_err());
    }

    #[test]
    fn full_flux_quantum_is_trivial() {
        let spec = RingSpec::three_links(5, 2, 1.0, 0.5, 0.8, [1, 2, 4]);
        assert_close(&spectrum(&spec), &spectrum(&spec.clone().with_flux(2.0 * PI)), 1e-10);
    }

    #[test]
    fn flux_reflection() {
        let spec = RingSpec::three_links(5, 3, 1.5, 0.4, 0.9, [2, 3, 5]).with_flux(0.7);
        let mirrored = spec.clone().with_flux(-0.7);
        assert_close(&spectrum(&spec), &spectrum(&mirrored), 1e-10);
    }

    #[test]
    fn basis_mismatch_and_invalid_specs() {
        let basis = FockBasis::new(4, 2).unwrap();
        assert!(matches!(
            build_hamiltonian(&RingSpec::uniform(4, 3, 1.0), &basis),
            Err(HamiltonianError::BasisMismatch { .. })
        ));
        let mut spec = RingSpec::uniform(4, 2, -1.0);
        assert!(spec.validate().is_err());
        spec.interaction = 1.0;
        spec.weak_links = vec![WeakLink { link: 5, strength: 0.5 }];
        assert!(spec.validate().is_err());
        spec.weak_links = vec![WeakLink { link: 2, strength: 0.0 }];
        assert!(spec.validate().is_err());
        spec.weak_links = vec![WeakLink { link: 2, strength: 0.5 }; 2];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn coordinate_dump() {
        let h = SparseOperator::diagonal(&[1.0, -2.5]);
        let mut out = Vec::new();
        h.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "# dimension 2 nnz 2\n0 0 1e0 0e0\n1 1 -2.5e0 0e0\n");
    }
}
