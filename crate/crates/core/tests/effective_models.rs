use std::f64::consts::PI;

use aquid_core::effective::{mirror_line_spectrum, potential_coefficients};
use aquid_core::{
    bath_modes, effective_potential, reduced_spectrum_1d, reduced_spectrum_2d, rf_aquid_spectrum, wkb_gap,
    EffectiveModelSpec, KineticConvention, RealGrid, SolverConfig,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn spec() -> EffectiveModelSpec {
    EffectiveModelSpec::new(12, 0.7, 0.8, 0.5)
}

/// Plane-wave Hamiltonian `kappa n^2 + V(theta, -theta)` with the potential
/// harmonics taken from a discrete Fourier sum of samples.
fn line_oracle(spec: &EffectiveModelSpec, basis: usize) -> Vec<f64> {
    let samples = 256;
    let v: Vec<f64> = (0..samples)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / samples as f64;
            effective_potential(t, -t, spec, None)
        })
        .collect();
    let harmonic = |k: i64| -> Complex64 {
        v.iter()
            .enumerate()
            .map(|(j, &x)| x * Complex64::from_polar(1.0, -(k as f64) * 2.0 * PI * j as f64 / samples as f64))
            .sum::<Complex64>()
            / samples as f64
    };
    let half = (basis / 2) as i64;
    let kappa = spec.reduced_kinetic();
    let h = DMatrix::<Complex64>::from_fn(basis, basis, |r, c| {
        let (n, m) = (r as i64 - half, c as i64 - half);
        let d = if n == m { kappa * (n * n) as f64 } else { 0.0 };
        harmonic(n - m) + d
    });
    let mut e: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

#[test]
fn quadratic_coefficients_match_uncancelled_sum() {
    for (m, u, j) in [(12, 0.5, 1.0), (18, 3.0, 0.25), (24, 0.1, 7.0)] {
        let mut s = EffectiveModelSpec::new(m, 0.7, 0.8, u);
        s.j = j;
        let bath = bath_modes(&s).unwrap();
        for a in 0..3 {
            let sum: f64 = bath.couplings[a]
                .iter()
                .zip(&bath.frequencies)
                .map(|(z, w)| u * j * z * z / (w * w))
                .sum();
            let c = 0.5 * (0.5 - sum);
            assert!((c - bath.quadratic[a]).abs() < 1e-12, "M={m} alpha={a}");
        }
        let unit = bath_modes(&EffectiveModelSpec::new(m, 0.7, 0.8, 1.0)).unwrap();
        assert_eq!(unit.quadratic, bath.quadratic);
    }
}

#[test]
fn quadratic_coefficients_shrink_with_ring_size() {
    let c: Vec<[f64; 3]> = [12, 18, 24, 30]
        .iter()
        .map(|&m| {
            bath_modes(&EffectiveModelSpec::new(m, 0.7, 0.8, 1.0))
                .unwrap()
                .quadratic
        })
        .collect();
    for w in c[1..].windows(2) {
        assert!(w[1].iter().zip(&w[0]).all(|(x, y)| x.abs() < y.abs()), "{c:?}");
    }
    for a in [0, 2] {
        assert!(c[1][a].abs() < c[0][a].abs(), "{c:?}");
    }
}

#[test]
fn potential_symmetries() {
    let s = spec().with_flux(1.3);
    let mirrored = spec().with_flux(-1.3);
    for i in 0..17 {
        for k in 0..17 {
            let (a, b) = (-PI + 2.0 * PI * i as f64 / 16.0, -PI + 2.0 * PI * k as f64 / 16.0);
            let v = effective_potential(a, b, &s, None);
            assert!((v - effective_potential(-b, -a, &s, None)).abs() < 1e-14);
            assert!((v - effective_potential(-a, -b, &mirrored, None)).abs() < 1e-14);
            assert!((v - effective_potential(a + 2.0 * PI, b - 2.0 * PI, &s, None)).abs() < 1e-12);
        }
    }
}

#[test]
fn fourier_table_reproduces_potential() {
    let s = spec().with_flux(2.4);
    let table = potential_coefficients(&s, 9, None);
    for i in 0..17 {
        for k in 0..17 {
            let (a, b) = (2.0 * PI * i as f64 / 17.0, 2.0 * PI * k as f64 / 17.0);
            let sum: Complex64 = table
                .iter()
                .map(|&((m1, m2), v)| v * Complex64::from_polar(1.0, m1 as f64 * a + m2 as f64 * b))
                .sum();
            assert!(sum.im.abs() < 1e-14);
            assert!((sum.re - effective_potential(a, b, &s, None)).abs() < 1e-14);
        }
    }
}

#[test]
fn line_spectrum_matches_quadrature_oracle() {
    for flux in [0.0, 1.1, PI, 4.0] {
        for convention in [
            KineticConvention::ActiveJunctions,
            KineticConvention::IncludeConstrained,
        ] {
            let mut s = spec().with_flux(flux);
            s.kinetic_convention = convention;
            let got = reduced_spectrum_1d(&s, 6, 41).unwrap();
            assert!(got.doubling_shift < 1e-8);
            let want = line_oracle(&s, 83);
            for (g, w) in got.eigenvalues.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "flux {flux}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn flux_reflection_of_line_spectrum() {
    for flux in [0.4, 1.9, 2.8] {
        let a = reduced_spectrum_1d(&spec().with_flux(flux), 5, 41).unwrap().eigenvalues;
        let b = reduced_spectrum_1d(&spec().with_flux(2.0 * PI - flux), 5, 41)
            .unwrap()
            .eigenvalues;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn deep_well_reaches_harmonic_limit() {
    // V = -(2 J''/3) cos theta, so V'' = 2 J''/3 and omega = sqrt(2 kappa V'')
    let mut s = EffectiveModelSpec::new(12, 0.0, 30.0, 0.01);
    s.kinetic_convention = KineticConvention::ActiveJunctions;
    let kappa = s.reduced_kinetic();
    let omega = (2.0 * kappa * 20.0).sqrt();
    let e = reduced_spectrum_1d(&s, 3, 101).unwrap().eigenvalues;
    let (g1, g2) = (e[1] - e[0], e[2] - e[1]);
    assert!((g1 - omega).abs() < 0.01 * omega, "{g1} vs {omega}");
    // large-q Mathieu expansion: E_n = -A + omega (n + 1/2) - (kappa/16)(2n^2 + 2n + 1)
    assert!((g1 - (omega - kappa / 4.0)).abs() < 0.1 * kappa, "{g1} {omega} {kappa}");
    assert!((g1 - g2 - kappa / 4.0).abs() < 0.1 * kappa, "{g1} {g2} {kappa}");
}

#[test]
fn free_rotor_in_two_angles() {
    let cfg = SolverConfig::default();
    let mut s = EffectiveModelSpec::new(12, 0.0, 0.0, 0.8);
    let kappa = 0.8 / 4.0;
    let e = reduced_spectrum_2d(&s, 9, 37, &cfg).unwrap().eigenvalues;
    let want = [0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0].map(|x| x * kappa);
    for (g, w) in e.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{e:?}");
    }
    s.kinetic_convention = KineticConvention::IncludeConstrained;
    let e = reduced_spectrum_2d(&s, 7, 37, &cfg).unwrap().eigenvalues;
    let want = [0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0].map(|x| x * 2.0 * kappa / 3.0);
    for (g, w) in e.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9, "{e:?}");
    }
}

#[test]
fn line_levels_decrease_with_basis() {
    let s = spec().with_flux(PI);
    let mut prev = mirror_line_spectrum(&s, 4, 17).unwrap();
    for b in [21, 25, 33, 41] {
        let e = mirror_line_spectrum(&s, 4, b).unwrap();
        for (x, y) in e.iter().zip(&prev) {
            assert!(*x <= y + 1e-12, "basis {b}: {x} > {y}");
        }
        prev = e;
    }
}

#[test]
fn quadratic_terms_change_the_spectrum_consistently() {
    let mut s = spec().with_flux(2.0);
    s.quadratic = true;
    let plain = reduced_spectrum_1d(&spec().with_flux(2.0), 4, 41).unwrap().eigenvalues;
    let folded = mirror_line_spectrum(&s, 4, 323).unwrap();
    let direct = reduced_spectrum_1d(&s, 4, 161).unwrap().eigenvalues;
    for (a, b) in folded.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(plain.iter().zip(&direct).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn wkb_gap_properties() {
    assert_eq!(wkb_gap(1.0, 1.0, 1.0).unwrap(), 0.0);
    assert!((wkb_gap(1.0, 1.0, 2.0).unwrap() - 6.47e-3).abs() < 5e-6);
    let mut prev = f64::INFINITY;
    for ej in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let g = wkb_gap(1.0, ej, 2.0).unwrap();
        assert!(g > 0.0 && g < prev);
        prev = g;
    }
    assert!(wkb_gap(0.0, 1.0, 2.0).is_err());
    assert!(wkb_gap(1.0, 1.0, f64::NAN).is_err());
}

fn grid_oracle(u: f64, el: f64, ej: f64, flux: f64, grid: &RealGrid) -> Vec<f64> {
    let (n, h) = (grid.points, grid.step());
    let m = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            let x = grid.coordinate(i);
            2.0 * u / (h * h) + el * x * x - ej * (x - flux).cos()
        } else if i.abs_diff(j) == 1 {
            -u / (h * h)
        } else {
            0.0
        }
    });
    let mut e: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.total_cmp(b));
    e
}

#[test]
fn rf_aquid_matches_dense_oracle() {
    let grid = RealGrid {
        half_width: 12.0,
        points: 601,
    };
    for (ej, flux) in [(0.5, 0.0), (3.0, PI), (3.0, 1.0)] {
        let got = rf_aquid_spectrum(1.0, 1.0, ej, flux, 4, &grid).unwrap();
        let want = grid_oracle(1.0, 1.0, ej, flux, &grid);
        for (g, w) in got.eigenvalues.iter().zip(&want) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
    }
}

#[test]
fn rf_aquid_parity_and_refinement() {
    let (u, el, ej) = (0.6, 0.4, 2.0);
    let grid = RealGrid::auto(u, el, ej, 3);
    let a = rf_aquid_spectrum(u, el, ej, 1.2, 3, &grid).unwrap().eigenvalues;
    let b = rf_aquid_spectrum(u, el, ej, -1.2, 3, &grid).unwrap().eigenvalues;
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10);
    }
    let fine = RealGrid {
        points: 2 * grid.points - 1,
        ..grid
    };
    let c = rf_aquid_spectrum(u, el, ej, 1.2, 3, &fine).unwrap().eigenvalues;
    for (x, y) in a.iter().zip(&c) {
        // three-point stencil: error falls by four when the step halves
        assert!((x - y).abs() < 1e-4, "{x} {y}");
    }
}
