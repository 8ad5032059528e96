//! Fixed workloads shared by the benchmarks.

use std::f64::consts::PI;

use aquid_core::beam::{generate_ring_target, Optics, OpticsParams, RingTarget, RingTargetParams};
use aquid_core::RingSpec;

/// Eight-site qubit ring at the frustration point.
pub fn qubit_ring(particles: usize) -> RingSpec {
    RingSpec::eight_site(particles, 1.0, 0.5, 0.8).with_flux(PI)
}

/// Optics and the default eight-site target on an `n x n` grid.
pub fn beam_setup(n: usize) -> (Optics, RingTarget) {
    let optics = Optics::new(OpticsParams {
        grid: n,
        ..Default::default()
    })
    .expect("valid optics");
    let target = generate_ring_target(&RingTargetParams::default(), n, n).expect("target fits the grid");
    (optics, target)
}
