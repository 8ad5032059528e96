//! Ring-lattice beam shaping: targets, MRAF phase retrieval, a simulated
//! camera arm and the azimuthal feedback loop.

pub mod feedback;
pub mod field;
pub mod measure;
pub mod mraf;
pub mod pgm;
pub mod profile;
pub mod target;

use thiserror::Error;

pub use feedback::{discrepancy, feedback_loop, DiscrepancyFormula, FeedbackOutcome, FeedbackParams, FeedbackRecord};
pub use field::{propagate, ComplexField, Fft2, Propagator};
pub use measure::{simulate_measurement, Aberration};
pub use mraf::{initial_phase, mraf, InitialPhase, Kinoform, MrafParams, MrafResult, Optics, OpticsParams};
pub use profile::{azimuthal_profile, count_maxima, AzimuthalProfile, Extremum, ExtremumKind};
pub use target::{generate_ring_target, RingGeometry, RingTarget, RingTargetParams};

#[derive(Debug, Error)]
pub enum BeamError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("grid mismatch: expected {expected} pixels, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("feedback best discrepancy {best_percent:.3}% is not below {threshold_percent}%")]
    NotConverged {
        best_percent: f64,
        threshold_percent: f64,
        outcome: Box<FeedbackOutcome>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
