//! Exact diagonalization and effective models of a Bose-Hubbard ring with
//! three weak links, plus holographic shaping of the ring-lattice potential.

pub mod beam;
pub mod effective;
pub mod eigen;
pub mod fock;
pub mod hamiltonian;
pub mod observables;

pub use effective::{
    bath_modes, effective_potential, reduced_spectrum_1d, reduced_spectrum_2d, rf_aquid_spectrum, wkb_gap, BathData,
    EffectiveError, EffectiveModelSpec, KineticConvention, RealGrid,
};
pub use eigen::{lowest_eigenpairs, SolverConfig, SolverError, SpectrumResult};
pub use fock::{BasisError, BasisOptions, FockBasis, FockState, IndexStrategy};
pub use hamiltonian::{
    build_hamiltonian, gauge_equivalent, FluxMode, HamiltonianError, RingSpec, SparseOperator, WeakLink,
};
pub use observables::{
    density_profile, persistent_current, qubit_figures, CurrentOptions, DensityProfile, ObservableError, QubitFigures,
    SweepRow,
};
