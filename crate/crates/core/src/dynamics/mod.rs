//! Grid quantum dynamics under the nonrelativistic FW Hamiltonian, spin
//! precession and spin autocorrelation operators.

pub mod evolve;
pub mod grid;
pub mod hamiltonian;
pub mod interferometer;
pub mod spin;

pub use evolve::{bicgstab, evolve, probability_current_check, CurrentCheck, EvolutionStats, Propagator, SolveStats};
pub use grid::{GaussianPacket, GridGeometry, SpinorGrid};
pub use hamiltonian::{build_fw_hamiltonian, build_fw_hamiltonian_with, HamiltonianTerms, Term, TermMagnitudes};
pub use interferometer::{interferometric_phase, InterferometerResult, InterferometerSetup};
pub use spin::{autocorrelation, precess, propagator, AutocorrelationResult, Driver, Op, SpinState, Trajectory};
