//! Dirac algebra, spin projectors and the four-spin of a polarized particle.

pub mod gamma;
pub mod identities;
pub mod kinematics;

pub use gamma::{build_gamma_basis, pauli, spin_projector, ComplexMatrix2, ComplexMatrix4, GammaBasis, SpinSign};
pub use identities::{
    lagrangian_split_check, on_shell_spinor, verify_bilinear_identities, DiracSpinor, DomainResiduals, IdentityReport,
    IdentityTrial, SplitCheck,
};
pub use kinematics::{
    four_spin, levi_civita3, levi_civita_lower, levi_civita_upper, FourVector, PolarizedParticle, EPSILON_0123, METRIC,
};
