//! Line, loop and surface phases by adaptive quadrature, plus winding numbers.

pub mod integrals;
pub mod path;
pub mod quadrature;
pub mod surface;
pub mod winding;

pub use integrals::{
    ac_phase, open_path_phase, potential_phase, sab_phase, PhaseBreakdown, PhaseIntegral, SIGN_CONVENTION,
};
pub use path::{Path, PathKind, SpacetimePath, Timing, CLOSURE_TOLERANCE};
pub use quadrature::{gauss_legendre, integrate, integrate_scalar, Estimate, QuadratureOptions};
pub use surface::{surface_flux_phase, FluxPhase, Surface, TriangleMesh, FLUX_AGREEMENT};
pub use winding::{swept_angle, winding_number};
