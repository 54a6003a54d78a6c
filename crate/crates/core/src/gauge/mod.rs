//! The effective U(1) potential of a magnetic moment, its field strength and
//! the force-free conditions under which it is pure gauge.

pub mod conditions;
pub mod fields;
pub mod potential;

pub use conditions::{
    check_topological_conditions, Condition, ConditionReport, ConditionResult, LatticeSample, RegionShape,
    SampleRegion, DEFAULT_CONDITION_TOLERANCE, DEFAULT_LATTICE_RESOLUTION,
};
pub use fields::{effective_fields, effective_fields_boosted, exact_effective_fields, field_strength, EffectiveFields};
pub use potential::{
    effective_potential, gauge_transform, nonrelativistic_potential, EffectiveGaugePotential, EffectivePotential,
    GaugeFunction, GaugeTransformed, PotentialField, Provenance,
};
