use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::potential::{EffectiveGaugePotential, PotentialField, Provenance};
use crate::error::Result;
use crate::fields::{diff, FieldConfig, FieldPart};
use crate::spinor::{FourVector, PolarizedParticle};

/// ℬ, ℰ and ℱ_{αβ} at one event.
///
/// The identity form is ℬ = s⃗(∇·E) − (s⃗·∇)E − s⁰(∇×B), ℰ = −∇(s⃗·B),
/// which reduces to the familiar rest-frame expressions when s⁰ = 0. The
/// direct form differentiates the sampled potential. With the Hamiltonian
/// pair (𝒜⁰, 𝒜⃗) = −𝒜_α the components of ℱ satisfy ℱ_{ij} = −ε_{ijk}ℬ_k
/// and ℱ_{i0} = ℰ_i + ∂_t𝒜⃗_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFields {
    pub identity_b: Vector3<f64>,
    pub identity_e: Vector3<f64>,
    pub direct_b: Vector3<f64>,
    pub direct_e: Vector3<f64>,
    /// ℱ_{αβ} = ∂_α𝒜_β − ∂_β𝒜_α, lower indices.
    pub strength: [[f64; 4]; 4],
}

impl EffectiveFields {
    /// Largest disagreement between the identity and direct forms.
    pub fn form_mismatch(&self) -> f64 {
        (self.identity_b - self.direct_b).amax().max((self.identity_e - self.direct_e).amax())
    }

    pub fn strength_antisymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                worst = worst.max((self.strength[a][b] + self.strength[b][a]).abs());
            }
        }
        worst
    }

    pub fn strength_max(&self) -> f64 {
        self.strength.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Effective fields for a rest-frame polarization ŝ.
pub fn effective_fields(
    config: &FieldConfig,
    polarization: &Vector3<f64>,
    event: &FourVector,
    h: f64,
) -> Result<EffectiveFields> {
    let potential = EffectiveGaugePotential::nonrelativistic(config.clone(), *polarization)?;
    fields_with(config, &potential, event, h)
}

/// Effective fields with the boosted four-spin of a moving particle.
pub fn effective_fields_boosted(
    config: &FieldConfig,
    particle: &PolarizedParticle,
    event: &FourVector,
    h: f64,
) -> Result<EffectiveFields> {
    let potential = EffectiveGaugePotential::relativistic(config.clone(), particle.four_spin())?;
    fields_with(config, &potential, event, h)
}

fn fields_with(
    config: &FieldConfig,
    potential: &EffectiveGaugePotential,
    event: &FourVector,
    h: f64,
) -> Result<EffectiveFields> {
    let s = potential.four_spin();
    let s_vec = s.spatial();
    if !config.singular_axes().is_empty() {
        config.require_clearance(&event.spatial(), config.exclusion_radius() + 2.0 * h)?;
    }
    let je = diff::jacobian(|ev| Ok(config.sample(ev)?.electric), event, h)?;
    let mut identity_b = s_vec * je.trace() - je * s_vec;
    if s[0] != 0.0 {
        identity_b -= crate::fields::numeric_curl(config, FieldPart::Magnetic, event, h)? * s[0];
    }
    let identity_e = -diff::gradient(|ev| Ok(s_vec.dot(&config.sample(ev)?.magnetic)), event, h)?;

    let direct_b = diff::curl(|ev| Ok(potential.potential(ev)?.vector()), event, h)?;
    let direct_e = -diff::gradient(|ev| Ok(potential.potential(ev)?.scalar()), event, h)?;
    let strength = field_strength(potential, event, h)?;
    Ok(EffectiveFields { identity_b, identity_e, direct_b, direct_e, strength })
}

/// Numeric ℱ_{αβ} of any potential by central differences in all four
/// coordinates. Antisymmetric by construction.
pub fn field_strength<P: PotentialField + ?Sized>(potential: &P, event: &FourVector, h: f64) -> Result<[[f64; 4]; 4]> {
    let mut d = [[0.0; 4]; 4];
    for (alpha, row) in d.iter_mut().enumerate() {
        let mut plus = *event;
        plus.0[alpha] += h;
        let mut minus = *event;
        minus.0[alpha] -= h;
        let ap = potential.potential(&plus)?.covariant;
        let am = potential.potential(&minus)?.covariant;
        for beta in 0..4 {
            row[beta] = (ap[beta] - am[beta]) / (2.0 * h);
        }
    }
    let mut f = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            f[a][b] = d[a][b] - d[b][a];
        }
    }
    Ok(f)
}

/// ℬ and ℰ from the closed-form field Jacobian (analytic for the built-in
/// sources), for the rest-frame or boosted spin of `provenance`.
pub fn exact_effective_fields(
    config: &FieldConfig,
    provenance: &Provenance,
    event: &FourVector,
    h: f64,
) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let s = match provenance {
        Provenance::Relativistic(s) => *s,
        Provenance::Nonrelativistic(s) => FourVector::from_parts(0.0, s),
    };
    let s_vec = s.spatial();
    let jac = config.jacobian(event, h)?;
    let curl_b = diff::curl_of_jacobian(&jac.magnetic);
    let b = s_vec * jac.electric.trace() - jac.electric * s_vec - curl_b * s[0];
    let e = -(jac.magnetic.transpose() * s_vec);
    Ok((b, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Axis, ExpressionField, DEFAULT_STEP};

    #[test]
    fn line_charge_parallel_spin_has_no_effective_field() {
        let cfg = FieldConfig::line_charge(1.3, Axis::z()).unwrap();
        let f = effective_fields(&cfg, &Vector3::z(), &FourVector::new(0.0, 0.7, -0.4, 2.0), DEFAULT_STEP).unwrap();
        assert!(f.identity_b.amax() < 1e-6);
        assert!(f.direct_b.amax() < 1e-6);
        assert!(f.direct_e.amax() < 1e-12);
        assert!(f.strength_max() < 1e-6);
        assert_eq!(f.strength_antisymmetry(), 0.0);
    }

    #[test]
    fn pulsed_field_has_no_effective_electric_field() {
        let cfg = FieldConfig::pulsed_uniform_b(Vector3::z() * 2.0, 0.0, 5.0, crate::fields::Envelope::Smooth).unwrap();
        let f = effective_fields(&cfg, &Vector3::z(), &FourVector::new(1.0, 3.0, 1.0, 0.0), DEFAULT_STEP).unwrap();
        assert_eq!(f.identity_e, Vector3::zeros());
        assert_eq!(f.direct_e, Vector3::zeros());
    }

    #[test]
    fn linear_electric_field() {
        let field = ExpressionField::parse([Some("x"), None, None], [None, None, None]).unwrap();
        let cfg = FieldConfig::expression(field);
        let f = effective_fields(&cfg, &Vector3::z(), &FourVector::new(0.0, 0.3, 0.2, 0.1), DEFAULT_STEP).unwrap();
        assert!((f.identity_b - Vector3::z()).amax() < 1e-9);
        assert!((f.direct_b - Vector3::z()).amax() < 1e-9);
        // ℱ_{xy} = −ℬ_z
        assert!((f.strength[1][2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_matches_numeric_for_line_charge() {
        let cfg = FieldConfig::line_charge(2.0, Axis::z()).unwrap();
        let ev = FourVector::new(0.0, 0.9, 0.5, 0.0);
        let s = Vector3::new(1.0, 0.0, 0.0);
        let (b, e) = exact_effective_fields(&cfg, &Provenance::Nonrelativistic(s), &ev, DEFAULT_STEP).unwrap();
        let f = effective_fields(&cfg, &s, &ev, DEFAULT_STEP).unwrap();
        assert!((b - f.identity_b).amax() < 1e-6);
        assert!(e.amax() == 0.0);
        assert!(b.amax() > 0.1);
    }
}
