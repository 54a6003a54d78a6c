use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{assemble_field_tensor, FieldConfig, FieldSample, FieldTensor};
use crate::spinor::{levi_civita_lower, FourVector};

const SPIN_NORM_TOLERANCE: f64 = 1e-10;

/// Effective magnetic-moment potential at one event, stored with a lower
/// index as produced by 𝒜_α = −½ ε_{αβμν} s^β F^{μν}.
///
/// With ε^{0123} = +1 the contraction yields 𝒜_α = −(ŝ·B, ŝ×E) for a
/// rest-frame spin. The Hamiltonian pair used by the Schrödinger dynamics
/// and the phase functionals is (𝒜⁰, 𝒜⃗) = −𝒜_α, i.e. (ŝ·B, ŝ×E); the
/// gauge-invariant phase is then μ∫(𝒜⃗·dr − 𝒜⁰ dt).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectivePotential {
    pub covariant: [f64; 4],
}

impl EffectivePotential {
    pub fn from_hamiltonian_pair(scalar: f64, vector: &Vector3<f64>) -> Self {
        Self { covariant: [-scalar, -vector.x, -vector.y, -vector.z] }
    }

    /// 𝒜⁰ entering the Hamiltonian as μ𝒜⁰.
    pub fn scalar(&self) -> f64 {
        -self.covariant[0]
    }

    /// 𝒜⃗ entering the kinetic term as (p − μ𝒜⃗)².
    pub fn vector(&self) -> Vector3<f64> {
        -Vector3::new(self.covariant[1], self.covariant[2], self.covariant[3])
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..4).map(|i| (self.covariant[i] - other.covariant[i]).abs()).fold(0.0, f64::max)
    }
}

/// 𝒜_α = −½ ε_{αβμν} s^β F^{μν}, by explicit contraction.
pub fn effective_potential(field: &FieldTensor, s: &FourVector) -> Result<EffectivePotential> {
    check_spin(s)?;
    let mut a = [0.0; 4];
    for (alpha, slot) in a.iter_mut().enumerate() {
        let mut acc = 0.0;
        for beta in 0..4 {
            if s[beta] == 0.0 {
                continue;
            }
            for mu in 0..4 {
                for nu in 0..4 {
                    acc += levi_civita_lower(alpha, beta, mu, nu) * s[beta] * field.0[mu][nu];
                }
            }
        }
        *slot = -0.5 * acc;
    }
    Ok(EffectivePotential { covariant: a })
}

/// Nonrelativistic pair (ŝ·B, ŝ×E) evaluated directly from the 3-vectors.
pub fn nonrelativistic_potential(sample: &FieldSample, polarization: &Vector3<f64>) -> EffectivePotential {
    EffectivePotential::from_hamiltonian_pair(polarization.dot(&sample.magnetic), &polarization.cross(&sample.electric))
}

fn check_spin(s: &FourVector) -> Result<()> {
    let n = s.norm_sq();
    if (n + 1.0).abs() > SPIN_NORM_TOLERANCE {
        return Err(invalid(format!("four-spin must satisfy s·s = -1, got {n}")));
    }
    Ok(())
}

/// Anything that can be sampled as a covariant potential 𝒜_α(x).
pub trait PotentialField: Send + Sync {
    fn potential(&self, event: &FourVector) -> Result<EffectivePotential>;

    /// Spatial singular lines, if any, the sampler refuses to approach.
    fn singular_axes(&self) -> Vec<crate::fields::Axis> {
        Vec::new()
    }

    /// Times where the potential is not smooth.
    fn time_breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// How the effective potential is built from the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// Full ε-contraction with a (possibly boosted) four-spin.
    Relativistic(FourVector),
    /// Direct (ŝ·B, ŝ×E) with a rest-frame polarization.
    Nonrelativistic(Vector3<f64>),
}

/// Event → 𝒜_α sampler over a field configuration.
#[derive(Debug, Clone)]
pub struct EffectiveGaugePotential {
    config: FieldConfig,
    provenance: Provenance,
}

impl EffectiveGaugePotential {
    pub fn new(config: FieldConfig, provenance: Provenance) -> Result<Self> {
        match &provenance {
            Provenance::Relativistic(s) => check_spin(s)?,
            Provenance::Nonrelativistic(s) => {
                if (s.norm() - 1.0).abs() > 1e-12 {
                    return Err(invalid("polarization must be a unit vector"));
                }
            }
        }
        Ok(Self { config, provenance })
    }

    pub fn relativistic(config: FieldConfig, s: FourVector) -> Result<Self> {
        Self::new(config, Provenance::Relativistic(s))
    }

    pub fn nonrelativistic(config: FieldConfig, polarization: Vector3<f64>) -> Result<Self> {
        Self::new(config, Provenance::Nonrelativistic(polarization))
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Four-spin used by this sampler, (0, ŝ) in the nonrelativistic case.
    pub fn four_spin(&self) -> FourVector {
        match self.provenance {
            Provenance::Relativistic(s) => s,
            Provenance::Nonrelativistic(s) => FourVector::from_parts(0.0, &s),
        }
    }
}

impl PotentialField for EffectiveGaugePotential {
    fn potential(&self, event: &FourVector) -> Result<EffectivePotential> {
        let sample = self.config.sample(event)?;
        match &self.provenance {
            Provenance::Relativistic(s) => effective_potential(&assemble_field_tensor(&sample), s),
            Provenance::Nonrelativistic(s) => Ok(nonrelativistic_potential(&sample, s)),
        }
    }

    fn singular_axes(&self) -> Vec<crate::fields::Axis> {
        self.config.singular_axes()
    }

    fn time_breakpoints(&self) -> Vec<f64> {
        self.config.time_breakpoints()
    }
}

type ScalarFn = dyn Fn(&FourVector) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&FourVector) -> [f64; 4] + Send + Sync;

/// Gauge function φ(x) together with its covariant gradient ∂_αφ.
#[derive(Clone)]
pub struct GaugeFunction {
    value: Arc<ScalarFn>,
    gradient: Arc<GradientFn>,
}

impl std::fmt::Debug for GaugeFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("GaugeFunction")
    }
}

/// Step for the fourth-order gradient stencil of [`GaugeFunction::from_value`].
const GAUGE_STEP: f64 = 1e-3;

impl GaugeFunction {
    pub fn new(
        value: impl Fn(&FourVector) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&FourVector) -> [f64; 4] + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    /// Gradient by a fourth-order central stencil.
    pub fn from_value(value: impl Fn(&FourVector) -> f64 + Send + Sync + 'static) -> Self {
        let value: Arc<ScalarFn> = Arc::new(value);
        let f = value.clone();
        let gradient = move |ev: &FourVector| {
            std::array::from_fn(|a| {
                let at = |k: f64| {
                    let mut e = *ev;
                    e.0[a] += k * GAUGE_STEP;
                    f(&e)
                };
                (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * GAUGE_STEP)
            })
        };
        Self { value, gradient: Arc::new(gradient) }
    }

    pub fn value(&self, event: &FourVector) -> f64 {
        (self.value)(event)
    }

    pub fn gradient(&self, event: &FourVector) -> [f64; 4] {
        (self.gradient)(event)
    }
}

/// Potential after 𝒜_α → 𝒜_α ∓ ∂_αφ; wavefunctions pick up exp(±iμφ).
#[derive(Debug, Clone)]
pub struct GaugeTransformed<P> {
    pub inner: P,
    pub function: GaugeFunction,
    pub sign: crate::spinor::SpinSign,
}

/// Applies the U(1) transformation with the given sign.
pub fn gauge_transform<P: PotentialField>(
    inner: P,
    function: GaugeFunction,
    sign: crate::spinor::SpinSign,
) -> GaugeTransformed<P> {
    GaugeTransformed { inner, function, sign }
}

impl<P: PotentialField> GaugeTransformed<P> {
    /// Exponent of the accompanying wavefunction factor, ±μφ(x).
    pub fn phase_exponent(&self, moment: f64, event: &FourVector) -> f64 {
        self.sign.value() * moment * self.function.value(event)
    }
}

impl<P: PotentialField> PotentialField for GaugeTransformed<P> {
    fn potential(&self, event: &FourVector) -> Result<EffectivePotential> {
        let mut a = self.inner.potential(event)?;
        let g = self.function.gradient(event);
        for (slot, d) in a.covariant.iter_mut().zip(g) {
            *slot -= self.sign.value() * d;
        }
        Ok(a)
    }

    fn singular_axes(&self) -> Vec<crate::fields::Axis> {
        self.inner.singular_axes()
    }

    fn time_breakpoints(&self) -> Vec<f64> {
        self.inner.time_breakpoints()
    }
}

impl<P: PotentialField + ?Sized> PotentialField for &P {
    fn potential(&self, event: &FourVector) -> Result<EffectivePotential> {
        (**self).potential(event)
    }

    fn singular_axes(&self) -> Vec<crate::fields::Axis> {
        (**self).singular_axes()
    }

    fn time_breakpoints(&self) -> Vec<f64> {
        (**self).time_breakpoints()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinor::SpinSign;

    fn rest_z() -> FourVector {
        FourVector::new(0.0, 0.0, 0.0, 1.0)
    }

    /// Independent oracle: plain loops over all 256 index tuples with the
    /// permutation parity computed by counting inversions.
    fn brute_force(field: &FieldTensor, s: &FourVector) -> [f64; 4] {
        let parity = |p: [usize; 4]| -> f64 {
            let mut inv = 0;
            for i in 0..4 {
                for j in i + 1..4 {
                    if p[i] == p[j] {
                        return 0.0;
                    }
                    if p[i] > p[j] {
                        inv += 1;
                    }
                }
            }
            if inv % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut out = [0.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                for m in 0..4 {
                    for n in 0..4 {
                        // ε_{abmn} = −ε^{abmn} with ε^{0123} = +1
                        out[a] += -0.5 * -parity([a, b, m, n]) * s[b] * field.0[m][n];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn electric_field_gives_vector_potential() {
        let e0 = 1.7;
        let f = FieldTensor::from_sample(&FieldSample::new(Vector3::x() * e0, Vector3::zeros()));
        let a = effective_potential(&f, &rest_z()).unwrap();
        assert_eq!(a.covariant, brute_force(&f, &rest_z()));
        assert!((a.vector() - Vector3::y() * e0).norm() < 1e-15);
        assert_eq!(a.scalar(), 0.0);
    }

    #[test]
    fn magnetic_field_gives_scalar_potential() {
        let b0 = -0.4;
        let f = FieldTensor::from_sample(&FieldSample::new(Vector3::zeros(), Vector3::z() * b0));
        let a = effective_potential(&f, &rest_z()).unwrap();
        assert_eq!(a.covariant, brute_force(&f, &rest_z()));
        assert!((a.scalar() - b0).abs() < 1e-15);
        assert_eq!(a.vector(), Vector3::zeros());
    }

    #[test]
    fn zero_field_zero_potential() {
        let a = effective_potential(&FieldTensor::zero(), &rest_z()).unwrap();
        assert_eq!(a.covariant, [0.0; 4]);
    }

    #[test]
    fn rejects_unnormalized_spin() {
        let s = FourVector::new(0.0, 0.0, 0.0, 2.0);
        assert!(effective_potential(&FieldTensor::zero(), &s).is_err());
    }

    #[test]
    fn constant_gauge_function_changes_nothing() {
        let cfg = FieldConfig::line_charge(1.0, crate::fields::Axis::z()).unwrap();
        let base = EffectiveGaugePotential::nonrelativistic(cfg, Vector3::z()).unwrap();
        let g = GaugeFunction::from_value(|_| 3.0);
        let ev = FourVector::new(0.0, 1.0, 2.0, 0.0);
        let t = gauge_transform(&base, g, SpinSign::Plus);
        assert!(t.potential(&ev).unwrap().max_abs_diff(&base.potential(&ev).unwrap()) < 1e-12);
        assert_eq!(t.phase_exponent(0.5, &ev), 1.5);
    }

    #[test]
    fn linear_gauge_function_shifts_component() {
        let base = EffectiveGaugePotential::nonrelativistic(FieldConfig::zero(), Vector3::z()).unwrap();
        let g = GaugeFunction::from_value(|ev| ev[1]);
        let t = gauge_transform(&base, g, SpinSign::Plus);
        for x in [-3.0, 0.0, 2.5] {
            let a = t.potential(&FourVector::new(0.0, x, 1.0, 0.0)).unwrap();
            assert!((a.covariant[1] + 1.0).abs() < 1e-10);
            assert!(a.covariant[2].abs() < 1e-12);
        }
    }
}
