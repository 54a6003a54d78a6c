use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::spinor::kinematics::{levi_civita3, METRIC};

/// Electric and magnetic field at one event.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSample {
    pub electric: Vector3<f64>,
    pub magnetic: Vector3<f64>,
}

impl FieldSample {
    pub fn new(electric: Vector3<f64>, magnetic: Vector3<f64>) -> Self {
        Self { electric, magnetic }
    }

    pub fn is_finite(&self) -> bool {
        self.electric.iter().chain(self.magnetic.iter()).all(|c| c.is_finite())
    }
}

/// Contravariant field strength F^{μν} with F^{i0} = E^i and
/// F^{ij} = −ε^{ijk} B^k.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldTensor(pub [[f64; 4]; 4]);

impl FieldTensor {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_sample(sample: &FieldSample) -> Self {
        assemble_field_tensor(sample)
    }

    pub fn electric(&self) -> Vector3<f64> {
        Vector3::new(self.0[1][0], self.0[2][0], self.0[3][0])
    }

    /// B^k = −½ ε^{ijk} F^{ij}.
    pub fn magnetic(&self) -> Vector3<f64> {
        let mut b = Vector3::zeros();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    b[k] -= 0.5 * levi_civita3(i, j, k) * self.0[i + 1][j + 1];
                }
            }
        }
        b
    }

    pub fn sample(&self) -> FieldSample {
        FieldSample::new(self.electric(), self.magnetic())
    }

    /// Covariant F_{μν} = g_{μα} g_{νβ} F^{αβ}.
    pub fn lower(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|mu| std::array::from_fn(|nu| METRIC[mu] * METRIC[nu] * self.0[mu][nu]))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.map(|row| row.map(|v| v * factor)))
    }

    /// max |F^{μν} + F^{νμ}|.
    pub fn antisymmetry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                worst = worst.max((self.0[mu][nu] + self.0[nu][mu]).abs());
            }
        }
        worst
    }
}

pub fn assemble_field_tensor(sample: &FieldSample) -> FieldTensor {
    let mut f = [[0.0; 4]; 4];
    for i in 0..3 {
        f[i + 1][0] = sample.electric[i];
        f[0][i + 1] = -sample.electric[i];
        for j in 0..3 {
            f[i + 1][j + 1] = -(0..3).map(|k| levi_civita3(i, j, k) * sample.magnetic[k]).sum::<f64>();
        }
    }
    FieldTensor(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_electric() {
        let f = assemble_field_tensor(&FieldSample::new(Vector3::x(), Vector3::zeros()));
        assert_eq!(f.0[1][0], 1.0);
        assert_eq!(f.0[0][1], -1.0);
        let nonzero = f.0.iter().flatten().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn pure_magnetic() {
        let f = assemble_field_tensor(&FieldSample::new(Vector3::zeros(), Vector3::z()));
        assert_eq!(f.0[1][2], -1.0);
        assert_eq!(f.0[2][1], 1.0);
    }

    proptest! {
        #[test]
        fn round_trip_and_antisymmetry(
            e in prop::array::uniform3(-1e3f64..1e3),
            b in prop::array::uniform3(-1e3f64..1e3),
        ) {
            let sample = FieldSample::new(Vector3::from(e), Vector3::from(b));
            let f = assemble_field_tensor(&sample);
            prop_assert_eq!(f.antisymmetry_residual(), 0.0);
            prop_assert_eq!(f.sample(), sample);
        }
    }
}
