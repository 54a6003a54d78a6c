use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Sign of the totally antisymmetric symbol with all indices up, ε^{0123}.
///
/// Every four-index contraction in the crate goes through [`levi_civita_upper`]
/// or [`levi_civita_lower`], so this is the only place the convention lives.
pub const EPSILON_0123: f64 = 1.0;

/// Minkowski metric diag(+1, −1, −1, −1).
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

fn permutation_sign(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// ε^{αβμν}.
pub fn levi_civita_upper(a: usize, b: usize, c: usize, d: usize) -> f64 {
    EPSILON_0123 * permutation_sign([a, b, c, d])
}

/// ε_{αβμν}; lowering all four indices picks up det(g) = −1.
pub fn levi_civita_lower(a: usize, b: usize, c: usize, d: usize) -> f64 {
    -levi_civita_upper(a, b, c, d)
}

/// Three-dimensional ε^{ijk} with spatial indices 0..3 standing for x, y, z.
pub fn levi_civita3(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Contravariant four-vector (t, x, y, z) in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const fn new(t: f64, x: f64, y: f64, z: f64) -> Self {
        Self([t, x, y, z])
    }

    pub fn from_parts(t: f64, r: &Vector3<f64>) -> Self {
        Self([t, r.x, r.y, r.z])
    }

    pub fn t(&self) -> f64 {
        self.0[0]
    }

    pub fn spatial(&self) -> Vector3<f64> {
        Vector3::new(self.0[1], self.0[2], self.0[3])
    }

    /// Covariant components v_μ = g_{μν} v^ν.
    pub fn lower(&self) -> [f64; 4] {
        std::array::from_fn(|i| METRIC[i] * self.0[i])
    }

    /// Minkowski product with signature (+, −, −, −).
    pub fn dot(&self, other: &FourVector) -> f64 {
        (0..4).map(|i| METRIC[i] * self.0[i] * other.0[i]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs_diff(&self, other: &FourVector) -> f64 {
        (0..4).map(|i| (self.0[i] - other.0[i]).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Neutral spin-1/2 particle with an anomalous magnetic moment, polarized
/// along `polarization` in its rest frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizedParticle {
    mass: f64,
    moment: f64,
    polarization: Vector3<f64>,
    momentum: Vector3<f64>,
}

const UNIT_TOLERANCE: f64 = 1e-12;

impl PolarizedParticle {
    pub fn new(mass: f64, moment: f64, polarization: Vector3<f64>, momentum: Vector3<f64>) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        if !moment.is_finite() || !momentum.iter().all(|c| c.is_finite()) {
            return Err(invalid("moment and momentum must be finite"));
        }
        if (polarization.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invalid(format!("polarization must be a unit vector, |s| = {}", polarization.norm())));
        }
        Ok(Self { mass, moment, polarization, momentum })
    }

    /// Particle at rest.
    pub fn at_rest(mass: f64, moment: f64, polarization: Vector3<f64>) -> Result<Self> {
        Self::new(mass, moment, polarization, Vector3::zeros())
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn moment(&self) -> f64 {
        self.moment
    }

    pub fn polarization(&self) -> Vector3<f64> {
        self.polarization
    }

    pub fn momentum(&self) -> Vector3<f64> {
        self.momentum
    }

    pub fn with_momentum(&self, momentum: Vector3<f64>) -> Result<Self> {
        Self::new(self.mass, self.moment, self.polarization, momentum)
    }

    pub fn with_moment(&self, moment: f64) -> Self {
        Self { moment, ..*self }
    }

    pub fn energy(&self) -> f64 {
        (self.mass * self.mass + self.momentum.norm_squared()).sqrt()
    }

    pub fn four_momentum(&self) -> FourVector {
        FourVector::from_parts(self.energy(), &self.momentum)
    }

    /// v = p / p⁰.
    pub fn velocity(&self) -> Vector3<f64> {
        self.momentum / self.energy()
    }

    pub fn four_spin(&self) -> FourVector {
        boost_polarization(self.mass, &self.momentum, &self.polarization)
    }
}

/// Boosted spin four-vector
/// s = (p·ŝ/m, ŝ + p (p·ŝ) / (m (p⁰ + m))).
pub fn four_spin(mass: f64, momentum: &Vector3<f64>, polarization: &Vector3<f64>) -> Result<FourVector> {
    if !(mass > 0.0) {
        return Err(invalid(format!("mass must be positive, got {mass}")));
    }
    Ok(boost_polarization(mass, momentum, polarization))
}

fn boost_polarization(mass: f64, p: &Vector3<f64>, s: &Vector3<f64>) -> FourVector {
    let energy = (mass * mass + p.norm_squared()).sqrt();
    let ps = p.dot(s);
    let spatial = s + p * (ps / (mass * (energy + mass)));
    FourVector::from_parts(ps / mass, &spatial)
}
