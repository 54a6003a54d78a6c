//! Dirac-representation Clifford algebra.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use super::kinematics::{FourVector, METRIC};
use crate::error::{invalid, Result};

pub type ComplexMatrix4 = Matrix4<Complex64>;
pub type ComplexMatrix2 = Matrix2<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pauli matrices σ_x, σ_y, σ_z.
pub fn pauli() -> [ComplexMatrix2; 3] {
    [Matrix2::new(ZERO, ONE, ONE, ZERO), Matrix2::new(ZERO, -I, I, ZERO), Matrix2::new(ONE, ZERO, ZERO, -ONE)]
}

fn blocks(a: &ComplexMatrix2, b: &ComplexMatrix2, c: &ComplexMatrix2, d: &ComplexMatrix2) -> ComplexMatrix4 {
    let mut m = ComplexMatrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(b);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(c);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(d);
    m
}

/// The full operator basis used by the identity checks.
#[derive(Debug, Clone)]
pub struct GammaBasis {
    /// γ^μ, upper index.
    pub gamma: [ComplexMatrix4; 4],
    /// γ⁵ = iγ⁰γ¹γ²γ³.
    pub gamma5: ComplexMatrix4,
    /// β = γ⁰.
    pub beta: ComplexMatrix4,
    /// Σ^i = diag(σ_i, σ_i).
    pub spin: [ComplexMatrix4; 3],
    /// σ^{μν} = (i/2)[γ^μ, γ^ν].
    pub sigma: [[ComplexMatrix4; 4]; 4],
}

pub fn build_gamma_basis() -> GammaBasis {
    let id = ComplexMatrix2::identity();
    let zero = ComplexMatrix2::zeros();
    let s = pauli();

    let gamma0 = blocks(&id, &zero, &zero, &(-id));
    let gamma = [
        gamma0,
        blocks(&zero, &s[0], &(-s[0]), &zero),
        blocks(&zero, &s[1], &(-s[1]), &zero),
        blocks(&zero, &s[2], &(-s[2]), &zero),
    ];
    let gamma5 = gamma[0] * gamma[1] * gamma[2] * gamma[3] * I;
    let spin = std::array::from_fn(|i| blocks(&s[i], &zero, &zero, &s[i]));
    let sigma =
        std::array::from_fn(|mu| std::array::from_fn(|nu| (gamma[mu] * gamma[nu] - gamma[nu] * gamma[mu]) * (I * 0.5)));

    GammaBasis { gamma, gamma5, beta: gamma0, spin, sigma }
}

impl GammaBasis {
    /// Feynman slash v̸ = γ^μ v_μ.
    pub fn slash(&self, v: &FourVector) -> ComplexMatrix4 {
        let lower = v.lower();
        (0..4).fold(ComplexMatrix4::zeros(), |acc, mu| acc + self.gamma[mu] * Complex64::from(lower[mu]))
    }

    /// {γ^μ, γ^ν}.
    pub fn anticommutator(&self, mu: usize, nu: usize) -> ComplexMatrix4 {
        self.gamma[mu] * self.gamma[nu] + self.gamma[nu] * self.gamma[mu]
    }

    /// Largest entry deviation of {γ^μ, γ^ν} from 2g^{μν}𝕀 over all 16 pairs.
    pub fn clifford_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                let metric = if mu == nu { 2.0 * METRIC[mu] } else { 0.0 };
                let target = ComplexMatrix4::identity() * Complex64::from(metric);
                worst = worst.max(max_abs(&(self.anticommutator(mu, nu) - target)));
            }
        }
        worst
    }
}

/// Which spin sector a projector selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpinSign {
    Plus,
    Minus,
}

impl SpinSign {
    pub fn value(self) -> f64 {
        match self {
            SpinSign::Plus => 1.0,
            SpinSign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            SpinSign::Plus => SpinSign::Minus,
            SpinSign::Minus => SpinSign::Plus,
        }
    }
}

const SPIN_NORM_TOLERANCE: f64 = 1e-10;

/// Σ±(s) = (𝕀 ± γ⁵ s̸) / 2 for a spacelike unit four-spin.
pub fn spin_projector(basis: &GammaBasis, s: &FourVector, sign: SpinSign) -> Result<ComplexMatrix4> {
    let norm = s.norm_sq();
    if (norm + 1.0).abs() > SPIN_NORM_TOLERANCE {
        return Err(invalid(format!("four-spin must satisfy s·s = -1, got {norm}")));
    }
    let g5s = basis.gamma5 * basis.slash(s);
    Ok((ComplexMatrix4::identity() + g5s * Complex64::from(sign.value())) * Complex64::from(0.5))
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs<const R: usize, const C: usize>(m: &nalgebra::SMatrix<Complex64, R, C>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
