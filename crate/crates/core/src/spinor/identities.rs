//! Numerical checks of the projected-Lagrangian bilinear identities.
//!
//! The identities are evaluated as momentum-space bilinears ψ̄ M ψ with
//! i∂ → p. Three spinor domains are kept apart because the relations are
//! not equally valid on each:
//!
//! * `on_shell`: simultaneous eigen-spinors of p̸ (eigenvalue m) and Σ±,
//! * `projected`: Σ±χ for a random off-shell χ,
//! * `off_shell`: an arbitrary random spinor.

use nalgebra::{Vector3, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gamma::{build_gamma_basis, spin_projector, ComplexMatrix4, GammaBasis, SpinSign};
use super::kinematics::{levi_civita_lower, FourVector, PolarizedParticle};
use crate::error::{invalid, Result};
use crate::fields::FieldTensor;

/// Four-component Dirac spinor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracSpinor(pub Vector4<Complex64>);

impl DiracSpinor {
    /// ψ̄ M ψ = ψ† γ⁰ M ψ.
    pub fn bilinear(&self, basis: &GammaBasis, m: &ComplexMatrix4) -> Complex64 {
        (self.0.adjoint() * basis.gamma[0] * m * self.0)[(0, 0)]
    }

    pub fn scalar_density(&self, basis: &GammaBasis) -> f64 {
        self.bilinear(basis, &ComplexMatrix4::identity()).re
    }
}

/// On-shell positive-energy spinor u(p, ŝ) with Σ±u = u and ū u = 2m.
pub fn on_shell_spinor(basis: &GammaBasis, particle: &PolarizedParticle, sign: SpinSign) -> Result<DiracSpinor> {
    let m = particle.mass();
    let p = particle.four_momentum();
    let energy_projector =
        (basis.slash(&p) + ComplexMatrix4::identity() * Complex64::from(m)) / Complex64::from(2.0 * m);
    let projector = energy_projector * spin_projector(basis, &particle.four_spin(), sign)?;

    // Rank-one projector: its largest column spans the image.
    let column = (0..4)
        .max_by(|&a, &b| projector.column(a).norm().total_cmp(&projector.column(b).norm()))
        .expect("four columns");
    let raw = DiracSpinor(projector.column(column).into_owned());
    let density = raw.scalar_density(basis);
    if !(density > 0.0) {
        return Err(invalid("degenerate spinor projection"));
    }
    Ok(DiracSpinor(raw.0 * Complex64::from((2.0 * m / density).sqrt())))
}

/// max |(p̸ − m) u| relative to |u|.
pub fn dirac_residual(basis: &GammaBasis, particle: &PolarizedParticle, u: &DiracSpinor) -> f64 {
    let op = basis.slash(&particle.four_momentum()) - ComplexMatrix4::identity() * Complex64::from(particle.mass());
    (op * u.0).norm() / u.0.norm()
}

/// Both sides of the two identities for one spinor and one sector.
#[derive(Debug, Clone, Copy)]
pub struct IdentitySides {
    pub kinetic_lhs: Complex64,
    pub kinetic_rhs: Complex64,
    pub moment_lhs: Complex64,
    pub moment_rhs: Complex64,
}

impl IdentitySides {
    pub fn kinetic_residual(&self) -> f64 {
        (self.kinetic_lhs - self.kinetic_rhs).norm()
    }

    pub fn moment_residual(&self) -> f64 {
        (self.moment_lhs - self.moment_rhs).norm()
    }
}

/// Σ_{μν} σ^{μν} F_{μν}.
pub fn sigma_contract(basis: &GammaBasis, field: &FieldTensor) -> ComplexMatrix4 {
    let lower = field.lower();
    let mut acc = ComplexMatrix4::zeros();
    for mu in 0..4 {
        for nu in 0..4 {
            if lower[mu][nu] != 0.0 {
                acc += basis.sigma[mu][nu] * Complex64::from(lower[mu][nu]);
            }
        }
    }
    acc
}

/// w_α = ε_{αβμν} s^β F^{μν}.
pub fn dual_contract(s: &FourVector, field: &FieldTensor) -> [f64; 4] {
    std::array::from_fn(|alpha| {
        let mut acc = 0.0;
        for beta in 0..4 {
            for mu in 0..4 {
                for nu in 0..4 {
                    acc += levi_civita_lower(alpha, beta, mu, nu) * s[beta] * field.0[mu][nu];
                }
            }
        }
        acc
    })
}

/// Evaluates
/// ψ̄(p̸ − m)Σ±ψ  vs  ½ψ̄(p̸ − m)ψ, and
/// (μ/2)ψ̄ σ^{μν}F_{μν} Σ±ψ  vs  ∓(μ/4)ψ̄ γ^α ε_{αβμν} s^β F^{μν} ψ.
pub fn identity_sides(
    basis: &GammaBasis,
    particle: &PolarizedParticle,
    field: &FieldTensor,
    psi: &DiracSpinor,
    sign: SpinSign,
) -> Result<IdentitySides> {
    let m = particle.mass();
    let mu = particle.moment();
    let s = particle.four_spin();
    let projector = spin_projector(basis, &s, sign)?;
    let kinetic = basis.slash(&particle.four_momentum()) - ComplexMatrix4::identity() * Complex64::from(m);

    let w = dual_contract(&s, field);
    let gamma_w = (0..4).fold(ComplexMatrix4::zeros(), |acc, a| acc + basis.gamma[a] * Complex64::from(w[a]));

    Ok(IdentitySides {
        kinetic_lhs: psi.bilinear(basis, &(kinetic * projector)),
        kinetic_rhs: psi.bilinear(basis, &kinetic) * 0.5,
        moment_lhs: psi.bilinear(basis, &(sigma_contract(basis, field) * projector)) * (mu / 2.0),
        moment_rhs: psi.bilinear(basis, &gamma_w) * (-sign.value() * mu / 4.0),
    })
}

/// Residuals of one identity split by spinor domain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainResiduals {
    pub on_shell: f64,
    pub projected: f64,
    pub off_shell: f64,
}

impl DomainResiduals {
    fn absorb(&mut self, other: &DomainResiduals) {
        self.on_shell = self.on_shell.max(other.on_shell);
        self.projected = self.projected.max(other.projected);
        self.off_shell = self.off_shell.max(other.off_shell);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityTrial {
    pub momentum: [f64; 3],
    pub polarization: [f64; 3],
    /// Residual of the kinetic (projector-halving) identity.
    pub kinetic: DomainResiduals,
    /// Residual of the moment-coupling identity.
    pub moment: DomainResiduals,
    /// On-shell ratio LHS/RHS of the moment identity, when RHS is not tiny.
    pub moment_on_shell_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub seed: u64,
    pub trials: Vec<IdentityTrial>,
    pub max_kinetic: DomainResiduals,
    pub max_moment: DomainResiduals,
}

/// Largest |p|/m drawn for randomized trials.
pub const MAX_RANDOM_BOOST: f64 = 10.0;

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_spinor(rng: &mut ChaCha8Rng) -> DiracSpinor {
    DiracSpinor(Vector4::from_fn(|_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
}

fn random_field(rng: &mut ChaCha8Rng) -> FieldTensor {
    use crate::fields::FieldSample;
    let mut v = || rng.random_range(-1.0..1.0);
    FieldTensor::from_sample(&FieldSample::new(Vector3::new(v(), v(), v()), Vector3::new(v(), v(), v())))
}

/// Runs `trials` evaluations; trial 0 uses the given particle and field,
/// later trials draw momentum (|p|/m ≤ 10), polarization and field from a
/// seeded stream.
pub fn verify_bilinear_identities(
    particle: &PolarizedParticle,
    field: &FieldTensor,
    trials: usize,
    seed: u64,
) -> Result<IdentityReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let basis = build_gamma_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = IdentityReport {
        seed,
        trials: Vec::with_capacity(trials),
        max_kinetic: DomainResiduals::default(),
        max_moment: DomainResiduals::default(),
    };

    for trial in 0..trials {
        let (part, f) = if trial == 0 {
            (*particle, *field)
        } else {
            let direction = random_unit(&mut rng);
            let boost = rng.random_range(0.0..MAX_RANDOM_BOOST) * particle.mass();
            let polarization = random_unit(&mut rng);
            let p = PolarizedParticle::new(particle.mass(), particle.moment(), polarization, direction * boost)?;
            (p, random_field(&mut rng))
        };
        let chi = random_spinor(&mut rng);
        let result = evaluate_trial(&basis, &part, &f, &chi)?;
        report.max_kinetic.absorb(&result.kinetic);
        report.max_moment.absorb(&result.moment);
        report.trials.push(result);
    }
    Ok(report)
}

fn evaluate_trial(
    basis: &GammaBasis,
    particle: &PolarizedParticle,
    field: &FieldTensor,
    chi: &DiracSpinor,
) -> Result<IdentityTrial> {
    let mut kinetic = DomainResiduals::default();
    let mut moment = DomainResiduals::default();
    let mut ratio = None;

    for sign in [SpinSign::Plus, SpinSign::Minus] {
        let u = on_shell_spinor(basis, particle, sign)?;
        let sides = identity_sides(basis, particle, field, &u, sign)?;
        kinetic.on_shell = kinetic.on_shell.max(sides.kinetic_residual());
        moment.on_shell = moment.on_shell.max(sides.moment_residual());
        if sign == SpinSign::Plus && sides.moment_rhs.norm() > 1e-9 {
            ratio = Some((sides.moment_lhs / sides.moment_rhs).re);
        }

        let projector = spin_projector(basis, &particle.four_spin(), sign)?;
        let projected = DiracSpinor(projector * chi.0);
        let sides = identity_sides(basis, particle, field, &projected, sign)?;
        kinetic.projected = kinetic.projected.max(sides.kinetic_residual());
        moment.projected = moment.projected.max(sides.moment_residual());

        let sides = identity_sides(basis, particle, field, chi, sign)?;
        kinetic.off_shell = kinetic.off_shell.max(sides.kinetic_residual());
        moment.off_shell = moment.off_shell.max(sides.moment_residual());
    }

    let p = particle.momentum();
    let s = particle.polarization();
    Ok(IdentityTrial {
        momentum: [p.x, p.y, p.z],
        polarization: [s.x, s.y, s.z],
        kinetic,
        moment,
        moment_on_shell_ratio: ratio,
    })
}

/// Kinetic and interaction parts of one projected Lagrangian bilinear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianParts {
    pub kinetic: f64,
    pub interaction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    pub plus: LagrangianParts,
    pub minus: LagrangianParts,
    pub unprojected: f64,
    /// |ℒ₊ + ℒ₋ − ℒ|.
    pub residual: f64,
}

/// Checks ℒ₊ + ℒ₋ = ℒ on the superposition u₊ + u₋ of the two on-shell
/// helicity-like states, with ℒ± = ψ̄(p̸ − m − (μ/2)σ^{μν}F_{μν})Σ±ψ.
pub fn lagrangian_split_check(particle: &PolarizedParticle, field: &FieldTensor) -> Result<SplitCheck> {
    let basis = build_gamma_basis();
    let m = particle.mass();
    let mu = particle.moment();
    let s = particle.four_spin();
    let psi = DiracSpinor(
        on_shell_spinor(&basis, particle, SpinSign::Plus)?.0 + on_shell_spinor(&basis, particle, SpinSign::Minus)?.0,
    );

    let kinetic_op = basis.slash(&particle.four_momentum()) - ComplexMatrix4::identity() * Complex64::from(m);
    let interaction_op = sigma_contract(&basis, field) * Complex64::from(-mu / 2.0);

    let parts = |sign| -> Result<LagrangianParts> {
        let proj = spin_projector(&basis, &s, sign)?;
        Ok(LagrangianParts {
            kinetic: psi.bilinear(&basis, &(kinetic_op * proj)).re,
            interaction: psi.bilinear(&basis, &(interaction_op * proj)).re,
        })
    };
    let plus = parts(SpinSign::Plus)?;
    let minus = parts(SpinSign::Minus)?;
    let unprojected = psi.bilinear(&basis, &(kinetic_op + interaction_op)).re;
    let total = plus.kinetic + plus.interaction + minus.kinetic + minus.interaction;

    Ok(SplitCheck { plus, minus, unprojected, residual: (total - unprojected).abs() })
}
