use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::FieldConfig;
use crate::gauge::{exact_effective_fields, Provenance};
use crate::spinor::{pauli, ComplexMatrix2, FourVector};

pub type Op = ComplexMatrix2;

const CI: Complex64 = Complex64::I;

/// Normalized two-component spin state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    amplitudes: [Complex64; 2],
}

impl SpinState {
    pub fn new(up: Complex64, down: Complex64) -> Result<Self> {
        let n = (up.norm_sqr() + down.norm_sqr()).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("spin amplitudes must be finite and not both zero"));
        }
        Ok(Self { amplitudes: [up / n, down / n] })
    }

    /// Pure state with Bloch vector along `direction`.
    pub fn along(direction: &Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("spin direction must be a non-zero finite vector"));
        }
        let d = direction / n;
        let theta = d.z.clamp(-1.0, 1.0).acos();
        let phi = d.y.atan2(d.x);
        Self::new(Complex64::new((theta / 2.0).cos(), 0.0), Complex64::from_polar((theta / 2.0).sin(), phi))
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        self.amplitudes
    }

    pub fn bloch(&self) -> Vector3<f64> {
        let [a, b] = self.amplitudes;
        let ab = a.conj() * b;
        Vector3::new(2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr())
    }

    /// ⟨ψ|O|ψ⟩
    pub fn expectation(&self, op: &Op) -> Complex64 {
        let [a, b] = self.amplitudes;
        let (oa, ob) = (op[(0, 0)] * a + op[(0, 1)] * b, op[(1, 0)] * a + op[(1, 1)] * b);
        a.conj() * oa + b.conj() * ob
    }
}

type VectorFn = Arc<dyn Fn(f64) -> Result<Vector3<f64>> + Send + Sync>;

/// Precession driver, reduced to the angular velocity Ω(t) of the Bloch
/// equation ⟨σ⃗⟩' = ⟨σ⃗⟩ × Ω, i.e. H = −½ σ⃗·Ω.
#[derive(Clone)]
pub enum Driver {
    /// H = −μ σ⃗·B⃗(t), Ω = 2μB⃗.
    PeshkinLipkin { moment: f64, field: VectorFn },
    /// Ω = 2μ(ℬ⃗ + ℰ⃗ × v⃗).
    Effective { moment: f64, b: VectorFn, e: VectorFn, velocity: Vector3<f64> },
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Driver::PeshkinLipkin { moment, .. } => f.debug_struct("PeshkinLipkin").field("moment", moment).finish(),
            Driver::Effective { moment, velocity, .. } => {
                f.debug_struct("Effective").field("moment", moment).field("velocity", velocity).finish()
            }
        }
    }
}

impl Driver {
    pub fn peshkin_lipkin<F>(moment: f64, field: F) -> Self
    where
        F: Fn(f64) -> Result<Vector3<f64>> + Send + Sync + 'static,
    {
        Driver::PeshkinLipkin { moment, field: Arc::new(field) }
    }

    pub fn constant_field(moment: f64, b: Vector3<f64>) -> Self {
        Self::peshkin_lipkin(moment, move |_| Ok(b))
    }

    /// PL driver fed by the magnetic field of `config` seen along r(t) = r₀ + v t.
    pub fn peshkin_lipkin_from_config(
        config: FieldConfig,
        moment: f64,
        start: Vector3<f64>,
        velocity: Vector3<f64>,
    ) -> Self {
        Self::peshkin_lipkin(moment, move |t| {
            let r = start + velocity * t;
            Ok(config.sample(&FourVector::new(t, r.x, r.y, r.z))?.magnetic)
        })
    }

    pub fn effective<B, E>(moment: f64, b: B, e: E, velocity: Vector3<f64>) -> Self
    where
        B: Fn(f64) -> Result<Vector3<f64>> + Send + Sync + 'static,
        E: Fn(f64) -> Result<Vector3<f64>> + Send + Sync + 'static,
    {
        Driver::Effective { moment, b: Arc::new(b), e: Arc::new(e), velocity }
    }

    /// Effective driver with ℬ⃗, ℰ⃗ of `config` sampled along r(t) = r₀ + v t.
    pub fn effective_from_config(
        config: FieldConfig,
        provenance: Provenance,
        moment: f64,
        start: Vector3<f64>,
        velocity: Vector3<f64>,
        step: f64,
    ) -> Self {
        let config = Arc::new(config);
        let at = move |t: f64| {
            FourVector::new(t, start.x + velocity.x * t, start.y + velocity.y * t, start.z + velocity.z * t)
        };
        let (cb, ce) = (config.clone(), config);
        Self::effective(
            moment,
            move |t| Ok(exact_effective_fields(&cb, &provenance, &at(t), step)?.0),
            move |t| Ok(exact_effective_fields(&ce, &provenance, &at(t), step)?.1),
            velocity,
        )
    }

    pub fn omega(&self, t: f64) -> Result<Vector3<f64>> {
        match self {
            Driver::PeshkinLipkin { moment, field } => Ok(field(t)? * (2.0 * moment)),
            Driver::Effective { moment, b, e, velocity } => Ok((b(t)? + e(t)?.cross(velocity)) * (2.0 * moment)),
        }
    }

    /// exp(−i H dt) with H frozen at time t: exp(i (dt/2) σ⃗·Ω).
    pub fn step_propagator(&self, t: f64, dt: f64) -> Result<Op> {
        let w = self.omega(t)?;
        let mag = w.norm();
        let theta = 0.5 * mag * dt;
        let mut u = Op::identity() * Complex64::new(theta.cos(), 0.0);
        if mag > 0.0 {
            let [sx, sy, sz] = pauli();
            let n = w / mag;
            let c = |v: f64| Complex64::new(v, 0.0);
            u += (sx * c(n.x) + sy * c(n.y) + sz * c(n.z)) * (CI * theta.sin());
        }
        Ok(u)
    }
}

/// Bloch-vector trajectory sampled at every RK4 step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub bloch: Vec<Vector3<f64>>,
}

impl Trajectory {
    /// max | |⟨σ⃗⟩(t)| − |⟨σ⃗⟩(t₀)| |
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.bloch[0].norm();
        self.bloch.iter().fold(0.0f64, |m, b| m.max((b.norm() - n0).abs()))
    }

    /// max |⟨σ⃗⟩(t) − ⟨σ⃗⟩(t₀)|
    pub fn max_deviation(&self) -> f64 {
        let b0 = self.bloch[0];
        self.bloch.iter().fold(0.0f64, |m, b| m.max((b - b0).amax()))
    }

    pub fn last(&self) -> Vector3<f64> {
        *self.bloch.last().expect("trajectory is never empty")
    }
}

/// Integrates ⟨σ⃗⟩' = ⟨σ⃗⟩ × Ω(t) with classical RK4 over [t0, t1].
pub fn precess(state: &SpinState, driver: &Driver, t0: f64, t1: f64, steps: usize) -> Result<Trajectory> {
    if steps == 0 || !(t1 > t0) {
        return Err(invalid("precession needs t1 > t0 and at least one step"));
    }
    let dt = (t1 - t0) / steps as f64;
    let rhs = |t: f64, s: &Vector3<f64>| -> Result<Vector3<f64>> { Ok(s.cross(&driver.omega(t)?)) };
    let mut s = state.bloch();
    let mut times = Vec::with_capacity(steps + 1);
    let mut bloch = Vec::with_capacity(steps + 1);
    times.push(t0);
    bloch.push(s);
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let k1 = rhs(t, &s)?;
        let k2 = rhs(t + 0.5 * dt, &(s + k1 * (0.5 * dt)))?;
        let k3 = rhs(t + 0.5 * dt, &(s + k2 * (0.5 * dt)))?;
        let k4 = rhs(t + dt, &(s + k3 * dt))?;
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        times.push(t0 + (k + 1) as f64 * dt);
        bloch.push(s);
    }
    Ok(Trajectory { times, bloch })
}

pub const PROPAGATOR_TOLERANCE: f64 = 1e-10;
const INITIAL_PROPAGATOR_STEPS: usize = 64;
const MAX_PROPAGATOR_STEPS: usize = 1 << 22;

fn ordered_product(driver: &Driver, t_i: f64, t_f: f64, steps: usize) -> Result<Op> {
    let dt = (t_f - t_i) / steps as f64;
    let mut u = Op::identity();
    for k in 0..steps {
        u = driver.step_propagator(t_i + (k as f64 + 0.5) * dt, dt)? * u;
    }
    Ok(u)
}

fn op_norm(m: &Op) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Time-ordered U(t_f, t_i), doubling the midpoint-step count until the
/// result changes by less than [`PROPAGATOR_TOLERANCE`].
pub fn propagator(driver: &Driver, t_i: f64, t_f: f64) -> Result<(Op, usize)> {
    if t_f == t_i {
        return Ok((Op::identity(), 0));
    }
    let mut steps = INITIAL_PROPAGATOR_STEPS;
    let mut u = ordered_product(driver, t_i, t_f, steps)?;
    while steps < MAX_PROPAGATOR_STEPS {
        let finer = ordered_product(driver, t_i, t_f, 2 * steps)?;
        let change = op_norm(&(finer - u));
        u = finer;
        steps *= 2;
        if change < PROPAGATOR_TOLERANCE {
            return Ok((u, steps));
        }
    }
    Err(invalid(format!("propagator did not settle within {MAX_PROPAGATOR_STEPS} steps")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrelationResult {
    pub delta_t: f64,
    pub c: Op,
    pub s: Op,
    pub s_plus: Op,
    pub s_minus: Op,
    /// ⟨C⟩, ⟨S⟩, ⟨𝒮₊⟩, ⟨𝒮₋⟩ in the supplied state.
    pub expectations: [Complex64; 4],
    /// ‖C − ½[(𝒮₊+𝒮₋) + h.c.]‖
    pub symmetrized_residual: f64,
    /// ‖S − ½[i(𝒮₊−𝒮₋) + h.c.]‖
    pub symmetrized_residual_s: f64,
    /// ‖C − (𝒮₊+𝒮₋)‖, zero only if the cross-time commutators vanish.
    pub unsymmetrized_residual: f64,
    /// ‖[σ_a(t_f), σ_b(t_i)]‖ (Frobenius), a, b ∈ {x, y, z}.
    pub commutator_norms: [[f64; 3]; 3],
    pub propagator_steps: usize,
}

impl AutocorrelationResult {
    /// Largest anti-Hermitian part of C and S.
    pub fn hermiticity_residual(&self) -> f64 {
        op_norm(&(self.c - self.c.adjoint())).max(op_norm(&(self.s - self.s.adjoint())))
    }

    pub fn max_commutator_norm(&self) -> f64 {
        self.commutator_norms.iter().flatten().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// C(Δt), S(Δt) and 𝒮± from Heisenberg operators σ_a(t) = U†(t, t_i) σ_a U(t, t_i).
pub fn autocorrelation(driver: &Driver, state: &SpinState, t_i: f64, t_f: f64) -> Result<AutocorrelationResult> {
    if !(t_f >= t_i) {
        return Err(invalid("autocorrelation needs t_f ≥ t_i"));
    }
    let (u, propagator_steps) = propagator(driver, t_i, t_f)?;
    let sigma = pauli();
    let late: Vec<Op> = sigma.iter().map(|s| u.adjoint() * s * u).collect();
    let early = &sigma;
    let hc = |m: Op| m + m.adjoint();
    let c = hc(late[0] * early[0] + late[1] * early[1]) * Complex64::new(0.25, 0.0);
    let s = hc(late[1] * early[0] - late[0] * early[1]) * Complex64::new(0.25, 0.0);
    let half = Complex64::new(0.5, 0.0);
    let plus = |ops: &[Op]| (ops[0] + ops[1] * CI) * half;
    let minus = |ops: &[Op]| (ops[0] - ops[1] * CI) * half;
    let s_minus = plus(&late) * minus(early);
    let s_plus = minus(&late) * plus(early);
    let symmetrized_residual = op_norm(&(c - hc(s_plus + s_minus) * half));
    let symmetrized_residual_s = op_norm(&(s - hc((s_plus - s_minus) * CI) * half));
    let unsymmetrized_residual = op_norm(&(c - (s_plus + s_minus)));
    let mut commutator_norms = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            commutator_norms[a][b] = op_norm(&(late[a] * early[b] - early[b] * late[a]));
        }
    }
    Ok(AutocorrelationResult {
        delta_t: t_f - t_i,
        expectations: [c, s, s_plus, s_minus].map(|m| state.expectation(&m)),
        c,
        s,
        s_plus,
        s_minus,
        symmetrized_residual,
        symmetrized_residual_s,
        unsymmetrized_residual,
        commutator_norms,
        propagator_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bloch_vectors() {
        let up = SpinState::new(Complex64::ONE, Complex64::ZERO).unwrap();
        assert_eq!(up.bloch(), Vector3::z());
        let d = Vector3::new(0.3, -0.4, 0.2);
        let s = SpinState::along(&d).unwrap();
        assert!((s.bloch() - d.normalize()).amax() < 1e-15);
        assert!((s.bloch().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pl_half_turn() {
        let driver = Driver::constant_field(PI / 2.0, Vector3::z());
        let s = SpinState::along(&Vector3::x()).unwrap();
        let tr = precess(&s, &driver, 0.0, 1.0, 1000).unwrap();
        assert!((tr.last().x + 1.0).abs() < 1e-8);
        assert!(tr.norm_drift() < 1e-8);
        let par = precess(&SpinState::along(&Vector3::z()).unwrap(), &driver, 0.0, 1.0, 100).unwrap();
        assert_eq!(par.max_deviation(), 0.0);
    }

    #[test]
    fn equal_time_and_zero_driver() {
        let s = SpinState::along(&Vector3::new(1.0, 1.0, 0.0)).unwrap();
        let d = Driver::constant_field(0.7, Vector3::new(0.1, 0.2, 1.0));
        let r = autocorrelation(&d, &s, 1.0, 1.0).unwrap();
        assert!(op_norm(&(r.c - Op::identity())) < 1e-15);
        assert!(op_norm(&r.s) < 1e-15);
        let zero = Driver::constant_field(0.7, Vector3::zeros());
        let r = autocorrelation(&zero, &s, 0.0, 3.0).unwrap();
        assert!(op_norm(&(r.c - Op::identity())) < 1e-15);
        assert!(op_norm(&r.s) < 1e-15);
        // Static operators: only the equal-time Pauli algebra survives.
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 0.0 } else { 2.0 * 2f64.sqrt() };
                assert!((r.commutator_norms[a][b] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn constant_field_closed_form() {
        let (mu, b0, dt) = (0.4, 1.3, 0.9);
        let w = 2.0 * mu * b0;
        let d = Driver::constant_field(mu, Vector3::z() * b0);
        let s = SpinState::along(&Vector3::x()).unwrap();
        let r = autocorrelation(&d, &s, 0.2, 0.2 + dt).unwrap();
        let id = Op::identity();
        assert!(op_norm(&(r.c - id * Complex64::new((w * dt).cos(), 0.0))) < 1e-12);
        assert!(op_norm(&(r.s + id * Complex64::new((w * dt).sin(), 0.0))) < 1e-12);
        assert!(r.hermiticity_residual() < 1e-12);
        assert!(r.symmetrized_residual < 1e-14 && r.symmetrized_residual_s < 1e-14);
        assert!(r.max_commutator_norm() > 0.1);
    }
}
