use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;
use topophase::dynamics::*;
use topophase::fields::{Axis, Envelope, FieldConfig};
use topophase::gauge::{check_topological_conditions, Provenance, SampleRegion};

const UP: [Complex64; 2] = [Complex64::ONE, Complex64::ZERO];

fn packet(center: Vector2<f64>, momentum: Vector2<f64>, width: f64) -> GaussianPacket {
    GaussianPacket { center, width, momentum, spin: UP, focus_time: 0.0, mass: 1.0 }
}

fn free_terms(g: GridGeometry) -> HamiltonianTerms {
    build_fw_hamiltonian(&FieldConfig::zero(), &Vector3::z(), 0.0, 1.0, g).unwrap()
}

#[test]
fn free_packet_follows_ehrenfest() {
    let g = GridGeometry::centered(400, 10.0).unwrap();
    let p0 = Vector2::new(0.5, -0.25);
    let psi = SpinorGrid::gaussian(g, &packet(Vector2::new(-1.0, 0.5), p0, 1.0)).unwrap();
    let (dt, steps) = (0.01, 500);
    let out = evolve(&psi, &free_terms(g), dt, steps).unwrap();
    let moved = out.mean_position() - psi.mean_position();
    let expected = p0 * (dt * steps as f64);
    assert!((moved - expected).norm() < 1e-3 * expected.norm(), "{moved} vs {expected}");
}

#[test]
fn norm_drift_over_thousand_steps() {
    let g = GridGeometry::centered(64, 8.0).unwrap();
    let cfg = FieldConfig::line_charge(1.0, Axis::z()).unwrap();
    // The filament sits between nodes of an even grid.
    let terms = build_fw_hamiltonian(&cfg, &Vector3::new(0.6, 0.0, 0.8), 0.5, 2.0, g).unwrap();
    let psi = SpinorGrid::gaussian(g, &packet(Vector2::new(2.0, 0.0), Vector2::new(0.0, 1.0), 1.0)).unwrap();
    let out = evolve(&psi, &terms, 0.01, 1000).unwrap();
    assert!((out.norm() - psi.norm()).abs() < 1e-10, "{}", out.norm() - psi.norm());
}

#[test]
fn sab_pulse_global_phase() {
    let (mu, b0, t) = (0.1, 2.0, 5.0);
    let g = GridGeometry::centered(64, 8.0).unwrap();
    let psi = SpinorGrid::gaussian(g, &packet(Vector2::zeros(), Vector2::zeros(), 1.0)).unwrap();
    let cfg = FieldConfig::pulsed_uniform_b(Vector3::z() * b0, 0.0, t, Envelope::Square).unwrap();
    let dt = 0.0025;
    let steps = (t / dt).round() as usize;
    let on = build_fw_hamiltonian(&cfg, &Vector3::z(), mu, 1.0, g).unwrap();
    let off = build_fw_hamiltonian(&FieldConfig::zero(), &Vector3::z(), mu, 1.0, g).unwrap();
    let (a, b) = rayon::join(|| evolve(&psi, &on, dt, steps).unwrap(), || evolve(&psi, &off, dt, steps).unwrap());
    let overlap = b.inner(&a).unwrap();
    assert!((overlap.norm() - 1.0).abs() < 1e-9);
    assert!((overlap.arg() + mu * b0 * t).abs() < 1e-6, "{}", overlap.arg());
}

fn current_residual(h: f64, dt: f64) -> CurrentCheck {
    let n = (20.0 / h).round() as usize;
    let g = GridGeometry::centered(n, 10.0).unwrap();
    let terms = free_terms(g);
    let mut s = SpinorGrid::gaussian(g, &packet(Vector2::new(-1.0, 0.0), Vector2::new(1.0, 0.5), 1.0)).unwrap();
    let mut prop = Propagator::new(terms.clone(), dt).unwrap();
    prop.run(&mut s, (0.5 / dt).round() as usize).unwrap();
    let mut history = vec![s.clone()];
    for _ in 0..2 {
        prop.step(&mut s).unwrap();
        history.push(s.clone());
    }
    probability_current_check(&history, &terms).unwrap()
}

#[test]
fn continuity_residual_is_second_order() {
    let coarse = current_residual(0.1, 0.01);
    let fine = current_residual(0.05, 0.005);
    assert!(coarse.max_residual < 1e-3, "{coarse:?}");
    let ratio = coarse.max_residual / fine.max_residual;
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn stationary_state_has_no_flow() {
    let n = 24;
    let g = GridGeometry::centered(n, 2.0).unwrap();
    let terms = free_terms(g);
    let mut s = SpinorGrid::zeros(g);
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        let mode = |m: usize| (PI * (m + 1) as f64 / (n + 1) as f64).sin();
        s.components[0][k] = Complex64::new(mode(i) * mode(j), 0.0);
    }
    let mut prop = Propagator::new(terms.clone(), 0.01).unwrap();
    let mut history = vec![s.clone()];
    for _ in 0..3 {
        prop.step(&mut s).unwrap();
        history.push(s.clone());
    }
    let check = probability_current_check(&history, &terms).unwrap();
    assert!(check.max_residual < 1e-12, "{check:?}");
}

fn exp_oracle(mu: f64, b: Vector3<f64>, t: f64, state: &SpinState) -> Vector3<f64> {
    // U = exp(iμt σ·B), built by nalgebra's Padé matrix exponential.
    let i = Complex64::I;
    let h = Matrix2::new(
        Complex64::new(b.z, 0.0),
        Complex64::new(b.x, -b.y),
        Complex64::new(b.x, b.y),
        Complex64::new(-b.z, 0.0),
    );
    let u = (h * (i * mu * t)).exp();
    let a = state.amplitudes();
    let psi = u * nalgebra::Vector2::new(a[0], a[1]);
    let up = psi[0].conj() * psi[1];
    Vector3::new(2.0 * up.re, 2.0 * up.im, psi[0].norm_sqr() - psi[1].norm_sqr())
}

#[test]
fn pl_precession_matches_matrix_exponential() {
    let (mu, b) = (0.8, Vector3::new(0.3, -0.5, 1.1));
    let driver = Driver::constant_field(mu, b);
    let state = SpinState::along(&Vector3::new(1.0, 0.2, -0.4)).unwrap();
    let tr = precess(&state, &driver, 0.0, 2.0, 4000).unwrap();
    for (t, s) in tr.times.iter().zip(&tr.bloch).step_by(250) {
        assert!((s - exp_oracle(mu, b, *t, &state)).amax() < 1e-8, "t = {t}");
    }
    let half = precess(
        &SpinState::along(&Vector3::x()).unwrap(),
        &Driver::constant_field(PI / 2.0, Vector3::z()),
        0.0,
        1.0,
        1000,
    )
    .unwrap();
    assert!((half.last().x + 1.0).abs() < 1e-8);
}

#[test]
fn precession_conserves_length_over_long_runs() {
    let driver = Driver::peshkin_lipkin(0.5, |t| Ok(Vector3::new(t.cos(), 0.3, (0.5 * t).sin())));
    let tr = precess(&SpinState::along(&Vector3::y()).unwrap(), &driver, 0.0, 100.0, 100_000).unwrap();
    assert!(tr.norm_drift() < 1e-8);
}

#[test]
fn effective_driver_is_torque_free_in_ac_regime() {
    let cfg = FieldConfig::line_charge(1.0, Axis::z()).unwrap();
    let s_hat = Vector3::z();
    let region = SampleRegion::annulus(Axis::z(), 0.5, 5.0, 2.0).unwrap();
    let report = check_topological_conditions(&cfg, &s_hat, &region, 1e-6, 1e-4).unwrap();
    assert!(report.ac_pass());
    let driver = Driver::effective_from_config(
        cfg,
        Provenance::Nonrelativistic(s_hat),
        1.0,
        Vector3::new(2.0, 0.0, 0.0),
        Vector3::new(0.0, 0.01, 0.0),
        1e-4,
    );
    let state = SpinState::along(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
    let tr = precess(&state, &driver, 0.0, 10.0, 100_000).unwrap();
    assert!(tr.max_deviation() < 1e-10, "{}", tr.max_deviation());
}

#[test]
fn autocorrelation_identities() {
    let (mu, b0) = (0.7, 1.5);
    let w = 2.0 * mu * b0;
    let driver = Driver::constant_field(mu, Vector3::z() * b0);
    let state = SpinState::along(&Vector3::new(0.2, 1.0, 0.5)).unwrap();
    let id = Matrix2::<Complex64>::identity();
    for dt in [0.1, 0.9, PI / (4.0 * mu * b0), 2.3] {
        let r = autocorrelation(&driver, &state, 0.4, 0.4 + dt).unwrap();
        let c = Complex64::new((w * dt).cos(), 0.0);
        let s = Complex64::new((w * dt).sin(), 0.0);
        assert!((r.c - id * c).norm() < 1e-12);
        assert!((r.s + id * s).norm() < 1e-12);
        assert!((r.c * r.c + r.s * r.s - id).norm() < 1e-12);
        assert!(r.hermiticity_residual() < 1e-12);
        assert!(r.symmetrized_residual < 1e-14);
        assert!(r.max_commutator_norm() > 1e-3);
    }
    let quarter = autocorrelation(&driver, &state, 0.0, PI / (4.0 * mu * b0)).unwrap();
    assert!(quarter.expectations[0].norm() < 1e-12);
}

#[test]
fn unsymmetrized_identity_tracks_commutators() {
    let driver = Driver::peshkin_lipkin(0.4, |t| Ok(Vector3::new(0.2 * t, 1.0, t.sin())));
    let state = SpinState::along(&Vector3::x()).unwrap();
    let moving = autocorrelation(&driver, &state, 0.0, 1.7).unwrap();
    assert!(moving.symmetrized_residual < 1e-13);
    assert!(moving.max_commutator_norm() > 1e-3 && moving.unsymmetrized_residual > 1e-3);
    let frozen = autocorrelation(&Driver::constant_field(0.4, Vector3::zeros()), &state, 0.0, 1.7).unwrap();
    assert!(frozen.unsymmetrized_residual < 1e-14);
}

fn ac_interferometer(lambda: f64, grid: usize) -> InterferometerResult {
    let cfg = if lambda == 0.0 { FieldConfig::zero() } else { FieldConfig::line_charge(lambda, Axis::z()).unwrap() };
    interferometric_phase(&cfg, &InterferometerSetup::default().refined(grid)).unwrap()
}

#[test]
fn interferometer_zero_field_and_linearity() {
    let zero = ac_interferometer(0.0, 160);
    assert!(zero.phase.abs() < 1e-4, "{zero:?}");
    let one = ac_interferometer(1.0, 160);
    let two = ac_interferometer(2.0, 160);
    assert!((one.predicted - 1.0).abs() < 1e-6);
    assert!((one.phase - 1.0).abs() < 0.02, "{one:?}");
    assert!((two.phase / one.phase - 2.0).abs() < 0.04, "{} vs {}", two.phase, one.phase);
    assert!(one.clearance_widths >= 5.0);
}
