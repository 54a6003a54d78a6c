use std::f64::consts::PI;

use nalgebra::Vector3;
use proptest::prelude::*;
use topophase::fields::{Axis, Envelope, FieldConfig};
use topophase::phase::{ac_phase, open_path_phase, sab_phase, winding_number, Path, QuadratureOptions, SpacetimePath};
use topophase::spinor::PolarizedParticle;

fn filament() -> FieldConfig {
    FieldConfig::line_charge(1.0, Axis::z()).unwrap()
}

fn ac(path: Path) -> f64 {
    ac_phase(
        &filament(),
        1.0,
        &Vector3::z(),
        &Vector3::zeros(),
        &SpacetimePath::spatial(path, 0.0),
        &QuadratureOptions::default(),
    )
    .unwrap()
    .total
}

/// Smooth star-shaped loop r(θ) = r₀(1 + Σ a_k cos(kθ + φ_k)) around the z axis,
/// traversed `w` times.
fn star(r0: f64, modes: Vec<(f64, f64)>, w: i32, center: Vector3<f64>) -> Path {
    Path::parametric(move |t| {
        let th = 2.0 * PI * w as f64 * t;
        let r =
            r0 * (1.0 + modes.iter().enumerate().map(|(k, (a, p))| a * ((k + 2) as f64 * th + p).cos()).sum::<f64>());
        center + Vector3::new(r * th.cos(), r * th.sin(), 0.3 * (3.0 * th).sin())
    })
}

fn modes() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-0.15f64..0.15, 0.0f64..(2.0 * PI)), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn loop_phase_counts_windings(r0 in 0.3f64..5.0, m in modes(), w in prop::sample::select(vec![-2, -1, 1, 2, 3])) {
        let c = Vector3::new(0.05 * r0, -0.03 * r0, 1.0);
        let phi = ac(star(r0, m, w, c));
        prop_assert!((phi - w as f64).abs() < 1e-6 * (w as f64).abs(), "{phi} for w = {w}");
    }

    #[test]
    fn homotopy_leaves_phase_unchanged(m1 in modes(), m2 in modes()) {
        let a = ac(star(2.0, m1, 1, Vector3::zeros()));
        let b = ac(star(2.0, m2, 1, Vector3::zeros()));
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn non_enclosing_loop_vanishes(r0 in 0.2f64..1.0, m in modes(), x0 in 1.6f64..4.0) {
        let phi = ac(star(r0, m, 1, Vector3::new(x0, 0.5, 0.0)));
        prop_assert!(phi.abs() < 1e-8, "{phi}");
    }

    #[test]
    fn additivity_and_orientation(ax in -2.0f64..-0.5, by in 0.5f64..2.0, cx in 0.5f64..2.0) {
        let (a, b, c) = (Vector3::new(ax, -1.0, 0.0), Vector3::new(0.3, by, 0.2), Vector3::new(cx, -0.5, -0.1));
        let p = PolarizedParticle::new(1.0, 0.7, Vector3::new(0.0, 0.6, 0.8), Vector3::new(0.4, 0.1, 0.0)).unwrap();
        let cfg = FieldConfig::line_charge(1.3, Axis::z()).unwrap();
        let opts = QuadratureOptions::default();
        let path = |v: Vec<Vector3<f64>>| SpacetimePath::spatial(Path::polyline(v).unwrap(), 0.0);
        let phase = |v: Vec<Vector3<f64>>| open_path_phase(&cfg, &p, &path(v), &opts).unwrap();
        let ab = phase(vec![a, b]);
        let bc = phase(vec![b, c]);
        let ac = phase(vec![a, b, c]);
        prop_assert!((ab.total + bc.total - ac.total).abs() < 1e-9);
        let ca = open_path_phase(&cfg, &p, &path(vec![a, b, c]).reversed(), &opts).unwrap();
        prop_assert_eq!(ca.total, -ac.total);
        prop_assert_eq!(ca.ac_spatial, -ac.ac_spatial);
        prop_assert_eq!(ca.ac_relativistic, -ac.ac_relativistic);
        prop_assert_eq!(ca.sab_relativistic, -ac.sab_relativistic);
    }
}

#[test]
fn path_independence_off_axis() {
    // Two routes between the same endpoints that together do not enclose the axis.
    let p = PolarizedParticle::new(1.0, 1.0, Vector3::z(), Vector3::new(0.2, 0.0, 0.0)).unwrap();
    let opts = QuadratureOptions::default();
    let (a, b) = (Vector3::new(1.0, 0.5, 0.0), Vector3::new(3.0, 1.0, 0.4));
    let straight = Path::polyline(vec![a, b]).unwrap();
    let bent = Path::parametric(move |t| {
        a + (b - a) * t + Vector3::new(0.0, 0.6 * (PI * t).sin(), 0.2 * (2.0 * PI * t).sin())
    });
    let one = open_path_phase(&filament(), &p, &SpacetimePath::spatial(straight, 0.0), &opts).unwrap();
    let two = open_path_phase(&filament(), &p, &SpacetimePath::spatial(bent, 0.0), &opts).unwrap();
    assert!((one.total - two.total).abs() < 1e-8);
}

#[test]
fn figure_eight_counts_only_the_enclosing_lobe() {
    let fig = Path::parametric(|t| {
        let th = 2.0 * PI * t;
        Vector3::new(th.cos() + 0.5, -0.5 * (2.0 * th).sin(), 0.0)
    });
    assert_eq!(winding_number(&fig, &Axis::z()).unwrap(), 1);
    assert!((ac(fig) - 1.0).abs() < 1e-6);
}

#[test]
fn sab_hard_pulse_is_exact() {
    let cfg = FieldConfig::pulsed_uniform_b(Vector3::z() * 2.0, 0.0, 5.0, Envelope::Square).unwrap();
    let path = SpacetimePath::stationary(Vector3::new(0.3, -0.2, 0.0), -1.0, 7.0).unwrap();
    let phi = sab_phase(&cfg, 0.1, &Vector3::z(), &path, &QuadratureOptions::default()).unwrap();
    assert!((phi.total + 1.0).abs() < 1e-12, "{}", phi.total);
    assert_eq!(phi.sab_relativistic, 0.0);
}
