use nalgebra::Vector3;
use proptest::prelude::*;
use topophase::spinor::gamma::max_abs;
use topophase::spinor::{build_gamma_basis, spin_projector, ComplexMatrix4, PolarizedParticle, SpinSign};

fn unit() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

fn particle() -> impl Strategy<Value = PolarizedParticle> {
    (0.1f64..5.0, unit(), unit(), 0.0f64..10.0)
        .prop_map(|(m, s, dir, boost)| PolarizedParticle::new(m, 0.3, s, dir * (boost * m)).unwrap())
}

#[test]
fn clifford_algebra() {
    assert!(build_gamma_basis().clifford_residual() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn four_spin_is_orthogonal_unit(p in particle()) {
        let s = p.four_spin();
        prop_assert!(s.dot(&p.four_momentum()).abs() < 1e-10 * p.energy().max(1.0));
        prop_assert!((s.norm_sq() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn projectors_split_identity(p in particle()) {
        let basis = build_gamma_basis();
        let s = p.four_spin();
        let plus = spin_projector(&basis, &s, SpinSign::Plus).unwrap();
        let minus = spin_projector(&basis, &s, SpinSign::Minus).unwrap();
        let id = ComplexMatrix4::identity();
        let scale = 1.0 + s.0.iter().map(|v| v * v).sum::<f64>();
        prop_assert!(max_abs(&(plus * plus - plus)) < 1e-10 * scale);
        prop_assert!(max_abs(&(minus * minus - minus)) < 1e-10 * scale);
        prop_assert!(max_abs(&(plus + minus - id)) < 1e-12);
        prop_assert!(max_abs(&(plus * minus)) < 1e-10 * scale);
        // Σ± commutes with p̸ on shell, so it preserves positive-energy states.
        let pslash = basis.slash(&p.four_momentum());
        let comm = pslash * plus - plus * pslash;
        prop_assert!(max_abs(&comm) < 1e-10 * scale * p.energy());
    }
}
