use crlab_core::embedded::{dbar_b_check, Differentiation, Hypersurface, TestFunction};
use crlab_core::fields::CoordForm;
use crlab_core::fillability::{canonical_j, match_jets};
use crlab_core::jet::{Jet, JetSpace};
use crlab_core::sampling::{band_limited, rng};
use crlab_core::{Chart, C64};
use nalgebra::Matrix4;
use proptest::prelude::*;

fn jet(space: &std::sync::Arc<JetSpace>, c: &[f64]) -> Jet {
    let coef = (0..space.len()).map(|i| C64::new(c[i % c.len()], c[(i + 3) % c.len()] * 0.5)).collect();
    Jet::from_coefficients(space, coef)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn jet_product_rule(a in prop::collection::vec(-1.0f64..1.0, 6), b in prop::collection::vec(-1.0f64..1.0, 6), v in 0usize..3) {
        let s = JetSpace::new(3, 4);
        let (x, y) = (jet(&s, &a), jet(&s, &b));
        let lhs = (&x * &y).partial(v);
        let rhs = &(&x.partial(v) * &y) + &(&x * &y.partial(v));
        // the derivative drops one order, so compare below the top degree
        for i in 0..s.len() {
            if s.degree(i) < s.order() {
                prop_assert!((lhs.coefficients()[i] - rhs.coefficients()[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jet_reciprocal_and_exp(a in prop::collection::vec(-0.5f64..0.5, 6), c0 in 0.5f64..2.0) {
        let s = JetSpace::new(4, 3);
        let mut x = jet(&s, &a);
        x = &x + &Jet::real(&s, c0 - x.value().re);
        let one = &x * &x.recip();
        prop_assert!((one.value() - 1.0).norm() < 1e-12);
        prop_assert!(one.coefficients()[1..].iter().all(|c| c.norm() < 1e-10));
        let y = jet(&s, &a[1..]);
        let e = &(&x + &y).exp() - &(&x.exp() * &y.exp());
        prop_assert!(e.coefficients().iter().all(|c| c.norm() < 1e-9 * (1.0 + x.value().norm().exp())));
    }

    #[test]
    fn d_squared_vanishes(seed in any::<u64>()) {
        let c = Chart::periodic3([8; 3], [1.0, 2.0, 3.0]).unwrap();
        let mut r = rng(seed);
        let w = CoordForm::one_form(&c, (0..3).map(|_| band_limited(&c, 2, &mut r)).collect());
        prop_assert!(w.d().unwrap().d().unwrap().norm_inf() < 1e-10);
        let f = CoordForm::function(band_limited(&c, 2, &mut r));
        prop_assert!(f.d().unwrap().d().unwrap().norm_inf() < 1e-10);
    }

    #[test]
    fn conjugation_flips_weight(seed in any::<u64>(), k in -3i32..=3) {
        let c = Chart::periodic3([8; 3], [1.0; 3]).unwrap();
        let f = band_limited(&c, 1, &mut rng(seed)).with_weight(k);
        prop_assert_eq!(f.conj().weight(), -k);
        let back = f.conj().conj();
        prop_assert_eq!(back.data(), f.data());
    }

    #[test]
    fn jet_matcher_solves_tangent_inputs(entries in prop::collection::vec(-1.0f64..1.0, 32)) {
        let g = Matrix4::identity() + Matrix4::from_fn(|a, b| 0.3 * entries[4 * a + b]);
        prop_assume!(g.determinant().abs() > 0.1);
        let j = g * canonical_j() * g.try_inverse().unwrap();
        let x = Matrix4::from_fn(|a, b| entries[16 + 4 * a + b]);
        let m = match_jets(&j, &(x * j - j * x)).unwrap();
        prop_assert!(m.residual < 1e-10);
    }

    #[test]
    fn dbar_identity_for_random_quadratics(seed in any::<u64>()) {
        let geom = Hypersurface::Ellipsoid { a1: 1.0, a2: 3.0 };
        let pts = geom.samples(6).unwrap();
        let r = dbar_b_check(&geom, &TestFunction::random_quadratic(seed), &pts, Differentiation::Exact).unwrap();
        prop_assert!(r.residual.max < 1e-10);
    }

    #[test]
    fn hypersurface_names_roundtrip(a1 in 0.5f64..3.0, a2 in 0.5f64..3.0) {
        let g = Hypersurface::Ellipsoid { a1, a2 };
        prop_assert_eq!(Hypersurface::parse(&g.to_string()).unwrap(), g);
    }
}
