use proptest::prelude::*;
use qfreq::oracle::brute_force_g2;
use qfreq::qspace::{g_metric, gs_metric, ClassicalQPoint, QPoint, Sign};

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

fn point(q: usize) -> impl Strategy<Value = QPoint> {
    (prop::collection::vec(-5.0..5.0f64, q), sign()).prop_map(|(v, s)| QPoint::new(v, s).unwrap())
}

fn triple() -> impl Strategy<Value = (QPoint, QPoint, QPoint)> {
    (1usize..=4).prop_flat_map(|q| (point(q), point(q), point(q)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn gs_metric_is_a_metric((a, b, c) in triple()) {
        let ab = gs_metric(&a, &b).unwrap();
        let ba = gs_metric(&b, &a).unwrap();
        let bc = gs_metric(&b, &c).unwrap();
        let ac = gs_metric(&a, &c).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc + 1e-12 * (1.0 + ab + bc));
        prop_assert_eq!(gs_metric(&a, &a).unwrap(), 0.0);
        if ab == 0.0 {
            prop_assert_eq!(&a, &b);
        }
    }

    #[test]
    fn sorted_matching_is_optimal(q in 1usize..=5, seed in prop::collection::vec(-3.0..3.0f64, 10)) {
        let t = ClassicalQPoint::new(seed[..q].to_vec()).unwrap();
        let s = ClassicalQPoint::new(seed[5..5 + q].to_vec()).unwrap();
        let g = g_metric(&t, &s).unwrap();
        let brute = brute_force_g2(&seed[..q], &seed[5..5 + q]).sqrt();
        prop_assert!((g - brute).abs() <= 1e-12 * (1.0 + brute));
    }

    #[test]
    fn removing_the_average_centers(a in (1usize..=4).prop_flat_map(point)) {
        let c = a.ominus(a.eta());
        prop_assert!(c.eta().abs() <= 1e-12 * (1.0 + a.eta().abs()));
    }

    #[test]
    fn common_shift_is_an_isometry(
        (a, b) in (1usize..=4).prop_flat_map(|q| (point(q), point(q))),
        s in sign(),
        shift in -4.0..4.0f64,
    ) {
        let a = a.with_sign(s);
        let b = b.with_sign(s);
        let before = gs_metric(&a, &b).unwrap();
        let after = gs_metric(&a.ominus(shift), &b.ominus(shift)).unwrap();
        prop_assert!((before - after).abs() <= 1e-10 * (1.0 + before));
    }
}
