use fcp_core::frenet::{FrenetPoint, ReferencePath};
use fcp_core::geometry::Point2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sinusoid() -> ReferencePath {
    let pts: Vec<Point2> = (0..=400)
        .map(|i| {
            let x = i as f64 * 0.5;
            Point2::new(x, 5.0 * (x / 15.0).sin())
        })
        .collect();
    ReferencePath::build(&pts, 1.0).unwrap()
}

#[test]
fn sinusoid_round_trip_1000_points() {
    let path = sinusoid();
    let limit = 0.8 / path.max_curvature();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let fp = FrenetPoint::new(
            rng.gen_range(1.0..path.length() - 1.0),
            rng.gen_range(-limit.min(4.0)..limit.min(4.0)),
        );
        let p = path.frenet_to_cart(fp).unwrap();
        let back = path.cart_to_frenet(p).unwrap();
        let again = path.frenet_to_cart(back).unwrap();
        worst = worst.max(again.distance(p));
        assert!((back.s - fp.s).abs() < 1e-6 && (back.d - fp.d).abs() < 1e-6);
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn reference_point_lookup() {
    let path = sinusoid();
    let p = path.frenet_to_cart(FrenetPoint::new(5.0, 0.0)).unwrap();
    assert_eq!(p, path.position_at(5.0).unwrap());
    let fp = path.cart_to_frenet(p).unwrap();
    assert!((fp.s - 5.0).abs() < 1e-9 && fp.d.abs() < 1e-9);
}

#[test]
fn offset_curve_has_monotone_station() {
    let path = sinusoid();
    for &d in &[-3.0, -1.0, 0.0, 1.5, 3.0] {
        let mut prev = f64::NEG_INFINITY;
        let mut s = 0.5;
        while s < path.length() - 0.5 {
            let p = path.frenet_to_cart(FrenetPoint::new(s, d)).unwrap();
            let back = path.cart_to_frenet(p).unwrap();
            assert!(back.s >= prev, "d={d} s={s}");
            prev = back.s;
            s += 0.37;
        }
    }
}

proptest! {
    #[test]
    fn left_of_travel_is_positive(s in 1.0f64..190.0, d in 0.01f64..3.0) {
        let path = sinusoid();
        let heading = path.heading_at(s).unwrap();
        let base = path.position_at(s).unwrap();
        let left = base + Point2::from_angle(heading).perp() * d;
        let fp = path.cart_to_frenet(left).unwrap();
        prop_assert!(fp.d > 0.0);
        let right = base - Point2::from_angle(heading).perp() * d;
        prop_assert!(path.cart_to_frenet(right).unwrap().d < 0.0);
    }

    #[test]
    fn cartesian_round_trip(x in 1.0f64..199.0, y in -8.0f64..8.0) {
        let path = sinusoid();
        let p = Point2::new(x, y);
        if let Ok(fp) = path.cart_to_frenet(p) {
            if fp.d.abs() < 0.8 / path.max_curvature() && fp.s > 0.0 && fp.s < path.length() {
                let q = path.frenet_to_cart(fp).unwrap();
                prop_assert!(q.distance(p) < 1e-6, "{:?} -> {:?} -> {:?}", p, fp, q);
            }
        }
    }
}
