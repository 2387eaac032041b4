use fcp_core::frenet::{FrenetPoint, ReferencePath};
use fcp_core::geometry::Point2;
use fcp_core::governor::{classify_obstacle, DecisionGovernor, DeviationLabel, GovernorConfig};
use fcp_core::obstacles::{
    cluster_pedestrians, convex_hull, inflate_vehicle, ObstacleKind, ObstacleSet, RawObstacle,
};
use proptest::prelude::*;

fn curved() -> ReferencePath {
    let pts: Vec<Point2> = (0..=300)
        .map(|i| {
            let x = i as f64 * 0.5;
            Point2::new(x, 0.002 * x * x)
        })
        .collect();
    ReferencePath::build(&pts, 1.0).unwrap()
}

fn canonical(mut clusters: Vec<Vec<FrenetPoint>>) -> Vec<Vec<(u64, u64)>> {
    let mut out: Vec<Vec<(u64, u64)>> = clusters
        .iter_mut()
        .map(|c| {
            let mut keys: Vec<(u64, u64)> =
                c.iter().map(|p| (p.s.to_bits(), p.d.to_bits())).collect();
            keys.sort_unstable();
            keys
        })
        .collect();
    out.sort();
    out
}

fn slab(s_lo: f64, d_lo: f64, d_hi: f64) -> fcp_core::obstacles::ObstaclePolygon {
    let pts = [
        FrenetPoint::new(s_lo, d_lo),
        FrenetPoint::new(s_lo + 4.0, d_lo),
        FrenetPoint::new(s_lo + 4.0, d_hi),
        FrenetPoint::new(s_lo, d_hi),
    ];
    convex_hull(&pts, 0.3, 0.25)
}

proptest! {
    #[test]
    fn hull_contains_inputs(pts in prop::collection::vec((0.0f64..30.0, -4.0f64..4.0), 1..40)) {
        let points: Vec<FrenetPoint> = pts.iter().map(|&(s, d)| FrenetPoint::new(s, d)).collect();
        let hull = convex_hull(&points, 0.3, 0.25);
        for p in &points {
            prop_assert!(hull.containment_margin(*p) >= -1e-9);
        }
        for w in hull.edge_samples.windows(2) {
            let gap = ((w[1].s - w[0].s).powi(2) + (w[1].d - w[0].d).powi(2)).sqrt();
            prop_assert!(gap <= 0.25 + 1e-9);
        }
    }

    #[test]
    fn clustering_ignores_input_order(
        pts in prop::collection::vec((0.0f64..20.0, -3.0f64..3.0), 1..40),
        rotate in 0usize..40,
    ) {
        let points: Vec<FrenetPoint> = pts.iter().map(|&(s, d)| FrenetPoint::new(s, d)).collect();
        let mut shuffled = points.clone();
        shuffled.reverse();
        let r = rotate % shuffled.len();
        shuffled.rotate_left(r);
        let members = |pts: &[FrenetPoint]| {
            let c = cluster_pedestrians(pts, 1.5, 2);
            let clusters = c.clusters.iter().map(|g| g.iter().map(|&i| pts[i]).collect()).collect();
            let noise = c.noise.iter().map(|&i| vec![pts[i]]).collect();
            (canonical(clusters), canonical(noise))
        };
        prop_assert_eq!(members(&points), members(&shuffled));
    }

    #[test]
    fn larger_margins_never_shrink(
        x in 20.0f64..120.0,
        offset in -3.0f64..3.0,
        yaw in -1.0f64..1.0,
        m_long in 0.0f64..1.0,
        m_lat in 0.0f64..1.0,
        grow in 0.0f64..0.5,
    ) {
        let reference = curved();
        let base = reference.frenet_to_cart(FrenetPoint::new(x, offset)).unwrap();
        let o = RawObstacle {
            id: 1,
            kind: ObstacleKind::Vehicle,
            position: base,
            yaw,
            length: 4.5,
            width: 1.9,
            velocity: Point2::default(),
        };
        let small = inflate_vehicle(&o, m_long, m_lat, &reference, 0.25).unwrap();
        let large = inflate_vehicle(&o, m_long + grow, m_lat + grow, &reference, 0.25).unwrap();
        let (s0, s1) = small.s_range();
        let (d0, d1) = small.d_range();
        let (t0, t1) = large.s_range();
        let (e0, e1) = large.d_range();
        prop_assert!(t0 <= s0 + 1e-9 && t1 >= s1 - 1e-9);
        prop_assert!(e0 <= d0 + 1e-9 && e1 >= d1 - 1e-9);
    }

    #[test]
    fn wider_lower_road_never_moves_upper_to_lower(
        d_lo in -2.0f64..1.0,
        width in 0.5f64..2.5,
        widen in 0.0f64..3.0,
    ) {
        let poly = slab(10.0, d_lo, d_lo + width);
        let narrow = classify_obstacle(&poly, -3.5, 3.5, 2.0, 0.25);
        let wide = classify_obstacle(&poly, -3.5 - widen, 3.5, 2.0, 0.25);
        if let (Ok(a), Ok(b)) = (narrow, wide) {
            if a.label == DeviationLabel::Upper {
                prop_assert_eq!(b.label, DeviationLabel::Upper);
            }
        }
    }

    #[test]
    fn partition_is_disjoint_and_deterministic(
        slabs in prop::collection::vec((0.0f64..50.0, -3.0f64..2.0, 0.3f64..1.5), 0..12),
        risk in any::<bool>(),
    ) {
        let set = ObstacleSet::new(
            slabs
                .iter()
                .enumerate()
                .map(|(i, &(s, d, w))| slab(s, d, d + w).with_ids(vec![i]))
                .collect(),
        );
        let config = GovernorConfig { risk_mode: risk, ..Default::default() };
        let first = DecisionGovernor::new(config.clone()).partition(&set, -4.0, 4.0, 1.0);
        let second = DecisionGovernor::new(config).partition(&set, -4.0, 4.0, 1.0);
        prop_assert_eq!(&first, &second);
        if let Ok(p) = first {
            let mut all: Vec<usize> = p.lower.iter().chain(&p.upper).chain(&p.risk).copied().collect();
            let count = all.len();
            all.sort_unstable();
            all.dedup();
            prop_assert_eq!(all.len(), count);
            prop_assert_eq!(count, slabs.len());
        }
    }
}
