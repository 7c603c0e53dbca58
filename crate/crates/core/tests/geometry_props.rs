use brownian_fracture::geometry::{contains, dist_to_cylinder_boundary, dist_to_trace, CylinderSpec, Point3, TracePolyline};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point3> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

proptest! {
    #[test]
    fn trace_distance_matches_brute_force(
        verts in prop::collection::vec(point(), 2..200),
        queries in prop::collection::vec(point(), 1..20),
    ) {
        let t = TracePolyline::new(verts, 1e-4).unwrap();
        for q in queries {
            let fast = dist_to_trace(q, &t);
            let slow = t.distance_brute_force(q);
            prop_assert!((fast - slow).abs() <= 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn containment_matches_sign_of_distance(p in point(), l in 0.1..6.0f64, r in 0.1..3.0f64) {
        let c = CylinderSpec::finite(l, r).unwrap();
        prop_assert_eq!(contains(p, &c), dist_to_cylinder_boundary(p, &c) > 0.0);
    }

    #[test]
    fn cylinder_distance_is_lipschitz(a in point(), b in point()) {
        let c = CylinderSpec::finite(2.0, 1.0).unwrap();
        let da = dist_to_cylinder_boundary(a, &c);
        let db = dist_to_cylinder_boundary(b, &c);
        prop_assert!((da - db).abs() <= a.distance(b) * (1.0 + 1e-9) + 1e-15);
    }
}
