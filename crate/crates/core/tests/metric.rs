use lqg_core::field::sample_star_field;
use lqg_core::metric::{build_metric_graph, octile, MetricGraph, GAMMA_PURE_GRAVITY};
use lqg_core::{GridSpec, Point, Rect};
use proptest::prelude::*;

#[test]
fn flat_ball_is_an_octagon() {
    // unit-weight 8-connected ball: max + (sqrt2 - 1) min <= r, an octagon
    // of area 2 sqrt2 r^2
    let g = GridSpec::<f64>::square(1.0, 801).unwrap();
    let m = MetricGraph::flat(g);
    for r in [0.3, 0.6, 0.9] {
        let ball = m.metric_ball(Point::origin(), r + 1e-9, None).unwrap();
        let area = ball.count() as f64 * g.spacing * g.spacing;
        let want = 2.0 * 2f64.sqrt() * r * r;
        assert!((area / want - 1.0).abs() < 0.01, "r {r}: {area} vs {want}");
    }
}

#[test]
fn octile_is_a_norm() {
    for (dx, dy) in [(3.0, 4.0), (-2.0, 7.0), (0.0, -5.0)] {
        assert_eq!(octile(dx, dy), octile(dy, dx));
        assert_eq!(octile(dx, dy), octile(-dx, dy));
        assert!((octile(2.0 * dx, 2.0 * dy) - 2.0 * octile(dx, dy)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weyl_scaling(seed in 0u64..1000, c in -1.5f64..1.5, ax in -0.4f64..0.4, ay in -0.4f64..0.4, bx in -0.4f64..0.4, by in -0.4f64..0.4) {
        let f = sample_star_field::<f64>(0, 1, Rect::centered(0.5), 0.02, seed).unwrap();
        let gamma = GAMMA_PURE_GRAVITY;
        let g0 = build_metric_graph(&f, gamma, 4.0, 1.0).unwrap();
        let g1 = build_metric_graph(&f.shifted(c), gamma, 4.0, 1.0).unwrap();
        let (a, b) = (Point::new(ax, ay), Point::new(bx, by));
        let d0 = g0.distance(a, b, None).unwrap();
        let d1 = g1.distance(a, b, None).unwrap();
        let k = (c * gamma / 4.0).exp();
        prop_assert!((d1 - k * d0).abs() <= 1e-12 * d1.max(1e-300));
    }

    #[test]
    fn distance_is_a_metric(seed in 0u64..1000, pts in proptest::collection::vec((-0.45f64..0.45, -0.45f64..0.45), 3)) {
        let f = sample_star_field::<f64>(0, 1, Rect::centered(0.5), 0.025, seed).unwrap();
        let g = build_metric_graph(&f, 1.0, 2.0 + 0.5 + 1.0 / 6f64.sqrt(), 1.0).unwrap();
        let p: Vec<Point<f64>> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let d = |i: usize, j: usize| g.distance(p[i], p[j], None).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() <= 1e-12 * d(0, 1).max(1e-300));
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        prop_assert!(d(0, 0) == 0.0);
        let all = g.distances_from(g.grid.nearest(p[0]).unwrap(), None);
        prop_assert_eq!(all[g.grid.nearest(p[2]).unwrap()], d(0, 2));
    }

    #[test]
    fn balls_are_nested(seed in 0u64..1000, s in 0.01f64..0.5, t in 0.0f64..0.5) {
        let f = sample_star_field::<f64>(0, 1, Rect::centered(0.5), 0.025, seed).unwrap();
        let g = build_metric_graph(&f, 1.0, 3.0, 1.0).unwrap();
        let small = g.metric_ball(Point::origin(), s, None).unwrap();
        let big = g.metric_ball(Point::origin(), s + t, None).unwrap();
        prop_assert!(small.is_subset_of(&big));
    }
}
