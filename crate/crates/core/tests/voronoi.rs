use std::f64::consts::PI;

use lqg_core::field::sample_star_field;
use lqg_core::metric::build_metric_graph;
use lqg_core::voronoi::{tutte_embedding, voronoi_partition, Tessellation, TutteMethod, NO_SITE};
use lqg_core::{CellMask, GridSpec, Point, Rect};
use proptest::prelude::*;

/// A hub site 0 joined to `m` rim sites that form a cycle. Cells are labelled
/// by angular sector so `site_of` finds the hub at the origin.
fn wheel(m: usize) -> Tessellation<f64> {
    let grid = GridSpec::<f64>::square(1.0, 9).unwrap();
    let labels = (0..grid.len())
        .map(|i| {
            let p = grid.position_of(i);
            if p.norm() < 0.3 {
                return 0;
            }
            let th = p.y.atan2(p.x).rem_euclid(2.0 * PI);
            1 + ((th / (2.0 * PI) * m as f64) as u32).min(m as u32 - 1)
        })
        .collect();
    let mut adjacency = vec![(1..=m).collect::<Vec<_>>()];
    for j in 1..=m {
        let prev = if j == 1 { m } else { j - 1 };
        let next = if j == m { 1 } else { j + 1 };
        let mut nb = vec![0, prev, next];
        nb.sort();
        nb.dedup();
        adjacency.push(nb);
    }
    let sites: Vec<Point<f64>> = (0..=m)
        .map(|j| if j == 0 { Point::origin() } else { Point::new((j as f64).cos() * 0.6, (j as f64).sin() * 0.6) })
        .collect();
    Tessellation {
        grid,
        site_nodes: sites.iter().map(|&p| grid.nearest(p).unwrap()).collect(),
        sites,
        labels,
        adjacency,
        active: vec![true; m + 1],
        boundary_sites: (1..=m).collect(),
        boundary_cells: Vec::new(),
    }
}

#[test]
fn wheel_hub_sits_at_the_centroid() {
    for m in [3usize, 5, 8] {
        let t = wheel(m);
        let e = tutte_embedding(&t, TutteMethod::LinearSolve, 0, 0, Point::origin(), Point::new(0.9, 0.05)).unwrap();
        for h in &e.hits {
            assert!((h - 1.0 / m as f64).abs() < 1e-10);
        }
        assert!(e.positions[0].norm() < 1e-10, "{:?}", e.positions[0]);
        for j in 1..=m {
            assert!((e.positions[j].norm() - 1.0).abs() < 1e-12);
        }
        // rim sites are evenly spread
        let a = e.positions[1];
        let b = e.positions[2];
        assert!((a.dist(b) - 2.0 * (PI / m as f64).sin()).abs() < 1e-10);
        assert!(e.harmonic_residual < 1e-10);
        let w = tutte_embedding(&t, TutteMethod::WalkMc, 20_000, 3, Point::origin(), Point::new(0.9, 0.05)).unwrap();
        for h in &w.hits {
            let se = (1.0 / m as f64 * (1.0 - 1.0 / m as f64) / 20_000.0).sqrt();
            assert!((h - 1.0 / m as f64).abs() < 4.0 * se);
        }
    }
}

fn random_setup(seed: u64) -> (lqg_core::Metric64, CellMask<f64>) {
    let f = sample_star_field::<f64>(0, 1, Rect::centered(0.5), 0.02, seed).unwrap();
    let g = build_metric_graph(&f, 1.0, 3.0, 1.0).unwrap();
    let dom = CellMask::disk(g.grid, Point::origin(), 0.45);
    (g, dom)
}

fn distinct_nodes(grid: &GridSpec<f64>, pts: &[(f64, f64)]) -> Vec<Point<f64>> {
    let mut seen = std::collections::HashSet::new();
    pts.iter()
        .map(|&(x, y)| Point::new(x, y))
        .filter(|&p| seen.insert(grid.nearest(p).unwrap()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_ignores_site_order(
        seed in 0u64..1000,
        pts in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 3..25),
        key in any::<u64>(),
    ) {
        let (g, dom) = random_setup(seed);
        let sites = distinct_nodes(&g.grid, &pts);
        let k = sites.len();
        // permutation: new index of old site i
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&i| (i as u64).wrapping_mul(key | 1).rotate_left(17));
        let mut new_of = vec![0; k];
        let permuted: Vec<Point<f64>> = order.iter().enumerate().map(|(new, &old)| { new_of[old] = new; sites[old] }).collect();
        let a = voronoi_partition(&g, &sites, &dom).unwrap();
        let b = voronoi_partition(&g, &permuted, &dom).unwrap();
        for (la, lb) in a.labels.iter().zip(&b.labels) {
            if *la == NO_SITE {
                prop_assert_eq!(*lb, NO_SITE);
            } else {
                prop_assert_eq!(new_of[*la as usize] as u32, *lb);
            }
        }
    }

    #[test]
    fn cells_are_connected_and_contain_their_site(
        seed in 0u64..1000,
        pts in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 2..25),
    ) {
        let (g, dom) = random_setup(seed);
        let sites = distinct_nodes(&g.grid, &pts);
        let t = voronoi_partition(&g, &sites, &dom).unwrap();
        for (s, &node) in t.site_nodes.iter().enumerate() {
            prop_assert_eq!(t.labels[node], s as u32);
            // flood fill from the site through same-label cells
            let mut seen = vec![false; t.labels.len()];
            let mut stack = vec![node];
            seen[node] = true;
            let mut reached = 1;
            while let Some(i) = stack.pop() {
                for (j, _) in g.neighbors(i) {
                    if !seen[j] && t.labels[j] == s as u32 {
                        seen[j] = true;
                        reached += 1;
                        stack.push(j);
                    }
                }
            }
            prop_assert_eq!(reached, t.labels.iter().filter(|&&l| l == s as u32).count());
        }
        // adjacency is symmetric
        for (i, nb) in t.adjacency.iter().enumerate() {
            for &j in nb {
                prop_assert!(t.adjacency[j].contains(&i));
            }
        }
    }
}
