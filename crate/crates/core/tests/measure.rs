use lqg_core::field::StarPlan;
use lqg_core::measure::{build_measure, circle_averages, gmc_variance, Normalization};
use lqg_core::{CellMask, Error, Rect};
use proptest::prelude::*;

#[test]
fn gmc_mean_cell_mass_is_lebesgue() {
    let h = 0.01;
    let eps = 4.0 * h;
    let gamma = 1.2;
    let plan = StarPlan::<f64>::new(0, 2, Rect::centered(0.5), h).unwrap();
    let mut totals = Vec::new();
    let mut area = 0.0;
    for seed in 0..80 {
        let f = plan.sample(seed);
        let m = build_measure(&f, gamma, eps, Normalization::Gmc).unwrap();
        area = m.masses.iter().filter(|x| **x > 0.0).count() as f64 * h * h;
        totals.push(m.total_mass);
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let sd = (totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - area).abs() < 3.0 * sd / n.sqrt(), "mean mass {mean} vs area {area} (sd {sd})");
}

#[test]
fn gmc_variance_matches_replicas() {
    let h = 0.01;
    let eps = 0.04;
    let v = gmc_variance(0, 2, h, eps).unwrap();
    let plan = StarPlan::<f64>::new(0, 2, Rect::centered(0.5), h).unwrap();
    // nodes farther apart than the band-1 range e^{-1}: independent samples
    let g = plan.grid;
    let nodes: Vec<usize> = [(10, 10), (10, 60), (60, 10), (60, 60)].iter().map(|&(a, b)| g.index(a, b)).collect();
    let mut xs = Vec::new();
    for seed in 0..400 {
        let f = plan.sample(seed);
        let (avg, _) = circle_averages(&f, eps);
        xs.extend(nodes.iter().map(|&i| avg[i]));
    }
    let n = xs.len() as f64;
    let emp = xs.iter().map(|x| x * x).sum::<f64>() / n;
    assert!((emp - v).abs() < 4.0 * v * (2.0 / n).sqrt(), "empirical {emp} vs exact {v}");
    assert!(v > 0.0 && v < 2.0);
    assert_eq!(gmc_variance(2, 2, h, eps).unwrap(), 0.0);
}

#[test]
fn eps_checks() {
    let plan = StarPlan::<f64>::new(0, 1, Rect::centered(0.5), 0.01).unwrap();
    let f = plan.sample(1);
    assert!(matches!(build_measure(&f, 1.0, 0.01, Normalization::Gmc), Err(Error::Resolution(_))));
    assert!(build_measure(&f, 1.0, 0.03, Normalization::Gmc).is_err());
    assert!(build_measure(&f, 2.0, 0.04, Normalization::Gmc).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shift_scales_mass(seed in 0u64..500, c in -2.0f64..2.0, gamma in 0.1f64..1.9, lqg in any::<bool>()) {
        let norm = if lqg { Normalization::Lqg } else { Normalization::Gmc };
        let plan = StarPlan::<f64>::new(0, 1, Rect::centered(0.5), 0.02).unwrap();
        let f = plan.sample(seed);
        let m0 = build_measure(&f, gamma, 0.08, norm).unwrap();
        let m1 = build_measure(&f.shifted(c), gamma, 0.08, norm).unwrap();
        let k = (gamma * c).exp();
        for (a, b) in m0.masses.iter().zip(&m1.masses) {
            prop_assert!((b - k * a).abs() <= 1e-11 * b.abs().max(1e-300));
        }
        let mask = CellMask::disk(f.grid, lqg_core::Point::origin(), 0.2);
        let v0 = m0.region_volume(&mask).unwrap();
        let v1 = m1.region_volume(&mask).unwrap();
        prop_assert!((v1 - k * v0).abs() <= 1e-10 * v1);
    }
}
