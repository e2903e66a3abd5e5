mod common;

use lqg_core::experiments::{
    d_gamma_self_consistency, euclidean_uk_mc, exit_time_scaling_fit, inscribed_radius_stat, minkowski_estimate, tail_curve,
    volume_scaling_fit, BallKind,
};
use lqg_core::metric::GAMMA_PURE_GRAVITY;
use lqg_core::{Calibration, LqgSetup, Normalization, Rect};

fn small_lqg() -> LqgSetup {
    LqgSetup {
        gamma: GAMMA_PURE_GRAVITY,
        d_gamma: 4.0,
        half_width: 0.25,
        resolution: 256,
        top_band: None,
        eps_cells: 4,
        normalization: Normalization::Gmc,
        calibration: Calibration::Fixed(1.0),
    }
}

const SMALL_LADDER: [f64; 4] = [0.006, 0.012, 0.024, 0.06];

#[test]
fn flat_exit_time_slope_is_two() {
    let setup = LqgSetup::flat(0.6, 241);
    let r = exit_time_scaling_fit(&setup, &[0.05, 0.1, 0.2, 0.5], 200, 1e-6, 10_000_000, 3).unwrap();
    assert!((r.fit.slope - 2.0).abs() < 0.1, "{} ± {}", r.fit.slope, r.fit.ci_half_width);
}

#[test]
fn flat_minkowski_counts() {
    // coarse grid: only the counts' ordering and the packing check are
    // meaningful here
    let setup = LqgSetup::flat(0.55, 221);
    let r = minkowski_estimate(&setup, Rect::centered(0.4), &[0.05, 0.1, 0.2, 0.5], 1, 1).unwrap_err();
    assert!(matches!(r, lqg_core::Error::Truncation(_)));
    let r = minkowski_estimate(&setup, Rect::centered(0.3), &[0.02, 0.04, 0.08, 0.2], 1, 1).unwrap();
    assert!(r.fit.statistics.windows(2).all(|w| w[1] < w[0]));
    assert!(r.fit.slope > 1.5 && r.fit.slope < 2.1, "{}", r.fit.slope);
    assert!(r.rows.iter().all(|x| x.check.holds()));
}

#[test]
fn flat_inscribed_exponent_is_one() {
    let setup = LqgSetup::flat(0.6, 241);
    let st = inscribed_radius_stat(&setup, &[0.02, 0.05, 0.1, 0.2, 0.4], 1, 1).unwrap();
    assert!((st.exponent - 1.0).abs() < 0.05, "{}", st.exponent);
    for r in &st.rows {
        assert!(r.inscribed <= r.diameter / 2.0 + 1e-12);
    }
}

#[test]
fn flat_d_gamma_iteration_stops_at_two() {
    let setup = LqgSetup::flat(0.6, 121);
    let it = d_gamma_self_consistency(&setup, &[0.05, 0.1, 0.2, 0.5], 1, 1).unwrap();
    assert_eq!(it.len(), 1);
    assert!((it[0].fitted - 2.0).abs() < 0.1);
}

#[test]
fn uk_radius_scaling() {
    for (k, gamma) in [(2usize, 1.0), (2, 0.5), (3, 0.5)] {
        let exp = 2.0 * k as f64 - gamma * gamma * (k * (k - 1)) as f64 / 2.0;
        let a = euclidean_uk_mc(k, gamma, 1.0, 100_000, 11).unwrap();
        let b = euclidean_uk_mc(k, gamma, 0.5, 100_000, 12).unwrap();
        let ratio = a.estimate / b.estimate;
        // delta method for independent estimates
        let se = ratio * ((a.std_error / a.estimate).powi(2) + (b.std_error / b.estimate).powi(2)).sqrt();
        let want = 2f64.powf(exp);
        assert!((ratio - want).abs() <= 3.0 * se, "k {k} gamma {gamma}: {ratio} ± {se} vs {want}");
    }
}

#[test]
fn uk_two_points_matches_quadrature() {
    for gamma in [0.5, 1.0, 1.2] {
        let e = euclidean_uk_mc(2, gamma, 1.0, 100_000, 21).unwrap();
        let want = common::euclidean_u2(gamma, 1.0);
        assert!((e.estimate - want).abs() <= 4.0 * e.std_error, "gamma {gamma}: {} ± {} vs {want}", e.estimate, e.std_error);
        assert!(!e.divergent());
    }
    assert!(euclidean_uk_mc(2, 1.5, 1.0, 1000, 1).unwrap().analytic_divergence);
    // near the threshold, collapsed samples must not pass as a finite answer
    let e = euclidean_uk_mc(2, 1.4, 1.0, 100_000, 21).unwrap();
    let want = common::euclidean_u2(1.4, 1.0);
    assert!(e.divergent() || (e.estimate - want).abs() <= 4.0 * e.std_error);
}

#[test]
fn lqg_volume_slope_is_seed_stable() {
    let s = small_lqg();
    let a = volume_scaling_fit(&s, &SMALL_LADDER, 12, 101).unwrap().fit;
    let b = volume_scaling_fit(&s, &SMALL_LADDER, 12, 202).unwrap().fit;
    let joint = (a.ci_half_width.powi(2) + b.ci_half_width.powi(2)).sqrt();
    assert!((a.slope - b.slope).abs() <= joint, "{} ± {} vs {} ± {}", a.slope, a.ci_half_width, b.slope, b.ci_half_width);
    assert!(a.slope > 2.0 && b.slope > 2.0);
}

#[test]
fn lqg_tail_curve_is_monotone() {
    let mut s = small_lqg();
    s.gamma = 1.0;
    s.d_gamma = 2.0 + 0.5 + 1.0 / 6f64.sqrt();
    s.half_width = 1.25;
    let rows = tail_curve(&s, BallKind::EuclideanUnit, &[0.0, 1.0, 2.0, 3.0, 4.0, 6.0], 40, 5).unwrap();
    assert_eq!(rows[0].survival, 1.0);
    assert!(rows.windows(2).all(|w| w[1].survival <= w[0].survival && w[1].lower >= w[0].lower));
    for r in &rows {
        assert!(r.survival_lo <= r.survival && r.survival <= r.survival_hi);
    }
}
