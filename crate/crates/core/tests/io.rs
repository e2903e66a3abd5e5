use lqg_core::field::FieldGrid;
use lqg_core::io::{field_container, field_from_container, fmt_f64, Container};
use lqg_core::GridSpec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn floats_survive_text(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn field_container_round_trip(nx in 2usize..20, ny in 2usize..20, seed in any::<u64>(), h in 1e-4f64..1.0) {
        let g = GridSpec::new(lqg_core::Point::new(-0.3, 0.7), h, nx, ny).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| ((i as u64 ^ seed) as f64).sin() * 1e3).collect();
        let f = FieldGrid::from_values(g, vals, (1, 4)).unwrap();
        let c = field_container(&f);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Container::read_from(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &c);
        let f2: FieldGrid<f64> = field_from_container(&back).unwrap();
        prop_assert_eq!(f2.values, f.values);
        prop_assert_eq!(f2.grid, f.grid);
        prop_assert_eq!(f2.band_range, (1, 4));
    }
}

#[test]
fn truncated_container_is_rejected() {
    let g = GridSpec::square(1.0, 5).unwrap();
    let c = field_container(&FieldGrid::constant(g, 2.0));
    let mut buf = Vec::new();
    c.write_to(&mut buf).unwrap();
    buf.truncate(buf.len() - 3);
    assert!(Container::read_from(&mut buf.as_slice()).is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::square(1.0, 7).unwrap();
    let c = field_container(&FieldGrid::constant(g, -1.5));
    let path = dir.path().join("f.bin");
    c.save(&path).unwrap();
    assert_eq!(Container::load(&path).unwrap(), c);
}
