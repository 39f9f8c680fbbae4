use approx::assert_relative_eq;
use pb210::data::write_dataset_to;
use pb210::simulator::published_core;
use pb210::{load_dataset, slab_areal_activity, write_dataset, Dataset, Measurement};
use proptest::prelude::*;

#[test]
fn bundled_cores_have_thirty_one_centimetre_slabs() {
    for n in 1..=3 {
        let d = published_core(n).unwrap();
        assert_eq!(d.len(), 30);
        for (i, m) in d.measurements().iter().enumerate() {
            assert_eq!(m.depth, (i + 1) as f64);
            assert_eq!(m.thickness, 1.0);
        }
    }
}

#[test]
fn sim02_row_fourteen() {
    let d = published_core(2).unwrap();
    let m = &d.measurements()[13];
    assert_eq!(m.label, "Sim02-14");
    assert_eq!(m.pb210, 21.3643);
    assert_eq!(m.pb210_sd, 1.0);
    assert_eq!(m.ra226_sd, 0.45);
}

#[test]
fn csv_round_trip_preserves_every_value() {
    let d = published_core(3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim03.csv");
    write_dataset(&d, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.measurements(), d.measurements());
    assert_eq!(back.core_id(), "sim03");
}

#[test]
fn comment_line_is_written_and_skipped() {
    let d = published_core(1).unwrap();
    let mut buf = Vec::new();
    write_dataset_to(&d, &mut buf, Some("made by a test")).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# made by a test\nlabel,depth,"));
    let back = pb210::data::read_dataset(text.as_bytes(), "x", std::path::Path::new("x")).unwrap();
    assert_eq!(back.len(), 30);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_dataset("/definitely/not/here.csv").unwrap_err();
    assert!(matches!(err, pb210::Error::Io(_)));
}

fn slab(depth: f64, pb: f64) -> Measurement {
    Measurement {
        label: format!("s{depth}"),
        depth,
        density: 0.12,
        pb210: pb,
        pb210_sd: 1.0,
        thickness: 1.0,
        ra226: 10.0,
        ra226_sd: 0.5,
    }
}

#[test]
fn reordered_rows_are_rejected() {
    let err = Dataset::new("c", vec![slab(2.0, 50.0), slab(1.0, 60.0)]).unwrap_err();
    assert!(err.to_string().contains("depths not increasing"));
}

proptest! {
    #[test]
    fn areal_activity_is_linear_in_concentration(
        c1 in -100.0..1000.0f64,
        c2 in -100.0..1000.0f64,
        k in 0.0..10.0f64,
        rho in 0.01..2.0f64,
        delta in 0.1..5.0f64,
    ) {
        let lhs = slab_areal_activity(c1 + k * c2, rho, delta).unwrap();
        let rhs = slab_areal_activity(c1, rho, delta).unwrap() + k * slab_areal_activity(c2, rho, delta).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn areal_activity_scales_with_mass_per_area(c in 0.0..1000.0f64, rho in 0.01..2.0f64, delta in 0.1..5.0f64) {
        let a = slab_areal_activity(c, rho, delta).unwrap();
        assert_relative_eq!(a, c * rho * delta * 10.0, max_relative = 1e-12);
    }
}
