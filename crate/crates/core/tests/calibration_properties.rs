//! Deviation-measure invariants and ingestion of the shipped synthetic fixture.

use std::fs::File;

use fracduct::calibration::{predicted_field, sigma, write_comparison_csv};
use fracduct::{
    deviation, grid_search, interpolate_at, load_profile, normalize_field, DuctSolverConfig,
    ExperimentalProfile, Grid2D, MeasurementPoint, ModelVariant, Normalization, ScalarField,
};
use proptest::prelude::*;

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/fixtures/synthetic_profile.csv"
);

fn residuals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..40)
}

proptest! {
    #[test]
    fn sigma_nonnegative_and_zero_only_for_zero(r in residuals()) {
        let s = sigma(&r);
        prop_assert!(s >= 0.0);
        prop_assert_eq!(s == 0.0, r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sigma_scales_linearly(r in residuals(), c in -5.0..5.0f64) {
        let scaled: Vec<f64> = r.iter().map(|v| c * v).collect();
        let expected = c.abs() * sigma(&r);
        prop_assert!((sigma(&scaled) - expected).abs() <= 1e-12 * (1.0 + expected));
    }

    #[test]
    fn max_mode_is_scale_invariant(
        c in 1e-3..1e3f64,
        coords in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0.0..1.2f64), 1..12),
    ) {
        let g = Grid2D::new(9, 7, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x1, x2| (3.0 * x1).sin() * x2 * (1.0 - x2) + 0.1);
        let points = coords.iter().map(|&(x1, x2, u)| MeasurementPoint { x1, x2, u }).collect();
        let profile = ExperimentalProfile::new(points, 1.0, "").unwrap();
        let s1 = deviation(&normalize_field(&u, Normalization::Max).unwrap(), &profile).unwrap();
        let s2 = deviation(&normalize_field(&u.scaled(c), Normalization::Max).unwrap(), &profile).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-12 * (1.0 + s1));
    }
}

#[test]
fn fixture_round_trip() {
    let profile = load_profile(File::open(FIXTURE).unwrap(), 1.0, "synthetic").unwrap();
    assert_eq!(profile.len(), 25);
    assert_eq!(profile.label(), "synthetic");
    assert_eq!(profile.points()[0].x1, 0.1);
    assert_eq!(profile.cross_line(0.7, 1e-12).len(), 5);

    // regenerate the samples with the documented settings
    let g = Grid2D::new(20, 20, 1.0).unwrap();
    let solver = DuctSolverConfig::default();
    let u = predicted_field(
        50.0,
        1.0 / 3.0,
        g,
        ModelVariant::OneTerm,
        Normalization::None,
        &solver,
    )
    .unwrap();
    for p in profile.points() {
        let y = interpolate_at(&u, p.x1, p.x2).unwrap();
        assert!((y - p.u).abs() <= 1e-14 * y.abs(), "({}, {})", p.x1, p.x2);
    }
    assert!(deviation(&u, &profile).unwrap() <= 1e-15);

    let r = grid_search(
        &[25.0, 50.0],
        &[0.25, 1.0 / 3.0],
        &profile,
        g,
        ModelVariant::OneTerm,
        Normalization::None,
        &solver,
    )
    .unwrap();
    assert_eq!((r.best_mu, r.best_alpha), (50.0, 1.0 / 3.0));

    let mut buf = Vec::new();
    write_comparison_csv(&u, &profile.cross_line(0.5, 1e-12), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 6);
}
