use fetalign::geometry::{EllipseParams, Point2};
use fetalign::hulls::{average_masks, build_structure_map, concave_hull, rasterize, Alpha, Polygon2D};
use fetalign::landmarks::{LandmarkSet, Structure};
use fetalign::segmentation::BinaryMask;
use fetalign::Error;
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = Vec<Point2<f64>>> {
    prop::collection::vec((0.0..200.0f64, 0.0..150.0f64), 4..40)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
}

proptest! {
    #[test]
    fn convex_limit_covers_every_point(pts in cloud()) {
        if let Ok(poly) = concave_hull(&pts, Alpha::Fixed(0.0)) {
            for p in &pts {
                prop_assert!(poly.covers(*p), "{p:?} outside");
            }
        }
    }

    #[test]
    fn auto_hull_covers_every_point(pts in cloud()) {
        if let Ok(poly) = concave_hull(&pts, Alpha::Auto) {
            for p in &pts {
                prop_assert!(poly.covers(*p));
            }
        }
    }

    #[test]
    fn area_shrinks_as_alpha_grows(pts in cloud(), radii in prop::collection::vec(5.0..400.0f64, 2..6)) {
        let mut alphas: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
        alphas.insert(0, 0.0);
        alphas.sort_by(f64::total_cmp);
        let areas: Vec<f64> = alphas
            .iter()
            .filter_map(|&a| concave_hull(&pts, Alpha::Fixed(a)).ok().map(|p| p.area()))
            .collect();
        for w in areas.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{areas:?}");
        }
    }

    #[test]
    fn raster_count_tracks_area(a in 20.0..120.0f64, r in 0.3..1.0f64, t in -1.5..1.5f64) {
        let e = EllipseParams::new(a, a * r, 150.0, 150.0, t).unwrap();
        let poly = Polygon2D::new(e.sample_boundary(90)).unwrap();
        prop_assume!(poly.area() >= 1000.0);
        let n = rasterize(&poly, 300, 300).count() as f64;
        prop_assert!((n / poly.area() - 1.0).abs() <= 0.02, "{n} vs {}", poly.area());
    }

    #[test]
    fn map_values_are_multiples_of_one_over_n(masks in prop::collection::vec(prop::collection::vec(any::<bool>(), 48), 1..12)) {
        let masks: Vec<BinaryMask> = masks.into_iter().map(|d| BinaryMask::new(8, 6, d).unwrap()).collect();
        let n = masks.len();
        let m = average_masks(&masks).unwrap();
        prop_assert_eq!(m.n_subjects() as usize, n);
        for (k, v) in m.counts().iter().zip(m.values()) {
            prop_assert!(*k as usize <= n);
            prop_assert_eq!(v, *k as f64 / n as f64);
        }
        let expected: Vec<u32> = (0..48).map(|i| masks.iter().filter(|mk| mk.data()[i]).count() as u32).collect();
        prop_assert_eq!(m.counts(), &expected[..]);
    }
}

fn cerebellum(cx: f64, cy: f64) -> LandmarkSet<f64> {
    let pts = (0..8)
        .map(|k| {
            let t = k as f64 * std::f64::consts::PI / 4.0;
            Point2::new(cx + 30.0 * t.cos(), cy + 20.0 * t.sin())
        })
        .collect();
    let mut lm = LandmarkSet::new();
    lm.insert(Structure::Cerebellum, pts).unwrap();
    lm
}

#[test]
fn single_subject_map_is_its_hull() {
    let lm = cerebellum(60.0, 50.0);
    let m = build_structure_map(&[lm.clone()], Structure::Cerebellum, 120, 100, Alpha::Auto).unwrap();
    let hull = rasterize(&concave_hull(lm.require(Structure::Cerebellum).unwrap(), Alpha::Auto).unwrap(), 120, 100);
    assert_eq!(m.map.plateau(), hull);
    assert_eq!(m.map.counts().iter().filter(|&&c| c > 0).count(), hull.count());
}

#[test]
fn missing_structures_are_skipped_not_fatal() {
    let cohort = vec![cerebellum(60.0, 50.0), LandmarkSet::new(), cerebellum(62.0, 50.0)];
    let m = build_structure_map(&cohort, Structure::Cerebellum, 120, 100, Alpha::Auto).unwrap();
    assert_eq!(m.map.n_subjects(), 2);
    assert_eq!(m.skipped.len(), 1);
    assert_eq!(m.skipped[0].0, 1);
}

#[test]
fn midline_is_rejected() {
    let r = build_structure_map(&[cerebellum(60.0, 50.0)], Structure::Midline, 120, 100, Alpha::Auto);
    assert!(matches!(r, Err(Error::UnsupportedStructure(_))));
}

#[test]
fn csv_grid_is_exact() {
    let a = BinaryMask::from_fn(4, 3, |x, _| x < 2);
    let b = BinaryMask::from_fn(4, 3, |x, y| x < 1 || y == 0);
    let c = BinaryMask::from_fn(4, 3, |_, _| false);
    let m = average_masks(&[a, b, c]).unwrap();
    let rows: Vec<Vec<f64>> = m.to_csv().lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], vec![2.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    assert_eq!(rows[1], vec![2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
}
