use fetalign::geometry::Point2;
use fetalign::metrics::{avg_min_euclidean, hausdorff, polygon_dsc, ssim, wilcoxon_signed_rank};
use fetalign::transform::{warp_points, Affine2D, GrayImage};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn set() -> impl Strategy<Value = Vec<Point2<f64>>> {
    prop::collection::vec((-200.0..200.0f64, -200.0..200.0f64), 1..30)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
}

fn image() -> impl Strategy<Value = GrayImage<f64>> {
    prop::collection::vec(0.0..255.0f64, 16 * 14).prop_map(|d| GrayImage::new(16, 14, d).unwrap())
}

proptest! {
    #[test]
    fn point_metrics_are_symmetric_and_ordered(p in set(), q in set()) {
        let (h, e) = (hausdorff(&p, &q).unwrap(), avg_min_euclidean(&p, &q).unwrap());
        prop_assert_eq!(h, hausdorff(&q, &p).unwrap());
        prop_assert_eq!(e, avg_min_euclidean(&q, &p).unwrap());
        prop_assert!(e >= 0.0 && e <= h);
        prop_assert_eq!(hausdorff(&p, &p).unwrap(), 0.0);
        prop_assert_eq!(avg_min_euclidean(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn point_metrics_are_rigid_invariant(p in set(), q in set(), r in -3.2..3.2f64, tx in -500.0..500.0f64, ty in -500.0..500.0f64) {
        let t = Affine2D::translation(tx, ty).compose(&Affine2D::rotation(r));
        let (tp, tq) = (warp_points(&t, &p), warp_points(&t, &q));
        prop_assert!((hausdorff(&p, &q).unwrap() - hausdorff(&tp, &tq).unwrap()).abs() <= 1e-9);
        prop_assert!((avg_min_euclidean(&p, &q).unwrap() - avg_min_euclidean(&tp, &tq).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn dsc_ignores_point_order(p in prop::collection::vec((10.0..90.0f64, 10.0..90.0f64), 4..12), shift in 0usize..12, q in prop::collection::vec((10.0..90.0f64, 10.0..90.0f64), 4..12)) {
        let p: Vec<Point2<f64>> = p.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        let q: Vec<Point2<f64>> = q.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        let mut permuted = p.clone();
        permuted.rotate_left(shift % p.len());
        permuted.reverse();
        let (a, b) = (polygon_dsc(&p, &q, 100, 100), polygon_dsc(&permuted, &q, 100, 100));
        if let (Ok(a), Ok(b)) = (&a, &b) {
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(a));
        } else {
            prop_assert_eq!(a.is_ok(), b.is_ok());
        }
        if let Ok(s) = polygon_dsc(&p, &p, 100, 100) {
            prop_assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(a in image(), b in image()) {
        let s = ssim(&a, &b).unwrap();
        prop_assert!((s - ssim(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert!(s.abs() <= 1.0);
        prop_assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn wilcoxon_is_symmetric(x in prop::collection::vec(-10i32..10, 5..40), y in prop::collection::vec(-10i32..10, 5..40)) {
        let n = x.len().min(y.len());
        let x: Vec<f64> = x[..n].iter().map(|v| *v as f64).collect();
        let y: Vec<f64> = y[..n].iter().map(|v| *v as f64).collect();
        match (wilcoxon_signed_rank(&x, &y), wilcoxon_signed_rank(&y, &x)) {
            (Ok(p), Ok(q)) => {
                prop_assert_eq!(p, q);
                prop_assert!(p > 0.0 && p <= 1.0);
            }
            (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
        }
    }
}

#[test]
fn large_samples_use_the_normal_approximation() {
    // 30 positive differences 1..=30: W+ = 465, z = (465 - 232.5 - 0.5) / sqrt(2363.75).
    let x: Vec<f64> = (1..=30).map(f64::from).collect();
    let p = wilcoxon_signed_rank(&x, &[0.0; 30]).unwrap();
    let z: f64 = (465.0 - 232.5 - 0.5) / 2363.75f64.sqrt();
    let expected = 2.0 * (1.0 - Normal::standard().cdf(z));
    assert!((p - expected).abs() <= 1e-15, "{p} vs {expected}");
}
