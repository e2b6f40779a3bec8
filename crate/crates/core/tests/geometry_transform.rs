use std::f64::consts::PI;

use fetalign::geometry::{fit_ellipse, robust_fit_ellipse, EllipseParams, Point2};
use fetalign::landmarks::{LandmarkSet, Structure};
use fetalign::transform::{compose, ellipse_to_canonical, mirror_to_convention, warp_image, warp_points, Affine2D, GrayImage};
use proptest::prelude::*;

fn ellipse() -> impl Strategy<Value = EllipseParams<f64>> {
    (5.0..300.0f64, 0.05..1.0f64, 0.0..800.0f64, 0.0..540.0f64, -PI..PI)
        .prop_map(|(a, r, x0, y0, t)| EllipseParams::new(a, a * r, x0, y0, t).unwrap())
}

fn affine() -> impl Strategy<Value = Affine2D<f64>> {
    (-PI..PI, 0.5..2.0f64, 0.5..2.0f64, -0.3..0.3f64, -100.0..100.0f64, -100.0..100.0f64).prop_map(
        |(r, sx, sy, shear, tx, ty)| {
            Affine2D::translation(tx, ty)
                .compose(&Affine2D::rotation(r))
                .compose(&Affine2D::from_rows([[sx, shear, 0.0], [0.0, sy, 0.0]]).unwrap())
        },
    )
}

fn point() -> impl Strategy<Value = Point2<f64>> {
    (-500.0..1500.0f64, -500.0..1500.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #[test]
    fn boundary_points_satisfy_the_conic(p in ellipse()) {
        let c = p.to_coeffs();
        for q in p.sample_boundary(97) {
            prop_assert!(c.eval(q.x, q.y).abs() <= 1e-9 * p.a().powi(2) * p.b().powi(2));
        }
    }

    #[test]
    fn conic_sign_inside_and_outside(p in ellipse()) {
        let c = p.to_coeffs();
        let (s, co) = p.theta().sin_cos();
        prop_assert!(c.eval(p.x0(), p.y0()) < 0.0);
        prop_assert!(c.eval(p.x0() + 2.0 * p.a() * co, p.y0() + 2.0 * p.a() * s) > 0.0);
        prop_assert!(c.is_ellipse());
    }

    #[test]
    fn half_turn_gives_identical_coefficients(p in ellipse()) {
        let q = EllipseParams::new(p.a(), p.b(), p.x0(), p.y0(), p.theta() + PI).unwrap();
        let (c, d) = (p.to_coeffs(), q.to_coeffs());
        let scale = p.a().powi(2) * (p.x0().abs() + p.y0().abs() + 1.0).powi(2);
        for (u, v) in [(c.a, d.a), (c.b, d.b), (c.c, d.c), (c.d, d.d), (c.e, d.e), (c.f, d.f)] {
            prop_assert!((u - v).abs() <= 1e-12 * scale, "{u} vs {v}");
        }
    }

    #[test]
    fn constructor_canonicalizes(a in 0.1..500.0f64, b in 0.1..500.0f64, t in -20.0..20.0f64) {
        let p = EllipseParams::new(a, b, 0.0, 0.0, t).unwrap();
        prop_assert!(p.a() >= p.b());
        prop_assert!((-PI / 2.0..PI / 2.0).contains(&p.theta()));
    }

    #[test]
    fn fit_keeps_an_exact_ellipse_fixed(p in ellipse()) {
        let fit = fit_ellipse(&p.sample_boundary(60), Some(p)).unwrap().params;
        for (g, w) in [(fit.a(), p.a()), (fit.b(), p.b()), (fit.x0(), p.x0()), (fit.y0(), p.y0())] {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{fit:?} vs {p:?}");
        }
    }

    #[test]
    fn trimming_error_is_monotone(pts in prop::collection::vec(point(), 5..80)) {
        if let Ok(r) = robust_fit_ellipse(&pts) {
            for w in r.per_round_error.windows(2) {
                prop_assert!(w[1].0 <= w[0].0 * (1.0 + 1e-12), "{:?}", r.per_round_error);
            }
        }
    }

    #[test]
    fn canonical_transform_contract(p in ellipse()) {
        let (w, h) = (800.0, 540.0);
        let t = ellipse_to_canonical(&p, w, h);
        let c = t.apply(p.center());
        prop_assert!((c.x - 400.0).abs() < 1e-9 && (c.y - 270.0).abs() < 1e-9);
        for (xc, yc) in [(p.a(), 0.0), (-p.a(), 0.0), (0.0, p.b()), (0.0, -p.b())] {
            let q = t.apply(p.from_canonical(xc, yc));
            let r = ((q.x - 400.0) / 400.0).powi(2) + ((q.y - 270.0) / 270.0).powi(2);
            prop_assert!((r - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_is_associative(f in affine(), g in affine(), h in affine()) {
        let l = compose(&compose(&f, &g), &h);
        let r = compose(&f, &compose(&g, &h));
        prop_assert!(l.max_abs_diff(&r) <= 1e-12 * (1.0 + l.matrix().iter().flatten().fold(0f64, |m, v| m.max(v.abs()))));
    }

    #[test]
    fn composed_warp_equals_sequential_warps(f in affine(), g in affine(), pts in prop::collection::vec(point(), 1..20)) {
        let once = warp_points(&compose(&f, &g), &pts);
        let twice = warp_points(&f, &warp_points(&g, &pts));
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!(a.distance(b) <= 1e-9);
        }
    }

    #[test]
    fn inverse_round_trips(f in affine(), p in point()) {
        let back = f.inverse().unwrap().apply(f.apply(p));
        prop_assert!(back.distance(&p) <= 1e-9);
    }

    #[test]
    fn integer_shift_is_exact(dx in -5i32..=5, dy in -5i32..=5, seed in 0u64..1000) {
        let (w, h) = (23, 17);
        let img = GrayImage::from_fn(w, h, |x, y| ((x * 31 + y * 17 + seed as usize) % 97) as f64);
        let t = Affine2D::translation(dx as f64, dy as f64);
        let out = warp_image(&img, &t, w, h).unwrap();
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && sx < w as i32 && sy < h as i32 {
                    prop_assert_eq!(out.get(x as usize, y as usize), img.get(sx as usize, sy as usize));
                }
            }
        }
    }

    #[test]
    fn mirroring_is_idempotent_and_isometric(cx in 10.0..790.0f64, bx in 10.0..790.0f64) {
        let mut lm = LandmarkSet::new();
        lm.insert(Structure::Cavum, vec![
            Point2::new(cx - 5.0, 200.0), Point2::new(cx + 5.0, 200.0),
            Point2::new(cx + 5.0, 210.0), Point2::new(cx - 5.0, 210.0),
        ]).unwrap();
        let cb: Vec<Point2<f64>> = (0..8)
            .map(|k| { let t = k as f64 * PI / 4.0; Point2::new(bx + 8.0 * t.cos(), 300.0 + 6.0 * t.sin()) })
            .collect();
        lm.insert(Structure::Cerebellum, cb).unwrap();
        let img = GrayImage::from_fn(800, 540, |x, y| (x + 2 * y) as f64);
        let (img1, lm1, _) = mirror_to_convention(&img, &lm).unwrap();
        let (img2, lm2, flipped_again) = mirror_to_convention(&img1, &lm1).unwrap();
        prop_assert!(!flipped_again);
        prop_assert_eq!(&img1, &img2);
        prop_assert_eq!(&lm1, &lm2);
        let all = |l: &LandmarkSet<f64>| l.iter().flat_map(|(_, p)| p.to_vec()).collect::<Vec<_>>();
        let (a, b) = (all(&lm), all(&lm1));
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert!((a[i].distance(&a[j]) - b[i].distance(&b[j])).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn outliers_are_trimmed() {
    use rand::{RngExt, SeedableRng};
    let truth: EllipseParams<f64> = EllipseParams::new(150.0, 100.0, 400.0, 270.0, 0.3).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut pts = truth.sample_boundary(200);
    for _ in 0..20 {
        pts.push(Point2::new(rng.random_range(0.0..800.0), rng.random_range(0.0..540.0)));
    }
    let r = robust_fit_ellipse(&pts).unwrap();
    let p = r.params;
    assert!(p.center().distance(&truth.center()) < 1.0, "{p:?}");
    assert!((p.a() / 150.0 - 1.0).abs() < 0.02 && (p.b() / 100.0 - 1.0).abs() < 0.02, "{p:?}");
    assert!((p.theta() - 0.3).abs() < 2f64.to_radians(), "{p:?}");
    let kept_outliers = r.inlier_mask[200..].iter().filter(|m| **m).count();
    assert!(kept_outliers <= 2, "{kept_outliers} outliers kept");
}

#[test]
fn clean_points_trim_little() {
    let truth: EllipseParams<f64> = EllipseParams::new(150.0, 100.0, 400.0, 270.0, 0.3).unwrap();
    let pts = truth.sample_boundary(200);
    let single = fit_ellipse(&pts, None).unwrap().params;
    let r = robust_fit_ellipse(&pts).unwrap();
    assert!(r.inlier_count() as f64 >= 0.68 * 200.0);
    for (g, w) in [(r.params.a(), single.a()), (r.params.b(), single.b()), (r.params.x0(), single.x0())] {
        assert!((g - w).abs() <= 1e-3 * w);
    }
}
