use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transform::GrayImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Dynamic range for SSIM constants: 1 for images in `[0,1]`, 255 for
/// 8-bit ranges, otherwise the joint max − min (1 if flat).
pub fn dynamic_range<T: Real>(a: &GrayImage<T>, b: &GrayImage<T>) -> T {
    let (lo_a, hi_a) = a.min_max();
    let (lo_b, hi_b) = b.min_max();
    let (lo, hi) = (lo_a.min(lo_b), hi_a.max(hi_b));
    if lo >= T::zero() && hi <= T::one() {
        T::one()
    } else if lo >= T::zero() && hi <= T::lit(255.0) {
        T::lit(255.0)
    } else if hi > lo {
        hi - lo
    } else {
        T::one()
    }
}

fn gaussian_kernel<T: Real>() -> Vec<T> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| T::lit(v / s)).collect()
}

/// Separable filter over the fully-inside window positions only.
fn filter_valid<T: Real>(data: &[T], w: usize, h: usize, k: &[T]) -> Vec<T> {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut rows = vec![T::zero(); ow * h];
    for y in 0..h {
        for x in 0..ow {
            let mut s = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                s = s + kv * data[y * w + x + i];
            }
            rows[y * ow + x] = s;
        }
    }
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = T::zero();
            for (i, &kv) in k.iter().enumerate() {
                s = s + kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03 and the dynamic range from [`dynamic_range`].
pub fn ssim<T: Real>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<T> {
    check_inputs(a, b)?;
    ssim_with_range(a, b, dynamic_range(a, b))
}

pub fn ssim_with_range<T: Real>(a: &GrayImage<T>, b: &GrayImage<T>, range: T) -> Result<T> {
    check_inputs(a, b)?;
    let (w, h) = (a.width(), a.height());
    let k = gaussian_kernel::<T>();
    let sq = |img: &[T], other: &[T]| -> Vec<T> { img.iter().zip(other).map(|(&x, &y)| x * y).collect() };
    let mu_a = filter_valid(a.data(), w, h, &k);
    let mu_b = filter_valid(b.data(), w, h, &k);
    let e_aa = filter_valid(&sq(a.data(), a.data()), w, h, &k);
    let e_bb = filter_valid(&sq(b.data(), b.data()), w, h, &k);
    let e_ab = filter_valid(&sq(a.data(), b.data()), w, h, &k);
    let c1 = (T::lit(K1) * range).powi(2);
    let c2 = (T::lit(K2) * range).powi(2);
    let two = T::lit(2.0);
    let mut total = T::zero();
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (two * (ma * mb) + c1) * (two * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total = total + num / den;
    }
    Ok(total / T::from_usize_lossy(mu_a.len()))
}

fn check_inputs<T: Real>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::DimensionMismatch {
            expected_w: a.width(),
            expected_h: a.height(),
            got_w: b.width(),
            got_h: b.height(),
        });
    }
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: a.width(),
            height: a.height(),
            min: SSIM_WINDOW,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_images_closed_form() {
        let a = GrayImage::from_fn(20, 20, |_, _| 0.25f64);
        let b = GrayImage::from_fn(20, 20, |_, _| 0.5f64);
        let s = ssim(&a, &b).unwrap();
        let expect = (0.25 + 1e-4) / (0.3125 + 1e-4);
        assert!((s - expect).abs() < 1e-9, "{s} vs {expect}");
    }

    #[test]
    fn identical_images_give_exactly_one() {
        let a = GrayImage::from_fn(30, 25, |x, y| ((x * 7 + y * 13) % 256) as f64);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn size_and_shape_errors() {
        let small = GrayImage::<f64>::zeros(10, 30);
        assert!(matches!(ssim(&small, &small), Err(Error::TooSmall { .. })));
        let other = GrayImage::<f64>::zeros(30, 10);
        assert!(matches!(ssim(&small, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn range_rule() {
        let unit = GrayImage::from_fn(2, 2, |x, _| x as f64 * 0.5);
        let byte = GrayImage::from_fn(2, 2, |x, _| x as f64 * 200.0);
        let z = GrayImage::from_fn(2, 2, |x, _| x as f64 * 4.0 - 2.0);
        assert_eq!(dynamic_range(&unit, &unit), 1.0);
        assert_eq!(dynamic_range(&unit, &byte), 255.0);
        assert_eq!(dynamic_range(&z, &z), 4.0);
    }
}
