//! Evaluation metrics: point-set distances, hull overlap, SSIM and the
//! paired signed-rank test.

mod report;
mod ssim;
mod wilcoxon;

pub use report::{
    compare_arms, evaluate_subject, read_comparison_csv, read_metric_csv, write_comparison_csv, write_metric_csv, Arm, ComparisonRow, Metric, MetricReport,
    MetricRow,
};
pub use ssim::{dynamic_range, ssim, ssim_with_range, SSIM_SIGMA, SSIM_WINDOW};
pub use wilcoxon::{significance_stars, wilcoxon_signed_rank, EXACT_MAX_N, MIN_SAMPLES};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::hulls::{concave_hull, rasterize, Alpha};
use crate::scalar::Real;

fn check_non_empty<T>(p: &[Point2<T>], q: &[Point2<T>]) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyInput("point metrics need two non-empty sets".into()));
    }
    Ok(())
}

/// `min_j d(p_i, q_j)` for every `p_i`.
fn nearest_distances<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> Vec<T> {
    p.iter()
        .map(|a| q.iter().map(|b| a.distance(b)).fold(T::infinity(), T::min))
        .collect()
}

/// Symmetric Hausdorff distance.
pub fn hausdorff<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> Result<T> {
    check_non_empty(p, q)?;
    let fwd = nearest_distances(p, q).into_iter().fold(T::zero(), T::max);
    let bwd = nearest_distances(q, p).into_iter().fold(T::zero(), T::max);
    Ok(fwd.max(bwd))
}

/// Mean over `p` of the distance to the nearest point of `q`.
pub fn directed_avg_min_euclidean<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> Result<T> {
    check_non_empty(p, q)?;
    Ok(nearest_distances(p, q).into_iter().sum::<T>() / T::from_usize_lossy(p.len()))
}

/// Mean of the two directed average nearest-point distances.
pub fn avg_min_euclidean<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> Result<T> {
    let fwd = directed_avg_min_euclidean(p, q)?;
    let bwd = directed_avg_min_euclidean(q, p)?;
    Ok((fwd + bwd) / T::lit(2.0))
}

/// Dice coefficient of the rasterized concave hulls of both sets.
pub fn polygon_dsc<T: Real>(p: &[Point2<T>], q: &[Point2<T>], w: usize, h: usize) -> Result<T> {
    polygon_dsc_with_alpha(p, q, w, h, Alpha::Auto)
}

pub fn polygon_dsc_with_alpha<T: Real>(p: &[Point2<T>], q: &[Point2<T>], w: usize, h: usize, alpha: Alpha) -> Result<T> {
    let a = rasterize(&concave_hull(p, alpha)?, w, h);
    let b = rasterize(&concave_hull(q, alpha)?, w, h);
    let total = a.count() + b.count();
    if total == 0 {
        return Err(Error::EmptyRaster);
    }
    Ok(T::from_usize_lossy(2 * a.intersection_count(&b)) / T::from_usize_lossy(total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2<f64>> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn hand_computed_pair() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0)]);
        let q = pts(&[(0.0, 0.0), (3.0, 0.0)]);
        assert_eq!(hausdorff(&p, &q).unwrap(), 2.0);
        assert_eq!(avg_min_euclidean(&p, &q).unwrap(), 0.75);
        assert_eq!(directed_avg_min_euclidean(&p, &q).unwrap(), 0.5);
        assert_eq!(directed_avg_min_euclidean(&q, &p).unwrap(), 1.0);
        assert_eq!(hausdorff(&p, &p).unwrap(), 0.0);
        assert!(matches!(hausdorff(&p, &[]), Err(Error::EmptyInput(_))));
    }

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point2<f64>> {
        pts(&[(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)])
    }

    #[test]
    fn dsc_examples() {
        let a = square(50.0, 50.0, 100.0);
        assert_eq!(polygon_dsc(&a, &a, 300, 300).unwrap(), 1.0);
        assert_eq!(polygon_dsc(&a, &square(150.0, 50.0, 100.0), 300, 300).unwrap(), 0.0);
        let half = polygon_dsc(&a, &square(100.0, 50.0, 100.0), 300, 300).unwrap();
        assert!((half - 0.5).abs() <= 0.02);
        let off = square(500.0, 500.0, 10.0);
        assert!(matches!(polygon_dsc(&off, &off, 100, 100), Err(Error::EmptyRaster)));
    }
}
