//! Planar affine transforms, raster images, warping and orientation.

mod affine;
mod image;

pub use self::affine::{ellipse_to_canonical, Affine2D};
pub use self::image::{mirror_to_convention, warp_image, GrayImage};

use crate::geometry::{Point2, PointSet2D};
use crate::scalar::Real;

pub fn compose<T: Real>(f: &Affine2D<T>, g: &Affine2D<T>) -> Affine2D<T> {
    f.compose(g)
}

pub fn invert<T: Real>(f: &Affine2D<T>) -> crate::Result<Affine2D<T>> {
    f.inverse()
}

/// Maps every point through `f`, preserving order.
pub fn warp_points<T: Real>(f: &Affine2D<T>, pts: &[Point2<T>]) -> PointSet2D<T> {
    pts.iter().map(|p| f.apply(*p)).collect()
}
