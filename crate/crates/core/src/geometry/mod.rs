//! Ellipse algebra and least-squares ellipse fitting.
//!
//! An ellipse is carried in two forms: the geometric [`EllipseParams`]
//! (semi-axes, centre, orientation) and the general conic [`EllipseCoeffs`]
//! `A X² + B XY + C Y² + D X + E Y + F = 0`, scaled so that
//! `f(X, Y) = a²b² (x_c²/a² + y_c²/b² − 1)` in the ellipse's canonical frame.

mod fit;
mod linalg;

pub use fit::{fit_ellipse, moment_init, robust_fit_ellipse, EllipseFit, RobustFitReport};
pub(crate) use linalg::solve_dense;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A 2D point in pixel coordinates (x to the right, y down).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn distance(&self, other: &Point2<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(&self) -> Point2<U> {
        Point2::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

/// Ordered list of points, e.g. the pixel coordinates of a skull mask.
pub type PointSet2D<T> = Vec<Point2<T>>;

/// Mean of a non-empty point list.
pub fn centroid<T: Real>(pts: &[Point2<T>]) -> Option<Point2<T>> {
    if pts.is_empty() {
        return None;
    }
    let n = T::from_usize_lossy(pts.len());
    let sx: T = pts.iter().map(|p| p.x).sum();
    let sy: T = pts.iter().map(|p| p.y).sum();
    Some(Point2::new(sx / n, sy / n))
}

/// Geometric ellipse parameters.
///
/// Always canonical: `a >= b > 0` and `theta` in `[-π/2, π/2)`. Near-circles
/// (`|a - b| <= 1e-6 a`) report `theta = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams<T> {
    a: T,
    b: T,
    x0: T,
    y0: T,
    theta: T,
}

impl<T: Real> EllipseParams<T> {
    pub fn new(a: T, b: T, x0: T, y0: T, theta: T) -> Result<Self> {
        let all_finite = [a, b, x0, y0, theta].iter().all(|v| v.is_finite());
        if !all_finite || a <= T::zero() || b <= T::zero() {
            return Err(Error::DegenerateInput(format!(
                "invalid ellipse parameters a={a}, b={b}, x0={x0}, y0={y0}, theta={theta}"
            )));
        }
        Ok(Self::canonical(a, b, x0, y0, theta))
    }

    fn canonical(a: T, b: T, x0: T, y0: T, theta: T) -> Self {
        let (a, b, theta) = if a < b {
            (b, a, theta + T::FRAC_PI_2())
        } else {
            (a, b, theta)
        };
        let theta = if (a - b).abs() <= T::lit(1e-6) * a {
            T::zero()
        } else {
            normalize_half_turn(theta)
        };
        EllipseParams { a, b, x0, y0, theta }
    }

    pub fn a(&self) -> T {
        self.a
    }
    pub fn b(&self) -> T {
        self.b
    }
    pub fn x0(&self) -> T {
        self.x0
    }
    pub fn y0(&self) -> T {
        self.y0
    }
    pub fn theta(&self) -> T {
        self.theta
    }
    pub fn center(&self) -> Point2<T> {
        Point2::new(self.x0, self.y0)
    }

    /// General-conic coefficients `A..F`.
    pub fn to_coeffs(&self) -> EllipseCoeffs<T> {
        let (s, c) = self.theta.sin_cos();
        let a2 = self.a * self.a;
        let b2 = self.b * self.b;
        let two = T::lit(2.0);
        let ca = a2 * s * s + b2 * c * c;
        let cb = two * (b2 - a2) * s * c;
        let cc = a2 * c * c + b2 * s * s;
        let (x0, y0) = (self.x0, self.y0);
        EllipseCoeffs {
            a: ca,
            b: cb,
            c: cc,
            d: -two * ca * x0 - cb * y0,
            e: -cb * x0 - two * cc * y0,
            f: ca * x0 * x0 + cb * x0 * y0 + cc * y0 * y0 - a2 * b2,
        }
    }

    /// Maps a pixel point into the ellipse frame: translate by `(-x0, -y0)`,
    /// then rotate by `-theta`.
    pub fn to_canonical(&self, x: T, y: T) -> (T, T) {
        let (s, c) = self.theta.sin_cos();
        let dx = x - self.x0;
        let dy = y - self.y0;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Inverse of [`to_canonical`](Self::to_canonical).
    pub fn from_canonical(&self, xc: T, yc: T) -> Point2<T> {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x0 + xc * c - yc * s, self.y0 + xc * s + yc * c)
    }

    /// `x_c²/a² + y_c²/b² − 1`, equal to `f(X, Y) / (a²b²)`.
    pub fn normalized_residual(&self, x: T, y: T) -> T {
        let (xc, yc) = self.to_canonical(x, y);
        xc * xc / (self.a * self.a) + yc * yc / (self.b * self.b) - T::one()
    }

    /// `n` boundary points at uniformly spaced parametric angles, starting on
    /// the positive major axis.
    pub fn sample_boundary(&self, n: usize) -> PointSet2D<T> {
        let step = T::TAU() / T::from_usize_lossy(n.max(1));
        (0..n)
            .map(|k| {
                let t = step * T::from_usize_lossy(k);
                self.from_canonical(self.a * t.cos(), self.b * t.sin())
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> EllipseParams<U> {
        EllipseParams::canonical(
            U::lit(self.a.as_f64()),
            U::lit(self.b.as_f64()),
            U::lit(self.x0.as_f64()),
            U::lit(self.y0.as_f64()),
            U::lit(self.theta.as_f64()),
        )
    }
}

/// Wraps an angle into `[-π/2, π/2)`.
pub(crate) fn normalize_half_turn<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let shifted = theta + T::FRAC_PI_2();
    let wrapped = shifted - pi * (shifted / pi).floor();
    let out = wrapped - T::FRAC_PI_2();
    if out >= T::FRAC_PI_2() {
        out - pi
    } else {
        out
    }
}

/// Coefficients of `A X² + B XY + C Y² + D X + E Y + F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseCoeffs<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
}

impl<T: Real> EllipseCoeffs<T> {
    /// `B² − 4AC`; negative for an ellipse.
    pub fn discriminant(&self) -> T {
        self.b * self.b - T::lit(4.0) * self.a * self.c
    }

    pub fn is_ellipse(&self) -> bool {
        self.discriminant() < T::zero()
    }

    /// Evaluates the conic: negative strictly inside, zero on the curve,
    /// positive outside.
    pub fn eval(&self, x: T, y: T) -> T {
        self.a * x * x + self.b * x * y + self.c * y * y + self.d * x + self.e * y + self.f
    }
}

pub fn params_to_coeffs<T: Real>(p: &EllipseParams<T>) -> EllipseCoeffs<T> {
    p.to_coeffs()
}

pub fn eval_conic<T: Real>(c: &EllipseCoeffs<T>, x: T, y: T) -> T {
    c.eval(x, y)
}

pub fn to_canonical<T: Real>(p: &EllipseParams<T>, x: T, y: T) -> (T, T) {
    p.to_canonical(x, y)
}

pub fn sample_boundary<T: Real>(p: &EllipseParams<T>, n: usize) -> PointSet2D<T> {
    p.sample_boundary(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn ep(a: f64, b: f64, x0: f64, y0: f64, t: f64) -> EllipseParams<f64> {
        EllipseParams::new(a, b, x0, y0, t).unwrap()
    }

    fn assert_coeffs(c: EllipseCoeffs<f64>, want: [f64; 6]) {
        let got = [c.a, c.b, c.c, c.d, c.e, c.f];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn coefficient_examples() {
        assert_coeffs(ep(2.0, 1.0, 0.0, 0.0, 0.0).to_coeffs(), [1.0, 0.0, 4.0, 0.0, 0.0, -4.0]);
        assert_coeffs(ep(1.0, 1.0, 1.0, 2.0, 0.0).to_coeffs(), [1.0, 0.0, 1.0, -2.0, -4.0, 4.0]);
        // pi/2 normalizes to -pi/2, which has the same conic
        assert_coeffs(ep(2.0, 1.0, 0.0, 0.0, FRAC_PI_2).to_coeffs(), [4.0, 0.0, 1.0, 0.0, 0.0, -4.0]);
    }

    #[test]
    fn conic_sign() {
        let c = ep(2.0, 1.0, 0.0, 0.0, 0.0).to_coeffs();
        assert_eq!(c.eval(2.0, 0.0), 0.0);
        assert_eq!(c.eval(0.0, 0.0), -4.0);
        assert_eq!(c.eval(3.0, 0.0), 5.0);
        assert!(c.is_ellipse());
    }

    #[test]
    fn canonical_frame_examples() {
        let (x, y) = ep(2.0, 1.0, 5.0, 5.0, 0.0).to_canonical(7.0, 5.0);
        assert!((x - 2.0).abs() < 1e-12 && y.abs() < 1e-12);
        let (x, y) = ep(2.0, 1.0, 0.0, 0.0, FRAC_PI_2).to_canonical(0.0, 2.0);
        assert!((x.abs() - 2.0).abs() < 1e-12 && y.abs() < 1e-12);
        let (x, y) = ep(3.0, 1.0, 1.0, 1.0, FRAC_PI_4).to_canonical(1.0, 1.0);
        assert_eq!((x, y), (0.0, 0.0));
    }

    #[test]
    fn boundary_samples() {
        let pts = ep(1.0, 1.0, 0.0, 0.0, 0.0).sample_boundary(4);
        let want = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
        for (p, w) in pts.iter().zip(want) {
            assert!((p.x - w.0).abs() < 1e-12 && (p.y - w.1).abs() < 1e-12);
        }
        let pts = ep(2.0, 1.0, 0.0, 0.0, 0.0).sample_boundary(2);
        assert!((pts[0].x - 2.0).abs() < 1e-12 && (pts[1].x + 2.0).abs() < 1e-12);

        let p = ep(150.0, 100.0, 400.0, 270.0, 0.3);
        let c = p.to_coeffs();
        for q in p.sample_boundary(200) {
            assert!(c.eval(q.x, q.y).abs() / (150.0f64.powi(2) * 100.0f64.powi(2)) < 1e-9);
        }
    }

    #[test]
    fn canonicalization_swaps_axes_and_wraps_angle() {
        let p = ep(1.0, 2.0, 0.0, 0.0, 0.0);
        assert_eq!((p.a(), p.b()), (2.0, 1.0));
        assert!((p.theta() + FRAC_PI_2).abs() < 1e-12);
        let p = ep(3.0, 2.0, 0.0, 0.0, 3.0 * PI + 0.2);
        assert!((p.theta() - 0.2).abs() < 1e-9);
        let p = ep(5.0, 5.0, 0.0, 0.0, 1.0);
        assert_eq!(p.theta(), 0.0);
        assert!(EllipseParams::new(0.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(EllipseParams::new(1.0, f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let p = EllipseParams::<f32>::new(2.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(p.to_coeffs().eval(3.0, 0.0), 5.0);
    }
}
