use crate::error::{Error, Result};
use crate::geometry::{EllipseParams, Point2};
use crate::scalar::Real;

/// Homogeneous 3×3 planar affine transform with last row `(0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2D<T> {
    m: [[T; 3]; 3],
}

impl<T: Real> Affine2D<T> {
    /// Builds a transform from the top two rows `[[a, b, tx], [c, d, ty]]`.
    pub fn from_rows(rows: [[T; 3]; 2]) -> Result<Self> {
        let t = Affine2D {
            m: [rows[0], rows[1], [T::zero(), T::zero(), T::one()]],
        };
        let det = t.det();
        if !det.is_finite() || det.abs() <= T::lit(1e-12) || rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Singular { det: det.as_f64() });
        }
        Ok(t)
    }

    /// Builds from a full matrix; the last row must be exactly `(0, 0, 1)`.
    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self> {
        if m[2] != [T::zero(), T::zero(), T::one()] {
            return Err(Error::parse("affine matrix", "last row must be 0 0 1"));
        }
        Self::from_rows([m[0], m[1]])
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Affine2D {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn translation(tx: T, ty: T) -> Self {
        let mut t = Self::identity();
        t.m[0][2] = tx;
        t.m[1][2] = ty;
        t
    }

    pub fn scaling(sx: T, sy: T) -> Self {
        let mut t = Self::identity();
        t.m[0][0] = sx;
        t.m[1][1] = sy;
        t
    }

    /// Counter-clockwise rotation in the usual x-right/y-down pixel frame
    /// sense: `(x, y) -> (x cos − y sin, x sin + y cos)`.
    pub fn rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let mut t = Self::identity();
        t.m[0][0] = c;
        t.m[0][1] = -s;
        t.m[1][0] = s;
        t.m[1][1] = c;
        t
    }

    /// Rotation and isotropic scale about `center`, followed by a translation.
    pub fn similarity_about(center: Point2<T>, angle: T, scale: T, tx: T, ty: T) -> Self {
        Self::translation(center.x + tx, center.y + ty)
            .compose(&Self::rotation(angle))
            .compose(&Self::scaling(scale, scale))
            .compose(&Self::translation(-center.x, -center.y))
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        self.m
    }

    /// The six free entries `[a, b, tx, c, d, ty]`.
    pub fn params(&self) -> [T; 6] {
        [self.m[0][0], self.m[0][1], self.m[0][2], self.m[1][0], self.m[1][1], self.m[1][2]]
    }

    pub fn from_params(p: [T; 6]) -> Result<Self> {
        Self::from_rows([[p[0], p[1], p[2]], [p[3], p[4], p[5]]])
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let m = &self.m;
        Point2::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2],
            m[1][0] * p.x + m[1][1] * p.y + m[1][2],
        )
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Affine2D<T>) -> Affine2D<T> {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        m[2] = [T::zero(), T::zero(), T::one()];
        Affine2D { m }
    }

    pub fn inverse(&self) -> Result<Affine2D<T>> {
        let det = self.det();
        if !det.is_finite() || det.abs() <= T::lit(1e-12) {
            return Err(Error::Singular { det: det.as_f64() });
        }
        let m = &self.m;
        let a = m[1][1] / det;
        let b = -m[0][1] / det;
        let c = -m[1][0] / det;
        let d = m[0][0] / det;
        let tx = -(a * m[0][2] + b * m[1][2]);
        let ty = -(c * m[0][2] + d * m[1][2]);
        Ok(Affine2D {
            m: [[a, b, tx], [c, d, ty], [T::zero(), T::zero(), T::one()]],
        })
    }

    pub fn max_abs_diff(&self, other: &Affine2D<T>) -> T {
        self.m
            .iter()
            .flatten()
            .zip(other.m.iter().flatten())
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    pub fn cast<U: Real>(&self) -> Affine2D<U> {
        Affine2D {
            m: self.m.map(|row| row.map(|v| U::lit(v.as_f64()))),
        }
    }
}

impl<T: Real> Default for Affine2D<T> {
    fn default() -> Self {
        Self::identity()
    }
}

/// Centering transform for a fitted skull ellipse.
///
/// Translates the ellipse centre to the origin, rotates the major axis onto
/// the x axis, scales the semi-axes to `w/2` and `h/2`, and translates the
/// result to the frame centre `(w/2, h/2)`. The ellipse lands on the
/// axis-aligned ellipse inscribed in the `w × h` frame.
pub fn ellipse_to_canonical<T: Real>(p: &EllipseParams<T>, w: T, h: T) -> Affine2D<T> {
    let two = T::lit(2.0);
    let (s, c) = p.theta().sin_cos();
    let sx = w / (two * p.a());
    let sy = h / (two * p.b());
    let scale_rotate = Affine2D {
        m: [
            [sx * c, sx * s, w / two],
            [-sy * s, sy * c, h / two],
            [T::zero(), T::zero(), T::one()],
        ],
    };
    scale_rotate.compose(&Affine2D::translation(-p.x0(), -p.y0()))
}
