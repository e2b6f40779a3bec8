use super::Affine2D;
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, Structure};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Single-channel raster, row-major, pixel `(x, y)` centred on integer
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DegenerateImage(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateImage("non-finite intensity".into()));
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear sample at a real position; `None` outside `[0, w-1] × [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: T, y: T) -> Option<T> {
        let (wmax, hmax) = (
            T::from_usize_lossy(self.width.max(1) - 1),
            T::from_usize_lossy(self.height.max(1) - 1),
        );
        if !(x >= T::zero() && y >= T::zero() && x <= wmax && y <= hmax) || self.data.is_empty() {
            return None;
        }
        let xf = x.floor();
        let yf = y.floor();
        let fx = x - xf;
        let fy = y - yf;
        let x0 = xf.to_usize().unwrap_or(0);
        let y0 = yf.to_usize().unwrap_or(0);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (T::one() - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (T::one() - fx) + self.get(x1, y1) * fx;
        Some(top * (T::one() - fy) + bottom * fy)
    }

    /// Halves each dimension by 2×2 box averaging (odd trailing row/column
    /// dropped). Coarse pixel `(i, j)` sits at fine position `(2i + ½, 2j + ½)`.
    pub fn downsample2(&self) -> Self {
        let (w, h) = (self.width / 2, self.height / 2);
        let quarter = T::lit(0.25);
        GrayImage::from_fn(w.max(1), h.max(1), |x, y| {
            let (x2, y2) = ((2 * x).min(self.width - 1), (2 * y).min(self.height - 1));
            let (x3, y3) = ((x2 + 1).min(self.width - 1), (y2 + 1).min(self.height - 1));
            (self.get(x2, y2) + self.get(x3, y2) + self.get(x2, y3) + self.get(x3, y3)) * quarter
        })
    }

    pub fn flip_horizontal(&self) -> Self {
        GrayImage::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    pub fn cast<U: Real>(&self) -> GrayImage<U> {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Pull-back resampling: output pixel `(u, v)` takes the bilinear sample of
/// `img` at `f⁻¹(u, v)`, or 0 outside the source.
pub fn warp_image<T: Real>(img: &GrayImage<T>, f: &Affine2D<T>, out_w: usize, out_h: usize) -> Result<GrayImage<T>> {
    let inv = f.inverse()?;
    let m = inv.matrix();
    Ok(GrayImage::from_fn(out_w, out_h, |u, v| {
        let (u, v) = (T::from_usize_lossy(u), T::from_usize_lossy(v));
        let x = m[0][0] * u + m[0][1] * v + m[0][2];
        let y = m[1][0] * u + m[1][1] * v + m[1][2];
        img.sample(x, y).unwrap_or_else(T::zero)
    }))
}

/// Flips image and landmarks horizontally when the cavum lies to the right
/// of the cerebellum, so anterior is always on the left.
pub fn mirror_to_convention<T: Real>(
    img: &GrayImage<T>,
    lm: &LandmarkSet<T>,
) -> Result<(GrayImage<T>, LandmarkSet<T>, bool)> {
    let cavum = lm.centroid(Structure::Cavum)?;
    let cerebellum = lm.centroid(Structure::Cerebellum)?;
    if cavum.x <= cerebellum.x {
        return Ok((img.clone(), lm.clone(), false));
    }
    let last = T::from_usize_lossy(img.width() - 1);
    let flipped = lm.map_points(|p| Point2::new(last - p.x, p.y));
    Ok((img.flip_horizontal(), flipped, true))
}
