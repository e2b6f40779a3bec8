//! Skull masks: file ingestion, a classical fallback extractor, and
//! conversion to the point cloud consumed by the ellipse fitter.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point2, PointSet2D};
use crate::registration::zscore;
use crate::scalar::Real;
use crate::transform::GrayImage;

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected_w: width,
                expected_h: height,
                got_w: data.len(),
                got_h: 1,
            });
        }
        Ok(BinaryMask { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> usize {
        self.data.iter().zip(&other.data).filter(|(a, b)| **a && **b).count()
    }

    fn neighbourhood_any(&self, x: usize, y: usize) -> bool {
        let (x0, x1) = (x.saturating_sub(1), (x + 1).min(self.width - 1));
        let (y0, y1) = (y.saturating_sub(1), (y + 1).min(self.height - 1));
        (y0..=y1).any(|yy| (x0..=x1).any(|xx| self.get(xx, yy)))
    }

    fn neighbourhood_all(&self, x: usize, y: usize) -> bool {
        // Pixels beyond the border count as background.
        if x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height {
            return false;
        }
        (y - 1..=y + 1).all(|yy| (x - 1..=x + 1).all(|xx| self.get(xx, yy)))
    }

    /// 3×3 binary dilation.
    pub fn dilate(&self) -> Self {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.neighbourhood_any(x, y))
    }

    /// 3×3 binary erosion.
    pub fn erode(&self) -> Self {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.neighbourhood_all(x, y))
    }

    pub fn close(&self, iterations: usize) -> Self {
        let mut m = self.clone();
        for _ in 0..iterations {
            m = m.dilate();
        }
        for _ in 0..iterations {
            m = m.erode();
        }
        m
    }

    pub fn open(&self, iterations: usize) -> Self {
        let mut m = self.clone();
        for _ in 0..iterations {
            m = m.erode();
        }
        for _ in 0..iterations {
            m = m.dilate();
        }
        m
    }

    /// 8-connected components, each as a list of linear indices, in
    /// row-major order of their first pixel.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![false; self.data.len()];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.data.len() {
            if !self.data[start] || label[start] {
                continue;
            }
            let mut comp = Vec::new();
            label[start] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                comp.push(i);
                let (x, y) = (i % self.width, i / self.width);
                for yy in y.saturating_sub(1)..=(y + 1).min(self.height - 1) {
                    for xx in x.saturating_sub(1)..=(x + 1).min(self.width - 1) {
                        let j = yy * self.width + xx;
                        if self.data[j] && !label[j] {
                            label[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Keeps only the largest 8-connected component (first one on ties).
    pub fn largest_component(&self) -> Self {
        let mut best: Option<Vec<usize>> = None;
        for comp in self.components() {
            if best.as_ref().map_or(true, |b| comp.len() > b.len()) {
                best = Some(comp);
            }
        }
        let mut out = BinaryMask::empty(self.width, self.height);
        for i in best.unwrap_or_default() {
            out.data[i] = true;
        }
        out
    }

    /// Writes the mask as an 8-bit image (0 / 255); format from the extension.
    pub fn save(&self, path: &Path) -> Result<()> {
        let buf: Vec<u8> = self.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions");
        img.save(path).map_err(|e| crate::dataset::image_error(path, e))
    }
}

/// Reads an 8-bit mask file; pixels above 127 are set.
pub fn load_mask(path: &Path, expected_w: usize, expected_h: usize) -> Result<BinaryMask> {
    let img = image::open(path).map_err(|e| crate::dataset::image_error(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if (w, h) != (expected_w, expected_h) {
        return Err(Error::DimensionMismatch {
            expected_w,
            expected_h,
            got_w: w,
            got_h: h,
        });
    }
    Ok(BinaryMask {
        width: w,
        height: h,
        data: img.into_raw().into_iter().map(|v| v > 127).collect(),
    })
}

/// Classical stand-in for a learned skull segmenter: z-score, keep pixels
/// above one standard deviation, close twice, open once, keep the largest
/// 8-connected component.
pub fn fallback_skull_mask<T: Real>(img: &GrayImage<T>) -> Result<BinaryMask> {
    let z = zscore(img)?;
    let raw = BinaryMask::from_fn(img.width(), img.height(), |x, y| z.get(x, y) > T::one());
    let cleaned = raw.close(2).open(1).largest_component();
    if cleaned.count() == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(cleaned)
}

/// Coordinates of all set pixels, row-major.
pub fn mask_to_points<T: Real>(mask: &BinaryMask) -> Result<PointSet2D<T>> {
    let pts: PointSet2D<T> = mask
        .data
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| {
            Point2::new(
                T::from_usize_lossy(i % mask.width),
                T::from_usize_lossy(i / mask.width),
            )
        })
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_from_masks() {
        let mut m = BinaryMask::empty(3, 3);
        m.set(1, 1, true);
        assert_eq!(mask_to_points::<f64>(&m).unwrap(), vec![Point2::new(1.0, 1.0)]);
        let full = BinaryMask::from_fn(2, 2, |_, _| true);
        let want: Vec<Point2<f64>> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        assert_eq!(mask_to_points::<f64>(&full).unwrap(), want);
        assert!(matches!(mask_to_points::<f64>(&BinaryMask::empty(2, 2)), Err(Error::EmptyMask)));
    }

    #[test]
    fn largest_component_is_kept() {
        let m = BinaryMask::from_fn(10, 5, |x, y| (x < 2 && y < 2) || (x >= 5 && y >= 1 && y <= 3));
        let big = m.largest_component();
        assert_eq!(big.count(), 15);
        assert_eq!(big.components().len(), 1);
        assert!(!big.get(0, 0));
    }

    #[test]
    fn closing_fills_single_pixel_gap() {
        let mut m = BinaryMask::from_fn(12, 7, |x, y| y == 3 && (2..10).contains(&x));
        m.set(6, 3, false);
        let closed = m.close(1);
        assert!(closed.get(6, 3));
    }

    #[test]
    fn all_zero_image_is_degenerate() {
        let img = GrayImage::<f64>::zeros(20, 20);
        assert!(matches!(fallback_skull_mask(&img), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn mask_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = BinaryMask::from_fn(31, 17, |x, y| (x * 7 + y * 3) % 5 == 0);
        m.save(&path).unwrap();
        assert_eq!(load_mask(&path, 31, 17).unwrap(), m);
        assert!(matches!(load_mask(&path, 30, 17), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(load_mask(&dir.path().join("nope.png"), 31, 17), Err(Error::Image { .. } | Error::Io { .. })));
    }
}
