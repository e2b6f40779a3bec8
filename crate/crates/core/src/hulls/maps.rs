use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::{concave_hull, rasterize, Alpha};
use crate::dataset::image_error;
use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, Structure};
use crate::scalar::Real;
use crate::segmentation::BinaryMask;
use crate::transform::GrayImage;

/// Per-pixel fraction of subjects whose hull covers the pixel. Stored as
/// integer counts so every value is exactly `k / n_subjects`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    counts: Vec<u32>,
    n_subjects: u32,
}

impl ProbabilityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_subjects(&self) -> u32 {
        self.n_subjects
    }

    pub fn count(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.count(x, y) as f64 / self.n_subjects as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.n_subjects as f64;
        self.counts.iter().map(|&k| k as f64 / n).collect()
    }

    /// Pixels covered by every subject.
    pub fn plateau(&self) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.count(x, y) == self.n_subjects)
    }

    /// `round(255 p)` per pixel.
    pub fn to_gray8(&self) -> image::GrayImage {
        let n = self.n_subjects as f64;
        let data = self.counts.iter().map(|&k| (255.0 * k as f64 / n).round() as u8).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, data).expect("buffer matches dimensions")
    }

    pub fn save_image(&self, path: &Path) -> Result<()> {
        self.to_gray8().save(path).map_err(|e| image_error(path, e))
    }

    /// One CSV row per image row; values in shortest round-trip decimal form.
    pub fn to_csv(&self) -> String {
        let n = self.n_subjects as f64;
        let mut out = String::with_capacity(self.counts.len() * 4);
        for row in self.counts.chunks(self.width) {
            for (i, &k) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}", k as f64 / n).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Heat colours blended over a grayscale background; opacity grows with
    /// probability and zero-probability pixels show the background only.
    pub fn overlay<T: Real>(&self, background: &GrayImage<T>) -> Result<image::RgbImage> {
        if (background.width(), background.height()) != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: background.width(),
                got_h: background.height(),
            });
        }
        let n = self.n_subjects as f64;
        let mut img = image::RgbImage::new(self.width as u32, self.height as u32);
        for (i, px) in img.pixels_mut().enumerate() {
            let g = background.data()[i].as_f64().clamp(0.0, 255.0);
            let p = self.counts[i] as f64 / n;
            let heat = heat_colour(p);
            let a = 0.65 * p;
            *px = image::Rgb(std::array::from_fn(|c| ((1.0 - a) * g + a * heat[c]).round() as u8));
        }
        Ok(img)
    }

    pub fn save_overlay<T: Real>(&self, background: &GrayImage<T>, path: &Path) -> Result<()> {
        self.overlay(background)?.save(path).map_err(|e| image_error(path, e))
    }
}

/// Blue → cyan → yellow → red ramp.
fn heat_colour(p: f64) -> [f64; 3] {
    const STOPS: [[f64; 3]; 4] = [[0.0, 0.0, 255.0], [0.0, 255.0, 255.0], [255.0, 255.0, 0.0], [255.0, 0.0, 0.0]];
    let s = p.clamp(0.0, 1.0) * 3.0;
    let k = (s.floor() as usize).min(2);
    let f = s - k as f64;
    std::array::from_fn(|c| STOPS[k][c] + f * (STOPS[k + 1][c] - STOPS[k][c]))
}

pub fn average_masks(masks: &[BinaryMask]) -> Result<ProbabilityMap> {
    let first = masks.first().ok_or_else(|| Error::EmptyInput("no masks to average".into()))?;
    let (w, h) = (first.width(), first.height());
    let mut counts = vec![0u32; w * h];
    for m in masks {
        if !m.same_shape(first) {
            return Err(Error::DimensionMismatch {
                expected_w: w,
                expected_h: h,
                got_w: m.width(),
                got_h: m.height(),
            });
        }
        for (c, &v) in counts.iter_mut().zip(m.data()) {
            *c += v as u32;
        }
    }
    Ok(ProbabilityMap {
        width: w,
        height: h,
        counts,
        n_subjects: masks.len() as u32,
    })
}

#[derive(Debug, Clone)]
pub struct StructureMap {
    pub structure: Structure,
    pub map: ProbabilityMap,
    /// Cohort index and reason for every subject left out of the average.
    pub skipped: Vec<(usize, String)>,
}

/// Hull, rasterize and average one structure over a registered cohort.
pub fn build_structure_map<T: Real>(
    cohort: &[LandmarkSet<T>],
    structure: Structure,
    w: usize,
    h: usize,
    alpha: Alpha,
) -> Result<StructureMap> {
    if !structure.has_area() {
        return Err(Error::UnsupportedStructure(format!(
            "{structure} has {} landmarks; maps need more than 2",
            structure.expected_points()
        )));
    }
    let rasters: Vec<Result<BinaryMask>> = cohort
        .par_iter()
        .map(|lm| {
            let pts = lm.require(structure)?;
            Ok(rasterize(&concave_hull(pts, alpha)?, w, h))
        })
        .collect();
    let mut masks = Vec::with_capacity(rasters.len());
    let mut skipped = Vec::new();
    for (i, r) in rasters.into_iter().enumerate() {
        match r {
            Ok(m) => masks.push(m),
            Err(e) => skipped.push((i, e.to_string())),
        }
    }
    if masks.is_empty() {
        return Err(Error::EmptyInput(format!("no subject produced a {structure} hull")));
    }
    Ok(StructureMap {
        structure,
        map: average_masks(&masks)?,
        skipped,
    })
}
