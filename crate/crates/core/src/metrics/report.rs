use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{avg_min_euclidean, hausdorff, polygon_dsc_with_alpha, significance_stars, ssim, wilcoxon_signed_rank};
use crate::dataset::SubjectId;
use crate::error::{Error, Result};
use crate::hulls::Alpha;
use crate::landmarks::{LandmarkSet, Structure};
use crate::registration::RegistrationMethod;
use crate::transform::GrayImage;

/// An evaluated configuration: the unregistered moving image or one
/// registration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Original,
    Method(RegistrationMethod),
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::Original => "Original",
            Arm::Method(m) => m.label(),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Hausdorff,
    AvgMinEuclidean,
    PolygonDsc,
    Ssim,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Hausdorff, Metric::AvgMinEuclidean, Metric::PolygonDsc, Metric::Ssim];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hausdorff => "hausdorff",
            Metric::AvgMinEuclidean => "avg_min_euclidean",
            Metric::PolygonDsc => "polygon_dsc",
            Metric::Ssim => "ssim",
        }
    }
}

/// Metrics of one structure for one subject under one arm. `ssim` is the
/// whole-image value and repeats across structures.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub arm: Arm,
    pub structure: Structure,
    pub hausdorff: f64,
    pub avg_min_euclid: f64,
    pub polygon_dsc: Option<f64>,
    pub ssim: f64,
}

/// Compares moved landmarks and image against the reference. Structures
/// missing on either side are skipped; DSC is absent for structures without
/// area or when a hull cannot be formed.
pub fn evaluate_subject(
    arm: Arm,
    reference_landmarks: &LandmarkSet<f64>,
    reference_image: &GrayImage<f64>,
    moved_landmarks: &LandmarkSet<f64>,
    moved_image: &GrayImage<f64>,
    alpha: Alpha,
) -> Result<Vec<MetricReport>> {
    let s = ssim(reference_image, moved_image)?;
    let (w, h) = (reference_image.width(), reference_image.height());
    let mut out = Vec::new();
    for (structure, ref_pts) in reference_landmarks.iter() {
        let Some(moved) = moved_landmarks.get(structure) else {
            continue;
        };
        let polygon_dsc = if structure.has_area() {
            polygon_dsc_with_alpha(moved, ref_pts, w, h, alpha).ok()
        } else {
            None
        };
        out.push(MetricReport {
            arm,
            structure,
            hausdorff: hausdorff(moved, ref_pts)?,
            avg_min_euclid: avg_min_euclidean(moved, ref_pts)?,
            polygon_dsc,
            ssim: s,
        });
    }
    Ok(out)
}

/// One row of the long-format metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub subject_id: u32,
    pub scan_index: u32,
    pub method: String,
    pub structure: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    /// Flattens reports; SSIM is emitted once per arm with structure `image`.
    pub fn from_reports(id: SubjectId, reports: &[MetricReport]) -> Vec<MetricRow> {
        let row = |arm: Arm, structure: &str, metric: Metric, value: f64| MetricRow {
            subject_id: id.subject_id,
            scan_index: id.scan_index,
            method: arm.label().to_string(),
            structure: structure.to_string(),
            metric: metric.name().to_string(),
            value,
        };
        let mut rows = Vec::new();
        let mut seen_ssim: Vec<Arm> = Vec::new();
        for r in reports {
            rows.push(row(r.arm, r.structure.name(), Metric::Hausdorff, r.hausdorff));
            rows.push(row(r.arm, r.structure.name(), Metric::AvgMinEuclidean, r.avg_min_euclid));
            if let Some(d) = r.polygon_dsc {
                rows.push(row(r.arm, r.structure.name(), Metric::PolygonDsc, d));
            }
            if !seen_ssim.contains(&r.arm) {
                seen_ssim.push(r.arm);
                rows.push(row(r.arm, "image", Metric::Ssim, r.ssim));
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    pub structure: String,
    /// `None` when fewer than five non-zero paired differences exist.
    pub p_value: Option<f64>,
    pub stars: String,
}

/// Paired signed-rank tests between every pair of `arms` (in the given
/// order) for each metric and structure, pairing rows by subject.
pub fn compare_arms(rows: &[MetricRow], arms: &[Arm]) -> Vec<ComparisonRow> {
    type Key = (String, String);
    let mut by: BTreeMap<(String, Key), BTreeMap<(u32, u32), f64>> = BTreeMap::new();
    for r in rows {
        by.entry((r.method.clone(), (r.metric.clone(), r.structure.clone())))
            .or_default()
            .insert((r.subject_id, r.scan_index), r.value);
    }
    let mut keys: Vec<Key> = by.keys().map(|(_, k)| k.clone()).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::new();
    for (i, a) in arms.iter().enumerate() {
        for b in &arms[i + 1..] {
            for (metric, structure) in &keys {
                let key = (metric.clone(), structure.clone());
                let (Some(xa), Some(xb)) = (by.get(&(a.label().to_string(), key.clone())), by.get(&(b.label().to_string(), key)))
                else {
                    continue;
                };
                let (x, y): (Vec<f64>, Vec<f64>) =
                    xa.iter().filter_map(|(s, &va)| xb.get(s).map(|&vb| (va, vb))).unzip();
                let p = wilcoxon_signed_rank(&x, &y).ok();
                out.push(ComparisonRow {
                    method_a: a.label().to_string(),
                    method_b: b.label().to_string(),
                    metric: metric.clone(),
                    structure: structure.clone(),
                    p_value: p,
                    stars: p.map_or("NA", significance_stars).to_string(),
                });
            }
        }
    }
    out
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path.display().to_string(), format!("{other:?}")),
    }
}

fn write_rows<R: Serialize>(rows: &[R], header: &[&str], path: &Path) -> Result<()> {
    let csv_err = |e| csv_error(path, e);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metric_csv(rows: &[MetricRow], path: &Path) -> Result<()> {
    write_rows(rows, &["subject_id", "scan_index", "method", "structure", "metric", "value"], path)
}

pub fn write_comparison_csv(rows: &[ComparisonRow], path: &Path) -> Result<()> {
    write_rows(rows, &["method_a", "method_b", "metric", "structure", "p_value", "stars"], path)
}

fn read_rows<R: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn read_metric_csv(path: &Path) -> Result<Vec<MetricRow>> {
    read_rows(path)
}

pub fn read_comparison_csv(path: &Path) -> Result<Vec<ComparisonRow>> {
    read_rows(path)
}
