//! Subject records on disk.
//!
//! A cohort directory holds, per subject `<id>` (e.g. `10`, `36.1`):
//! `<id>.png` (or `.pgm`/`.jpg`), `<id>.csv` landmarks, and optionally
//! `<id>_mask.png`. Landmark CSVs have the header `structure,point_index,x,y`
//! with 0-based point indices and pixel coordinates (origin top-left).

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::landmarks::{LandmarkSet, Structure};
use crate::registration::RegistrationResult;
use crate::scalar::Real;
use crate::segmentation::{load_mask, BinaryMask};
use crate::transform::{warp_image, warp_points, Affine2D, GrayImage};

pub const LANDMARK_HEADER: &str = "structure,point_index,x,y";
pub const DEFAULT_REFERENCE: SubjectId = SubjectId {
    subject_id: 10,
    scan_index: 0,
};

/// Subject number plus repeat-scan index: `36` is scan 0, `36.1` scan 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubjectId {
    pub subject_id: u32,
    pub scan_index: u32,
}

impl SubjectId {
    pub fn new(subject_id: u32, scan_index: u32) -> Self {
        SubjectId { subject_id, scan_index }
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scan_index == 0 {
            write!(f, "{}", self.subject_id)
        } else {
            write!(f, "{}.{}", self.subject_id, self.scan_index)
        }
    }
}

impl FromStr for SubjectId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("subject id", format!("`{s}` is not of the form <id>[.<scan>]"));
        let (id, scan) = match s.split_once('.') {
            Some((id, scan)) => (id, Some(scan)),
            None => (s, None),
        };
        let digits = |t: &str| !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit());
        if !digits(id) || scan.is_some_and(|t| !digits(t)) {
            return Err(bad());
        }
        let subject_id = id.parse().map_err(|_| bad())?;
        let scan_index = match scan {
            Some(t) => t.parse().map_err(|_| bad())?,
            None => 0,
        };
        // "36.0" would not round-trip through Display.
        if scan == Some("0") || scan.is_some_and(|t| t.starts_with('0')) {
            return Err(bad());
        }
        Ok(SubjectId { subject_id, scan_index })
    }
}

#[derive(Debug, Clone)]
pub struct SubjectRecord<T> {
    pub id: SubjectId,
    pub image: GrayImage<T>,
    pub landmarks: LandmarkSet<T>,
    pub skull_mask: Option<BinaryMask>,
}

/// Maps an image-crate failure on `path` to the crate error type.
pub fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(source) => Error::io(path, source),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

/// Output raster format for registered images and figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RasterFormat {
    #[default]
    Png,
    Jpeg,
}

impl RasterFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RasterFormat::Png => "png",
            RasterFormat::Jpeg => "jpg",
        }
    }
}

impl FromStr for RasterFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "png" => Ok(RasterFormat::Png),
            "jpeg" | "jpg" => Ok(RasterFormat::Jpeg),
            other => Err(Error::InvalidConfig(format!("unknown raster format `{other}`"))),
        }
    }
}

/// Loads any 8-bit readable raster as grayscale intensities in `[0, 255]`.
pub fn load_gray_image<T: Real>(path: &Path) -> Result<GrayImage<T>> {
    let img = image::open(path).map_err(|e| image_error(path, e))?.to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    GrayImage::new(w, h, img.into_raw().into_iter().map(|v| T::lit(v as f64)).collect())
}

/// Rounds and clamps intensities to 8 bits.
pub fn to_u8<T: Real>(img: &GrayImage<T>) -> Vec<u8> {
    img.data()
        .iter()
        .map(|v| v.as_f64().round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn save_gray_image<T: Real>(img: &GrayImage<T>, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, to_u8(img))
        .expect("buffer matches dimensions");
    buf.save(path).map_err(|e| image_error(path, e))
}

pub fn write_landmarks<T: Real>(lm: &LandmarkSet<T>, path: &Path) -> Result<()> {
    let mut out = String::from(LANDMARK_HEADER);
    out.push('\n');
    for (s, pts) in lm.iter() {
        for (i, p) in pts.iter().enumerate() {
            out.push_str(&format!("{},{},{},{}\n", s.name(), i, p.x.as_f64(), p.y.as_f64()));
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a landmark CSV, enforcing per-structure counts (not bounds).
pub fn read_landmarks<T: Real>(path: &Path) -> Result<LandmarkSet<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_landmarks(&text, &path.display().to_string())
}

pub fn parse_landmarks<T: Real>(text: &str, context: &str) -> Result<LandmarkSet<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(context, e.to_string()))?;
    let header: Vec<&str> = header.iter().collect();
    if header.join(",") != LANDMARK_HEADER {
        return Err(Error::parse(context, format!("expected header `{LANDMARK_HEADER}`")));
    }
    let mut rows: std::collections::BTreeMap<Structure, Vec<(usize, Point2<T>)>> = Default::default();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(context, e.to_string()))?;
        let at = |i: usize| rec.get(i).unwrap_or("");
        let structure: Structure = at(0).parse()?;
        let num = |i: usize| -> Result<f64> {
            at(i)
                .parse::<f64>()
                .map_err(|e| Error::parse(context, format!("row {}: `{}`: {e}", line + 2, at(i))))
        };
        let index = at(1)
            .parse::<usize>()
            .map_err(|e| Error::parse(context, format!("row {}: point_index: {e}", line + 2)))?;
        rows.entry(structure)
            .or_default()
            .push((index, Point2::new(T::lit(num(2)?), T::lit(num(3)?))));
    }
    let mut set = LandmarkSet::new();
    for (structure, mut pts) in rows {
        pts.sort_by_key(|(i, _)| *i);
        let in_order = pts.iter().enumerate().all(|(k, (i, _))| k == *i);
        if pts.len() == structure.expected_points() && !in_order {
            return Err(Error::SchemaViolation(format!(
                "structure `{structure}` point indices must be 0..{}",
                structure.expected_points()
            )));
        }
        set.insert(structure, pts.into_iter().map(|(_, p)| p).collect())?;
    }
    Ok(set)
}

/// Nine whitespace-separated decimals, row-major.
pub fn write_transform<T: Real>(t: &Affine2D<T>, path: &Path) -> Result<()> {
    let m = t.matrix();
    let text: String = m
        .iter()
        .map(|row| {
            let cells: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
            cells.join(" ") + "\n"
        })
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_transform<T: Real>(path: &Path) -> Result<Affine2D<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::parse(&ctx, format!("`{t}`: {e}"))))
        .collect::<Result<_>>()?;
    if vals.len() != 9 {
        return Err(Error::parse(&ctx, format!("expected 9 values, found {}", vals.len())));
    }
    let m: [[T; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| T::lit(vals[3 * i + j])));
    Affine2D::from_matrix(m)
}

fn subject_id_from_path(path: &Path) -> Result<SubjectId> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::parse(path.display().to_string(), "file name is not valid UTF-8"))?;
    stem.parse()
}

/// Loads an image and its landmark CSV; the subject id comes from the image
/// file stem. Landmarks must match the schema and lie inside the image.
pub fn load_subject<T: Real>(image_path: &Path, landmarks_path: &Path) -> Result<SubjectRecord<T>> {
    let id = subject_id_from_path(image_path)?;
    let image = load_gray_image(image_path)?;
    let landmarks = read_landmarks(landmarks_path)?;
    landmarks.validate(image.width(), image.height())?;
    Ok(SubjectRecord {
        id,
        image,
        landmarks,
        skull_mask: None,
    })
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "pgm", "jpg", "jpeg"];

/// Loads every `<id>.<img>` + `<id>.csv` pair in `dir`, attaching
/// `<id>_mask.png` when present. Sorted by id.
pub fn load_cohort<T: Real>(dir: &Path) -> Result<Vec<SubjectRecord<T>>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut images: Vec<(SubjectId, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        if let Ok(id) = subject_id_from_path(&path) {
            images.push((id, path));
        }
    }
    images.sort();
    images.dedup_by_key(|(id, _)| *id);
    let mut out = Vec::with_capacity(images.len());
    for (id, image_path) in images {
        let csv = dir.join(format!("{id}.csv"));
        if !csv.exists() {
            continue;
        }
        let mut rec: SubjectRecord<T> = load_subject(&image_path, &csv)?;
        let mask_path = dir.join(format!("{id}_mask.png"));
        if mask_path.exists() {
            rec.skull_mask = Some(load_mask(&mask_path, rec.image.width(), rec.image.height())?);
        }
        out.push(rec);
    }
    Ok(out)
}

/// Writes a subject and its optional mask in cohort layout.
pub fn save_subject<T: Real>(rec: &SubjectRecord<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_gray_image(&rec.image, &dir.join(format!("{}.png", rec.id)))?;
    write_landmarks(&rec.landmarks, &dir.join(format!("{}.csv", rec.id)))?;
    if let Some(mask) = &rec.skull_mask {
        mask.save(&dir.join(format!("{}_mask.png", rec.id)))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisteredPaths {
    pub image: PathBuf,
    pub landmarks: PathBuf,
    pub transform: PathBuf,
}

/// Writes `<id>_registered.<ext>`, `<id>_registered.csv` and
/// `<id>_transform.txt` into `out_dir`.
pub fn save_registered<T: Real>(
    record: &SubjectRecord<T>,
    result: &RegistrationResult<T>,
    out_dir: &Path,
    format: RasterFormat,
) -> Result<RegisteredPaths> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = RegisteredPaths {
        image: out_dir.join(format!("{}_registered.{}", record.id, format.extension())),
        landmarks: out_dir.join(format!("{}_registered.csv", record.id)),
        transform: out_dir.join(format!("{}_transform.txt", record.id)),
    };
    let warped = warp_image(&record.image, &result.transform, record.image.width(), record.image.height())?;
    save_gray_image(&warped, &paths.image)?;
    let moved = record.landmarks.map_points(|p| warp_points(&result.transform, &[p])[0]);
    write_landmarks(&moved, &paths.landmarks)?;
    write_transform(&result.transform, &paths.transform)?;
    Ok(paths)
}

pub fn select_reference<'a, T: Real>(
    cohort: &'a [SubjectRecord<T>],
    id: Option<SubjectId>,
) -> Result<&'a SubjectRecord<T>> {
    let want = id.unwrap_or(DEFAULT_REFERENCE);
    cohort
        .iter()
        .find(|r| r.id == want)
        .ok_or_else(|| Error::ReferenceNotFound(want.to_string()))
}

/// Appends a line to a text file, creating it if needed.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}
