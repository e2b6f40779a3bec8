//! Minimal raster figures drawn directly into RGB buffers.

use fetalign::geometry::EllipseParams;
use fetalign::transform::GrayImage;
use image::{Rgb, RgbImage};

const RED: Rgb<u8> = Rgb([230, 40, 40]);
const PALETTE: [Rgb<u8>; 5] = [
    Rgb([120, 120, 120]),
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
];

pub fn gray_to_rgb(img: &GrayImage<f64>) -> RgbImage {
    let mut out = RgbImage::new(img.width() as u32, img.height() as u32);
    for (px, v) in out.pixels_mut().zip(img.data()) {
        let g = v.round().clamp(0.0, 255.0) as u8;
        *px = Rgb([g, g, g]);
    }
    out
}

/// The image with the ellipse outline and centre marked in red.
pub fn draw_ellipse(img: &GrayImage<f64>, e: &EllipseParams<f64>) -> RgbImage {
    let mut out = gray_to_rgb(img);
    let n = (4.0 * (e.a() + e.b())).ceil().max(64.0) as usize;
    let mut pts = e.sample_boundary(n);
    pts.extend((-4..=4).flat_map(|d| {
        let c = e.center();
        [fetalign::Point::new(c.x + d as f64, c.y), fetalign::Point::new(c.x, c.y + d as f64)]
    }));
    for p in pts {
        let (x, y) = (p.x.round(), p.y.round());
        if x >= 0.0 && y >= 0.0 && (x as u32) < out.width() && (y as u32) < out.height() {
            out.put_pixel(x as u32, y as u32, RED);
        }
    }
    out
}

fn fill(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, c: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for y in y0.min(y1).max(0)..=y0.max(y1).min(h - 1) {
        for x in x0.min(x1).max(0)..=x0.max(x1).min(w - 1) {
            img.put_pixel(x as u32, y as u32, c);
        }
    }
}

/// Five-number summary with linearly interpolated quantiles.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Box-and-whisker plot, one box per group, left to right. `colour` picks
/// the palette entry of each group.
pub fn boxplot(groups: &[(usize, Vec<f64>)]) -> RgbImage {
    const SLOT: i64 = 36;
    const H: i64 = 320;
    const PAD: i64 = 20;
    let width = (groups.len() as i64 * SLOT + 2 * PAD).max(64);
    let mut img = RgbImage::from_pixel(width as u32, H as u32, Rgb([255, 255, 255]));
    let all: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).filter(|v| v.is_finite()).collect();
    if all.is_empty() {
        return img;
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y_of = |v: f64| H - PAD - (((v - lo) / span) * (H - 2 * PAD) as f64).round() as i64;
    fill(&mut img, PAD / 2, H - PAD, width - PAD / 2, H - PAD, Rgb([0, 0, 0]));
    for (k, (colour, vals)) in groups.iter().enumerate() {
        let mut v: Vec<f64> = vals.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let c = PALETTE[colour % PALETTE.len()];
        let x = PAD + k as i64 * SLOT;
        let mid = x + SLOT / 2;
        let (q1, med, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        fill(&mut img, mid, y_of(v[0]), mid, y_of(v[v.len() - 1]), Rgb([60, 60, 60]));
        fill(&mut img, x + 6, y_of(q3), x + SLOT - 6, y_of(q1), c);
        fill(&mut img, x + 4, y_of(med), x + SLOT - 4, y_of(med), Rgb([0, 0, 0]));
    }
    img
}
