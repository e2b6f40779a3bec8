use super::Polygon2D;
use crate::scalar::Real;
use crate::segmentation::BinaryMask;

/// Even-odd fill sampled at pixel centres `(i+0.5, j+0.5)`; each pixel row
/// counts edge crossings with a half-open rule on the edge's y-extent.
pub fn rasterize<T: Real>(poly: &Polygon2D<T>, w: usize, h: usize) -> BinaryMask {
    let mut mask = BinaryMask::empty(w, h);
    let half = T::lit(0.5);
    let mut xs: Vec<T> = Vec::new();
    for j in 0..h {
        let y = T::from_usize_lossy(j) + half;
        xs.clear();
        for (a, b) in poly.edges() {
            if (a.y <= y) != (b.y <= y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            let first = (pair[0] - half).ceil().max(T::zero());
            let end = (pair[1] - half).ceil().min(T::from_usize_lossy(w));
            if end <= first {
                continue;
            }
            let (first, end) = (first.as_f64() as usize, end.as_f64() as usize);
            for i in first..end {
                mask.set(i, j, true);
            }
        }
    }
    mask
}
