//! Concave hulls (alpha shapes), polygon rasterization and per-structure
//! probability maps.

mod delaunay;
mod maps;
mod polygon;
mod raster;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use delaunay::{circumradius, convex_hull_indices, delaunay, Triangle};
pub use maps::{average_masks, build_structure_map, ProbabilityMap, StructureMap};
pub use polygon::Polygon2D;
pub use raster::rasterize;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Alpha policy for [`concave_hull`]. Triangles whose circumradius exceeds
/// `1/alpha` are discarded; `Fixed(0)` keeps all of them (convex hull).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Alpha {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Auto => f.write_str("auto"),
            Alpha::Fixed(a) => write!(f, "{a}"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(Alpha::Auto);
        }
        match t.parse::<f64>() {
            Ok(a) if a.is_finite() && a >= 0.0 => Ok(Alpha::Fixed(a)),
            _ => Err(Error::InvalidConfig(format!("alpha must be `auto` or a non-negative number, got `{s}`"))),
        }
    }
}

struct AlphaComplex<T> {
    pts: Vec<Point2<T>>,
    tris: Vec<Triangle>,
    radii: Vec<T>,
}

impl<T: Real> AlphaComplex<T> {
    fn new(input: &[Point2<T>]) -> Result<Self> {
        if input.len() < 3 {
            return Err(Error::DegenerateInput(format!("need at least 3 points, got {}", input.len())));
        }
        if input.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegenerateInput("non-finite point".into()));
        }
        let mut pts: Vec<Point2<T>> = Vec::with_capacity(input.len());
        for p in input {
            if !pts.contains(p) {
                pts.push(*p);
            }
        }
        let tris = delaunay(&pts)?;
        let radii = tris.iter().map(|t| circumradius(pts[t[0]], pts[t[1]], pts[t[2]])).collect();
        Ok(AlphaComplex { pts, tris, radii })
    }

    /// Boundary ring of the triangles with circumradius ≤ `r`, if they form
    /// one simple polygon touching every point.
    fn boundary(&self, r: T) -> Option<Vec<usize>> {
        let kept: Vec<&Triangle> = self.tris.iter().zip(&self.radii).filter(|(_, &rad)| rad <= r).map(|(t, _)| t).collect();
        if kept.is_empty() {
            return None;
        }
        let mut used = vec![false; self.pts.len()];
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &kept {
            for k in 0..3 {
                used[t[k]] = true;
                *edges.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        if used.iter().any(|u| !u) {
            return None;
        }
        let mut next: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in edges.keys() {
            if !edges.contains_key(&(b, a)) && next.insert(a, b).is_some() {
                return None;
            }
        }
        let start = *next.keys().min()?;
        let mut ring = vec![start];
        let mut cur = next[&start];
        while cur != start {
            if ring.len() > next.len() {
                return None;
            }
            ring.push(cur);
            cur = *next.get(&cur)?;
        }
        (ring.len() == next.len()).then_some(ring)
    }

    fn polygon(&self, ring: &[usize]) -> Result<Polygon2D<T>> {
        Polygon2D::new(ring.iter().map(|&i| self.pts[i]).collect())
    }
}

/// Alpha-shape outline of `pts`. With [`Alpha::Auto`] the smallest
/// circumradius threshold (largest alpha) that still yields one polygon
/// covering every point is found by bisection over the sorted distinct
/// triangle circumradii.
pub fn concave_hull<T: Real>(pts: &[Point2<T>], alpha: Alpha) -> Result<Polygon2D<T>> {
    let cx = AlphaComplex::new(pts)?;
    match alpha {
        Alpha::Fixed(a) if !(a.is_finite() && a >= 0.0) => {
            Err(Error::InvalidConfig(format!("alpha must be finite and non-negative, got {a}")))
        }
        Alpha::Fixed(a) => {
            let r = if a == 0.0 { T::infinity() } else { T::lit(1.0 / a) };
            match cx.boundary(r) {
                Some(ring) => cx.polygon(&ring),
                None => Err(Error::AlphaTooLarge {
                    alpha: a,
                    reason: "the alpha shape is disconnected, has holes, or drops a point".into(),
                }),
            }
        }
        Alpha::Auto => {
            let mut radii = cx.radii.clone();
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            radii.dedup();
            let (mut lo, mut hi) = (0usize, radii.len() - 1);
            for _ in 0..32 {
                if lo >= hi {
                    break;
                }
                let mid = (lo + hi) / 2;
                if cx.boundary(radii[mid]).is_some() {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let ring = cx
                .boundary(radii[hi])
                .or_else(|| cx.boundary(*radii.last().unwrap()))
                .expect("the full triangulation covers the convex hull");
            cx.polygon(&ring)
        }
    }
}
