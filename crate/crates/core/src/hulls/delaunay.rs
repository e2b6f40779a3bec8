//! Delaunay triangulation for small point sets: fan-triangulate the convex
//! hull, insert the remaining points, then apply Lawson edge flips.

use std::collections::HashMap;

use super::polygon::cross;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Counter-clockwise vertex indices into the point slice.
pub type Triangle = [usize; 3];

/// Strict convex hull (collinear points dropped), counter-clockwise,
/// as indices into `pts`.
pub fn convex_hull_indices<T: Real>(pts: &[Point2<T>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (pts[i], pts[j]);
        a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap())
    });
    idx.dedup_by(|i, j| pts[*i] == pts[*j]);
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(pts[hull[hull.len() - 2]], pts[hull[hull.len() - 1]], pts[i]) <= T::zero()
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

fn in_circle<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> T {
    let (adx, ady) = (a.x - d.x, a.y - d.y);
    let (bdx, bdy) = (b.x - d.x, b.y - d.y);
    let (cdx, cdy) = (c.x - d.x, c.y - d.y);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

pub fn circumradius<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    let (ab, bc, ca) = (a.distance(&b), b.distance(&c), c.distance(&a));
    let area2 = cross(a, b, c).abs();
    if area2 == T::zero() {
        return T::infinity();
    }
    ab * bc * ca / (T::lit(2.0) * area2)
}

/// Triangulates `pts`, which must be free of duplicates. Returns
/// `DegenerateInput` when fewer than three non-collinear points exist.
pub fn delaunay<T: Real>(pts: &[Point2<T>]) -> Result<Vec<Triangle>> {
    let hull = convex_hull_indices(pts);
    if hull.len() < 3 {
        return Err(Error::DegenerateInput("points are collinear or fewer than 3".into()));
    }
    let mut tris: Vec<Triangle> = (1..hull.len() - 1).map(|k| [hull[0], hull[k], hull[k + 1]]).collect();
    let on_hull: Vec<bool> = {
        let mut v = vec![false; pts.len()];
        hull.iter().for_each(|&i| v[i] = true);
        v
    };
    for p in 0..pts.len() {
        if on_hull[p] {
            continue;
        }
        insert_point(pts, &mut tris, p);
    }
    lawson_flips(pts, &mut tris);
    Ok(tris)
}

fn insert_point<T: Real>(pts: &[Point2<T>], tris: &mut Vec<Triangle>, p: usize) {
    let q = pts[p];
    let zero = T::zero();
    // Containing triangle, or the edge(s) the point lies on.
    let mut host = None;
    for (t, tri) in tris.iter().enumerate() {
        let s = [
            cross(pts[tri[0]], pts[tri[1]], q),
            cross(pts[tri[1]], pts[tri[2]], q),
            cross(pts[tri[2]], pts[tri[0]], q),
        ];
        if s.iter().all(|&v| v >= zero) {
            host = Some((t, s));
            break;
        }
    }
    let Some((t, s)) = host else {
        // Unreachable for points inside the hull; rounding on a hull edge is
        // the only way here, and such a point is dropped.
        return;
    };
    let tri = tris[t];
    let on_edge = s.iter().position(|&v| v == zero);
    match on_edge {
        None => {
            tris[t] = [tri[0], tri[1], p];
            tris.push([tri[1], tri[2], p]);
            tris.push([tri[2], tri[0], p]);
        }
        Some(k) => {
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            tris[t] = [c, a, p];
            tris.push([b, c, p]);
            if let Some(u) = tris.iter().position(|o| has_directed_edge(o, b, a)) {
                let o = tris[u];
                let d = o.iter().copied().find(|&v| v != a && v != b).unwrap();
                tris[u] = [a, d, p];
                tris.push([d, b, p]);
            }
        }
    }
}

fn has_directed_edge(t: &Triangle, a: usize, b: usize) -> bool {
    (0..3).any(|k| t[k] == a && t[(k + 1) % 3] == b)
}

fn lawson_flips<T: Real>(pts: &[Point2<T>], tris: &mut [Triangle]) {
    let max_passes = 10 * tris.len() + 10;
    for _ in 0..max_passes {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in tris.iter().enumerate() {
            for k in 0..3 {
                owner.insert((tri[k], tri[(k + 1) % 3]), t);
            }
        }
        let mut flipped = false;
        for t in 0..tris.len() {
            for k in 0..3 {
                let tri = tris[t];
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let Some(&u) = owner.get(&(b, a)) else { continue };
                let o = tris[u];
                if !has_directed_edge(&o, b, a) {
                    continue;
                }
                let d = o.iter().copied().find(|&v| v != a && v != b).unwrap();
                if in_circle(pts[a], pts[b], pts[c], pts[d]) > T::zero() {
                    tris[t] = [c, a, d];
                    tris[u] = [d, b, c];
                    for (i, tri) in [(t, tris[t]), (u, tris[u])] {
                        for m in 0..3 {
                            owner.insert((tri[m], tri[(m + 1) % 3]), i);
                        }
                    }
                    flipped = true;
                    break;
                }
            }
        }
        if !flipped {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let pts: Vec<Point2<f64>> = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (1.0, 1.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let h = convex_hull_indices(&pts);
        assert_eq!(h, vec![0, 2, 3, 4]);
    }

    #[test]
    fn square_with_center_gives_four_triangles() {
        let pts: Vec<Point2<f64>> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let t = delaunay(&pts).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.iter().all(|tri| tri.contains(&4)));
    }

    #[test]
    fn circumradius_of_right_triangle() {
        let r = circumradius(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0), Point2::new(0.0, 3.0));
        assert!((r - 2.5f64).abs() < 1e-12);
    }
}
