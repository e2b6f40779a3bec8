use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Simple polygon with counter-clockwise vertices; the closing edge is
/// implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D<T> {
    vertices: Vec<Point2<T>>,
}

pub(crate) fn cross<T: Real>(o: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> bool {
    cross(a, b, p) == T::zero()
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

fn segments_intersect<T: Real>(p1: Point2<T>, p2: Point2<T>, q1: Point2<T>, q2: Point2<T>) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    let zero = T::zero();
    if ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero)) && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero)) {
        return true;
    }
    on_segment(p1, q1, q2) || on_segment(p2, q1, q2) || on_segment(q1, p1, p2) || on_segment(q2, p1, p2)
}

impl<T: Real> Polygon2D<T> {
    /// Validates and orients the ring counter-clockwise.
    pub fn new(mut vertices: Vec<Point2<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateInput(format!("polygon needs 3 vertices, got {}", vertices.len())));
        }
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(Error::DegenerateInput("non-finite polygon vertex".into()));
        }
        let area = signed_area(&vertices);
        if area == T::zero() {
            return Err(Error::DegenerateInput("polygon has zero area".into()));
        }
        if area < T::zero() {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    if vertices[i] == vertices[(i + 1) % n] {
                        return Err(Error::DegenerateInput("repeated polygon vertex".into()));
                    }
                    continue;
                }
                let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
                let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(Error::DegenerateInput("polygon is self-intersecting".into()));
                }
            }
        }
        Ok(Polygon2D { vertices })
    }

    pub fn vertices(&self) -> &[Point2<T>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn on_boundary(&self, p: Point2<T>) -> bool {
        self.edges().any(|(a, b)| on_segment(p, a, b))
    }

    /// Even-odd interior test; boundary points count as outside.
    pub fn contains(&self, p: Point2<T>) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn covers(&self, p: Point2<T>) -> bool {
        self.on_boundary(p) || self.contains(p)
    }
}

pub(crate) fn signed_area<T: Real>(v: &[Point2<T>]) -> T {
    let n = v.len();
    let twice: T = (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice / T::lit(2.0)
}
