//! Annotated anatomical structures and their per-structure point counts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{centroid, Point2};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Structure {
    Skull,
    Thalami,
    Cerebellum,
    Cavum,
    Sylvius,
    Midline,
}

impl Structure {
    pub const ALL: [Structure; 6] = [
        Structure::Skull,
        Structure::Thalami,
        Structure::Cerebellum,
        Structure::Cavum,
        Structure::Sylvius,
        Structure::Midline,
    ];

    /// Structures enclosed by the skull.
    pub const INTERIOR: [Structure; 4] = [
        Structure::Thalami,
        Structure::Cerebellum,
        Structure::Cavum,
        Structure::Sylvius,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Skull => "skull",
            Structure::Thalami => "thalami",
            Structure::Cerebellum => "cerebellum",
            Structure::Cavum => "cavum",
            Structure::Sylvius => "sylvius",
            Structure::Midline => "midline",
        }
    }

    /// Number of annotated landmarks.
    pub fn expected_points(self) -> usize {
        match self {
            Structure::Skull => 4,
            Structure::Thalami => 3,
            Structure::Cerebellum => 8,
            Structure::Cavum => 4,
            Structure::Sylvius => 3,
            Structure::Midline => 2,
        }
    }

    /// Whether the structure spans an area (more than two landmarks).
    pub fn has_area(self) -> bool {
        self.expected_points() > 2
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::SchemaViolation(format!("unknown structure `{s}`")))
    }
}

/// Per-structure ordered landmark lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet<T> {
    points: BTreeMap<Structure, Vec<Point2<T>>>,
}

impl<T: Real> LandmarkSet<T> {
    pub fn new() -> Self {
        LandmarkSet {
            points: BTreeMap::new(),
        }
    }

    /// Inserts a structure, enforcing its landmark count.
    pub fn insert(&mut self, structure: Structure, pts: Vec<Point2<T>>) -> Result<()> {
        if pts.len() != structure.expected_points() {
            return Err(Error::SchemaViolation(format!(
                "structure `{structure}` has {} landmarks, expected {}",
                pts.len(),
                structure.expected_points()
            )));
        }
        self.points.insert(structure, pts);
        Ok(())
    }

    pub fn get(&self, structure: Structure) -> Option<&[Point2<T>]> {
        self.points.get(&structure).map(Vec::as_slice)
    }

    pub fn require(&self, structure: Structure) -> Result<&[Point2<T>]> {
        self.get(structure)
            .ok_or_else(|| Error::MissingStructure(structure.name().to_string()))
    }

    pub fn centroid(&self, structure: Structure) -> Result<Point2<T>> {
        centroid(self.require(structure)?).ok_or_else(|| Error::MissingStructure(structure.name().into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Structure, &[Point2<T>])> {
        self.points.iter().map(|(s, p)| (*s, p.as_slice()))
    }

    pub fn structures(&self) -> impl Iterator<Item = Structure> + '_ {
        self.points.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies `f` to every landmark.
    pub fn map_points(&self, mut f: impl FnMut(Point2<T>) -> Point2<T>) -> Self {
        LandmarkSet {
            points: self
                .points
                .iter()
                .map(|(s, pts)| (*s, pts.iter().map(|&p| f(p)).collect()))
                .collect(),
        }
    }

    /// Checks counts and that every point lies in `[0, w) × [0, h)`.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let (w, h) = (T::from_usize_lossy(width), T::from_usize_lossy(height));
        for (s, pts) in self.iter() {
            if pts.len() != s.expected_points() {
                return Err(Error::SchemaViolation(format!(
                    "structure `{s}` has {} landmarks, expected {}",
                    pts.len(),
                    s.expected_points()
                )));
            }
            for (i, p) in pts.iter().enumerate() {
                let inside = p.is_finite() && p.x >= T::zero() && p.y >= T::zero() && p.x < w && p.y < h;
                if !inside {
                    return Err(Error::SchemaViolation(format!(
                        "structure `{s}` point {i} at ({}, {}) is outside the {width}x{height} image",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_counts() {
        let counts: Vec<usize> = Structure::ALL.iter().map(|s| s.expected_points()).collect();
        assert_eq!(counts, vec![4, 3, 8, 4, 3, 2]);
        assert!(!Structure::Midline.has_area());
        assert_eq!("Cerebellum".parse::<Structure>().unwrap(), Structure::Cerebellum);
        assert!("brainstem".parse::<Structure>().is_err());
    }

    #[test]
    fn insert_enforces_count_and_bounds() {
        let mut lm = LandmarkSet::<f64>::new();
        let seven = vec![Point2::new(1.0, 1.0); 7];
        let err = lm.insert(Structure::Cerebellum, seven).unwrap_err().to_string();
        assert!(err.contains("cerebellum") && err.contains("expected 8"));
        lm.insert(Structure::Midline, vec![Point2::new(0.0, 0.0), Point2::new(10.0, 5.0)])
            .unwrap();
        assert!(lm.validate(11, 6).is_ok());
        assert!(lm.validate(10, 6).is_err());
    }
}
