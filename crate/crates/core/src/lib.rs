//! Skull-ellipse normalization and affine registration of 2D fetal head
//! ultrasound images, with concave-hull probability maps and the metric
//! suite used to compare registration strategies.
//!
//! Geometry, transforms, registration, hulls and point metrics are generic
//! over the scalar type ([`scalar::Real`], implemented for `f32` and `f64`).
//! File I/O, phantoms and statistics work in `f64`. The aliases below fix the
//! scalar for the common cases.

pub mod config;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod hulls;
pub mod landmarks;
pub mod metrics;
pub mod phantom;
pub mod registration;
pub mod scalar;
pub mod segmentation;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Point = geometry::Point2<f64>;
pub type Ellipse = geometry::EllipseParams<f64>;
pub type Coeffs = geometry::EllipseCoeffs<f64>;
pub type Affine = transform::Affine2D<f64>;
pub type Image = transform::GrayImage<f64>;
pub type Landmarks = landmarks::LandmarkSet<f64>;
pub type Subject = dataset::SubjectRecord<f64>;
pub type Polygon = hulls::Polygon2D<f64>;
pub type Registration = registration::RegistrationResult<f64>;

pub type Point32 = geometry::Point2<f32>;
pub type Ellipse32 = geometry::EllipseParams<f32>;
pub type Affine32 = transform::Affine2D<f32>;
pub type Image32 = transform::GrayImage<f32>;
pub type Landmarks32 = landmarks::LandmarkSet<f32>;
pub type Subject32 = dataset::SubjectRecord<f32>;
pub type Polygon32 = hulls::Polygon2D<f32>;
