//! Coarse registration strategies: ellipse normalization (E), its intensity
//! refinement (E+A), and plain intensity registration from the identity
//! (AFF) or from the reference's centering transform (AFF+I).
//!
//! Every result maps moving-image pixels into reference-image pixels.
//! Intensity refinement runs in the reference's canonical frame, where the
//! reference skull is the ellipse inscribed in the frame.

mod refine;

use std::fmt;
use std::str::FromStr;

pub use refine::{register_affine, similarity_loss, AffineRefinement, RefineConfig};

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::geometry::{robust_fit_ellipse, EllipseParams, Point2, RobustFitReport};
use crate::scalar::Real;
use crate::segmentation::{fallback_skull_mask, mask_to_points};
use crate::transform::{ellipse_to_canonical, warp_image, Affine2D, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegistrationMethod {
    /// Ellipse normalization only.
    Ellipse,
    /// Ellipse normalization refined by intensity registration.
    EllipsePlusAffine,
    /// Intensity registration from the identity.
    AffineIdentity,
    /// Intensity registration from the reference's centering transform.
    AffineReferenceEllipse,
}

impl RegistrationMethod {
    pub const ALL: [RegistrationMethod; 4] = [
        RegistrationMethod::Ellipse,
        RegistrationMethod::EllipsePlusAffine,
        RegistrationMethod::AffineReferenceEllipse,
        RegistrationMethod::AffineIdentity,
    ];

    /// Short label used in tables and file names.
    pub fn label(self) -> &'static str {
        match self {
            RegistrationMethod::Ellipse => "E",
            RegistrationMethod::EllipsePlusAffine => "E+A",
            RegistrationMethod::AffineIdentity => "AFF",
            RegistrationMethod::AffineReferenceEllipse => "AFF+I",
        }
    }

    /// File-name safe label.
    pub fn slug(self) -> &'static str {
        match self {
            RegistrationMethod::Ellipse => "ellipse",
            RegistrationMethod::EllipsePlusAffine => "ellipse_affine",
            RegistrationMethod::AffineIdentity => "affine",
            RegistrationMethod::AffineReferenceEllipse => "affine_init",
        }
    }

    pub fn is_refinement(self) -> bool {
        self != RegistrationMethod::Ellipse
    }
}

impl fmt::Display for RegistrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RegistrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        RegistrationMethod::ALL
            .into_iter()
            .find(|m| m.label().eq_ignore_ascii_case(t) || m.slug().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown registration method `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationResult<T> {
    /// Moving pixel frame → reference pixel frame.
    pub transform: Affine2D<T>,
    /// Accepted-step losses of the finest refinement level; empty for
    /// [`RegistrationMethod::Ellipse`].
    pub loss_trace: Vec<T>,
    pub method: RegistrationMethod,
    pub converged: bool,
}

/// Z-scores the non-zero pixels; zero pixels stay exactly zero.
pub fn zscore<T: Real>(img: &GrayImage<T>) -> Result<GrayImage<T>> {
    let nz: Vec<T> = img.data().iter().copied().filter(|v| *v != T::zero()).collect();
    if nz.is_empty() {
        return Err(Error::DegenerateImage("no non-zero pixel".into()));
    }
    let n = T::from_usize_lossy(nz.len());
    let mean = nz.iter().copied().sum::<T>() / n;
    let std = (nz.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n).sqrt();
    if !(std >= T::lit(1e-12)) {
        return Err(Error::DegenerateImage(format!("non-zero intensities have std {std}")));
    }
    Ok(img.map(|v| if v == T::zero() { v } else { (v - mean) / std }))
}

/// Robust ellipse fit to a subject's skull mask, falling back to the
/// classical extractor when the record carries no mask.
pub fn fit_skull<T: Real>(record: &SubjectRecord<T>) -> Result<RobustFitReport<T>> {
    let mask = match &record.skull_mask {
        Some(m) => m.clone(),
        None => fallback_skull_mask(&record.image)?,
    };
    robust_fit_ellipse(&mask_to_points::<T>(&mask)?)
}

/// `centering(ref)⁻¹ ∘ centering(moving)` from a robust fit to the moving
/// skull points.
pub fn register_ellipse<T: Real>(
    moving_mask_pts: &[Point2<T>],
    ref_params: &EllipseParams<T>,
    w: usize,
    h: usize,
) -> Result<RegistrationResult<T>> {
    let moving = robust_fit_ellipse(moving_mask_pts)?;
    let (wf, hf) = (T::from_usize_lossy(w), T::from_usize_lossy(h));
    let to_ref = ellipse_to_canonical(ref_params, wf, hf).inverse()?;
    Ok(RegistrationResult {
        transform: to_ref.compose(&ellipse_to_canonical(&moving.params, wf, hf)),
        loss_trace: Vec::new(),
        method: RegistrationMethod::Ellipse,
        converged: moving.converged,
    })
}

/// Reference-side quantities shared by every subject registered to it.
#[derive(Debug, Clone)]
pub struct ReferenceFrame<T> {
    pub ellipse: EllipseParams<T>,
    /// Reference pixels → canonical frame.
    pub centering: Affine2D<T>,
    /// Reference image resampled into the canonical frame.
    pub canonical_image: GrayImage<T>,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> ReferenceFrame<T> {
    pub fn prepare(reference: &SubjectRecord<T>) -> Result<Self> {
        let fit = fit_skull(reference)?;
        let (w, h) = (reference.image.width(), reference.image.height());
        let centering = ellipse_to_canonical(&fit.params, T::from_usize_lossy(w), T::from_usize_lossy(h));
        let canonical_image = warp_image(&reference.image, &centering, w, h)?;
        Ok(ReferenceFrame {
            ellipse: fit.params,
            centering,
            canonical_image,
            width: w,
            height: h,
        })
    }

    fn to_reference(&self, canonical: &Affine2D<T>) -> Result<Affine2D<T>> {
        Ok(self.centering.inverse()?.compose(canonical))
    }
}

/// Registers `subject` to a prepared reference with the given strategy.
pub fn run_method_prepared<T: Real>(
    method: RegistrationMethod,
    subject: &SubjectRecord<T>,
    frame: &ReferenceFrame<T>,
    cfg: &RefineConfig,
) -> Result<RegistrationResult<T>> {
    let (wf, hf) = (T::from_usize_lossy(frame.width), T::from_usize_lossy(frame.height));
    let moving_centering = || -> Result<Affine2D<T>> {
        let fit = fit_skull(subject)?;
        Ok(ellipse_to_canonical(&fit.params, wf, hf))
    };
    let init = match method {
        RegistrationMethod::Ellipse => {
            return Ok(RegistrationResult {
                transform: frame.to_reference(&moving_centering()?)?,
                loss_trace: Vec::new(),
                method,
                converged: true,
            });
        }
        RegistrationMethod::EllipsePlusAffine => moving_centering()?,
        RegistrationMethod::AffineIdentity => Affine2D::identity(),
        RegistrationMethod::AffineReferenceEllipse => frame.centering,
    };
    let refined = register_affine(&subject.image, &frame.canonical_image, &init, cfg)?;
    Ok(RegistrationResult {
        transform: frame.to_reference(&refined.transform)?,
        loss_trace: refined.loss_trace,
        method,
        converged: refined.converged,
    })
}

pub fn run_method<T: Real>(
    method: RegistrationMethod,
    subject: &SubjectRecord<T>,
    reference: &SubjectRecord<T>,
    cfg: &RefineConfig,
) -> Result<RegistrationResult<T>> {
    run_method_prepared(method, subject, &ReferenceFrame::prepare(reference)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_symmetric_triplet() {
        let img = GrayImage::new(2, 2, vec![10.0, 0.0, 20.0, 30.0]).unwrap();
        let z = zscore(&img).unwrap();
        let s = (1.5f64).sqrt();
        assert_eq!(z.get(1, 0), 0.0);
        assert!((z.get(0, 0) + s).abs() < 1e-12);
        assert!(z.get(0, 1).abs() < 1e-12);
        assert!((z.get(1, 1) - s).abs() < 1e-12);
    }

    #[test]
    fn zscore_degenerate_images() {
        assert!(matches!(zscore(&GrayImage::<f64>::zeros(3, 3)), Err(Error::DegenerateImage(_))));
        let flat = GrayImage::from_fn(3, 3, |_, _| 7.0f64);
        assert!(matches!(zscore(&flat), Err(Error::DegenerateImage(_))));
    }

    #[test]
    fn method_labels_parse() {
        for m in RegistrationMethod::ALL {
            assert_eq!(m.label().parse::<RegistrationMethod>().unwrap(), m);
            assert_eq!(m.slug().parse::<RegistrationMethod>().unwrap(), m);
        }
        assert!("rigid".parse::<RegistrationMethod>().is_err());
    }

    #[test]
    fn ellipse_self_registration_is_identity() {
        let p = EllipseParams::new(180.0, 120.0, 410.0, 260.0, 0.2).unwrap();
        let r = register_ellipse(&p.sample_boundary(300), &p, 800, 540).unwrap();
        assert!(r.transform.max_abs_diff(&Affine2D::identity()) < 1e-6);
        assert!(r.loss_trace.is_empty());
    }

    #[test]
    fn collinear_mask_is_degenerate() {
        let pts: Vec<_> = (0..20).map(|i| Point2::new(i as f64, 3.0)).collect();
        let p = EllipseParams::new(180.0, 120.0, 410.0, 260.0, 0.2).unwrap();
        assert!(matches!(register_ellipse(&pts, &p, 800, 540), Err(Error::DegenerateInput(_))));
    }
}
