//! Synthetic ultrasound-like head phantoms with exact ground truth.
//!
//! A phantom is a bright elliptical ring (the skull) over a dim brain, with
//! interior structures drawn from a landmark template given in
//! skull-normalized coordinates `(u, v)`: the pixel of `(u, v)` is
//! `center + R(θ)·(a·u, b·v)`. Images are rendered procedurally through a
//! view transform, so moving subjects are re-rendered rather than resampled.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;

use crate::dataset::{SubjectId, SubjectRecord, DEFAULT_REFERENCE};
use crate::error::{Error, Result};
use crate::geometry::{EllipseParams, Point2};
use crate::landmarks::{LandmarkSet, Structure};
use crate::segmentation::BinaryMask;
use crate::transform::{Affine2D, GrayImage};

pub type StructureTemplate = BTreeMap<Structure, Vec<(f64, f64)>>;

/// Landmark template in skull-normalized coordinates. The cavum sits
/// anterior (negative `u`), the cerebellum posterior, the Sylvian fissure in
/// the lower half.
pub fn default_template() -> StructureTemplate {
    let mut t = BTreeMap::new();
    t.insert(Structure::Skull, vec![(-0.95, 0.0), (0.95, 0.0), (-0.3, -0.901), (-0.3, 0.901)]);
    t.insert(Structure::Cavum, vec![(-0.55, -0.08), (-0.3, -0.08), (-0.3, 0.08), (-0.55, 0.08)]);
    t.insert(Structure::Thalami, vec![(-0.12, 0.0), (0.12, -0.25), (0.12, 0.25)]);
    t.insert(
        Structure::Cerebellum,
        vec![
            (0.42, 0.0),
            (0.46, -0.22),
            (0.55, -0.38),
            (0.66, -0.22),
            (0.72, 0.0),
            (0.66, 0.22),
            (0.55, 0.38),
            (0.46, 0.22),
        ],
    );
    t.insert(Structure::Sylvius, vec![(-0.25, 0.55), (-0.05, 0.62), (0.15, 0.55)]);
    t.insert(Structure::Midline, vec![(-0.88, 0.0), (-0.55, 0.0)]);
    t
}

/// Attenuates ring pixels whose skull-parametric angle `atan2(v, u)` lies
/// in `[start, end]` (radians, wrapping).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowArc {
    pub start: f64,
    pub end: f64,
    /// Fraction of intensity removed, in `[0, 1]`.
    pub attenuation: f64,
}

impl ShadowArc {
    fn contains(&self, angle: f64) -> bool {
        (angle - self.start).rem_euclid(TAU) <= (self.end - self.start).rem_euclid(TAU)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub skull: EllipseParams<f64>,
    pub ring_thickness: f64,
    pub template: StructureTemplate,
    /// Rotation (radians) of the interior structures about the skull centre
    /// in normalized coordinates; skull landmarks are unaffected.
    pub interior_rotation: f64,
    /// Normalized-coordinate shift of the interior structures.
    pub interior_shift: (f64, f64),
    /// σ of the multiplicative log-normal speckle.
    pub speckle_sigma: f64,
    pub shadow_arcs: Vec<ShadowArc>,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            width: 800,
            height: 540,
            skull: EllipseParams::new(200.0, 135.0, 400.0, 270.0, 0.0).expect("valid default skull"),
            ring_thickness: 8.0,
            template: default_template(),
            interior_rotation: 0.0,
            interior_shift: (0.0, 0.0),
            speckle_sigma: 0.0,
            shadow_arcs: Vec::new(),
            seed: 0,
        }
    }
}

const BACKGROUND: f64 = 25.0;
const BRAIN: f64 = 70.0;
const RING: f64 = 210.0;
/// Width of the intensity ramp at structure edges, in scene pixels.
const EDGE_SOFTNESS: f64 = 2.0;
const MARGIN: f64 = 5.0;

/// How a structure is drawn: filled polygon or stroked polyline.
fn style(s: Structure) -> (f64, Option<f64>) {
    match s {
        Structure::Cavum => (8.0, None),
        Structure::Thalami => (135.0, None),
        Structure::Cerebellum => (165.0, None),
        Structure::Sylvius => (175.0, Some(5.0)),
        Structure::Midline => (150.0, Some(4.0)),
        Structure::Skull => (RING, None),
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: GrayImage<f64>,
    pub landmarks: LandmarkSet<f64>,
    /// Exactly the pixels rendered as skull ring.
    pub mask: BinaryMask,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("frame {}×{} is too small", self.width, self.height));
        }
        if !(self.ring_thickness > 0.0 && self.ring_thickness.is_finite()) {
            return bad(format!("ring thickness {} must be positive", self.ring_thickness));
        }
        if !(self.speckle_sigma >= 0.0 && self.speckle_sigma.is_finite()) {
            return bad(format!("speckle sigma {} must be non-negative", self.speckle_sigma));
        }
        if !(self.interior_rotation.is_finite() && self.interior_shift.0.is_finite() && self.interior_shift.1.is_finite()) {
            return bad("interior offsets must be finite".into());
        }
        if let Some(a) = self.shadow_arcs.iter().find(|a| !(0.0..=1.0).contains(&a.attenuation)) {
            return bad(format!("shadow attenuation {} outside [0, 1]", a.attenuation));
        }
        for s in Structure::ALL {
            match self.template.get(&s) {
                Some(p) if p.len() != s.expected_points() => {
                    return bad(format!("template for {s} has {} points, expected {}", p.len(), s.expected_points()))
                }
                None => return bad(format!("template lacks {s}")),
                _ => {}
            }
        }
        Ok(())
    }

    /// Template point → scene pixel, with the interior offset applied to
    /// every structure except the skull.
    fn scene_point(&self, s: Structure, (u, v): (f64, f64)) -> Point2<f64> {
        let (u, v) = if s == Structure::Skull {
            (u, v)
        } else {
            let (sn, cs) = self.interior_rotation.sin_cos();
            (cs * u - sn * v + self.interior_shift.0, sn * u + cs * v + self.interior_shift.1)
        };
        self.skull.from_canonical(self.skull.a() * u, self.skull.b() * v)
    }
}

/// Signed distance to a closed polygon (negative inside, even-odd rule).
fn polygon_signed_distance(q: Point2<f64>, poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    let mut inside = false;
    let mut d = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a.y > q.y) != (b.y > q.y) && q.x < a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y) {
            inside = !inside;
        }
        d = d.min(segment_distance(q, a, b));
    }
    if inside {
        -d
    } else {
        d
    }
}

fn segment_distance(q: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((q.x - a.x) * dx + (q.y - a.y) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    Point2::new(a.x + t * dx, a.y + t * dy).distance(&q)
}

struct Shape {
    intensity: f64,
    points: Vec<Point2<f64>>,
    stroke: Option<f64>,
    lo: Point2<f64>,
    hi: Point2<f64>,
}

impl Shape {
    /// Fractional coverage of scene point `q`.
    fn coverage(&self, q: Point2<f64>) -> f64 {
        if q.x < self.lo.x || q.y < self.lo.y || q.x > self.hi.x || q.y > self.hi.y {
            return 0.0;
        }
        let sd = match self.stroke {
            None => polygon_signed_distance(q, &self.points),
            Some(w) => {
                let d = self.points.windows(2).map(|s| segment_distance(q, s[0], s[1])).fold(f64::INFINITY, f64::min);
                d - w / 2.0
            }
        };
        (0.5 - sd / EDGE_SOFTNESS).clamp(0.0, 1.0)
    }
}

/// Renders the spec's scene as seen through `view` (scene pixels → image
/// pixels): image pixel `x` shows scene point `view⁻¹(x)`.
pub fn render_phantom(spec: &PhantomSpec, view: &Affine2D<f64>) -> Result<Phantom> {
    spec.validate()?;
    let inv = view.inverse().map_err(|e| Error::InvalidSpec(format!("view transform: {e}")))?;
    check_skull_in_frame(spec, view)?;

    let mut landmarks = LandmarkSet::new();
    let mut shapes = Vec::new();
    for (&s, template) in &spec.template {
        let scene: Vec<Point2<f64>> = template.iter().map(|&uv| spec.scene_point(s, uv)).collect();
        landmarks.insert(s, scene.iter().map(|&p| view.apply(p)).collect())?;
        if s == Structure::Skull {
            continue;
        }
        let (intensity, stroke) = style(s);
        let pad = EDGE_SOFTNESS + stroke.unwrap_or(0.0);
        let lo = Point2::new(
            scene.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - pad,
            scene.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - pad,
        );
        let hi = Point2::new(
            scene.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + pad,
            scene.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + pad,
        );
        shapes.push(Shape { intensity, points: scene, stroke, lo, hi });
    }
    landmarks
        .validate(spec.width, spec.height)
        .map_err(|e| Error::InvalidSpec(format!("landmarks leave the frame: {e}")))?;

    let (w, h) = (spec.width, spec.height);
    let sk = &spec.skull;
    let half_t = spec.ring_thickness / 2.0;
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut vals = Vec::with_capacity(w);
            let mut ring = Vec::with_capacity(w);
            for x in 0..w {
                let q = inv.apply(Point2::new(x as f64, y as f64));
                let (xc, yc) = sk.to_canonical(q.x, q.y);
                let (a2, b2) = (sk.a() * sk.a(), sk.b() * sk.b());
                let r = xc * xc / a2 + yc * yc / b2 - 1.0;
                let grad = 2.0 * ((xc / a2).powi(2) + (yc / b2).powi(2)).sqrt();
                let on_ring = grad > 0.0 && (r / grad).abs() <= half_t;
                let mut v = if r < 0.0 { BRAIN } else { BACKGROUND };
                for s in &shapes {
                    let c = s.coverage(q);
                    if c > 0.0 {
                        v += c * (s.intensity - v);
                    }
                }
                if on_ring {
                    let angle = (yc / sk.b()).atan2(xc / sk.a());
                    let keep: f64 = spec
                        .shadow_arcs
                        .iter()
                        .filter(|arc| arc.contains(angle))
                        .map(|arc| 1.0 - arc.attenuation)
                        .product();
                    v = RING * keep;
                }
                vals.push(v);
                ring.push(on_ring);
            }
            (vals, ring)
        })
        .collect();
    let mut data = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for (v, m) in rows {
        data.extend(v);
        mask.extend(m);
    }
    if spec.speckle_sigma > 0.0 {
        let noise = LogNormal::new(0.0, spec.speckle_sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in &mut data {
            *v = (*v * noise.sample(&mut rng)).min(255.0);
        }
    }
    Ok(Phantom {
        image: GrayImage::new(w, h, data)?,
        landmarks,
        mask: BinaryMask::new(w, h, mask)?,
    })
}

fn check_skull_in_frame(spec: &PhantomSpec, view: &Affine2D<f64>) -> Result<()> {
    let m = view.matrix();
    let sk = &spec.skull;
    let (s, c) = sk.theta().sin_cos();
    // Columns of view·R(θ)·diag(a, b).
    let p = [
        [m[0][0] * c + m[0][1] * s, -m[0][0] * s + m[0][1] * c],
        [m[1][0] * c + m[1][1] * s, -m[1][0] * s + m[1][1] * c],
    ];
    let half_w = ((p[0][0] * sk.a()).powi(2) + (p[0][1] * sk.b()).powi(2)).sqrt();
    let half_h = ((p[1][0] * sk.a()).powi(2) + (p[1][1] * sk.b()).powi(2)).sqrt();
    let ctr = view.apply(sk.center());
    let (w, h) = (spec.width as f64 - 1.0, spec.height as f64 - 1.0);
    let inside = ctr.x - half_w >= MARGIN && ctr.x + half_w <= w - MARGIN && ctr.y - half_h >= MARGIN && ctr.y + half_h <= h - MARGIN;
    if inside {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "skull must stay {MARGIN} px inside the {}×{} frame",
            spec.width, spec.height
        )))
    }
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    render_phantom(spec, &Affine2D::identity())
}

fn record(id: SubjectId, p: Phantom) -> SubjectRecord<f64> {
    SubjectRecord {
        id,
        image: p.image,
        landmarks: p.landmarks,
        skull_mask: Some(p.mask),
    }
}

/// Reference record (id 10) from `spec` and a moving record (id 1) showing
/// the same scene moved by `rel`, plus the ground truth moving → reference
/// transform `rel⁻¹`.
pub fn generate_pair(
    spec: &PhantomSpec,
    rel: &Affine2D<f64>,
) -> Result<(SubjectRecord<f64>, SubjectRecord<f64>, Affine2D<f64>)> {
    let truth = rel.inverse().map_err(|e| Error::InvalidSpec(format!("relative transform: {e}")))?;
    let reference = record(DEFAULT_REFERENCE, generate_phantom(spec)?);
    let mut moving_spec = spec.clone();
    moving_spec.seed = spec.seed.wrapping_add(1);
    let moving = record(SubjectId::new(1, 0), render_phantom(&moving_spec, rel)?);
    Ok((reference, moving, truth))
}

/// Random subject variation for synthetic cohorts.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortConfig {
    /// Total number of subjects, reference included.
    pub n: usize,
    pub seed: u64,
    pub reference_id: u32,
    pub speckle_sigma: f64,
    /// Bounds of the similarity (about the reference skull centre) that
    /// places each subject's scene.
    pub max_rotation_deg: f64,
    pub scale_range: (f64, f64),
    pub max_translation: f64,
    /// Bounds of the per-subject interior offset relative to the skull.
    pub max_interior_rotation_deg: f64,
    pub max_interior_shift: f64,
    /// Chance that a subject gets one shadow arc.
    pub shadow_probability: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n: 50,
            seed: 7,
            reference_id: DEFAULT_REFERENCE.subject_id,
            speckle_sigma: 0.1,
            max_rotation_deg: 15.0,
            scale_range: (0.9, 1.1),
            max_translation: 40.0,
            max_interior_rotation_deg: 8.0,
            max_interior_shift: 0.04,
            shadow_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhantomCohort {
    pub reference: SubjectId,
    /// Sorted by id; includes the reference.
    pub subjects: Vec<SubjectRecord<f64>>,
    /// Ground-truth skull transform (subject → reference) per subject.
    pub truths: Vec<(SubjectId, Affine2D<f64>)>,
}

impl PhantomCohort {
    pub fn reference_record(&self) -> &SubjectRecord<f64> {
        self.subjects.iter().find(|s| s.id == self.reference).expect("cohort holds its reference")
    }
}

/// Generates `cfg.n` subjects: the reference is the undisturbed default
/// phantom, every other subject gets a random placement, interior offset,
/// speckle seed and optional shadow arc. Ids run 1, 2, … skipping the
/// reference id.
pub fn generate_cohort(cfg: &CohortConfig) -> Result<PhantomCohort> {
    if cfg.n == 0 {
        return Err(Error::InvalidSpec("cohort size must be at least 1".into()));
    }
    let (s_lo, s_hi) = cfg.scale_range;
    let ok = cfg.speckle_sigma >= 0.0
        && s_lo > 0.0
        && s_lo <= s_hi
        && cfg.max_rotation_deg >= 0.0
        && cfg.max_translation >= 0.0
        && cfg.max_interior_rotation_deg >= 0.0
        && cfg.max_interior_shift >= 0.0
        && (0.0..=1.0).contains(&cfg.shadow_probability);
    if !ok {
        return Err(Error::InvalidSpec(format!("invalid cohort settings {cfg:?}")));
    }
    let base = PhantomSpec {
        speckle_sigma: cfg.speckle_sigma,
        ..PhantomSpec::default()
    };
    let center = base.skull.center();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reference = SubjectId::new(cfg.reference_id, 0);
    let mut jobs: Vec<(SubjectId, PhantomSpec, Affine2D<f64>)> = vec![(
        reference,
        PhantomSpec {
            seed: rng.random(),
            ..base.clone()
        },
        Affine2D::identity(),
    )];
    let mut next_id = 1u32;
    while jobs.len() < cfg.n {
        if next_id == cfg.reference_id {
            next_id += 1;
        }
        let sym = |rng: &mut ChaCha8Rng, m: f64| if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
        let angle = sym(&mut rng, cfg.max_rotation_deg).to_radians();
        let scale = if s_hi > s_lo { rng.random_range(s_lo..=s_hi) } else { s_lo };
        let (tx, ty) = (sym(&mut rng, cfg.max_translation), sym(&mut rng, cfg.max_translation));
        let interior_rotation = sym(&mut rng, cfg.max_interior_rotation_deg).to_radians();
        let interior_shift = (sym(&mut rng, cfg.max_interior_shift), sym(&mut rng, cfg.max_interior_shift));
        let shadow_arcs = if rng.random::<f64>() < cfg.shadow_probability {
            let start = rng.random_range(-PI..PI);
            let span = rng.random_range(0.3..0.9);
            vec![ShadowArc {
                start,
                end: start + span,
                attenuation: rng.random_range(0.5..0.9),
            }]
        } else {
            Vec::new()
        };
        let spec = PhantomSpec {
            interior_rotation,
            interior_shift,
            shadow_arcs,
            seed: rng.random(),
            ..base.clone()
        };
        let rel = Affine2D::similarity_about(center, angle, scale, tx, ty);
        jobs.push((SubjectId::new(next_id, 0), spec, rel));
        next_id += 1;
    }
    let rendered: Vec<Result<(SubjectRecord<f64>, Affine2D<f64>)>> = jobs
        .into_par_iter()
        .map(|(id, spec, rel)| {
            let truth = rel.inverse()?;
            Ok((record(id, render_phantom(&spec, &rel)?), truth))
        })
        .collect();
    let mut subjects = Vec::with_capacity(cfg.n);
    let mut truths = Vec::with_capacity(cfg.n);
    for r in rendered {
        let (rec, truth) = r?;
        truths.push((rec.id, truth));
        subjects.push(rec);
    }
    subjects.sort_by_key(|s| s.id);
    truths.sort_by_key(|t| t.0);
    Ok(PhantomCohort {
        reference,
        subjects,
        truths,
    })
}

/// One line per subject: id followed by the 9 row-major matrix entries.
pub fn write_truths(truths: &[(SubjectId, Affine2D<f64>)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (id, t) in truths {
        write!(out, "{id}").unwrap();
        for row in t.matrix() {
            for v in row {
                write!(out, " {v}").unwrap();
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::robust_fit_ellipse;
    use crate::segmentation::mask_to_points;
    use crate::transform::warp_points;

    #[test]
    fn noiseless_mask_recovers_skull() {
        let spec = PhantomSpec::default();
        let p = generate_phantom(&spec).unwrap();
        let fit = robust_fit_ellipse(&mask_to_points::<f64>(&p.mask).unwrap()).unwrap().params;
        let s = spec.skull;
        assert!(fit.center().distance(&s.center()) < 0.5);
        assert!(((fit.a() - s.a()) / s.a()).abs() < 0.01);
        assert!(((fit.b() - s.b()) / s.b()).abs() < 0.01);
        let dtheta = (fit.theta() - s.theta()).rem_euclid(PI);
        assert!(dtheta.min(PI - dtheta).to_degrees() < 1.0);
        // Mask and ring intensity agree.
        for (v, m) in p.image.data().iter().zip(p.mask.data()) {
            assert_eq!(*v == RING, *m);
        }
    }

    #[test]
    fn seeds_change_only_the_noise() {
        let a = PhantomSpec { speckle_sigma: 0.2, seed: 1, ..PhantomSpec::default() };
        let b = PhantomSpec { seed: 2, ..a.clone() };
        let (pa, pb) = (generate_phantom(&a).unwrap(), generate_phantom(&b).unwrap());
        assert_eq!(pa.landmarks, pb.landmarks);
        assert_eq!(pa.mask, pb.mask);
        assert_ne!(pa.image, pb.image);
        assert_eq!(pa.image, generate_phantom(&a).unwrap().image);
    }

    #[test]
    fn skull_touching_border_is_invalid() {
        let spec = PhantomSpec {
            skull: EllipseParams::new(200.0, 135.0, 202.0, 270.0, 0.0).unwrap(),
            ..PhantomSpec::default()
        };
        assert!(matches!(generate_phantom(&spec), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn pair_ground_truth() {
        let spec = PhantomSpec::default();
        let (r, m, truth) = generate_pair(&spec, &Affine2D::identity()).unwrap();
        assert_eq!(r.landmarks, m.landmarks);
        assert_eq!(truth, Affine2D::identity());

        let rel = Affine2D::translation(30.0, -20.0)
            .compose(&Affine2D::rotation(10f64.to_radians()))
            .compose(&Affine2D::scaling(1.1, 1.1));
        let (r, m, truth) = generate_pair(&spec, &rel).unwrap();
        for (s, pts) in m.landmarks.iter() {
            let back = warp_points(&truth, pts);
            for (p, q) in back.iter().zip(r.landmarks.get(s).unwrap()) {
                assert!(p.distance(q) < 1e-9);
            }
        }
        let off = Affine2D::translation(500.0, 0.0);
        assert!(matches!(generate_pair(&spec, &off), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn cohort_layout() {
        let cfg = CohortConfig { n: 12, ..CohortConfig::default() };
        let c = generate_cohort(&cfg).unwrap();
        let ids: Vec<u32> = c.subjects.iter().map(|s| s.id.subject_id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<_>>());
        assert_eq!(c.reference_record().id.subject_id, 10);
        for s in &c.subjects {
            s.landmarks.validate(800, 540).unwrap();
        }
        assert!(matches!(generate_cohort(&CohortConfig { n: 0, ..cfg }), Err(Error::InvalidSpec(_))));
    }
}
