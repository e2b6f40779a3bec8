use serde::{Deserialize, Serialize};

use super::zscore;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transform::{Affine2D, GrayImage};

/// Settings for intensity-based affine refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Accepted-or-rejected gradient steps per pyramid level.
    pub max_iters: usize,
    /// Initial line-search step, in full-resolution pixels of displacement.
    pub step_size: f64,
    pub pyramid_levels: usize,
    /// Stop a level when the relative loss decrease of a step falls below this.
    pub convergence_tol: f64,
    /// Central finite-difference step (pixels for translations, unitless for
    /// the linear block).
    pub fd_step: f64,
    /// Minimum fraction of fixed pixels that must sample inside the moving
    /// image for a transform to be scored.
    pub min_overlap: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_iters: 100,
            step_size: 1.0,
            pyramid_levels: 3,
            convergence_tol: 1e-5,
            fd_step: 1e-4,
            min_overlap: 0.1,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters >= 1
            && self.pyramid_levels >= 1
            && self.step_size > 0.0
            && self.convergence_tol > 0.0
            && self.fd_step > 0.0
            && (0.0..=1.0).contains(&self.min_overlap);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid refinement settings {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AffineRefinement<T> {
    /// Moving pixels → fixed pixels.
    pub transform: Affine2D<T>,
    /// Full-resolution loss at the initial transform.
    pub initial_loss: T,
    /// Finest-level loss at its starting transform, then after every
    /// accepted step. Non-increasing.
    pub loss_trace: Vec<T>,
    /// Accepted-step losses per pyramid level, coarsest first.
    pub level_traces: Vec<Vec<T>>,
    /// Whether the finest level met its stopping rule within budget.
    pub converged: bool,
}

/// One pyramid level: z-scored images and the coarse→fine pixel map. The
/// loss kernel works on f64 copies; the moving image carries one extra
/// replicated column and row so bilinear taps never need clamping.
struct Level<T> {
    fixed: GrayImage<T>,
    moving: GrayImage<T>,
    factor: T,
    fixed_f64: Vec<f64>,
    moving_padded: Vec<f64>,
}

impl<T: Real> Level<T> {
    fn new(fixed: GrayImage<T>, moving: GrayImage<T>, factor: T) -> Self {
        let fixed_f64 = fixed.data().iter().map(|v| v.as_f64()).collect();
        let (mw, mh) = (moving.width(), moving.height());
        let mut moving_padded = Vec::with_capacity((mw + 1) * (mh + 1));
        for y in 0..=mh {
            let row = &moving.data()[y.min(mh - 1) * mw..][..mw];
            moving_padded.extend(row.iter().map(|v| v.as_f64()));
            moving_padded.push(row[mw - 1].as_f64());
        }
        Level {
            fixed,
            moving,
            factor,
            fixed_f64,
            moving_padded,
        }
    }

    fn to_fine(&self) -> Affine2D<T> {
        let off = (self.factor - T::one()) / T::lit(2.0);
        Affine2D::translation(off, off).compose(&Affine2D::scaling(self.factor, self.factor))
    }

    /// Mean squared difference over fixed pixels whose pull-back lands inside
    /// the moving image; infinite below the overlap floor or for singular
    /// transforms.
    fn loss(&self, t_fine: &Affine2D<T>, min_overlap: f64) -> T {
        let p = self.to_fine();
        let Ok(p_inv) = p.inverse() else {
            return T::infinity();
        };
        let Ok(back) = p_inv.compose(t_fine).compose(&p).inverse() else {
            return T::infinity();
        };
        let m = back.matrix().map(|row| row.map(|v| v.as_f64()));
        let (fw, fh) = (self.fixed.width(), self.fixed.height());
        let (mw, mh) = (self.moving.width(), self.moving.height());
        let (wmax, hmax) = ((mw - 1) as f64, (mh - 1) as f64);
        let stride = mw + 1;
        let fixed = &self.fixed_f64;
        let moving = &self.moving_padded;
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for v in 0..fh {
            let vf = v as f64;
            let (bx, by) = (m[0][1] * vf + m[0][2], m[1][1] * vf + m[1][2]);
            let Some((lo, hi)) = span(bx, m[0][0], wmax, fw).and_then(|a| intersect(a, span(by, m[1][0], hmax, fw)?))
            else {
                continue;
            };
            let row = &fixed[v * fw..(v + 1) * fw];
            for u in lo..=hi {
                let uf = u as f64;
                let x = (bx + m[0][0] * uf).clamp(0.0, wmax);
                let y = (by + m[1][0] * uf).clamp(0.0, hmax);
                let (x0, y0) = (x as usize, y as usize);
                let (fx, fy) = (x - x0 as f64, y - y0 as f64);
                let i = y0 * stride + x0;
                let top = moving[i] + (moving[i + 1] - moving[i]) * fx;
                let bottom = moving[i + stride] + (moving[i + stride + 1] - moving[i + stride]) * fx;
                let d = top + (bottom - top) * fy - row[u];
                sum += d * d;
            }
            count += hi - lo + 1;
        }
        let needed = (min_overlap * (fw * fh) as f64).ceil().max(1.0) as usize;
        if count < needed {
            return T::infinity();
        }
        T::lit(sum / count as f64)
    }
}

/// Integer columns `u ∈ [0, n)` with `0 ≤ b + s·u ≤ max`.
fn span(b: f64, s: f64, max: f64, n: usize) -> Option<(usize, usize)> {
    let (lo, hi) = if s > 0.0 {
        (-b / s, (max - b) / s)
    } else if s < 0.0 {
        ((max - b) / s, -b / s)
    } else if (0.0..=max).contains(&b) {
        (0.0, (n - 1) as f64)
    } else {
        return None;
    };
    let lo = lo.ceil().max(0.0);
    let hi = hi.floor().min((n - 1) as f64);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

fn intersect(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let (lo, hi) = (a.0.max(b.0), a.1.min(b.1));
    (lo <= hi).then_some((lo, hi))
}

/// Affine parametrization about the moving-image centre `c`:
/// `T(x) = A (x − c) + c + t`, packed as `[A00, A01, A10, A11, tx, ty]`.
#[derive(Clone, Copy)]
struct Centered<T> {
    c: (T, T),
}

impl<T: Real> Centered<T> {
    fn pack(&self, t: &Affine2D<T>) -> [T; 6] {
        let m = t.matrix();
        let (cx, cy) = self.c;
        let tx = m[0][0] * cx + m[0][1] * cy + m[0][2] - cx;
        let ty = m[1][0] * cx + m[1][1] * cy + m[1][2] - cy;
        [m[0][0], m[0][1], m[1][0], m[1][1], tx, ty]
    }

    fn unpack(&self, q: &[T; 6]) -> Option<Affine2D<T>> {
        let (cx, cy) = self.c;
        let bx = cx + q[4] - q[0] * cx - q[1] * cy;
        let by = cy + q[5] - q[2] * cx - q[3] * cy;
        Affine2D::from_rows([[q[0], q[1], bx], [q[2], q[3], by]]).ok()
    }
}

fn build_pyramid<T: Real>(fixed: &GrayImage<T>, moving: &GrayImage<T>, levels: usize) -> Vec<Level<T>> {
    let mut out = vec![Level::new(fixed.clone(), moving.clone(), T::one())];
    for _ in 1..levels {
        let prev = out.last().expect("non-empty");
        if prev.fixed.width() < 16 || prev.fixed.height() < 16 || prev.moving.width() < 16 || prev.moving.height() < 16 {
            break;
        }
        let next = Level::new(prev.fixed.downsample2(), prev.moving.downsample2(), prev.factor * T::lit(2.0));
        out.push(next);
    }
    out.reverse();
    out
}

struct LevelOutcome<T> {
    transform: Affine2D<T>,
    trace: Vec<T>,
    converged: bool,
}

fn optimize_level<T: Real>(
    level: &Level<T>,
    start: Affine2D<T>,
    param: Centered<T>,
    length: T,
    cfg: &RefineConfig,
) -> LevelOutcome<T> {
    let loss = |q: &[T; 6]| param.unpack(q).map_or(T::infinity(), |t| level.loss(&t, cfg.min_overlap));
    let mut q = param.pack(&start);
    let mut f = loss(&q);
    let mut trace = vec![f];
    if !f.is_finite() {
        return LevelOutcome {
            transform: start,
            trace,
            converged: false,
        };
    }
    let h = T::lit(cfg.fd_step);
    let base_step = T::lit(cfg.step_size) * level.factor;
    let min_step = base_step * T::lit(1e-3);
    let tol = T::lit(cfg.convergence_tol);
    let armijo = T::lit(1e-4);
    let mut alpha = base_step;
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        // Gradient in raw parameters, then rescaled so the linear block is
        // measured in pixels of displacement at distance `length`.
        let mut grad = [T::zero(); 6];
        for i in 0..6 {
            let mut qp = q;
            let mut qm = q;
            qp[i] = qp[i] + h;
            qm[i] = qm[i] - h;
            grad[i] = (loss(&qp) - loss(&qm)) / (T::lit(2.0) * h);
        }
        if grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        let scaled: [T; 6] = std::array::from_fn(|i| if i < 4 { grad[i] / length } else { grad[i] });
        let norm = scaled.iter().map(|g| *g * *g).sum::<T>().sqrt();
        if norm <= T::zero() {
            converged = true;
            break;
        }
        let dir: [T; 6] = std::array::from_fn(|i| {
            let d = -scaled[i] / norm;
            if i < 4 {
                d / length
            } else {
                d
            }
        });
        let mut accepted = None;
        while alpha >= min_step {
            let trial: [T; 6] = std::array::from_fn(|i| q[i] + alpha * dir[i]);
            let ft = loss(&trial);
            if ft.is_finite() && ft <= f - armijo * alpha * norm {
                accepted = Some((trial, ft));
                break;
            }
            alpha = alpha / T::lit(2.0);
        }
        let Some((trial, ft)) = accepted else {
            converged = true;
            break;
        };
        let rel = (f - ft) / f.abs().max(T::min_positive_value());
        q = trial;
        f = ft;
        trace.push(f);
        alpha = (alpha * T::lit(1.5)).min(base_step * T::lit(8.0));
        if rel < tol {
            converged = true;
            break;
        }
    }
    LevelOutcome {
        transform: param.unpack(&q).unwrap_or(start),
        trace,
        converged,
    }
}

/// Full-resolution loss minimized by [`register_affine`]: mean squared
/// difference of z-scored intensities, `t` mapping moving to fixed pixels.
pub fn similarity_loss<T: Real>(moving: &GrayImage<T>, fixed: &GrayImage<T>, t: &Affine2D<T>, min_overlap: f64) -> Result<T> {
    let level = Level::new(zscore(fixed)?, zscore(moving)?, T::one());
    Ok(level.loss(t, min_overlap))
}

/// Refines `init` (moving → fixed pixels) by minimizing the mean squared
/// difference of z-scored intensities over the overlap, coarse to fine.
///
/// Gradients are central finite differences; steps use a backtracking
/// line search along the normalized descent direction. The finest level
/// never starts from a transform worse than `init` at full resolution.
pub fn register_affine<T: Real>(
    moving: &GrayImage<T>,
    fixed: &GrayImage<T>,
    init: &Affine2D<T>,
    cfg: &RefineConfig,
) -> Result<AffineRefinement<T>> {
    cfg.validate()?;
    init.inverse()?;
    let zm = zscore(moving)?;
    let zf = zscore(fixed)?;
    let pyramid = build_pyramid(&zf, &zm, cfg.pyramid_levels);
    let finest = pyramid.last().expect("at least one level");
    let initial_loss = finest.loss(init, cfg.min_overlap);

    let param = Centered {
        c: (
            T::from_usize_lossy(moving.width() - 1) / T::lit(2.0),
            T::from_usize_lossy(moving.height() - 1) / T::lit(2.0),
        ),
    };
    let length = T::from_usize_lossy(moving.width().max(moving.height())) / T::lit(2.0);

    let mut current = *init;
    let mut level_traces = Vec::with_capacity(pyramid.len());
    let (coarse, fine) = pyramid.split_at(pyramid.len() - 1);
    for level in coarse {
        let out = optimize_level(level, current, param, length, cfg);
        current = out.transform;
        level_traces.push(out.trace);
    }
    if !(finest.loss(&current, cfg.min_overlap) <= initial_loss) {
        current = *init;
    }
    let out = optimize_level(&fine[0], current, param, length, cfg);
    level_traces.push(out.trace.clone());

    Ok(AffineRefinement {
        transform: out.transform,
        initial_loss,
        loss_trace: out.trace,
        level_traces,
        converged: out.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_image(w: usize, h: usize, cx: f64, cy: f64) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |x, y| {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let a = (-(dx * dx) / 300.0 - (dy * dy) / 150.0).exp();
            let b = (-((dx - 25.0).powi(2) + (dy + 10.0).powi(2)) / 80.0).exp();
            10.0 + 100.0 * a + 60.0 * b
        })
    }

    #[test]
    fn pack_unpack_round_trip() {
        let p = Centered { c: (50.0, 30.0) };
        let t = Affine2D::from_rows([[1.1, 0.1, 3.0], [-0.2, 0.95, -4.0]]).unwrap();
        assert!(p.unpack(&p.pack(&t)).unwrap().max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn identical_images_stay_at_identity() {
        let img = blob_image(96, 64, 48.0, 32.0);
        let out = register_affine(&img, &img, &Affine2D::identity(), &RefineConfig::default()).unwrap();
        assert!(out.transform.max_abs_diff(&Affine2D::identity()) < 1e-3);
        assert!(*out.loss_trace.last().unwrap() <= out.initial_loss);
    }

    #[test]
    fn recovers_small_shift() {
        let fixed = blob_image(128, 96, 60.0, 48.0);
        let moving = blob_image(128, 96, 55.0, 45.0);
        let out = register_affine(&moving, &fixed, &Affine2D::identity(), &RefineConfig::default()).unwrap();
        let p = out.transform.apply(crate::geometry::Point2::new(55.0, 45.0));
        assert!((p.x - 60.0).abs() < 0.5 && (p.y - 48.0).abs() < 0.5, "{p:?}");
        assert!(out.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn config_validation() {
        let bad = RefineConfig {
            pyramid_levels: 0,
            ..RefineConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
