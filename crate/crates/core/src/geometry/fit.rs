use super::{centroid, solve_dense, EllipseParams, Point2};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MIN_SUPPORT: usize = 5;
const MAX_ITERS: usize = 200;
const REL_TOL: f64 = 1e-10;
const TRIM_ROUNDS: usize = 5;

/// Outcome of a single least-squares fit.
#[derive(Debug, Clone, Copy)]
pub struct EllipseFit<T> {
    pub params: EllipseParams<T>,
    /// Sum of squared normalized residuals at `params`.
    pub objective: T,
    pub iterations: usize,
    /// False when the iteration budget ran out; `params` is still the best
    /// point visited.
    pub converged: bool,
}

/// Outcome of the trimmed fit.
#[derive(Debug, Clone)]
pub struct RobustFitReport<T> {
    pub params: EllipseParams<T>,
    pub inlier_mask: Vec<bool>,
    /// `(mean, std)` of the squared normalized residuals over the inliers at
    /// the start of each trimming round.
    pub per_round_error: Vec<(T, T)>,
    pub converged: bool,
}

impl<T: Real> RobustFitReport<T> {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&m| m).count()
    }
}

fn covariance<T: Real>(pts: &[Point2<T>]) -> Option<(Point2<T>, T, T, T)> {
    let c = centroid(pts)?;
    let n = T::from_usize_lossy(pts.len());
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for p in pts {
        let dx = p.x - c.x;
        let dy = p.y - c.y;
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    Some((c, sxx / n, sxy / n, syy / n))
}

fn check_support<T: Real>(pts: &[Point2<T>]) -> Result<(Point2<T>, T, T, T)> {
    if pts.len() < MIN_SUPPORT {
        return Err(Error::DegenerateInput(format!(
            "{} points, need at least {MIN_SUPPORT}",
            pts.len()
        )));
    }
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateInput("non-finite coordinate".into()));
    }
    let (c, sxx, sxy, syy) = covariance(pts).expect("non-empty");
    let half_tr = (sxx + syy) / T::lit(2.0);
    let disc = (((sxx - syy) / T::lit(2.0)).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = (half_tr + disc, half_tr - disc);
    if l1 <= T::zero() || l2 <= T::lit(1e-12) * l1 {
        return Err(Error::DegenerateInput("point cloud has rank < 2".into()));
    }
    Ok((c, sxx, sxy, syy))
}

/// Moment-based initial guess: centroid, principal axis, and `2·sqrt` of the
/// covariance eigenvalues.
pub fn moment_init<T: Real>(pts: &[Point2<T>]) -> Result<EllipseParams<T>> {
    let (c, sxx, sxy, syy) = check_support(pts)?;
    let half_tr = (sxx + syy) / T::lit(2.0);
    let disc = (((sxx - syy) / T::lit(2.0)).powi(2) + sxy * sxy).sqrt();
    let (l1, l2) = (half_tr + disc, (half_tr - disc).max(T::zero()));
    let theta = (T::lit(2.0) * sxy).atan2(sxx - syy) / T::lit(2.0);
    let two = T::lit(2.0);
    EllipseParams::new(two * l1.sqrt(), two * l2.sqrt(), c.x, c.y, theta)
}

fn objective<T: Real>(pts: &[Point2<T>], p: &[T; 5]) -> T {
    let (a, b, x0, y0, th) = (p[0], p[1], p[2], p[3], p[4]);
    let (s, c) = th.sin_cos();
    let (ia2, ib2) = (T::one() / (a * a), T::one() / (b * b));
    pts.iter()
        .map(|q| {
            let dx = q.x - x0;
            let dy = q.y - y0;
            let xc = dx * c + dy * s;
            let yc = -dx * s + dy * c;
            let r = xc * xc * ia2 + yc * yc * ib2 - T::one();
            r * r
        })
        .sum()
}

/// Accumulates `JᵀJ` and `Jᵀr` for the normalized residual
/// `r = x_c²/a² + y_c²/b² − 1` over `(a, b, x0, y0, θ)`.
fn normal_equations<T: Real>(pts: &[Point2<T>], p: &[T; 5]) -> ([[T; 5]; 5], [T; 5]) {
    let (a, b, x0, y0, th) = (p[0], p[1], p[2], p[3], p[4]);
    let (s, c) = th.sin_cos();
    let two = T::lit(2.0);
    let (ia2, ib2) = (T::one() / (a * a), T::one() / (b * b));
    let mut jtj = [[T::zero(); 5]; 5];
    let mut jtr = [T::zero(); 5];
    for q in pts {
        let dx = q.x - x0;
        let dy = q.y - y0;
        let xc = dx * c + dy * s;
        let yc = -dx * s + dy * c;
        let r = xc * xc * ia2 + yc * yc * ib2 - T::one();
        let gx = two * xc * ia2;
        let gy = two * yc * ib2;
        let j = [
            -gx * xc / a,
            -gy * yc / b,
            -gx * c + gy * s,
            -gx * s - gy * c,
            two * xc * yc * (ia2 - ib2),
        ];
        for i in 0..5 {
            jtr[i] = jtr[i] + j[i] * r;
            for k in i..5 {
                jtj[i][k] = jtj[i][k] + j[i] * j[k];
            }
        }
    }
    for i in 0..5 {
        for k in 0..i {
            jtj[i][k] = jtj[k][i];
        }
    }
    (jtj, jtr)
}

/// Damped Gauss–Newton fit of `(a, b, x0, y0, θ)` minimizing the sum of
/// squared normalized residuals. Starts from `init`, or from
/// [`moment_init`] when `None`.
pub fn fit_ellipse<T: Real>(pts: &[Point2<T>], init: Option<EllipseParams<T>>) -> Result<EllipseFit<T>> {
    check_support(pts)?;
    let init = match init {
        Some(p) => p,
        None => moment_init(pts)?,
    };
    let mut p = [init.a(), init.b(), init.x0(), init.y0(), init.theta()];
    let mut f = objective(pts, &p);
    let mut lambda = T::lit(1e-3);
    let tol = T::lit(REL_TOL);
    let floor = T::epsilon() * T::epsilon() * T::from_usize_lossy(pts.len());
    let mut converged = f <= floor;
    let mut iterations = 0;

    while !converged && iterations < MAX_ITERS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(pts, &p);
        let diag_max = (0..5).fold(T::zero(), |m, i| m.max(jtj[i][i]));
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] = row[i] + lambda * jtj[i][i].max(T::lit(1e-12) * diag_max);
        }
        let rhs = jtr.map(|v| -v);
        let step = solve_dense(damped, rhs);
        let candidate = step.map(|d| {
            let mut q = p;
            for i in 0..5 {
                q[i] = q[i] + d[i];
            }
            q
        });
        match candidate {
            Some(q) if q[0] > T::zero() && q[1] > T::zero() && q.iter().all(|v| v.is_finite()) => {
                let fq = objective(pts, &q);
                if fq < f {
                    let rel = (f - fq) / f;
                    p = q;
                    f = fq;
                    lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                    if rel < tol || f <= floor {
                        converged = true;
                    }
                    continue;
                }
            }
            _ => {}
        }
        lambda = lambda * T::lit(10.0);
        // No descent direction left at any damping: stationary point.
        if lambda > T::lit(1e16) {
            converged = true;
        }
    }

    Ok(EllipseFit {
        params: EllipseParams::new(p[0], p[1], p[2], p[3], p[4])?,
        objective: f,
        iterations,
        converged,
    })
}

fn mean_std<T: Real>(values: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Fit with five rounds of outlier trimming.
///
/// Each round scores the current inliers by squared normalized residual,
/// drops those above `mean + 1·std`, and refits from the previous estimate.
/// A round that would leave fewer than five inliers is not applied and ends
/// the loop. Residuals below the numerical floor are never trimmed.
pub fn robust_fit_ellipse<T: Real>(pts: &[Point2<T>]) -> Result<RobustFitReport<T>> {
    let first = fit_ellipse(pts, None)?;
    let (mut params, mut converged) = if plausible(&first.params, pts) {
        (first.params, first.converged)
    } else {
        (moment_init(pts)?, false)
    };
    let mut mask = vec![true; pts.len()];
    let mut per_round_error = Vec::with_capacity(TRIM_ROUNDS);
    let floor = (T::epsilon() * T::lit(1e3)).powi(2);

    for _ in 0..TRIM_ROUNDS {
        let idx: Vec<usize> = (0..pts.len()).filter(|&i| mask[i]).collect();
        let sq: Vec<T> = idx
            .iter()
            .map(|&i| params.normalized_residual(pts[i].x, pts[i].y).powi(2))
            .collect();
        let (mean, std) = mean_std(&sq);
        per_round_error.push((mean, std));
        let threshold = (mean + std).max(floor);
        let keep: Vec<usize> = idx
            .iter()
            .zip(&sq)
            .filter(|(_, &e)| e <= threshold)
            .map(|(&i, _)| i)
            .collect();
        if keep.len() == idx.len() {
            continue;
        }
        if keep.len() < MIN_SUPPORT {
            break;
        }
        let subset: Vec<Point2<T>> = keep.iter().map(|&i| pts[i]).collect();
        let Ok(refit) = fit_ellipse(&subset, Some(params)) else {
            break;
        };
        mask.iter_mut().for_each(|m| *m = false);
        keep.iter().for_each(|&i| mask[i] = true);
        if plausible(&refit.params, &subset) {
            params = refit.params;
            converged = refit.converged;
        }
    }

    Ok(RobustFitReport {
        params,
        inlier_mask: mask,
        per_round_error,
        converged,
    })
}

/// Rejects the runaway solutions the normalized objective drifts to when
/// far outliers are present: semi-major axis beyond twice the diagonal of
/// the points' bounding box.
fn plausible<T: Real>(p: &EllipseParams<T>, pts: &[Point2<T>]) -> bool {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for q in pts {
        lo = Point2::new(lo.x.min(q.x), lo.y.min(q.y));
        hi = Point2::new(hi.x.max(q.x), hi.y.max(q.y));
    }
    p.a() <= T::lit(2.0) * lo.distance(&hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(a: f64, b: f64, x0: f64, y0: f64, t: f64) -> EllipseParams<f64> {
        EllipseParams::new(a, b, x0, y0, t).unwrap()
    }

    fn close_rel(got: f64, want: f64, tol: f64) -> bool {
        (got - want).abs() <= tol * want.abs().max(1.0)
    }

    #[test]
    fn recovers_noiseless_ellipse_from_moments() {
        let truth = ep(150.0, 100.0, 400.0, 270.0, 0.3);
        let fit = fit_ellipse(&truth.sample_boundary(200), None).unwrap();
        let p = fit.params;
        assert!(fit.converged);
        for (g, w) in [(p.a(), 150.0), (p.b(), 100.0), (p.x0(), 400.0), (p.y0(), 270.0), (p.theta(), 0.3)] {
            assert!(close_rel(g, w, 1e-3), "{p:?}");
        }
    }

    #[test]
    fn circle_fit_reports_zero_angle() {
        let truth = ep(100.0, 100.0, 50.0, 50.0, 0.0);
        let p = fit_ellipse(&truth.sample_boundary(200), None).unwrap().params;
        assert!(close_rel(p.a(), 100.0, 1e-6) && close_rel(p.b(), 100.0, 1e-6));
        assert!((p.x0() - 50.0).abs() < 1e-6 && (p.y0() - 50.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_or_collinear_points_are_rejected() {
        let four = ep(2.0, 1.0, 0.0, 0.0, 0.0).sample_boundary(4);
        assert!(matches!(fit_ellipse(&four, None), Err(Error::DegenerateInput(_))));
        let line: Vec<_> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(fit_ellipse(&line, None), Err(Error::DegenerateInput(_))));
        assert!(matches!(moment_init(&line[..3]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn moment_init_on_uniform_angle_samples() {
        let pts = ep(2.0, 1.0, 0.0, 0.0, 0.0).sample_boundary(1000);
        let p = moment_init(&pts).unwrap();
        assert!(p.x0().abs() < 1e-9 && p.y0().abs() < 1e-9);
        assert!(p.theta().abs() < 1e-9);
        assert!(((p.a() / p.b()) - 2.0).abs() < 0.1);
    }

    #[test]
    fn five_points_are_never_trimmed() {
        let pts = ep(30.0, 10.0, 5.0, -3.0, 0.4).sample_boundary(5);
        let single = fit_ellipse(&pts, None).unwrap().params;
        let robust = robust_fit_ellipse(&pts).unwrap();
        assert_eq!(robust.inlier_count(), 5);
        assert_eq!(robust.params, single);
    }

    #[test]
    fn fixed_point_at_truth() {
        let q = ep(80.0, 35.0, 120.0, 90.0, -0.7);
        let fit = fit_ellipse(&q.sample_boundary(64), Some(q)).unwrap().params;
        for (g, w) in [(fit.a(), q.a()), (fit.b(), q.b()), (fit.x0(), q.x0()), (fit.y0(), q.y0()), (fit.theta(), q.theta())] {
            assert!(close_rel(g, w, 1e-9));
        }
    }
}
