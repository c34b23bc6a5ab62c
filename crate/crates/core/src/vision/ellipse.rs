//! Direct least-squares ellipse fitting.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::VisionError;

/// Geometric ellipse. `theta` is the direction of the major axis in
/// `[0, π)`, measured from +x towards +y (image rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    pub theta: f64,
}

impl EllipseParams {
    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }

    /// Point at parameter angle `t`.
    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let (s, c) = libm::sincos(self.theta);
        let (st, ct) = libm::sincos(t);
        let u = self.semi_major * ct;
        let v = self.semi_minor * st;
        (self.center.0 + u * c - v * s, self.center.1 + u * s + v * c)
    }

    /// `ρ²` of a point in the ellipse frame, scaled by `scale`.
    pub fn normalized_radius_sq(&self, x: f64, y: f64, scale: f64) -> f64 {
        let (s, c) = libm::sincos(self.theta);
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        let u = (dx * c + dy * s) / (scale * self.semi_major);
        let v = (dy * c - dx * s) / (scale * self.semi_minor);
        u * u + v * v
    }
}

/// `n` points equally spaced in parameter angle.
pub fn sample_ellipse(e: &EllipseParams, n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|k| e.point_at(2.0 * PI * k as f64 / n as f64)).collect()
}

/// Fits the conic `A x² + B xy + C y² + D x + E y + F = 0` subject to
/// `4AC − B² = 1` (Fitzgibbon's constraint, in Halíř and Flusser's
/// numerically stable split form) after centering and scaling the points.
pub fn fit_ellipse(points: &[(f64, f64)]) -> Result<EllipseParams, VisionError> {
    let n = points.len();
    if n < 6 {
        return Err(VisionError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.0 - mx, p.1 - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let spread = (sxx + syy) / nf;
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(VisionError::Degenerate);
    }
    let scale = libm::sqrt(spread / 2.0);
    // Normalized covariance has trace 2; a vanishing determinant means the
    // points lie on a line.
    let det = (sxx * syy - sxy * sxy) / (nf * nf * scale * scale * scale * scale);
    if det < 1e-12 {
        return Err(VisionError::Degenerate);
    }

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let x = (p.0 - mx) / scale;
        let y = (p.1 - my) / scale;
        let quad = Vector3::new(x * x, x * y, y * y);
        let lin = Vector3::new(x, y, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3.try_inverse().ok_or(VisionError::Degenerate)?;
    let t = -(s3_inv * s2.transpose());
    let m = s1 + s2 * t;
    // C1⁻¹·M with C1 = [[0, 0, 2], [0, −1, 0], [2, 0, 0]].
    let reduced = Matrix3::new(
        m[(2, 0)] / 2.0,
        m[(2, 1)] / 2.0,
        m[(2, 2)] / 2.0,
        -m[(1, 0)],
        -m[(1, 1)],
        -m[(1, 2)],
        m[(0, 0)] / 2.0,
        m[(0, 1)] / 2.0,
        m[(0, 2)] / 2.0,
    );

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for ev in reduced.complex_eigenvalues().iter() {
        if ev.im.abs() > 1e-9 * (1.0 + ev.re.abs()) {
            continue;
        }
        let Some(v) = null_vector(&(reduced - Matrix3::identity() * ev.re)) else {
            continue;
        };
        let cond = 4.0 * v[0] * v[2] - v[1] * v[1];
        if cond > 0.0 && best.as_ref().is_none_or(|b| ev.re.abs() < b.0) {
            best = Some((ev.re.abs(), v));
        }
    }
    let (_, quad) = best.ok_or(VisionError::NotEllipse)?;
    let lin = t * quad;
    let e = conic_to_params([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]])?;
    Ok(EllipseParams {
        center: (mx + scale * e.center.0, my + scale * e.center.1),
        semi_major: e.semi_major * scale,
        semi_minor: e.semi_minor * scale,
        theta: e.theta,
    })
}

/// Unit vector spanning the null space of a rank-2 matrix, taken as the
/// largest cross product of two of its rows.
fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let r: [Vector3<f64>; 3] = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let v = [r[0].cross(&r[1]), r[0].cross(&r[2]), r[1].cross(&r[2])]
        .into_iter()
        .max_by(|p, q| p.norm_squared().total_cmp(&q.norm_squared()))?;
    let norm = v.norm();
    (norm > 0.0 && norm.is_finite()).then(|| v / norm)
}

/// Maps an axis direction into `[0, π)`.
pub(crate) fn wrap_half_turn(a: f64) -> f64 {
    let t = a % PI;
    let t = if t < 0.0 { t + PI } else { t };
    if t >= PI {
        0.0
    } else {
        t
    }
}

fn conic_to_params(k: [f64; 6]) -> Result<EllipseParams, VisionError> {
    let [mut a, mut b, mut c, mut d, mut e, mut f] = k;
    if a + c < 0.0 {
        a = -a;
        b = -b;
        c = -c;
        d = -d;
        e = -e;
        f = -f;
    }
    let den = b * b - 4.0 * a * c;
    if den >= 0.0 {
        return Err(VisionError::NotEllipse);
    }
    let x0 = (2.0 * c * d - b * e) / den;
    let y0 = (2.0 * a * e - b * d) / den;
    let f0 = f + (d * x0 + e * y0) / 2.0;
    let mean = (a + c) / 2.0;
    let half_diff = libm::hypot((a - c) / 2.0, b / 2.0);
    let lam_small = mean - half_diff;
    let lam_large = mean + half_diff;
    if !(lam_small > 0.0 && f0 < 0.0) {
        return Err(VisionError::NotEllipse);
    }
    let semi_major = libm::sqrt(-f0 / lam_small);
    let semi_minor = libm::sqrt(-f0 / lam_large);
    // 0.5·atan2(B, A − C) is the direction of the larger eigenvalue, i.e.
    // the minor axis.
    let theta = wrap_half_turn(0.5 * libm::atan2(b, a - c) + PI / 2.0);
    Ok(EllipseParams {
        center: (x0, y0),
        semi_major,
        semi_minor,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = wrap_half_turn(a - b);
        d.min(PI - d)
    }

    #[test]
    fn recovers_reference_ellipse() {
        let e = EllipseParams {
            center: (64.0, 60.0),
            semi_major: 20.0,
            semi_minor: 10.0,
            theta: 30f64.to_radians(),
        };
        let fit = fit_ellipse(&sample_ellipse(&e, 32)).unwrap();
        assert!((fit.center.0 - 64.0).abs() < 1e-6);
        assert!((fit.center.1 - 60.0).abs() < 1e-6);
        assert!((fit.semi_major - 20.0).abs() < 1e-6);
        assert!((fit.semi_minor - 10.0).abs() < 1e-6);
        assert!(angle_diff(fit.theta, e.theta) < 1e-6);
    }

    #[test]
    fn circle_has_equal_axes() {
        let e = EllipseParams {
            center: (10.0, -4.0),
            semi_major: 7.0,
            semi_minor: 7.0,
            theta: 0.0,
        };
        let fit = fit_ellipse(&sample_ellipse(&e, 20)).unwrap();
        assert!((fit.semi_major - 7.0).abs() < 1e-6 && (fit.semi_minor - 7.0).abs() < 1e-6);
        assert!((fit.center.0 - 10.0).abs() < 1e-9 && (fit.center.1 + 4.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        let five: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, (i * i) as f64)).collect();
        assert_eq!(fit_ellipse(&five), Err(VisionError::TooFewPoints(5)));
        let line: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert_eq!(fit_ellipse(&line), Err(VisionError::Degenerate));
        let same = [(1.0, 1.0); 8];
        assert_eq!(fit_ellipse(&same), Err(VisionError::Degenerate));
    }
}
