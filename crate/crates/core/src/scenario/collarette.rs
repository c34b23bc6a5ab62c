//! Irregular collarette ring: jittered polygon smoothed by a periodic
//! cubic spline of radius over angle.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::CollaretteParams;

/// Elliptical iris disk with a raised-cosine rim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrisSpec {
    pub center: (f64, f64),
    pub alpha: f64,
    pub beta: f64,
    /// Direction of the `alpha` axis, radians.
    pub theta: f64,
    pub luminance: f64,
    pub edge_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollaretteSpec {
    pub center: (f64, f64),
    pub n_vertices: u32,
    pub mean_radius: f64,
    /// Radial jitter amplitude as a fraction of `mean_radius`.
    pub radial_jitter: f64,
    pub luminance: f64,
    pub edge_width: f64,
    /// Closed outline (last point connects back to the first), `5·n_vertices` points.
    pub polygon: Vec<(f64, f64)>,
}

/// Upsampling factor from jittered vertices to the smoothed outline.
pub const UPSAMPLE: usize = 5;

/// Second derivatives of the periodic cubic spline through equally spaced
/// samples `values` with spacing `h`.
fn periodic_second_derivatives(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    if n < 3 {
        return alloc::vec![0.0; n];
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for k in 0..n {
        let prev = (k + n - 1) % n;
        let next = (k + 1) % n;
        a[(k, prev)] += 1.0;
        a[(k, k)] += 4.0;
        a[(k, next)] += 1.0;
        rhs[k] = 6.0 * (values[next] - 2.0 * values[k] + values[prev]) / (h * h);
    }
    // The cyclic (1, 4, 1) matrix is strictly diagonally dominant.
    a.lu().solve(&rhs).expect("cyclic spline system is non-singular").iter().copied().collect()
}

/// Resamples a closed radial profile (`radii[k]` at angle `2πk/n`) to
/// `factor·n` equally spaced angles with a periodic cubic spline.
pub fn periodic_spline_resample(radii: &[f64], factor: usize) -> Vec<f64> {
    let n = radii.len();
    let h = 2.0 * PI / n as f64;
    let m = periodic_second_derivatives(radii, h);
    let total = n * factor;
    (0..total)
        .map(|j| {
            let k = j / factor;
            let k1 = (k + 1) % n;
            let tau = h * (j % factor) as f64 / factor as f64;
            let s = h - tau;
            m[k] * s * s * s / (6.0 * h)
                + m[k1] * tau * tau * tau / (6.0 * h)
                + (radii[k] - m[k] * h * h / 6.0) * s / h
                + (radii[k1] - m[k1] * h * h / 6.0) * tau / h
        })
        .collect()
}

/// Builds a collarette outline from explicit vertex radii.
pub fn collarette_from_radii(
    center: (f64, f64),
    mean_radius: f64,
    radial_jitter: f64,
    radii: &[f64],
    luminance: f64,
    edge_width: f64,
) -> CollaretteSpec {
    let fine = periodic_spline_resample(radii, UPSAMPLE);
    let total = fine.len();
    let polygon = fine
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let a = 2.0 * PI * j as f64 / total as f64;
            (center.0 + r * libm::cos(a), center.1 + r * libm::sin(a))
        })
        .collect();
    CollaretteSpec {
        center,
        n_vertices: radii.len() as u32,
        mean_radius,
        radial_jitter,
        luminance,
        edge_width,
        polygon,
    }
}

/// Samples the collarette inside `iris`.
pub fn build_collarette<R: Rng + ?Sized>(
    iris: &IrisSpec,
    params: &CollaretteParams,
    rng: &mut R,
) -> CollaretteSpec {
    let n = params.vertices.sample(rng).max(3);
    let mean_radius = params.radius_fraction.sample(rng) * iris.beta;
    let jitter = params.jitter_fraction.sample(rng);
    let radii: Vec<f64> = (0..n)
        .map(|_| mean_radius * (1.0 + jitter * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    let offset_r = params.center_jitter_fraction * iris.alpha * libm::sqrt(rng.random::<f64>());
    let offset_a = 2.0 * PI * rng.random::<f64>();
    let center = (
        iris.center.0 + offset_r * libm::cos(offset_a),
        iris.center.1 + offset_r * libm::sin(offset_a),
    );
    let luminance = params.luminance_ratio.sample(rng) * iris.luminance;
    let edge = params.edge_width.sample(rng);
    collarette_from_radii(center, mean_radius, jitter, &radii, luminance, edge)
}
