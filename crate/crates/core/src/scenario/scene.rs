use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::collarette::{CollaretteSpec, IrisSpec};
use super::config::{ScenarioId, Stage};
use crate::plane::{FloatImage, GrayImage, Mask, Plane};
use crate::render::{self, GaussianFeature};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    Uniform {
        luminance: f64,
    },
    /// Linear ramp from `from` to `to` along the unit axis at `axis_angle`,
    /// normalized so the extreme image corners take the end values.
    LinearGradient {
        from: f64,
        to: f64,
        axis_angle: f64,
    },
    /// Half-planes split by the line `n·p = offset`, `n = (cos ψ, sin ψ)`.
    /// Pixels with `n·p > offset` are dark.
    SplitLine {
        normal_angle: f64,
        offset: f64,
        dark: f64,
        grey: f64,
    },
    LayeredEye {
        sclera: f64,
        iris: IrisSpec,
        collarette: CollaretteSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", content = "index", rename_all = "snake_case")]
pub enum BrightRole {
    Cr(u32),
    Spurious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightFeature {
    pub feature: GaussianFeature,
    pub role: BrightRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrTruth {
    pub index: u32,
    pub x: f64,
    pub y: f64,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pupil: Option<GaussianFeature>,
    pub crs: Vec<CrTruth>,
}

/// Full description of one synthetic image. Rendering is a pure function
/// of the scene plus the noise stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scenario: ScenarioId,
    pub stage: Stage,
    pub width: usize,
    pub height: usize,
    pub background: Background,
    pub dark_features: Vec<GaussianFeature>,
    pub bright_features: Vec<BrightFeature>,
    pub noise_sigma: f64,
    pub truth: GroundTruth,
}

/// Raised-cosine inside-weight for signed boundary distance `s`
/// (negative inside). The transition of width `edge` is centered on the
/// boundary; `edge = 0` gives a hard edge.
#[inline]
pub fn raised_cosine_weight(s: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        return if s <= 0.0 { 1.0 } else { 0.0 };
    }
    let t = (s / edge + 0.5).clamp(0.0, 1.0);
    0.5 * (1.0 + libm::cos(PI * t))
}

/// First-order signed distance from `(x, y)` to the iris ellipse boundary.
pub fn ellipse_signed_distance(iris: &IrisSpec, x: f64, y: f64) -> f64 {
    let (s, c) = libm::sincos(iris.theta);
    let dx = x - iris.center.0;
    let dy = y - iris.center.1;
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    let (a2, b2) = (iris.alpha * iris.alpha, iris.beta * iris.beta);
    let rho = libm::sqrt(u * u / a2 + v * v / b2);
    if rho < 1e-12 {
        return -iris.alpha;
    }
    let grad = libm::sqrt(u * u / (a2 * a2) + v * v / (b2 * b2)) / rho;
    (rho - 1.0) / grad
}

fn segment_distance_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ex, ey) = (b.0 - a.0, b.1 - a.1);
    let len2 = ex * ex + ey * ey;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * ex + (p.1 - a.1) * ey) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * ex - p.0, a.1 + t * ey - p.1);
    qx * qx + qy * qy
}

/// Even-odd point-in-polygon test for a closed outline.
pub fn point_in_polygon(poly: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.1 > p.1) != (b.1 > p.1) && p.0 < (b.0 - a.0) * (p.1 - a.1) / (b.1 - a.1) + a.0 {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Signed distance to a closed polygon outline (negative inside).
pub fn polygon_signed_distance(poly: &[(f64, f64)], p: (f64, f64)) -> f64 {
    let n = poly.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(segment_distance_sq(p, poly[i], poly[(i + 1) % n]));
    }
    let d = libm::sqrt(best);
    if point_in_polygon(poly, p) {
        -d
    } else {
        d
    }
}

fn blend_region(
    image: &mut FloatImage,
    bbox: (f64, f64, f64, f64),
    luminance: f64,
    edge: f64,
    mut signed_distance: impl FnMut(f64, f64) -> f64,
) {
    let (w, h) = (image.width(), image.height());
    if w == 0 || h == 0 {
        return;
    }
    let pad = edge / 2.0 + 1.0;
    let x0 = libm::floor(bbox.0 - pad).max(0.0);
    let y0 = libm::floor(bbox.1 - pad).max(0.0);
    let x1 = libm::ceil(bbox.2 + pad).min((w - 1) as f64);
    let y1 = libm::ceil(bbox.3 + pad).min((h - 1) as f64);
    if !(x0 <= x1 && y0 <= y1) {
        return;
    }
    for y in y0 as usize..=y1 as usize {
        for x in x0 as usize..=x1 as usize {
            let wgt = raised_cosine_weight(signed_distance(x as f64, y as f64), edge);
            if wgt > 0.0 {
                let v = image.get_mut(x, y);
                *v = *v * (1.0 - wgt) + luminance * wgt;
            }
        }
    }
}

impl Background {
    pub fn render(&self, width: usize, height: usize) -> FloatImage {
        match self {
            Self::Uniform { luminance } => Plane::filled(width, height, *luminance),
            Self::LinearGradient {
                from,
                to,
                axis_angle,
            } => {
                let (s, c) = libm::sincos(*axis_angle);
                let corners = [
                    (0.0, 0.0),
                    ((width.max(1) - 1) as f64, 0.0),
                    (0.0, (height.max(1) - 1) as f64),
                    ((width.max(1) - 1) as f64, (height.max(1) - 1) as f64),
                ];
                let proj = |x: f64, y: f64| x * c + y * s;
                let lo = corners.iter().map(|p| proj(p.0, p.1)).fold(f64::INFINITY, f64::min);
                let hi = corners.iter().map(|p| proj(p.0, p.1)).fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                Plane::from_fn(width, height, |x, y| {
                    let t = if span > 0.0 {
                        ((proj(x as f64, y as f64) - lo) / span).clamp(0.0, 1.0)
                    } else {
                        0.0
                    };
                    from + (to - from) * t
                })
            }
            Self::SplitLine {
                normal_angle,
                offset,
                dark,
                grey,
            } => {
                let (s, c) = libm::sincos(*normal_angle);
                Plane::from_fn(width, height, |x, y| {
                    if x as f64 * c + y as f64 * s > *offset {
                        *dark
                    } else {
                        *grey
                    }
                })
            }
            Self::LayeredEye {
                sclera,
                iris,
                collarette,
            } => {
                let mut img = Plane::filled(width, height, *sclera);
                let r = iris.beta;
                blend_region(
                    &mut img,
                    (iris.center.0 - r, iris.center.1 - r, iris.center.0 + r, iris.center.1 + r),
                    iris.luminance,
                    iris.edge_width,
                    |x, y| ellipse_signed_distance(iris, x, y),
                );
                let poly = &collarette.polygon;
                if !poly.is_empty() {
                    let bbox = poly.iter().fold(
                        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                        |b, p| (b.0.min(p.0), b.1.min(p.1), b.2.max(p.0), b.3.max(p.1)),
                    );
                    blend_region(&mut img, bbox, collarette.luminance, collarette.edge_width, |x, y| {
                        polygon_signed_distance(poly, (x, y))
                    });
                }
                img
            }
        }
    }
}

impl Scene {
    pub fn render_background(&self) -> FloatImage {
        self.background.render(self.width, self.height)
    }

    /// Composited image before noise, in 8-bit units.
    pub fn render_clean(&self) -> FloatImage {
        let mut img = self.render_background();
        for f in &self.dark_features {
            render::apply_dark(&mut img, f);
        }
        for b in &self.bright_features {
            render::apply_bright(&mut img, &b.feature);
        }
        img
    }

    /// Noisy, quantized image. Noise draws continue `rng`.
    pub fn render<R: Rng + ?Sized>(&self, rng: &mut R) -> GrayImage {
        let mut img = self.render_clean();
        render::add_pixel_noise(&mut img, self.noise_sigma, rng);
        render::finalize_image(&img)
    }

    /// Plateau set of the pupil: pixels where its clamped profile is 1.
    pub fn pupil_mask(&self) -> Mask {
        match &self.truth.pupil {
            Some(p) => render::render_profile(p, self.width, self.height).map(|&v| v >= 1.0),
            None => Plane::filled(self.width, self.height, false),
        }
    }

    pub fn crs(&self) -> impl Iterator<Item = &BrightFeature> {
        self.bright_features.iter().filter(|b| matches!(b.role, BrightRole::Cr(_)))
    }

    pub fn spurious(&self) -> impl Iterator<Item = &BrightFeature> {
        self.bright_features.iter().filter(|b| b.role == BrightRole::Spurious)
    }
}
