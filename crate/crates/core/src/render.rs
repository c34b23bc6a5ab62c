//! Elliptical-Gaussian light features: evaluation, rasterization,
//! layer compositing, pixel noise and 8-bit quantization.
//!
//! A feature's profile is `G(x, y) = A·exp(−q(x, y))` where `q` is the
//! rotated quadratic form built from `σ_α` and `σ_β`. The spreads are tied
//! to the plateau radii through `σ_r = r / sqrt(2·ln A)`, so the set where
//! `G ≥ 1` is exactly the ellipse with semi-axes `(α, β)` whatever the
//! amplitude; only the steepness of the edge changes with `A`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::{FloatImage, GrayImage, Plane};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RenderError {
    #[error("amplitude must be > 1 for a finite plateau spread (got {0})")]
    Amplitude(f64),
    #[error("plateau radius must be positive and finite (got {0})")]
    Radius(f64),
    #[error("minor radius {alpha} exceeds major radius {beta}")]
    AxisOrder { alpha: f64, beta: f64 },
    #[error("feature parameter is not finite")]
    NotFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Dark,
    Bright,
}

/// One elliptical light feature: a pupil, a corneal reflection or a
/// spurious reflection.
///
/// `theta` is the direction of the minor (`alpha`) axis measured from the
/// +x axis towards +y (image rows grow downwards).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFeature {
    pub x_c: f64,
    pub y_c: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub amplitude: f64,
    pub luminance: f64,
    pub polarity: Polarity,
}

/// Spread of the Gaussian whose clamped profile has a plateau of radius `r`.
pub fn plateau_sigma(r: f64, amplitude: f64) -> Result<f64, RenderError> {
    if !(amplitude > 1.0) || !amplitude.is_finite() {
        return Err(RenderError::Amplitude(amplitude));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(RenderError::Radius(r));
    }
    Ok(r / libm::sqrt(-2.0 * libm::log(1.0 / amplitude)))
}

impl GaussianFeature {
    pub fn validate(&self) -> Result<(), RenderError> {
        let all = [
            self.x_c,
            self.y_c,
            self.theta,
            self.alpha,
            self.beta,
            self.amplitude,
            self.luminance,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(RenderError::NotFinite);
        }
        plateau_sigma(self.alpha, self.amplitude)?;
        plateau_sigma(self.beta, self.amplitude)?;
        if self.alpha > self.beta {
            return Err(RenderError::AxisOrder {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        Ok(())
    }

    /// `(σ_α, σ_β)`.
    pub fn sigmas(&self) -> (f64, f64) {
        let k = libm::sqrt(2.0 * libm::log(self.amplitude));
        (self.alpha / k, self.beta / k)
    }

    /// Quadratic-form coefficients `(a, b, c)` in the conventional
    /// parameterization where the exponent is `a·dx² + 2b·dx·dy + c·dy²`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        let (sa, sb) = self.sigmas();
        let (s, c) = libm::sincos(self.theta);
        let s2 = libm::sin(2.0 * self.theta);
        let ia = 1.0 / (sa * sa);
        let ib = 1.0 / (sb * sb);
        let a = c * c * ia / 2.0 + s * s * ib / 2.0;
        let b = s2 * ia / 4.0 - s2 * ib / 4.0;
        let cc = s * s * ia / 2.0 + c * c * ib / 2.0;
        (a, b, cc)
    }

    /// Unclamped `G(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (a, b, c) = self.coefficients();
        let dx = x - self.x_c;
        let dy = y - self.y_c;
        self.amplitude * libm::exp(-(a * dx * dx + 2.0 * b * dx * dy + c * dy * dy))
    }

    /// `G` clamped to `[0, 1]`.
    ///
    /// Evaluated as `exp(ln A·(1 − ρ²))` on the normalized radius, which is
    /// the same function but makes the plateau test `ρ² ≤ 1` exact and
    /// independent of the amplitude.
    pub fn profile_at(&self, x: f64, y: f64) -> f64 {
        profile_from_rho_sq(self.normalized_radius_sq(x, y), libm::log(self.amplitude))
    }

    /// Normalized elliptical radius `ρ²`: `< 1` inside the plateau ellipse,
    /// `1` on it.
    pub fn normalized_radius_sq(&self, x: f64, y: f64) -> f64 {
        let (s, c) = libm::sincos(self.theta);
        rho_sq(x - self.x_c, y - self.y_c, c, s, 1.0 / self.alpha, 1.0 / self.beta)
    }

    /// Cull radius used by the rasterizer: `6·max(σ_α, σ_β)`.
    pub fn cull_radius(&self) -> f64 {
        let (sa, sb) = self.sigmas();
        6.0 * sa.max(sb)
    }
}

#[inline]
fn rho_sq(dx: f64, dy: f64, cos: f64, sin: f64, inv_alpha: f64, inv_beta: f64) -> f64 {
    let u = (dx * cos + dy * sin) * inv_alpha;
    let v = (dy * cos - dx * sin) * inv_beta;
    u * u + v * v
}

#[inline]
fn profile_from_rho_sq(rho2: f64, ln_amp: f64) -> f64 {
    if rho2 <= 1.0 {
        1.0
    } else {
        libm::exp(ln_amp * (1.0 - rho2))
    }
}

/// Evaluates `G(x, y)` for `f`.
pub fn eval_gaussian(f: &GaussianFeature, x: f64, y: f64) -> f64 {
    f.eval(x, y)
}

/// Precomputed rasterization state for one feature.
struct Rasterizer {
    x_c: f64,
    y_c: f64,
    cos: f64,
    sin: f64,
    inv_alpha: f64,
    inv_beta: f64,
    ln_amp: f64,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Rasterizer {
    fn new(f: &GaussianFeature, width: usize, height: usize) -> Option<Self> {
        if width == 0 || height == 0 {
            return None;
        }
        let (sin, cos) = libm::sincos(f.theta);
        let r = f.cull_radius();
        let lo_x = libm::ceil(f.x_c - r).max(0.0);
        let hi_x = libm::floor(f.x_c + r).min((width - 1) as f64);
        let lo_y = libm::ceil(f.y_c - r).max(0.0);
        let hi_y = libm::floor(f.y_c + r).min((height - 1) as f64);
        if !(lo_x <= hi_x && lo_y <= hi_y) {
            return None;
        }
        Some(Self {
            x_c: f.x_c,
            y_c: f.y_c,
            cos,
            sin,
            inv_alpha: 1.0 / f.alpha,
            inv_beta: 1.0 / f.beta,
            ln_amp: libm::log(f.amplitude),
            x0: lo_x as usize,
            x1: hi_x as usize,
            y0: lo_y as usize,
            y1: hi_y as usize,
        })
    }

    /// Calls `visit(index, p)` with the clamped profile `p > 0` of every
    /// pixel inside the cull box.
    #[inline]
    fn for_each(&self, width: usize, mut visit: impl FnMut(usize, f64)) {
        for y in self.y0..=self.y1 {
            let dy = y as f64 - self.y_c;
            let row = y * width;
            for x in self.x0..=self.x1 {
                let dx = x as f64 - self.x_c;
                let r2 = rho_sq(dx, dy, self.cos, self.sin, self.inv_alpha, self.inv_beta);
                let p = profile_from_rho_sq(r2, self.ln_amp);
                if p > 0.0 {
                    visit(row + x, p);
                }
            }
        }
    }
}

/// Rasterizes `clamp(G, 0, 1)` at pixel centers. Pixels beyond the
/// `6σ` cull box are zero.
pub fn render_profile(f: &GaussianFeature, width: usize, height: usize) -> FloatImage {
    let mut out = Plane::filled(width, height, 0.0);
    if let Some(r) = Rasterizer::new(f, width, height) {
        let buf = out.as_mut_slice();
        r.for_each(width, |i, p| buf[i] = p);
    }
    out
}

/// Blends a dark feature in place: `image ← image − (image − L)·p`.
pub fn apply_dark(image: &mut FloatImage, f: &GaussianFeature) {
    let (w, h) = (image.width(), image.height());
    if let Some(r) = Rasterizer::new(f, w, h) {
        let l = f.luminance;
        let buf = image.as_mut_slice();
        r.for_each(w, |i, p| {
            let v = buf[i];
            buf[i] = if p >= 1.0 { l } else { v - (v - l) * p };
        });
    }
}

/// Blends a bright feature in place: `image ← max(image, L·p)`.
pub fn apply_bright(image: &mut FloatImage, f: &GaussianFeature) {
    let (w, h) = (image.width(), image.height());
    if let Some(r) = Rasterizer::new(f, w, h) {
        let l = f.luminance;
        let buf = image.as_mut_slice();
        r.for_each(w, |i, p| {
            let v = l * p;
            if v > buf[i] {
                buf[i] = v;
            }
        });
    }
}

/// Collapses feature layers onto `background`: every dark feature in
/// order, then every bright feature in order.
pub fn composite_scene(
    background: &FloatImage,
    dark: &[GaussianFeature],
    bright: &[GaussianFeature],
) -> FloatImage {
    let mut image = background.clone();
    for f in dark {
        apply_dark(&mut image, f);
    }
    for f in bright {
        apply_bright(&mut image, f);
    }
    image
}

/// Adds independent `N(0, σ_n²)` noise to every pixel. `σ_n = 0` leaves
/// the image untouched and draws nothing from `rng`.
pub fn add_pixel_noise<R: Rng + ?Sized>(image: &mut FloatImage, sigma_n: f64, rng: &mut R) {
    if sigma_n <= 0.0 {
        return;
    }
    for v in image.as_mut_slice() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma_n * z;
    }
}

/// Quantizes one 8-bit-unit intensity: clamp to `[0, 255]`, round half
/// away from zero. Non-finite inputs map to 0 (NaN) or the clamp bound.
#[inline]
pub fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    libm::round(v.clamp(0.0, 255.0)) as u8
}

/// Clamps to `[0, 255]`, scales to `[0, 1]` and discretizes to 256 levels.
pub fn finalize_image(image: &FloatImage) -> GrayImage {
    let levels = image.as_slice().iter().map(|&v| quantize(v)).collect();
    GrayImage::from_levels(image.width(), image.height(), levels)
        .expect("dimensions carried over from a valid plane")
}
