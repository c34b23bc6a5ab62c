//! Fixed-size cutouts around a feature, with circular or elliptical masks.

use super::EllipseParams;
use crate::plane::GrayImage;

pub const CUTOUT_SIZE: usize = 180;
pub const CR_MASK_RADIUS: f64 = 48.0;
pub const PUPIL_MASK_SCALE: f64 = 1.4;
const MID_GREY: u8 = 128;

/// `size × size` crop whose pixel `(size/2, size/2)` is source pixel
/// `(cx, cy)`. Source coordinates beyond the border replicate the edge.
pub fn crop_replicate(img: &GrayImage, cx: i64, cy: i64, size: usize) -> GrayImage {
    let half = (size / 2) as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut levels = alloc::vec::Vec::with_capacity(size * size);
    for row in 0..size as i64 {
        let sy = (cy - half + row).clamp(0, h - 1) as usize;
        for col in 0..size as i64 {
            let sx = (cx - half + col).clamp(0, w - 1) as usize;
            levels.push(img.level(sx, sy));
        }
    }
    GrayImage::from_levels(size, size, levels).expect("size matches")
}

/// Sets every pixel farther than `radius` from `center` to `fill`.
pub fn apply_disk_mask(img: &mut GrayImage, center: (f64, f64), radius: f64, fill: u8) {
    let w = img.width();
    let r2 = radius * radius;
    for (i, v) in img.levels_mut().iter_mut().enumerate() {
        let dx = (i % w) as f64 - center.0;
        let dy = (i / w) as f64 - center.1;
        if dx * dx + dy * dy > r2 {
            *v = fill;
        }
    }
}

/// Sets every pixel outside the ellipse scaled by `scale` to `fill`.
pub fn apply_ellipse_mask(img: &mut GrayImage, ellipse: &EllipseParams, scale: f64, fill: u8) {
    let w = img.width();
    for (i, v) in img.levels_mut().iter_mut().enumerate() {
        if ellipse.normalized_radius_sq((i % w) as f64, (i / w) as f64, scale) > 1.0 {
            *v = fill;
        }
    }
}

fn rounded(center: (f64, f64)) -> (i64, i64) {
    (libm::round(center.0) as i64, libm::round(center.1) as i64)
}

/// 180×180 crop around a CR; everything beyond a 48-pixel radius is black.
pub fn make_cr_cutout(img: &GrayImage, center: (f64, f64)) -> GrayImage {
    let (cx, cy) = rounded(center);
    let mut out = crop_replicate(img, cx, cy, CUTOUT_SIZE);
    let mid = (CUTOUT_SIZE / 2) as f64;
    apply_disk_mask(&mut out, (mid, mid), CR_MASK_RADIUS, 0);
    out
}

/// 180×180 crop around the pupil; everything outside the pupil ellipse
/// scaled by 1.4 is mid grey.
pub fn make_pupil_cutout(img: &GrayImage, center: (f64, f64), ellipse: &EllipseParams) -> GrayImage {
    let (cx, cy) = rounded(center);
    let mut out = crop_replicate(img, cx, cy, CUTOUT_SIZE);
    let mid = (CUTOUT_SIZE / 2) as f64;
    let local = EllipseParams {
        center: (ellipse.center.0 - cx as f64 + mid, ellipse.center.1 - cy as f64 + mid),
        ..*ellipse
    };
    apply_ellipse_mask(&mut out, &local, PUPIL_MASK_SCALE, MID_GREY);
    out
}
