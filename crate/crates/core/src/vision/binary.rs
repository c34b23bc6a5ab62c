//! Binary masks: thresholding, morphology, connected components and blob
//! measurements.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::VisionError;
use crate::plane::{FloatImage, GrayImage, Mask, Plane};

/// Which side of the threshold is foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// `value < threshold` (pupil).
    DarkBelow,
    /// `value >= threshold` (CR).
    BrightAbove,
}

impl Polarity {
    #[inline]
    fn test(self, v: f64, t: f64) -> bool {
        match self {
            Self::DarkBelow => v < t,
            Self::BrightAbove => v >= t,
        }
    }
}

/// Thresholds an 8-bit image on its normalized values `level / 255`.
pub fn binarize(img: &GrayImage, threshold: f64, mode: Polarity) -> Mask {
    let data = img.values().map(|v| mode.test(v, threshold)).collect();
    Plane::from_vec(img.width(), img.height(), data).expect("dimensions preserved")
}

pub fn binarize_plane(img: &FloatImage, threshold: f64, mode: Polarity) -> Mask {
    img.map(|&v| mode.test(v, threshold))
}

/// Opening with the 3×3 cross. Erosion treats pixels beyond the border as
/// foreground so blobs touching the frame edge are not eaten from outside.
pub fn open_cross(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let on = |m: &Mask, x: isize, y: isize, outside: bool| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            outside
        } else {
            m.at(x as usize, y as usize)
        }
    };
    let cross = |m: &Mask, x: usize, y: usize, outside: bool, all: bool| {
        let (x, y) = (x as isize, y as isize);
        let n = [(x, y), (x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)];
        if all {
            n.iter().all(|&(a, b)| on(m, a, b, outside))
        } else {
            n.iter().any(|&(a, b)| on(m, a, b, outside))
        }
    };
    let eroded = Plane::from_fn(w, h, |x, y| cross(mask, x, y, true, true));
    Plane::from_fn(w, h, |x, y| cross(&eroded, x, y, false, false))
}

/// Fills background regions that are not 4-connected to the image border.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width(), mask.height());
    let mut outside = vec![false; w * h];
    let mut stack = Vec::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, stack: &mut Vec<usize>| {
        let i = y * w + x;
        if !mask.as_slice()[i] && !outside[i] {
            outside[i] = true;
            stack.push(i);
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut stack);
        seed(x, h.saturating_sub(1), &mut outside, &mut stack);
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut stack);
        seed(w.saturating_sub(1), y, &mut outside, &mut stack);
    }
    while let Some(i) = stack.pop() {
        let (x, y) = (i % w, i / w);
        if x > 0 {
            seed(x - 1, y, &mut outside, &mut stack);
        }
        if x + 1 < w {
            seed(x + 1, y, &mut outside, &mut stack);
        }
        if y > 0 {
            seed(x, y - 1, &mut outside, &mut stack);
        }
        if y + 1 < h {
            seed(x, y + 1, &mut outside, &mut stack);
        }
    }
    let data = outside.into_iter().map(|o| !o).collect();
    Plane::from_vec(w, h, data).expect("dimensions preserved")
}

/// Speckle removal (one cross opening) followed by hole filling.
pub fn morph_cleanup(mask: &Mask) -> Mask {
    fill_holes(&open_cross(mask))
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobStats {
    /// Pixel count.
    pub area: f64,
    pub centroid: (f64, f64),
    /// Length of the iso-contour through the pixel-edge midpoints.
    pub perimeter: f64,
    /// `4π·A/P²` with `A` the area enclosed by that contour, so the value
    /// never exceeds 1.
    pub circularity: f64,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub stats: BlobStats,
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    /// Points on the blob boundary (outer and any hole boundaries), at the
    /// midpoints between foreground and background pixel centers.
    pub fn boundary_points(&self) -> Vec<(f64, f64)> {
        let local = LocalMask::new(&self.pixels, self.stats.bbox);
        contour_points(&local.mask)
            .into_iter()
            .map(|(x, y)| (x + local.ox, y + local.oy))
            .collect()
    }

    pub fn to_mask(&self, width: usize, height: usize) -> Mask {
        let mut m = Plane::filled(width, height, false);
        for &(x, y) in &self.pixels {
            m.set(x, y, true);
        }
        m
    }
}

/// The component's pixels in a bbox-sized mask padded by one pixel.
struct LocalMask {
    mask: Mask,
    ox: f64,
    oy: f64,
}

impl LocalMask {
    fn new(pixels: &[(usize, usize)], b: BoundingBox) -> Self {
        let w = b.x1 - b.x0 + 3;
        let h = b.y1 - b.y0 + 3;
        let mut mask = Plane::filled(w, h, false);
        for &(x, y) in pixels {
            mask.set(x - b.x0 + 1, y - b.y0 + 1, true);
        }
        Self {
            mask,
            ox: b.x0 as f64 - 1.0,
            oy: b.y0 as f64 - 1.0,
        }
    }
}

/// Midpoints between every 4-adjacent foreground/background pixel pair.
/// Pixels beyond the border count as background.
pub fn contour_points(mask: &Mask) -> Vec<(f64, f64)> {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let on = |x: isize, y: isize| x >= 0 && y >= 0 && x < w && y < h && mask.at(x as usize, y as usize);
    let mut out = Vec::new();
    for y in -1..h {
        for x in -1..w {
            let here = on(x, y);
            if here != on(x + 1, y) && y >= 0 {
                out.push((x as f64 + 0.5, y as f64));
            }
            if here != on(x, y + 1) && x >= 0 {
                out.push((x as f64, y as f64 + 0.5));
            }
        }
    }
    out
}

/// Marching-squares length and enclosed area of the 0.5 iso-contour.
/// Diagonal corner pairs are joined, matching 8-connected foreground.
fn contour_measures(mask: &Mask) -> (f64, f64) {
    let (w, h) = (mask.width(), mask.height());
    let (mut length, mut area) = (0.0, 0.0);
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let tl = mask.at(x, y);
            let tr = mask.at(x + 1, y);
            let br = mask.at(x + 1, y + 1);
            let bl = mask.at(x, y + 1);
            let n = tl as u8 + tr as u8 + br as u8 + bl as u8;
            let (l, a) = match n {
                0 => (0.0, 0.0),
                1 => (FRAC_1_SQRT_2, 0.125),
                2 if tl == br => (SQRT_2, 0.75),
                2 => (1.0, 0.5),
                3 => (FRAC_1_SQRT_2, 0.875),
                _ => (0.0, 1.0),
            };
            length += l;
            area += a;
        }
    }
    (length, area)
}

/// Measures one pixel set (assumed 8-connected).
pub fn blob_stats(pixels: &[(usize, usize)]) -> BlobStats {
    let mut b = BoundingBox {
        x0: usize::MAX,
        y0: usize::MAX,
        x1: 0,
        y1: 0,
    };
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in pixels {
        b.x0 = b.x0.min(x);
        b.y0 = b.y0.min(y);
        b.x1 = b.x1.max(x);
        b.y1 = b.y1.max(y);
        sx += x as f64;
        sy += y as f64;
    }
    let n = pixels.len() as f64;
    let (perimeter, enclosed) = if pixels.is_empty() {
        (0.0, 0.0)
    } else {
        contour_measures(&LocalMask::new(pixels, b).mask)
    };
    let circularity = if perimeter > 0.0 {
        4.0 * PI * enclosed / (perimeter * perimeter)
    } else {
        0.0
    };
    BlobStats {
        area: n,
        centroid: (sx / n, sy / n),
        perimeter,
        circularity,
        bbox: b,
    }
}

/// 8-connected foreground components, ordered by their first pixel in
/// row-major order.
pub fn components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.as_slice()[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        out.push(Component {
            stats: blob_stats(&pixels),
            pixels,
        });
    }
    out
}

/// Absolute selection criteria for one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobCriteria {
    pub min_area: f64,
    pub max_area: f64,
    pub circularity_min: f64,
}

impl BlobCriteria {
    pub fn accepts(&self, s: &BlobStats) -> bool {
        s.area >= self.min_area && s.area <= self.max_area && s.circularity >= self.circularity_min
    }
}

/// Largest component meeting the criteria; the first one in scan order
/// wins ties.
pub fn select_feature_component(mask: &Mask, criteria: &BlobCriteria) -> Option<Component> {
    let mut best: Option<Component> = None;
    for c in components(mask) {
        if criteria.accepts(&c.stats) && best.as_ref().is_none_or(|b| c.stats.area > b.stats.area) {
            best = Some(c);
        }
    }
    best
}

pub fn select_feature_blob(mask: &Mask, criteria: &BlobCriteria) -> Option<BlobStats> {
    select_feature_component(mask, criteria).map(|c| c.stats)
}

/// Intensity-weighted centroid `(Σ x·I / Σ I, Σ y·I / Σ I)`.
pub fn center_of_mass(img: &FloatImage) -> Result<(f64, f64), VisionError> {
    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = img.at(x, y);
            m += v;
            mx += x as f64 * v;
            my += y as f64 * v;
        }
    }
    if m == 0.0 || !m.is_finite() {
        return Err(VisionError::ZeroMass);
    }
    Ok((mx / m, my / m))
}
