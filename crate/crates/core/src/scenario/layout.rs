//! Illuminator layouts: the CR pattern a multi-LED rig projects on the
//! cornea. Rotation angles are in degrees; positive values rotate
//! clockwise on screen (image y grows downwards).

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::LayoutParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutShape {
    House { base_w: f64, rect_h: f64, roof_h: f64 },
    Ring { radius: f64, n: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonLayout {
    pub shape: LayoutShape,
    pub rotation_deg: f64,
    pub anchor: (f64, f64),
    pub d: f64,
    /// CR positions in labeling order (clockwise).
    pub vertices: Vec<(f64, f64)>,
}

fn rotate(p: (f64, f64), deg: f64) -> (f64, f64) {
    let (s, c) = libm::sincos(deg * PI / 180.0);
    (p.0 * c - p.1 * s, p.0 * s + p.1 * c)
}

impl PolygonLayout {
    pub fn new(shape: LayoutShape, rotation_deg: f64, anchor: (f64, f64), d: f64) -> Self {
        let local: Vec<(f64, f64)> = match shape {
            LayoutShape::House {
                base_w,
                rect_h,
                roof_h,
            } => {
                let (hw, hh) = (base_w / 2.0, rect_h / 2.0);
                // apex, then clockwise on screen
                alloc::vec![(0.0, -hh - roof_h), (hw, -hh), (hw, hh), (-hw, hh), (-hw, -hh)]
            }
            LayoutShape::Ring { radius, n } => (0..n)
                .map(|k| {
                    // vertex 0 at the bottom-right diagonal
                    let a = PI / 4.0 + 2.0 * PI * f64::from(k) / f64::from(n);
                    (radius * libm::cos(a), radius * libm::sin(a))
                })
                .collect(),
        };
        let mut vertices: Vec<(f64, f64)> = local
            .into_iter()
            .map(|p| {
                let r = rotate(p, rotation_deg);
                (anchor.0 + r.0, anchor.1 + r.1)
            })
            .collect();
        if matches!(shape, LayoutShape::House { .. }) {
            // Label order starts at whichever vertex ends up topmost.
            let top = vertices
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            vertices.rotate_left(top);
        }
        Self {
            shape,
            rotation_deg,
            anchor,
            d,
            vertices,
        }
    }
}

fn signed_rotation<R: Rng + ?Sized>(max_deg: f64, rng: &mut R) -> f64 {
    let mag = max_deg * rng.random::<f64>();
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Draws a house-shaped 5-vertex layout around `anchor`.
pub fn sample_house_layout<R: Rng + ?Sized>(
    params: &LayoutParams,
    anchor: (f64, f64),
    d: f64,
    rng: &mut R,
) -> PolygonLayout {
    let LayoutParams::House {
        width_fraction,
        height_ratio,
        roof_ratio,
        rotation_max_deg,
    } = *params
    else {
        panic!("sample_house_layout needs house parameters");
    };
    let w = width_fraction.sample(rng) * d;
    let h = height_ratio.sample(rng) * w;
    let roof = roof_ratio.sample(rng) * w;
    let rot = signed_rotation(rotation_max_deg, rng);
    PolygonLayout::new(
        LayoutShape::House {
            base_w: w,
            rect_h: h,
            roof_h: roof,
        },
        rot,
        anchor,
        d,
    )
}

/// Draws a regular ring layout around `anchor`.
pub fn sample_ring_layout<R: Rng + ?Sized>(
    params: &LayoutParams,
    anchor: (f64, f64),
    d: f64,
    rng: &mut R,
) -> PolygonLayout {
    let LayoutParams::Ring {
        radius_fraction,
        count,
        rotation_max_deg,
    } = *params
    else {
        panic!("sample_ring_layout needs ring parameters");
    };
    let radius = radius_fraction.sample(rng) * d;
    let rot = signed_rotation(rotation_max_deg, rng);
    PolygonLayout::new(LayoutShape::Ring { radius, n: count }, rot, anchor, d)
}

pub fn sample_layout<R: Rng + ?Sized>(
    params: &LayoutParams,
    anchor: (f64, f64),
    d: f64,
    rng: &mut R,
) -> PolygonLayout {
    match params {
        LayoutParams::House { .. } => sample_house_layout(params, anchor, d, rng),
        LayoutParams::Ring { .. } => sample_ring_layout(params, anchor, d, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{preset, SceneParams};
    use crate::scenario::ScenarioId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn house_geometry_unrotated() {
        let l = PolygonLayout::new(
            LayoutShape::House {
                base_w: 32.0,
                rect_h: 16.0,
                roof_h: 8.0,
            },
            0.0,
            (64.0, 64.0),
            128.0,
        );
        let expected = [(64.0, 48.0), (80.0, 56.0), (80.0, 72.0), (48.0, 72.0), (48.0, 56.0)];
        assert_eq!(l.vertices.len(), 5);
        for (v, e) in l.vertices.iter().zip(expected) {
            assert!(close(*v, e), "{v:?} vs {e:?}");
        }
    }

    #[test]
    fn house_topmost_first_when_rotated_past_apex() {
        // At 45° the top-left corner rises above the apex whenever w/2 > roof.
        let l = PolygonLayout::new(
            LayoutShape::House {
                base_w: 40.0,
                rect_h: 20.0,
                roof_h: 8.0,
            },
            45.0,
            (64.0, 64.0),
            128.0,
        );
        let ys: Vec<f64> = l.vertices.iter().map(|v| v.1).collect();
        assert!(ys.iter().all(|&y| y >= ys[0]));
    }

    #[test]
    fn ring_is_regular_and_starts_bottom_right() {
        let l = PolygonLayout::new(LayoutShape::Ring { radius: 20.0, n: 8 }, 0.0, (64.0, 64.0), 128.0);
        assert_eq!(l.vertices.len(), 8);
        for v in &l.vertices {
            assert!((libm::hypot(v.0 - 64.0, v.1 - 64.0) - 20.0).abs() < 1e-12);
        }
        let v0 = l.vertices[0];
        assert!(v0.0 > 64.0 && v0.1 > 64.0);
        for k in 0..8 {
            let a = l.vertices[k];
            let b = l.vertices[(k + 1) % 8];
            let ta = libm::atan2(a.1 - 64.0, a.0 - 64.0);
            let tb = libm::atan2(b.1 - 64.0, b.0 - 64.0);
            let mut dt = (tb - ta) * 180.0 / PI;
            if dt < 0.0 {
                dt += 360.0;
            }
            assert!((dt - 45.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampled_house_ranges() {
        let SceneParams::Pattern(p) = preset(ScenarioId::Chugh).scene else { panic!() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let l = sample_house_layout(&p.layout, (64.0, 64.0), 128.0, &mut rng);
            let LayoutShape::House { base_w, rect_h, roof_h } = l.shape else { panic!() };
            assert!((12.8..=57.6).contains(&base_w));
            assert!(rect_h >= 0.5 * base_w && rect_h <= 0.6 * base_w);
            assert!(roof_h >= 0.2 * base_w && roof_h <= 0.5 * base_w);
            assert!(l.rotation_deg.abs() <= 45.0);
        }
    }

    #[test]
    fn sampled_ring_ranges() {
        let SceneParams::Pattern(p) = preset(ScenarioId::Eds2020).scene else { panic!() };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let l = sample_ring_layout(&p.layout, (64.0, 64.0), 128.0, &mut rng);
            let LayoutShape::Ring { radius, n } = l.shape else { panic!() };
            assert_eq!(n, 8);
            assert!((19.2..=51.2).contains(&radius));
            assert!(l.rotation_deg.abs() <= 0.57);
        }
    }
}
