use std::f64::consts::PI;

use leyes_core::plane::{GrayImage, Mask, Plane};
use leyes_core::vision::{
    apply_disk_mask, apply_ellipse_mask, center_of_mass, components, fill_holes, fit_ellipse, morph_cleanup,
    sample_ellipse, EllipseParams,
};
use proptest::prelude::*;

/// Dilation by the 3×3 cross; such sets are unchanged by a cross opening.
fn dilate_cross(m: &Mask) -> Mask {
    let (w, h) = (m.width() as isize, m.height() as isize);
    Plane::from_fn(m.width(), m.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
            let (a, b) = (x + dx, y + dy);
            a >= 0 && b >= 0 && a < w && b < h && m.at(a as usize, b as usize)
        })
    })
}

fn largest(m: &Mask) -> Vec<(usize, usize)> {
    let mut best = components(m)
        .into_iter()
        .max_by_key(|c| c.pixels.len())
        .map(|c| c.pixels)
        .unwrap_or_default();
    best.sort_unstable();
    best
}

fn gray(w: usize, h: usize, levels: Vec<u8>) -> GrayImage {
    GrayImage::from_levels(w, h, levels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn symmetric_blob_has_center_of_mass_at_its_center(
        w in 3usize..40,
        h in 3usize..40,
        picks in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 1u8..10), 1..60),
    ) {
        let mut img = Plane::filled(w, h, 0.0);
        for (fx, fy, weight) in picks {
            let x = (fx * w as f64) as usize;
            let y = (fy * h as f64) as usize;
            img.set(x, y, f64::from(weight));
            img.set(w - 1 - x, h - 1 - y, f64::from(weight));
        }
        let (cx, cy) = center_of_mass(&img).unwrap();
        prop_assert!((cx - (w as f64 - 1.0) / 2.0).abs() < 1e-12);
        prop_assert!((cy - (h as f64 - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_inverts_sampling(
        cx in -100.0..300.0f64,
        cy in -100.0..300.0f64,
        minor in 1.0..80.0f64,
        ratio in 1.02..4.0f64,
        theta in 0.0..PI,
        n in 6usize..120,
    ) {
        let e = EllipseParams { center: (cx, cy), semi_major: minor * ratio, semi_minor: minor, theta };
        let f = fit_ellipse(&sample_ellipse(&e, n)).unwrap();
        let mut dt = (f.theta - theta).rem_euclid(PI);
        dt = dt.min(PI - dt);
        prop_assert!((f.center.0 - cx).abs() < 1e-6 && (f.center.1 - cy).abs() < 1e-6);
        prop_assert!((f.semi_major - e.semi_major).abs() < 1e-6);
        prop_assert!((f.semi_minor - minor).abs() < 1e-6);
        prop_assert!(dt < 1e-6);
    }

    #[test]
    fn cleanup_keeps_the_outline_of_the_largest_blob(
        cx in 15.0..33.0f64,
        cy in 15.0..33.0f64,
        r in 4.0..12.0f64,
        holes in prop::collection::vec((0.0..1.0f64, 0.0..(2.0 * PI)), 0..4),
        specks in prop::collection::vec((0usize..48, 0usize..48), 0..10),
    ) {
        let core = Plane::from_fn(48, 48, |x, y| (x as f64 - cx).hypot(y as f64 - cy) <= r);
        let blob = dilate_cross(&core);
        let mut mask = blob.clone();
        // Single-pixel holes deep inside the blob.
        for (fr, a) in holes {
            let rr = fr * (r - 4.0).max(0.0);
            let (x, y) = ((cx + rr * a.cos()).round() as usize, (cy + rr * a.sin()).round() as usize);
            if (x as f64 - cx).hypot(y as f64 - cy) <= r - 3.0 {
                mask.set(x, y, false);
            }
        }
        // Isolated specks well away from the blob.
        for (x, y) in specks {
            if (x as f64 - cx).hypot(y as f64 - cy) > r + 4.0 {
                mask.set(x, y, true);
            }
        }
        prop_assert_eq!(largest(&morph_cleanup(&mask)), largest(&fill_holes(&blob)));
    }

    #[test]
    fn masks_are_idempotent(
        levels in prop::collection::vec(any::<u8>(), 30 * 20),
        center in (0.0..30.0f64, 0.0..20.0f64),
        radius in 0.0..25.0f64,
        axes in (1.0..10.0f64, 1.0..2.0f64),
        theta in 0.0..PI,
        scale in 0.5..2.0f64,
        fill in any::<u8>(),
    ) {
        let img = gray(30, 20, levels);
        let mut once = img.clone();
        apply_disk_mask(&mut once, center, radius, fill);
        let mut twice = once.clone();
        apply_disk_mask(&mut twice, center, radius, fill);
        prop_assert_eq!(&once, &twice);

        let e = EllipseParams { center, semi_major: axes.0 * axes.1, semi_minor: axes.0, theta };
        let mut once = img;
        apply_ellipse_mask(&mut once, &e, scale, fill);
        let mut twice = once.clone();
        apply_ellipse_mask(&mut twice, &e, scale, fill);
        prop_assert_eq!(once, twice);
    }
}
