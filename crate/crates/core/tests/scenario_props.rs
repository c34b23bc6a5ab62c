use std::f64::consts::PI;

use leyes_core::scenario::{
    apply_stage, crs_overlap, place_nonoverlapping_crs, preset, sample_layout, sample_scene, BrightRole,
    LayoutParams, ScenarioId, SceneParams, Stage,
};
use leyes_core::render::{GaussianFeature, Polarity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Signed turn from each vertex to the next around the centroid; all
/// positive (screen clockwise, y down) and summing to one full turn.
fn clockwise(vertices: &[(f64, f64)]) -> bool {
    let n = vertices.len() as f64;
    let cx = vertices.iter().map(|v| v.0).sum::<f64>() / n;
    let cy = vertices.iter().map(|v| v.1).sum::<f64>() / n;
    let angles: Vec<f64> = vertices.iter().map(|v| (v.1 - cy).atan2(v.0 - cx)).collect();
    let mut total = 0.0;
    for i in 0..angles.len() {
        let step = (angles[(i + 1) % angles.len()] - angles[i]).rem_euclid(2.0 * PI);
        if step <= 0.0 || step >= PI {
            return false;
        }
        total += step;
    }
    (total - 2.0 * PI).abs() < 1e-9
}

fn pattern_layout(id: ScenarioId) -> LayoutParams {
    match preset(id).scene {
        SceneParams::Pattern(p) => p.layout,
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn house_starts_topmost_and_runs_clockwise(seed in any::<u64>(), ax in 20.0..108.0f64, ay in 20.0..108.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = sample_layout(&pattern_layout(ScenarioId::Chugh), (ax, ay), 128.0, &mut rng);
        prop_assert_eq!(l.vertices.len(), 5);
        let top = l.vertices.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(l.vertices[0].1, top);
        prop_assert!(clockwise(&l.vertices));
    }

    #[test]
    fn ring_starts_bottom_right_and_runs_clockwise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = sample_layout(&pattern_layout(ScenarioId::Eds2020), (64.0, 64.0), 128.0, &mut rng);
        prop_assert_eq!(l.vertices.len(), 8);
        let (x0, y0) = l.vertices[0];
        prop_assert!(x0 > 64.0 && y0 > 64.0);
        prop_assert!(clockwise(&l.vertices));
        for v in &l.vertices {
            let r = (v.0 - 64.0).hypot(v.1 - 64.0);
            prop_assert!((r - (l.vertices[0].0 - 64.0).hypot(l.vertices[0].1 - 64.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn placed_crs_never_overlap(seed in any::<u64>(), n in 1usize..6, beta in 1.0..6.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let candidates: Vec<GaussianFeature> = (0..n)
            .map(|i| GaussianFeature {
                x_c: 60.0 + i as f64,
                y_c: 60.0,
                theta: 0.0,
                alpha: beta / 1.1,
                beta,
                amplitude: 100.0,
                luminance: 255.0,
                polarity: Polarity::Bright,
            })
            .collect();
        let placed = place_nonoverlapping_crs(candidates, 128, 128, &mut rng).unwrap();
        prop_assert_eq!(placed.len(), n);
        for (i, a) in placed.iter().enumerate() {
            for b in &placed[i + 1..] {
                prop_assert!(!crs_overlap(a, b));
            }
        }
    }

    #[test]
    fn dropped_crs_are_not_rendered(seed in any::<u64>(), eds in any::<bool>(), stage2 in any::<bool>()) {
        let id = if eds { ScenarioId::Eds2020 } else { ScenarioId::Chugh };
        let stage = if stage2 { Stage::Two } else { Stage::One };
        let cfg = apply_stage(&preset(id), stage).unwrap();
        let scene = sample_scene(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for t in &scene.truth.crs {
            let rendered = scene.bright_features.iter().filter(|b| b.role == BrightRole::Cr(t.index)).count();
            prop_assert_eq!(rendered, usize::from(t.present));
        }
    }
}

#[test]
fn stage_one_is_identity_and_stage_two_is_stable() {
    for id in ScenarioId::ALL {
        let base = preset(id);
        assert_eq!(apply_stage(&base, Stage::One).unwrap(), base);
        if let Ok(two) = apply_stage(&base, Stage::Two) {
            assert_eq!(apply_stage(&base, Stage::Two).unwrap(), two);
            assert_eq!(apply_stage(&apply_stage(&base, Stage::One).unwrap(), Stage::Two).unwrap(), two);
        }
    }
}
