//! Scene samplers for every preset family.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::collarette::{build_collarette, IrisSpec};
use super::config::{
    BlobParams, CrSceneParams, FullEyeParams, PatternSceneParams, PupilSceneParams, ScenarioConfig,
    SceneParams,
};
use super::layout::{sample_layout, PolygonLayout};
use super::scene::{Background, BrightFeature, BrightRole, CrTruth, GroundTruth, Scene};
use super::ScenarioError;
use crate::render::{GaussianFeature, Polarity};

/// Resampling budget shared by CR placement, layout redraws and
/// spurious-reflection rejection sampling.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

/// Minimum center distance between two CRs: `1.25·(β_i + β_j)`.
#[inline]
pub fn min_cr_distance(a: &GaussianFeature, b: &GaussianFeature) -> f64 {
    1.25 * (a.beta + b.beta)
}

#[inline]
pub fn crs_overlap(a: &GaussianFeature, b: &GaussianFeature) -> bool {
    libm::hypot(a.x_c - b.x_c, a.y_c - b.y_c) < min_cr_distance(a, b)
}

fn uniform_in<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn uniform_position<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> (f64, f64) {
    (
        uniform_in(0.0, (width.max(1) - 1) as f64, rng),
        uniform_in(0.0, (height.max(1) - 1) as f64, rng),
    )
}

fn image_center(width: usize, height: usize) -> (f64, f64) {
    ((width.max(1) - 1) as f64 / 2.0, (height.max(1) - 1) as f64 / 2.0)
}

/// Center of a feature: within `±span/2` of the image center when a span
/// is given, otherwise uniform with `margin` clearance from every border.
fn feature_center<R: Rng + ?Sized>(
    span: Option<f64>,
    margin: f64,
    width: usize,
    height: usize,
    rng: &mut R,
) -> (f64, f64) {
    let (cx, cy) = image_center(width, height);
    match span {
        Some(s) => (cx + uniform_in(-s / 2.0, s / 2.0, rng), cy + uniform_in(-s / 2.0, s / 2.0, rng)),
        None => {
            let axis = |c: f64, size: usize, rng: &mut R| {
                let hi = (size.max(1) - 1) as f64 - margin;
                if hi >= margin {
                    uniform_in(margin, hi, rng)
                } else {
                    c
                }
            };
            let x = axis(cx, width, rng);
            let y = axis(cy, height, rng);
            (x, y)
        }
    }
}

/// Draws one elliptical feature's shape, orientation and luminance.
pub fn sample_blob<R: Rng + ?Sized>(
    params: &BlobParams,
    center: (f64, f64),
    polarity: Polarity,
    rng: &mut R,
) -> GaussianFeature {
    let alpha = params.minor.sample(rng);
    let beta = alpha * params.major_ratio.sample(rng);
    let amplitude = params.amplitude.sample(rng);
    let theta = PI * rng.random::<f64>();
    let luminance = params.luminance.sample(rng).clamp(0.0, 255.0);
    GaussianFeature {
        x_c: center.0,
        y_c: center.1,
        theta,
        alpha,
        beta,
        amplitude,
        luminance,
        polarity,
    }
}

/// Moves CRs that sit closer than `1.25·(β_i + β_j)` to an earlier CR to
/// fresh uniform positions until the set is overlap-free.
pub fn place_nonoverlapping_crs<R: Rng + ?Sized>(
    candidates: Vec<GaussianFeature>,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<GaussianFeature>, ScenarioError> {
    let mut placed: Vec<GaussianFeature> = Vec::with_capacity(candidates.len());
    let mut attempts = 0;
    for mut c in candidates {
        while placed.iter().any(|p| crs_overlap(p, &c)) {
            attempts += 1;
            if attempts > PLACEMENT_ATTEMPTS {
                return Err(ScenarioError::PlacementExhausted { attempts: PLACEMENT_ATTEMPTS });
            }
            let (x, y) = uniform_position(width, height, rng);
            c.x_c = x;
            c.y_c = y;
        }
        placed.push(c);
    }
    Ok(placed)
}

/// Rejection-samples positions with acceptance `1 − clamp(G_pupil, 0, 1)`,
/// so reflections avoid the pupil.
pub fn sample_spurious_positions<R: Rng + ?Sized>(
    pupil: Option<&GaussianFeature>,
    count: usize,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>, ScenarioError> {
    // Generous cap: acceptance is only small when the pupil covers most of
    // the canvas.
    const BUDGET: usize = 100 * PLACEMENT_ATTEMPTS;
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries > BUDGET * count.max(1) {
            return Err(ScenarioError::PlacementExhausted { attempts: BUDGET });
        }
        let (x, y) = uniform_position(width, height, rng);
        let accept = 1.0 - pupil.map_or(0.0, |p| p.profile_at(x, y));
        if rng.random::<f64>() < accept {
            out.push((x, y));
        }
    }
    Ok(out)
}

pub fn sample_cr_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    let SceneParams::Cr(p) = &cfg.scene else {
        return Err(ScenarioError::WrongFamily { expected: "cr", got: cfg.id });
    };
    sample_cr_inner(cfg, p, rng)
}

fn sample_cr_inner<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    p: &CrSceneParams,
    rng: &mut R,
) -> Result<Scene, ScenarioError> {
    let (w, h) = (cfg.width, cfg.height);
    let r = p.radius.sample(rng);
    let amplitude = p.amplitude.sample(rng);
    let center = match p.center_span {
        Some(_) => feature_center(p.center_span, 0.0, w, h, rng),
        None => uniform_position(w, h, rng),
    };
    let cr = GaussianFeature {
        x_c: center.0,
        y_c: center.1,
        theta: 0.0,
        alpha: r,
        beta: r,
        amplitude,
        luminance: 255.0,
        polarity: Polarity::Bright,
    };
    let normal_angle = 2.0 * PI * rng.random::<f64>();
    let dist = p.line_distance.sample(rng) * r;
    let cr_on_dark_side = rng.random::<bool>();
    let (s, c) = libm::sincos(normal_angle);
    let along = center.0 * c + center.1 * s;
    let offset = if cr_on_dark_side { along - dist } else { along + dist };
    let dark = p.dark_luminance.sample(rng).clamp(0.0, 255.0);
    let grey = p.grey_luminance.sample(rng).clamp(0.0, 255.0);
    let noise_sigma = cfg.noise_sigma.sample(rng);
    Ok(Scene {
        scenario: cfg.id,
        stage: cfg.stage,
        width: w,
        height: h,
        background: Background::SplitLine {
            normal_angle,
            offset,
            dark,
            grey,
        },
        dark_features: Vec::new(),
        bright_features: alloc::vec![BrightFeature {
            feature: cr,
            role: BrightRole::Cr(0),
        }],
        noise_sigma,
        truth: GroundTruth {
            pupil: None,
            crs: alloc::vec![CrTruth {
                index: 0,
                x: center.0,
                y: center.1,
                present: true,
            }],
        },
    })
}

fn random_crs<R: Rng + ?Sized>(
    params: &BlobParams,
    count: u32,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<Vec<GaussianFeature>, ScenarioError> {
    let mut cands = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let pos = uniform_position(width, height, rng);
        cands.push(sample_blob(params, pos, Polarity::Bright, rng));
    }
    place_nonoverlapping_crs(cands, width, height, rng)
}

fn cr_truth_and_features(crs: &[GaussianFeature]) -> (Vec<BrightFeature>, Vec<CrTruth>) {
    crs.iter()
        .enumerate()
        .map(|(i, f)| {
            (
                BrightFeature {
                    feature: *f,
                    role: BrightRole::Cr(i as u32),
                },
                CrTruth {
                    index: i as u32,
                    x: f.x_c,
                    y: f.y_c,
                    present: true,
                },
            )
        })
        .unzip()
}

pub fn sample_pupil_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    let SceneParams::Pupil(p) = &cfg.scene else {
        return Err(ScenarioError::WrongFamily { expected: "pupil", got: cfg.id });
    };
    sample_pupil_inner(cfg, p, rng)
}

fn sample_pupil_inner<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    p: &PupilSceneParams,
    rng: &mut R,
) -> Result<Scene, ScenarioError> {
    let (w, h) = (cfg.width, cfg.height);
    let mut pupil = sample_blob(&p.pupil, (0.0, 0.0), Polarity::Dark, rng);
    let (x, y) = feature_center(p.center_span, pupil.beta, w, h, rng);
    pupil.x_c = x;
    pupil.y_c = y;
    let n = p.cr_count.sample(rng);
    let crs = random_crs(&p.crs, n, w, h, rng)?;
    let background = p.background.sample(rng);
    let noise_sigma = cfg.noise_sigma.sample(rng);
    let (bright, truth) = cr_truth_and_features(&crs);
    Ok(Scene {
        scenario: cfg.id,
        stage: cfg.stage,
        width: w,
        height: h,
        background: Background::Uniform { luminance: background },
        dark_features: alloc::vec![pupil],
        bright_features: bright,
        noise_sigma,
        truth: GroundTruth {
            pupil: Some(pupil),
            crs: truth,
        },
    })
}

pub fn sample_full_eye_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    let SceneParams::FullEye(p) = &cfg.scene else {
        return Err(ScenarioError::WrongFamily { expected: "full_eye", got: cfg.id });
    };
    sample_full_eye_inner(cfg, p, rng)
}

fn sample_full_eye_inner<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    p: &FullEyeParams,
    rng: &mut R,
) -> Result<Scene, ScenarioError> {
    let (w, h) = (cfg.width, cfg.height);
    let sclera = p.sclera.sample(rng).clamp(0.0, 255.0);
    let alpha_i = p.iris_minor.sample(rng);
    let beta_i = alpha_i * p.iris_major_ratio.sample(rng);
    let iris = IrisSpec {
        center: uniform_position(w, h, rng),
        alpha: alpha_i,
        beta: beta_i,
        theta: PI * rng.random::<f64>(),
        luminance: p.iris_luminance.sample(rng).clamp(0.0, 255.0),
        edge_width: p.iris_edge.sample(rng),
    };
    let collarette = build_collarette(&iris, &p.collarette, rng);
    let mut pupil = sample_blob(&p.pupil, (0.0, 0.0), Polarity::Dark, rng);
    let (x, y) = feature_center(None, pupil.beta, w, h, rng);
    pupil.x_c = x;
    pupil.y_c = y;
    let n = p.cr_count.sample(rng);
    let crs = random_crs(&p.crs, n, w, h, rng)?;
    let noise_sigma = cfg.noise_sigma.sample(rng);
    let (bright, truth) = cr_truth_and_features(&crs);
    Ok(Scene {
        scenario: cfg.id,
        stage: cfg.stage,
        width: w,
        height: h,
        background: Background::LayeredEye {
            sclera,
            iris,
            collarette,
        },
        dark_features: alloc::vec![pupil],
        bright_features: bright,
        noise_sigma,
        truth: GroundTruth {
            pupil: Some(pupil),
            crs: truth,
        },
    })
}

/// Pupil, layout-patterned CRs with dropout, spurious reflections and a
/// gradient background (the chugh and eds2020 presets).
pub fn sample_pattern_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    let SceneParams::Pattern(p) = &cfg.scene else {
        return Err(ScenarioError::WrongFamily { expected: "pattern", got: cfg.id });
    };
    sample_pattern_inner(cfg, p, rng)
}

pub fn sample_chugh_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    sample_pattern_scene(cfg, rng)
}

pub fn sample_eds2020_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    sample_pattern_scene(cfg, rng)
}

fn sample_anchor<R: Rng + ?Sized>(pupil: &GaussianFeature, radius: f64, rng: &mut R) -> (f64, f64) {
    let r = radius * libm::sqrt(rng.random::<f64>());
    let a = 2.0 * PI * rng.random::<f64>();
    (pupil.x_c + r * libm::cos(a), pupil.y_c + r * libm::sin(a))
}

fn layout_violates(layout: &PolygonLayout, shapes: &[GaussianFeature], present: &[bool]) -> bool {
    let placed: Vec<GaussianFeature> = shapes
        .iter()
        .zip(&layout.vertices)
        .zip(present)
        .filter(|(_, &on)| on)
        .map(|((f, v), _)| GaussianFeature { x_c: v.0, y_c: v.1, ..*f })
        .collect();
    placed
        .iter()
        .enumerate()
        .any(|(i, a)| placed[i + 1..].iter().any(|b| crs_overlap(a, b)))
}

fn sample_pattern_inner<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    p: &PatternSceneParams,
    rng: &mut R,
) -> Result<Scene, ScenarioError> {
    let (w, h) = (cfg.width, cfg.height);
    let mut pupil = sample_blob(&p.pupil, (0.0, 0.0), Polarity::Dark, rng);
    let (x, y) = feature_center(None, pupil.beta, w, h, rng);
    pupil.x_c = x;
    pupil.y_c = y;

    let k = p.layout.vertex_count();
    let shapes: Vec<GaussianFeature> = (0..k)
        .map(|_| sample_blob(&p.crs, (0.0, 0.0), Polarity::Bright, rng))
        .collect();
    let present: Vec<bool> = (0..k).map(|_| rng.random::<f64>() >= p.dropout).collect();

    let jitter = p.anchor_jitter_fraction * p.d;
    let mut layout = None;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let anchor = sample_anchor(&pupil, jitter, rng);
        let candidate = sample_layout(&p.layout, anchor, p.d, rng);
        if !layout_violates(&candidate, &shapes, &present) {
            layout = Some(candidate);
            break;
        }
    }
    let layout = layout.ok_or(ScenarioError::PlacementExhausted { attempts: PLACEMENT_ATTEMPTS })?;

    let mut bright = Vec::with_capacity(k + p.spurious_count.max as usize);
    let mut crs = Vec::with_capacity(k);
    for (i, ((shape, v), &on)) in shapes.iter().zip(&layout.vertices).zip(&present).enumerate() {
        let f = GaussianFeature {
            x_c: v.0,
            y_c: v.1,
            ..*shape
        };
        if on {
            bright.push(BrightFeature {
                feature: f,
                role: BrightRole::Cr(i as u32),
            });
        }
        crs.push(CrTruth {
            index: i as u32,
            x: v.0,
            y: v.1,
            present: on,
        });
    }

    let n_spurious = p.spurious_count.sample(rng) as usize;
    let positions = sample_spurious_positions(Some(&pupil), n_spurious, w, h, rng)?;
    for pos in positions {
        bright.push(BrightFeature {
            feature: sample_blob(&p.spurious, pos, Polarity::Bright, rng),
            role: BrightRole::Spurious,
        });
    }

    let from = p.background.sample(rng);
    let to = p.background.sample(rng);
    let axis_angle = 2.0 * PI * rng.random::<f64>();
    let noise_sigma = cfg.noise_sigma.sample(rng);
    Ok(Scene {
        scenario: cfg.id,
        stage: cfg.stage,
        width: w,
        height: h,
        background: Background::LinearGradient { from, to, axis_angle },
        dark_features: alloc::vec![pupil],
        bright_features: bright,
        noise_sigma,
        truth: GroundTruth {
            pupil: Some(pupil),
            crs,
        },
    })
}

/// Samples a scene for any preset family.
pub fn sample_scene<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scene, ScenarioError> {
    match &cfg.scene {
        SceneParams::Cr(p) => sample_cr_inner(cfg, p, rng),
        SceneParams::Pupil(p) => sample_pupil_inner(cfg, p, rng),
        SceneParams::FullEye(p) => sample_full_eye_inner(cfg, p, rng),
        SceneParams::Pattern(p) => sample_pattern_inner(cfg, p, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::{preset, resolve, Stage};
    use crate::scenario::ScenarioId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cr(x: f64, y: f64, beta: f64) -> GaussianFeature {
        GaussianFeature {
            x_c: x,
            y_c: y,
            theta: 0.0,
            alpha: beta,
            beta,
            amplitude: 10.0,
            luminance: 255.0,
            polarity: Polarity::Bright,
        }
    }

    #[test]
    fn overlap_rule_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // 12 >= 1.25·8 = 10: both kept where they are
        let kept = place_nonoverlapping_crs(alloc::vec![cr(10.0, 10.0, 4.0), cr(22.0, 10.0, 4.0)], 64, 64, &mut rng)
            .unwrap();
        assert_eq!((kept[1].x_c, kept[1].y_c), (22.0, 10.0));
        // 9 < 10: second one moves
        let moved = place_nonoverlapping_crs(alloc::vec![cr(10.0, 10.0, 4.0), cr(19.0, 10.0, 4.0)], 64, 64, &mut rng)
            .unwrap();
        assert_eq!((moved[0].x_c, moved[0].y_c), (10.0, 10.0));
        assert_ne!((moved[1].x_c, moved[1].y_c), (19.0, 10.0));
        assert!(!crs_overlap(&moved[0], &moved[1]));
        // single CR untouched
        let one = place_nonoverlapping_crs(alloc::vec![cr(3.0, 4.0, 9.0)], 64, 64, &mut rng).unwrap();
        assert_eq!(one, alloc::vec![cr(3.0, 4.0, 9.0)]);
    }

    #[test]
    fn overdense_placement_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cands = (0..10).map(|_| cr(5.0, 5.0, 20.0)).collect();
        assert_eq!(
            place_nonoverlapping_crs(cands, 16, 16, &mut rng),
            Err(ScenarioError::PlacementExhausted { attempts: PLACEMENT_ATTEMPTS })
        );
    }

    #[test]
    fn spurious_never_on_plateau() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pupil = cr(64.0, 64.0, 20.0);
        pupil.alpha = 15.0;
        pupil.amplitude = 500.0;
        assert!(sample_spurious_positions(Some(&pupil), 0, 128, 128, &mut rng).unwrap().is_empty());
        let pts = sample_spurious_positions(Some(&pupil), 5000, 128, 128, &mut rng).unwrap();
        assert!(pts.iter().all(|p| pupil.normalized_radius_sq(p.0, p.1) > 1.0));
    }

    #[test]
    fn cr_scene_grey_side() {
        let cfg = preset(ScenarioId::Cr500);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s = sample_cr_scene(&cfg, &mut rng).unwrap();
            let Background::SplitLine { grey, dark, .. } = s.background else { panic!() };
            assert_eq!(grey, 128.0);
            assert!(dark >= 1.0);
        }
    }

    #[test]
    fn cr_scene_stage_two_centered() {
        let cfg = resolve(ScenarioId::Cr1000, Stage::Two).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let s = sample_scene(&cfg, &mut rng).unwrap();
            let c = s.truth.crs[0];
            assert!((c.x - 89.5).abs() <= 0.75 && (c.y - 89.5).abs() <= 0.75);
        }
    }

    #[test]
    fn cr_line_passes_near_the_cr() {
        let cfg = preset(ScenarioId::Cr1000);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let s = sample_scene(&cfg, &mut rng).unwrap();
            let Background::SplitLine { normal_angle, offset, .. } = s.background else { panic!() };
            let f = s.bright_features[0].feature;
            let d = (f.x_c * libm::cos(normal_angle) + f.y_c * libm::sin(normal_angle) - offset).abs();
            assert!(d >= 0.5 * f.alpha - 1e-9 && d <= 1.5 * f.alpha + 1e-9);
        }
    }

    #[test]
    fn pupil_stage_two_single_cr() {
        let cfg = resolve(ScenarioId::Pupil500, Stage::Two).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let s = sample_pupil_scene(&cfg, &mut rng).unwrap();
            assert_eq!(s.crs().count(), 1);
            let p = s.truth.pupil.unwrap();
            assert!((p.x_c - 89.5).abs() <= 0.75 && (p.y_c - 89.5).abs() <= 0.75);
            let ratio = p.beta / p.alpha;
            assert!((1.0..=1.3).contains(&ratio));
        }
    }

    #[test]
    fn wrong_family_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_cr_scene(&preset(ScenarioId::Chugh), &mut rng),
            Err(ScenarioError::WrongFamily { .. })
        ));
    }

    #[test]
    fn pattern_dropout_matches_flags() {
        let cfg = preset(ScenarioId::Chugh);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let s = sample_chugh_scene(&cfg, &mut rng).unwrap();
            assert_eq!(s.truth.crs.len(), 5);
            let present: Vec<u32> = s.truth.crs.iter().filter(|c| c.present).map(|c| c.index).collect();
            let rendered: Vec<u32> = s
                .crs()
                .map(|b| match b.role {
                    BrightRole::Cr(i) => i,
                    BrightRole::Spurious => unreachable!(),
                })
                .collect();
            assert_eq!(present, rendered);
            let n_sp = s.spurious().count();
            assert!((1..=5).contains(&n_sp));
        }
    }

    #[test]
    fn full_eye_scene_renders() {
        let cfg = preset(ScenarioId::Eds2019);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sample_full_eye_scene(&cfg, &mut rng).unwrap();
        let img = s.render(&mut rng);
        assert_eq!((img.width(), img.height()), (128, 128));
        let n = s.crs().count();
        assert!((1..=8).contains(&n));
    }
}
