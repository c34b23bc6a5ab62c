//! Deterministic, index-addressable sample streams.
//!
//! Every sample is a pure function of the resolved scenario config and a
//! 64-bit scene seed. Scene seeds are derived from the master seed and the
//! sample index with a counter-based mix, so any index can be produced
//! directly and ranges of indices can be rendered on independent workers.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plane::{FloatImage, GrayImage, Mask, Plane};
use crate::scenario::{resolve, sample_scene, CrTruth, ScenarioConfig, ScenarioError, ScenarioId, Scene, Stage};

/// Default width of the Gaussian training targets, in pixels.
pub const DEFAULT_MAP_SIGMA: f64 = 1.0;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the SplitMix64 finalizer.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream key for a (master seed, scenario, stage) triple.
pub fn stream_key(master_seed: u64, scenario: ScenarioId, stage: Stage) -> u64 {
    let salt = (scenario.tag() << 8) | u64::from(u8::from(stage));
    splitmix64(master_seed ^ splitmix64(salt))
}

/// Scene seed of sample `index` in the stream keyed by `key`.
#[inline]
pub fn scene_seed(key: u64, index: u64) -> u64 {
    splitmix64(key ^ splitmix64(index.wrapping_mul(GOLDEN)))
}

/// Ellipse labels of the pupil, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilLabel {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub pupil: Option<PupilLabel>,
    pub crs: Vec<CrTruth>,
    /// Plateau set of the pupil.
    pub pupil_mask: Mask,
    /// Pupil map first, then one map per CR in illuminator order.
    pub target_heatmaps: Option<Vec<FloatImage>>,
}

impl LabelSet {
    pub fn from_scene(scene: &Scene, map_sigma: Option<f64>) -> Self {
        let pupil = scene.truth.pupil.map(|p| PupilLabel {
            x: p.x_c,
            y: p.y_c,
            alpha: p.alpha,
            beta: p.beta,
            theta: p.theta,
        });
        Self {
            pupil,
            crs: scene.truth.crs.clone(),
            pupil_mask: scene.pupil_mask(),
            target_heatmaps: map_sigma.map(|s| render_target_heatmaps(scene, s)),
        }
    }

    pub fn pupil_center(&self) -> Option<(f64, f64)> {
        self.pupil.map(|p| (p.x, p.y))
    }
}

/// A unit-peak isotropic Gaussian centered at `(x, y)`, culled beyond 6σ.
pub fn gaussian_bump(width: usize, height: usize, x: f64, y: f64, sigma: f64, peak: f64) -> FloatImage {
    let mut out = Plane::filled(width, height, 0.0);
    let reach = 6.0 * sigma;
    let x0 = libm::floor(x - reach).max(0.0) as usize;
    let y0 = libm::floor(y - reach).max(0.0) as usize;
    let x1 = (libm::ceil(x + reach).max(-1.0) + 1.0).min(width as f64) as usize;
    let y1 = (libm::ceil(y + reach).max(-1.0) + 1.0).min(height as f64) as usize;
    let inv = 1.0 / (2.0 * sigma * sigma);
    for row in y0..y1 {
        let dy = row as f64 - y;
        for col in x0..x1 {
            let dx = col as f64 - x;
            out.set(col, row, peak * libm::exp(-(dx * dx + dy * dy) * inv));
        }
    }
    out
}

/// Training targets: the pupil map, then one map per CR. Absent features
/// get all-zero maps.
pub fn render_target_heatmaps(scene: &Scene, map_sigma: f64) -> Vec<FloatImage> {
    let (w, h) = (scene.width, scene.height);
    let mut maps = Vec::with_capacity(1 + scene.truth.crs.len());
    maps.push(match scene.truth.pupil {
        Some(p) => gaussian_bump(w, h, p.x_c, p.y_c, map_sigma, 1.0),
        None => Plane::filled(w, h, 0.0),
    });
    for cr in &scene.truth.crs {
        maps.push(if cr.present {
            gaussian_bump(w, h, cr.x, cr.y, map_sigma, 1.0)
        } else {
            Plane::filled(w, h, 0.0)
        });
    }
    maps
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub index: u64,
    pub scene_seed: u64,
    pub scenario: ScenarioId,
    pub stage: Stage,
    pub image: GrayImage,
    pub labels: LabelSet,
    pub scene: Scene,
}

impl Sample {
    /// Renders the sample for `scene_seed` under `cfg`. Bitwise
    /// reproducible.
    pub fn render(cfg: &ScenarioConfig, index: u64, scene_seed: u64, map_sigma: Option<f64>) -> Result<Self, ScenarioError> {
        let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
        let scene = sample_scene(cfg, &mut rng)?;
        let image = scene.render(&mut rng);
        let labels = LabelSet::from_scene(&scene, map_sigma);
        Ok(Self {
            index,
            scene_seed,
            scenario: cfg.id,
            stage: cfg.stage,
            image,
            labels,
            scene,
        })
    }
}

/// Unbounded stream of samples. The handle is a cheap value: cloning it
/// and moving the clone to another index gives an independent cursor over
/// the same sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    cfg: ScenarioConfig,
    master_seed: u64,
    key: u64,
    cursor: u64,
    map_sigma: Option<f64>,
}

impl SampleStream {
    /// Stream over a built-in preset at the given stage.
    pub fn new(id: ScenarioId, stage: Stage, master_seed: u64) -> Result<Self, ScenarioError> {
        Self::from_config(resolve(id, stage)?, master_seed)
    }

    /// Stream over an already-resolved (possibly customized) config.
    pub fn from_config(cfg: ScenarioConfig, master_seed: u64) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let key = stream_key(master_seed, cfg.id, cfg.stage);
        Ok(Self {
            cfg,
            master_seed,
            key,
            cursor: 0,
            map_sigma: None,
        })
    }

    /// Also render target heatmaps of width `sigma` with every sample.
    pub fn with_heatmaps(mut self, sigma: f64) -> Self {
        self.map_sigma = Some(sigma);
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn map_sigma(&self) -> Option<f64> {
        self.map_sigma
    }

    pub fn position(&self) -> u64 {
        self.cursor
    }

    pub fn skip_to(&mut self, index: u64) {
        self.cursor = index;
    }

    pub fn scene_seed(&self, index: u64) -> u64 {
        scene_seed(self.key, index)
    }

    /// Sample `index`, independent of the cursor.
    pub fn sample_at(&self, index: u64) -> Result<Sample, ScenarioError> {
        Sample::render(&self.cfg, index, self.scene_seed(index), self.map_sigma)
    }

    pub fn next_sample(&mut self) -> Result<Sample, ScenarioError> {
        let s = self.sample_at(self.cursor);
        self.cursor += 1;
        s
    }

    /// The next `n` samples in index order.
    pub fn next_batch(&mut self, n: usize) -> Result<Vec<Sample>, ScenarioError> {
        (0..n).map(|_| self.next_sample()).collect()
    }
}

impl Iterator for SampleStream {
    type Item = Result<Sample, ScenarioError>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_sample())
    }
}
