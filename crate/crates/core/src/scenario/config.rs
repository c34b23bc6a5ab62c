//! Scenario presets and the two-stage curriculum overrides.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dist::{CountRange, Distribution};
use super::ScenarioError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScenarioId {
    #[serde(rename = "cr_500")]
    Cr500,
    #[serde(rename = "cr_1000")]
    Cr1000,
    #[serde(rename = "pupil_500")]
    Pupil500,
    #[serde(rename = "pupil_1000")]
    Pupil1000,
    #[serde(rename = "eds2019")]
    Eds2019,
    #[serde(rename = "chugh")]
    Chugh,
    #[serde(rename = "eds2020")]
    Eds2020,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        Self::Cr500,
        Self::Cr1000,
        Self::Pupil500,
        Self::Pupil1000,
        Self::Eds2019,
        Self::Chugh,
        Self::Eds2020,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cr500 => "cr_500",
            Self::Cr1000 => "cr_1000",
            Self::Pupil500 => "pupil_500",
            Self::Pupil1000 => "pupil_1000",
            Self::Eds2019 => "eds2019",
            Self::Chugh => "chugh",
            Self::Eds2020 => "eds2020",
        }
    }

    /// Small stable tag mixed into seed derivation.
    pub(crate) fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ScenarioError::UnknownScenario(s.to_string()))
    }
}

/// Curriculum stage. Serialized as the integer 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    One,
    Two,
}

impl TryFrom<u8> for Stage {
    type Error = ScenarioError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            other => Err(ScenarioError::UnknownStage(other)),
        }
    }
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        match s {
            Stage::One => 1,
            Stage::Two => 2,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// Shape and luminance distributions for one family of elliptical
/// features. `major_ratio` multiplies the drawn minor radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    pub minor: Distribution,
    pub major_ratio: Distribution,
    pub amplitude: Distribution,
    pub luminance: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrSceneParams {
    /// Plateau radius of the circular CR.
    pub radius: Distribution,
    pub amplitude: Distribution,
    pub dark_luminance: Distribution,
    pub grey_luminance: Distribution,
    /// Distance from CR center to the split line, in CR radii.
    pub line_distance: Distribution,
    /// Side of the square around the image center the CR center is drawn
    /// from; `None` means anywhere in the image.
    pub center_span: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PupilSceneParams {
    pub pupil: BlobParams,
    pub center_span: Option<f64>,
    pub crs: BlobParams,
    pub cr_count: CountRange,
    pub background: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollaretteParams {
    pub vertices: CountRange,
    /// Mean vertex radius as a fraction of the iris major radius.
    pub radius_fraction: Distribution,
    /// Per-collarette radial jitter amplitude as a fraction of the mean radius.
    pub jitter_fraction: Distribution,
    /// Collarette luminance as a multiple of the iris luminance.
    pub luminance_ratio: Distribution,
    pub edge_width: Distribution,
    /// Max offset of the collarette center from the iris center, as a
    /// fraction of the iris minor radius.
    pub center_jitter_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullEyeParams {
    pub sclera: Distribution,
    pub iris_minor: Distribution,
    pub iris_major_ratio: Distribution,
    pub iris_luminance: Distribution,
    pub iris_edge: Distribution,
    pub collarette: CollaretteParams,
    pub pupil: BlobParams,
    pub crs: BlobParams,
    pub cr_count: CountRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum LayoutParams {
    /// Rectangle plus an apex above the middle of its top edge. Width is a
    /// fraction of `d`, rectangle and roof heights are fractions of the width.
    House {
        width_fraction: Distribution,
        height_ratio: Distribution,
        roof_ratio: Distribution,
        rotation_max_deg: f64,
    },
    /// Regular ring of `count` vertices, radius a fraction of `d`.
    Ring {
        radius_fraction: Distribution,
        count: u32,
        rotation_max_deg: f64,
    },
}

impl LayoutParams {
    pub fn rotation_max_deg(&self) -> f64 {
        match *self {
            Self::House { rotation_max_deg, .. } | Self::Ring { rotation_max_deg, .. } => rotation_max_deg,
        }
    }

    pub fn vertex_count(&self) -> usize {
        match *self {
            Self::House { .. } => 5,
            Self::Ring { count, .. } => count as usize,
        }
    }

    fn set_rotation_max(&mut self, v: f64) {
        match self {
            Self::House { rotation_max_deg, .. } | Self::Ring { rotation_max_deg, .. } => *rotation_max_deg = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSceneParams {
    pub pupil: BlobParams,
    pub layout: LayoutParams,
    /// Layout scale `d` (side of the synthetic crop).
    pub d: f64,
    /// Layout anchor = pupil center + uniform offset within a disk of this
    /// radius, expressed as a fraction of `d`.
    pub anchor_jitter_fraction: f64,
    pub crs: BlobParams,
    pub dropout: f64,
    pub spurious: BlobParams,
    pub spurious_count: CountRange,
    /// Distribution of both gradient end-point luminances.
    pub background: Distribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneParams {
    Cr(CrSceneParams),
    Pupil(PupilSceneParams),
    FullEye(FullEyeParams),
    Pattern(PatternSceneParams),
}

/// Partial configuration applied when moving to stage 2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_span: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cr_count: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spurious_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_max_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: ScenarioId,
    pub stage: Stage,
    pub width: usize,
    pub height: usize,
    pub noise_sigma: Distribution,
    pub scene: SceneParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2: Option<StageOverrides>,
}

const CR_LUMINANCE: Distribution = Distribution::constant(255.0);
const CNN_CANVAS: usize = 180;
const CROP_D: usize = 128;

fn cr_preset(id: ScenarioId, grey: Distribution) -> ScenarioConfig {
    ScenarioConfig {
        id,
        stage: Stage::One,
        width: CNN_CANVAS,
        height: CNN_CANVAS,
        noise_sigma: Distribution::uniform(0.0, 30.0),
        scene: SceneParams::Cr(CrSceneParams {
            radius: Distribution::uniform(1.0, 30.0),
            amplitude: Distribution::log_uniform(2.0, 20000.0),
            dark_luminance: Distribution::exponential(10.0, 1.0),
            grey_luminance: grey,
            line_distance: Distribution::uniform(0.5, 1.5),
            center_span: None,
        }),
        stage2: Some(StageOverrides {
            center_span: Some(1.5),
            ..StageOverrides::default()
        }),
    }
}

fn pupil_preset(id: ScenarioId, background: Distribution) -> ScenarioConfig {
    ScenarioConfig {
        id,
        stage: Stage::One,
        width: CNN_CANVAS,
        height: CNN_CANVAS,
        noise_sigma: Distribution::uniform(0.0, 30.0),
        scene: SceneParams::Pupil(PupilSceneParams {
            pupil: BlobParams {
                minor: Distribution::uniform(20.0, 60.0),
                major_ratio: Distribution::uniform(1.0, 1.3),
                amplitude: Distribution::log_uniform(2.0, 20000.0),
                luminance: Distribution::exponential(10.0, 1.0),
            },
            center_span: None,
            crs: BlobParams {
                minor: Distribution::uniform(4.0, 12.0),
                major_ratio: Distribution::uniform(1.0, 1.1),
                amplitude: Distribution::log_uniform(2.0, 20000.0),
                luminance: CR_LUMINANCE,
            },
            cr_count: CountRange::new(1, 4),
            background,
        }),
        stage2: Some(StageOverrides {
            center_span: Some(1.5),
            cr_count: Some(CountRange::exactly(1)),
            ..StageOverrides::default()
        }),
    }
}

fn eds2019_preset() -> ScenarioConfig {
    ScenarioConfig {
        id: ScenarioId::Eds2019,
        stage: Stage::One,
        width: CROP_D,
        height: CROP_D,
        noise_sigma: Distribution::uniform(0.0, 15.0),
        scene: SceneParams::FullEye(FullEyeParams {
            sclera: Distribution::normal(217.0, 26.0),
            iris_minor: Distribution::uniform(30.0, 42.5),
            iris_major_ratio: Distribution::uniform(1.0, 1.3),
            iris_luminance: Distribution::normal(77.0, 16.0),
            iris_edge: Distribution::uniform(8.0, 20.0),
            collarette: CollaretteParams {
                vertices: CountRange::new(13, 24),
                radius_fraction: Distribution::uniform(0.3, 0.6),
                jitter_fraction: Distribution::uniform(0.05, 0.2),
                luminance_ratio: Distribution::uniform(1.25, 1.6),
                edge_width: Distribution::uniform(1.0, 4.0),
                center_jitter_fraction: 0.1,
            },
            pupil: BlobParams {
                minor: Distribution::uniform(10.0, 30.0),
                major_ratio: Distribution::uniform(1.0, 1.3),
                amplitude: Distribution::log_uniform(2.0, 2000.0),
                luminance: Distribution::normal(34.0, 15.0),
            },
            crs: BlobParams {
                minor: Distribution::uniform(0.8, 4.0),
                major_ratio: Distribution::uniform(1.0, 1.4),
                amplitude: Distribution::log_uniform(2.0, 20000.0),
                luminance: CR_LUMINANCE,
            },
            cr_count: CountRange::new(1, 8),
        }),
        stage2: None,
    }
}

fn pattern_pupil(luminance: Distribution) -> BlobParams {
    BlobParams {
        minor: Distribution::uniform(6.0, 22.5),
        major_ratio: Distribution::uniform(1.0, 1.3),
        amplitude: Distribution::log_uniform(200.0, 100_000.0),
        luminance,
    }
}

fn chugh_preset() -> ScenarioConfig {
    ScenarioConfig {
        id: ScenarioId::Chugh,
        stage: Stage::One,
        width: CROP_D,
        height: CROP_D,
        noise_sigma: Distribution::uniform(0.0, 30.0),
        scene: SceneParams::Pattern(PatternSceneParams {
            pupil: pattern_pupil(Distribution::exponential(10.0, 1.0)),
            layout: LayoutParams::House {
                width_fraction: Distribution::uniform(0.1, 0.45),
                height_ratio: Distribution::uniform(0.5, 0.6),
                roof_ratio: Distribution::uniform(0.2, 0.5),
                rotation_max_deg: 45.0,
            },
            d: CROP_D as f64,
            anchor_jitter_fraction: 0.1,
            crs: BlobParams {
                minor: Distribution::uniform(1.0, 2.5),
                major_ratio: Distribution::uniform(1.0, 1.1),
                amplitude: Distribution::log_uniform(200.0, 100_000.0),
                luminance: CR_LUMINANCE,
            },
            dropout: 0.16,
            spurious: BlobParams {
                minor: Distribution::uniform(1.0, 2.5),
                major_ratio: Distribution::uniform(1.0, 2.5),
                amplitude: Distribution::log_uniform(200.0, 100_000.0),
                luminance: CR_LUMINANCE,
            },
            spurious_count: CountRange::new(1, 5),
            background: Distribution::uniform(63.0, 178.0),
        }),
        stage2: Some(StageOverrides {
            spurious_max: Some(3),
            dropout: Some(0.10),
            rotation_max_deg: Some(35.0),
            ..StageOverrides::default()
        }),
    }
}

fn eds2020_preset() -> ScenarioConfig {
    let mut cfg = chugh_preset();
    cfg.id = ScenarioId::Eds2020;
    if let SceneParams::Pattern(p) = &mut cfg.scene {
        p.pupil = pattern_pupil(Distribution::weibull(25.0, 2.0, 18.0));
        p.layout = LayoutParams::Ring {
            radius_fraction: Distribution::uniform(0.15, 0.4),
            count: 8,
            rotation_max_deg: 0.57,
        };
        p.dropout = 0.20;
    }
    cfg.stage2 = Some(StageOverrides {
        spurious_max: Some(3),
        ..StageOverrides::default()
    });
    cfg
}

/// Stage-1 defaults for a scenario.
pub fn preset(id: ScenarioId) -> ScenarioConfig {
    match id {
        ScenarioId::Cr500 => cr_preset(id, Distribution::constant(128.0)),
        ScenarioId::Cr1000 => cr_preset(id, Distribution::uniform(32.0, 153.0)),
        ScenarioId::Pupil500 => pupil_preset(id, Distribution::uniform(64.0, 179.0)),
        ScenarioId::Pupil1000 => pupil_preset(id, Distribution::uniform(32.0, 153.0)),
        ScenarioId::Eds2019 => eds2019_preset(),
        ScenarioId::Chugh => chugh_preset(),
        ScenarioId::Eds2020 => eds2020_preset(),
    }
}

fn check_narrower(field: &'static str, old: f64, new: f64) -> Result<(), ScenarioError> {
    if new > old {
        Err(ScenarioError::StageWidens(field))
    } else {
        Ok(())
    }
}

/// Returns `cfg` configured for `stage`. Stage 1 is the identity; stage 2
/// applies the preset's overrides and leaves every other parameter alone.
pub fn apply_stage(cfg: &ScenarioConfig, stage: Stage) -> Result<ScenarioConfig, ScenarioError> {
    let mut out = cfg.clone();
    if stage == Stage::One {
        return Ok(out);
    }
    let ov = cfg.stage2.ok_or(ScenarioError::StageUndefined(cfg.id))?;
    out.stage = Stage::Two;
    match &mut out.scene {
        SceneParams::Cr(p) => {
            if let Some(span) = ov.center_span {
                if let Some(old) = p.center_span {
                    check_narrower("center_span", old, span)?;
                }
                p.center_span = Some(span);
            }
        }
        SceneParams::Pupil(p) => {
            if let Some(span) = ov.center_span {
                if let Some(old) = p.center_span {
                    check_narrower("center_span", old, span)?;
                }
                p.center_span = Some(span);
            }
            if let Some(c) = ov.cr_count {
                check_narrower("cr_count", f64::from(p.cr_count.max), f64::from(c.max))?;
                if c.min < p.cr_count.min {
                    return Err(ScenarioError::StageWidens("cr_count"));
                }
                p.cr_count = c;
            }
        }
        SceneParams::FullEye(p) => {
            if let Some(c) = ov.cr_count {
                check_narrower("cr_count", f64::from(p.cr_count.max), f64::from(c.max))?;
                p.cr_count = c;
            }
        }
        SceneParams::Pattern(p) => {
            if let Some(m) = ov.spurious_max {
                check_narrower("spurious_max", f64::from(p.spurious_count.max), f64::from(m))?;
                p.spurious_count.max = m;
                p.spurious_count.min = p.spurious_count.min.min(m);
            }
            if let Some(d) = ov.dropout {
                p.dropout = d;
            }
            if let Some(r) = ov.rotation_max_deg {
                check_narrower("rotation_max_deg", p.layout.rotation_max_deg(), r)?;
                p.layout.set_rotation_max(r);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Preset for `(id, stage)`.
pub fn resolve(id: ScenarioId, stage: Stage) -> Result<ScenarioConfig, ScenarioError> {
    apply_stage(&preset(id), stage)
}

fn check_blob(b: &BlobParams) -> Result<(), ScenarioError> {
    for d in [b.minor, b.major_ratio, b.amplitude, b.luminance] {
        d.validate()?;
    }
    let (lo, _) = b.minor.support();
    if lo <= 0.0 {
        return Err(ScenarioError::InvalidConfig("minor radius must be positive"));
    }
    if b.major_ratio.support().0 < 1.0 {
        return Err(ScenarioError::InvalidConfig("major/minor ratio must be >= 1"));
    }
    if b.amplitude.support().0 <= 1.0 {
        return Err(ScenarioError::InvalidConfig("amplitude must be > 1"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.width == 0 || self.height == 0 {
            return Err(ScenarioError::InvalidConfig("canvas must be non-empty"));
        }
        self.noise_sigma.validate()?;
        if self.noise_sigma.support().0 < 0.0 {
            return Err(ScenarioError::InvalidConfig("noise sigma must be >= 0"));
        }
        match &self.scene {
            SceneParams::Cr(p) => {
                for d in [p.radius, p.amplitude, p.dark_luminance, p.grey_luminance, p.line_distance] {
                    d.validate()?;
                }
                if p.radius.support().0 <= 0.0 || p.amplitude.support().0 <= 1.0 {
                    return Err(ScenarioError::InvalidConfig("CR radius/amplitude out of domain"));
                }
            }
            SceneParams::Pupil(p) => {
                check_blob(&p.pupil)?;
                check_blob(&p.crs)?;
                p.background.validate()?;
                if p.cr_count.min > p.cr_count.max {
                    return Err(ScenarioError::InvalidConfig("cr_count min > max"));
                }
            }
            SceneParams::FullEye(p) => {
                check_blob(&p.pupil)?;
                check_blob(&p.crs)?;
                for d in [p.sclera, p.iris_minor, p.iris_major_ratio, p.iris_luminance, p.iris_edge] {
                    d.validate()?;
                }
                let c = &p.collarette;
                for d in [c.radius_fraction, c.jitter_fraction, c.luminance_ratio, c.edge_width] {
                    d.validate()?;
                }
                if c.vertices.min < 3 || c.vertices.min > c.vertices.max {
                    return Err(ScenarioError::InvalidConfig("collarette needs >= 3 vertices"));
                }
            }
            SceneParams::Pattern(p) => {
                check_blob(&p.pupil)?;
                check_blob(&p.crs)?;
                check_blob(&p.spurious)?;
                p.background.validate()?;
                if !(0.0..=1.0).contains(&p.dropout) {
                    return Err(ScenarioError::InvalidConfig("dropout must be in [0, 1]"));
                }
                if p.spurious_count.min > p.spurious_count.max {
                    return Err(ScenarioError::InvalidConfig("spurious_count min > max"));
                }
                match p.layout {
                    LayoutParams::House {
                        width_fraction,
                        height_ratio,
                        roof_ratio,
                        ..
                    } => {
                        for d in [width_fraction, height_ratio, roof_ratio] {
                            d.validate()?;
                        }
                    }
                    LayoutParams::Ring {
                        radius_fraction, count, ..
                    } => {
                        radius_fraction.validate()?;
                        if count < 2 {
                            return Err(ScenarioError::InvalidConfig("ring needs >= 2 vertices"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of CR channels (illuminators) labels and maps carry.
    pub fn cr_channels(&self) -> usize {
        match &self.scene {
            SceneParams::Cr(_) => 1,
            SceneParams::Pupil(p) => p.cr_count.max as usize,
            SceneParams::FullEye(p) => p.cr_count.max as usize,
            SceneParams::Pattern(p) => p.layout.vertex_count(),
        }
    }

    pub fn describe(&self) -> String {
        format!("{} stage {} ({}x{})", self.id, self.stage, self.width, self.height)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_strings() {
        for id in ScenarioId::ALL {
            assert_eq!(id.as_str().parse::<ScenarioId>().unwrap(), id);
        }
        assert!("eds2021".parse::<ScenarioId>().is_err());
    }

    #[test]
    fn all_presets_validate() {
        for id in ScenarioId::ALL {
            preset(id).validate().unwrap();
        }
    }

    #[test]
    fn stage_one_is_identity() {
        for id in ScenarioId::ALL {
            let p = preset(id);
            assert_eq!(apply_stage(&p, Stage::One).unwrap(), p);
        }
    }

    #[test]
    fn pupil_stage_two() {
        let s2 = resolve(ScenarioId::Pupil500, Stage::Two).unwrap();
        let SceneParams::Pupil(p) = s2.scene else { panic!() };
        assert_eq!(p.center_span, Some(1.5));
        assert_eq!(p.cr_count, CountRange::exactly(1));
        assert_eq!(s2.stage, Stage::Two);
        // untouched fields
        let SceneParams::Pupil(p1) = preset(ScenarioId::Pupil500).scene else { panic!() };
        assert_eq!(p.pupil, p1.pupil);
        assert_eq!(p.background, p1.background);
    }

    #[test]
    fn chugh_stage_two() {
        let s2 = resolve(ScenarioId::Chugh, Stage::Two).unwrap();
        let SceneParams::Pattern(p) = s2.scene else { panic!() };
        assert_eq!(p.dropout, 0.10);
        assert_eq!(p.spurious_count.max, 3);
        assert_eq!(p.layout.rotation_max_deg(), 35.0);
    }

    #[test]
    fn stage_two_is_deterministic_and_stable() {
        for id in ScenarioId::ALL {
            let p = preset(id);
            match apply_stage(&p, Stage::Two) {
                Ok(a) => {
                    assert_eq!(a, apply_stage(&p, Stage::Two).unwrap());
                    assert_eq!(a, apply_stage(&a, Stage::Two).unwrap());
                }
                Err(e) => assert_eq!(e, ScenarioError::StageUndefined(id)),
            }
        }
        assert!(Stage::try_from(3).is_err());
    }

    #[test]
    fn widening_override_rejected() {
        let mut p = preset(ScenarioId::Chugh);
        p.stage2.as_mut().unwrap().rotation_max_deg = Some(60.0);
        assert_eq!(apply_stage(&p, Stage::Two), Err(ScenarioError::StageWidens("rotation_max_deg")));
    }
}
