//! Scene sampling for the seven synthetic-image presets.

mod collarette;
mod config;
mod dist;
mod layout;
mod sample;
mod scene;

use alloc::string::String;
use thiserror::Error;

pub use collarette::{
    build_collarette, collarette_from_radii, periodic_spline_resample, CollaretteSpec, IrisSpec, UPSAMPLE,
};
pub use config::{
    apply_stage, preset, resolve, BlobParams, CollaretteParams, CrSceneParams, FullEyeParams, LayoutParams,
    PatternSceneParams, PupilSceneParams, ScenarioConfig, ScenarioId, SceneParams, Stage, StageOverrides,
};
pub use dist::{CountRange, Distribution};
pub use layout::{sample_house_layout, sample_layout, sample_ring_layout, LayoutShape, PolygonLayout};
pub use sample::{
    crs_overlap, min_cr_distance, place_nonoverlapping_crs, sample_blob, sample_chugh_scene, sample_cr_scene,
    sample_eds2020_scene, sample_full_eye_scene, sample_pattern_scene, sample_pupil_scene, sample_scene,
    sample_spurious_positions, PLACEMENT_ATTEMPTS,
};
pub use scene::{
    ellipse_signed_distance, point_in_polygon, polygon_signed_distance, raised_cosine_weight, Background,
    BrightFeature, BrightRole, CrTruth, GroundTruth, Scene,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown stage {0} (expected 1 or 2)")]
    UnknownStage(u8),
    #[error("scenario {0} defines no stage-2 overrides")]
    StageUndefined(ScenarioId),
    #[error("stage-2 override widens `{0}`")]
    StageWidens(&'static str),
    #[error("invalid distribution {0:?}")]
    InvalidDistribution(Distribution),
    #[error("invalid scenario config: {0}")]
    InvalidConfig(&'static str),
    #[error("scenario {got} is not a {expected} scene")]
    WrongFamily { expected: &'static str, got: ScenarioId },
    #[error("feature placement gave up after {attempts} attempts")]
    PlacementExhausted { attempts: usize },
}
