//! Classical image analysis: thresholding, morphology, blob selection,
//! centers of mass, ellipse fitting and cutout masking.
//!
//! These routines serve both as a baseline detector and as the oracle
//! that recovers ground truth from rendered images.

mod binary;
mod cutout;
mod detect;
mod ellipse;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use binary::{
    binarize, binarize_plane, blob_stats, center_of_mass, components, contour_points, fill_holes,
    morph_cleanup, open_cross, select_feature_blob, select_feature_component, BlobCriteria, BlobStats,
    BoundingBox, Component, Polarity,
};
pub use cutout::{
    apply_disk_mask, apply_ellipse_mask, crop_replicate, make_cr_cutout, make_pupil_cutout, CR_MASK_RADIUS,
    CUTOUT_SIZE, PUPIL_MASK_SCALE,
};
pub use detect::{
    analyze_frame, detector_report, locate_feature, postprocess_unet_mask, FeatureEstimate, FrameEstimate,
    UnetPupil, UNET_THRESHOLD,
};
pub use ellipse::{fit_ellipse, sample_ellipse, EllipseParams};
pub use sweep::{
    best_scored, centers_at, score_centers, sweep_threshold, SweepResult, SweepTarget, ThresholdSweep,
};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum VisionError {
    #[error("region has zero total mass")]
    ZeroMass,
    #[error("ellipse fit needs at least 6 points, got {0}")]
    TooFewPoints(usize),
    #[error("points are collinear or coincident")]
    Degenerate,
    #[error("no ellipse-shaped conic fits the points")]
    NotEllipse,
    #[error("no blob passed the selection criteria")]
    NoBlob,
    #[error("invalid analysis config: {0}")]
    InvalidConfig(&'static str),
}

/// Axis-aligned analysis window in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    /// Intersection with a `width × height` image; `None` if empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<Roi> {
        let x1 = (self.x + self.width).min(width);
        let y1 = (self.y + self.height).min(height);
        (self.x < x1 && self.y < y1).then(|| Roi {
            x: self.x,
            y: self.y,
            width: x1 - self.x,
            height: y1 - self.y,
        })
    }
}

/// How a binarization threshold is chosen for a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Fixed intensity in `[0, 1]`.
    Fixed(f64),
    /// Darkest (or, for bright features, brightest) value in the analysis
    /// window plus (minus) this offset.
    Relative(f64),
}

impl ThresholdMode {
    fn validate(&self) -> Result<(), VisionError> {
        match *self {
            Self::Fixed(t) if (0.0..=1.0).contains(&t) => Ok(()),
            Self::Relative(o) if (0.0..=1.0).contains(&o) => Ok(()),
            _ => Err(VisionError::InvalidConfig("threshold outside [0, 1]")),
        }
    }
}

/// Blob area bounds as fractions of the analysis-window area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub pupil_threshold: ThresholdMode,
    pub cr_threshold: ThresholdMode,
    pub roi: Option<Roi>,
    /// Pupil blob area bounds.
    pub size_bounds: SizeBounds,
    /// CR blob area bounds.
    pub cr_size_bounds: SizeBounds,
    pub circularity_min: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            pupil_threshold: ThresholdMode::Fixed(0.25),
            cr_threshold: ThresholdMode::Fixed(0.9),
            roi: None,
            size_bounds: SizeBounds { min: 0.002, max: 0.5 },
            cr_size_bounds: SizeBounds { min: 0.0, max: 0.02 },
            circularity_min: 0.6,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), VisionError> {
        self.pupil_threshold.validate()?;
        self.cr_threshold.validate()?;
        for b in [self.size_bounds, self.cr_size_bounds] {
            if !(b.min >= 0.0 && b.min < b.max) {
                return Err(VisionError::InvalidConfig("size bounds need 0 <= min < max"));
            }
        }
        if !(0.0..=1.0).contains(&self.circularity_min) {
            return Err(VisionError::InvalidConfig("circularity_min outside [0, 1]"));
        }
        if matches!(self.roi, Some(r) if r.width == 0 || r.height == 0) {
            return Err(VisionError::InvalidConfig("empty roi"));
        }
        Ok(())
    }
}
