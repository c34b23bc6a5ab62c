//! Per-recording threshold search: the threshold whose center signal has
//! the best (lowest) sample-to-sample precision wins.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::binary::Polarity;
use super::detect::locate_feature;
use super::{SizeBounds, ThresholdConfig, ThresholdMode, VisionError};
use crate::gaze::{rms_s2s_samples, Signal};
use crate::plane::GrayImage;

/// Which feature's threshold is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    Pupil,
    Cr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    /// Inclusive fixed-threshold range in `[0, 1]`.
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Samples per RMS-S2S window.
    pub window_samples: usize,
    /// Candidates detecting the feature in fewer frames are rejected.
    pub min_valid_fraction: f64,
}

impl ThresholdSweep {
    pub const DEFAULT_STEP: f64 = 1.0 / 255.0;

    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            step: Self::DEFAULT_STEP,
            window_samples: 20,
            min_valid_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), VisionError> {
        if !(0.0 <= self.lo && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(VisionError::InvalidConfig("sweep range must satisfy 0 <= lo <= hi <= 1"));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(VisionError::InvalidConfig("sweep step must be positive"));
        }
        if self.window_samples < 2 {
            return Err(VisionError::InvalidConfig("sweep window needs at least 2 samples"));
        }
        if !(0.0..=1.0).contains(&self.min_valid_fraction) {
            return Err(VisionError::InvalidConfig("min_valid_fraction outside [0, 1]"));
        }
        Ok(())
    }

    /// `lo, lo + step, …` up to and including `hi` (within rounding).
    pub fn candidates(&self) -> Vec<f64> {
        let k = libm::floor((self.hi - self.lo) / self.step + 1e-9) as usize;
        (0..=k).map(|i| (self.lo + i as f64 * self.step).min(self.hi)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub threshold: f64,
    /// Median windowed RMS-S2S of the center signal, in pixels.
    pub rms_s2s: f64,
    pub valid_frames: usize,
}

fn feature_settings(cfg: &ThresholdConfig, target: SweepTarget) -> (Polarity, SizeBounds) {
    match target {
        SweepTarget::Pupil => (Polarity::DarkBelow, cfg.size_bounds),
        SweepTarget::Cr => (Polarity::BrightAbove, cfg.cr_size_bounds),
    }
}

/// Feature center per frame at a fixed `threshold`.
pub fn centers_at(frames: &[GrayImage], cfg: &ThresholdConfig, target: SweepTarget, threshold: f64) -> Vec<Option<(f64, f64)>> {
    let (polarity, bounds) = feature_settings(cfg, target);
    frames
        .iter()
        .map(|f| {
            locate_feature(f, ThresholdMode::Fixed(threshold), polarity, bounds, cfg.circularity_min, cfg.roi)
                .map(|e| e.center)
        })
        .collect()
}

/// Scores one candidate's center signal; `None` if it is rejected.
pub fn score_centers(centers: &[Option<(f64, f64)>], sweep: &ThresholdSweep, threshold: f64) -> Option<SweepResult> {
    let valid_frames = centers.iter().filter(|c| c.is_some()).count();
    if centers.is_empty() || (valid_frames as f64) < sweep.min_valid_fraction * centers.len() as f64 {
        return None;
    }
    let ts = (0..centers.len()).map(|i| i as f64).collect();
    let points = centers.iter().map(|c| c.unwrap_or((0.0, 0.0))).collect();
    let valid = centers.iter().map(Option::is_some).collect();
    let sig = Signal::new(ts, points, valid, 1.0).ok()?;
    let rms_s2s = rms_s2s_samples(&sig, sweep.window_samples).ok()?.median?;
    Some(SweepResult {
        threshold,
        rms_s2s,
        valid_frames,
    })
}

/// Best of already-scored candidates; ties go to the earlier candidate.
pub fn best_scored(scored: impl IntoIterator<Item = Option<SweepResult>>) -> Option<SweepResult> {
    scored.into_iter().flatten().fold(None, |best, r| match best {
        Some(b) if b.rms_s2s <= r.rms_s2s => Some(b),
        _ => Some(r),
    })
}

/// Tries every candidate threshold over `frames` and returns the one with
/// the lowest median RMS-S2S, or `None` when no candidate qualifies.
pub fn sweep_threshold(
    frames: &[GrayImage],
    cfg: &ThresholdConfig,
    target: SweepTarget,
    sweep: &ThresholdSweep,
) -> Result<Option<SweepResult>, VisionError> {
    sweep.validate()?;
    Ok(best_scored(
        sweep
            .candidates()
            .into_iter()
            .map(|t| score_centers(&centers_at(frames, cfg, target, t), sweep, t)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    
    /// Dark disk with a half-ring on its right whose level alternates
    /// between `rim.0` and `rim.1` from frame to frame.
    fn frames(n: usize, rim: (u8, u8)) -> Vec<GrayImage> {
        (0..n)
            .map(|i| {
                let levels = (0..40 * 40)
                    .map(|k| {
                        let (x, y) = ((k % 40) as f64, (k / 40) as f64);
                        let r = libm::hypot(x - 20.0, y - 20.0);
                        if r <= 8.0 {
                            10
                        } else if r <= 11.0 && x > 20.0 {
                            if i % 2 == 0 { rim.0 } else { rim.1 }
                        } else {
                            230
                        }
                    })
                    .collect();
                GrayImage::from_levels(40, 40, levels).unwrap()
            })
            .collect()
    }

    #[test]
    fn candidates_cover_the_range() {
        let s = ThresholdSweep::new(0.1, 0.2);
        let c = s.candidates();
        assert_eq!(c.len(), 26);
        assert_eq!(c[0], 0.1);
        assert!(c[25] <= 0.2 && 0.2 - c[25] < s.step);
        let exact = ThresholdSweep::new(10.0 / 255.0, 20.0 / 255.0).candidates();
        assert_eq!(exact.len(), 11);
        assert!((exact[10] - 20.0 / 255.0).abs() < 1e-12);
        assert_eq!(ThresholdSweep::new(0.5, 0.5).candidates(), [0.5]);
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        assert!(ThresholdSweep::new(0.6, 0.5).validate().is_err());
        assert!(ThresholdSweep { step: 0.0, ..ThresholdSweep::new(0.1, 0.5) }.validate().is_err());
        assert!(ThresholdSweep { window_samples: 1, ..ThresholdSweep::new(0.1, 0.5) }.validate().is_err());
    }

    #[test]
    fn static_frames_score_zero_and_keep_the_first_candidate() {
        let f = frames(30, (230, 230));
        let cfg = ThresholdConfig::default();
        let r = sweep_threshold(&f, &cfg, SweepTarget::Pupil, &ThresholdSweep::new(0.1, 0.6))
            .unwrap()
            .unwrap();
        assert_eq!(r.rms_s2s, 0.0);
        assert_eq!(r.threshold, 0.1);
        assert_eq!(r.valid_frames, 30);
    }

    #[test]
    fn flickering_band_is_avoided() {
        let f = frames(30, (30, 60));
        let cfg = ThresholdConfig::default();
        let sweep = ThresholdSweep::new(0.13, 0.5);
        let noisy = score_centers(&centers_at(&f, &cfg, SweepTarget::Pupil, 0.13), &sweep, 0.13).unwrap();
        assert!(noisy.rms_s2s > 0.5);
        let r = sweep_threshold(&f, &cfg, SweepTarget::Pupil, &sweep).unwrap().unwrap();
        assert_eq!(r.rms_s2s, 0.0);
        assert!(r.threshold >= 60.0 / 255.0 && r.threshold < 61.0 / 255.0, "{}", r.threshold);
    }

    #[test]
    fn no_detection_gives_none() {
        let f = frames(30, (230, 230));
        let cfg = ThresholdConfig::default();
        // Below the darkest level nothing is segmented.
        let r = sweep_threshold(&f, &cfg, SweepTarget::Pupil, &ThresholdSweep::new(0.0, 0.02)).unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn best_scored_prefers_lower_then_earlier() {
        let r = |t, s| Some(SweepResult { threshold: t, rms_s2s: s, valid_frames: 1 });
        assert_eq!(best_scored([None, r(0.2, 1.0), r(0.3, 0.5), r(0.4, 0.5)]).unwrap().threshold, 0.3);
        assert_eq!(best_scored([None, None]), None);
    }
}
