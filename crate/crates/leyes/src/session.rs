//! Session descriptions: fixation targets, timing and screen geometry.

use serde::{Deserialize, Serialize};

use leyes_core::gaze::{FixationTarget, DEFAULT_SETTLE_MS, DEFAULT_WINDOW_MS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetRole {
    #[default]
    Calibration,
    Validation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub x_deg: f64,
    pub y_deg: f64,
    pub t_on_ms: f64,
    pub t_off_ms: f64,
    #[serde(default)]
    pub role: TargetRole,
    #[serde(default)]
    pub trial: usize,
}

impl TargetSpec {
    pub fn fixation(&self) -> FixationTarget {
        FixationTarget {
            x: self.x_deg,
            y: self.y_deg,
            t_on_ms: self.t_on_ms,
            t_off_ms: self.t_off_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    /// Degrees of visual angle per unit of the gaze signal.
    pub deg_per_unit: f64,
}

impl Default for Screen {
    fn default() -> Self {
        Self { deg_per_unit: 1.0 }
    }
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_MS
}

fn default_settle() -> f64 {
    DEFAULT_SETTLE_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    /// Frame rate; frame `i` is taken at `i · 1000 / rate_hz` ms.
    pub rate_hz: f64,
    #[serde(default = "default_window")]
    pub window_ms: f64,
    /// Start of each fixation left out of accuracy and calibration.
    #[serde(default = "default_settle")]
    pub settle_ms: f64,
    #[serde(default)]
    pub screen: Screen,
    pub targets: Vec<TargetSpec>,
}

impl Session {
    pub fn frame_time_ms(&self, frame: usize) -> f64 {
        frame as f64 * 1000.0 / self.rate_hz
    }

    /// Trial numbers in ascending order.
    pub fn trials(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.targets.iter().map(|t| t.trial).collect();
        t.sort_unstable();
        t.dedup();
        t
    }
}
