//! Deterministic synthesis of light-distribution eye images with exact
//! labels, plus the classical pupil / corneal-reflection analysis used to
//! check them, P-CR feature selection, polynomial gaze calibration and
//! signal-quality metrics.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, PNG IO,
//! parallel batch rendering and the command line live in the `leyes` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod gaze;
pub mod pcr;
pub mod plane;
pub mod render;
pub mod scenario;
pub mod stream;
pub mod vision;

pub use plane::{FloatImage, GrayImage, Mask, Plane};
pub use render::{GaussianFeature, Polarity};
pub use scenario::{ScenarioConfig, ScenarioId, Scene, Stage};
pub use stream::{LabelSet, Sample, SampleStream};
