//! Frame-level detectors built from the binary-image primitives.

use alloc::vec::Vec;

use super::binary::{binarize_plane, morph_cleanup, select_feature_component, BlobCriteria, BlobStats, Polarity};
use super::{fit_ellipse, EllipseParams, Roi, SizeBounds, ThresholdConfig, ThresholdMode, VisionError};
use crate::pcr::DetectorReport;
use crate::plane::{FloatImage, GrayImage, Plane};

/// Probability level above which a segmentation output counts as pupil.
pub const UNET_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureEstimate {
    /// Blob center of mass in image coordinates.
    pub center: (f64, f64),
    /// Blob measurements; the centroid and bounding box are in image
    /// coordinates.
    pub stats: BlobStats,
    /// Ellipse fitted to the blob outline, when the fit succeeds.
    pub ellipse: Option<EllipseParams>,
    /// Threshold actually used, in `[0, 1]`.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameEstimate {
    pub pupil: Option<FeatureEstimate>,
    pub cr: Option<FeatureEstimate>,
}

/// Binarize → cleanup → select → center of mass inside `roi`.
pub fn locate_feature(
    img: &GrayImage,
    mode: ThresholdMode,
    polarity: Polarity,
    bounds: SizeBounds,
    circularity_min: f64,
    roi: Option<Roi>,
) -> Option<FeatureEstimate> {
    let full = Roi {
        x: 0,
        y: 0,
        width: img.width(),
        height: img.height(),
    };
    let r = roi.unwrap_or(full).clip(img.width(), img.height())?;
    let window: FloatImage = Plane::from_fn(r.width, r.height, |x, y| img.value(r.x + x, r.y + y));
    let threshold = match mode {
        ThresholdMode::Fixed(t) => t,
        ThresholdMode::Relative(offset) => {
            let vals = window.as_slice().iter().copied();
            match polarity {
                Polarity::DarkBelow => vals.fold(f64::INFINITY, f64::min) + offset,
                Polarity::BrightAbove => vals.fold(f64::NEG_INFINITY, f64::max) - offset,
            }
        }
    };
    let area = (r.width * r.height) as f64;
    let criteria = BlobCriteria {
        min_area: bounds.min * area,
        max_area: bounds.max * area,
        circularity_min,
    };
    let mask = morph_cleanup(&binarize_plane(&window, threshold, polarity));
    let blob = select_feature_component(&mask, &criteria)?;
    let (ox, oy) = (r.x as f64, r.y as f64);
    let ellipse = fit_ellipse(&blob.boundary_points()).ok().map(|e| EllipseParams {
        center: (e.center.0 + ox, e.center.1 + oy),
        ..e
    });
    let mut stats = blob.stats;
    stats.centroid = (stats.centroid.0 + ox, stats.centroid.1 + oy);
    stats.bbox.x0 += r.x;
    stats.bbox.x1 += r.x;
    stats.bbox.y0 += r.y;
    stats.bbox.y1 += r.y;
    Some(FeatureEstimate {
        center: stats.centroid,
        stats,
        ellipse,
        threshold,
    })
}

/// Dark pupil and bright CR estimates for one frame.
pub fn analyze_frame(img: &GrayImage, cfg: &ThresholdConfig) -> FrameEstimate {
    FrameEstimate {
        pupil: locate_feature(
            img,
            cfg.pupil_threshold,
            Polarity::DarkBelow,
            cfg.size_bounds,
            cfg.circularity_min,
            cfg.roi,
        ),
        cr: locate_feature(
            img,
            cfg.cr_threshold,
            Polarity::BrightAbove,
            cfg.cr_size_bounds,
            cfg.circularity_min,
            cfg.roi,
        ),
    }
}

/// Pupil center with a confidence score, for the adaptive crop decision.
///
/// Confidence is the agreement between the blob's pixel area and the area
/// of its fitted ellipse (1 for a clean elliptical blob, lower when the
/// outline is ragged or partly occluded); 0 with the image center when no
/// pupil is found.
pub fn detector_report(img: &GrayImage, cfg: &ThresholdConfig) -> DetectorReport {
    let fallback = DetectorReport {
        center: ((img.width() as f64 - 1.0) / 2.0, (img.height() as f64 - 1.0) / 2.0),
        confidence: 0.0,
    };
    let Some(p) = analyze_frame(img, cfg).pupil else {
        return fallback;
    };
    let confidence = match p.ellipse {
        Some(e) => {
            let (a, b) = (p.stats.area, e.area());
            (a.min(b) / a.max(b)).clamp(0.0, 1.0)
        }
        None => 0.0,
    };
    DetectorReport {
        center: p.center,
        confidence,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnetPupil {
    /// Pupil center in full-image coordinates.
    pub center: (f64, f64),
    /// Fitted ellipse in full-image coordinates.
    pub ellipse: EllipseParams,
    /// The pupil is too close to the crop edge; rerun with a crop centered
    /// on `center`.
    pub redo: bool,
}

/// Turns a segmentation probability map of a crop at `origin` into a pupil
/// center and decides whether the crop must be redone around it.
pub fn postprocess_unet_mask(prob: &FloatImage, origin: (f64, f64)) -> Result<UnetPupil, VisionError> {
    let mask = morph_cleanup(&binarize_plane(prob, UNET_THRESHOLD, Polarity::BrightAbove));
    let criteria = BlobCriteria {
        min_area: 1.0,
        max_area: f64::INFINITY,
        circularity_min: ThresholdConfig::default().circularity_min,
    };
    let blob = select_feature_component(&mask, &criteria).ok_or(VisionError::NoBlob)?;
    let (cx, cy) = blob.stats.centroid;
    let points: Vec<(f64, f64)> = blob.boundary_points();
    let e = fit_ellipse(&points)?;
    let (w, h) = (prob.width() as f64, prob.height() as f64);
    let edge_distance = cx.min(cy).min(w - 1.0 - cx).min(h - 1.0 - cy);
    Ok(UnetPupil {
        center: (cx + origin.0, cy + origin.1),
        ellipse: EllipseParams {
            center: (e.center.0 + origin.0, e.center.1 + origin.1),
            ..e
        },
        redo: edge_distance < e.semi_major,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_map(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> FloatImage {
        Plane::from_fn(w, h, |x, y| {
            let d = libm::hypot(x as f64 - cx, y as f64 - cy);
            if d <= r {
                1.0
            } else {
                0.2
            }
        })
    }

    #[test]
    fn centered_blob_no_redo() {
        let p = blob_map(128, 128, 64.0, 60.0, 15.0);
        let out = postprocess_unet_mask(&p, (100.0, 50.0)).unwrap();
        assert!(!out.redo);
        assert_eq!(out.center, (164.0, 110.0));
    }

    #[test]
    fn blob_near_edge_redo() {
        // center 5 px from the left edge, radius 12
        let p = blob_map(128, 128, 5.0, 64.0, 12.0);
        let out = postprocess_unet_mask(&p, (0.0, 0.0)).unwrap();
        assert!(out.redo);
        assert!(out.ellipse.semi_major > out.center.0.min(out.center.1));
    }

    #[test]
    fn flat_half_map_has_no_blob() {
        let p = Plane::filled(64, 64, 0.5);
        assert_eq!(postprocess_unet_mask(&p, (0.0, 0.0)), Err(VisionError::NoBlob));
    }

    #[test]
    fn frame_with_dark_disk_and_glint() {
        let mut levels = alloc::vec![128u8; 96 * 96];
        for y in 0..96 {
            for x in 0..96 {
                let d = libm::hypot(x as f64 - 40.0, y as f64 - 50.0);
                if d <= 14.0 {
                    levels[y * 96 + x] = 10;
                }
                if libm::hypot(x as f64 - 70.0, y as f64 - 20.0) <= 2.0 {
                    levels[y * 96 + x] = 255;
                }
            }
        }
        let img = GrayImage::from_levels(96, 96, levels).unwrap();
        let est = analyze_frame(&img, &ThresholdConfig::default());
        let p = est.pupil.unwrap();
        assert_eq!(p.center, (40.0, 50.0));
        assert_eq!(est.cr.unwrap().center, (70.0, 20.0));
        let rep = detector_report(&img, &ThresholdConfig::default());
        assert!(rep.confidence > 0.9 && rep.confidence <= 1.0);

        let roi = Roi {
            x: 20,
            y: 30,
            width: 50,
            height: 50,
        };
        let cfg = ThresholdConfig {
            roi: Some(roi),
            pupil_threshold: ThresholdMode::Relative(0.5 / 255.0),
            ..ThresholdConfig::default()
        };
        let p = analyze_frame(&img, &cfg).pupil.unwrap();
        assert_eq!(p.center, (40.0, 50.0));
        assert!((p.threshold - 10.5 / 255.0).abs() < 1e-12);
    }
}
