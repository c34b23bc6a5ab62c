//! Pupil–CR feature selection: adaptive crop decision, per-map peaks, the
//! two-most-confident-CR rule, and the binary map interchange format.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plane::Plane;
use crate::stream::{gaussian_bump, LabelSet, DEFAULT_MAP_SIGMA};

/// Side length of the network input crop.
pub const CROP_SIZE: usize = 128;

/// A CR map counts as a detection when its peak logit reaches this value.
pub const PEAK_MIN: f64 = 1.0;

/// Single-channel logit map.
pub type LogitMap = Plane<f32>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PcrError {
    #[error("confidence threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("crop of {crop} px does not fit a {width}x{height} image")]
    CropTooLarge { crop: usize, width: usize, height: usize },
    #[error("all maps must share one size")]
    MixedDimensions,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapFormatError {
    #[error("malformed map header: {0}")]
    MalformedHeader(String),
    #[error("map data does not match header dimensions: {0}")]
    DimensionMismatch(String),
    #[error("map file truncated: expected {expected} data bytes, found {found}")]
    ShortFile { expected: usize, found: usize },
}

/// Pupil center from an external (or classical) detector with a
/// confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub center: (f64, f64),
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropBranch {
    /// Centered on the detector's pupil estimate.
    Detector,
    /// Centered on the image.
    ImageCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropDecision {
    pub origin: (usize, usize),
    pub branch: CropBranch,
}

/// Chooses the crop: around the detector's center when its confidence is
/// at least `threshold`, otherwise around the image center. The origin is
/// clamped so the crop lies inside the image.
pub fn decide_crop(
    report: &DetectorReport,
    threshold: f64,
    width: usize,
    height: usize,
    crop: usize,
) -> Result<CropDecision, PcrError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PcrError::InvalidThreshold(threshold));
    }
    if crop == 0 || crop > width || crop > height {
        return Err(PcrError::CropTooLarge { crop, width, height });
    }
    let (branch, (cx, cy)) = if report.confidence >= threshold {
        (CropBranch::Detector, report.center)
    } else {
        (CropBranch::ImageCenter, ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0))
    };
    let half = (crop as f64 - 1.0) / 2.0;
    let place = |c: f64, size: usize| {
        let o = libm::round(c - half);
        let max = (size - crop) as f64;
        if o.is_nan() {
            0
        } else {
            o.clamp(0.0, max) as usize
        }
    };
    Ok(CropDecision {
        origin: (place(cx, width), place(cy, height)),
        branch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub x: usize,
    pub y: usize,
}

/// Maximum of a map and its pixel; the smallest row-major index wins ties.
/// NaN entries are ignored unless the whole map is NaN.
pub fn peak_of_map(map: &LogitMap) -> Peak {
    let mut best = 0;
    let mut best_v = f32::NAN;
    for (i, &v) in map.as_slice().iter().enumerate() {
        if best_v.is_nan() && !v.is_nan() || v > best_v {
            best = i;
            best_v = v;
        }
    }
    let w = map.width().max(1);
    Peak {
        value: f64::from(best_v),
        x: best % w,
        y: best / w,
    }
}

/// Peak position refined by a 1D parabola through the peak and its two
/// neighbors along each axis. Offsets are limited to half a pixel.
pub fn refine_peak(map: &LogitMap, peak: &Peak) -> (f64, f64) {
    let axis = |l: Option<f32>, c: f32, r: Option<f32>| match (l, r) {
        (Some(l), Some(r)) => {
            let (l, c, r) = (f64::from(l), f64::from(c), f64::from(r));
            let den = l - 2.0 * c + r;
            if den < 0.0 {
                (0.5 * (l - r) / den).clamp(-0.5, 0.5)
            } else {
                0.0
            }
        }
        _ => 0.0,
    };
    let (x, y) = (peak.x, peak.y);
    let c = map.at(x, y);
    let get = |x: Option<usize>, y: Option<usize>| match (x, y) {
        (Some(x), Some(y)) if x < map.width() && y < map.height() => Some(map.at(x, y)),
        _ => None,
    };
    let dx = axis(get(x.checked_sub(1), Some(y)), c, get(Some(x + 1), Some(y)));
    let dy = axis(get(Some(x), y.checked_sub(1)), c, get(Some(x), Some(y + 1)));
    (x as f64 + dx, y as f64 + dy)
}

/// Network output for one crop: the pupil map and one map per
/// illuminator, plus the crop's position in the full image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapSet {
    pub pupil_map: LogitMap,
    pub cr_maps: Vec<LogitMap>,
    pub crop_origin: (usize, usize),
}

impl FeatureMapSet {
    pub fn new(pupil_map: LogitMap, cr_maps: Vec<LogitMap>, crop_origin: (usize, usize)) -> Result<Self, PcrError> {
        if cr_maps.iter().any(|m| !m.same_dims(&pupil_map)) {
            return Err(PcrError::MixedDimensions);
        }
        Ok(Self {
            pupil_map,
            cr_maps,
            crop_origin,
        })
    }

    pub fn width(&self) -> usize {
        self.pupil_map.width()
    }

    pub fn height(&self) -> usize {
        self.pupil_map.height()
    }

    /// Map count `k + 1`.
    pub fn channel_count(&self) -> usize {
        1 + self.cr_maps.len()
    }

    pub fn channels(&self) -> impl Iterator<Item = &LogitMap> {
        core::iter::once(&self.pupil_map).chain(&self.cr_maps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcrStatus {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedCr {
    /// 0-based illuminator index.
    pub index: usize,
    /// Center in full-image coordinates.
    pub center: (f64, f64),
    pub logit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcrResult {
    pub status: PcrStatus,
    /// Pupil center in full-image coordinates.
    pub pupil_center: (f64, f64),
    /// The two selected CRs, highest logit first; present iff valid.
    pub selected: Option<[SelectedCr; 2]>,
}

/// Indices of the two largest peaks that reach [`PEAK_MIN`], highest first
/// and lower index first on ties; `None` when fewer than two qualify.
pub fn best_two(peaks: &[f64]) -> Option<[usize; 2]> {
    let mut first: Option<usize> = None;
    let mut second: Option<usize> = None;
    for (i, &v) in peaks.iter().enumerate() {
        if !(v >= PEAK_MIN) {
            continue;
        }
        match first {
            Some(f) if v <= peaks[f] => {
                if second.is_none_or(|s| v > peaks[s]) {
                    second = Some(i);
                }
            }
            _ => {
                second = first;
                first = Some(i);
            }
        }
    }
    Some([first?, second?])
}

/// Selects the two most confident CRs, with integer peak positions.
pub fn select_best_two_crs(maps: &FeatureMapSet) -> PcrResult {
    select_best_two_crs_with(maps, false)
}

/// As [`select_best_two_crs`], optionally refining peak positions to
/// subpixel precision.
pub fn select_best_two_crs_with(maps: &FeatureMapSet, subpixel: bool) -> PcrResult {
    let (ox, oy) = (maps.crop_origin.0 as f64, maps.crop_origin.1 as f64);
    let locate = |m: &LogitMap, p: &Peak| {
        let (x, y) = if subpixel {
            refine_peak(m, p)
        } else {
            (p.x as f64, p.y as f64)
        };
        (x + ox, y + oy)
    };
    let pupil_peak = peak_of_map(&maps.pupil_map);
    let pupil_center = locate(&maps.pupil_map, &pupil_peak);
    let peaks: Vec<Peak> = maps.cr_maps.iter().map(peak_of_map).collect();
    let values: Vec<f64> = peaks.iter().map(|p| p.value).collect();
    let selected = best_two(&values).map(|pair| {
        pair.map(|i| SelectedCr {
            index: i,
            center: locate(&maps.cr_maps[i], &peaks[i]),
            logit: peaks[i].value,
        })
    });
    PcrResult {
        status: if selected.is_some() {
            PcrStatus::Valid
        } else {
            PcrStatus::Invalid
        },
        pupil_center,
        selected,
    }
}

/// Maps an ideal network would produce for `labels`: a Gaussian bump of
/// height `peak_scale` at each present feature (in crop coordinates) and an
/// all-zero map for each absent one.
pub fn synthesize_oracle_maps(
    labels: &LabelSet,
    width: usize,
    height: usize,
    crop_origin: (usize, usize),
    peak_scale: f64,
) -> FeatureMapSet {
    let (ox, oy) = (crop_origin.0 as f64, crop_origin.1 as f64);
    let bump = |x: f64, y: f64| {
        gaussian_bump(width, height, x - ox, y - oy, DEFAULT_MAP_SIGMA, peak_scale).map(|&v| v as f32)
    };
    let pupil_map = match labels.pupil {
        Some(p) => bump(p.x, p.y),
        None => Plane::filled(width, height, 0.0),
    };
    let cr_maps = labels
        .crs
        .iter()
        .map(|c| {
            if c.present {
                bump(c.x, c.y)
            } else {
                Plane::filled(width, height, 0.0)
            }
        })
        .collect();
    FeatureMapSet {
        pupil_map,
        cr_maps,
        crop_origin,
    }
}

const MAGIC: &str = "LEYESMAPS";
const VERSION: u32 = 1;

/// Serialized size of a map file.
pub fn encoded_len(width: usize, height: usize, channels: usize) -> usize {
    header_line(width, height, channels).len() + channels * width * height * 4
}

fn header_line(width: usize, height: usize, channels: usize) -> String {
    format!("{MAGIC} {VERSION} {width} {height} {channels}\n")
}

/// Text header line, then every map row-major as little-endian `f32`,
/// pupil first. The crop origin is not stored.
pub fn encode_maps(set: &FeatureMapSet) -> Result<Vec<u8>, MapFormatError> {
    let (w, h) = (set.width(), set.height());
    if set.cr_maps.iter().any(|m| !m.same_dims(&set.pupil_map)) {
        return Err(MapFormatError::DimensionMismatch("maps differ in size".into()));
    }
    let mut out = Vec::with_capacity(encoded_len(w, h, set.channel_count()));
    out.extend_from_slice(header_line(w, h, set.channel_count()).as_bytes());
    for m in set.channels() {
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_maps(bytes: &[u8]) -> Result<FeatureMapSet, MapFormatError> {
    let malformed = |why: &str| MapFormatError::MalformedHeader(why.into());
    let nl = bytes
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed("no header line"))?;
    let line = core::str::from_utf8(&bytes[..nl]).map_err(|_| malformed("header is not text"))?;
    let fields: Vec<&str> = line.split(' ').collect();
    let [magic, version, w, h, n] = fields[..] else {
        return Err(malformed("expected 5 fields"));
    };
    if magic != MAGIC {
        return Err(malformed("bad magic"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| MapFormatError::MalformedHeader(format!("bad number `{s}`")));
    if num(version)? != VERSION as usize {
        return Err(malformed("unsupported version"));
    }
    let (w, h, n) = (num(w)?, num(h)?, num(n)?);
    if w == 0 || h == 0 || n == 0 {
        return Err(MapFormatError::DimensionMismatch(format!("{w}x{h} with {n} maps")));
    }
    let per_map = w
        .checked_mul(h)
        .and_then(|p| p.checked_mul(4))
        .ok_or_else(|| malformed("dimensions overflow"))?;
    let expected = per_map.checked_mul(n).ok_or_else(|| malformed("dimensions overflow"))?;
    let data = &bytes[nl + 1..];
    if data.len() < expected {
        return Err(MapFormatError::ShortFile {
            expected,
            found: data.len(),
        });
    }
    if data.len() > expected {
        return Err(MapFormatError::DimensionMismatch(format!(
            "{} bytes beyond the {n} declared maps",
            data.len() - expected
        )));
    }
    let mut maps = data.chunks_exact(per_map).map(|chunk| {
        let vals = chunk
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Plane::from_vec(w, h, vals).expect("chunk size matches")
    });
    let pupil_map = maps.next().expect("n >= 1");
    Ok(FeatureMapSet {
        pupil_map,
        cr_maps: maps.collect(),
        crop_origin: (0, 0),
    })
}
