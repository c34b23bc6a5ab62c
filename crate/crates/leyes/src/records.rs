//! CSV records exchanged between commands.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use leyes_core::pcr::{PcrResult, PcrStatus};

/// `valid_flags` bit for a detected pupil.
pub const PUPIL_VALID: u8 = 1;
/// `valid_flags` bit for a detected CR.
pub const CR_VALID: u8 = 2;

/// One analyzed frame. Missing detections leave their columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRow {
    pub frame_index: usize,
    pub pupil_x: Option<f64>,
    pub pupil_y: Option<f64>,
    pub cr_x: Option<f64>,
    pub cr_y: Option<f64>,
    pub valid_flags: u8,
}

impl AnalyzeRow {
    pub fn pupil(&self) -> Option<(f64, f64)> {
        Some((self.pupil_x?, self.pupil_y?))
    }

    pub fn cr(&self) -> Option<(f64, f64)> {
        Some((self.cr_x?, self.cr_y?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcrRow {
    pub frame: usize,
    pub status: PcrStatus,
    pub pupil_x: f64,
    pub pupil_y: f64,
    pub cr_a_index: Option<usize>,
    pub cr_a_x: Option<f64>,
    pub cr_a_y: Option<f64>,
    pub cr_a_logit: Option<f64>,
    pub cr_b_index: Option<usize>,
    pub cr_b_x: Option<f64>,
    pub cr_b_y: Option<f64>,
    pub cr_b_logit: Option<f64>,
}

impl PcrRow {
    pub fn from_result(frame: usize, r: &PcrResult) -> Self {
        let [a, b] = match r.selected {
            Some([a, b]) => [Some(a), Some(b)],
            None => [None, None],
        };
        Self {
            frame,
            status: r.status,
            pupil_x: r.pupil_center.0,
            pupil_y: r.pupil_center.1,
            cr_a_index: a.map(|c| c.index),
            cr_a_x: a.map(|c| c.center.0),
            cr_a_y: a.map(|c| c.center.1),
            cr_a_logit: a.map(|c| c.logit),
            cr_b_index: b.map(|c| c.index),
            cr_b_x: b.map(|c| c.center.0),
            cr_b_y: b.map(|c| c.center.1),
            cr_b_logit: b.map(|c| c.logit),
        }
    }

    /// Midpoint of the two selected CRs, the reference point for the P-CR
    /// vector in multi-illuminator recordings.
    pub fn cr_reference(&self) -> Option<(f64, f64)> {
        if self.status != PcrStatus::Valid {
            return None;
        }
        Some(((self.cr_a_x? + self.cr_b_x?) / 2.0, (self.cr_a_y? + self.cr_b_y?) / 2.0))
    }
}

/// One gaze sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeRow {
    pub frame: usize,
    pub t_ms: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub valid: bool,
}

/// Writes `rows` with a header line, even when there are no rows.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>();
    rows.with_context(|| format!("parsing {}", path.display()))
}

pub const ANALYZE_HEADER: [&str; 6] = ["frame_index", "pupil_x", "pupil_y", "cr_x", "cr_y", "valid_flags"];
pub const PCR_HEADER: [&str; 12] = [
    "frame",
    "status",
    "pupil_x",
    "pupil_y",
    "cr_a_index",
    "cr_a_x",
    "cr_a_y",
    "cr_a_logit",
    "cr_b_index",
    "cr_b_x",
    "cr_b_y",
    "cr_b_logit",
];
pub const GAZE_HEADER: [&str; 5] = ["frame", "t_ms", "x", "y", "valid"];

/// P-CR vector per frame from either an analysis CSV (pupil minus CR) or a
/// selection CSV (pupil minus the midpoint of the two selected CRs),
/// detected from the header.
pub fn read_pcr_vectors(path: &Path) -> Result<Vec<(usize, Option<(f64, f64)>)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let is_selection = r.headers()?.iter().any(|h| h == "cr_a_x");
    drop(r);
    let diff = |p: Option<(f64, f64)>, c: Option<(f64, f64)>| Some((p?.0 - c?.0, p?.1 - c?.1));
    if is_selection {
        Ok(read_csv::<PcrRow>(path)?
            .into_iter()
            .map(|row| (row.frame, diff(Some((row.pupil_x, row.pupil_y)), row.cr_reference())))
            .collect())
    } else {
        Ok(read_csv::<AnalyzeRow>(path)?
            .into_iter()
            .map(|row| (row.frame_index, diff(row.pupil(), row.cr())))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_rows_round_trip_with_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let rows = vec![
            AnalyzeRow {
                frame_index: 0,
                pupil_x: Some(0.1 + 0.2),
                pupil_y: Some(-3.5),
                cr_x: None,
                cr_y: None,
                valid_flags: PUPIL_VALID,
            },
            AnalyzeRow {
                frame_index: 1,
                pupil_x: Some(10.0),
                pupil_y: Some(5.0),
                cr_x: Some(4.0),
                cr_y: Some(1.0),
                valid_flags: PUPIL_VALID | CR_VALID,
            },
        ];
        write_csv(&p, &ANALYZE_HEADER, &rows).unwrap();
        assert_eq!(read_csv::<AnalyzeRow>(&p).unwrap(), rows);
        let v = read_pcr_vectors(&p).unwrap();
        assert_eq!(v, vec![(0, None), (1, Some((6.0, 4.0)))]);
    }

    #[test]
    fn empty_csv_keeps_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_csv::<AnalyzeRow>(&p, &ANALYZE_HEADER, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), ANALYZE_HEADER.join(",") + "\n");
    }
}
