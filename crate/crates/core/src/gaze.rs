//! P-CR gaze signals, second-order polynomial calibration and
//! signal-quality metrics.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Analysis window used by the precision metrics.
pub const DEFAULT_WINDOW_MS: f64 = 200.0;
/// Start of each fixation ignored by the accuracy metric.
pub const DEFAULT_SETTLE_MS: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GazeError {
    #[error("signal fields have different lengths")]
    LengthMismatch,
    #[error("timestamps must be finite and strictly increasing")]
    NotMonotonic,
    #[error("sampling rate must be positive")]
    InvalidRate,
    #[error("signals are sampled at different times")]
    Misaligned,
    #[error("calibration design matrix is rank deficient")]
    RankDeficient,
    #[error("window of {window} samples does not fit {len} samples")]
    WindowTooLong { window: usize, len: usize },
    #[error("window must span at least 2 samples, got {0}")]
    WindowTooShort(usize),
    #[error("no valid samples in the interval of target {0}")]
    EmptyInterval(usize),
}

/// Time series of 2D positions with per-sample validity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub timestamps_ms: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub valid: Vec<bool>,
    pub rate_hz: f64,
}

impl Signal {
    pub fn new(timestamps_ms: Vec<f64>, points: Vec<(f64, f64)>, valid: Vec<bool>, rate_hz: f64) -> Result<Self, GazeError> {
        if timestamps_ms.len() != points.len() || points.len() != valid.len() {
            return Err(GazeError::LengthMismatch);
        }
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(GazeError::InvalidRate);
        }
        if timestamps_ms.iter().any(|t| !t.is_finite()) || timestamps_ms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GazeError::NotMonotonic);
        }
        Ok(Self {
            timestamps_ms,
            points,
            valid,
            rate_hz,
        })
    }

    /// All-valid signal sampled uniformly at `rate_hz` from t = 0.
    pub fn uniform(points: Vec<(f64, f64)>, rate_hz: f64) -> Result<Self, GazeError> {
        let dt = 1000.0 / rate_hz;
        let ts = (0..points.len()).map(|i| i as f64 * dt).collect();
        let valid = alloc::vec![true; points.len()];
        Self::new(ts, points, valid, rate_hz)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of samples covering `window_ms` at this signal's rate.
    pub fn window_samples(&self, window_ms: f64) -> usize {
        libm::round(window_ms * self.rate_hz / 1000.0).max(0.0) as usize
    }

    /// Every coordinate multiplied by `factor` (e.g. pixels to degrees).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|&(x, y)| (x * factor, y * factor)).collect(),
            ..self.clone()
        }
    }
}

/// Pupil minus CR, sample by sample. A sample is valid only if both
/// inputs are.
pub fn pcr_vector(pupil: &Signal, cr: &Signal) -> Result<Signal, GazeError> {
    if pupil.timestamps_ms != cr.timestamps_ms {
        return Err(GazeError::Misaligned);
    }
    Ok(Signal {
        timestamps_ms: pupil.timestamps_ms.clone(),
        points: pupil
            .points
            .iter()
            .zip(&cr.points)
            .map(|(p, c)| (p.0 - c.0, p.1 - c.1))
            .collect(),
        valid: pupil.valid.iter().zip(&cr.valid).map(|(a, b)| *a && *b).collect(),
        rate_hz: pupil.rate_hz,
    })
}

/// `[1, u, v, u², v², uv]`.
#[inline]
pub fn calibration_basis(u: f64, v: f64) -> [f64; 6] {
    [1.0, u, v, u * u, v * v, u * v]
}

/// Two second-order polynomials with an interaction term, one per output
/// coordinate, over [`calibration_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub x: [f64; 6],
    pub y: [f64; 6],
}

impl CalibrationModel {
    pub const IDENTITY: Self = Self {
        x: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        y: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    };

    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let b = calibration_basis(u, v);
        let dot = |c: &[f64; 6]| c.iter().zip(&b).map(|(c, b)| c * b).sum::<f64>();
        (dot(&self.x), dot(&self.y))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|c| c.is_finite())
    }
}

/// Least-squares calibration from P-CR vectors to target positions.
///
/// Solved by Householder QR on a column-equilibrated design matrix; a
/// numerically rank-deficient design is rejected.
pub fn fit_calibration(pcr: &[(f64, f64)], targets: &[(f64, f64)]) -> Result<CalibrationModel, GazeError> {
    if pcr.len() != targets.len() {
        return Err(GazeError::LengthMismatch);
    }
    let n = pcr.len();
    if n < 6 {
        return Err(GazeError::RankDeficient);
    }
    let mut design = DMatrix::<f64>::from_fn(n, 6, |r, c| calibration_basis(pcr[r].0, pcr[r].1)[c]);
    let mut scale = [0.0; 6];
    for (c, s) in scale.iter_mut().enumerate() {
        let m = design.column(c).amax();
        if !(m > 0.0 && m.is_finite()) {
            return Err(GazeError::RankDeficient);
        }
        *s = m;
        design.column_mut(c).unscale_mut(m);
    }
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..6).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..6).any(|i| r[(i, i)].abs() <= 1e-10 * diag_max) {
        return Err(GazeError::RankDeficient);
    }
    let q = qr.q();
    let solve = |rhs: DVector<f64>| -> Result<[f64; 6], GazeError> {
        let z = q.tr_mul(&rhs);
        let sol = r.solve_upper_triangular(&z).ok_or(GazeError::RankDeficient)?;
        let mut out = [0.0; 6];
        for (i, o) in out.iter_mut().enumerate() {
            *o = sol[i] / scale[i];
        }
        Ok(out)
    };
    let x = solve(DVector::from_iterator(n, targets.iter().map(|t| t.0)))?;
    let y = solve(DVector::from_iterator(n, targets.iter().map(|t| t.1)))?;
    Ok(CalibrationModel { x, y })
}

/// Maps every sample through `model`; validity is unchanged.
pub fn apply_calibration(model: &CalibrationModel, sig: &Signal) -> Signal {
    Signal {
        points: sig.points.iter().map(|&(u, v)| model.apply(u, v)).collect(),
        ..sig.clone()
    }
}

/// Per-window values of a sliding-window metric and their median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedMetric {
    pub window_samples: usize,
    /// `(first sample index, value)` for each window without invalid
    /// samples; the window advances one sample at a time.
    pub windows: Vec<(usize, f64)>,
    /// `None` when every window was skipped.
    pub median: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

fn sliding(sig: &Signal, n: usize, metric: impl Fn(&[(f64, f64)]) -> f64) -> Result<WindowedMetric, GazeError> {
    if n < 2 {
        return Err(GazeError::WindowTooShort(n));
    }
    if n > sig.len() {
        return Err(GazeError::WindowTooLong { window: n, len: sig.len() });
    }
    // Running count of invalid samples so each window is checked in O(1).
    let mut invalid_before = Vec::with_capacity(sig.len() + 1);
    invalid_before.push(0usize);
    for v in &sig.valid {
        invalid_before.push(invalid_before.last().unwrap() + usize::from(!*v));
    }
    let windows: Vec<(usize, f64)> = (0..=sig.len() - n)
        .filter(|&s| invalid_before[s + n] == invalid_before[s])
        .map(|s| (s, metric(&sig.points[s..s + n])))
        .collect();
    let values: Vec<f64> = windows.iter().map(|w| w.1).collect();
    Ok(WindowedMetric {
        window_samples: n,
        median: median(&values),
        windows,
    })
}

fn rms_of_steps(p: &[(f64, f64)]) -> f64 {
    let sum: f64 = p
        .windows(2)
        .map(|w| {
            let dx = w[1].0 - w[0].0;
            let dy = w[1].1 - w[0].1;
            dx * dx + dy * dy
        })
        .sum();
    libm::sqrt(sum / (p.len() - 1) as f64)
}

fn spread(p: &[(f64, f64)]) -> f64 {
    let n = p.len() as f64;
    let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
    let my = p.iter().map(|q| q.1).sum::<f64>() / n;
    let var: f64 = p
        .iter()
        .map(|q| (q.0 - mx) * (q.0 - mx) + (q.1 - my) * (q.1 - my))
        .sum::<f64>()
        / n;
    libm::sqrt(var)
}

/// RMS of sample-to-sample displacement in windows of `n` samples.
pub fn rms_s2s_samples(sig: &Signal, n: usize) -> Result<WindowedMetric, GazeError> {
    sliding(sig, n, rms_of_steps)
}

/// RMS sample-to-sample precision over `window_ms` windows.
pub fn rms_s2s(sig: &Signal, window_ms: f64) -> Result<WindowedMetric, GazeError> {
    rms_s2s_samples(sig, sig.window_samples(window_ms))
}

/// `sqrt(var x + var y)` (population variance) in windows of `n` samples.
pub fn std_precision_samples(sig: &Signal, n: usize) -> Result<WindowedMetric, GazeError> {
    sliding(sig, n, spread)
}

pub fn std_precision(sig: &Signal, window_ms: f64) -> Result<WindowedMetric, GazeError> {
    std_precision_samples(sig, sig.window_samples(window_ms))
}

/// A fixation target shown between `t_on_ms` and `t_off_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationTarget {
    pub x: f64,
    pub y: f64,
    pub t_on_ms: f64,
    pub t_off_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Distance between mean gaze and target, per target.
    pub offsets: Vec<f64>,
    pub mean: f64,
}

/// Accuracy with the first `settle_ms` of every fixation excluded.
pub fn accuracy_with_settle(gaze: &Signal, targets: &[FixationTarget], settle_ms: f64) -> Result<AccuracyReport, GazeError> {
    let mut offsets = Vec::with_capacity(targets.len());
    for (i, t) in targets.iter().enumerate() {
        let start = t.t_on_ms + settle_ms;
        let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
        for ((ts, p), ok) in gaze.timestamps_ms.iter().zip(&gaze.points).zip(&gaze.valid) {
            if *ok && *ts >= start && *ts <= t.t_off_ms {
                n += 1;
                sx += p.0;
                sy += p.1;
            }
        }
        if n == 0 {
            return Err(GazeError::EmptyInterval(i));
        }
        offsets.push(libm::hypot(sx / n as f64 - t.x, sy / n as f64 - t.y));
    }
    let mean = if offsets.is_empty() {
        0.0
    } else {
        offsets.iter().sum::<f64>() / offsets.len() as f64
    };
    Ok(AccuracyReport { offsets, mean })
}

pub fn accuracy(gaze: &Signal, targets: &[FixationTarget]) -> Result<AccuracyReport, GazeError> {
    accuracy_with_settle(gaze, targets, DEFAULT_SETTLE_MS)
}

/// How per-trial medians are combined across trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

impl Aggregate {
    pub fn combine(self, values: &[f64]) -> Option<f64> {
        match self {
            _ if values.is_empty() => None,
            Self::Mean => Some(values.iter().sum::<f64>() / values.len() as f64),
            Self::Median => median(values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial: usize,
    pub rms_s2s: Option<f64>,
    pub std: Option<f64>,
    pub accuracy: Option<f64>,
    pub target_offsets: Vec<f64>,
}

/// Signal-quality summary in output units (degrees when a conversion
/// factor is applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub window_ms: f64,
    pub aggregate: Aggregate,
    pub rms_s2s: Option<f64>,
    pub std: Option<f64>,
    pub accuracy_offset: Option<f64>,
    pub trials: Vec<TrialMetrics>,
}

/// One recorded trial: a gaze signal plus the targets shown during it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub gaze: Signal,
    pub targets: Vec<FixationTarget>,
}

/// Per-trial median RMS-S2S and STD plus accuracy, aggregated across
/// trials. Gaze coordinates are multiplied by `units_per_input` first;
/// targets are taken to be in output units already.
pub fn precision_report(
    trials: &[Trial],
    window_ms: f64,
    settle_ms: f64,
    aggregate: Aggregate,
    units_per_input: f64,
) -> Result<PrecisionReport, GazeError> {
    let mut rows = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        let gaze = t.gaze.scaled(units_per_input);
        let targets = &t.targets;
        let rms = rms_s2s(&gaze, window_ms)?.median;
        let std = std_precision(&gaze, window_ms)?.median;
        let acc = if targets.is_empty() {
            None
        } else {
            Some(accuracy_with_settle(&gaze, targets, settle_ms)?)
        };
        rows.push(TrialMetrics {
            trial: i,
            rms_s2s: rms,
            std,
            accuracy: acc.as_ref().map(|a| a.mean),
            target_offsets: acc.map(|a| a.offsets).unwrap_or_default(),
        });
    }
    let pick = |f: fn(&TrialMetrics) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        aggregate.combine(&v)
    };
    Ok(PrecisionReport {
        window_ms,
        aggregate,
        rms_s2s: pick(|r| r.rms_s2s),
        std: pick(|r| r.std),
        accuracy_offset: pick(|r| r.accuracy),
        trials: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sig(points: Vec<(f64, f64)>) -> Signal {
        Signal::uniform(points, 1000.0).unwrap()
    }

    #[test]
    fn pcr_vector_examples() {
        let p = sig(vec![(100.0, 50.0), (3.0, 4.0)]);
        let mut c = sig(vec![(90.0, 45.0), (3.0, 4.0)]);
        c.valid[1] = false;
        let v = pcr_vector(&p, &c).unwrap();
        assert_eq!(v.points, vec![(10.0, 5.0), (0.0, 0.0)]);
        assert_eq!(v.valid, vec![true, false]);
        let z = pcr_vector(&p, &p).unwrap();
        assert!(z.points.iter().all(|&q| q == (0.0, 0.0)));
        let shifted = Signal::new(vec![0.0, 2.0], vec![(0.0, 0.0); 2], vec![true; 2], 1000.0).unwrap();
        assert_eq!(pcr_vector(&p, &shifted), Err(GazeError::Misaligned));
    }

    fn grid() -> Vec<(f64, f64)> {
        let mut g = Vec::new();
        for u in [-10.0, 0.0, 10.0] {
            for v in [-8.0, 0.0, 8.0] {
                g.push((u, v));
            }
        }
        g
    }

    #[test]
    fn calibration_in_class_and_identity() {
        let g = grid();
        let targets: Vec<(f64, f64)> = g
            .iter()
            .map(|&(u, v)| (2.0 + 0.1 * u + 0.01 * v + 0.001 * u * u, -1.0 + 0.2 * v))
            .collect();
        let m = fit_calibration(&g, &targets).unwrap();
        let want_x = [2.0, 0.1, 0.01, 0.001, 0.0, 0.0];
        let want_y = [-1.0, 0.0, 0.2, 0.0, 0.0, 0.0];
        for i in 0..6 {
            assert!((m.x[i] - want_x[i]).abs() < 1e-9);
            assert!((m.y[i] - want_y[i]).abs() < 1e-9);
        }
        let id = fit_calibration(&g, &g).unwrap();
        for i in 0..6 {
            assert!((id.x[i] - CalibrationModel::IDENTITY.x[i]).abs() < 1e-12);
            assert!((id.y[i] - CalibrationModel::IDENTITY.y[i]).abs() < 1e-12);
        }
        assert_eq!(fit_calibration(&g[..5], &targets[..5]), Err(GazeError::RankDeficient));
        // nine points on a line cannot pin down six terms
        let line: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert_eq!(fit_calibration(&line, &line), Err(GazeError::RankDeficient));
    }

    #[test]
    fn apply_examples() {
        let s = sig(vec![(1.0, 2.0), (-3.0, 0.5)]);
        assert_eq!(apply_calibration(&CalibrationModel::IDENTITY, &s), s);
        let m = CalibrationModel {
            x: [4.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            y: [-2.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        };
        assert!(apply_calibration(&m, &s).points.iter().all(|&p| p == (4.0, -2.0)));
    }

    #[test]
    fn rms_examples() {
        let flat = sig(vec![(3.0, 3.0); 10]);
        assert_eq!(rms_s2s_samples(&flat, 4).unwrap().median, Some(0.0));
        let alt = sig((0..10).map(|i| ((i % 2) as f64, 0.0)).collect());
        let r = rms_s2s_samples(&alt, 4).unwrap();
        assert!(r.windows.iter().all(|w| w.1 == 1.0));
        let step = sig(vec![(0.0, 0.0), (0.0, 0.0), (3.0, 0.0), (3.0, 0.0)]);
        assert_eq!(rms_s2s_samples(&step, 4).unwrap().median, Some(libm::sqrt(3.0)));
    }

    #[test]
    fn std_examples() {
        let flat = sig(vec![(3.0, 3.0); 10]);
        assert_eq!(std_precision_samples(&flat, 5).unwrap().median, Some(0.0));
        let two = sig(vec![(0.0, 1.0), (2.0, 1.0), (0.0, 1.0), (2.0, 1.0)]);
        assert_eq!(std_precision_samples(&two, 4).unwrap().median, Some(1.0));
        // same spread, different smoothness
        let drift = sig(vec![(0.0, 0.0), (0.0, 0.0), (2.0, 0.0), (2.0, 0.0)]);
        let alt = sig(vec![(0.0, 0.0), (2.0, 0.0), (0.0, 0.0), (2.0, 0.0)]);
        assert_eq!(
            std_precision_samples(&drift, 4).unwrap().median,
            std_precision_samples(&alt, 4).unwrap().median
        );
        assert!(rms_s2s_samples(&drift, 4).unwrap().median < rms_s2s_samples(&alt, 4).unwrap().median);
    }

    #[test]
    fn window_rules() {
        let s = sig(vec![(0.0, 0.0); 5]);
        assert_eq!(rms_s2s_samples(&s, 6), Err(GazeError::WindowTooLong { window: 6, len: 5 }));
        assert_eq!(rms_s2s_samples(&s, 1), Err(GazeError::WindowTooShort(1)));
        assert_eq!(s.window_samples(200.0), 200);
        let mut gap = sig((0..8).map(|i| (i as f64, 0.0)).collect());
        gap.valid[3] = false;
        let r = rms_s2s_samples(&gap, 3).unwrap();
        assert_eq!(r.windows.iter().map(|w| w.0).collect::<Vec<_>>(), vec![0, 4, 5]);
    }

    #[test]
    fn accuracy_examples() {
        let mut pts = vec![(1.0, 0.0); 500];
        let target = FixationTarget {
            x: 0.0,
            y: 0.0,
            t_on_ms: 0.0,
            t_off_ms: 499.0,
        };
        let a = accuracy(&sig(pts.clone()), &[target]).unwrap();
        assert_eq!(a.mean, 1.0);
        // settle window: samples 300..499, half at (0,0) and half at (2,0)
        for (i, p) in pts.iter_mut().enumerate() {
            *p = if i < 400 { (0.0, 0.0) } else { (2.0, 0.0) };
        }
        assert_eq!(accuracy(&sig(pts.clone()), &[target]).unwrap().offsets, vec![1.0]);
        let late = FixationTarget {
            t_on_ms: 400.0,
            t_off_ms: 450.0,
            ..target
        };
        assert_eq!(accuracy(&sig(pts), &[late]), Err(GazeError::EmptyInterval(0)));
    }

    #[test]
    fn report_aggregates() {
        let t = Trial {
            gaze: sig((0..400).map(|i| ((i % 2) as f64, 0.0)).collect()),
            targets: vec![FixationTarget {
                x: 1.0,
                y: 0.0,
                t_on_ms: 0.0,
                t_off_ms: 399.0,
            }],
        };
        let r = precision_report(&[t.clone(), t], 200.0, 0.0, Aggregate::Mean, 2.0).unwrap();
        assert_eq!(r.rms_s2s, Some(2.0));
        assert_eq!(r.std, Some(1.0));
        assert!(r.accuracy_offset.unwrap().abs() < 1e-12);
        assert_eq!(r.trials.len(), 2);
    }
}
