use leyes_core::gaze::{
    accuracy_with_settle, calibration_basis, fit_calibration, rms_s2s_samples, std_precision_samples,
    FixationTarget, Signal,
};
use proptest::prelude::*;

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), n)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn window_values(sig: &Signal, n: usize, rms: bool) -> Vec<f64> {
    let m = if rms { rms_s2s_samples(sig, n) } else { std_precision_samples(sig, n) };
    m.unwrap().windows.into_iter().map(|w| w.1).collect()
}

/// Sum of squared residuals of `coef` against `target` over `rows`.
fn sse(rows: &[[f64; 6]], coef: &[f64; 6], target: &[f64]) -> f64 {
    rows.iter()
        .zip(target)
        .map(|(r, t)| {
            let p: f64 = r.iter().zip(coef).map(|(a, b)| a * b).sum();
            (p - t) * (p - t)
        })
        .sum()
}

proptest! {
    #[test]
    fn metrics_ignore_translation_and_scale_linearly(
        pts in points(3..80),
        shift in (-1e3..1e3f64, -1e3..1e3f64),
        k in 0.01..100.0f64,
        frac in 0.0..1.0f64,
    ) {
        let n = pts.len();
        let win = 2 + (frac * (n - 2) as f64) as usize;
        let sig = Signal::uniform(pts.clone(), 250.0).unwrap();
        let moved = Signal::uniform(pts.iter().map(|p| (p.0 + shift.0, p.1 + shift.1)).collect(), 250.0).unwrap();
        let scaled = sig.scaled(k);
        for rms in [true, false] {
            let base = window_values(&sig, win, rms);
            for (a, b) in window_values(&moved, win, rms).iter().zip(&base) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + shift.0.abs() + shift.1.abs()));
            }
            for (a, b) in window_values(&scaled, win, rms).iter().zip(&base) {
                prop_assert!(close(*a, k * b));
            }
        }
    }

    #[test]
    fn reversal_keeps_rms(pts in points(2..80)) {
        let n = pts.len();
        let fwd = Signal::uniform(pts.clone(), 500.0).unwrap();
        let rev = Signal::uniform(pts.into_iter().rev().collect(), 500.0).unwrap();
        let a = rms_s2s_samples(&fwd, n).unwrap().median.unwrap();
        let b = rms_s2s_samples(&rev, n).unwrap().median.unwrap();
        prop_assert!(close(a, b));
    }

    #[test]
    fn invalid_tail_leaves_the_median_alone(pts in points(4..60), tail in 1usize..30, frac in 0.0..1.0f64) {
        let n = pts.len();
        let win = 2 + (frac * (n - 2) as f64) as usize;
        let sig = Signal::uniform(pts.clone(), 100.0).unwrap();
        let mut longer = pts;
        longer.extend(std::iter::repeat((1e6, -1e6)).take(tail));
        let ts: Vec<f64> = (0..longer.len()).map(|i| i as f64 * 10.0).collect();
        let valid: Vec<bool> = (0..longer.len()).map(|i| i < n).collect();
        let ext = Signal::new(ts, longer, valid, 100.0).unwrap();
        prop_assert_eq!(rms_s2s_samples(&sig, win).unwrap().median, rms_s2s_samples(&ext, win).unwrap().median);
        prop_assert_eq!(std_precision_samples(&sig, win).unwrap().median, std_precision_samples(&ext, win).unwrap().median);
    }

    #[test]
    fn accuracy_ignores_sample_order(pts in points(20..60), seed in any::<u64>(), tx in -5.0..5.0f64, ty in -5.0..5.0f64) {
        let n = pts.len();
        let target = FixationTarget { x: tx, y: ty, t_on_ms: 0.0, t_off_ms: (n - 1) as f64 * 10.0 };
        let sig = Signal::uniform(pts.clone(), 100.0).unwrap();
        let mut shuffled = pts;
        // Fisher-Yates with a fixed LCG.
        let mut s = seed | 1;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let other = Signal::uniform(shuffled, 100.0).unwrap();
        let a = accuracy_with_settle(&sig, &[target], 0.0).unwrap();
        let b = accuracy_with_settle(&other, &[target], 0.0).unwrap();
        prop_assert!(close(a.mean, b.mean));
    }

    #[test]
    fn calibration_is_least_squares_optimal(
        data in prop::collection::vec(((-1.0..1.0f64, -1.0..1.0f64), (-5.0..5.0f64, -5.0..5.0f64)), 9..25),
        nudge in prop::collection::vec(-0.1..0.1f64, 6),
    ) {
        let pcr: Vec<(f64, f64)> = data.iter().map(|d| d.0).collect();
        let targets: Vec<(f64, f64)> = data.iter().map(|d| d.1).collect();
        let Ok(m) = fit_calibration(&pcr, &targets) else { return Ok(()) };
        let rows: Vec<[f64; 6]> = pcr.iter().map(|&(u, v)| calibration_basis(u, v)).collect();
        let tx: Vec<f64> = targets.iter().map(|t| t.0).collect();
        let best = sse(&rows, &m.x, &tx);
        let mut other = m.x;
        for (c, d) in other.iter_mut().zip(&nudge) {
            *c += d;
        }
        prop_assert!(best <= sse(&rows, &other, &tx) + 1e-9);
    }
}
