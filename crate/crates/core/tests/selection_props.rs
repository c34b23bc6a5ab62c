use leyes_core::pcr::{
    best_two, decide_crop, select_best_two_crs, CropBranch, DetectorReport, FeatureMapSet, LogitMap, PcrStatus,
};
use leyes_core::plane::Plane;
use proptest::prelude::*;

/// Small integer-valued maps so shifted and scaled copies stay exact.
fn map_set() -> impl Strategy<Value = FeatureMapSet> {
    (2usize..6, 2usize..6, 2usize..8).prop_flat_map(|(w, h, k)| {
        let map = prop::collection::vec(-3i8..6, w * h)
            .prop_map(move |v| Plane::from_vec(w, h, v.into_iter().map(f32::from).collect()).unwrap());
        (map.clone(), prop::collection::vec(map, k))
            .prop_map(|(pupil, crs): (LogitMap, Vec<LogitMap>)| FeatureMapSet::new(pupil, crs, (0, 0)).unwrap())
    })
}

fn transformed(set: &FeatureMapSet, f: impl Fn(f32) -> f32 + Copy) -> FeatureMapSet {
    FeatureMapSet {
        pupil_map: set.pupil_map.map(|&v| f(v)),
        cr_maps: set.cr_maps.iter().map(|m| m.map(|&v| f(v))).collect(),
        crop_origin: set.crop_origin,
    }
}

/// Indices of every map ranked by peak, ignoring the validity threshold.
fn ranking(set: &FeatureMapSet) -> Vec<usize> {
    let peaks: Vec<f32> = set
        .cr_maps
        .iter()
        .map(|m| m.as_slice().iter().copied().fold(f32::NEG_INFINITY, f32::max))
        .collect();
    let mut idx: Vec<usize> = (0..peaks.len()).collect();
    idx.sort_by(|&a, &b| peaks[b].total_cmp(&peaks[a]).then(a.cmp(&b)));
    idx
}

proptest! {
    #[test]
    fn validity_follows_the_peak_count(set in map_set()) {
        let qualifying = set.cr_maps.iter().filter(|m| m.as_slice().iter().any(|&v| v >= 1.0)).count();
        let r = select_best_two_crs(&set);
        prop_assert_eq!(r.status == PcrStatus::Valid, qualifying >= 2);
        prop_assert_eq!(r.selected.is_some(), qualifying >= 2);
        if let Some([a, b]) = r.selected {
            let order = ranking(&set);
            prop_assert_eq!([a.index, b.index], [order[0], order[1]]);
        }
    }

    #[test]
    fn shifting_all_maps_keeps_the_selection(set in map_set(), shift in -4i8..4) {
        let shifted = transformed(&set, |v| v + f32::from(shift));
        let (a, b) = (select_best_two_crs(&set), select_best_two_crs(&shifted));
        if let (Some(x), Some(y)) = (a.selected, b.selected) {
            prop_assert_eq!([x[0].index, x[1].index], [y[0].index, y[1].index]);
            prop_assert_eq!([x[0].center, x[1].center], [y[0].center, y[1].center]);
        }
        prop_assert_eq!(a.pupil_center, b.pupil_center);
    }

    #[test]
    fn scaling_all_maps_keeps_the_order(set in map_set(), k in 1u8..5) {
        let scaled = transformed(&set, |v| v * f32::from(k));
        prop_assert_eq!(ranking(&set), ranking(&scaled));
        if let (Some(x), Some(y)) = (select_best_two_crs(&set).selected, select_best_two_crs(&scaled).selected) {
            prop_assert_eq!([x[0].index, x[1].index], [y[0].index, y[1].index]);
        }
    }

    #[test]
    fn best_two_matches_sorting(peaks in prop::collection::vec(prop::sample::select(vec![-1.0f64, 0.5, 1.0, 2.0, 2.5, 7.0]), 0..10)) {
        let mut idx: Vec<usize> = (0..peaks.len()).filter(|&i| peaks[i] >= 1.0).collect();
        idx.sort_by(|&a, &b| peaks[b].total_cmp(&peaks[a]).then(a.cmp(&b)));
        let want = (idx.len() >= 2).then(|| [idx[0], idx[1]]);
        prop_assert_eq!(best_two(&peaks), want);
    }

    #[test]
    fn crop_branch_flips_once_over_the_threshold_sweep(
        confidence in 0.0..=1.0f64,
        cx in 0.0..320.0f64,
        cy in 0.0..240.0f64,
    ) {
        let report = DetectorReport { center: (cx, cy), confidence };
        let branches: Vec<CropBranch> = (0..=1000)
            .map(|i| decide_crop(&report, i as f64 / 1000.0, 320, 240, 128).unwrap().branch)
            .collect();
        let flips = branches.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(branches[0], CropBranch::Detector);
        let expected = usize::from(branches[1000] == CropBranch::ImageCenter);
        prop_assert_eq!(flips, expected);
        for (i, b) in branches.iter().enumerate() {
            let d = decide_crop(&report, i as f64 / 1000.0, 320, 240, 128).unwrap();
            prop_assert!(d.origin.0 + 128 <= 320 && d.origin.1 + 128 <= 240);
            prop_assert_eq!(*b == CropBranch::Detector, confidence >= i as f64 / 1000.0);
        }
    }
}
