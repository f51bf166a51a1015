use beamprint::eval::{binned_error_by_detections, error_cdf, stats_of};
use beamprint::geometry::{Point2, Rect};
use beamprint::pipeline::{epoch_view, Dataset, InputMode, NoiseModel, PreprocessConfig};
use beamprint::propagation::{classify_los, trace_paths, LosClass, RayPath, TraceConfig};
use beamprint::radio::{
    build_codebook, build_fingerprint, synthesize_pdp, AntennaPattern, SamplingConfig,
};
use beamprint::scene::{generate_manhattan_scene, ManhattanParams};
use proptest::prelude::*;

fn ray() -> impl Strategy<Value = RayPath> {
    (0.0..4.0e-6f64, -150.0..-80.0f64, 0.0..360.0f64).prop_map(|(delay, path_gain, az)| RayPath {
        delay,
        path_gain,
        departure_azimuth: az,
        arrival_azimuth: 0.0,
        bounces: 0,
        length: delay * 299_792_458.0,
        walls: vec![],
        reflection_points: vec![],
    })
}

fn same_profile(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.is_nan() && y.is_nan()) || (x - y).abs() < tol)
}

proptest! {
    #[test]
    fn rotating_beams_and_paths_together_changes_nothing(
        paths in prop::collection::vec(ray(), 1..12),
        boresight in 0.0..360.0f64,
        shift in -720.0..720.0f64,
    ) {
        let cfg = SamplingConfig::default();
        let beam = AntennaPattern::HORN.pointing(boresight);
        let rotated_beam = AntennaPattern::HORN.pointing(boresight + shift);
        let rotated: Vec<RayPath> = paths
            .iter()
            .map(|p| RayPath { departure_azimuth: (p.departure_azimuth + shift).rem_euclid(360.0), ..p.clone() })
            .collect();
        let a = synthesize_pdp(&paths, &beam, &cfg);
        let b = synthesize_pdp(&rotated, &rotated_beam, &cfg);
        prop_assert!(same_profile(&a, &b, 1e-9));
    }

    #[test]
    fn adding_a_path_never_lowers_a_bin(
        paths in prop::collection::vec(ray(), 0..12),
        extra in ray(),
        boresight in 0.0..360.0f64,
    ) {
        let cfg = SamplingConfig::default();
        let beam = AntennaPattern::HORN.pointing(boresight);
        let before = synthesize_pdp(&paths, &beam, &cfg);
        let mut more = paths.clone();
        more.push(extra);
        let after = synthesize_pdp(&more, &beam, &cfg);
        for (b, a) in before.iter().zip(&after) {
            if !b.is_nan() {
                prop_assert!(!a.is_nan() && *a >= *b);
            }
        }
    }

    #[test]
    fn error_summaries_are_consistent(
        errors in prop::collection::vec(0.0..500.0f64, 1..300),
        seed in any::<u64>(),
    ) {
        let s = stats_of(&errors).unwrap();
        let ms = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
        prop_assert!((s.rmse * s.rmse - ms).abs() <= 1e-12 * ms.max(1e-300));
        let cdf = error_cdf(&errors).unwrap();
        prop_assert!((cdf.quantile(0.95) - s.p95).abs() < 1e-9);
        let detections: Vec<usize> = (0..errors.len()).map(|i| ((seed as usize) ^ (i * 2654435761)) % 2624).collect();
        let bins = binned_error_by_detections(&detections, &errors, 10).unwrap();
        prop_assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), errors.len());
    }
}

#[test]
fn adjacent_beams_share_delay_bins_at_los_receivers() {
    let scene = generate_manhattan_scene(
        4,
        ManhattanParams {
            side: 200.0,
            block: 30.0,
            street: 20.0,
            jitter: 0.1,
        },
    )
    .unwrap();
    let cfg = TraceConfig::for_scene(&scene);
    let sampling = SamplingConfig::default();
    let codebook = build_codebook(90.0, 155.0, 5.0, AntennaPattern::HORN).unwrap();
    let mut checked = 0;
    for i in 0..40 {
        let rx = Point2::new(-95.0 + 4.75 * i as f64, 0.5 + (i % 7) as f64);
        if classify_los(&scene, rx) != LosClass::Los {
            continue;
        }
        let paths = trace_paths(&scene, rx, &cfg).unwrap().paths;
        let pdps: Vec<Vec<f64>> = codebook
            .entries()
            .iter()
            .map(|b| synthesize_pdp(&paths, b, &sampling))
            .collect();
        for w in pdps.windows(2) {
            let hit = |v: &Vec<f64>| v.iter().map(|x| !x.is_nan()).collect::<Vec<_>>();
            assert_eq!(hit(&w[0]), hit(&w[1]));
        }
        checked += 1;
    }
    assert!(checked > 5);
}

#[test]
fn fingerprint_has_2624_entries() {
    let scene = generate_manhattan_scene(
        1,
        ManhattanParams {
            side: 200.0,
            block: 30.0,
            street: 20.0,
            jitter: 0.1,
        },
    )
    .unwrap();
    let codebook = build_codebook(90.0, 155.0, 5.0, AntennaPattern::HORN).unwrap();
    let obs = build_fingerprint(
        &scene,
        Point2::new(10.0, 0.0),
        &codebook,
        &TraceConfig::for_scene(&scene),
        &SamplingConfig::default(),
    )
    .unwrap();
    assert_eq!(obs.fingerprint.values().len(), 2624);
}

fn flat_dataset(value: f32, n: usize) -> Dataset {
    let labels: Vec<[f32; 2]> = (0..n).map(|i| [i as f32, (i / 100) as f32]).collect();
    Dataset::from_parts(
        1,
        1,
        Rect::new(-1.0, -1.0, 2000.0, 2000.0),
        Point2::new(0.0, 0.0),
        [0; 32],
        labels,
        vec![value; n],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sub_threshold_entries_survive_only_through_noise(sigma in 0.5..10.0f64, seed in any::<u64>()) {
        let ds = flat_dataset(-101.0, 400);
        let prep = PreprocessConfig { mode: InputMode::Binary, ..PreprocessConfig::default() };
        let quiet = epoch_view(&ds, &NoiseModel { sigma: 0.0, seed }, &prep, 0).unwrap();
        prop_assert!(quiet.inputs.iter().all(|v| *v == 0.0));
        let noisy = epoch_view(&ds, &NoiseModel { sigma, seed }, &prep, 0).unwrap();
        prop_assert!(noisy.inputs.iter().any(|v| *v == 1.0));
    }

    #[test]
    fn encoded_views_stay_in_range(sigma in 0.0..10.0f64, seed in any::<u64>(), level in -110.0..-20.0f32) {
        let ds = flat_dataset(level, 200);
        let bin = epoch_view(&ds, &NoiseModel { sigma, seed }, &PreprocessConfig { mode: InputMode::Binary, ..PreprocessConfig::default() }, 1).unwrap();
        prop_assert!(bin.inputs.iter().all(|v| *v == 0.0 || *v == 1.0));
        let float = epoch_view(&ds, &NoiseModel { sigma, seed }, &PreprocessConfig { mode: InputMode::Float, ..PreprocessConfig::default() }, 1).unwrap();
        prop_assert!(float.inputs.iter().all(|v| *v == 0.0 || (0.001..=1.0).contains(v)));
    }
}

#[test]
fn zeroing_rate_follows_the_normal_tail() {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = 20_000;
    let ds = flat_dataset(-99.0, n);
    let prep = PreprocessConfig {
        mode: InputMode::Binary,
        ..PreprocessConfig::default()
    };
    for sigma in [2.0, 6.0, 10.0] {
        let view = epoch_view(&ds, &NoiseModel { sigma, seed: 5 }, &prep, 0).unwrap();
        let zeroed = view.inputs.iter().filter(|v| **v == 0.0).count() as f64 / n as f64;
        let expected = Normal::new(0.0, 1.0).unwrap().cdf(-1.0 / sigma);
        assert!(
            (zeroed - expected).abs() < 0.02,
            "sigma {sigma}: {zeroed} vs {expected}"
        );
    }
}
