mod common;

use proptest::prelude::*;

use featlift::io;
use featlift::oracle::{closed_form, collect_dense_weights, Support};
use featlift::query::protocol_registry;
use featlift::raster::{render_features, RasterConfig};
use featlift::synth::{generate_feature_maps, generate_scene, ground_truth_features, Layout, SynthSpec};
use featlift::uplift::{method_registry, uplift_levels, uplift_scene, Level, UpliftConfig};
use featlift::Error;

use common::{random_scene, rel_l2};

fn fixture(layout: Layout, n: usize, seed: u64) -> (featlift::synth::SynthScene, Vec<featlift::FeatureMap>) {
    let spec = SynthSpec {
        n_gaussians: n,
        layout,
        overlap: 1.0,
        n_views: 6,
        seed,
        ..Default::default()
    };
    let synth = generate_scene(&spec).unwrap();
    let maps = generate_feature_maps(&synth.scene, &synth.views, 0.05, seed, &RasterConfig::default()).unwrap();
    (synth, maps)
}

#[test]
fn center_closed_form_matches_uplift() {
    for (layout, n) in [(Layout::Random, 50), (Layout::StackedPairs, 30), (Layout::Occluder, 40)] {
        let (synth, maps) = fixture(layout, n, 4);
        let cfg = UpliftConfig {
            occlusion_threshold: 0.0,
            filter: false,
            ..Default::default()
        };
        let out = uplift_scene(&synth.scene, &synth.views, &maps, &cfg).unwrap();
        let rec = collect_dense_weights(&synth.scene, &synth.views, &maps, &cfg.raster).unwrap();
        let closed = closed_form(&rec, Support::CenterPixels, 0.0);
        for i in 0..n {
            if closed.unidentifiable.contains(&i) {
                assert!(out.scene.feature(i).unwrap().iter().all(|&v| v == 0.0));
                continue;
            }
            let err = rel_l2(closed.feature(i), out.scene.feature(i).unwrap());
            assert!(err < 1e-6, "{layout:?} gaussian {i}: {err}");
        }
    }
}

#[test]
fn exact_method_through_registry_recovers_noiseless_features() {
    let spec = SynthSpec {
        n_gaussians: 30,
        layout: Layout::Random,
        overlap: 1.0,
        n_views: 6,
        seed: 2,
        ..Default::default()
    };
    let synth = generate_scene(&spec).unwrap();
    let maps = generate_feature_maps(&synth.scene, &synth.views, 0.0, 0, &RasterConfig::default()).unwrap();
    let method = method_registry().create("exact-ml").unwrap();
    let out = method
        .uplift(&synth.scene, &synth.views, &maps, &UpliftConfig::default())
        .unwrap();
    for (i, m) in out.index_map.iter().enumerate() {
        let j = m.expect("every random-layout gaussian is observed");
        assert!(rel_l2(synth.scene.feature(i).unwrap(), out.scene.feature(j).unwrap()) < 1e-5);
    }
    assert!(matches!(
        method_registry().create("median"),
        Err(Error::UnknownStrategy { .. })
    ));
    assert_eq!(method_registry().names(), vec!["weighted", "unweighted", "exact-ml"]);
    assert!(protocol_registry().create("dynamic:0.3").is_ok());
}

#[test]
fn levels_are_uplifted_independently() {
    let spec = SynthSpec {
        n_gaussians: 16,
        n_views: 4,
        opacity_range: [0.99999; 2],
        ..Default::default()
    };
    let synth = generate_scene(&spec).unwrap();
    let raster = RasterConfig::unclamped();
    let mut levels = Vec::new();
    let mut truths = Vec::new();
    for (k, &level) in Level::ALL.iter().enumerate() {
        let mut truth = synth.scene.clone();
        truth
            .set_features(spec.dim, ground_truth_features(&spec, truth.len(), k as u64))
            .unwrap();
        let maps = generate_feature_maps(&truth, &synth.views, 0.0, 0, &raster).unwrap();
        levels.push((level, maps));
        truths.push(truth);
    }
    assert_ne!(truths[0].features(), truths[1].features());
    let method = method_registry().create("weighted").unwrap();
    let cfg = UpliftConfig {
        raster,
        ..Default::default()
    };
    let outs = uplift_levels(method.as_ref(), &synth.scene, &synth.views, &levels, &cfg).unwrap();
    for ((level, out), truth) in outs.iter().zip(&truths) {
        for i in 0..truth.len() {
            assert!(
                rel_l2(truth.feature(i).unwrap(), out.scene.feature(i).unwrap()) < 1e-3,
                "{level} {i}"
            );
        }
    }
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let (synth, maps) = fixture(Layout::Random, 20, 9);
    io::write_ply(&synth.scene, dir.path().join("s.ply")).unwrap();
    io::write_cameras(&synth.views, dir.path().join("c.json")).unwrap();
    io::write_feature_map(&maps[0], dir.path().join("m.fmap")).unwrap();
    let scene = io::read_ply(dir.path().join("s.ply")).unwrap();
    let views = io::read_cameras(dir.path().join("c.json")).unwrap();
    assert_eq!(views, synth.views);
    assert_eq!(io::read_feature_map(dir.path().join("m.fmap")).unwrap(), maps[0]);
    assert_eq!(scene.features(), synth.scene.features());

    // Rendering from the reloaded scene and cameras agrees with the original.
    let cfg = RasterConfig::default();
    let a = render_features(&synth.scene, &synth.views[1], &cfg).unwrap();
    let b = render_features(&scene, &views[1], &cfg).unwrap();
    let worst = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0f32, f32::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn inconsistent_inputs_are_reported_as_such() {
    let (synth, maps) = fixture(Layout::Random, 10, 1);
    let cfg = UpliftConfig::default();
    let err = uplift_scene(&synth.scene, &synth.views, &maps[..3], &cfg).unwrap_err();
    assert!(err.is_consistency(), "{err}");
    let mut odd = maps.clone();
    odd[2] = featlift::FeatureMap::zeros(50, 10, maps[0].dim());
    assert!(uplift_scene(&synth.scene, &synth.views, &odd, &cfg)
        .unwrap_err()
        .is_consistency());
    odd[2] = featlift::FeatureMap::zeros(synth.views[2].width, synth.views[2].height, maps[0].dim() + 1);
    assert!(uplift_scene(&synth.scene, &synth.views, &odd, &cfg)
        .unwrap_err()
        .is_consistency());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn uplifted_features_stay_in_the_convex_hull(seed in 0u64..1000) {
        // Every uplifted feature is a weighted mean of observed pixel
        // features, so each channel stays inside their range.
        let (scene, cam) = random_scene(seed, 25, 32, 32);
        let mut with_feats = scene.clone();
        let feats: Vec<f32> = (0..scene.len() * 2).map(|k| ((k * 7919 + seed as usize) % 101) as f32 / 100.0).collect();
        with_feats.set_features(2, feats).unwrap();
        let map = render_features(&with_feats, &cam, &RasterConfig::default()).unwrap();
        let out = uplift_scene(&scene, std::slice::from_ref(&cam), std::slice::from_ref(&map), &UpliftConfig::default()).unwrap();
        for c in 0..2 {
            let lo = map.data().iter().skip(c).step_by(2).copied().fold(f32::INFINITY, f32::min);
            let hi = map.data().iter().skip(c).step_by(2).copied().fold(f32::NEG_INFINITY, f32::max);
            for f in out.scene.features().iter().skip(c).step_by(2) {
                prop_assert!(*f >= lo - 1e-6 && *f <= hi + 1e-6);
            }
        }
    }
}
