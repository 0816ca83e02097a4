//! Scene file to covariance to spectrum to angles, through the public API only.

use std::fs;

use fastmusic_core::cxmat::RngSeed;
use fastmusic_core::estimators::{
    block_lanczos_subspace, exact_signal_subspace, fast_music_1, fast_music_2, propagator_subspace, Fast1Params,
    Fast2Params, SubspaceEstimate,
};
use fastmusic_core::scene::io::{parse_scene, scene_to_toml};
use fastmusic_core::scene::{spatial_covariance, synthesize_beat_signal, FmcwConfig, SceneRecipe};
use fastmusic_core::spectrum::{
    aoa_mse, extract_peaks, music_spectrum, AngleGrid, PseudoSpectrum, DEFAULT_MIN_SEPARATION_CELLS,
};

const SCENE: &str = r#"
min_separation_deg = 2.0

[[target]]
theta_deg = 20.0
tau_s = 1.0e-7
alpha_re = 1.0
alpha_im = 0.0

[[target]]
theta_deg = 47.5
tau_s = 2.5e-7
alpha_re = 0.0
alpha_im = 1.0

[[target]]
theta_deg = 71.3
tau_s = 4.0e-7
alpha_re = -0.6
alpha_im = 0.8
"#;

#[test]
fn every_subspace_method_finds_a_scene_read_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scene.toml");
    fs::write(&path, SCENE).unwrap();
    let scene = parse_scene(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(scene.len(), 3);

    let cfg = FmcwConfig::automotive_77ghz(64, 128).unwrap();
    let y = synthesize_beat_signal(&cfg, &scene, 0.05, RngSeed(3)).unwrap();
    let s = spatial_covariance(&y);
    let k = scene.len();
    let grid = AngleGrid::field_of_view(901).unwrap();
    let truth = scene.sorted_angles();

    let estimates: Vec<SubspaceEstimate> = vec![
        exact_signal_subspace(&s, k).unwrap(),
        fast_music_1(&s, k, Fast1Params { p: 12, seed: RngSeed(4) }).unwrap(),
        fast_music_2(&s, k, Fast2Params { p: 6, t: 2, seed: RngSeed(5) }).unwrap(),
        block_lanczos_subspace(&s, k, k, 30).unwrap(),
        propagator_subspace(&y, k).unwrap(),
    ];
    for est in &estimates {
        let p = music_spectrum(est, &grid, cfg.spacing(), cfg.lambda());
        let peaks = extract_peaks(&p, k, DEFAULT_MIN_SEPARATION_CELLS).unwrap();
        assert!(!peaks.shortfall, "{}", est.method);
        for (got, want) in peaks.angles().iter().zip(&truth) {
            assert!(
                (got - want).abs() <= 1.5 * grid.spacing(),
                "{}: peak {} deg vs target {} deg",
                est.method,
                got.to_degrees(),
                want.to_degrees()
            );
        }
        assert!(aoa_mse(&truth, &peaks) < 3.0 * grid.spacing().powi(2));
    }
}

#[test]
fn drawn_scene_survives_a_file_round_trip_and_reproduces_the_spectrum() {
    let cfg = FmcwConfig::automotive_77ghz(32, 64).unwrap();
    let drawn = SceneRecipe::new(4, 5.0).draw(&cfg, RngSeed(11)).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("drawn.toml");
    fs::write(&path, scene_to_toml(&drawn)).unwrap();
    let loaded = parse_scene(&fs::read_to_string(&path).unwrap()).unwrap();

    let grid = AngleGrid::new(361).unwrap();
    let spectrum = |scene| -> PseudoSpectrum {
        let y = synthesize_beat_signal(&cfg, scene, 1.0, RngSeed(12)).unwrap();
        let est = exact_signal_subspace(&spatial_covariance(&y), 4).unwrap();
        music_spectrum(&est, &grid, cfg.spacing(), cfg.lambda())
    };
    let (a, b) = (spectrum(&drawn), spectrum(&loaded));
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
    }

    let csv_path = dir.path().join("spectrum.csv");
    a.write_csv(fs::File::create(&csv_path).unwrap()).unwrap();
    let text = fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta_deg,value"));
    assert_eq!(lines.count(), grid.len());
}
