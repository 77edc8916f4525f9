use std::fs;

use angemb_core::imaging::{decode_pgm, encode_pgm};
use angemb_core::synth::{four_class_3d, moving_square_video, synthetic_faces, FaceSpec, VideoSpec};
use angemb_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pgm_bytes_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let pixels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
        prop_assert_eq!(decode_pgm(&encode_pgm(w, h, &pixels)).unwrap(), (w, h, pixels));
    }
}

#[test]
fn frames_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let video = moving_square_video(&VideoSpec {
        n_frames: 6,
        n_intruded: 2,
        ..VideoSpec::default()
    })
    .unwrap();
    let written = write_frames(&video.frames, dir.path(), "").unwrap();
    assert_eq!(written.len(), 6);
    let back = load_frames(&written).unwrap();
    assert_eq!(back.frames().values(), video.frames.frames().values());
    assert_eq!(back.names(), video.frames.names());

    let again = dir.path().join("again");
    let rewritten = write_frames(&back, &again, "").unwrap();
    for (a, b) in written.iter().zip(&rewritten) {
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}

#[test]
fn frames_are_sorted_by_file_name() {
    let dir = tempfile::tempdir().unwrap();
    for (name, value) in [("b", 2u8), ("a", 1), ("c", 3)] {
        fs::write(dir.path().join(format!("{name}.pgm")), encode_pgm(1, 1, &[value])).unwrap();
    }
    let paths: Vec<_> = ["c", "a", "b"].iter().map(|n| dir.path().join(format!("{n}.pgm"))).collect();
    let stack = load_frames(&paths).unwrap();
    assert_eq!(stack.names(), ["a", "b", "c"]);
    assert_eq!(stack.frames().values(), &DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]));
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pgm");
    let b = dir.path().join("b.pgm");
    fs::write(&a, encode_pgm(2, 2, &[0; 4])).unwrap();
    fs::write(&b, encode_pgm(2, 3, &[0; 6])).unwrap();
    assert!(matches!(load_frames(&[&a, &b]), Err(Error::MixedDimensions { .. })));
    assert!(matches!(load_frames::<&std::path::Path>(&[]), Err(Error::EmptyInput)));
    assert!(matches!(load_frames(&[dir.path().join("missing.pgm")]), Err(Error::Io { .. })));
    let c = dir.path().join("c.ppm");
    fs::write(&c, b"P6\n1 1\n255\n\0\0\0").unwrap();
    assert!(matches!(load_frames(&[&c]), Err(Error::UnsupportedFormat(_))));
}

#[test]
fn generators_are_deterministic() {
    let spec = SynthSpec::canonical();
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.data.values(), b.data.values());
    assert_eq!(a.outlier_indices, b.outlier_indices);
    let c = generate(&SynthSpec { seed: 43, ..spec }).unwrap();
    assert_ne!(a.data.values(), c.data.values());

    let v = VideoSpec::default();
    assert_eq!(
        moving_square_video(&v).unwrap().frames.frames().values(),
        moving_square_video(&v).unwrap().frames.frames().values()
    );
    let f = FaceSpec::default();
    assert_eq!(
        synthetic_faces(&f).unwrap().faces.frames().values(),
        synthetic_faces(&f).unwrap().faces.frames().values()
    );
    assert_eq!(four_class_3d(20, 1).unwrap().data.values(), four_class_3d(20, 1).unwrap().data.values());
}

#[test]
fn clean_data_is_barely_trimmed() {
    let spec = SynthSpec {
        outlier_fraction: 0.0,
        ..SynthSpec::canonical()
    };
    let r = generate(&spec).unwrap();
    let model = fit_tae(&r.data, 1, std::f64::consts::FRAC_PI_3, &FitConfig::default()).unwrap();
    assert!(model.n_trimmed() * 100 < r.data.n_samples());
}

#[test]
fn ae_beats_pca_on_lifted_classes() {
    let c = four_class_3d(100, 5).unwrap();
    let cfg = FitConfig::default();
    let pca = fit_pca(&c.data, 1, &cfg).unwrap();
    let ae = fit_ae(&c.data, 1, &cfg).unwrap();
    let err = |m: &FitModel| subspace_recovery_error(&m.subspace, &c.true_basis).unwrap();
    assert!(err(&ae) < err(&pca));
}

#[test]
fn recovery_improves_with_clean_data() {
    let spec = SynthSpec {
        outlier_fraction: 0.0,
        inlier_noise: 0.05,
        n_inliers: 1000,
        ..SynthSpec::canonical()
    };
    let r = generate(&spec).unwrap();
    let ae = fit_ae(&r.data, 1, &FitConfig::default()).unwrap();
    assert!(subspace_recovery_error(&ae.subspace, &r.true_basis).unwrap() < 0.05);
}

#[test]
fn faces_reconstruct_with_nine_components() {
    let f = synthetic_faces(&FaceSpec::default()).unwrap();
    let r = shadow_removal(&f.faces, 9, &FitOptions::new(Method::Pca)).unwrap();
    assert!((&r.raw - f.faces.frames().values()).amax() < 1e-6);
}

#[test]
fn clean_faces_give_a_flat_inverted_difference() {
    let f = synthetic_faces(&FaceSpec::default()).unwrap();
    let v = f.faces.frames().values();
    assert!(v.min() >= 0.0 && v.max() <= 255.0);
    let r = shadow_removal(&f.faces, 9, &FitOptions::new(Method::Ae)).unwrap();
    let diff = r.inverted_difference.frames().values();
    assert!(diff.iter().all(|&v| v >= 254.0), "{}", diff.min());
}

#[test]
fn planted_band_is_darker() {
    let f = synthetic_faces(&FaceSpec::default()).unwrap();
    let (stack, band) = angemb_core::synth::darken_band(&f.faces, 0, 12..18, 0.3).unwrap();
    let r = shadow_removal(&stack, 9, &FitOptions::new(Method::Tae)).unwrap();
    assert!(r.model.as_ref().unwrap().trim.as_ref().unwrap().outliers.contains(&0));
    let diff = r.inverted_difference.frame(0);
    let in_band: f64 = band.iter().map(|&p| diff[p]).sum::<f64>() / band.len() as f64;
    let rest: Vec<f64> = (0..diff.len()).filter(|p| !band.contains(p)).map(|p| diff[p]).collect();
    let outside = rest.iter().sum::<f64>() / rest.len() as f64;
    assert!(in_band < outside - 10.0, "{in_band} vs {outside}");
}

#[test]
fn video_trim_count_shrinks_over_the_range() {
    let v = moving_square_video(&VideoSpec::default()).unwrap();
    let mut counts = Vec::new();
    for eta in [std::f64::consts::FRAC_PI_3, 0.9, 7.0 * std::f64::consts::PI / 18.0] {
        let options = FitOptions { eta_theta: eta, ..FitOptions::new(Method::Tae) };
        let r = background_model(&v.frames, 5, &options).unwrap();
        counts.push(r.model.unwrap().n_trimmed());
    }
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}
