use trpca::imaging::{corrupt, decode_ppm, denoise, encode_ppm, psnr_image, synthetic_image};
use trpca::{SolverConfig, Transform};

#[test]
fn clean_fixture_is_reproduced() {
    let img = synthetic_image(64, 64, 3, 1).unwrap();
    let (rec, sol) = denoise(&img, &Transform::dct(3), &SolverConfig::default()).unwrap();
    let p = psnr_image(&rec, &img).unwrap();
    assert!(p > 40.0, "psnr {p}, {} iterations", sol.iterations);
}

#[test]
fn denoising_beats_corrupted_input() {
    let cfg = SolverConfig::default();
    for seed in 0..4 {
        let img = synthetic_image(64, 64, 3, seed).unwrap();
        let (bad, _) = corrupt(&img, 0.1, seed).unwrap();
        let before = psnr_image(&bad, &img).unwrap();
        let (dct_rec, sol) = denoise(&bad, &Transform::dct(3), &cfg).unwrap();
        let after_dct = psnr_image(&dct_rec, &img).unwrap();
        assert!(after_dct >= before + 5.0, "seed {seed}: {before} -> {after_dct}");

        // feasibility before clamping
        let resid = (&(&sol.low_rank + &sol.sparse) - bad.tensor()).linf();
        assert!(!sol.converged || resid <= cfg.tol);

        let (rom_rec, _) = denoise(&bad, &Transform::random_orthogonal(3, seed), &cfg).unwrap();
        let after_rom = psnr_image(&rom_rec, &img).unwrap();
        assert!(after_dct >= after_rom - 0.5, "seed {seed}: dct {after_dct} rom {after_rom}");
        eprintln!("seed {seed}: corrupted {before:.2} dB, dct {after_dct:.2} dB, rom {after_rom:.2} dB");
    }
}

#[test]
fn saved_images_round_trip() {
    let img = synthetic_image(17, 23, 2, 4).unwrap();
    let bytes = encode_ppm(&img);
    let back = decode_ppm(&bytes).unwrap();
    assert_eq!(back, img);
    assert_eq!(encode_ppm(&back), bytes);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.ppm");
    std::fs::write(&path, &bytes).unwrap();
    let loaded = trpca::imaging::load_image(&path).unwrap();
    let out = dir.path().join("copy.ppm");
    trpca::imaging::save_image(&loaded, &out).unwrap();
    assert_eq!(std::fs::read(out).unwrap(), bytes);
}
