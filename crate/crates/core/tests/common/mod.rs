#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use svq_core::codebook::train_codebook;
use svq_core::entropy::{MixtureComponent, SymbolModel};
use svq_core::imageio::load_image_auto;
use svq_core::transform::analyze;
use svq_core::{CodebookBank, Image, TransformSpec};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/natural256.ppm")
}

/// The 256x256 RGB test image.
pub fn natural() -> Image {
    load_image_auto(&fixture_path()).expect("fixture image")
}

/// Smooth periodic texture shifted horizontally by `shift` pixels.
pub fn textured(w: usize, h: usize, c: usize, shift: f64) -> Image {
    let mut data = Vec::with_capacity(w * h * c);
    for y in 0..h {
        for x in 0..w {
            let xs = x as f64 + shift;
            for ch in 0..c {
                let v = 0.5
                    + 0.22 * (xs * 0.29 + ch as f64).sin()
                    + 0.18 * (y as f64 * 0.21).cos() * (xs * 0.07).cos()
                    + 0.05 * ((y as f64 * 1.3 + xs * 0.6 + ch as f64).sin());
                data.push(v);
            }
        }
    }
    Image::from_clamped(w, h, c, data).unwrap()
}

pub fn random_image<R: Rng>(rng: &mut R, w: usize, h: usize, c: usize) -> Image {
    Image::new(w, h, c, (0..w * h * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// Trains one codebook per entry of `sizes` on the latents of `imgs`.
pub fn train_bank(imgs: &[Image], spec: &TransformSpec, sizes: &[usize], iters: usize) -> CodebookBank {
    let mut samples = Vec::new();
    for im in imgs {
        samples.extend_from_slice(analyze(im, spec).unwrap().data());
    }
    let books = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            train_codebook(&samples, spec.latent_dim(), n, 100 + i as u64, iters, i as u32).unwrap()
        })
        .collect();
    CodebookBank::new(books).unwrap()
}

/// Random mixture model with one to three components over a random support.
pub fn random_model<R: Rng>(rng: &mut R) -> SymbolModel {
    let lo = rng.random_range(-2000..2000);
    let span = match rng.random_range(0..4) {
        0 => 0,
        1 => rng.random_range(1..16),
        2 => rng.random_range(16..1024),
        _ => rng.random_range(1024..60000),
    };
    let m = rng.random_range(1..=3);
    let raw: Vec<(f64, f64, f64)> = (0..m)
        .map(|_| {
            (
                rng.random_range(0.01..1.0),
                lo as f64 + rng.random_range(-0.2..1.2) * span as f64,
                rng.random_range(0.3..(span as f64 + 2.0)),
            )
        })
        .collect();
    let total: f64 = raw.iter().map(|r| r.0).sum();
    let comps = raw
        .into_iter()
        .map(|(w, mean, sigma)| MixtureComponent {
            weight: w / total,
            mean,
            sigma,
        })
        .collect();
    SymbolModel::new(comps, lo, lo + span).unwrap()
}

/// Draws `n` symbols, half from the model's own distribution and half uniform
/// over its support.
pub fn random_sequence<R: Rng>(rng: &mut R, model: &SymbolModel, n: usize) -> Vec<i32> {
    let (lo, hi) = model.support();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                rng.random_range(lo..=hi)
            } else {
                let t = rng.random_range(0..svq_core::entropy::TOTAL_FREQ);
                model.lookup(t).0
            }
        })
        .collect()
}
