//! Seeded inputs shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svq_core::codebook::train_codebook;
use svq_core::transform::analyze;
use svq_core::{CodebookBank, Image, TransformSpec};

/// Smooth gradient plus low-amplitude noise, deterministic in `seed`.
pub fn synthetic_image(w: usize, h: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(w * h * channels);
    for y in 0..h {
        for x in 0..w {
            for c in 0..channels {
                let base = 0.5 + 0.3 * ((x as f64 * 0.05 + c as f64).sin() * (y as f64 * 0.03).cos());
                data.push(base + 0.05 * (rng.random::<f64>() - 0.5));
            }
        }
    }
    Image::from_clamped(w, h, channels, data).expect("valid dimensions")
}

/// One codebook per entry of `sizes`, trained on the latents of `img`.
pub fn bank_for(img: &Image, spec: &TransformSpec, sizes: &[usize]) -> CodebookBank {
    let samples = analyze(img, spec).expect("image larger than a block");
    let books = sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| train_codebook(samples.data(), spec.latent_dim(), n, i as u64, 8, i as u32).expect("training"))
        .collect();
    CodebookBank::new(books).expect("consistent bank")
}

/// Geometric-ish rank sequence, the shape index streams usually have.
pub fn skewed_ranks(n: usize, n_k: u32, seed: u64) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            ((-u.ln() * 12.0) as u32).min(n_k - 1)
        })
        .collect()
}
