//! Codebooks: training, nearest-codeword quantization and multi-book blending.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::transform::LatentGrid;

/// Largest codebook the index coder supports (its alphabet holds at most 2^16 symbols).
pub const MAX_CODEWORDS: usize = 1 << 16;

const MAGIC: &[u8; 4] = b"SVQC";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    id: u32,
    d: usize,
    codewords: Vec<f64>,
    freq: Vec<u64>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Codebook {
    pub fn new(id: u32, d: usize, codewords: Vec<f64>, freq: Vec<u64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("codeword dimension must be positive"));
        }
        if codewords.is_empty() || !codewords.len().is_multiple_of(d) {
            return Err(Error::dims(format!(
                "{} codeword values do not form whole {d}-vectors",
                codewords.len()
            )));
        }
        let n_k = codewords.len() / d;
        if n_k > MAX_CODEWORDS {
            return Err(Error::invalid(format!(
                "{n_k} codewords exceeds the limit of {MAX_CODEWORDS}"
            )));
        }
        if freq.len() != n_k {
            return Err(Error::dims(format!(
                "{} frequency entries for {n_k} codewords",
                freq.len()
            )));
        }
        if codewords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("codewords must be finite"));
        }
        Ok(Codebook {
            id,
            d,
            codewords,
            freq,
        })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn n_k(&self) -> usize {
        self.freq.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        &self.codewords[i * self.d..(i + 1) * self.d]
    }

    pub fn codewords(&self) -> &[f64] {
        &self.codewords
    }

    pub fn freq(&self) -> &[u64] {
        &self.freq
    }

    /// `(index, squared distance)` of the closest codeword; ties go to the lowest index.
    pub fn nearest(&self, y: &[f64]) -> (u32, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.codewords.chunks_exact(self.d).enumerate() {
            let dist = sq_dist(c, y);
            if dist < best_d {
                best_d = dist;
                best = i;
            }
        }
        (best as u32, best_d)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(18 + self.codewords.len() * 8 + self.freq.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.id.to_le_bytes());
        out.extend_from_slice(&(self.n_k() as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        for x in &self.codewords {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for f in &self.freq {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 18 || &buf[..4] != MAGIC {
            return Err(Error::format("missing SVQC magic", 0));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let version = u16::from_le_bytes([buf[4], buf[5]]);
        if version != VERSION {
            return Err(Error::format(format!("unsupported codebook version {version}"), 4));
        }
        let id = u32_at(6);
        let n_k = u32_at(10) as usize;
        let d = u32_at(14) as usize;
        let need = n_k
            .checked_mul(d)
            .and_then(|n| n.checked_add(n_k))
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(18))
            .ok_or_else(|| Error::format("codebook size overflow", 10))?;
        if buf.len() != need {
            return Err(Error::format(
                format!("codebook file has {} bytes, header implies {need}", buf.len()),
                buf.len().min(need),
            ));
        }
        let words = &buf[18..18 + n_k * d * 8];
        let codewords = words
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let freq = buf[18 + n_k * d * 8..]
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Codebook::new(id, d, codewords, freq)
    }

    /// First 8 bytes (little-endian) of the SHA-256 of the serialized codebook.
    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookBank {
    books: Vec<Codebook>,
}

impl CodebookBank {
    pub fn new(books: Vec<Codebook>) -> Result<Self> {
        let first = books
            .first()
            .ok_or_else(|| Error::invalid("a codebook bank needs at least one book"))?;
        if books.len() > 255 {
            return Err(Error::invalid("at most 255 codebooks are supported"));
        }
        if let Some(b) = books.iter().find(|b| b.d != first.d) {
            return Err(Error::dims(format!(
                "codebook {} has dimension {}, expected {}",
                b.id, b.d, first.d
            )));
        }
        Ok(CodebookBank { books })
    }

    pub fn k(&self) -> usize {
        self.books.len()
    }

    pub fn d(&self) -> usize {
        self.books[0].d
    }

    pub fn books(&self) -> &[Codebook] {
        &self.books
    }

    pub fn get(&self, k: usize) -> &Codebook {
        &self.books[k]
    }
}

/// Row-major `u x v` grid of codeword indices (or ranks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexGrid {
    pub u: usize,
    pub v: usize,
    pub indices: Vec<u32>,
}

impl IndexGrid {
    pub fn new(u: usize, v: usize, indices: Vec<u32>) -> Result<Self> {
        if indices.len() != u * v {
            return Err(Error::dims(format!(
                "{} indices for a {u}x{v} grid",
                indices.len()
            )));
        }
        Ok(IndexGrid { u, v, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Per-super-pixel convex weights over `k` codebooks, layout `[l * k + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub u: usize,
    pub v: usize,
    pub k: usize,
    pub weights: Vec<f64>,
}

impl WeightMap {
    pub fn new(u: usize, v: usize, k: usize, weights: Vec<f64>) -> Result<Self> {
        if k == 0 || weights.len() != u * v * k {
            return Err(Error::dims(format!(
                "{} weights for a {u}x{v}x{k} map",
                weights.len()
            )));
        }
        for (l, row) in weights.chunks_exact(k).enumerate() {
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::invalid(format!("negative weight at super-pixel {l}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "weights at super-pixel {l} sum to {s}"
                )));
            }
        }
        Ok(WeightMap { u, v, k, weights })
    }

    pub fn uniform(u: usize, v: usize, k: usize) -> Self {
        WeightMap {
            u,
            v,
            k,
            weights: vec![1.0 / k as f64; u * v * k],
        }
    }

    pub fn row(&self, l: usize) -> &[f64] {
        &self.weights[l * self.k..(l + 1) * self.k]
    }
}

/// Result of a training run, including the quantization error recorded after
/// each assignment step.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub codebook: Codebook,
    pub errors: Vec<f64>,
}

/// Trains a codebook with k-means++ seeding followed by `iters` Lloyd iterations.
///
/// `samples` holds the training vectors back to back, each of length `d`.
pub fn train_codebook(
    samples: &[f64],
    d: usize,
    n_k: usize,
    seed: u64,
    iters: usize,
    id: u32,
) -> Result<Codebook> {
    Ok(train_codebook_traced(samples, d, n_k, seed, iters, id)?.codebook)
}

pub fn train_codebook_traced(
    samples: &[f64],
    d: usize,
    n_k: usize,
    seed: u64,
    iters: usize,
    id: u32,
) -> Result<TrainingRun> {
    if d == 0 || !samples.len().is_multiple_of(d) {
        return Err(Error::dims(format!(
            "{} sample values do not form whole {d}-vectors",
            samples.len()
        )));
    }
    let n = samples.len() / d;
    if n_k == 0 || n_k > MAX_CODEWORDS {
        return Err(Error::invalid(format!("codebook size {n_k} out of range")));
    }
    if n < n_k {
        return Err(Error::invalid(format!(
            "{n} training samples cannot seed {n_k} codewords"
        )));
    }
    if iters == 0 {
        return Err(Error::invalid("at least one Lloyd iteration is required"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("training samples must be finite"));
    }
    let sample = |i: usize| &samples[i * d..(i + 1) * d];

    let mut centroids = kmeans_pp(samples, d, n_k, seed);
    let mut errors = Vec::with_capacity(iters + 1);
    let mut assign = vec![0u32; n];
    let mut dist = vec![0f64; n];

    let assign_all = |centroids: &[f64], assign: &mut [u32], dist: &mut [f64]| -> f64 {
        let book = Codebook {
            id,
            d,
            codewords: centroids.to_vec(),
            freq: vec![0; n_k],
        };
        assign
            .par_iter_mut()
            .zip(dist.par_iter_mut())
            .enumerate()
            .for_each(|(i, (a, dd))| {
                let (j, e) = book.nearest(sample(i));
                *a = j;
                *dd = e;
            });
        dist.iter().sum()
    };

    for _ in 0..iters {
        errors.push(assign_all(&centroids, &mut assign, &mut dist));

        let mut sums = vec![0f64; n_k * d];
        let mut counts = vec![0u64; n_k];
        for (i, &a) in assign.iter().enumerate() {
            let j = a as usize;
            counts[j] += 1;
            for (s, x) in sums[j * d..(j + 1) * d].iter_mut().zip(sample(i)) {
                *s += x;
            }
        }
        let mut taken = vec![false; n];
        for j in 0..n_k {
            if counts[j] > 0 {
                let inv = counts[j] as f64;
                for t in 0..d {
                    centroids[j * d + t] = sums[j * d + t] / inv;
                }
            } else {
                // re-seed to the sample farthest from its centroid
                let mut far = None;
                let mut far_d = -1.0;
                for i in 0..n {
                    if !taken[i] && dist[i] > far_d {
                        far_d = dist[i];
                        far = Some(i);
                    }
                }
                if let Some(i) = far {
                    taken[i] = true;
                    dist[i] = 0.0;
                    centroids[j * d..(j + 1) * d].copy_from_slice(sample(i));
                }
            }
        }
    }
    errors.push(assign_all(&centroids, &mut assign, &mut dist));

    let mut freq = vec![0u64; n_k];
    for &a in &assign {
        freq[a as usize] += 1;
    }
    Ok(TrainingRun {
        codebook: Codebook::new(id, d, centroids, freq)?,
        errors,
    })
}

/// k-means++ seeding. Draws exactly one uniform per centre so the first `m`
/// centres of a larger run coincide with those of a smaller one.
fn kmeans_pp(samples: &[f64], d: usize, n_k: usize, seed: u64) -> Vec<f64> {
    let n = samples.len() / d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |i: usize| &samples[i * d..(i + 1) * d];

    let mut centroids = Vec::with_capacity(n_k * d);
    let first = ((rng.random::<f64>() * n as f64) as usize).min(n - 1);
    centroids.extend_from_slice(sample(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(sample(i), sample(first))).collect();

    for _ in 1..n_k {
        let r: f64 = rng.random();
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let target = r * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &b) in best.iter().enumerate() {
                acc += b;
                if b > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the sum
            pick.unwrap_or_else(|| best.iter().rposition(|&b| b > 0.0).unwrap_or(0))
        } else {
            ((r * n as f64) as usize).min(n - 1)
        };
        let c = sample(pick).to_vec();
        for (i, b) in best.iter_mut().enumerate() {
            let dd = sq_dist(sample(i), &c);
            if dd < *b {
                *b = dd;
            }
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

/// Nearest-codeword index for every super-pixel (squared Euclidean distance,
/// lowest index on ties).
pub fn quantize_grid(lat: &LatentGrid, book: &Codebook) -> Result<IndexGrid> {
    if lat.d() != book.d {
        return Err(Error::dims(format!(
            "latent dimension {} vs codebook dimension {}",
            lat.d(),
            book.d
        )));
    }
    let indices = lat
        .data()
        .par_chunks_exact(lat.d())
        .map(|y| book.nearest(y).0)
        .collect();
    IndexGrid::new(lat.u(), lat.v(), indices)
}

pub fn dequantize_grid(idx: &IndexGrid, book: &Codebook) -> Result<LatentGrid> {
    let mut data = Vec::with_capacity(idx.len() * book.d);
    for (l, &i) in idx.indices.iter().enumerate() {
        if i as usize >= book.n_k() {
            return Err(Error::Corrupt(format!(
                "index {i} at super-pixel {l} exceeds codebook size {}",
                book.n_k()
            )));
        }
        data.extend_from_slice(book.codeword(i as usize));
    }
    LatentGrid::new(idx.u, idx.v, book.d, data)
}

/// `y(l) = sum_j w_j(l) * y_j(l)`.
pub fn combine_weighted(quants: &[LatentGrid], w: &WeightMap) -> Result<LatentGrid> {
    let first = quants
        .first()
        .ok_or_else(|| Error::invalid("no quantized latents to combine"))?;
    if quants.iter().any(|q| !q.same_shape(first)) {
        return Err(Error::dims("quantized latents differ in shape"));
    }
    if w.k != quants.len() || w.u != first.u() || w.v != first.v() {
        return Err(Error::dims(format!(
            "weight map {}x{}x{} vs {} latents of {}x{}",
            w.u,
            w.v,
            w.k,
            quants.len(),
            first.u(),
            first.v()
        )));
    }
    // re-check the convexity constraint: WeightMap fields are public
    let checked = WeightMap::new(w.u, w.v, w.k, w.weights.clone())?;
    let d = first.d();
    let mut data = vec![0.0; first.data().len()];
    for (l, out) in data.chunks_exact_mut(d).enumerate() {
        for (j, q) in quants.iter().enumerate() {
            let wj = checked.row(l)[j];
            for (o, y) in out.iter_mut().zip(q.vector(l)) {
                *o += wj * y;
            }
        }
    }
    LatentGrid::new(first.u(), first.v(), d, data)
}

/// Decoder-side weights: `w_j(l) = softmax_j(-dist_j(l) / tau)` where `dist_j(l)` is
/// the squared distance from `flq(l)` to the closest codeword of book `j`.
pub fn predict_weights(flq: &LatentGrid, bank: &CodebookBank, tau: f64) -> Result<WeightMap> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature {tau} must be positive")));
    }
    if flq.d() != bank.d() {
        return Err(Error::dims(format!(
            "control feature dimension {} vs codebook dimension {}",
            flq.d(),
            bank.d()
        )));
    }
    let k = bank.k();
    let mut weights = vec![0.0; flq.len() * k];
    weights
        .par_chunks_exact_mut(k)
        .zip(flq.data().par_chunks_exact(flq.d()))
        .for_each(|(row, y)| {
            let mut min = f64::INFINITY;
            for (j, book) in bank.books.iter().enumerate() {
                row[j] = book.nearest(y).1;
                min = min.min(row[j]);
            }
            let mut sum = 0.0;
            for r in row.iter_mut() {
                *r = (-(*r - min) / tau).exp();
                sum += *r;
            }
            for r in row.iter_mut() {
                *r /= sum;
            }
        });
    WeightMap::new(flq.u(), flq.v(), k, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn book(d: usize, words: &[f64]) -> Codebook {
        Codebook::new(0, d, words.to_vec(), vec![1; words.len() / d]).unwrap()
    }

    fn mse(samples: &[f64], b: &Codebook) -> f64 {
        samples.chunks_exact(b.d()).map(|s| b.nearest(s).1).sum::<f64>() / (samples.len() / b.d()) as f64
    }

    #[test]
    fn two_separated_clusters() {
        let mut s = vec![0.0; 20];
        s.extend(std::iter::repeat_n(10.0, 20));
        for seed in 0..8 {
            let b = train_codebook(&s, 2, 2, seed, 5, 0).unwrap();
            let mut words: Vec<_> = (0..2).map(|i| b.codeword(i).to_vec()).collect();
            words.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            assert_eq!(words, vec![vec![0.0, 0.0], vec![10.0, 10.0]]);
            assert_eq!(b.freq(), &[10, 10]);
        }
    }

    #[test]
    fn one_codeword_per_sample() {
        let s = [0.0, 1.0, 5.0, 2.0, -3.0, 4.0, 9.0, 9.5];
        let b = train_codebook(&s, 2, 4, 3, 4, 0).unwrap();
        assert_eq!(mse(&s, &b), 0.0);
        assert_eq!(b.freq(), &[1, 1, 1, 1]);
    }

    #[test]
    fn single_codeword_is_mean() {
        let s = [1.0, 2.0, 3.0, 6.0, 5.0, 1.0];
        let b = train_codebook(&s, 2, 1, 0, 3, 0).unwrap();
        assert!((b.codeword(0)[0] - 3.0).abs() < 1e-12);
        assert!((b.codeword(0)[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(train_codebook(&[0.0, 1.0], 1, 3, 0, 1, 0).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = train_codebook(&s, 3, 16, 42, 10, 7).unwrap();
        let b = train_codebook(&s, 3, 16, 42, 10, 7).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn lloyd_error_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        for seed in 0..4 {
            let run = train_codebook_traced(&s, 4, 32, seed, 15, 0).unwrap();
            for w in run.errors.windows(2) {
                assert!(w[1] <= w[0], "{:?}", run.errors);
            }
        }
    }

    #[test]
    fn larger_codebooks_fit_better() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..4000).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut prev = f64::INFINITY;
        for n_k in [2, 4, 8, 16, 32, 64] {
            let b = train_codebook(&s, 4, n_k, 1, 10, 0).unwrap();
            let e = mse(&s, &b);
            assert!(e <= prev, "n_k={n_k}: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn quantize_examples() {
        let b = book(2, &[0.0, 0.0, 1.0, 1.0]);
        let lat = LatentGrid::new(1, 1, 2, vec![0.2, 0.1]).unwrap();
        assert_eq!(quantize_grid(&lat, &b).unwrap().indices, vec![0]);
        let lat = LatentGrid::new(1, 1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(quantize_grid(&lat, &b).unwrap().indices, vec![1]);

        let tie = book(2, &[0.0, 0.0, 1.0, 0.0]);
        let lat = LatentGrid::new(1, 1, 2, vec![0.5, 0.0]).unwrap();
        assert_eq!(quantize_grid(&lat, &tie).unwrap().indices, vec![0]);

        let lat = LatentGrid::zeros(1, 1, 3);
        assert!(matches!(quantize_grid(&lat, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn quantize_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let words: Vec<f64> = (0..40 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = book(3, &words);
        let lat = LatentGrid::new(5, 4, 3, (0..60).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let idx = quantize_grid(&lat, &b).unwrap();
        for (l, &i) in idx.indices.iter().enumerate() {
            let y = lat.vector(l);
            let dists: Vec<f64> = (0..40)
                .map(|j| (0..3).map(|t| (words[j * 3 + t] - y[t]).powi(2)).sum())
                .collect();
            let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(dists.iter().position(|&x| x == min).unwrap(), i as usize);
        }
    }

    #[test]
    fn dequantize_examples() {
        let b = book(2, &[0.0, 1.0, 2.0, 3.0, 3.0, 4.0]);
        let idx = IndexGrid::new(2, 1, vec![2, 2]).unwrap();
        assert_eq!(dequantize_grid(&idx, &b).unwrap().data(), &[3.0, 4.0, 3.0, 4.0]);

        let single = book(2, &[3.0, 4.0]);
        let idx = IndexGrid::new(1, 1, vec![0]).unwrap();
        assert_eq!(dequantize_grid(&idx, &single).unwrap().data(), &[3.0, 4.0]);

        let lat = LatentGrid::new(3, 1, 2, vec![2.0, 3.0, 0.0, 1.0, 3.0, 4.0]).unwrap();
        let back = dequantize_grid(&quantize_grid(&lat, &b).unwrap(), &b).unwrap();
        assert_eq!(back, lat);

        let bad = IndexGrid::new(1, 1, vec![3]).unwrap();
        assert!(dequantize_grid(&bad, &b).is_err());
    }

    #[test]
    fn combine_examples() {
        let a = LatentGrid::new(1, 1, 2, vec![1.0, 3.0]).unwrap();
        let b = LatentGrid::new(1, 1, 2, vec![5.0, -1.0]).unwrap();
        let onehot = WeightMap::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert_eq!(combine_weighted(&[a.clone(), b.clone()], &onehot).unwrap(), b);
        let half = WeightMap::uniform(1, 1, 2);
        assert_eq!(
            combine_weighted(&[a.clone(), b.clone()], &half).unwrap().data(),
            &[3.0, 1.0]
        );
        let one = WeightMap::uniform(1, 1, 1);
        assert_eq!(combine_weighted(std::slice::from_ref(&a), &one).unwrap(), a);
    }

    #[test]
    fn combine_rejects_bad_weights() {
        assert!(WeightMap::new(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(WeightMap::new(1, 1, 2, vec![-0.5, 1.5]).is_err());
        let a = LatentGrid::zeros(1, 1, 2);
        let bad = WeightMap {
            u: 1,
            v: 1,
            k: 2,
            weights: vec![0.7, 0.7],
        };
        assert!(combine_weighted(&[a.clone(), a.clone()], &bad).is_err());
        let wrong_k = WeightMap::uniform(1, 1, 3);
        assert!(combine_weighted(&[a.clone(), a], &wrong_k).is_err());
    }

    #[test]
    fn predict_weights_limits() {
        let b0 = Codebook::new(0, 1, vec![0.0], vec![1]).unwrap();
        let b1 = Codebook::new(1, 1, vec![5.0], vec![1]).unwrap();
        let bank = CodebookBank::new(vec![b0.clone(), b1]).unwrap();
        let flq = LatentGrid::new(1, 1, 1, vec![0.0]).unwrap();

        let sharp = predict_weights(&flq, &bank, 1e-6).unwrap();
        assert!(sharp.row(0)[0] >= 1.0 - 1e-9);

        let flat = predict_weights(&flq, &bank, 1e9).unwrap();
        assert!(flat.weights.iter().all(|w| (w - 0.5).abs() < 1e-6));

        let single = CodebookBank::new(vec![b0]).unwrap();
        let w = predict_weights(&LatentGrid::new(2, 1, 1, vec![3.0, -9.0]).unwrap(), &single, 0.1)
            .unwrap();
        assert_eq!(w.weights, vec![1.0, 1.0]);

        assert!(predict_weights(&flq, &bank, 0.0).is_err());
        assert!(predict_weights(&flq, &bank, -1.0).is_err());
    }

    #[test]
    fn bank_requires_common_dimension() {
        let a = Codebook::new(0, 1, vec![0.0], vec![1]).unwrap();
        let b = Codebook::new(1, 2, vec![0.0, 0.0], vec![1]).unwrap();
        assert!(CodebookBank::new(vec![a, b]).is_err());
        assert!(CodebookBank::new(vec![]).is_err());
    }

    #[test]
    fn file_round_trip_and_hash() {
        let b = Codebook::new(12, 2, vec![0.5, -1.0, 3.0, 4.0], vec![7, 0]).unwrap();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..4], b"SVQC");
        assert_eq!(bytes.len(), 18 + 4 * 8 + 2 * 8);
        let back = Codebook::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.content_hash(), b.content_hash());

        let other = Codebook::new(12, 2, vec![0.5, -1.0, 3.0, 4.0], vec![7, 1]).unwrap();
        assert_ne!(other.content_hash(), b.content_hash());
        assert!(Codebook::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    proptest! {
        #[test]
        fn quantize_invariant_under_common_scaling(
            words in proptest::collection::vec(-4.0f64..4.0, 2 * 6),
            ys in proptest::collection::vec(-4.0f64..4.0, 2 * 5),
            exp in -8i32..8,
        ) {
            let s = 2f64.powi(exp);
            let b = book(2, &words);
            let bs = book(2, &words.iter().map(|x| x * s).collect::<Vec<_>>());
            let lat = LatentGrid::new(5, 1, 2, ys.clone()).unwrap();
            let lats = LatentGrid::new(5, 1, 2, ys.iter().map(|x| x * s).collect()).unwrap();
            prop_assert_eq!(quantize_grid(&lat, &b).unwrap(), quantize_grid(&lats, &bs).unwrap());
        }

        #[test]
        fn dequantized_quantization_is_closest(
            words in proptest::collection::vec(-2.0f64..2.0, 3 * 5),
            ys in proptest::collection::vec(-2.0f64..2.0, 3 * 4),
        ) {
            let b = book(3, &words);
            let lat = LatentGrid::new(2, 2, 3, ys).unwrap();
            let deq = dequantize_grid(&quantize_grid(&lat, &b).unwrap(), &b).unwrap();
            for l in 0..4 {
                let got = sq_dist(deq.vector(l), lat.vector(l));
                for j in 0..5 {
                    prop_assert!(got <= sq_dist(b.codeword(j), lat.vector(l)));
                }
            }
        }

        #[test]
        fn one_hot_combination_is_dequantization(
            words in proptest::collection::vec(-2.0f64..2.0, 2 * 4),
            words2 in proptest::collection::vec(-2.0f64..2.0, 2 * 4),
            idx in proptest::collection::vec(0u32..4, 6),
            pick in proptest::collection::vec(0usize..2, 6),
        ) {
            let books = [book(2, &words), book(2, &words2)];
            let grid = IndexGrid::new(3, 2, idx).unwrap();
            let quants: Vec<_> = books.iter().map(|b| dequantize_grid(&grid, b).unwrap()).collect();
            let mut w = vec![0.0; 12];
            for (l, &j) in pick.iter().enumerate() {
                w[l * 2 + j] = 1.0;
            }
            let out = combine_weighted(&quants, &WeightMap::new(3, 2, 2, w).unwrap()).unwrap();
            for (l, &j) in pick.iter().enumerate() {
                prop_assert_eq!(out.vector(l), quants[j].vector(l));
            }
        }
    }
}
