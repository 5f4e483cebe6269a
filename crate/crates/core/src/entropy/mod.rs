//! Lossless coding of codeword-index streams.
//!
//! Indices are first replaced by their rank in a usage-frequency ordering of
//! the codebook, ranks are folded onto the signed integers (odd ranks become
//! negative) so the most frequent codewords cluster around zero, and the
//! result is range coded under a per-stream Gaussian-mixture model.

mod model;
mod range_coder;
mod stream;

pub use model::{fit_model, MixtureComponent, SymbolModel, EM_ITERATIONS, SIGMA_FLOOR};
pub use range_coder::{RangeDecoder, RangeEncoder, PRECISION_BITS, TOTAL_FREQ};
pub use stream::{CodedStream, StreamKind, DEFAULT_MIXTURES};

use crate::error::{Error, Result};

/// Bits per index for a fixed-length code over `n_k` symbols: `ceil(log2 n_k)`.
pub fn index_width(n_k: usize) -> u32 {
    if n_k <= 1 {
        0
    } else {
        usize::BITS - (n_k - 1).leading_zeros()
    }
}

/// Fixed-length cost of a `u x v` index grid: `u * v * ceil(log2 n_k)`.
pub fn naive_index_bits(u: usize, v: usize, n_k: usize) -> u64 {
    (u as u64) * (v as u64) * u64::from(index_width(n_k))
}

/// Bijection between codeword indices and frequency ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        let v: Vec<u32> = (0..n as u32).collect();
        Permutation {
            forward: v.clone(),
            inverse: v,
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Index -> rank.
    pub fn forward(&self) -> &[u32] {
        &self.forward
    }

    /// Rank -> index.
    pub fn inverse(&self) -> &[u32] {
        &self.inverse
    }

    pub fn rank_of(&self, index: u32) -> u32 {
        self.forward[index as usize]
    }

    pub fn index_of(&self, rank: u32) -> u32 {
        self.inverse[rank as usize]
    }
}

/// Rank 0 goes to the most used codeword; equal counts keep index order.
pub fn build_frequency_permutation(freq: &[u64]) -> Permutation {
    let mut inverse: Vec<u32> = (0..freq.len() as u32).collect();
    inverse.sort_by(|&a, &b| freq[b as usize].cmp(&freq[a as usize]).then(a.cmp(&b)));
    let mut forward = vec![0u32; freq.len()];
    for (rank, &idx) in inverse.iter().enumerate() {
        forward[idx as usize] = rank as u32;
    }
    Permutation { forward, inverse }
}

/// Even ranks map to `ix / 2`, odd ranks to `-(ix + 1) / 2`.
#[inline]
pub fn zigzag(ix: u32) -> i32 {
    if ix % 2 == 1 {
        (-((i64::from(ix) + 1) / 2)) as i32
    } else {
        (ix / 2) as i32
    }
}

#[inline]
pub fn unzigzag(v: i32) -> u32 {
    if v < 0 {
        (-2 * i64::from(v) - 1) as u32
    } else {
        2 * v as u32
    }
}

/// Range codes `symbols` under the model's static frequency table.
pub fn encode_symbols(symbols: &[i32], model: &SymbolModel) -> Result<Vec<u8>> {
    let mut enc = RangeEncoder::new();
    for &s in symbols {
        let (start, size) = model.interval(s)?;
        enc.encode(start, size);
    }
    Ok(enc.finish())
}

/// Inverse of [`encode_symbols`]. Fails on streams that run out early or have
/// bytes left over after `count` symbols.
pub fn decode_symbols(bytes: &[u8], model: &SymbolModel, count: usize) -> Result<Vec<i32>> {
    let mut dec = RangeDecoder::new(bytes)?;
    let mut out = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let t = dec.target()?;
        let (s, start, size) = model.lookup(t);
        dec.consume(start, size)?;
        out.push(s);
    }
    dec.finish()?;
    Ok(out)
}

/// Rank grid to signed symbols.
pub fn ranks_to_symbols(ranks: &[u32]) -> Vec<i32> {
    ranks.iter().map(|&r| zigzag(r)).collect()
}

pub fn symbols_to_ranks(symbols: &[i32], n_k: usize) -> Result<Vec<u32>> {
    symbols
        .iter()
        .map(|&s| {
            let r = unzigzag(s);
            if (r as usize) < n_k {
                Ok(r)
            } else {
                Err(Error::Corrupt(format!("decoded rank {r} exceeds codebook size {n_k}")))
            }
        })
        .collect()
}
