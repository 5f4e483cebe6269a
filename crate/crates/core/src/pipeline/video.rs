//! Video coding: full index grids on the first frame (and on scene changes),
//! sparse index deltas elsewhere.

use rayon::prelude::*;

use super::{
    check_image, decoded_full_ranks, encode_lq, full_frame, header, index_grids, permutations,
    reconstruct_raw, to_ranks, EncodeConfig, LqSource,
};
use crate::bitstream::{Container, ContainerMode, FrameRecord, IndexPayload};
use crate::codebook::{CodebookBank, IndexGrid};
use crate::entropy::CodedStream;
use crate::error::{Error, Result};
use crate::imageio::{Image, VideoSequence};
use crate::transform::Theta;

/// Sparse difference between two grids of the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexDelta {
    /// Strictly increasing row-major positions whose value changed.
    pub positions: Vec<u32>,
    /// New values at those positions.
    pub values: Vec<u32>,
}

impl IndexDelta {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn diff_indices(prev: &IndexGrid, cur: &IndexGrid) -> Result<IndexDelta> {
    if prev.u != cur.u || prev.v != cur.v || prev.indices.len() != cur.indices.len() {
        return Err(Error::dims(format!(
            "grids {}x{} and {}x{} differ",
            prev.u, prev.v, cur.u, cur.v
        )));
    }
    let mut d = IndexDelta::default();
    for (l, (&a, &b)) in prev.indices.iter().zip(&cur.indices).enumerate() {
        if a != b {
            d.positions.push(l as u32);
            d.values.push(b);
        }
    }
    Ok(d)
}

pub fn apply_index_delta(prev: &IndexGrid, delta: &IndexDelta) -> Result<IndexGrid> {
    if delta.positions.len() != delta.values.len() {
        return Err(Error::Corrupt("delta positions and values differ in length".into()));
    }
    let mut out = prev.clone();
    let mut last = None;
    for (&p, &v) in delta.positions.iter().zip(&delta.values) {
        if last.is_some_and(|l| p <= l) || p as usize >= out.indices.len() {
            return Err(Error::Corrupt(format!("delta position {p} out of order or range")));
        }
        out.indices[p as usize] = v;
        last = Some(p);
    }
    Ok(out)
}

fn as_grid(u: usize, v: usize, ranks: Vec<u32>) -> IndexGrid {
    IndexGrid { u, v, indices: ranks }
}

pub fn encode_video(video: &VideoSequence, bank: &CodebookBank, cfg: &EncodeConfig) -> Result<Container> {
    cfg.validate(bank)?;
    check_image(&video.frames()[0], cfg)?;
    if let LqSource::ExternalFrames(list) = &cfg.lq {
        if list.len() != video.len() {
            return Err(Error::invalid(format!(
                "{} external LQ frames for {} video frames",
                list.len(),
                video.len()
            )));
        }
    }
    let (u, v) = cfg.transform.grid_dims(video.width(), video.height());
    let perms = permutations(bank);
    let ranks: Vec<Vec<Vec<u32>>> = video
        .frames()
        .par_iter()
        .map(|f| {
            let grids = index_grids(f, bank, cfg)?;
            Ok(grids.iter().zip(&perms).map(|(g, p)| to_ranks(g, p)).collect())
        })
        .collect::<Result<_>>()?;
    let lqs: Vec<_> = video
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, f)| encode_lq(f, &cfg.lq, t))
        .collect::<Result<_>>()?;

    let mut c = header(
        bank,
        cfg,
        ContainerMode::Video,
        video.width(),
        video.height(),
        video.frame_rate,
    );
    let cells = (u * v * bank.k()) as f64;
    for (t, lq) in lqs.into_iter().enumerate() {
        if t == 0 {
            c.frames.push(full_frame(&ranks[0], bank, cfg.mixtures, lq)?);
            continue;
        }
        let deltas = ranks[t - 1]
            .iter()
            .zip(&ranks[t])
            .map(|(a, b)| diff_indices(&as_grid(u, v, a.clone()), &as_grid(u, v, b.clone())))
            .collect::<Result<Vec<_>>>()?;
        let changed: usize = deltas.iter().map(IndexDelta::len).sum();
        if changed as f64 / cells > cfg.rho {
            c.frames.push(full_frame(&ranks[t], bank, cfg.mixtures, lq)?);
            continue;
        }
        let indices = deltas
            .into_iter()
            .zip(bank.books())
            .map(|(d, b)| {
                let ranks = if d.is_empty() {
                    None
                } else {
                    Some(CodedStream::ranks(&d.values, b.n_k(), cfg.mixtures)?)
                };
                Ok(IndexPayload::Delta {
                    positions: d.positions,
                    ranks,
                })
            })
            .collect::<Result<_>>()?;
        c.frames.push(FrameRecord { indices, lq });
    }
    Ok(c)
}

/// Rank grids of every frame, `[frame][codebook]`, after applying deltas.
pub fn decode_rank_grids(c: &Container) -> Result<Vec<Vec<IndexGrid>>> {
    let (u, v) = c.grid_dims();
    let mut out: Vec<Vec<IndexGrid>> = Vec::with_capacity(c.frames.len());
    out.push(
        decoded_full_ranks(c)?
            .into_iter()
            .map(|r| as_grid(u, v, r))
            .collect(),
    );
    for f in &c.frames[1..] {
        let prev = out.last().expect("first frame decoded");
        let mut cur = Vec::with_capacity(c.books.len());
        for ((p, b), pg) in f.indices.iter().zip(&c.books).zip(prev) {
            let n_k = b.n_k as usize;
            cur.push(match p {
                IndexPayload::Full(s) => as_grid(u, v, s.decode_ranks(n_k)?),
                IndexPayload::Delta { positions, ranks } => {
                    let values = match ranks {
                        Some(s) => s.decode_ranks(n_k)?,
                        None => Vec::new(),
                    };
                    apply_index_delta(
                        pg,
                        &IndexDelta {
                            positions: positions.clone(),
                            values,
                        },
                    )?
                }
            });
        }
        out.push(cur);
    }
    Ok(out)
}

pub fn decode_video_with(c: &Container, bank: &CodebookBank, theta: &Theta) -> Result<VideoSequence> {
    if c.mode != ContainerMode::Video {
        return Err(Error::invalid("container holds a still image"));
    }
    c.check_bank(bank)?;
    let grids = decode_rank_grids(c)?;
    let frames: Vec<Image> = grids
        .into_par_iter()
        .zip(c.frames.par_iter())
        .map(|(g, f)| {
            let ranks: Vec<Vec<u32>> = g.into_iter().map(|x| x.indices).collect();
            let raw = reconstruct_raw(c, bank, theta, &ranks, &f.lq)?;
            Image::from_clamped(c.width as usize, c.height as usize, c.transform.channels, raw)
        })
        .collect::<Result<_>>()?;
    let rate = if c.frame_rate > 0.0 { c.frame_rate } else { 25.0 };
    VideoSequence::new(frames, rate)
}

pub fn decode_video(c: &Container, bank: &CodebookBank) -> Result<VideoSequence> {
    decode_video_with(c, bank, &Theta::Default)
}

/// Per-transition fractions of unchanged index slots, and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct UnchangedFractions {
    pub per_transition: Vec<f64>,
    pub mean: f64,
}

fn fractions(grids: &[Vec<IndexGrid>]) -> Result<UnchangedFractions> {
    if grids.len() < 2 {
        return Err(Error::invalid("unchanged fraction needs at least two frames"));
    }
    let per_transition = grids
        .windows(2)
        .map(|w| {
            let mut same = 0usize;
            let mut total = 0usize;
            for (a, b) in w[0].iter().zip(&w[1]) {
                same += a.indices.len() - diff_indices(a, b)?.len();
                total += a.indices.len();
            }
            Ok(same as f64 / total as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_transition.iter().sum::<f64>() / per_transition.len() as f64;
    Ok(UnchangedFractions {
        per_transition,
        mean,
    })
}

/// Fraction of indices, over all codebooks, unchanged between consecutive
/// frames. One entry per transition.
pub fn unchanged_fraction(video: &VideoSequence, bank: &CodebookBank, cfg: &EncodeConfig) -> Result<UnchangedFractions> {
    cfg.validate(bank)?;
    check_image(&video.frames()[0], cfg)?;
    let grids: Vec<Vec<IndexGrid>> = video
        .frames()
        .par_iter()
        .map(|f| index_grids(f, bank, cfg))
        .collect::<Result<_>>()?;
    fractions(&grids)
}

/// Same as [`unchanged_fraction`], read from an encoded video.
pub fn unchanged_fractions_of(c: &Container) -> Result<UnchangedFractions> {
    fractions(&decode_rank_grids(c)?)
}
