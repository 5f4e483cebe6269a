//! End-to-end encode and decode of images and videos.

mod metrics;
mod video;

pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use video::{
    apply_index_delta, decode_rank_grids, decode_video, decode_video_with, diff_indices, encode_video,
    unchanged_fraction, unchanged_fractions_of, IndexDelta, UnchangedFractions,
};

use std::path::PathBuf;

use rayon::prelude::*;

use crate::bitstream::{BookRef, Container, ContainerMode, FrameRecord, IndexPayload};
use crate::codebook::{
    combine_weighted, dequantize_grid, predict_weights, quantize_grid, CodebookBank, IndexGrid,
};
use crate::entropy::{build_frequency_permutation, CodedStream, Permutation, DEFAULT_MIXTURES};
use crate::error::{Error, Result};
use crate::imageio::Image;
use crate::lqcodec::{import_external_lq, lq_decode, lq_encode, LqPayload, LqQuality};
use crate::transform::{cft_modulate, CftParams, LatentTransform, Theta, TransformSpec};

/// Where the LQ substitute comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum LqSource {
    Builtin(LqQuality),
    /// One externally coded image, reused for every frame.
    External { path: PathBuf, bit_count: u64 },
    /// One externally coded image per video frame.
    ExternalFrames(Vec<(PathBuf, u64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeConfig {
    pub transform: TransformSpec,
    pub alpha: f64,
    pub tau: f64,
    pub lq: LqSource,
    /// A video frame is sent whole once more than this fraction of its
    /// indices changed.
    pub rho: f64,
    pub mixtures: usize,
    /// Images are quantized in independent block-aligned tiles of at most
    /// this many pixels per side.
    pub tile_limit: usize,
}

impl EncodeConfig {
    pub fn new(transform: TransformSpec, lq: LqSource) -> Self {
        EncodeConfig {
            transform,
            alpha: 0.0,
            tau: 1.0,
            lq,
            rho: 0.9,
            mixtures: DEFAULT_MIXTURES,
            tile_limit: 1080,
        }
    }

    fn validate(&self, bank: &CodebookBank) -> Result<()> {
        self.transform.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid(format!("tau {} must be positive", self.tau)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!("rho {} outside (0, 1]", self.rho)));
        }
        if self.mixtures == 0 {
            return Err(Error::invalid("at least one mixture component is needed"));
        }
        if bank.d() != self.transform.latent_dim() {
            return Err(Error::dims(format!(
                "codebook dimension {} does not match p^2 c = {}",
                bank.d(),
                self.transform.latent_dim()
            )));
        }
        if let LqSource::Builtin(q) = &self.lq {
            q.validate()?;
        }
        Ok(())
    }

    /// Tile side in pixels, a multiple of the block size.
    fn tile_side(&self) -> usize {
        let p = self.transform.block_size;
        (self.tile_limit / p).max(1) * p
    }
}

fn check_image(img: &Image, cfg: &EncodeConfig) -> Result<()> {
    let p = cfg.transform.block_size;
    if img.channels() != cfg.transform.channels {
        return Err(Error::dims(format!(
            "image has {} channels, transform expects {}",
            img.channels(),
            cfg.transform.channels
        )));
    }
    if img.width() < p || img.height() < p {
        return Err(Error::dims(format!(
            "image {}x{} is smaller than one {p}x{p} block",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

fn crop(img: &Image, x0: usize, y0: usize, w: usize, h: usize) -> Image {
    let c = img.channels();
    let mut data = Vec::with_capacity(w * h * c);
    for y in y0..y0 + h {
        let row = (y * img.width() + x0) * c;
        data.extend_from_slice(&img.data()[row..row + w * c]);
    }
    Image::new(w, h, c, data).expect("crop of a valid image")
}

/// Quantizes `img` against every codebook. Tiles are block aligned, so the
/// result does not depend on the tile size.
pub fn index_grids(img: &Image, bank: &CodebookBank, cfg: &EncodeConfig) -> Result<Vec<IndexGrid>> {
    let spec = &cfg.transform;
    let p = spec.block_size;
    let (u, v) = spec.grid_dims(img.width(), img.height());
    let side = cfg.tile_side();
    let mut tiles = Vec::new();
    for y0 in (0..img.height()).step_by(side) {
        for x0 in (0..img.width()).step_by(side) {
            tiles.push((x0, y0));
        }
    }
    let results: Vec<(usize, usize, Vec<IndexGrid>)> = tiles
        .par_iter()
        .map(|&(x0, y0)| {
            let w = side.min(img.width() - x0);
            let h = side.min(img.height() - y0);
            let lat = if w == img.width() && h == img.height() {
                spec.analyze(img)?
            } else {
                spec.analyze(&crop(img, x0, y0, w, h))?
            };
            let grids = bank
                .books()
                .iter()
                .map(|b| quantize_grid(&lat, b))
                .collect::<Result<Vec<_>>>()?;
            Ok((x0 / p, y0 / p, grids))
        })
        .collect::<Result<_>>()?;

    let mut out: Vec<IndexGrid> = (0..bank.k())
        .map(|_| IndexGrid {
            u,
            v,
            indices: vec![0; u * v],
        })
        .collect();
    for (bx, by, grids) in results {
        for (dst, g) in out.iter_mut().zip(grids) {
            for row in 0..g.v {
                let at = (by + row) * u + bx;
                dst.indices[at..at + g.u].copy_from_slice(&g.indices[row * g.u..(row + 1) * g.u]);
            }
        }
    }
    Ok(out)
}

pub(crate) fn permutations(bank: &CodebookBank) -> Vec<Permutation> {
    bank.books()
        .iter()
        .map(|b| build_frequency_permutation(b.freq()))
        .collect()
}

pub(crate) fn to_ranks(grid: &IndexGrid, perm: &Permutation) -> Vec<u32> {
    grid.indices.iter().map(|&i| perm.rank_of(i)).collect()
}

fn book_refs(bank: &CodebookBank) -> Vec<BookRef> {
    bank.books()
        .iter()
        .map(|b| BookRef {
            id: b.id(),
            hash: b.content_hash(),
            n_k: b.n_k() as u32,
        })
        .collect()
}

fn full_frame(rank_grids: &[Vec<u32>], bank: &CodebookBank, mixtures: usize, lq: LqPayload) -> Result<FrameRecord> {
    let indices = rank_grids
        .iter()
        .zip(bank.books())
        .map(|(r, b)| CodedStream::ranks(r, b.n_k(), mixtures).map(IndexPayload::Full))
        .collect::<Result<_>>()?;
    Ok(FrameRecord { indices, lq })
}

fn header(bank: &CodebookBank, cfg: &EncodeConfig, mode: ContainerMode, w: usize, h: usize, frame_rate: f64) -> Container {
    Container {
        mode,
        width: w as u32,
        height: h as u32,
        transform: cfg.transform,
        books: book_refs(bank),
        alpha: cfg.alpha,
        tau: cfg.tau,
        frame_rate,
        frames: Vec::new(),
    }
}

pub(crate) fn encode_lq(img: &Image, source: &LqSource, frame: usize) -> Result<LqPayload> {
    match source {
        LqSource::Builtin(q) => lq_encode(img, q),
        LqSource::External { path, bit_count } => import_external_lq(path, *bit_count),
        LqSource::ExternalFrames(list) => {
            let (path, bits) = list.get(frame).ok_or_else(|| {
                Error::invalid(format!("no external LQ image for frame {frame}"))
            })?;
            import_external_lq(path, *bits)
        }
    }
}

pub fn encode_image(img: &Image, bank: &CodebookBank, cfg: &EncodeConfig) -> Result<Container> {
    cfg.validate(bank)?;
    check_image(img, cfg)?;
    let grids = index_grids(img, bank, cfg)?;
    let perms = permutations(bank);
    let ranks: Vec<Vec<u32>> = grids.iter().zip(&perms).map(|(g, p)| to_ranks(g, p)).collect();
    let lq = encode_lq(img, &cfg.lq, 0)?;
    let mut c = header(bank, cfg, ContainerMode::Image, img.width(), img.height(), 0.0);
    c.frames.push(full_frame(&ranks, bank, cfg.mixtures, lq)?);
    Ok(c)
}

/// Reconstructs one frame from its rank grids and LQ payload, before clamping.
pub(crate) fn reconstruct_raw(
    c: &Container,
    bank: &CodebookBank,
    theta: &Theta,
    ranks: &[Vec<u32>],
    lq: &LqPayload,
) -> Result<Vec<f64>> {
    let spec = &c.transform;
    let (w, h) = (c.width as usize, c.height as usize);
    let (u, v) = c.grid_dims();
    let perms = permutations(bank);
    let quants = ranks
        .iter()
        .zip(&perms)
        .zip(bank.books())
        .map(|((r, p), b)| {
            let idx = IndexGrid {
                u,
                v,
                indices: r.iter().map(|&x| p.index_of(x)).collect(),
            };
            dequantize_grid(&idx, b)
        })
        .collect::<Result<Vec<_>>>()?;

    let lq_img = lq_decode(lq, w, h)?;
    if lq_img.channels() != spec.channels {
        return Err(Error::dims(format!(
            "LQ image has {} channels, container has {}",
            lq_img.channels(),
            spec.channels
        )));
    }
    let flq = spec.analyze(&lq_img)?;
    let yq = if bank.k() == 1 {
        quants.into_iter().next().expect("one codebook")
    } else {
        let wmap = predict_weights(&flq, bank, c.tau)?;
        combine_weighted(&quants, &wmap)?
    };
    let params = CftParams {
        alpha: c.alpha,
        theta: theta.clone(),
    };
    let ymod = cft_modulate(&yq, &flq, &params)?;
    spec.synthesize_raw(&ymod, w, h)
}

fn decoded_full_ranks(c: &Container) -> Result<Vec<Vec<u32>>> {
    c.frames[0]
        .indices
        .iter()
        .zip(&c.books)
        .map(|(p, b)| match p {
            IndexPayload::Full(s) => s.decode_ranks(b.n_k as usize),
            IndexPayload::Delta { .. } => Err(Error::Corrupt("first frame is not a full frame".into())),
        })
        .collect()
}

/// Unclamped reconstruction of a still image.
pub fn decode_image_raw(c: &Container, bank: &CodebookBank, theta: &Theta) -> Result<Vec<f64>> {
    if c.mode != ContainerMode::Image {
        return Err(Error::invalid("container holds a video"));
    }
    c.check_bank(bank)?;
    let ranks = decoded_full_ranks(c)?;
    reconstruct_raw(c, bank, theta, &ranks, &c.frames[0].lq)
}

pub fn decode_image_with(c: &Container, bank: &CodebookBank, theta: &Theta) -> Result<Image> {
    let raw = decode_image_raw(c, bank, theta)?;
    Image::from_clamped(c.width as usize, c.height as usize, c.transform.channels, raw)
}

pub fn decode_image(c: &Container, bank: &CodebookBank) -> Result<Image> {
    decode_image_with(c, bank, &Theta::Default)
}
