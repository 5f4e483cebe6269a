//! Codebook-index image and video codec.
//!
//! Images are mapped to a grid of latent vectors by a block transform, each
//! vector is replaced by the index of its nearest codeword, and the index
//! grids are entropy coded. A separately coded low-quality (LQ) substitute of
//! the input travels alongside the indices; the decoder uses it both to weight
//! multiple codebooks and to pull the dequantized latent back towards the
//! input with an adjustable control strength.
//!
//! Videos reuse the same pipeline and only transmit the grid positions whose
//! codeword rank changed since the previous frame.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bitstream;
pub mod codebook;
pub mod entropy;
mod error;
pub mod imageio;
pub mod lqcodec;
pub mod pipeline;
pub mod transform;
mod wire;

pub use bitstream::{rate_report, read_container, write_container, Container, RateReport};
pub use codebook::{Codebook, CodebookBank, IndexGrid, WeightMap};
pub use entropy::{Permutation, SymbolModel};
pub use error::{Error, Result};
pub use imageio::{Image, ImageFormat, VideoSequence};
pub use lqcodec::{LqPayload, LqQuality};
pub use pipeline::{
    decode_image, decode_video, encode_image, encode_video, psnr, ssim, EncodeConfig, IndexDelta,
    LqSource,
};
pub use transform::{CftParams, LatentGrid, Theta, TransformSpec};
