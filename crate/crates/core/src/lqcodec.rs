//! Low-quality (LQ) substitute: a small JPEG-like codec plus external import.
//!
//! The built-in path downsamples the input with the bicubic resampler, applies
//! an 8x8 block DCT, quantizes coefficients uniformly and range codes the DC
//! and AC coefficients as two mixture-model streams. Externally produced LQ
//! images are carried by path with a caller-supplied bit count.

use std::path::{Path, PathBuf};

use crate::entropy::CodedStream;
use crate::error::{Error, Result};
use crate::imageio::{bicubic_resample, load_image_auto, Image};
use crate::transform::{LatentGrid, LatentTransform, TransformSpec};
use crate::wire::{crc32, ByteReader, PutLe};

/// Block size of the built-in LQ codec.
pub const LQ_BLOCK: usize = 8;
/// Coefficients whose magnitude reaches this value are coded as an escape
/// symbol plus a varint remainder.
pub const ESCAPE_LIMIT: i64 = 4095;

const KIND_BUILTIN: u8 = 0;
const KIND_EXTERNAL: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqQuality {
    /// Downsampling factor, one of 1, 2 or 4.
    pub downsample: u8,
    /// Uniform quantization step for transform coefficients.
    pub quant_step: f64,
}

impl LqQuality {
    pub fn new(downsample: u8, quant_step: f64) -> Result<Self> {
        let q = LqQuality {
            downsample,
            quant_step,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if ![1, 2, 4].contains(&self.downsample) {
            return Err(Error::invalid(format!(
                "LQ downsample factor {} not in {{1, 2, 4}}",
                self.downsample
            )));
        }
        if !(self.quant_step > 0.0) || !self.quant_step.is_finite() {
            return Err(Error::invalid(format!(
                "LQ quantization step {} must be positive and finite",
                self.quant_step
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LqPayload {
    Builtin { bytes: Vec<u8> },
    External { path: PathBuf, bit_count: u64 },
}

impl LqPayload {
    /// Bits charged for sending the LQ substitute.
    pub fn bit_count(&self) -> u64 {
        match self {
            LqPayload::Builtin { bytes } => 8 * bytes.len() as u64,
            LqPayload::External { bit_count, .. } => *bit_count,
        }
    }

    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        let start = out.len();
        match self {
            LqPayload::Builtin { bytes } => {
                out.put_u8(KIND_BUILTIN);
                out.put_u32(bytes.len() as u32);
                out.extend_from_slice(bytes);
            }
            LqPayload::External { path, bit_count } => {
                let p = path.to_string_lossy();
                out.put_u8(KIND_EXTERNAL);
                out.put_u32(p.len() as u32);
                out.extend_from_slice(p.as_bytes());
                out.put_u64(*bit_count);
            }
        }
        let crc = crc32(&[&out[start..]]);
        out.put_u32(crc);
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>, name: &str) -> Result<Self> {
        let start = r.pos();
        let kind = r.u8(name)?;
        let len = r.u32(name)? as usize;
        let body = r.bytes(len, name)?;
        let payload = match kind {
            KIND_BUILTIN => LqPayload::Builtin {
                bytes: body.to_vec(),
            },
            KIND_EXTERNAL => {
                let bit_count = r.u64(name)?;
                let path = std::str::from_utf8(body)
                    .map_err(|_| Error::Corrupt(format!("{name}: external path is not UTF-8")))?;
                LqPayload::External {
                    path: PathBuf::from(path),
                    bit_count,
                }
            }
            k => return Err(Error::Corrupt(format!("{name}: unknown LQ kind {k}"))),
        };
        let covered = r.since(start);
        if crc32(&[covered]) != r.u32(name)? {
            return Err(Error::Crc {
                stream: name.to_string(),
            });
        }
        Ok(payload)
    }
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let b = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn get_varint(r: &mut ByteReader<'_>) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let b = r.u8("LQ escape")?;
        v |= u64::from(b & 0x7F) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::Corrupt("overlong varint in LQ escapes".into()))
}

fn to_symbols(coefs: &[i64], escapes: &mut Vec<u8>) -> Vec<i32> {
    coefs
        .iter()
        .map(|&c| {
            if c.abs() >= ESCAPE_LIMIT {
                put_varint(escapes, (c.abs() - ESCAPE_LIMIT) as u64);
                (ESCAPE_LIMIT * c.signum()) as i32
            } else {
                c as i32
            }
        })
        .collect()
}

fn from_symbols(symbols: &[i32], r: &mut ByteReader<'_>) -> Result<Vec<i64>> {
    symbols
        .iter()
        .map(|&s| {
            let s = i64::from(s);
            if s.abs() >= ESCAPE_LIMIT {
                let extra = i64::try_from(get_varint(r)?)
                    .map_err(|_| Error::Corrupt("LQ escape overflow".into()))?;
                Ok(s.signum() * (ESCAPE_LIMIT + extra))
            } else {
                Ok(s)
            }
        })
        .collect()
}

fn downsampled_dims(w: usize, h: usize, s: u8) -> (usize, usize) {
    (w.div_ceil(s as usize), h.div_ceil(s as usize))
}

/// Encodes the LQ substitute of `img`.
///
/// Payload layout: `s` u8, `q` f64, channels u8, downsampled width/height u32,
/// DC stream, AC stream, escape byte count u32 + escape varints, CRC-32.
pub fn lq_encode(img: &Image, quality: &LqQuality) -> Result<LqPayload> {
    quality.validate()?;
    let (dw, dh) = downsampled_dims(img.width(), img.height(), quality.downsample);
    let small = if quality.downsample == 1 {
        img.clone()
    } else {
        bicubic_resample(img, dw, dh)?
    };
    let spec = TransformSpec::dct(LQ_BLOCK, img.channels());
    let lat = spec.analyze(&small)?;
    let per_channel = LQ_BLOCK * LQ_BLOCK;

    let mut dc = Vec::new();
    let mut ac = Vec::new();
    for (i, &c) in lat.data().iter().enumerate() {
        let q = (c / quality.quant_step).round() as i64;
        if i % per_channel == 0 {
            dc.push(q);
        } else {
            ac.push(q);
        }
    }

    let mut escapes = Vec::new();
    let dc_sym = to_symbols(&dc, &mut escapes);
    let ac_sym = to_symbols(&ac, &mut escapes);

    let mut out = Vec::new();
    out.put_u8(quality.downsample);
    out.put_f64(quality.quant_step);
    out.put_u8(img.channels() as u8);
    out.put_u32(dw as u32);
    out.put_u32(dh as u32);
    CodedStream::gmm(&dc_sym, 2)?.write_to(&mut out);
    CodedStream::gmm(&ac_sym, 2)?.write_to(&mut out);
    out.put_u32(escapes.len() as u32);
    out.extend_from_slice(&escapes);
    let crc = crc32(&[&out]);
    out.put_u32(crc);
    Ok(LqPayload::Builtin { bytes: out })
}

fn decode_builtin(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 4 {
        return Err(Error::Truncated("LQ payload".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32(&[body]) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::Crc {
            stream: "lq".into(),
        });
    }
    let mut r = ByteReader::new(body);
    let quality = LqQuality::new(r.u8("LQ header")?, r.f64("LQ header")?)
        .map_err(|e| Error::Corrupt(format!("LQ header: {e}")))?;
    let channels = r.u8("LQ header")? as usize;
    let dw = r.u32("LQ header")? as usize;
    let dh = r.u32("LQ header")? as usize;
    if dw == 0 || dh == 0 || (channels != 1 && channels != 3) {
        return Err(Error::Corrupt(format!("LQ geometry {dw}x{dh}x{channels}")));
    }
    let spec = TransformSpec::dct(LQ_BLOCK, channels);
    let (u, v) = spec.grid_dims(dw, dh);
    let per_channel = LQ_BLOCK * LQ_BLOCK;
    let n_dc = u * v * channels;
    let n_ac = n_dc * (per_channel - 1);

    let dc_stream = CodedStream::read_from(&mut r, "lq.dc")?;
    let ac_stream = CodedStream::read_from(&mut r, "lq.ac")?;
    if dc_stream.count as usize != n_dc || ac_stream.count as usize != n_ac {
        return Err(Error::Corrupt("LQ coefficient count does not match geometry".into()));
    }
    let dc_sym = dc_stream.decode_signed()?;
    let ac_sym = ac_stream.decode_signed()?;
    let esc_len = r.u32("LQ escapes")? as usize;
    let esc = r.bytes(esc_len, "LQ escapes")?;
    if r.remaining() != 0 {
        return Err(Error::Corrupt("trailing bytes in LQ payload".into()));
    }
    let mut er = ByteReader::new(esc);
    let dc = from_symbols(&dc_sym, &mut er)?;
    let ac = from_symbols(&ac_sym, &mut er)?;
    if er.remaining() != 0 {
        return Err(Error::Corrupt("unused LQ escape bytes".into()));
    }

    let dequant = |q: i64| {
        if q == 0 {
            0.0
        } else {
            q as f64 * quality.quant_step
        }
    };
    let mut data = Vec::with_capacity(n_dc * per_channel);
    let mut ac_it = ac.into_iter();
    for &d in &dc {
        data.push(dequant(d));
        data.extend(ac_it.by_ref().take(per_channel - 1).map(dequant));
    }
    let lat = LatentGrid::new(u, v, spec.latent_dim(), data)
        .map_err(|e| Error::Corrupt(format!("LQ coefficients: {e}")))?;
    spec.synthesize(&lat, dw, dh)
}

/// Reconstructs the LQ substitute at `out_w x out_h`.
pub fn lq_decode(payload: &LqPayload, out_w: usize, out_h: usize) -> Result<Image> {
    let small = match payload {
        LqPayload::Builtin { bytes } => decode_builtin(bytes)?,
        LqPayload::External { path, .. } => load_image_auto(path)?,
    };
    if small.width() == out_w && small.height() == out_h {
        Ok(small)
    } else {
        bicubic_resample(&small, out_w, out_h)
    }
}

/// Wraps an LQ image produced by an external codec. `bit_count` is that
/// codec's stream size; it is only used for rate accounting.
pub fn import_external_lq(path: &Path, bit_count: u64) -> Result<LqPayload> {
    load_image_auto(path)?;
    Ok(LqPayload::External {
        path: path.to_path_buf(),
        bit_count,
    })
}
