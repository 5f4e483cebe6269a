//! Framed, checksummed symbol streams.
//!
//! A stream is either range coded under a serialized [`SymbolModel`], or, when
//! that would be larger, stored as fixed-width big-endian bit fields. The
//! fallback bounds the cost of any index stream by the naive fixed-length cost.

use super::{
    decode_symbols, encode_symbols, fit_model, index_width, ranks_to_symbols, symbols_to_ranks,
    SymbolModel,
};
use crate::error::{Error, Result};
use crate::wire::{crc32, ByteReader, PutLe};

/// Mixture components fitted per stream unless configured otherwise.
pub const DEFAULT_MIXTURES: usize = 2;

const KIND_RAW: u8 = 0;
const KIND_GMM: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    /// Fixed-width unsigned fields of `width` bits each.
    Raw { width: u8 },
    /// Range coded; symbols are signed.
    Gmm { model: SymbolModel },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodedStream {
    pub kind: StreamKind,
    pub count: u32,
    pub payload: Vec<u8>,
}

fn pack_bits(values: &[u32], width: u32) -> Vec<u8> {
    let mut out = vec![0u8; (values.len() * width as usize).div_ceil(8)];
    let mut bit = 0usize;
    for &v in values {
        for b in (0..width).rev() {
            if (v >> b) & 1 == 1 {
                out[bit / 8] |= 0x80 >> (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], width: u32, count: usize) -> Vec<u32> {
    let mut bit = 0usize;
    (0..count)
        .map(|_| {
            let mut v = 0u32;
            for _ in 0..width {
                v = (v << 1) | u32::from((bytes[bit / 8] >> (7 - bit % 8)) & 1);
                bit += 1;
            }
            v
        })
        .collect()
}

impl CodedStream {
    pub fn raw(values: &[u32], width: u32) -> Result<Self> {
        if width > 32 || (width < 32 && values.iter().any(|&v| v >> width != 0)) {
            return Err(Error::invalid(format!("value does not fit in {width} bits")));
        }
        Ok(CodedStream {
            kind: StreamKind::Raw { width: width as u8 },
            count: values.len() as u32,
            payload: pack_bits(values, width),
        })
    }

    /// Range codes signed symbols under a model fitted to them.
    pub fn gmm(symbols: &[i32], mixtures: usize) -> Result<Self> {
        let model = fit_model(symbols, mixtures)?;
        let payload = encode_symbols(symbols, &model)?;
        Ok(CodedStream {
            kind: StreamKind::Gmm { model },
            count: symbols.len() as u32,
            payload,
        })
    }

    /// Codes a rank sequence over an alphabet of `n_k`, zigzag-folded and range
    /// coded, or fixed-width when that is no larger.
    pub fn ranks(ranks: &[u32], n_k: usize, mixtures: usize) -> Result<Self> {
        let width = index_width(n_k);
        let raw = CodedStream::raw(ranks, width)?;
        if ranks.is_empty() || n_k <= 1 {
            return Ok(raw);
        }
        let coded = CodedStream::gmm(&ranks_to_symbols(ranks), mixtures)?;
        Ok(if coded.counted_bits() < raw.counted_bits() {
            coded
        } else {
            raw
        })
    }

    /// Forces the range-coded path for a rank sequence.
    pub fn ranks_gmm(ranks: &[u32], mixtures: usize) -> Result<Self> {
        CodedStream::gmm(&ranks_to_symbols(ranks), mixtures)
    }

    pub fn decode_ranks(&self, n_k: usize) -> Result<Vec<u32>> {
        let ranks = match &self.kind {
            StreamKind::Raw { width } => {
                self.check_raw_len(*width)?;
                unpack_bits(&self.payload, u32::from(*width), self.count as usize)
            }
            StreamKind::Gmm { model } => {
                let s = decode_symbols(&self.payload, model, self.count as usize)?;
                return symbols_to_ranks(&s, n_k);
            }
        };
        if let Some(r) = ranks.iter().find(|&&r| r as usize >= n_k) {
            return Err(Error::Corrupt(format!("rank {r} exceeds codebook size {n_k}")));
        }
        Ok(ranks)
    }

    pub fn decode_signed(&self) -> Result<Vec<i32>> {
        match &self.kind {
            StreamKind::Gmm { model } => decode_symbols(&self.payload, model, self.count as usize),
            StreamKind::Raw { .. } => Err(Error::Corrupt("expected a range-coded stream".into())),
        }
    }

    fn check_raw_len(&self, width: u8) -> Result<()> {
        let need = (self.count as usize * width as usize).div_ceil(8);
        if self.payload.len() != need {
            return Err(Error::Corrupt(format!(
                "fixed-width stream has {} bytes, expected {need}",
                self.payload.len()
            )));
        }
        Ok(())
    }

    /// Bits charged to this stream in rate accounting: the payload plus, for
    /// range-coded streams, the serialized model it needs.
    pub fn counted_bits(&self) -> u64 {
        let side = match &self.kind {
            StreamKind::Raw { .. } => 0,
            StreamKind::Gmm { model } => model.serialized_len(),
        };
        8 * (side + self.payload.len()) as u64
    }

    /// Layout: kind u8, (width u8 | model), count u32, payload length u32,
    /// payload, CRC-32 over everything before it.
    pub fn write_to(&self, out: &mut Vec<u8>) {
        let start = out.len();
        match &self.kind {
            StreamKind::Raw { width } => {
                out.put_u8(KIND_RAW);
                out.put_u8(*width);
            }
            StreamKind::Gmm { model } => {
                out.put_u8(KIND_GMM);
                model.write_to(out);
            }
        }
        out.put_u32(self.count);
        out.put_u32(self.payload.len() as u32);
        out.extend_from_slice(&self.payload);
        let crc = crc32(&[&out[start..]]);
        out.put_u32(crc);
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>, name: &str) -> Result<Self> {
        let start = r.pos();
        let kind = match r.u8(name)? {
            KIND_RAW => {
                let width = r.u8(name)?;
                if width > 32 {
                    return Err(Error::Corrupt(format!("{name}: field width {width}")));
                }
                StreamKind::Raw { width }
            }
            KIND_GMM => StreamKind::Gmm {
                model: SymbolModel::read_from(r)?,
            },
            k => return Err(Error::Corrupt(format!("{name}: unknown stream kind {k}"))),
        };
        let count = r.u32(name)?;
        let len = r.u32(name)? as usize;
        let payload = r.bytes(len, name)?.to_vec();
        let body = r.since(start);
        let crc = r.u32(name)?;
        if crc32(&[body]) != crc {
            return Err(Error::Crc {
                stream: name.to_string(),
            });
        }
        let s = CodedStream {
            kind,
            count,
            payload,
        };
        if let StreamKind::Raw { width } = s.kind {
            s.check_raw_len(width)?;
        }
        Ok(s)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v);
        v
    }

    pub fn from_bytes(buf: &[u8], name: &str) -> Result<Self> {
        let mut r = ByteReader::new(buf);
        let s = Self::read_from(&mut r, name)?;
        if r.remaining() != 0 {
            return Err(Error::Corrupt(format!("{name}: trailing bytes")));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::naive_index_bits;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bit_packing_round_trip() {
        let vals = [0u32, 1, 1023, 512, 7];
        let packed = pack_bits(&vals, 10);
        assert_eq!(packed.len(), 7);
        assert_eq!(unpack_bits(&packed, 10, 5), vals);
        assert!(CodedStream::raw(&[1024], 10).is_err());
    }

    #[test]
    fn uniform_ranks_fall_back_to_raw() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r: Vec<u32> = (0..256).map(|_| rng.random_range(0..1024)).collect();
        let s = CodedStream::ranks(&r, 1024, 2).unwrap();
        assert!(s.counted_bits() <= naive_index_bits(16, 16, 1024) + 128);
        assert_eq!(s.decode_ranks(1024).unwrap(), r);
    }

    #[test]
    fn skewed_ranks_use_the_range_coder() {
        let r: Vec<u32> = (0..4096).map(|i| if i % 17 == 0 { 3 } else { 0 }).collect();
        let s = CodedStream::ranks(&r, 1024, 2).unwrap();
        assert!(matches!(s.kind, StreamKind::Gmm { .. }));
        assert_eq!(s.decode_ranks(1024).unwrap(), r);
    }

    #[test]
    fn single_codeword_costs_nothing() {
        let s = CodedStream::ranks(&[0; 100], 1, 2).unwrap();
        assert_eq!(s.counted_bits(), 0);
        assert_eq!(s.decode_ranks(1).unwrap(), vec![0; 100]);
    }

    #[test]
    fn framing_round_trip_and_crc() {
        let s = CodedStream::ranks(&[0, 0, 1, 0, 2, 0, 0, 0, 5], 8, 2).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(CodedStream::from_bytes(&bytes, "t").unwrap(), s);
        for i in 0..bytes.len() {
            let mut b = bytes.clone();
            b[i] ^= 0x10;
            assert!(CodedStream::from_bytes(&b, "t").is_err(), "flip at {i} undetected");
        }
        assert!(matches!(
            CodedStream::from_bytes(&bytes[..bytes.len() - 1], "t"),
            Err(Error::Truncated(_))
        ));
    }

    #[test]
    fn wrong_model_is_caught_by_crc() {
        let s = CodedStream::gmm(&[0, 1, -1, 0, 0, 2], 1).unwrap();
        let mut bytes = s.to_bytes();
        // mean of the single component lives at offset 1 + 8
        bytes[9 + 7] ^= 0x01;
        assert!(matches!(
            CodedStream::from_bytes(&bytes, "idx"),
            Err(Error::Crc { .. }) | Err(Error::Corrupt(_))
        ));
    }
}
