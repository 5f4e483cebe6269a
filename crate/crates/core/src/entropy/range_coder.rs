//! Byte-oriented range coder with a 64-bit `low` register and carry propagation.
//!
//! The coding window is 56 bits wide; bit 56 of `low` holds a pending carry.
//! Frequencies are expressed against a fixed total of `2^16`.

use crate::error::{Error, Result};

pub const PRECISION_BITS: u32 = 16;
pub const TOTAL_FREQ: u32 = 1 << PRECISION_BITS;

const TOP: u64 = 1 << 56;
const BOT: u64 = 1 << 48;
const FLUSH_BYTES: usize = 8;

pub struct RangeEncoder {
    low: u64,
    range: u64,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: TOP - 1,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    /// Encodes the interval `[start, start + size)` out of `TOTAL_FREQ`.
    #[inline]
    pub fn encode(&mut self, start: u32, size: u32) {
        debug_assert!(size > 0 && start + size <= TOTAL_FREQ);
        let r = self.range >> PRECISION_BITS;
        self.low += r * u64::from(start);
        self.range = r * u64::from(size);
        while self.range < BOT {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn shift_low(&mut self) {
        if (self.low & (TOP - 1)) < (0xFF << 48) || self.low >= TOP {
            let carry = (self.low >> 56) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 48) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & (BOT - 1)) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..FLUSH_BYTES {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    buf: &'a [u8],
    pos: usize,
    code: u64,
    range: u64,
    r: u64,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(buf: &'a [u8]) -> Result<Self> {
        if buf.len() < FLUSH_BYTES {
            return Err(Error::Truncated(format!(
                "range-coded stream of {} bytes is shorter than its {FLUSH_BYTES}-byte preamble",
                buf.len()
            )));
        }
        let code = buf[..FLUSH_BYTES]
            .iter()
            .fold(0u64, |acc, &b| (acc << 8) | u64::from(b));
        let range = TOP - 1;
        if code >= range {
            return Err(Error::Corrupt("range coder preamble out of range".into()));
        }
        Ok(RangeDecoder {
            buf,
            pos: FLUSH_BYTES,
            code,
            range,
            r: 0,
        })
    }

    /// Cumulative frequency the next symbol falls in; follow with [`Self::consume`].
    #[inline]
    pub fn target(&mut self) -> Result<u32> {
        self.r = self.range >> PRECISION_BITS;
        let v = self.code / self.r;
        if v >= u64::from(TOTAL_FREQ) {
            return Err(Error::Corrupt("range coder state beyond the model total".into()));
        }
        Ok(v as u32)
    }

    #[inline]
    pub fn consume(&mut self, start: u32, size: u32) -> Result<()> {
        self.code -= self.r * u64::from(start);
        self.range = self.r * u64::from(size);
        while self.range < BOT {
            let b = *self.buf.get(self.pos).ok_or_else(|| {
                Error::Truncated(format!(
                    "range-coded stream exhausted after {} bytes",
                    self.buf.len()
                ))
            })?;
            self.pos += 1;
            self.code = (self.code << 8) | u64::from(b);
            self.range <<= 8;
        }
        Ok(())
    }

    /// Errors unless every byte of the stream was consumed.
    pub fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Corrupt(format!(
                "{} unread bytes after the last symbol",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
