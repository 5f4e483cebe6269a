//! Container format for encoded images and videos, and rate accounting.
//!
//! See `FORMAT.md` at the repository root for the byte layout.

use std::path::Path;

use crate::codebook::{CodebookBank, MAX_CODEWORDS};
use crate::entropy::CodedStream;
use crate::error::{Error, Result};
use crate::lqcodec::LqPayload;
use crate::transform::{Basis, TransformSpec};
use crate::wire::{crc32, ByteReader, PutLe};

pub const MAGIC: &[u8; 4] = b"SVQ1";
pub const VERSION: u16 = 1;
/// Largest accepted image side, in pixels.
pub const MAX_DIMENSION: u32 = 1 << 16;

const FRAME_FULL: u8 = 0;
const FRAME_DELTA: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerMode {
    Image,
    Video,
}

/// Codebook identity as recorded in a container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookRef {
    pub id: u32,
    pub hash: u64,
    pub n_k: u32,
}

/// Index data for one codebook in one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexPayload {
    /// The whole rank grid, row-major.
    Full(CodedStream),
    /// Positions (strictly increasing) whose rank changed since the previous
    /// frame, plus the new ranks. `ranks` is absent exactly when no position
    /// changed.
    Delta {
        positions: Vec<u32>,
        ranks: Option<CodedStream>,
    },
}

impl IndexPayload {
    /// Bits charged in rate accounting. Each delta position costs 32 bits.
    pub fn counted_bits(&self) -> u64 {
        match self {
            IndexPayload::Full(s) => s.counted_bits(),
            IndexPayload::Delta { positions, ranks } => {
                32 * positions.len() as u64 + ranks.as_ref().map_or(0, |s| s.counted_bits())
            }
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, IndexPayload::Full(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// One entry per codebook, all of the same kind.
    pub indices: Vec<IndexPayload>,
    pub lq: LqPayload,
}

impl FrameRecord {
    pub fn is_full(&self) -> bool {
        self.indices.first().is_some_and(IndexPayload::is_full)
    }

    pub fn index_bits(&self) -> u64 {
        self.indices.iter().map(IndexPayload::counted_bits).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub mode: ContainerMode,
    pub width: u32,
    pub height: u32,
    pub transform: TransformSpec,
    pub books: Vec<BookRef>,
    pub alpha: f64,
    pub tau: f64,
    /// Zero for still images.
    pub frame_rate: f64,
    pub frames: Vec<FrameRecord>,
}

impl Container {
    pub fn grid_dims(&self) -> (usize, usize) {
        self.transform
            .grid_dims(self.width as usize, self.height as usize)
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Fails with [`Error::HashMismatch`] unless `bank` holds exactly the
    /// codebooks this container was encoded with, in order.
    pub fn check_bank(&self, bank: &CodebookBank) -> Result<()> {
        if bank.k() != self.books.len() {
            return Err(Error::invalid(format!(
                "container uses {} codebooks, {} supplied",
                self.books.len(),
                bank.k()
            )));
        }
        for (i, (r, b)) in self.books.iter().zip(bank.books()).enumerate() {
            let actual = b.content_hash();
            if actual != r.hash {
                return Err(Error::HashMismatch {
                    index: i,
                    expected: r.hash,
                    actual,
                });
            }
        }
        if bank.d() != self.transform.latent_dim() {
            return Err(Error::dims(format!(
                "codebook dimension {} does not match transform dimension {}",
                bank.d(),
                self.transform.latent_dim()
            )));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Corrupt(m));
        if self.width == 0 || self.height == 0 || self.width > MAX_DIMENSION || self.height > MAX_DIMENSION {
            return bad(format!("image size {}x{}", self.width, self.height));
        }
        if self.transform.validate().is_err() || self.transform.block_size > 1024 {
            return bad(format!(
                "transform p={} c={}",
                self.transform.block_size, self.transform.channels
            ));
        }
        if self.books.is_empty() || self.books.len() > 255 {
            return bad(format!("{} codebooks", self.books.len()));
        }
        if let Some(b) = self.books.iter().find(|b| b.n_k == 0 || b.n_k as usize > MAX_CODEWORDS) {
            return bad(format!("codebook size {}", b.n_k));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {}", self.alpha));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("tau {}", self.tau));
        }
        if !(self.frame_rate >= 0.0) || !self.frame_rate.is_finite() {
            return bad(format!("frame rate {}", self.frame_rate));
        }
        if self.frames.is_empty() || (self.mode == ContainerMode::Image && self.frames.len() != 1) {
            return bad(format!("{} frames in {:?} container", self.frames.len(), self.mode));
        }
        let (u, v) = self.grid_dims();
        let cells = (u * v) as u64;
        for (t, f) in self.frames.iter().enumerate() {
            if f.indices.len() != self.books.len() {
                return bad(format!("frame {t} has {} index payloads", f.indices.len()));
            }
            let full = f.is_full();
            if t == 0 && !full {
                return bad("first frame must be a full frame".into());
            }
            for (k, p) in f.indices.iter().enumerate() {
                match p {
                    IndexPayload::Full(s) => {
                        if !full || u64::from(s.count) != cells {
                            return bad(format!("frame {t} book {k}: full grid of {} ranks", s.count));
                        }
                    }
                    IndexPayload::Delta { positions, ranks } => {
                        if full {
                            return bad(format!("frame {t} mixes full and delta payloads"));
                        }
                        if !positions.windows(2).all(|w| w[0] < w[1])
                            || positions.last().is_some_and(|&p| u64::from(p) >= cells)
                        {
                            return bad(format!("frame {t} book {k}: invalid delta positions"));
                        }
                        let m = ranks.as_ref().map_or(0, |s| s.count as usize);
                        if m != positions.len() || (positions.is_empty() != ranks.is_none()) {
                            return bad(format!("frame {t} book {k}: delta rank count mismatch"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()
            .map_err(|e| Error::invalid(format!("refusing to write container: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.put_u16(VERSION);
        out.put_u8(match self.mode {
            ContainerMode::Image => 0,
            ContainerMode::Video => 1,
        });
        out.put_u32(self.width);
        out.put_u32(self.height);
        out.put_u8(self.transform.channels as u8);
        out.put_u16(self.transform.block_size as u16);
        out.put_u8(self.transform.basis.code());
        out.put_u8(self.books.len() as u8);
        for b in &self.books {
            out.put_u32(b.id);
            out.put_u64(b.hash);
            out.put_u32(b.n_k);
        }
        out.put_f64(self.alpha);
        out.put_f64(self.tau);
        out.put_f64(self.frame_rate);
        out.put_u32(self.frames.len() as u32);
        let crc = crc32(&[&out]);
        out.put_u32(crc);

        for f in &self.frames {
            out.put_u8(if f.is_full() { FRAME_FULL } else { FRAME_DELTA });
            for p in &f.indices {
                match p {
                    IndexPayload::Full(s) => s.write_to(&mut out),
                    IndexPayload::Delta { positions, ranks } => {
                        let start = out.len();
                        out.put_u32(positions.len() as u32);
                        for &pos in positions {
                            out.put_u32(pos);
                        }
                        let crc = crc32(&[&out[start..]]);
                        out.put_u32(crc);
                        if let Some(s) = ranks {
                            s.write_to(&mut out);
                        }
                    }
                }
            }
            f.lq.write_to(&mut out);
        }
        let crc = crc32(&[&out]);
        out.put_u32(crc);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf);
        let magic = r.bytes(4, "container magic")?;
        if magic != MAGIC {
            return Err(Error::format("bad container magic", 0));
        }
        let version = r.u16("container header")?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported container version {version}"), 4));
        }
        let mode = match r.u8("container header")? {
            0 => ContainerMode::Image,
            1 => ContainerMode::Video,
            m => return Err(Error::format(format!("unknown container mode {m}"), 6)),
        };
        let width = r.u32("container header")?;
        let height = r.u32("container header")?;
        let channels = r.u8("container header")? as usize;
        let block_size = r.u16("container header")? as usize;
        let basis_pos = r.pos();
        let basis = Basis::from_code(r.u8("container header")?)
            .ok_or_else(|| Error::format("unknown transform basis", basis_pos))?;
        let k = r.u8("container header")? as usize;
        let mut books = Vec::with_capacity(k);
        for _ in 0..k {
            books.push(BookRef {
                id: r.u32("container header")?,
                hash: r.u64("container header")?,
                n_k: r.u32("container header")?,
            });
        }
        let alpha = r.f64("container header")?;
        let tau = r.f64("container header")?;
        let frame_rate = r.f64("container header")?;
        let t = r.u32("container header")?;
        let header = r.since(0);
        if crc32(&[header]) != r.u32("container header")? {
            return Err(Error::Crc {
                stream: "header".into(),
            });
        }
        let transform = TransformSpec {
            block_size,
            channels,
            basis,
        };
        let mut c = Container {
            mode,
            width,
            height,
            transform,
            books,
            alpha,
            tau,
            frame_rate,
            frames: Vec::new(),
        };

        for ti in 0..t as usize {
            let kind_pos = r.pos();
            let kind = r.u8("frame kind")?;
            if kind != FRAME_FULL && kind != FRAME_DELTA {
                return Err(Error::format(format!("unknown frame kind {kind}"), kind_pos));
            }
            let mut indices = Vec::with_capacity(k);
            for ki in 0..k {
                let name = format!("frame{ti}.book{ki}");
                if kind == FRAME_FULL {
                    indices.push(IndexPayload::Full(CodedStream::read_from(&mut r, &name)?));
                } else {
                    let pname = format!("{name}.positions");
                    let start = r.pos();
                    let m = r.u32(&pname)? as usize;
                    // bound by what is left before reading
                    let raw = r.bytes(m.checked_mul(4).ok_or_else(|| Error::Truncated(pname.clone()))?, &pname)?;
                    let covered = r.since(start);
                    if crc32(&[covered]) != r.u32(&pname)? {
                        return Err(Error::Crc { stream: pname });
                    }
                    let positions: Vec<u32> = raw
                        .chunks_exact(4)
                        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                        .collect();
                    let ranks = if m > 0 {
                        Some(CodedStream::read_from(&mut r, &name)?)
                    } else {
                        None
                    };
                    indices.push(IndexPayload::Delta { positions, ranks });
                }
            }
            let lq = LqPayload::read_from(&mut r, &format!("frame{ti}.lq"))?;
            c.frames.push(FrameRecord { indices, lq });
        }
        let body_len = r.pos();
        let crc = r.u32("container trailer")?;
        if crc32(&[&buf[..body_len]]) != crc {
            return Err(Error::Crc {
                stream: "container".into(),
            });
        }
        if r.remaining() != 0 {
            return Err(Error::format("trailing bytes after container", r.pos()));
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn write_container(c: &Container, path: &Path) -> Result<()> {
    std::fs::write(path, c.to_bytes()?)?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Container> {
    Container::from_bytes(&std::fs::read(path)?)
}

/// Rate of an encoded image or video, averaged per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    /// Index bits per frame.
    pub b_c: f64,
    /// LQ bits per frame.
    pub b_lq: f64,
    pub total: f64,
    /// `total / (width * height)`.
    pub bpp: f64,
}

impl RateReport {
    pub fn from_bits(b_c: f64, b_lq: f64, width: usize, height: usize) -> Self {
        let total = b_c + b_lq;
        RateReport {
            b_c,
            b_lq,
            total,
            bpp: total / (width * height) as f64,
        }
    }
}

/// Index bits spent on each frame, summed over codebooks.
pub fn index_bits_per_frame(c: &Container) -> Vec<u64> {
    c.frames.iter().map(FrameRecord::index_bits).collect()
}

pub fn rate_report(c: &Container) -> RateReport {
    let t = c.frames.len().max(1) as f64;
    let b_c = index_bits_per_frame(c).iter().sum::<u64>() as f64 / t;
    let b_lq = c.frames.iter().map(|f| f.lq.bit_count()).sum::<u64>() as f64 / t;
    RateReport::from_bits(b_c, b_lq, c.width as usize, c.height as usize)
}
