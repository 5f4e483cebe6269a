//! Raster types, PGM/PPM/Y4M file I/O and bicubic resampling.
//!
//! Samples are stored as `f64` in `[0, 1]`, row-major and channel-interleaved.
//! Only 8-bit binary PNM (`P5`/`P6`, maxval 255) and 8-bit Y4M with `C444` or
//! `Cmono` planes are supported.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image, checking the length and that every sample lies in `[0, 1]`.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dims(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from arbitrary samples, clamping them into `[0, 1]`.
    /// NaN samples become 0.
    pub fn from_clamped(
        width: usize,
        height: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Image::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Copy of the image with every sample rounded to the nearest 1/255 step.
    pub fn quantized_8bit(&self) -> Image {
        Image {
            data: self
                .data
                .iter()
                .map(|&v| f64::from(to_byte(v)) / 255.0)
                .collect(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    frames: Vec<Image>,
    /// Frames per second; carried as metadata only.
    pub frame_rate: f64,
}

impl VideoSequence {
    pub fn new(frames: Vec<Image>, frame_rate: f64) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("a video needs at least one frame"))?;
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
            return Err(Error::dims(format!(
                "frame {i} is {}x{}x{}, frame 0 is {}x{}x{}",
                f.width, f.height, f.channels, first.width, first.height, first.channels
            )));
        }
        Ok(VideoSequence { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn channels(&self) -> usize {
        self.frames[0].channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Ppm,
}

impl ImageFormat {
    pub fn channels(self) -> usize {
        match self {
            ImageFormat::Pgm => 1,
            ImageFormat::Ppm => 3,
        }
    }

    pub fn for_channels(channels: usize) -> Option<Self> {
        match channels {
            1 => Some(ImageFormat::Pgm),
            3 => Some(ImageFormat::Ppm),
            _ => None,
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }

    fn magic(self) -> &'static [u8; 2] {
        match self {
            ImageFormat::Pgm => b"P5",
            ImageFormat::Ppm => b"P6",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Ppm => "ppm",
        }
    }
}

/// Round-half-up conversion of a `[0, 1]` sample to a byte.
#[inline]
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

struct HeaderCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(format!("expected {what}"), start));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("{what} out of range"), start))
    }
}

/// Parses a binary PGM/PPM file held in memory.
pub fn decode_pnm(buf: &[u8], format: ImageFormat) -> Result<Image> {
    if buf.len() < 2 || &buf[..2] != format.magic() {
        return Err(Error::format(
            format!(
                "expected magic {}",
                std::str::from_utf8(format.magic()).unwrap_or_default()
            ),
            0,
        ));
    }
    let mut cur = HeaderCursor { buf, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::format(
            format!("unsupported maxval {maxval}"),
            maxval_at,
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format("zero image dimension", 2));
    }
    // exactly one whitespace byte separates the header from the raster
    match buf.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::format("missing header terminator", cur.pos)),
    }
    let channels = format.channels();
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format("image too large", 2))?;
    let payload = &buf[cur.pos..];
    if payload.len() < need {
        return Err(Error::format(
            format!(
                "truncated pixel data: {} of {need} bytes present",
                payload.len()
            ),
            buf.len(),
        ));
    }
    let data = payload[..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Image::new(width, height, channels, data)
}

/// Serializes an image as binary PGM/PPM.
pub fn encode_pnm(img: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    if img.channels != format.channels() {
        return Err(Error::invalid(format!(
            "{}-channel image cannot be written as {}",
            img.channels,
            format.extension()
        )));
    }
    let header = format!(
        "{}\n{} {}\n255\n",
        std::str::from_utf8(format.magic()).unwrap_or_default(),
        img.width,
        img.height
    );
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.data.iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn load_image(path: &Path, format: ImageFormat) -> Result<Image> {
    decode_pnm(&fs::read(path)?, format)
}

/// Loads a PGM or PPM, picking the format from the file's magic bytes.
pub fn load_image_auto(path: &Path) -> Result<Image> {
    let buf = fs::read(path)?;
    let format = match buf.get(..2) {
        Some(b"P5") => ImageFormat::Pgm,
        Some(b"P6") => ImageFormat::Ppm,
        _ => return Err(Error::format("not a binary PGM/PPM file", 0)),
    };
    decode_pnm(&buf, format)
}

pub fn save_image(img: &Image, path: &Path, format: ImageFormat) -> Result<()> {
    let bytes = encode_pnm(img, format)?;
    fs::write(path, bytes)?;
    Ok(())
}

// Catmull-Rom (a = -0.5).
fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Taps and weights for one output coordinate along an axis.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<([usize; 4], [f64; 4], usize)> {
    let scale = n_in as f64 / n_out as f64;
    let last = n_in as isize - 1;
    (0..n_out)
        .map(|i| {
            let src = (i as f64 + 0.5) * scale - 0.5;
            let base = src.floor();
            let t = src - base;
            let base = base as isize;
            let mut idx = [0usize; 4];
            let mut w = [0f64; 4];
            for k in 0..4 {
                let off = k as isize - 1;
                idx[k] = (base + off).clamp(0, last) as usize;
                w[k] = cubic_weight(t - off as f64);
            }
            (idx, w, base.clamp(0, last) as usize)
        })
        .collect()
}

// Evaluated relative to the nearest-left sample so constant regions stay bit-exact.
#[inline]
fn apply_taps(taps: &([usize; 4], [f64; 4], usize), fetch: impl Fn(usize) -> f64) -> f64 {
    let (idx, w, anchor) = taps;
    let r = fetch(*anchor);
    let mut acc = 0.0;
    for k in 0..4 {
        acc += w[k] * (fetch(idx[k]) - r);
    }
    r + acc
}

/// Separable Catmull-Rom resampling with half-pixel-centered coordinates and
/// clamp-to-edge borders. The result is clamped to `[0, 1]`.
pub fn bicubic_resample(img: &Image, out_w: usize, out_h: usize) -> Result<Image> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("output dimensions must be positive"));
    }
    let c = img.channels;
    let (w, h) = (img.width, img.height);
    let xt = axis_taps(w, out_w);
    let yt = axis_taps(h, out_h);

    let mut horiz = vec![0.0; out_w * h * c];
    for y in 0..h {
        let row = &img.data[y * w * c..(y + 1) * w * c];
        for (x, taps) in xt.iter().enumerate() {
            for ch in 0..c {
                horiz[(y * out_w + x) * c + ch] = apply_taps(taps, |i| row[i * c + ch]);
            }
        }
    }
    let mut out = vec![0.0; out_w * out_h * c];
    for (y, taps) in yt.iter().enumerate() {
        for x in 0..out_w {
            for ch in 0..c {
                out[(y * out_w + x) * c + ch] =
                    apply_taps(taps, |j| horiz[(j * out_w + x) * c + ch]);
            }
        }
    }
    Image::from_clamped(out_w, out_h, c, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VideoFormat {
    Y4m,
    FrameDir,
}

impl VideoFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("y4m") => VideoFormat::Y4m,
            _ => VideoFormat::FrameDir,
        }
    }
}

pub fn load_video(path: &Path, format: VideoFormat) -> Result<VideoSequence> {
    match format {
        VideoFormat::Y4m => decode_y4m(&fs::read(path)?),
        VideoFormat::FrameDir => load_frame_dir(path),
    }
}

pub fn save_video(video: &VideoSequence, path: &Path, format: VideoFormat) -> Result<()> {
    match format {
        VideoFormat::Y4m => {
            fs::write(path, encode_y4m(video))?;
            Ok(())
        }
        VideoFormat::FrameDir => {
            fs::create_dir_all(path)?;
            let fmt = ImageFormat::for_channels(video.channels())
                .ok_or_else(|| Error::invalid("unsupported channel count"))?;
            for (i, f) in video.frames.iter().enumerate() {
                save_image(f, &path.join(format!("f{i:03}.{}", fmt.extension())), fmt)?;
            }
            Ok(())
        }
    }
}

/// Frame number from a `fNNN.pgm` / `fNNN.ppm` file name.
fn frame_number(path: &Path) -> Option<(u64, ImageFormat)> {
    let fmt = ImageFormat::from_path(path)?;
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.strip_prefix('f')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((digits.parse().ok()?, fmt))
}

/// Frame files `fNNN.pgm` / `fNNN.ppm` in `dir`, in numeric order.
pub fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if let Some((n, _)) = frame_number(&path) {
            entries.push((n, path));
        }
    }
    entries.sort_by_key(|e| e.0);
    if entries.is_empty() {
        return Err(Error::invalid(format!(
            "no fNNN.pgm/ppm frames in {}",
            dir.display()
        )));
    }
    Ok(entries.into_iter().map(|e| e.1).collect())
}

fn load_frame_dir(dir: &Path) -> Result<VideoSequence> {
    let frames = frame_files(dir)?
        .iter()
        .map(|p| load_image_auto(p))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, 25.0)
}

fn decode_y4m(buf: &[u8]) -> Result<VideoSequence> {
    const MAGIC: &[u8] = b"YUV4MPEG2";
    if !buf.starts_with(MAGIC) {
        return Err(Error::format("missing YUV4MPEG2 signature", 0));
    }
    let eol = buf
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("unterminated Y4M header", buf.len()))?;
    let header = std::str::from_utf8(&buf[MAGIC.len()..eol])
        .map_err(|_| Error::format("non-ASCII Y4M header", MAGIC.len()))?;

    let (mut width, mut height, mut planes, mut frame_rate) = (0usize, 0usize, None, 25.0);
    let mut offset = MAGIC.len();
    for tok in header.split(' ') {
        let at = offset;
        offset += tok.len() + 1;
        let Some(tag) = tok.chars().next() else { continue };
        let val = &tok[1..];
        match tag {
            'W' => width = val.parse().map_err(|_| Error::format("bad Y4M width", at))?,
            'H' => height = val.parse().map_err(|_| Error::format("bad Y4M height", at))?,
            'F' => {
                let (n, d) = val
                    .split_once(':')
                    .ok_or_else(|| Error::format("bad Y4M frame rate", at))?;
                let n: f64 = n.parse().map_err(|_| Error::format("bad Y4M frame rate", at))?;
                let d: f64 = d.parse().map_err(|_| Error::format("bad Y4M frame rate", at))?;
                if d > 0.0 {
                    frame_rate = n / d;
                }
            }
            'C' => {
                planes = Some(match val {
                    "444" => 3,
                    "mono" => 1,
                    other => {
                        return Err(Error::format(
                            format!("unsupported Y4M colorspace C{other}"),
                            at,
                        ))
                    }
                })
            }
            _ => {}
        }
    }
    // an absent C tag means 4:2:0, which is not supported
    let planes = planes.ok_or_else(|| Error::format("Y4M header lacks C444/Cmono", eol))?;
    if width == 0 || height == 0 {
        return Err(Error::format("Y4M header lacks W/H", eol));
    }

    let plane = width * height;
    let mut pos = eol + 1;
    let mut frames = Vec::new();
    while pos < buf.len() {
        if !buf[pos..].starts_with(b"FRAME") {
            return Err(Error::format("expected FRAME marker", pos));
        }
        let nl = buf[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("unterminated FRAME header", pos))?;
        pos += nl + 1;
        if buf.len() - pos < plane * planes {
            return Err(Error::format("truncated Y4M frame", buf.len()));
        }
        let mut data = vec![0.0; plane * planes];
        for p in 0..planes {
            for (i, &b) in buf[pos + p * plane..pos + (p + 1) * plane].iter().enumerate() {
                data[i * planes + p] = f64::from(b) / 255.0;
            }
        }
        pos += plane * planes;
        frames.push(Image::new(width, height, planes, data)?);
    }
    VideoSequence::new(frames, frame_rate)
}

fn encode_y4m(video: &VideoSequence) -> Vec<u8> {
    let (w, h, c) = (video.width(), video.height(), video.channels());
    let cs = if c == 1 { "mono" } else { "444" };
    // frame rate as a rational with millisecond precision
    let num = (video.frame_rate * 1000.0).round().max(1.0) as u64;
    let mut out = format!("YUV4MPEG2 W{w} H{h} F{num}:1000 Ip A1:1 C{cs}\n").into_bytes();
    for f in &video.frames {
        out.extend_from_slice(b"FRAME\n");
        for p in 0..c {
            out.extend(f.data.iter().skip(p).step_by(c).map(|&v| to_byte(v)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pnm(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn loads_gray_extremes() {
        let img = decode_pnm(&pnm("P5\n2 1\n255\n", &[0, 255]), ImageFormat::Pgm).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 1, 1));
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn loads_single_rgb_pixel() {
        let img = decode_pnm(&pnm("P6 1 1 255\n", &[128, 128, 128]), ImageFormat::Ppm).unwrap();
        assert_eq!(img.data(), &[128.0 / 255.0; 3]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = decode_pnm(&pnm("P5\n# made by hand\n1 1\n255\n", &[7]), ImageFormat::Pgm);
        assert_eq!(img.unwrap().data(), &[7.0 / 255.0]);
    }

    #[test]
    fn truncated_payload_names_offset() {
        let buf = pnm("P5\n4 4\n255\n", &[0; 8]);
        match decode_pnm(&buf, ImageFormat::Pgm) {
            Err(Error::Format { what, offset }) => {
                assert!(what.contains("truncated"), "{what}");
                assert_eq!(offset, buf.len());
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_other_maxval() {
        let err = decode_pnm(&pnm("P5\n1 1\n65535\n", &[0, 0]), ImageFormat::Pgm).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 6, .. }), "{err:?}");
    }

    #[test]
    fn rejects_wrong_magic() {
        let err = decode_pnm(&pnm("P6\n1 1\n255\n", &[0; 3]), ImageFormat::Pgm).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn half_rounds_up_on_save() {
        let img = Image::new(1, 1, 1, vec![0.5]).unwrap();
        let bytes = encode_pnm(&img, ImageFormat::Pgm).unwrap();
        assert_eq!(*bytes.last().unwrap(), 128);
    }

    #[test]
    fn channel_format_mismatch() {
        let img = Image::filled(2, 2, 3, 0.1).unwrap();
        assert!(matches!(
            encode_pnm(&img, ImageFormat::Pgm),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f64> = (0..4 * 3 * 3).map(|i| f64::from(i * 7 % 256) / 255.0).collect();
        let img = Image::new(4, 3, 3, data).unwrap();
        let path = dir.path().join("x.ppm");
        save_image(&img, &path, ImageFormat::Ppm).unwrap();
        assert_eq!(load_image(&path, ImageFormat::Ppm).unwrap(), img);
    }

    #[test]
    fn image_rejects_out_of_range_samples() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 1, vec![]).is_err());
    }

    #[test]
    fn resample_identity() {
        let data: Vec<f64> = (0..35).map(|i| f64::from(i) / 40.0).collect();
        let img = Image::new(7, 5, 1, data).unwrap();
        assert_eq!(bicubic_resample(&img, 7, 5).unwrap(), img);
    }

    #[test]
    fn resample_keeps_constants() {
        let img = Image::filled(5, 3, 3, 0.3).unwrap();
        for (w, h) in [(1, 1), (2, 7), (13, 4), (10, 6)] {
            let out = bicubic_resample(&img, w, h).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.3));
        }
    }

    // Cubic Hermite form of Catmull-Rom: tangents (p[i+1] - p[i-1]) / 2.
    fn catmull_rom_oracle(p: &[f64], x: f64) -> f64 {
        let i = x.floor() as usize;
        let t = x - i as f64;
        let (p0, p1, p2, p3) = (p[i - 1], p[i], p[i + 1], p[i + 2]);
        let m1 = (p2 - p0) / 2.0;
        let m2 = (p3 - p1) / 2.0;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p1
            + (t3 - 2.0 * t2 + t) * m1
            + (-2.0 * t3 + 3.0 * t2) * p2
            + (t3 - t2) * m2
    }

    #[test]
    fn ramp_upsample_matches_interpolant() {
        let ramp: Vec<f64> = (0..8).map(|i| f64::from(i) / 7.0).collect();
        let img = Image::new(8, 1, 1, ramp.clone()).unwrap();
        let up = bicubic_resample(&img, 16, 1).unwrap();
        for i in 0..16 {
            let x = (i as f64 + 0.5) * 0.5 - 0.5;
            // interior: all four taps inside the source
            if (1.0..6.0).contains(&x) {
                let expect = catmull_rom_oracle(&ramp, x);
                assert!((up.data()[i] - expect).abs() < 1e-12, "i={i}");
                assert!((up.data()[i] - x / 7.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn y4m_single_frame_mono() {
        let mut buf = b"YUV4MPEG2 W2 H1 F30:1 Cmono\nFRAME\n".to_vec();
        buf.extend_from_slice(&[0, 255]);
        let v = decode_y4m(&buf).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.frames()[0].data(), &[0.0, 1.0]);
        assert_eq!(v.frame_rate, 30.0);
    }

    #[test]
    fn y4m_444_interleaves_planes() {
        let mut buf = b"YUV4MPEG2 W1 H1 C444\nFRAME\n".to_vec();
        buf.extend_from_slice(&[0, 51, 255]);
        let v = decode_y4m(&buf).unwrap();
        assert_eq!(v.frames()[0].data(), &[0.0, 0.2, 1.0]);
    }

    #[test]
    fn y4m_requires_supported_colorspace() {
        let buf = b"YUV4MPEG2 W1 H1 C420jpeg\nFRAME\n\0".to_vec();
        assert!(matches!(decode_y4m(&buf), Err(Error::Format { .. })));
        assert!(decode_y4m(b"YUV4MPEG2 W1 H1\n").is_err());
    }

    #[test]
    fn y4m_round_trip() {
        let f = |k: u8| {
            Image::new(2, 2, 3, (0..12).map(|i| f64::from((i * 20 + k) % 255) / 255.0).collect())
                .unwrap()
        };
        let v = VideoSequence::new(vec![f(0), f(9)], 24.0).unwrap();
        assert_eq!(decode_y4m(&encode_y4m(&v)).unwrap(), v);
    }

    #[test]
    fn frame_dir_orders_and_checks_dims() {
        let dir = tempfile::tempdir().unwrap();
        let a = Image::filled(4, 4, 1, 0.0).unwrap();
        let b = Image::filled(4, 4, 1, 1.0).unwrap();
        save_image(&b, &dir.path().join("f1.pgm"), ImageFormat::Pgm).unwrap();
        save_image(&a, &dir.path().join("f0.pgm"), ImageFormat::Pgm).unwrap();
        let v = load_video(dir.path(), VideoFormat::FrameDir).unwrap();
        assert_eq!(v.frames(), &[a, b]);

        let big = Image::filled(8, 8, 1, 0.5).unwrap();
        save_image(&big, &dir.path().join("f2.pgm"), ImageFormat::Pgm).unwrap();
        assert!(matches!(
            load_video(dir.path(), VideoFormat::FrameDir),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn frame_dir_sorts_numerically() {
        let dir = tempfile::tempdir().unwrap();
        for (n, v) in [(10, 0.0), (9, 1.0)] {
            let img = Image::filled(1, 1, 1, v).unwrap();
            save_image(&img, &dir.path().join(format!("f{n}.pgm")), ImageFormat::Pgm).unwrap();
        }
        let v = load_video(dir.path(), VideoFormat::FrameDir).unwrap();
        assert_eq!(v.frames()[0].data(), &[1.0]);
    }
}
