//! Analysis/synthesis transform and conditioned latent modulation.
//!
//! The transform maps each `p x p` pixel block to one latent vector of
//! dimension `p * p * channels` with an orthonormal 2-D DCT-II per channel.
//! It sits behind [`LatentTransform`] so another embedding can be dropped in.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imageio::Image;

/// `u x v` grid of `d`-dimensional vectors, grid row-major then channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    u: usize,
    v: usize,
    d: usize,
    data: Vec<f64>,
}

impl LatentGrid {
    pub fn new(u: usize, v: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != u * v * d {
            return Err(Error::dims(format!(
                "{} values for a {u}x{v}x{d} latent grid",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("latent values must be finite"));
        }
        Ok(LatentGrid { u, v, d, data })
    }

    pub fn zeros(u: usize, v: usize, d: usize) -> Self {
        LatentGrid {
            u,
            v,
            d,
            data: vec![0.0; u * v * d],
        }
    }

    pub fn u(&self) -> usize {
        self.u
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of super-pixels, `u * v`.
    pub fn len(&self) -> usize {
        self.u * self.v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Vector of super-pixel `l` (row-major over the grid).
    pub fn vector(&self, l: usize) -> &[f64] {
        &self.data[l * self.d..(l + 1) * self.d]
    }

    pub fn vectors(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d.max(1))
    }

    pub fn same_shape(&self, other: &LatentGrid) -> bool {
        self.u == other.u && self.v == other.v && self.d == other.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Dct,
}

impl Basis {
    pub fn code(self) -> u8 {
        match self {
            Basis::Dct => 0,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Basis::Dct),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformSpec {
    pub block_size: usize,
    pub channels: usize,
    pub basis: Basis,
}

impl TransformSpec {
    pub fn dct(block_size: usize, channels: usize) -> Self {
        TransformSpec {
            block_size,
            channels,
            basis: Basis::Dct,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::invalid(format!(
                "unsupported channel count {}",
                self.channels
            )));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.block_size * self.block_size * self.channels
    }

    /// Latent grid size `(u, v)` for an image of the given size.
    pub fn grid_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (
            width.div_ceil(self.block_size),
            height.div_ceil(self.block_size),
        )
    }

    fn basis_matrix(&self) -> Vec<f64> {
        match self.basis {
            Basis::Dct => dct_matrix(self.block_size),
        }
    }
}

pub trait LatentTransform {
    fn analyze(&self, img: &Image) -> Result<LatentGrid>;

    /// Inverse transform cropped to `out_w x out_h`, without clamping.
    fn synthesize_raw(&self, lat: &LatentGrid, out_w: usize, out_h: usize) -> Result<Vec<f64>>;

    fn synthesize(&self, lat: &LatentGrid, out_w: usize, out_h: usize) -> Result<Image>;
}

/// Orthonormal DCT-II matrix, `m[k * p + n]`.
pub fn dct_matrix(p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p * p];
    let pf = p as f64;
    for k in 0..p {
        let scale = if k == 0 { (1.0 / pf).sqrt() } else { (2.0 / pf).sqrt() };
        for n in 0..p {
            m[k * p + n] =
                scale * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2.0 * pf)).cos();
        }
    }
    m
}

impl LatentTransform for TransformSpec {
    fn analyze(&self, img: &Image) -> Result<LatentGrid> {
        self.validate()?;
        if img.channels() != self.channels {
            return Err(Error::dims(format!(
                "transform expects {} channels, image has {}",
                self.channels,
                img.channels()
            )));
        }
        let p = self.block_size;
        let c = self.channels;
        let d = self.latent_dim();
        let (w, h) = (img.width(), img.height());
        let (u, v) = self.grid_dims(w, h);
        let m = self.basis_matrix();
        let mut data = vec![0.0; u * v * d];

        data.par_chunks_mut(u * d).enumerate().for_each(|(by, row)| {
            let mut block = vec![0.0; p * p];
            let mut tmp = vec![0.0; p * p];
            for bx in 0..u {
                for ch in 0..c {
                    for y in 0..p {
                        let sy = (by * p + y).min(h - 1);
                        for x in 0..p {
                            let sx = (bx * p + x).min(w - 1);
                            block[y * p + x] = img.get(sx, sy, ch);
                        }
                    }
                    // tmp = M * block
                    for k in 0..p {
                        for x in 0..p {
                            let mut acc = 0.0;
                            for y in 0..p {
                                acc += m[k * p + y] * block[y * p + x];
                            }
                            tmp[k * p + x] = acc;
                        }
                    }
                    // coef = tmp * M^T
                    let out = &mut row[bx * d + ch * p * p..bx * d + (ch + 1) * p * p];
                    for k in 0..p {
                        for l in 0..p {
                            let mut acc = 0.0;
                            for x in 0..p {
                                acc += tmp[k * p + x] * m[l * p + x];
                            }
                            out[k * p + l] = acc;
                        }
                    }
                }
            }
        });
        LatentGrid::new(u, v, d, data)
    }

    fn synthesize_raw(&self, lat: &LatentGrid, out_w: usize, out_h: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let p = self.block_size;
        let c = self.channels;
        let d = self.latent_dim();
        if out_w == 0 || out_h == 0 {
            return Err(Error::invalid("output dimensions must be positive"));
        }
        let (u, v) = self.grid_dims(out_w, out_h);
        if lat.u != u || lat.v != v || lat.d != d {
            return Err(Error::dims(format!(
                "latent {}x{}x{} does not fit a {out_w}x{out_h} image with block {p} ({u}x{v}x{d})",
                lat.u, lat.v, lat.d
            )));
        }
        let m = self.basis_matrix();
        let mut out = vec![0.0; out_w * out_h * c];

        out.par_chunks_mut(p * out_w * c)
            .enumerate()
            .for_each(|(by, rows)| {
                let rows_here = rows.len() / (out_w * c);
                let mut tmp = vec![0.0; p * p];
                let mut block = vec![0.0; p * p];
                for bx in 0..u {
                    let vecl = lat.vector(by * u + bx);
                    for ch in 0..c {
                        let coef = &vecl[ch * p * p..(ch + 1) * p * p];
                        // tmp = M^T * coef
                        for y in 0..p {
                            for l in 0..p {
                                let mut acc = 0.0;
                                for k in 0..p {
                                    acc += m[k * p + y] * coef[k * p + l];
                                }
                                tmp[y * p + l] = acc;
                            }
                        }
                        // block = tmp * M
                        for y in 0..p {
                            for x in 0..p {
                                let mut acc = 0.0;
                                for l in 0..p {
                                    acc += tmp[y * p + l] * m[l * p + x];
                                }
                                block[y * p + x] = acc;
                            }
                        }
                        for y in 0..rows_here {
                            for x in 0..p {
                                let px = bx * p + x;
                                if px < out_w {
                                    rows[(y * out_w + px) * c + ch] = block[y * p + x];
                                }
                            }
                        }
                    }
                }
            });
        Ok(out)
    }

    fn synthesize(&self, lat: &LatentGrid, out_w: usize, out_h: usize) -> Result<Image> {
        let raw = self.synthesize_raw(lat, out_w, out_h)?;
        Image::from_clamped(out_w, out_h, self.channels, raw)
    }
}

/// Free-function form of [`LatentTransform::analyze`].
pub fn analyze(img: &Image, spec: &TransformSpec) -> Result<LatentGrid> {
    spec.analyze(img)
}

/// Free-function form of [`LatentTransform::synthesize`].
pub fn synthesize(lat: &LatentGrid, spec: &TransformSpec, out_w: usize, out_h: usize) -> Result<Image> {
    spec.synthesize(lat, out_w, out_h)
}

/// Elementwise affine map producing `(beta, gamma)` from `(yq, flq)`.
///
/// For latent channel `i`:
/// `beta = beta_yq[i] * yq + beta_flq[i] * flq + beta_bias[i]`, likewise for gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTheta {
    pub beta_yq: Vec<f64>,
    pub beta_flq: Vec<f64>,
    pub beta_bias: Vec<f64>,
    pub gamma_yq: Vec<f64>,
    pub gamma_flq: Vec<f64>,
    pub gamma_bias: Vec<f64>,
}

const THETA_MAGIC: &[u8; 4] = b"SVQT";

impl LinearTheta {
    /// The affine form of the default theta: `beta = 0`, `gamma = flq - yq`.
    pub fn identity_blend(d: usize) -> Self {
        LinearTheta {
            beta_yq: vec![0.0; d],
            beta_flq: vec![0.0; d],
            beta_bias: vec![0.0; d],
            gamma_yq: vec![-1.0; d],
            gamma_flq: vec![1.0; d],
            gamma_bias: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.beta_yq.len()
    }

    fn fields(&self) -> [&Vec<f64>; 6] {
        [
            &self.beta_yq,
            &self.beta_flq,
            &self.beta_bias,
            &self.gamma_yq,
            &self.gamma_flq,
            &self.gamma_bias,
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = THETA_MAGIC.to_vec();
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for f in self.fields() {
            for x in f {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 8 || &buf[..4] != THETA_MAGIC {
            return Err(Error::format("missing SVQT magic", 0));
        }
        let d = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
        let need = 8 + 6 * d * 8;
        if buf.len() != need {
            return Err(Error::format(
                format!("theta file has {} bytes, expected {need}", buf.len()),
                buf.len().min(need),
            ));
        }
        let mut vals = buf[8..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
        let mut next = || (0..d).map(|_| vals.next().unwrap()).collect::<Vec<_>>();
        let theta = LinearTheta {
            beta_yq: next(),
            beta_flq: next(),
            beta_bias: next(),
            gamma_yq: next(),
            gamma_flq: next(),
            gamma_bias: next(),
        };
        if theta.fields().iter().any(|f| f.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("theta parameters must be finite"));
        }
        Ok(theta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Theta {
    /// `beta = 0`, `gamma = flq - yq`: a linear blend between the two inputs.
    #[default]
    Default,
    Linear(LinearTheta),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CftParams {
    /// Control strength in `[0, 1]`.
    pub alpha: f64,
    pub theta: Theta,
}

impl CftParams {
    pub fn new(alpha: f64) -> Self {
        CftParams {
            alpha,
            theta: Theta::Default,
        }
    }
}

/// `ymod = yq + alpha * (beta * yq + gamma)` with `(beta, gamma) = theta(yq, flq)`,
/// all products elementwise.
pub fn cft_modulate(yq: &LatentGrid, flq: &LatentGrid, params: &CftParams) -> Result<LatentGrid> {
    if !yq.same_shape(flq) {
        return Err(Error::dims(format!(
            "quantized latent {}x{}x{} vs control feature {}x{}x{}",
            yq.u, yq.v, yq.d, flq.u, flq.v, flq.d
        )));
    }
    let a = params.alpha;
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid(format!("alpha {a} outside [0, 1]")));
    }
    let d = yq.d;
    let data: Vec<f64> = match &params.theta {
        // written as a blend so both endpoints are exact
        Theta::Default => yq
            .data
            .iter()
            .zip(&flq.data)
            .map(|(&y, &f)| (1.0 - a) * y + a * f)
            .collect(),
        Theta::Linear(t) => {
            if t.dim() != d {
                return Err(Error::dims(format!(
                    "theta has dimension {}, latent has {d}",
                    t.dim()
                )));
            }
            yq.data
                .iter()
                .zip(&flq.data)
                .enumerate()
                .map(|(i, (&y, &f))| {
                    let c = i % d;
                    let beta = t.beta_yq[c] * y + t.beta_flq[c] * f + t.beta_bias[c];
                    let gamma = t.gamma_yq[c] * y + t.gamma_flq[c] * f + t.gamma_bias[c];
                    y + a * (beta * y + gamma)
                })
                .collect()
        }
    };
    LatentGrid::new(yq.u, yq.v, d, data)
}
