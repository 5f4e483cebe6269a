//! Rate-distortion sweeps and their CSV output.

use std::path::Path;

use anyhow::{bail, Context, Result};
use svq_core::pipeline::LqSource;
use svq_core::{
    decode_image, encode_image, psnr, rate_report, ssim, CodebookBank, EncodeConfig, Image,
    LqQuality,
};

pub const CSV_HEADER: [&str; 9] = [
    "label", "alpha", "lq_s", "lq_q", "b_c", "b_LQ", "bpp", "psnr_db", "ssim",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub label: String,
    pub alpha: f64,
    pub lq_s: u8,
    pub lq_q: f64,
    pub b_c: f64,
    pub b_lq: f64,
    pub bpp: f64,
    pub psnr_db: f64,
    pub ssim: f64,
}

impl RdPoint {
    fn record(&self) -> [String; 9] {
        [
            self.label.clone(),
            self.alpha.to_string(),
            self.lq_s.to_string(),
            self.lq_q.to_string(),
            self.b_c.to_string(),
            self.b_lq.to_string(),
            format!("{:.6}", self.bpp),
            format!("{:.4}", self.psnr_db),
            format!("{:.6}", self.ssim),
        ]
    }
}

/// Writes one header line and one row per point. Rust float formatting
/// always uses `.` as the decimal separator.
pub fn emit_rd_csv(points: &[RdPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        bail!("no rate-distortion points to write");
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record(p.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Encodes and decodes `img` once per (alpha, s, q) combination.
pub fn sweep(
    img: &Image,
    bank: &CodebookBank,
    base: &EncodeConfig,
    alphas: &[f64],
    ss: &[u8],
    qs: &[f64],
) -> svq_core::Result<Vec<RdPoint>> {
    let mut out = Vec::with_capacity(alphas.len() * ss.len() * qs.len());
    for &alpha in alphas {
        for &s in ss {
            for &q in qs {
                let mut cfg = base.clone();
                cfg.alpha = alpha;
                cfg.lq = LqSource::Builtin(LqQuality::new(s, q)?);
                let c = encode_image(img, bank, &cfg)?;
                let dec = decode_image(&c, bank)?;
                let r = rate_report(&c);
                out.push(RdPoint {
                    label: format!("a{alpha}_s{s}_q{q}"),
                    alpha,
                    lq_s: s,
                    lq_q: q,
                    b_c: r.b_c,
                    b_lq: r.b_lq,
                    bpp: r.bpp,
                    psnr_db: psnr(img, &dec)?,
                    ssim: ssim(img, &dec)?,
                });
            }
        }
    }
    Ok(out)
}
