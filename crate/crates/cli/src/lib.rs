//! Command-line front end: codebook training, encode/decode, metrics, container
//! statistics and rate-distortion sweeps.

mod rd;

pub use rd::{emit_rd_csv, sweep, RdPoint, CSV_HEADER};

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use svq_core::codebook::train_codebook;
use svq_core::imageio::{
    frame_files, load_image_auto, load_video, save_image, save_video, VideoFormat,
};
use svq_core::pipeline::{decode_image_with, decode_video_with, unchanged_fractions_of, LqSource};
use svq_core::transform::{analyze, LinearTheta};
use svq_core::{
    encode_image, encode_video, psnr, rate_report, read_container, ssim, write_container,
    Codebook, CodebookBank, EncodeConfig, Image, ImageFormat, LqQuality, Theta, TransformSpec,
    VideoSequence,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "svq", version, about = "Codebook-index image and video codec")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a codebook on the block latents of every PGM/PPM in a directory.
    TrainCodebook(TrainArgs),
    /// Encode an image (.pgm/.ppm) or video (.y4m or frame directory).
    Encode(EncodeArgs),
    /// Decode a container to an image or video.
    Decode(DecodeArgs),
    /// Print PSNR and SSIM between two images.
    Metrics(MetricsArgs),
    /// Print the rate report of a container.
    Stats(StatsArgs),
    /// Encode an image over a grid of alphas and LQ steps and write a CSV.
    RdSweep(SweepArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    nk: usize,
    /// Derive the codebook dimension as block_size^2 * channels (the default).
    #[arg(long)]
    dim_from_spec: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    block_size: usize,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    id: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated list of .svqc files.
    #[arg(long, value_delimiter = ',', required = true)]
    codebooks: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.9)]
    rho: f64,
    #[arg(long, default_value_t = 2)]
    lq_s: u8,
    #[arg(long, default_value_t = 0.05)]
    lq_q: f64,
    /// Externally coded LQ image (or, for video, a directory of fNNN frames).
    #[arg(long, requires = "lq_bits")]
    lq_external: Option<PathBuf>,
    /// Bits of the external LQ stream, per frame.
    #[arg(long, requires = "lq_external")]
    lq_bits: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    codebooks: Vec<PathBuf>,
    /// Linear modulation parameters (.svqt); the default blend otherwise.
    #[arg(long)]
    theta: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    test: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    codebooks: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    lq_qs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    lq_ss: Vec<u8>,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<svq_core::Error> for Failure {
    fn from(e: svq_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Applies `SVQ_THREADS` (0 or unset = one worker per core).
fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("SVQ_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| usage(format!("SVQ_THREADS must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn load_bank(paths: &[PathBuf]) -> anyhow::Result<CodebookBank> {
    let books = paths
        .iter()
        .map(|p| Codebook::load(p).with_context(|| format!("loading codebook {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(CodebookBank::new(books)?)
}

fn is_video(path: &Path) -> bool {
    path.is_dir() || VideoFormat::from_path(path) == VideoFormat::Y4m
}

fn load_input(path: &Path) -> anyhow::Result<VideoSequence> {
    if is_video(path) {
        load_video(path, VideoFormat::from_path(path))
            .with_context(|| format!("loading video {}", path.display()))
    } else {
        let img = load_image_auto(path).with_context(|| format!("loading image {}", path.display()))?;
        Ok(VideoSequence::new(vec![img], 25.0)?)
    }
}

/// Block size implied by a codebook dimension `d = p^2 c`.
fn block_size_for(d: usize, channels: usize) -> anyhow::Result<usize> {
    if d.is_multiple_of(channels) {
        let sq = d / channels;
        let p = (sq as f64).sqrt().round() as usize;
        if p > 0 && p * p == sq {
            return Ok(p);
        }
    }
    Err(anyhow!(
        "codebook dimension {d} is not p^2 x {channels} for any block size p"
    ))
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> Outcome {
    if a.nk == 0 {
        return Err(usage("--nk must be at least 1"));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&a.images)
        .with_context(|| format!("reading {}", a.images.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| ImageFormat::from_path(p).is_some())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(anyhow!("no .pgm/.ppm images in {}", a.images.display()).into());
    }
    let mut samples = Vec::new();
    let mut channels = None;
    for f in &files {
        let img = load_image_auto(f).with_context(|| format!("loading {}", f.display()))?;
        if *channels.get_or_insert(img.channels()) != img.channels() {
            return Err(anyhow!("{} has {} channels, expected {}", f.display(), img.channels(), channels.unwrap()).into());
        }
        let spec = TransformSpec::dct(a.block_size, img.channels());
        samples.extend_from_slice(analyze(&img, &spec)?.data());
    }
    let d = a.block_size * a.block_size * channels.unwrap_or(1);
    let book = train_codebook(&samples, d, a.nk, a.seed, a.iters, a.id)?;
    book.save(&a.out)?;
    writeln!(
        out,
        "trained {} codewords of dimension {d} on {} vectors from {} images -> {} (hash {:016x})",
        book.n_k(),
        samples.len() / d,
        files.len(),
        a.out.display(),
        book.content_hash()
    )
    .map_err(anyhow::Error::from)?;
    Ok(())
}

fn encode(a: &EncodeArgs, out: &mut dyn Write) -> Outcome {
    let bank = load_bank(&a.codebooks)?;
    let video = load_input(&a.input)?;
    let channels = video.channels();
    let p = block_size_for(bank.d(), channels)?;
    let lq = match (&a.lq_external, a.lq_bits) {
        (Some(path), Some(bits)) if is_video(&a.input) && path.is_dir() => LqSource::ExternalFrames(
            frame_files(path)?.into_iter().map(|f| (f, bits)).collect(),
        ),
        (Some(path), Some(bits)) => LqSource::External {
            path: path.clone(),
            bit_count: bits,
        },
        _ => LqSource::Builtin(LqQuality::new(a.lq_s, a.lq_q).map_err(|e| usage(e.to_string()))?),
    };
    let mut cfg = EncodeConfig::new(TransformSpec::dct(p, channels), lq);
    cfg.alpha = a.alpha;
    cfg.tau = a.tau;
    cfg.rho = a.rho;
    let c = if is_video(&a.input) {
        encode_video(&video, &bank, &cfg)?
    } else {
        encode_image(&video.frames()[0], &bank, &cfg)?
    };
    write_container(&c, &a.out)?;
    let r = rate_report(&c);
    writeln!(out, "wrote {} ({} frames, bpp {})", a.out.display(), c.frame_count(), r.bpp)
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn decode(a: &DecodeArgs, out: &mut dyn Write) -> Outcome {
    let c = read_container(&a.input)?;
    let bank = load_bank(&a.codebooks)?;
    let theta = match &a.theta {
        Some(p) => Theta::Linear(LinearTheta::load(p)?),
        None => Theta::Default,
    };
    match c.mode {
        svq_core::bitstream::ContainerMode::Image => {
            let img = decode_image_with(&c, &bank, &theta)?;
            let fmt = ImageFormat::from_path(&a.out)
                .or_else(|| ImageFormat::for_channels(img.channels()))
                .ok_or_else(|| anyhow!("cannot choose an output format"))?;
            save_image(&img, &a.out, fmt)?;
        }
        svq_core::bitstream::ContainerMode::Video => {
            let v = decode_video_with(&c, &bank, &theta)?;
            save_video(&v, &a.out, VideoFormat::from_path(&a.out))?;
        }
    }
    writeln!(out, "wrote {}", a.out.display()).map_err(anyhow::Error::from)?;
    Ok(())
}

fn load_images(path: &Path) -> anyhow::Result<Vec<Image>> {
    Ok(load_input(path)?.frames().to_vec())
}

fn metrics(a: &MetricsArgs, out: &mut dyn Write) -> Outcome {
    let r = load_images(&a.reference)?;
    let t = load_images(&a.test)?;
    if r.len() != t.len() {
        return Err(anyhow!("{} reference frames vs {} test frames", r.len(), t.len()).into());
    }
    let mut p = 0.0;
    let mut s = 0.0;
    for (x, y) in r.iter().zip(&t) {
        p += psnr(x, y)?;
        s += ssim(x, y)?;
    }
    let n = r.len() as f64;
    writeln!(out, "psnr_db: {}\nssim: {}", p / n, s / n).map_err(anyhow::Error::from)?;
    Ok(())
}

fn stats(a: &StatsArgs, out: &mut dyn Write) -> Outcome {
    let c = read_container(&a.input)?;
    let r = rate_report(&c);
    let mut text = format!(
        "frames: {}\nb_c: {}\nb_LQ: {}\nB: {}\nbpp: {}\n",
        c.frame_count(),
        r.b_c,
        r.b_lq,
        r.total,
        r.bpp
    );
    if c.frame_count() > 1 {
        let f = unchanged_fractions_of(&c)?;
        let list: Vec<String> = f.per_transition.iter().map(|x| x.to_string()).collect();
        text.push_str(&format!(
            "unchanged_fraction: {}\nunchanged_mean: {}\nfull_frames: {}\n",
            list.join(","),
            f.mean,
            c.frames.iter().filter(|f| f.is_full()).count()
        ));
    }
    out.write_all(text.as_bytes()).map_err(anyhow::Error::from)?;
    Ok(())
}

fn rd_sweep(a: &SweepArgs, out: &mut dyn Write) -> Outcome {
    let bank = load_bank(&a.codebooks)?;
    let img = load_image_auto(&a.input).with_context(|| format!("loading {}", a.input.display()))?;
    let p = block_size_for(bank.d(), img.channels())?;
    for &s in &a.lq_ss {
        for &q in &a.lq_qs {
            LqQuality::new(s, q).map_err(|e| usage(e.to_string()))?;
        }
    }
    if let Some(bad) = a.alphas.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(usage(format!("alpha {bad} outside [0, 1]")));
    }
    let mut base = EncodeConfig::new(
        TransformSpec::dct(p, img.channels()),
        LqSource::Builtin(LqQuality::new(a.lq_ss[0], a.lq_qs[0]).map_err(|e| usage(e.to_string()))?),
    );
    base.tau = a.tau;
    let points = sweep(&img, &bank, &base, &a.alphas, &a.lq_ss, &a.lq_qs)?;
    emit_rd_csv(&points, &a.out)?;
    writeln!(out, "wrote {} points to {}", points.len(), a.out.display()).map_err(anyhow::Error::from)?;
    Ok(())
}

/// Runs one invocation. Normal output goes to `out`, diagnostics to standard
/// error; the return value is the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let res = configure_threads().and_then(|_| match &cli.cmd {
        Command::TrainCodebook(a) => train(a, out),
        Command::Encode(a) => encode(a, out),
        Command::Decode(a) => decode(a, out),
        Command::Metrics(a) => metrics(a, out),
        Command::Stats(a) => stats(a, out),
        Command::RdSweep(a) => rd_sweep(a, out),
    });
    match res {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            EXIT_DATA
        }
    }
}
