use std::path::{Path, PathBuf};
use std::process::Command;

use svq_core::imageio::{load_image_auto, save_image, save_video, VideoFormat};
use svq_core::{psnr, rate_report, read_container, ssim, Image, ImageFormat, VideoSequence};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/natural256.ppm")
}

fn svq(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_svq")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn crop(img: &Image, x0: usize, y0: usize, w: usize, h: usize) -> Image {
    let c = img.channels();
    let mut data = Vec::new();
    for y in y0..y0 + h {
        for x in x0..x0 + w {
            for ch in 0..c {
                data.push(img.get(x, y, ch));
            }
        }
    }
    Image::new(w, h, c, data).unwrap()
}

/// Training directory plus a trained codebook.
fn trained(dir: &Path, nk: &str, seed: &str, name: &str) -> PathBuf {
    let imgs = dir.join("train");
    std::fs::create_dir_all(&imgs).unwrap();
    let nat = load_image_auto(&fixture()).unwrap();
    save_image(&crop(&nat, 0, 0, 128, 128), &imgs.join("a.ppm"), ImageFormat::Ppm).unwrap();
    save_image(&crop(&nat, 128, 96, 128, 128), &imgs.join("b.ppm"), ImageFormat::Ppm).unwrap();
    let out = dir.join(name);
    let (code, _, err) = svq(&[
        "train-codebook", "--images", p(&imgs), "--nk", nk, "--dim-from-spec", "--seed", seed,
        "--iters", "6", "--out", p(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn image_round_trip_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cb1 = trained(dir.path(), "64", "1", "a.svqc");
    let cb2 = trained(dir.path(), "16", "2", "b.svqc");
    let books = format!("{},{}", p(&cb1), p(&cb2));
    let enc = dir.path().join("x.svq");
    let (code, _, err) = svq(&[
        "encode", "--input", p(&fixture()), "--codebooks", &books, "--alpha", "0.5", "--lq-s", "2",
        "--lq-q", "0.04", "--out", p(&enc),
    ]);
    assert_eq!(code, 0, "{err}");

    let dec = dir.path().join("x.ppm");
    let (code, _, err) = svq(&["decode", "--input", p(&enc), "--codebooks", &books, "--out", p(&dec)]);
    assert_eq!(code, 0, "{err}");
    let out = load_image_auto(&dec).unwrap();
    assert_eq!((out.width(), out.height(), out.channels()), (256, 256, 3));

    let (code, text, _) = svq(&["stats", "--input", p(&enc)]);
    assert_eq!(code, 0);
    let r = rate_report(&read_container(&enc).unwrap());
    let field = |k: &str| -> String {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}: ")))
            .unwrap_or_else(|| panic!("{k} missing in {text}"))
            .to_string()
    };
    assert_eq!(field("b_c"), r.b_c.to_string());
    assert_eq!(field("b_LQ"), r.b_lq.to_string());
    assert_eq!(field("B"), r.total.to_string());
    assert_eq!(field("bpp"), r.bpp.to_string());

    let (code, text, _) = svq(&["metrics", "--ref", p(&fixture()), "--test", p(&dec)]);
    assert_eq!(code, 0);
    let a = load_image_auto(&fixture()).unwrap();
    assert!(text.contains(&format!("psnr_db: {}", psnr(&a, &out).unwrap())));
    assert!(text.contains(&format!("ssim: {}", ssim(&a, &out).unwrap())));
}

#[test]
fn rd_sweep_writes_cartesian_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cb = trained(dir.path(), "32", "3", "c.svqc");
    let csv = dir.path().join("rd.csv");
    let (code, _, err) = svq(&[
        "rd-sweep", "--input", p(&fixture()), "--codebooks", p(&cb), "--alphas", "0,1", "--lq-qs",
        "0.02,0.2", "--out", p(&csv),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "label,alpha,lq_s,lq_q,b_c,b_LQ,bpp,psnr_db,ssim");
    for l in &lines[1..] {
        let bpp = l.split(',').nth(6).unwrap();
        assert_eq!(bpp.split('.').nth(1).unwrap().len(), 6, "{l}");
    }
}

#[test]
fn video_through_frame_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cb = trained(dir.path(), "32", "4", "v.svqc");
    let nat = load_image_auto(&fixture()).unwrap();
    let frames: Vec<Image> = (0..4).map(|t| crop(&nat, 16 * t, 40, 64, 48)).collect();
    let video = VideoSequence::new(frames, 25.0).unwrap();
    let vdir = dir.path().join("clip");
    save_video(&video, &vdir, VideoFormat::FrameDir).unwrap();
    let y4m = dir.path().join("clip.y4m");
    save_video(&video, &y4m, VideoFormat::Y4m).unwrap();

    for input in [&vdir, &y4m] {
        let enc = dir.path().join("v.svq");
        let (code, _, err) = svq(&["encode", "--input", p(input), "--codebooks", p(&cb), "--out", p(&enc)]);
        assert_eq!(code, 0, "{err}");
        let (code, text, _) = svq(&["stats", "--input", p(&enc)]);
        assert_eq!(code, 0);
        assert!(text.contains("frames: 4"));
        assert!(text.contains("unchanged_fraction: "));
        let out = dir.path().join("decoded");
        let (code, _, err) = svq(&["decode", "--input", p(&enc), "--codebooks", p(&cb), "--out", p(&out)]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 4);
    }
}

#[test]
fn external_lq_is_accounted() {
    let dir = tempfile::tempdir().unwrap();
    let cb = trained(dir.path(), "16", "5", "e.svqc");
    let lq = dir.path().join("lq.ppm");
    let nat = load_image_auto(&fixture()).unwrap();
    save_image(&crop(&nat, 0, 0, 64, 64), &lq, ImageFormat::Ppm).unwrap();
    let enc = dir.path().join("e.svq");
    let (code, _, err) = svq(&[
        "encode", "--input", p(&fixture()), "--codebooks", p(&cb), "--alpha", "1", "--lq-external",
        p(&lq), "--lq-bits", "414720", "--out", p(&enc),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(rate_report(&read_container(&enc).unwrap()).b_lq, 414_720.0);
    let (code, _, _) = svq(&["encode", "--input", p(&fixture()), "--codebooks", p(&cb), "--lq-external", p(&lq), "--out", p(&enc)]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(svq(&["encode", "--bogus"]).0, 2);
    assert_eq!(svq(&["no-such-command"]).0, 2);
    assert_eq!(svq(&["--help"]).0, 0);

    let missing = dir.path().join("missing.svqc");
    let (code, _, err) = svq(&[
        "encode", "--input", p(&fixture()), "--codebooks", p(&missing), "--out", p(&dir.path().join("x.svq")),
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("missing.svqc"), "{err}");

    let cb1 = trained(dir.path(), "16", "6", "h1.svqc");
    let cb2 = trained(dir.path(), "16", "7", "h2.svqc");
    let enc = dir.path().join("h.svq");
    assert_eq!(svq(&["encode", "--input", p(&fixture()), "--codebooks", p(&cb1), "--out", p(&enc)]).0, 0);
    let (code, _, err) = svq(&["decode", "--input", p(&enc), "--codebooks", p(&cb2), "--out", p(&dir.path().join("h.ppm"))]);
    assert_eq!(code, 3);
    assert!(err.contains("hash mismatch"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_svq"))
        .args(["stats", "--input", p(&enc)])
        .env("SVQ_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let out = Command::new(env!("CARGO_BIN_EXE_svq"))
        .args(["stats", "--input", p(&enc)])
        .env("SVQ_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(svq(&["stats", "--input", p(&cb1)]).0, 3);
}

#[test]
fn library_entry_point_matches_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cb = trained(dir.path(), "16", "8", "l.svqc");
    let enc = dir.path().join("l.svq");
    let fx = fixture();
    let args = ["svq", "encode", "--input", p(&fx), "--codebooks", p(&cb), "--out", p(&enc)];
    let mut sink = Vec::new();
    assert_eq!(svq_cli::run(args, &mut sink), 0);
    let mut lib_out = Vec::new();
    assert_eq!(svq_cli::run(["svq", "stats", "--input", p(&enc)], &mut lib_out), 0);
    let (_, bin_out, _) = svq(&["stats", "--input", p(&enc)]);
    assert_eq!(String::from_utf8(lib_out).unwrap(), bin_out);
}
