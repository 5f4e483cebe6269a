use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use svq_bench::{bank_for, skewed_ranks, synthetic_image};
use svq_core::codebook::quantize_grid;
use svq_core::entropy::{decode_symbols, encode_symbols, fit_model, ranks_to_symbols, CodedStream};
use svq_core::lqcodec::lq_encode;
use svq_core::pipeline::LqSource;
use svq_core::transform::analyze;
use svq_core::{decode_image, encode_image, EncodeConfig, LqQuality, TransformSpec};

fn entropy(c: &mut Criterion) {
    let mut g = c.benchmark_group("entropy");
    let ranks = skewed_ranks(1 << 16, 1024, 7);
    let symbols = ranks_to_symbols(&ranks);
    let model = fit_model(&symbols, 2).unwrap();
    let bytes = encode_symbols(&symbols, &model).unwrap();
    g.throughput(Throughput::Elements(symbols.len() as u64));
    g.bench_function("fit_model", |b| b.iter(|| fit_model(black_box(&symbols), 2).unwrap()));
    g.bench_function("encode", |b| b.iter(|| encode_symbols(black_box(&symbols), &model).unwrap()));
    g.bench_function("decode", |b| {
        b.iter(|| decode_symbols(black_box(&bytes), &model, symbols.len()).unwrap())
    });
    g.bench_function("rank_stream", |b| b.iter(|| CodedStream::ranks(black_box(&ranks), 1024, 2).unwrap()));
    g.finish();
}

fn quantization(c: &mut Criterion) {
    let spec = TransformSpec::dct(4, 3);
    let img = synthetic_image(256, 256, 3, 1);
    let lat = analyze(&img, &spec).unwrap();
    let mut g = c.benchmark_group("quantize");
    g.throughput(Throughput::Elements(lat.u() as u64 * lat.v() as u64));
    for n_k in [64usize, 256, 1024] {
        let bank = bank_for(&img, &spec, &[n_k]);
        g.bench_with_input(BenchmarkId::from_parameter(n_k), &bank, |b, bank| {
            b.iter(|| quantize_grid(black_box(&lat), bank.get(0)).unwrap())
        });
    }
    g.finish();
}

fn codec(c: &mut Criterion) {
    let spec = TransformSpec::dct(4, 3);
    let img = synthetic_image(256, 256, 3, 2);
    let bank = bank_for(&img, &spec, &[256, 32]);
    let q = LqQuality::new(2, 0.05).unwrap();
    let mut cfg = EncodeConfig::new(spec, LqSource::Builtin(q));
    cfg.alpha = 0.5;
    let container = encode_image(&img, &bank, &cfg).unwrap();
    let mut g = c.benchmark_group("codec");
    g.sample_size(20);
    g.bench_function("lq_encode", |b| b.iter(|| lq_encode(black_box(&img), &q).unwrap()));
    g.bench_function("encode_image", |b| b.iter(|| encode_image(black_box(&img), &bank, &cfg).unwrap()));
    g.bench_function("decode_image", |b| b.iter(|| decode_image(black_box(&container), &bank).unwrap()));
    g.finish();
}

criterion_group!(benches, entropy, quantization, codec);
criterion_main!(benches);
