use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graphperf::par::{self, ExecMode};
use graphperf::workloads::kernels::{disparity, resize, RectifyMap};

fn modes() -> Vec<ExecMode> {
    let mut m = vec![ExecMode::Sequential];
    if ExecMode::Parallel.is_parallel() {
        m.push(ExecMode::Parallel);
    }
    m
}

fn frame(w: usize, h: usize, salt: usize) -> Vec<u8> {
    (0..w * h).map(|i| ((i * 31 + salt * 7) % 251) as u8).collect()
}

fn image_kernels(c: &mut Criterion) {
    let (w, h) = (640, 480);
    let img = frame(w, h, 0);
    let map = RectifyMap::new(w, h, 7);

    let mut g = c.benchmark_group("rectify_640x480");
    for mode in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| map.apply(&img, m))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("resize_640x480_x0.5");
    for mode in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| resize(&img, w, h, 0.5, m))
        });
    }
    g.finish();

    let (sw, sh) = (320, 240);
    let (l, r) = (frame(sw, sh, 1), frame(sw, sh, 5));
    let mut g = c.benchmark_group("disparity_320x240_d32");
    g.sample_size(20);
    for mode in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| disparity(&l, &r, sw, sh, 32, m))
        });
    }
    g.finish();
}

fn trace_merge(c: &mut Criterion) {
    let events: Vec<(u64, u32)> = (0..1_000_000u64)
        .map(|i| ((i * 2_654_435_761) % 10_000_000, (i % 8) as u32))
        .collect();
    let mut g = c.benchmark_group("trace_merge_1M");
    g.sample_size(10);
    for mode in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter_batched(
                || events.clone(),
                |mut v| par::sort_by_key(m, &mut v, |e| *e),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn log_generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("payload_generation_100_frames");
    g.sample_size(10);
    for mode in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| par::map_indices(m, 100, |i| frame(256, 192, i)))
        });
    }
    g.finish();
}

criterion_group!(benches, image_kernels, trace_merge, log_generation);
criterion_main!(benches);
