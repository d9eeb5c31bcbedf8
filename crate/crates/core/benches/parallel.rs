//! Parallel vs sequential throughput on the pipeline's hot loops: GKG line
//! parsing, the Granger lag scan across many series, and the ADF null
//! Monte Carlo.
//!
//! The `map_*` helpers fan out over rayon under the default `parallel`
//! feature and degrade to plain iterators without it; the `*_seq` variants
//! are always sequential, so each group shows the speedup side by side.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::Rng as _;

use framecast_core::econ::{adf_test, scan_lags};
use framecast_core::gkg::parse_gkg_record;
use framecast_core::month::MonthRange;
use framecast_core::par;
use framecast_core::rng::{derive_seed_indexed, stream, Rng};
use framecast_core::synth;
use framecast_core::StateCode;

fn gauss(rng: &mut Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn synth_lines() -> Vec<String> {
    let state: StateCode = "CA".parse().unwrap();
    let range = MonthRange::new("2015-01".parse().unwrap(), "2018-12".parse().unwrap()).unwrap();
    synth::generate_state(&state, &range, 1, 7).gkg_lines
}

fn bench_parse(c: &mut Criterion) {
    let lines = synth_lines();
    let mut group = c.benchmark_group("gkg_parse");
    group.throughput(Throughput::Elements(lines.len() as u64));
    group.bench_with_input(
        BenchmarkId::new("parallel", lines.len()),
        &lines,
        |b, lines| {
            b.iter(|| {
                par::map_slice(lines, |line| {
                    parse_gkg_record(line).map(|p| p.record.themes.len())
                })
            })
        },
    );
    group.bench_with_input(
        BenchmarkId::new("sequential", lines.len()),
        &lines,
        |b, lines| {
            b.iter(|| {
                par::map_slice_seq(lines, |line| {
                    parse_gkg_record(line).map(|p| p.record.themes.len())
                })
            })
        },
    );
    group.finish();
}

fn series_pairs(count: usize, t_len: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|i| {
            let mut rng = stream(derive_seed_indexed(13, "bench-series", i as u64));
            let mut x = vec![0.0; t_len];
            let mut y = vec![0.0; t_len];
            for t in 1..t_len {
                x[t] = 0.4 * x[t - 1] + gauss(&mut rng);
                y[t] = 0.5 * y[t - 1] + 0.2 * x[t - 1] + gauss(&mut rng);
            }
            (x, y)
        })
        .collect()
}

fn bench_lag_scan(c: &mut Criterion) {
    let pairs = series_pairs(96, 108);
    let mut group = c.benchmark_group("granger_scan");
    group.throughput(Throughput::Elements(pairs.len() as u64));
    group.bench_with_input(
        BenchmarkId::new("parallel", pairs.len()),
        &pairs,
        |b, pairs| {
            b.iter(|| {
                par::map_slice(pairs, |(x, y)| {
                    scan_lags(x, y, &[1, 2, 3]).map(|r| r.p_value)
                })
            })
        },
    );
    group.bench_with_input(
        BenchmarkId::new("sequential", pairs.len()),
        &pairs,
        |b, pairs| {
            b.iter(|| {
                par::map_slice_seq(pairs, |(x, y)| {
                    scan_lags(x, y, &[1, 2, 3]).map(|r| r.p_value)
                })
            })
        },
    );
    group.finish();
}

fn bench_adf_monte_carlo(c: &mut Criterion) {
    let replicates = 256usize;
    let mut group = c.benchmark_group("adf_null_mc");
    group.throughput(Throughput::Elements(replicates as u64));
    let walk = |seed: usize| -> Vec<f64> {
        let mut rng = stream(derive_seed_indexed(29, "bench-adf", seed as u64));
        let mut y = vec![0.0; 240];
        for t in 1..240 {
            y[t] = y[t - 1] + gauss(&mut rng);
        }
        y
    };
    group.bench_function(BenchmarkId::new("parallel", replicates), |b| {
        b.iter(|| {
            par::map_range(replicates, |s| {
                adf_test(&walk(s)).map(|r| r.reject_unit_root)
            })
        })
    });
    group.bench_function(BenchmarkId::new("sequential", replicates), |b| {
        b.iter(|| {
            par::map_range_seq(replicates, |s| {
                adf_test(&walk(s)).map(|r| r.reject_unit_root)
            })
        })
    });
    group.finish();
}

criterion_group!(benches, bench_parse, bench_lag_scan, bench_adf_monte_carlo);
criterion_main!(benches);
