use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crlab_core::embedded::{tangency_check, Hypersurface, TestFunction};
use crlab_core::fillability::{canonical_j, match_jets};
use crlab_core::operators::cartan_tensor;
use crlab_core::phstructure::catalog::t3_roto;
use crlab_core::sampling::{band_limited, rng};
use crlab_core::Chart;
use nalgebra::Matrix4;
use std::hint::black_box;

fn spectral_derivative(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_derivative");
    for n in [16usize, 32, 64] {
        let chart = Chart::periodic3([n; 3], [1.0; 3]).unwrap();
        let f = band_limited(&chart, 3, &mut rng(1));
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| b.iter(|| black_box(f.partial(2).unwrap())));
    }
    g.finish();
}

fn structure_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("structure_solve");
    g.sample_size(10);
    for n in [16usize, 32] {
        let mut m = t3_roto(1, [n; 3]).unwrap();
        m.beta = band_limited(&m.chart, 2, &mut rng(2)).scale_re(0.01);
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| black_box(m.structure().unwrap())));
    }
    g.finish();
}

fn cartan(c: &mut Criterion) {
    let mut g = c.benchmark_group("cartan_tensor");
    g.sample_size(10);
    for n in [16usize, 32] {
        let s = t3_roto(1, [n; 3]).unwrap().structure().unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &s, |b, s| b.iter(|| black_box(cartan_tensor(s).unwrap())));
    }
    g.finish();
}

fn jets(c: &mut Criterion) {
    let j = canonical_j();
    let x = Matrix4::from_fn(|a, b| ((3 * a + b) as f64).sin());
    let rhs = x * j - j * x;
    c.bench_function("match_jets", |b| b.iter(|| black_box(match_jets(&j, &rhs).unwrap())));
}

fn tangency(c: &mut Criterion) {
    let geom = Hypersurface::Sphere;
    let p = geom.samples(1).unwrap()[0];
    let f = TestFunction::parse("z1barsq").unwrap();
    c.bench_function("tangency_check", |b| b.iter(|| black_box(tangency_check(&geom, &f, &p, 1e-3).unwrap())));
}

criterion_group!(benches, spectral_derivative, structure_solve, cartan, jets, tangency);
criterion_main!(benches);
