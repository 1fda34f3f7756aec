//! Criterion benchmarks for the hot paths: simplex projection, the unrolled
//! encoder, exact recovery solvers, Delaunay triangulation, and spectral
//! embedding.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simplexcode::geometry::{self, Landmarks};
use simplexcode::simplex::{project_simplex, PenalizedLossParams};
use simplexcode::{encoder, gen_two_moons, oracle, similarity_graph, spectral_embed, Dictionary};

fn random_landmarks(rng: &mut ChaCha8Rng, m: usize) -> Landmarks {
    loop {
        let mut pts = Array2::zeros((2, m));
        for x in pts.iter_mut() {
            *x = rng.random::<f64>();
        }
        if let Ok(l) = Landmarks::new(pts) {
            if geometry::general_position_check(&l, geometry::COSPHERE_TOL).is_general() {
                return l;
            }
        }
    }
}

fn bench_projection(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("project_simplex_m64", |b| {
        b.iter_batched(
            || Array1::from_iter((0..64).map(|_| rng.random_range(-1.0..1.0))),
            |v| project_simplex(v.view()).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_encoder(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let l = random_landmarks(&mut rng, 16);
    let dict = Dictionary::from(l);
    let alpha = encoder::default_step_size(&dict);
    let params = PenalizedLossParams::new(1e-2, alpha, 100).unwrap();
    let y = Array1::from_vec(vec![0.4, 0.6]);
    c.bench_function("encode_T100_m16", |b| {
        b.iter(|| encoder::encode(&dict, y.view(), &params).unwrap())
    });
}

fn bench_oracle(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let l = random_landmarks(&mut rng, 12);
    let dict = Dictionary::from(l);
    let y = Array1::from_vec(vec![0.5, 0.5]);
    c.bench_function("solve_weighted_l1_exact_m12", |b| {
        b.iter(|| oracle::solve_weighted_l1_exact(&dict, y.view()).unwrap())
    });
}

fn bench_triangulation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = random_landmarks(&mut rng, 16);
    c.bench_function("delaunay_triangulate_m16", |b| {
        b.iter(|| geometry::delaunay_triangulate(&l).unwrap())
    });
}

fn bench_spectral(c: &mut Criterion) {
    let data = gen_two_moons(200, 0.05, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // random sparse-ish nonnegative codes stand in for learned ones
    let mut codes = Array2::zeros((16, 200));
    for mut col in codes.columns_mut() {
        let a = rng.random_range(0..16);
        let b = rng.random_range(0..16);
        let w = rng.random::<f64>();
        col[a] += w;
        col[b] += 1.0 - w;
    }
    let _ = data;
    c.bench_function("spectral_embed_n200", |b| {
        b.iter(|| {
            let g = similarity_graph(codes.view()).unwrap();
            spectral_embed(&g, 2).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_projection,
    bench_encoder,
    bench_oracle,
    bench_triangulation,
    bench_spectral
);
criterion_main!(benches);
