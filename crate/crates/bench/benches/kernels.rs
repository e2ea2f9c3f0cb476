use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hdxcsp_bench::{complete, planted_xor, solved_ensemble, sparse};
use hdxcsp_core::csp::{brute_force_opt, constraint_complex};
use hdxcsp_core::rounding::{propagation_rounding, swap_graph, RoundingOptions};
use hdxcsp_core::sos::{build_relaxation, solve_sdp};
use hdxcsp_core::spectra::weighted_singular_values;
use hdxcsp_core::walks::{canonical_walk, swap_walk, SwapMethod};
use hdxcsp_core::{eposet_parameter, hdx_parameter};

fn walks(c: &mut Criterion) {
    let x = complete(10, 4);
    let mut g = c.benchmark_group("walks");
    g.bench_function("swap_closed_form_2_2_delta4_10", |b| {
        b.iter(|| swap_walk(black_box(&x), 2, 2, 2, 2, SwapMethod::ClosedForm).unwrap())
    });
    g.bench_function("swap_conditioned_2_2_u2_delta4_10", |b| {
        b.iter(|| swap_walk(black_box(&x), 2, 2, 2, 2, SwapMethod::Conditioned).unwrap())
    });
    g.bench_function("canonical_2_2_2_delta4_10", |b| {
        b.iter(|| canonical_walk(black_box(&x), 2, 2, 2).unwrap())
    });
    g.finish();
}

fn spectra(c: &mut Criterion) {
    let x = complete(10, 4);
    let s = swap_walk(&x, 2, 2, 2, 2, SwapMethod::ClosedForm).unwrap();
    let y = sparse();
    let mut g = c.benchmark_group("spectra");
    g.bench_function("swap_singular_values_delta4_10", |b| {
        b.iter(|| weighted_singular_values(black_box(&s)).unwrap())
    });
    g.bench_function("hdx_parameter_sparse", |b| b.iter(|| hdx_parameter(black_box(&y)).unwrap()));
    g.bench_function("eposet_parameter_sparse", |b| b.iter(|| eposet_parameter(black_box(&y)).unwrap()));
    g.bench_function("swap_graph_lambda2_delta4_10", |b| {
        b.iter(|| swap_graph(black_box(&x), 2, 2).unwrap().lambda2())
    });
    g.finish();
}

fn csp(c: &mut Criterion) {
    let inst = planted_xor(6, 15);
    let rel = build_relaxation(&inst, 6).unwrap();
    let mut g = c.benchmark_group("csp");
    g.sample_size(10);
    g.bench_function("brute_force_n12", |b| {
        let big = planted_xor(12, 60);
        b.iter(|| brute_force_opt(black_box(&big)).unwrap())
    });
    g.bench_function("sdp_n6_t6", |b| b.iter(|| solve_sdp(black_box(&rel), 1e-6, 50_000).unwrap()));
    let e = solved_ensemble(&inst, 6);
    let x = constraint_complex(&inst).unwrap();
    let opts = RoundingOptions::default();
    g.bench_function("propagation_rounding_trial_n6", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.iter(|| propagation_rounding(&e, &x, x.measure(3), 3, 3, &mut rng, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, walks, spectra, csp);
criterion_main!(benches);
