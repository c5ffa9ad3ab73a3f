//! Parallel vs sequential timings for the hot loops.
//!
//! "sequential" runs inside a one-thread rayon pool, so both variants use the
//! same binary. Build with `--no-default-features` to time the plain-iterator
//! fallback instead.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hyqnet_core::models::hqcnn_quantum_spec;
use hyqnet_core::nn::{conv2d, Module, Padding};
use hyqnet_core::qnn::{MachineType, QuantumLayer};
use hyqnet_core::qsim::{measure_shots, simulate, Circuit, GateOp, StateVector};
use hyqnet_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

fn pools() -> Vec<(&'static str, ThreadPool)> {
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    vec![("parallel", all), ("sequential", one)]
}

fn gate_layer(c: &mut Criterion) {
    let mut g = c.benchmark_group("gate_layer");
    g.sample_size(10);
    for (name, pool) in pools() {
        for n in [16, 18, 20] {
            let mut circuit = Circuit::new(n).unwrap();
            for q in 0..n {
                circuit.push(GateOp::h(q)).unwrap();
                circuit.push(GateOp::ry(q, 0.3 + q as f64)).unwrap();
            }
            for q in 1..n {
                circuit.push(GateOp::cnot(q - 1, q)).unwrap();
            }
            g.bench_with_input(BenchmarkId::new(name, n), &circuit, |b, circuit| {
                b.iter(|| {
                    pool.install(|| {
                        let mut s = StateVector::new(n).unwrap();
                        for op in circuit.ops() {
                            s.apply(op).unwrap();
                        }
                        black_box(s.norm_sqr())
                    })
                })
            });
        }
    }
    g.finish();
}

fn shots(c: &mut Criterion) {
    let mut circuit = Circuit::new(10).unwrap();
    for q in 0..10 {
        circuit.push(GateOp::ry(q, 0.2 * q as f64 + 0.1)).unwrap();
    }
    let state = simulate(&circuit).unwrap();
    let qubits: Vec<usize> = (0..10).collect();
    let mut g = c.benchmark_group("shots_100k");
    for (name, pool) in pools() {
        g.bench_function(name, |b| {
            b.iter(|| {
                pool.install(|| black_box(measure_shots(&state, &qubits, 100_000, 1).unwrap()))
            })
        });
    }
    g.finish();
}

fn quantum_layer_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xs: Vec<f64> = (0..256).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut g = c.benchmark_group("quantum_layer_256");
    for (name, pool) in pools() {
        g.bench_function(name, |b| {
            // tensors are thread-local, so the graph is built inside the pool
            b.iter(|| {
                pool.install(|| {
                    let spec = hqcnn_quantum_spec(MachineType::ExactProb, 0.5, 0);
                    let layer =
                        QuantumLayer::<f64>::new(spec, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
                    let x = Tensor::new(xs.clone(), &[256, 1], true).unwrap();
                    layer.forward(&x).unwrap().sum().backward().unwrap();
                    black_box(x.grad())
                })
            })
        });
    }
    g.finish();
}

fn conv_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut values =
        |n: usize| -> Vec<f32> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let (xv, wv, bv) = (values(32 * 6 * 12 * 12), values(16 * 6 * 5 * 5), values(16));
    let mut g = c.benchmark_group("conv2d_32x6x12x12");
    for (name, pool) in pools() {
        g.bench_function(name, |b| {
            b.iter(|| {
                pool.install(|| {
                    let x = Tensor::from_slice(&xv, &[32, 6, 12, 12], true).unwrap();
                    let w = Tensor::from_slice(&wv, &[16, 6, 5, 5], true).unwrap();
                    let bias = Tensor::from_slice(&bv, &[16], true).unwrap();
                    let y = conv2d(&x, &w, &bias, (1, 1), Padding::Valid).unwrap();
                    y.sum().backward().unwrap();
                    black_box(w.grad())
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, gate_layer, shots, quantum_layer_batch, conv_batch);
criterion_main!(benches);
