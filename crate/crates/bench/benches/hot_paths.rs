use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use ices::assets;
use ices::consumers::{solve_response, RetailPrices};
use ices::environment::{EnvConfig, Environment, ACTION_DIM};
use ices::networks::solve_distflow;
use ices::neural::{mse, Activation, Mlp};
use ices::saferl::{AgentConfig, Trainer};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn env_step(c: &mut Criterion) {
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let mut env = Environment::new(model, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let actions: Vec<Vec<f64>> = (0..64)
        .map(|_| {
            (0..ACTION_DIM)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    env.reset();
    let mut i = 0;
    c.bench_function("env_step", |b| {
        b.iter(|| {
            let out = env.step(black_box(&actions[i % actions.len()])).unwrap();
            i += 1;
            if out.terminal {
                env.reset();
            }
            out.reward
        })
    });
}

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = Mlp::new(
        &[21, 128, 32, 1],
        Activation::Relu,
        Activation::Identity,
        1.0,
        &mut rng,
    )
    .unwrap();
    let x = Array2::from_shape_fn((128, 21), |_| rng.random_range(-1.0..1.0));
    let target = Array1::from_shape_fn(128, |_| rng.random_range(-1.0..1.0));
    c.bench_function("mlp_forward_batch_128", |b| {
        b.iter(|| net.forward_batch(black_box(x.view())).unwrap())
    });
    c.bench_function("mlp_grad_batch_128", |b| {
        b.iter(|| {
            net.grad(black_box(x.view()), |out| mse(out, &target))
                .unwrap()
        })
    });
}

fn consumer(c: &mut Criterion) {
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let profiles = &model.meus[12];
    let prices = RetailPrices::new(30.0, 20.0, 25.0);
    c.bench_function("consumer_solve_5_users", |b| {
        b.iter(|| {
            profiles
                .iter()
                .map(|p| solve_response(black_box(p), black_box(&prices)).electricity())
                .sum::<f64>()
        })
    });
}

fn networks(c: &mut Criterion) {
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let net = &model.nets.electric;
    let injections: Vec<(f64, f64)> = (0..net.bus_count)
        .map(|i| {
            if i == net.root {
                (0.0, 0.0)
            } else {
                (1.2, 0.4)
            }
        })
        .collect();
    c.bench_function("distflow_33_bus", |b| {
        b.iter(|| solve_distflow(net, black_box(&injections)).unwrap())
    });
}

fn training_episode(c: &mut Criterion) {
    let model = assets::sample_model(EnvConfig::default()).unwrap();
    let config = AgentConfig::default();
    let mut warm = Trainer::new(model, config, 3, 1000).unwrap();
    for _ in 0..6 {
        warm.run_episode().unwrap();
    }
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("episode_with_updates", |b| {
        b.iter_batched(
            || warm.clone(),
            |mut t| t.run_episode().unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, env_step, mlp, consumer, networks, training_episode);
criterion_main!(benches);
