use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use hetnet_bench::{dense_env, desk_config, filled_buffer, random_action, reset_env};
use hetnet_core::neuro::{Activation, Mlp};
use hetnet_core::ppo::{ppo_loss, PpoAgent};
use hetnet_core::rng::stream;
use hetnet_core::td3::Td3Agent;
use ndarray::Array2;

fn env_step(c: &mut Criterion) {
    for users in [20, 50] {
        let cfg = dense_env(users, 1_000_000);
        let mut env = reset_env(&cfg, 1);
        let mut rng = stream(2, "bench");
        let action = random_action(env.action_len(), &mut rng);
        c.bench_function(&format!("env_step/dense_{users}u"), |b| {
            b.iter(|| black_box(env.step(black_box(&action)).unwrap().reward))
        });
    }
}

fn mlp(c: &mut Criterion) {
    let mut rng = stream(3, "bench-mlp");
    // Desk critic shape: state + action in, scalar out.
    let net = Mlp::new(&[405, 64, 64, 1], Activation::Relu, Activation::Linear, &mut rng);
    let x = Array2::from_shape_fn((64, 405), |(i, j)| ((i * 7 + j) as f64 * 0.01).sin());
    let up = Array2::from_elem((64, 1), 1.0 / 64.0);
    c.bench_function("mlp/forward_b64", |b| b.iter(|| black_box(net.predict_batch(x.view()).unwrap())));
    c.bench_function("mlp/forward_backward_b64", |b| {
        b.iter(|| {
            let (_, cache) = net.forward_batch(x.view()).unwrap();
            black_box(net.backward(&cache, up.view()).unwrap())
        })
    });
}

fn agents(c: &mut Criterion) {
    let desk = desk_config();
    let env_cfg = desk.env_config();
    let layout = env_cfg.layout();
    let mut buffer = filled_buffer(&env_cfg, 2_000, 4);
    let mut rng = stream(5, "bench-td3");
    let mut agent = Td3Agent::new(layout.state_len(), layout.action_len(), desk.td3.clone(), &mut rng);
    c.bench_function("td3/update_desk", |b| {
        b.iter(|| black_box(agent.update(&mut buffer, &mut rng).unwrap()))
    });

    let ppo = PpoAgent::new(layout.state_len(), layout.action_len(), desk.ppo.clone(), &mut rng);
    let n = desk.ppo.minibatch;
    let s = Array2::from_shape_fn((n, layout.state_len()), |(i, j)| buffer.get(i).state[j]);
    let a = Array2::from_shape_fn((n, layout.action_len()), |(i, j)| buffer.get(i).action[j]);
    let old = vec![0.0; n];
    let adv: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
    let ret = vec![0.5; n];
    c.bench_function("ppo/loss_and_grads_desk", |b| {
        b.iter_batched(
            || (),
            |_| black_box(ppo_loss(&ppo.policy, &ppo.critic, &s, &a, &old, &adv, &ret, &ppo.config).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, env_step, mlp, agents);
criterion_main!(benches);
