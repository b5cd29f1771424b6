use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hmappo_core::algo::{collect_rollouts, ppo_policy_loss, Actor, PolicyMinibatch};
use hmappo_core::envs::tabular::{TabularDecPomdp, TabularPolicy, DEFAULT_BUDGET};
use hmappo_core::envs::{ParticleEnv, ParticleWorldConfig};
use hmappo_core::nn::{Activation, GaussianPolicy, Mlp, MlpSpec};
use hmappo_core::oracle::exact_objective;
use hmappo_core::rng::stream;
use hmappo_core::{Environment, Scenario};
use ndarray::Array2;

fn mlp(c: &mut Criterion) {
    let critic = Mlp::init(MlpSpec::uniform(60, &[64; 8], Activation::Elu, 1).unwrap(), 1.0, &mut stream(1, &[]));
    let x = Array2::from_shape_fn((1600, 60), |(i, j)| ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5);
    c.bench_function("critic forward 1600x60", |b| b.iter(|| critic.forward(x.view()).unwrap()));
    let (_, cache) = critic.forward(x.view()).unwrap();
    let dout = Array2::from_elem((1600, 1), 1e-3);
    c.bench_function("critic backward 1600x60", |b| b.iter(|| critic.backward(&cache, dout.view()).unwrap()));
}

fn surrogate(c: &mut Criterion) {
    let policy = GaussianPolicy::new(25, &[64, 64], Activation::Tanh, 2, &mut stream(2, &[])).unwrap();
    let obs = Array2::from_shape_fn((6400, 25), |(i, j)| ((i + 3 * j) % 11) as f64 / 11.0 - 0.5);
    let act = Array2::from_shape_fn((6400, 2), |(i, j)| ((i * j) % 5) as f64 / 5.0 - 0.4);
    let old = vec![-1.0; 6400];
    let psi = vec![0.3; 6400];
    let h = vec![1.0; 6400];
    c.bench_function("ppo minibatch 6400", |b| {
        b.iter(|| {
            ppo_policy_loss(
                &policy,
                PolicyMinibatch { observations: obs.view(), actions: act.view(), old_log_probs: &old, psi: &psi, health: &h },
                0.2,
                0.01,
            )
            .unwrap()
        })
    });
}

fn rollout(c: &mut Criterion) {
    let env = ParticleEnv::new(ParticleWorldConfig::for_scenario(Scenario::HazardousNav, 4)).unwrap();
    let policy = GaussianPolicy::new(env.obs_dim(), &[64, 64], Activation::Tanh, 2, &mut stream(3, &[])).unwrap();
    let mut k = 0u64;
    c.bench_function("rollout 16 episodes, 4 agents", |b| {
        b.iter_batched(
            || {
                k += 16;
                k
            },
            |first| collect_rollouts(&env, Actor::Stochastic(&policy), 16, 9, first).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn enumeration(c: &mut Criterion) {
    let model = TabularDecPomdp::toy();
    let policy = TabularPolicy::random(&model, 1.0, &mut stream(4, &[]));
    c.bench_function("exact objective, toy model", |b| b.iter(|| exact_objective(&model, &policy, DEFAULT_BUDGET).unwrap()));
}

criterion_group!(benches, mlp, surrogate, rollout, enumeration);
criterion_main!(benches);
