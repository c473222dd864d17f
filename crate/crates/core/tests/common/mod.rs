//! Finite-difference helpers shared by the gradient tests and the acceptance
//! run.
#![allow(dead_code)]

use d2gan::data::{sample_noise, sample_ring, RingSpec, Rng, Stream};
use d2gan::losses::{LossDescriptor, LossPairDescriptor};
use d2gan::nn::{Activation, LayerSpec, Network};
use d2gan::trainer::{batch_value_and_grads, ModelKind, Nets, Objective, TrainConfig, Want};
use ndarray::ArrayView2;

pub const H: f64 = 1e-5;

pub fn rel_err(fd: f64, g: f64) -> f64 {
    (fd - g).abs() / fd.abs().max(g.abs()).max(1e-7)
}

/// Largest relative error over all parameters of `params`, perturbing each
/// in turn and re-evaluating `f`.
pub fn fd_check(params: &mut [f64], grads: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + H;
        let up = f(params);
        params[i] = orig - H;
        let down = f(params);
        params[i] = orig;
        worst = worst.max(rel_err((up - down) / (2.0 * H), grads[i]));
    }
    worst
}

pub fn small_config(model: ModelKind) -> TrainConfig {
    let mut c = TrainConfig::published(model);
    c.noise_dim = 3;
    c.hidden = 4;
    c
}

pub fn small_nets(model: ModelKind, seed: u64) -> Nets {
    let mut rng = Rng::new(seed, Stream::Init);
    let out = if model == ModelKind::Vanilla {
        Activation::Sigmoid
    } else {
        Activation::Softplus
    };
    let g = vec![
        LayerSpec::new(3, 4, Activation::Relu),
        LayerSpec::new(4, 4, Activation::Relu),
        LayerSpec::new(4, 2, Activation::Identity),
    ];
    let d = vec![LayerSpec::new(2, 4, Activation::Relu), LayerSpec::new(4, 1, out)];
    // Initial biases are zero, which puts a hidden unit exactly on its ReLU
    // kink whenever all its inputs vanish; jitter every parameter off it.
    let mut jittered = |layers: Vec<LayerSpec>| {
        let mut net = Network::init(layers, &mut rng).unwrap();
        for p in net.params_mut() {
            *p += 0.1 * rng.normal();
        }
        net
    };
    Nets {
        generator: jittered(g),
        d1: jittered(d.clone()),
        d2: (model != ModelKind::Vanilla).then(|| jittered(d)),
    }
}

pub fn value(obj: &Objective, nets: &Nets, real: ArrayView2<f64>, noise: ArrayView2<f64>) -> f64 {
    batch_value_and_grads(obj, nets, real, noise, Want::NONE).unwrap().value
}

pub fn check_model(config: &TrainConfig, seed: u64) -> f64 {
    let obj = Objective::from_config(config).unwrap();
    let nets = small_nets(config.model, seed);
    let mut rng = Rng::new(seed, Stream::Data);
    let real = sample_ring(&RingSpec::default(), 8, &mut rng);
    let noise = sample_noise(8, 3, &mut rng);
    let g = batch_value_and_grads(&obj, &nets, real.view(), noise.view(), Want::ALL).unwrap();

    let mut worst: f64 = 0.0;
    let mut p = nets.generator.params().to_vec();
    worst = worst.max(fd_check(&mut p, g.generator.as_ref().unwrap(), |p| {
        let mut n = nets.clone();
        n.generator.params_mut().copy_from_slice(p);
        value(&obj, &n, real.view(), noise.view())
    }));
    let mut p = nets.d1.params().to_vec();
    worst = worst.max(fd_check(&mut p, g.d1.as_ref().unwrap(), |p| {
        let mut n = nets.clone();
        n.d1.params_mut().copy_from_slice(p);
        value(&obj, &n, real.view(), noise.view())
    }));
    if let Some(d2) = &nets.d2 {
        let mut p = d2.params().to_vec();
        worst = worst.max(fd_check(&mut p, g.d2.as_ref().unwrap(), |p| {
            let mut n = nets.clone();
            n.d2.as_mut().unwrap().params_mut().copy_from_slice(p);
            value(&obj, &n, real.view(), noise.view())
        }));
    }
    worst
}

/// One small config per model, the general one with `(ℓ_{0.5}, 1 − t)`.
pub fn gradient_configs() -> Vec<TrainConfig> {
    let mut general = small_config(ModelKind::D2general);
    general.losses = Some(LossPairDescriptor {
        l1: LossDescriptor::Alpha { alpha: 0.5 },
        l2: LossDescriptor::OneMinus {},
    });
    vec![
        small_config(ModelKind::Vanilla),
        small_config(ModelKind::D2),
        small_config(ModelKind::D2alpha),
        general,
    ]
}
