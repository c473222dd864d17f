//! Finite-difference checks of the network and value-function gradients.

mod common;

use common::{check_model, fd_check, gradient_configs};
use d2gan::data::{Rng, Stream};
use d2gan::nn::{Activation, LayerSpec, Network};
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn value_function_gradients_match_finite_differences() {
    for config in gradient_configs() {
        for seed in 0..3 {
            let worst = check_model(&config, seed);
            assert!(worst < 1e-3, "{} seed {seed}: max relative error {worst}", config.model);
        }
    }
}

#[test]
fn identity_layer_gradient_by_hand() {
    let net = Network::from_params(vec![LayerSpec::new(1, 1, Activation::Identity)], vec![0.7, -0.2]).unwrap();
    let x = Array2::from_elem((1, 1), 3.0);
    let up = Array2::from_elem((1, 1), 1.0);
    let g = net.backward(x.view(), up.view()).unwrap();
    assert_eq!(g.params, vec![3.0, 1.0]);
    assert_eq!(g.input[[0, 0]], 0.7);
    let zero = Array2::zeros((1, 1));
    assert!(net.backward(x.view(), zero.view()).unwrap().params.iter().all(|v| *v == 0.0));
}

fn activation() -> impl Strategy<Value = Activation> {
    prop_oneof![
        Just(Activation::Relu),
        Just(Activation::Softplus),
        Just(Activation::Sigmoid),
        Just(Activation::Identity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Random small nets under a random linear read-out of their output.
    #[test]
    fn random_network_gradients(
        dims in prop::collection::vec(1usize..=8, 2..=4),
        acts in prop::collection::vec(activation(), 3),
        seed in any::<u64>(),
    ) {
        let layers: Vec<LayerSpec> = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| LayerSpec::new(w[0], w[1], acts[i]))
            .collect();
        let mut rng = Rng::new(seed, Stream::Init);
        let net = Network::init(layers, &mut rng).unwrap();
        let n = 5;
        let x = Array2::from_shape_simple_fn((n, net.in_dim()), || rng.normal());
        let w = Array2::from_shape_simple_fn((n, net.out_dim()), || rng.normal());
        let loss = |net: &Network| (&net.forward(x.view()).unwrap() * &w).sum();

        let tape = net.forward_tape(x.view()).unwrap();
        let g = net.backward_tape(&tape, w.view()).unwrap();
        // Skip draws where some ReLU pre-activation sits on its kink.
        let near_kink = net.layers().iter().zip(tape.pre_activations()).any(|(l, z)| {
            l.activation == Activation::Relu && z.iter().any(|v| v.abs() < 1e-6)
        });
        prop_assume!(!near_kink);

        let mut p = net.params().to_vec();
        let worst = fd_check(&mut p, &g.params, |p| {
            let mut m = net.clone();
            m.params_mut().copy_from_slice(p);
            loss(&m)
        });
        prop_assert!(worst < 1e-4, "max relative error {}", worst);
    }
}
