//! Finite-difference checks of reverse-mode gradients and forward-mode tangents.

use cellhealth_nn::{Activation, Adam, LayerSpec, Network, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs().max(b.abs())).max(1e-6)
}

/// Mean squared output of `net` on `x` against `target`, with gradients.
fn loss_and_grads(net: &Network, x: &Tensor, target: &Tensor) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let params = net.register(&mut tape, true);
    let xv = tape.constant(x.clone());
    let y = net.forward_tape(&mut tape, &params, xv).unwrap();
    let t = tape.constant(target.clone());
    let d = tape.sub(y, t).unwrap();
    let q = tape.square(d);
    let loss = tape.mean(q);
    let grads = tape.backward(loss).unwrap();
    let value = tape.value(loss).data()[0];
    (value, params.iter().map(|p| grads.get(*p).unwrap().clone()).collect())
}

/// Compares analytic parameter gradients with central differences at
/// `coords` randomly chosen parameter coordinates.
fn check_network(net: &Network, x: &Tensor, coords: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_shape: Vec<usize> = std::iter::once(x.shape()[0]).chain(net.output_shape()).collect();
    let target = random(&out_shape, &mut rng);
    let (_, grads) = loss_and_grads(net, x, &target);
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let k = rng.gen_range(0..sizes.len());
        let i = rng.gen_range(0..sizes[k]);
        let mut plus = net.clone();
        plus.params_mut()[k].data_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[k].data_mut()[i] -= h;
        let fd = (loss_and_grads(&plus, x, &target).0 - loss_and_grads(&minus, x, &target).0) / (2.0 * h);
        worst = worst.max(rel_err(fd, grads[k].data()[i]));
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn dense_tanh_gradients_match_finite_differences() {
    let net = Network::mlp(&[8, 16, 16, 1], Activation::Tanh, Activation::Sigmoid, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    check_network(&net, &random(&[10, 8], &mut rng), 120, 2);
}

#[test]
fn dense_sigmoid_gradients_match_finite_differences() {
    let net = Network::mlp(&[8, 16, 16, 1], Activation::Sigmoid, Activation::Sigmoid, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    check_network(&net, &random(&[10, 8], &mut rng), 120, 1);
}

#[test]
fn dense_relu_gradients_match_finite_differences() {
    let net = Network::mlp(&[8, 64, 64, 64, 1], Activation::Relu, Activation::Sigmoid, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    check_network(&net, &random(&[16, 8], &mut rng), 150, 2);
}

#[test]
fn convolution_and_pooling_gradients_match_finite_differences() {
    let net = Network::new(
        &[32, 3],
        &[
            LayerSpec::Conv1d { channels: 3, filters: 16, kernel: 3, activation: Activation::Relu },
            LayerSpec::MaxPool,
            LayerSpec::Conv1d { channels: 16, filters: 32, kernel: 3, activation: Activation::Relu },
            LayerSpec::MaxPool,
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 6 * 32, outputs: 64, activation: Activation::Relu },
            LayerSpec::Dense { inputs: 64, outputs: 6, activation: Activation::Sigmoid },
        ],
        3,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    check_network(&net, &random(&[4, 32, 3], &mut rng), 150, 3);
}

#[test]
fn tangent_matches_finite_difference_in_time() {
    for hidden in [Activation::Relu, Activation::Tanh] {
        let net = Network::mlp(&[8, 64, 64, 64, 1], hidden, Activation::Sigmoid, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random(&[50, 8], &mut rng);
        let d = net.time_derivative(&x, 7).unwrap();
        let h = 1e-6;
        let shifted = |s: f64| {
            let mut xs = x.clone();
            for row in xs.data_mut().chunks_mut(8) {
                row[7] += s;
            }
            net.forward(&xs).unwrap()
        };
        let (yp, ym) = (shifted(h), shifted(-h));
        let mut worst = 0.0f64;
        for i in 0..50 {
            let fd = (yp.data()[i] - ym.data()[i]) / (2.0 * h);
            worst = worst.max(rel_err(fd, d.data()[i]));
        }
        assert!(worst < 1e-6, "{hidden:?}: worst relative error {worst}");
        assert!(net.time_derivative(&x, 8).is_err());
    }
}

/// Loss on the time derivative itself, as in an ODE residual penalty.
fn derivative_loss(net: &Network, x: &Tensor) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let params = net.register(&mut tape, true);
    let xv = tape.constant(x.clone());
    let mut dx = Tensor::zeros(x.shape());
    for row in dx.data_mut().chunks_mut(x.cols()) {
        row[x.cols() - 1] = 1.0;
    }
    let dxv = tape.constant(dx);
    let (y, dy) = net.forward_tangent_tape(&mut tape, &params, xv, dxv).unwrap();
    let scaled = tape.scale(y, 0.3);
    let r = tape.add(dy, scaled).unwrap();
    let q = tape.square(r);
    let loss = tape.mean(q);
    let g = tape.backward(loss).unwrap();
    let value = tape.value(loss).data()[0];
    (value, params.iter().map(|p| g.get(*p).unwrap().clone()).collect())
}

#[test]
fn derivative_penalty_gradients_match_finite_differences() {
    let net = Network::mlp(&[4, 12, 12, 1], Activation::Sigmoid, Activation::Sigmoid, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let x = random(&[20, 4], &mut rng);
    let (_, grads) = derivative_loss(&net, &x);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.gen_range(0..grads.len());
        let i = rng.gen_range(0..grads[k].len());
        let mut plus = net.clone();
        plus.params_mut()[k].data_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[k].data_mut()[i] -= h;
        let fd = (derivative_loss(&plus, &x).0 - derivative_loss(&minus, &x).0) / (2.0 * h);
        worst = worst.max(rel_err(fd, grads[k].data()[i]));
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn tanh_derivative_penalty_gradients_match_finite_differences() {
    let net = Network::mlp(&[4, 12, 12, 1], Activation::Tanh, Activation::Sigmoid, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let x = random(&[20, 4], &mut rng);
    let (_, grads) = derivative_loss(&net, &x);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.gen_range(0..grads.len());
        let i = rng.gen_range(0..grads[k].len());
        let mut plus = net.clone();
        plus.params_mut()[k].data_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[k].data_mut()[i] -= h;
        let fd = (derivative_loss(&plus, &x).0 - derivative_loss(&minus, &x).0) / (2.0 * h);
        worst = worst.max(rel_err(fd, grads[k].data()[i]));
    }
    assert!(worst < 1e-5, "worst relative error {worst}");
}

#[test]
fn frozen_network_passes_input_gradient_only() {
    let net = Network::mlp(&[3, 8, 1], Activation::Sigmoid, Activation::Sigmoid, 6).unwrap();
    let mut tape = Tape::new();
    let params = net.register(&mut tape, false);
    let x = tape.leaf(Tensor::matrix(2, 3, vec![0.1, 0.2, 0.3, -0.4, 0.5, 0.6]).unwrap());
    let y = net.forward_tape(&mut tape, &params, x).unwrap();
    let loss = tape.sum(y);
    let g = tape.backward(loss).unwrap();
    assert!(params.iter().all(|p| g.get(*p).is_none()));
    assert!(g.get(x).unwrap().data().iter().any(|&v| v != 0.0));
}

#[test]
fn identical_training_runs_are_bit_identical() {
    let run = || {
        let mut net = Network::mlp(&[3, 8, 1], Activation::Relu, Activation::Sigmoid, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random(&[16, 3], &mut rng);
        let t = random(&[16, 1], &mut rng);
        let mut opt = Adam::new(&net.params(), 1e-3);
        for _ in 0..50 {
            let (_, grads) = loss_and_grads(&net, &x, &t);
            opt.step(&mut net.params_mut(), &grads).unwrap();
        }
        net
    };
    assert_eq!(run(), run());
}
